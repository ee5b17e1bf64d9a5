#include "namoplan/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "namoplan/rng.hpp"

namespace namoplan::gnn {

using nlohmann::json;
using scenegraph::SceneGraph;

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kClamp = 1e-12;

Linear make_linear(int in, int out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w.assign(static_cast<size_t>(in) * out, 0.0);
  l.b.assign(out, 0.0);
  return l;
}

Block make_block(int in) {
  Block b;
  b.lin = make_linear(in, kHidden);
  b.ln.gain.assign(kHidden, 0.0);
  b.ln.bias.assign(kHidden, 0.0);
  return b;
}

void fill_uniform(Linear& l, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(l.in));
  for (double& v : l.w) v = rng.uniform(-a, a);
}

// ---------------------------------------------------------------------------
// Block forward/backward over a batch of rows, with the tape needed for
// reverse mode: z (pre-relu), xhat (normalized post-relu) and 1/sigma.
// ---------------------------------------------------------------------------

struct BlockTrace {
  std::vector<double> input;      // rows x in
  std::vector<double> z;          // rows x hidden
  std::vector<double> xhat;       // rows x hidden
  std::vector<double> inv_sigma;  // rows
  std::vector<double> out;        // rows x hidden
  size_t rows = 0;
};

void block_forward(const Block& blk, std::vector<double> input, BlockTrace& t) {
  const int in = blk.lin.in;
  t.rows = input.size() / static_cast<size_t>(in);
  t.input = std::move(input);
  t.z.assign(t.rows * kHidden, 0.0);
  t.xhat.assign(t.rows * kHidden, 0.0);
  t.inv_sigma.assign(t.rows, 0.0);
  t.out.assign(t.rows * kHidden, 0.0);

  for (size_t r = 0; r < t.rows; ++r) {
    const double* x = &t.input[r * in];
    double* z = &t.z[r * kHidden];
    for (int o = 0; o < kHidden; ++o) {
      const double* wrow = &blk.lin.w[static_cast<size_t>(o) * in];
      double acc = blk.lin.b[o];
      for (int i = 0; i < in; ++i) acc += wrow[i] * x[i];
      z[o] = acc;
    }
    // relu then layer norm
    double relu[kHidden];
    double mean = 0;
    for (int o = 0; o < kHidden; ++o) {
      relu[o] = z[o] > 0 ? z[o] : 0.0;
      mean += relu[o];
    }
    mean /= kHidden;
    double var = 0;
    for (int o = 0; o < kHidden; ++o) {
      const double d = relu[o] - mean;
      var += d * d;
    }
    var /= kHidden;
    const double inv_sigma = 1.0 / std::sqrt(var + kLnEps);
    t.inv_sigma[r] = inv_sigma;
    double* xhat = &t.xhat[r * kHidden];
    double* out = &t.out[r * kHidden];
    for (int o = 0; o < kHidden; ++o) {
      xhat[o] = (relu[o] - mean) * inv_sigma;
      out[o] = blk.ln.gain[o] * xhat[o] + blk.ln.bias[o];
    }
  }
}

/// d_out is consumed row by row; d_input is accumulated into (must be sized).
void block_backward(const Block& blk, const BlockTrace& t, const std::vector<double>& d_out,
                    Block& grad, std::vector<double>& d_input) {
  const int in = blk.lin.in;
  for (size_t r = 0; r < t.rows; ++r) {
    const double* dout = &d_out[r * kHidden];
    const double* xhat = &t.xhat[r * kHidden];
    const double* z = &t.z[r * kHidden];
    const double* x = &t.input[r * in];

    // layer norm backward
    double dxhat[kHidden];
    double mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (int o = 0; o < kHidden; ++o) {
      grad.ln.gain[o] += dout[o] * xhat[o];
      grad.ln.bias[o] += dout[o];
      dxhat[o] = dout[o] * blk.ln.gain[o];
      mean_dxhat += dxhat[o];
      mean_dxhat_xhat += dxhat[o] * xhat[o];
    }
    mean_dxhat /= kHidden;
    mean_dxhat_xhat /= kHidden;

    // through relu into the linear layer
    for (int o = 0; o < kHidden; ++o) {
      const double drelu = (dxhat[o] - mean_dxhat - xhat[o] * mean_dxhat_xhat) * t.inv_sigma[r];
      const double dz = z[o] > 0 ? drelu : 0.0;
      if (dz == 0.0) continue;
      grad.lin.b[o] += dz;
      double* gw = &grad.lin.w[static_cast<size_t>(o) * in];
      const double* wrow = &blk.lin.w[static_cast<size_t>(o) * in];
      double* dx = &d_input[r * in];
      for (int i = 0; i < in; ++i) {
        gw[i] += dz * x[i];
        dx[i] += dz * wrow[i];
      }
    }
  }
}

// Full forward pass with every intermediate kept for the backward pass.
struct Tape {
  BlockTrace node_enc;
  BlockTrace edge_enc;
  std::vector<BlockTrace> edge_upd;  // one per round
  std::vector<BlockTrace> node_upd;
  std::vector<double> logits;
  std::vector<double> scores;
  std::vector<uint32_t> indegree;
};

const Block& round_block(const std::vector<Block>& blocks, int round) {
  return blocks.size() == 1 ? blocks[0] : blocks[static_cast<size_t>(round)];
}

Block& round_block(std::vector<Block>& blocks, int round) {
  return blocks.size() == 1 ? blocks[0] : blocks[static_cast<size_t>(round)];
}

void run_forward(const ModelParams& p, const SceneGraph& g, Tape& t) {
  const size_t n = g.nodes.size();
  const size_t m = g.edges.size();

  std::vector<double> node_in(n * scenegraph::kNodeDim);
  for (size_t i = 0; i < n; ++i)
    std::copy(g.nodes[i].begin(), g.nodes[i].end(), node_in.begin() + i * scenegraph::kNodeDim);
  block_forward(p.node_encoder, std::move(node_in), t.node_enc);

  std::vector<double> edge_in(m * scenegraph::kEdgeDim);
  for (size_t e = 0; e < m; ++e)
    std::copy(g.edges[e].features.begin(), g.edges[e].features.end(),
              edge_in.begin() + e * scenegraph::kEdgeDim);
  block_forward(p.edge_encoder, std::move(edge_in), t.edge_enc);

  t.indegree.assign(n, 0);
  for (const auto& e : g.edges) ++t.indegree[e.dst];

  t.edge_upd.resize(kRounds);
  t.node_upd.resize(kRounds);

  const std::vector<double>* node_h = &t.node_enc.out;
  const std::vector<double>* edge_h = &t.edge_enc.out;
  for (int round = 0; round < kRounds; ++round) {
    // node states flow into the edges...
    std::vector<double> eu_in(m * 3 * kHidden);
    for (size_t e = 0; e < m; ++e) {
      double* row = &eu_in[e * 3 * kHidden];
      std::copy_n(&(*edge_h)[e * kHidden], kHidden, row);
      std::copy_n(&(*node_h)[g.edges[e].src * kHidden], kHidden, row + kHidden);
      std::copy_n(&(*node_h)[g.edges[e].dst * kHidden], kHidden, row + 2 * kHidden);
    }
    block_forward(round_block(p.edge_update, round), std::move(eu_in), t.edge_upd[round]);
    const std::vector<double>& messages = t.edge_upd[round].out;

    // ...and mean incoming messages flow back into the nodes
    std::vector<double> nu_in(n * 2 * kHidden, 0.0);
    for (size_t i = 0; i < n; ++i)
      std::copy_n(&(*node_h)[i * kHidden], kHidden, &nu_in[i * 2 * kHidden]);
    for (size_t e = 0; e < m; ++e) {
      double* agg = &nu_in[g.edges[e].dst * 2 * kHidden + kHidden];
      for (int k = 0; k < kHidden; ++k) agg[k] += messages[e * kHidden + k];
    }
    for (size_t i = 0; i < n; ++i) {
      if (t.indegree[i] == 0) continue;
      double* agg = &nu_in[i * 2 * kHidden + kHidden];
      for (int k = 0; k < kHidden; ++k) agg[k] /= t.indegree[i];
    }
    block_forward(round_block(p.node_update, round), std::move(nu_in), t.node_upd[round]);

    node_h = &t.node_upd[round].out;
    edge_h = &t.edge_upd[round].out;
  }

  t.logits.assign(n, 0.0);
  t.scores.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double acc = p.decoder.b[0];
    for (int k = 0; k < kHidden; ++k)
      acc += p.decoder.w[k] * (*node_h)[i * kHidden + k];
    t.logits[i] = acc;
    t.scores[i] = 1.0 / (1.0 + std::exp(-acc));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter plumbing
// ---------------------------------------------------------------------------

std::vector<std::vector<double>*> ModelParams::tensors() {
  std::vector<std::vector<double>*> out;
  auto block = [&](Block& b) {
    out.push_back(&b.lin.w);
    out.push_back(&b.lin.b);
    out.push_back(&b.ln.gain);
    out.push_back(&b.ln.bias);
  };
  block(node_encoder);
  block(edge_encoder);
  for (auto& b : edge_update) block(b);
  for (auto& b : node_update) block(b);
  out.push_back(&decoder.w);
  out.push_back(&decoder.b);
  return out;
}

std::vector<const std::vector<double>*> ModelParams::tensors() const {
  auto mutable_tensors = const_cast<ModelParams*>(this)->tensors();
  return {mutable_tensors.begin(), mutable_tensors.end()};
}

void ModelParams::set_zero() {
  for (auto* t : tensors()) std::fill(t->begin(), t->end(), 0.0);
}

bool ModelParams::same_shape(const ModelParams& other) const {
  auto a = tensors();
  auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i]->size() != b[i]->size()) return false;
  return true;
}

namespace {

ModelParams make_shape(bool tied) {
  ModelParams p;
  p.tied = tied;
  p.node_encoder = make_block(scenegraph::kNodeDim);
  p.edge_encoder = make_block(scenegraph::kEdgeDim);
  const int copies = tied ? 1 : kRounds;
  for (int i = 0; i < copies; ++i) {
    p.edge_update.push_back(make_block(3 * kHidden));
    p.node_update.push_back(make_block(2 * kHidden));
  }
  p.decoder = make_linear(kHidden, 1);
  return p;
}

}  // namespace

ModelParams init(uint64_t seed, bool tied) {
  ModelParams p = make_shape(tied);
  Rng rng(seed);
  auto init_block = [&](Block& b) {
    fill_uniform(b.lin, rng);
    std::fill(b.ln.gain.begin(), b.ln.gain.end(), 1.0);
  };
  init_block(p.node_encoder);
  init_block(p.edge_encoder);
  for (auto& b : p.edge_update) init_block(b);
  for (auto& b : p.node_update) init_block(b);
  fill_uniform(p.decoder, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Forward / loss / gradient
// ---------------------------------------------------------------------------

std::vector<double> forward(const ModelParams& params, const SceneGraph& g) {
  Tape t;
  run_forward(params, g, t);
  return t.scores;
}

uint64_t activation_signature(const ModelParams& params, const SceneGraph& g,
                              std::vector<double>* scores_out) {
  Tape t;
  run_forward(params, g, t);
  if (scores_out) *scores_out = t.scores;
  uint64_t h = 0xCBF29CE484222325ull;
  auto scan = [&](const BlockTrace& bt) {
    for (double z : bt.z) {
      h ^= z > 0 ? 0x9E3779B97F4A7C15ull : 0x2545F4914F6CDD1Dull;
      h *= 0x100000001B3ull;
    }
  };
  scan(t.node_enc);
  scan(t.edge_enc);
  for (const auto& bt : t.edge_upd) scan(bt);
  for (const auto& bt : t.node_upd) scan(bt);
  return h;
}

double loss(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("loss: scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("loss: empty inputs");
  double total = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    total += labels[i] ? std::log(std::max(s, kClamp))
                       : std::log(std::max(1.0 - s, kClamp));
  }
  return -total / static_cast<double>(scores.size());
}

ModelParams gradient(const ModelParams& params, const SceneGraph& g,
                     std::span<const uint8_t> labels, double* loss_out) {
  if (labels.size() != g.nodes.size())
    throw std::invalid_argument("gradient: labels do not match graph nodes");
  const size_t n = g.nodes.size();
  const size_t m = g.edges.size();

  Tape t;
  run_forward(params, g, t);
  if (loss_out) *loss_out = loss(t.scores, labels);

  ModelParams grad = make_shape(params.tied);

  // decoder backward; d loss / d logit = (s - l) / n inside the clamp range
  std::vector<double> d_node(n * kHidden, 0.0);
  const std::vector<double>& final_h = t.node_upd[kRounds - 1].out;
  for (size_t i = 0; i < n; ++i) {
    const double s = t.scores[i];
    double dlogit = 0.0;
    if (s > kClamp && s < 1.0 - kClamp)
      dlogit = (s - static_cast<double>(labels[i])) / static_cast<double>(n);
    grad.decoder.b[0] += dlogit;
    for (int k = 0; k < kHidden; ++k) {
      grad.decoder.w[k] += dlogit * final_h[i * kHidden + k];
      d_node[i * kHidden + k] += dlogit * params.decoder.w[k];
    }
  }

  std::vector<double> d_edge(m * kHidden, 0.0);
  for (int round = kRounds - 1; round >= 0; --round) {
    // node update backward: splits into previous node state and aggregate
    std::vector<double> d_nu_in(n * 2 * kHidden, 0.0);
    block_backward(round_block(params.node_update, round), t.node_upd[round], d_node,
                   round_block(grad.node_update, round), d_nu_in);

    std::vector<double> d_node_prev(n * kHidden, 0.0);
    for (size_t i = 0; i < n; ++i)
      std::copy_n(&d_nu_in[i * 2 * kHidden], kHidden, &d_node_prev[i * kHidden]);

    // the aggregate was a mean over incoming messages
    for (size_t e = 0; e < m; ++e) {
      const uint32_t dst = g.edges[e].dst;
      const double scale = 1.0 / t.indegree[dst];
      const double* dagg = &d_nu_in[dst * 2 * kHidden + kHidden];
      for (int k = 0; k < kHidden; ++k) d_edge[e * kHidden + k] += dagg[k] * scale;
    }

    // edge update backward: splits into previous edge state and both endpoints
    std::vector<double> d_eu_in(m * 3 * kHidden, 0.0);
    block_backward(round_block(params.edge_update, round), t.edge_upd[round], d_edge,
                   round_block(grad.edge_update, round), d_eu_in);

    std::vector<double> d_edge_prev(m * kHidden, 0.0);
    for (size_t e = 0; e < m; ++e) {
      const double* row = &d_eu_in[e * 3 * kHidden];
      std::copy_n(row, kHidden, &d_edge_prev[e * kHidden]);
      const uint32_t src = g.edges[e].src, dst = g.edges[e].dst;
      for (int k = 0; k < kHidden; ++k) {
        d_node_prev[src * kHidden + k] += row[kHidden + k];
        d_node_prev[dst * kHidden + k] += row[2 * kHidden + k];
      }
    }

    d_node = std::move(d_node_prev);
    d_edge = std::move(d_edge_prev);
  }

  std::vector<double> d_node_feat(n * scenegraph::kNodeDim, 0.0);
  block_backward(params.node_encoder, t.node_enc, d_node, grad.node_encoder, d_node_feat);
  std::vector<double> d_edge_feat(m * scenegraph::kEdgeDim, 0.0);
  block_backward(params.edge_encoder, t.edge_enc, d_edge, grad.edge_encoder, d_edge_feat);

  return grad;
}

ModelParams gradient_batch(const ModelParams& params,
                           std::span<const scenegraph::TrainingExample> batch,
                           double* loss_out) {
  ModelParams total = make_shape(params.tied);
  double loss_sum = 0;
  for (const auto& ex : batch) {
    double l = 0;
    ModelParams g = gradient(params, ex.graph, ex.labels, &l);
    loss_sum += l;
    auto dst = total.tensors();
    auto src = g.tensors();
    for (size_t i = 0; i < dst.size(); ++i)
      for (size_t k = 0; k < dst[i]->size(); ++k) (*dst[i])[k] += (*src[i])[k];
  }
  if (loss_out) *loss_out = loss_sum;
  return total;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const std::vector<scenegraph::TrainingExample>& dataset,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  ModelParams params = init(cfg.seed, cfg.tied);
  Rng rng(cfg.seed ^ 0xD1B54A32D192ED03ull);

  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});
  auto shuffle = [&](std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next_below(i)]);
  };
  shuffle(order);

  size_t n_val = static_cast<size_t>(std::llround(cfg.validation_fraction * dataset.size()));
  if (n_val >= dataset.size()) n_val = dataset.size() - 1;
  std::vector<size_t> val(order.end() - static_cast<ptrdiff_t>(n_val), order.end());
  std::vector<size_t> tr(order.begin(), order.end() - static_cast<ptrdiff_t>(n_val));

  auto mean_loss = [&](const std::vector<size_t>& idx) {
    if (idx.empty()) return std::nan("");
    double total = 0;
    for (size_t i : idx)
      total += loss(forward(params, dataset[i].graph), dataset[i].labels);
    return total / static_cast<double>(idx.size());
  };

  // adaptive moments
  ModelParams m = make_shape(cfg.tied), v = make_shape(cfg.tied);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step = 0;
  const int batch_size = std::max(1, cfg.mini_batch);

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(tr);
    for (size_t start = 0; start < tr.size(); start += batch_size) {
      const size_t end = std::min(tr.size(), start + batch_size);
      ModelParams grad = make_shape(cfg.tied);
      {
        auto dst = grad.tensors();
        for (size_t bi = start; bi < end; ++bi) {
          ModelParams g = gradient(params, dataset[tr[bi]].graph, dataset[tr[bi]].labels);
          auto src = g.tensors();
          for (size_t i = 0; i < dst.size(); ++i)
            for (size_t k = 0; k < dst[i]->size(); ++k) (*dst[i])[k] += (*src[i])[k];
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        for (auto* t : dst)
          for (double& x : *t) x *= inv;
      }
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto tp = params.tensors();
      auto tg = grad.tensors();
      auto tm = m.tensors();
      auto tv = v.tensors();
      for (size_t i = 0; i < tp.size(); ++i) {
        for (size_t k = 0; k < tp[i]->size(); ++k) {
          double& mi = (*tm[i])[k];
          double& vi = (*tv[i])[k];
          const double gi = (*tg[i])[k];
          mi = beta1 * mi + (1 - beta1) * gi;
          vi = beta2 * vi + (1 - beta2) * gi * gi;
          (*tp[i])[k] -= cfg.step_size * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = mean_loss(tr);
    stats.val_loss = mean_loss(val);
    result.curve.push_back(stats);

    const double selection = val.empty() ? stats.train_loss : stats.val_loss;
    if (selection < best) {
      best = selection;
      best_epoch = epoch;
      result.params = params;
    }
    if (cfg.early_stop_patience > 0 && epoch - best_epoch >= cfg.early_stop_patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> tensor_names(const ModelParams& p) {
  std::vector<std::string> names;
  auto block = [&](const std::string& prefix) {
    names.push_back(prefix + ".w");
    names.push_back(prefix + ".b");
    names.push_back(prefix + ".ln.gain");
    names.push_back(prefix + ".ln.bias");
  };
  block("node_encoder");
  block("edge_encoder");
  for (size_t i = 0; i < p.edge_update.size(); ++i) block("edge_update." + std::to_string(i));
  for (size_t i = 0; i < p.node_update.size(); ++i) block("node_update." + std::to_string(i));
  names.push_back("decoder.w");
  names.push_back("decoder.b");
  return names;
}

}  // namespace

void save(const ModelParams& params, const std::string& path) {
  json j;
  j["format"] = "namoplan-gnn";
  j["version"] = 1;
  j["nodeDim"] = scenegraph::kNodeDim;
  j["edgeDim"] = scenegraph::kEdgeDim;
  j["hidden"] = kHidden;
  j["rounds"] = kRounds;
  j["tied"] = params.tied;
  j["featureSpec"] = scenegraph::FeatureSpec::fingerprint();
  json tensors;
  const auto names = tensor_names(params);
  const auto ts = params.tensors();
  for (size_t i = 0; i < ts.size(); ++i) tensors[names[i]] = *ts[i];
  j["tensors"] = std::move(tensors);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump() << "\n";
}

ModelParams load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json j = json::parse(f);
  if (j.at("format").get<std::string>() != "namoplan-gnn")
    throw std::runtime_error(path + ": not a model file");
  auto expect = [&](const char* key, int want) {
    const int got = j.at(key).get<int>();
    if (got != want)
      throw std::runtime_error(path + ": " + key + " mismatch (expected " +
                               std::to_string(want) + ", got " + std::to_string(got) + ")");
  };
  expect("nodeDim", scenegraph::kNodeDim);
  expect("edgeDim", scenegraph::kEdgeDim);
  expect("hidden", kHidden);
  expect("rounds", kRounds);

  ModelParams p = make_shape(j.at("tied").get<bool>());
  const auto names = tensor_names(p);
  auto ts = p.tensors();
  for (size_t i = 0; i < ts.size(); ++i) {
    const auto data = j.at("tensors").at(names[i]).get<std::vector<double>>();
    if (data.size() != ts[i]->size())
      throw std::runtime_error(path + ": tensor " + names[i] + " has size " +
                               std::to_string(data.size()) + ", expected " +
                               std::to_string(ts[i]->size()));
    *ts[i] = data;
  }
  return p;
}

void save_curve_csv(const std::vector<EpochStats>& curve, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "epoch,trainLoss,valLoss\n";
  for (const auto& s : curve) {
    f << s.epoch << "," << s.train_loss << ",";
    if (std::isnan(s.val_loss))
      f << "";
    else
      f << s.val_loss;
    f << "\n";
  }
}

}  // namespace namoplan::gnn
