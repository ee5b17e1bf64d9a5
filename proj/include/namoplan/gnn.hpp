#ifndef NAMOPLAN_GNN_HPP
#define NAMOPLAN_GNN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "namoplan/scenegraph.hpp"

namespace namoplan::gnn {

constexpr int kHidden = 16;
constexpr int kRounds = 3;

struct Linear {
  int in = 0, out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out
};

struct LayerNorm {
  std::vector<double> gain;  // kHidden
  std::vector<double> bias;  // kHidden
};

/// One hidden transform: Linear -> ReLU -> LayerNorm.
struct Block {
  Linear lin;
  LayerNorm ln;
};

/// Importance-predictor weights. Message passing runs kRounds iterations;
/// with tied == true the update blocks are shared across rounds (vectors of
/// size 1), otherwise one block per round.
struct ModelParams {
  Block node_encoder;              // node features -> hidden
  Block edge_encoder;              // edge features -> hidden
  std::vector<Block> edge_update;  // [edge ∥ src ∥ dst] -> hidden
  std::vector<Block> node_update;  // [node ∥ mean incoming message] -> hidden
  Linear decoder;                  // hidden -> 1
  bool tied = true;

  /// All parameter tensors in a fixed order (shared by gradients/optimizers).
  std::vector<std::vector<double>*> tensors();
  std::vector<const std::vector<double>*> tensors() const;
  void set_zero();
  bool same_shape(const ModelParams& other) const;
};

/// Seeded uniform fan-in initialization; biases zero, layer-norm gains one.
ModelParams init(uint64_t seed, bool tied = true);

/// Per-node importance scores in (0, 1).
std::vector<double> forward(const ModelParams& params, const scenegraph::SceneGraph& g);

/// Hash of the ReLU activation pattern of a forward pass. A central finite
/// difference is valid for a coordinate only when the pattern agrees at both
/// probe points; stepping across a kink makes the loss non-differentiable.
/// Optionally hands back the scores of the same pass.
uint64_t activation_signature(const ModelParams& params, const scenegraph::SceneGraph& g,
                              std::vector<double>* scores_out = nullptr);

/// Mean binary cross-entropy; log arguments clamped at 1e-12.
double loss(std::span<const double> scores, std::span<const uint8_t> labels);

/// Exact reverse-mode gradient of loss(forward(params, g), labels), shaped
/// like the parameters. Optionally reports the loss of the same pass.
ModelParams gradient(const ModelParams& params, const scenegraph::SceneGraph& g,
                     std::span<const uint8_t> labels, double* loss_out = nullptr);

/// Sum of per-example gradients.
ModelParams gradient_batch(const ModelParams& params,
                           std::span<const scenegraph::TrainingExample> batch,
                           double* loss_out = nullptr);

struct TrainConfig {
  uint64_t seed = 0;
  double step_size = 1e-3;
  int epochs = 500;
  int mini_batch = 8;
  double validation_fraction = 0.1;
  int early_stop_patience = 50;
  bool tied = true;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  ModelParams params;  // parameters with the best validation loss
  std::vector<EpochStats> curve;
};

/// Adaptive-moment gradient descent over a deterministic seeded shuffle.
TrainResult train(const std::vector<scenegraph::TrainingExample>& dataset,
                  const TrainConfig& cfg);

/// Lossless JSON round-trip; load rejects files whose dimensions do not
/// match the current feature spec.
void save(const ModelParams& params, const std::string& path);
ModelParams load(const std::string& path);

void save_curve_csv(const std::vector<EpochStats>& curve, const std::string& path);

}  // namespace namoplan::gnn

#endif  // NAMOPLAN_GNN_HPP
