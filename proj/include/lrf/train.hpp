#pragma once

#include "lrf/neuron.hpp"
#include "lrf/tensor.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lrf {

class Rng;

/// Synthetic motif classification on a token grid. Each image holds one 3x3
/// motif (the class) at a random position over Bernoulli noise; each token is
/// the zero-padded 3x3 patch around its pixel.
struct ToyTask {
  Index rows = 8;
  Index cols = 8;
  Index d_embed = 16;
  Index classes = 4;
  double noise = 0.1;
  Index train_size = 2048;
  Index test_size = 512;

  void validate() const;
  TokenGrid grid() const { return TokenGrid(rows, cols); }
};

inline constexpr Index kPatchSize = 9;
inline constexpr std::uint64_t kTrainSplit = 0;
inline constexpr std::uint64_t kTestSplit = 1;

struct Sample {
  RowMatrix tokens;  // N x 9 binary patches
  int label = 0;
};

/// Sample `index` of a split; label = index mod classes.
Sample make_sample(const ToyTask& task, std::uint64_t seed, std::uint64_t split, Index index);
std::vector<Sample> make_split(const ToyTask& task, std::uint64_t seed, std::uint64_t split, Index count);

/// The 3x3 motif of a class as a row-major 9-vector.
Eigen::Matrix<double, 1, 9> motif(int label);

enum class BlockKind { ssa, lrf_ssa, lrf_dyn };

BlockKind parse_block_kind(std::string_view name);
std::string_view to_string(BlockKind kind);

/// Named parameter arrays stored back to back in one flat vector.
class ParamSet {
 public:
  struct Block {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    Index offset = 0;
    bool trainable = true;
    Index size() const { return rows * cols; }
  };

  void add(std::string name, const RowMatrix& init, bool trainable = true);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::string_view name) const;
  bool has(std::string_view name) const;

  Eigen::Map<RowMatrix> view(std::string_view name);
  Eigen::Map<const RowMatrix> view(std::string_view name) const;
  /// The same block inside another flat vector laid out like this set, e.g. a gradient.
  Eigen::Map<RowMatrix> view(std::string_view name, Vector& flat) const;

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  /// 1 where the entry may be updated, 0 for frozen entries.
  Vector trainable_mask() const;

 private:
  std::vector<Block> blocks_;
  Vector values_;
};

struct ModelConfig {
  BlockKind kind = BlockKind::lrf_dyn;
  Index rows = 8;
  Index cols = 8;
  Index d = 16;
  Index k = 8;
  Index classes = 4;
  Index timesteps = 2;
  std::vector<Index> dilations{3, 5};
  LifParams lif{};
  SurrogateSpec surrogate{};

  void validate() const;
  TokenGrid grid() const { return TokenGrid(rows, cols); }
};

/// Embedding, one attention block and a mean-pooled linear head.
class ToyModel {
 public:
  ToyModel(ModelConfig cfg, ParamSet params);

  /// Freshly initialised parameters drawn from `rng`.
  static ToyModel init(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Class logits averaged over timesteps.
  Vector logits(const RowMatrix& tokens) const;

  /// Cross-entropy of one sample; when `grad` is given the parameter gradient
  /// (scaled by `weight`) is added to it. `smooth` replaces every spiking layer
  /// by the identity.
  double loss(const RowMatrix& tokens, int label, Vector* grad = nullptr, double weight = 1.0,
              bool smooth = false, Vector* logits_out = nullptr) const;

 private:
  struct Trace;
  void forward(const RowMatrix& tokens, bool smooth, Trace& tr) const;

  ModelConfig cfg_;
  ParamSet params_;
};

struct TrainConfig {
  Index epochs = 50;
  Index batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  SurrogateSpec surrogate{};
  Index timesteps = 2;
  Index k = 8;

  /// Zero epochs is accepted and only evaluates the initial model.
  void validate() const;
};

struct EpochLog {
  Index epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  ToyModel model;
};

/// Minibatch SGD with momentum on the toy task. Throws std::runtime_error when the loss
/// becomes non-finite.
TrainResult train_toy(const ToyTask& task, BlockKind kind, const TrainConfig& cfg,
                      const std::function<void(const EpochLog&)>& on_epoch = {});

double accuracy(const ToyModel& model, const std::vector<Sample>& data);

/// Moving average over `window` epochs, then the number of increases among the
/// smoothed values at epochs >= ceil((1 - fraction) * epochs).
int smoothed_loss_increases(const std::vector<double>& losses, Index window = 5, double fraction = 0.8);

struct GradCheckResult {
  int checked = 0;
  double max_rel_error = 0.0;
  Index worst_index = -1;
  bool finite = true;
};

/// Central differences against `analytic` at `samples` randomly chosen entries
/// (all of them when fewer). rel = |a - f| / max(|a| + |f|, 1e-6).
GradCheckResult grad_check(const std::function<double(const Vector&)>& loss, const Vector& params,
                           const Vector& analytic, double epsilon, int samples, Rng& rng,
                           const Vector* mask = nullptr);

/// Gradient check of the model's smooth path on one sample, trainable entries only.
GradCheckResult grad_check(const ToyModel& model, const RowMatrix& tokens, int label, double epsilon,
                           int samples, Rng& rng);

/// Smooth-path check on a fresh model over a 4 x 4 grid (d = 8, k = 4) with a
/// random head and random binary patches, epsilon = 1e-5.
GradCheckResult smooth_grad_check(BlockKind kind, std::uint64_t seed, int samples = 200);

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

/// Text checkpoint: "LRFKIT1" header, model configuration, then one
/// "param <name> <rows> <cols> <trainable>" line per block followed by its values.
void save_checkpoint(std::ostream& os, const ToyModel& model);
ToyModel load_checkpoint(std::istream& is);

}  // namespace lrf
