#include "lrf/train.hpp"

#include "lrf/attention.hpp"
#include "lrf/dyn.hpp"
#include "lrf/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lrf {

namespace {

constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kInitStream = 3;

std::string dilation_name(Index dil) { return "r" + std::to_string(dil); }

/// One SN layer over (T, 1, N, d), or the identity on the smooth path.
struct SnStage {
  SnTrace trace;
  bool smooth = false;

  const Tensor& run(const Tensor& in, const LifParams& lif, bool identity) {
    smooth = identity;
    if (identity) {
      trace.u = in;
      trace.spikes = in;
    } else {
      trace = sn_forward(in, lif);
    }
    return trace.spikes;
  }

  Tensor back(const Tensor& grad_out, const LifParams& lif, const SurrogateSpec& spec) const {
    return smooth ? grad_out : sn_backward(trace, grad_out, lif, spec);
  }
};

double log_sum_exp(const Vector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

// ---------------------------------------------------------------------------
// Task

void ToyTask::validate() const {
  if (rows < 3 || cols < 3) {
    throw std::invalid_argument("ToyTask: grid must be at least 3 x 3 to hold a motif");
  }
  if (d_embed < 1) {
    throw std::invalid_argument("ToyTask: d_embed must be positive");
  }
  if (classes < 1 || classes > 4) {
    throw std::invalid_argument("ToyTask: classes must lie in [1, 4]");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) {
    throw std::invalid_argument("ToyTask: noise must lie in [0, 1]");
  }
  if (train_size < 1 || test_size < 1) {
    throw std::invalid_argument("ToyTask: split sizes must be positive");
  }
}

Eigen::Matrix<double, 1, 9> motif(int label) {
  Eigen::Matrix<double, 1, 9> m;
  switch (label) {
    case 0:
      m << 0, 1, 0, 1, 1, 1, 0, 1, 0;  // cross
      break;
    case 1:
      m << 1, 0, 1, 0, 1, 0, 1, 0, 1;  // X
      break;
    case 2:
      m << 1, 1, 1, 1, 0, 1, 1, 1, 1;  // ring
      break;
    case 3:
      m << 1, 1, 1, 0, 0, 0, 1, 1, 1;  // bars
      break;
    default:
      throw std::domain_error("motif: label must lie in [0, 4)");
  }
  return m;
}

Sample make_sample(const ToyTask& task, std::uint64_t seed, std::uint64_t split, Index index) {
  Rng rng(Rng::derive(seed, split, static_cast<std::uint64_t>(index)));
  Sample s;
  s.label = static_cast<int>(index % task.classes);
  RowMatrix img = rng.binary_matrix(task.rows, task.cols, task.noise);
  const auto r0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(task.rows - 2)));
  const auto c0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(task.cols - 2)));
  const auto m = motif(s.label);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      img(r0 + i, c0 + j) = m[i * 3 + j];
    }
  }
  s.tokens = RowMatrix::Zero(task.rows * task.cols, kPatchSize);
  for (Index r = 0; r < task.rows; ++r) {
    for (Index c = 0; c < task.cols; ++c) {
      for (Index i = -1; i <= 1; ++i) {
        for (Index j = -1; j <= 1; ++j) {
          const Index rr = r + i;
          const Index cc = c + j;
          if (rr >= 0 && rr < task.rows && cc >= 0 && cc < task.cols) {
            s.tokens(r * task.cols + c, (i + 1) * 3 + (j + 1)) = img(rr, cc);
          }
        }
      }
    }
  }
  return s;
}

std::vector<Sample> make_split(const ToyTask& task, std::uint64_t seed, std::uint64_t split, Index count) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    out.push_back(make_sample(task, seed, split, i));
  }
  return out;
}

BlockKind parse_block_kind(std::string_view name) {
  if (name == "ssa") return BlockKind::ssa;
  if (name == "lrf_ssa" || name == "lrf-ssa") return BlockKind::lrf_ssa;
  if (name == "lrf_dyn" || name == "lrf-dyn") return BlockKind::lrf_dyn;
  throw std::invalid_argument("unknown model kind: " + std::string(name));
}

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::ssa:
      return "ssa";
    case BlockKind::lrf_ssa:
      return "lrf_ssa";
    case BlockKind::lrf_dyn:
      return "lrf_dyn";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parameters

void ParamSet::add(std::string name, const RowMatrix& init, bool trainable) {
  if (has(name)) {
    throw std::invalid_argument("ParamSet: duplicate block " + name);
  }
  Block b{std::move(name), init.rows(), init.cols(), values_.size(), trainable};
  Vector grown(values_.size() + b.size());
  grown.head(values_.size()) = values_;
  grown.segment(b.offset, b.size()) = Eigen::Map<const Vector>(init.data(), init.size());
  values_ = std::move(grown);
  blocks_.push_back(std::move(b));
}

const ParamSet::Block& ParamSet::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) {
      return b;
    }
  }
  throw std::out_of_range("ParamSet: no block named " + std::string(name));
}

bool ParamSet::has(std::string_view name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.name == name; });
}

Eigen::Map<RowMatrix> ParamSet::view(std::string_view name) {
  const Block& b = block(name);
  return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const RowMatrix> ParamSet::view(std::string_view name) const {
  const Block& b = block(name);
  return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<RowMatrix> ParamSet::view(std::string_view name, Vector& flat) const {
  if (flat.size() != values_.size()) {
    throw std::domain_error("ParamSet: flat vector has the wrong length");
  }
  const Block& b = block(name);
  return {flat.data() + b.offset, b.rows, b.cols};
}

Vector ParamSet::trainable_mask() const {
  Vector mask = Vector::Zero(values_.size());
  for (const auto& b : blocks_) {
    if (b.trainable) {
      mask.segment(b.offset, b.size()).setOnes();
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Model

void ModelConfig::validate() const {
  if (rows < 1 || cols < 1 || d < 1 || k < 1 || timesteps < 1) {
    throw std::invalid_argument("ModelConfig: grid, d, k and timesteps must be positive");
  }
  if (classes < 2) {
    throw std::invalid_argument("ModelConfig: need at least two classes");
  }
  if (kind != BlockKind::ssa && dilations.empty()) {
    throw std::invalid_argument("ModelConfig: local term needs at least one dilation");
  }
  for (Index dil : dilations) {
    if (dil < 1) {
      throw std::invalid_argument("ModelConfig: dilations must be positive");
    }
  }
  lif.validate();
  surrogate.validate();
}

struct ToyModel::Trace {
  RowMatrix cur;  // N x d embedding current, shared by every timestep
  SnStage x_sn;
  // ssa / lrf_ssa
  SnStage q_sn, k_sn, v_sn;
  std::vector<RowMatrix> kv;  // per timestep, d x d
  // lrf_dyn
  std::vector<RowMatrix> states;  // per timestep, (N * k) x d
  Tensor h;
  SnStage a_sn;
  std::vector<Eigen::RowVectorXd> pooled;
  Vector logits;
  LrfConfig local;
};

ToyModel::ToyModel(ModelConfig cfg, ParamSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  auto require = [&](const std::string& name, Index rows, Index cols) {
    if (!params_.has(name)) {
      throw std::invalid_argument("ToyModel: missing parameter " + name);
    }
    const auto& b = params_.block(name);
    if (b.rows != rows || b.cols != cols) {
      throw std::invalid_argument("ToyModel: parameter " + name + " has shape " + std::to_string(b.rows) + "x" +
                                  std::to_string(b.cols));
    }
  };
  const Index d = cfg_.d;
  require("We", kPatchSize, d);
  require("be", 1, d);
  if (cfg_.kind != BlockKind::lrf_dyn) {
    require("Wq", d, d);
    require("Wk", d, d);
    require("Wv", d, d);
  }
  if (cfg_.kind != BlockKind::ssa) {
    for (Index dil : cfg_.dilations) {
      require(dilation_name(dil), kTaps, d);
    }
  }
  if (cfg_.kind == BlockKind::lrf_dyn) {
    require("M", cfg_.k, cfg_.k);
    require("c", cfg_.k, 1);
    require("g", cfg_.k, 1);
    require("G", d, 1);
    if (!(spectral_radius(params_.view("M")) < 1.0)) {
      throw std::invalid_argument("ToyModel: dendritic transition is not stable");
    }
  }
  require("Wh", d, cfg_.classes);
  require("bh", 1, cfg_.classes);
}

ToyModel ToyModel::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index d = cfg.d;
  ParamSet p;
  p.add("We", rng.normal_matrix(kPatchSize, d, 0.5));
  p.add("be", RowMatrix::Constant(1, d, 0.5));
  if (cfg.kind != BlockKind::lrf_dyn) {
    const double std_qkv = 1.5 / std::sqrt(static_cast<double>(d));
    p.add("Wq", rng.normal_matrix(d, d, std_qkv));
    p.add("Wk", rng.normal_matrix(d, d, std_qkv));
    p.add("Wv", rng.normal_matrix(d, d, std_qkv));
  }
  if (cfg.kind != BlockKind::ssa) {
    for (Index dil : cfg.dilations) {
      p.add(dilation_name(dil), rng.normal_matrix(kTaps, d, 0.1));
    }
  }
  if (cfg.kind == BlockKind::lrf_dyn) {
    const Index k = cfg.k;
    RowMatrix m = RowMatrix::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
      const double tau = k == 1 ? 1.5 : 1.5 + 6.5 * static_cast<double>(i) / static_cast<double>(k - 1);
      m(i, i) = 1.0 - 1.0 / tau;
      if (i + 1 < k) {
        m(i, i + 1) = 0.05;
        m(i + 1, i) = 0.05;
      }
    }
    p.add("M", m, /*trainable=*/false);
    p.add("c", RowMatrix::Constant(k, 1, 1.0 / static_cast<double>(k)));
    p.add("g", RowMatrix::Ones(k, 1));
    p.add("G", RowMatrix::Constant(d, 1, 0.5));
  }
  p.add("Wh", RowMatrix::Zero(d, cfg.classes));
  p.add("bh", RowMatrix::Zero(1, cfg.classes));
  return ToyModel(cfg, std::move(p));
}

void ToyModel::forward(const RowMatrix& tokens, bool smooth, Trace& tr) const {
  const TokenGrid grid = cfg_.grid();
  if (tokens.cols() != kPatchSize) {
    throw std::domain_error("ToyModel: tokens must have 9 columns");
  }
  grid.require_tokens(tokens.rows());
  const Index n_tok = tokens.rows();
  const Index d = cfg_.d;
  const Index steps = cfg_.timesteps;
  const Shape4 shape{steps, 1, n_tok, d};

  tr.cur = tokens * params_.view("We");
  tr.cur.rowwise() += params_.view("be").row(0);
  Tensor cur_t(shape);
  for (Index t = 0; t < steps; ++t) {
    cur_t.slice(t, 0) = tr.cur;
  }
  const Tensor& x = tr.x_sn.run(cur_t, cfg_.lif, smooth);

  if (cfg_.kind != BlockKind::ssa) {
    tr.local = LrfConfig::zeros(d, cfg_.dilations);
    for (std::size_t i = 0; i < cfg_.dilations.size(); ++i) {
      tr.local.weights[i] = params_.view(dilation_name(cfg_.dilations[i]));
    }
  }

  Tensor pre(shape);
  if (cfg_.kind == BlockKind::lrf_dyn) {
    const auto m = params_.view("M");
    const Vector c = params_.view("c");
    const Vector g = params_.view("g");
    const Eigen::RowVectorXd big = params_.view("G").transpose();
    const Index k = cfg_.k;
    tr.states.assign(static_cast<std::size_t>(steps), RowMatrix(n_tok * k, d));
    tr.h = Tensor(shape);
    RowMatrix s(k, d);
    for (Index t = 0; t < steps; ++t) {
      auto h = tr.h.slice(t, 0);
      RowMatrix& states = tr.states[static_cast<std::size_t>(t)];
      s.setZero();
      for (Index n = 0; n < n_tok; ++n) {
        s = m * s;
        s.noalias() += g * x.slice(t, 0).row(n);
        states.middleRows(n * k, k) = s;
        h.row(n) = (c.transpose() * s).cwiseProduct(big);
      }
      pre.slice(t, 0) = h + lrf_local_term(h, grid, tr.local);
    }
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor qc(shape), kc(shape), vc(shape);
    for (Index t = 0; t < steps; ++t) {
      qc.slice(t, 0) = x.slice(t, 0) * params_.view("Wq");
      kc.slice(t, 0) = x.slice(t, 0) * params_.view("Wk");
      vc.slice(t, 0) = x.slice(t, 0) * params_.view("Wv");
    }
    const Tensor& q = tr.q_sn.run(qc, cfg_.lif, smooth);
    const Tensor& kk = tr.k_sn.run(kc, cfg_.lif, smooth);
    const Tensor& v = tr.v_sn.run(vc, cfg_.lif, smooth);
    tr.kv.assign(static_cast<std::size_t>(steps), RowMatrix());
    for (Index t = 0; t < steps; ++t) {
      RowMatrix& kv = tr.kv[static_cast<std::size_t>(t)];
      kv = kk.slice(t, 0).transpose() * v.slice(t, 0);
      pre.slice(t, 0) = scale * (q.slice(t, 0) * kv);
      if (cfg_.kind == BlockKind::lrf_ssa) {
        pre.slice(t, 0) += lrf_local_term(v.slice(t, 0), grid, tr.local);
      }
    }
  }

  const Tensor& a = tr.a_sn.run(pre, cfg_.lif, smooth);
  const auto wh = params_.view("Wh");
  tr.pooled.assign(static_cast<std::size_t>(steps), Eigen::RowVectorXd());
  Eigen::RowVectorXd logit_sum = Eigen::RowVectorXd::Zero(cfg_.classes);
  for (Index t = 0; t < steps; ++t) {
    tr.pooled[static_cast<std::size_t>(t)] = a.slice(t, 0).colwise().mean();
    logit_sum += tr.pooled[static_cast<std::size_t>(t)] * wh;
  }
  tr.logits = (logit_sum / static_cast<double>(steps) + params_.view("bh").row(0)).transpose();
}

Vector ToyModel::logits(const RowMatrix& tokens) const {
  Trace tr;
  forward(tokens, false, tr);
  return tr.logits;
}

double ToyModel::loss(const RowMatrix& tokens, int label, Vector* grad, double weight, bool smooth,
                      Vector* logits_out) const {
  if (label < 0 || label >= cfg_.classes) {
    throw std::domain_error("ToyModel::loss: label out of range");
  }
  Trace tr;
  forward(tokens, smooth, tr);
  if (logits_out != nullptr) {
    *logits_out = tr.logits;
  }
  const double lse = log_sum_exp(tr.logits);
  const double value = lse - tr.logits[label];
  if (grad == nullptr) {
    return value;
  }
  if (grad->size() != params_.size()) {
    throw std::domain_error("ToyModel::loss: gradient vector has the wrong length");
  }

  const TokenGrid grid = cfg_.grid();
  const Index n_tok = tokens.rows();
  const Index d = cfg_.d;
  const Index steps = cfg_.timesteps;
  const Shape4 shape{steps, 1, n_tok, d};
  const auto steps_d = static_cast<double>(steps);

  Eigen::RowVectorXd dlog = (tr.logits.array() - lse).exp().transpose();
  dlog[label] -= 1.0;
  dlog *= weight;

  params_.view("bh", *grad).row(0) += dlog;
  auto d_wh = params_.view("Wh", *grad);
  const auto wh = params_.view("Wh");
  Tensor d_a(shape);
  for (Index t = 0; t < steps; ++t) {
    d_wh.noalias() += tr.pooled[static_cast<std::size_t>(t)].transpose() * dlog / steps_d;
    const Eigen::RowVectorXd d_pool = dlog * wh.transpose() / steps_d;
    d_a.slice(t, 0).rowwise() = d_pool / static_cast<double>(n_tok);
  }
  const Tensor d_pre = tr.a_sn.back(d_a, cfg_.lif, cfg_.surrogate);

  auto add_local_grads = [&](const LocalTermGrad& lg) {
    for (std::size_t i = 0; i < cfg_.dilations.size(); ++i) {
      params_.view(dilation_name(cfg_.dilations[i]), *grad) += lg.weights[i];
    }
  };

  const Tensor& x = tr.x_sn.trace.spikes;
  Tensor d_x(shape);
  if (cfg_.kind == BlockKind::lrf_dyn) {
    const auto m = params_.view("M");
    const Vector c = params_.view("c");
    const Vector g = params_.view("g");
    const Eigen::RowVectorXd big = params_.view("G").transpose();
    auto d_c = params_.view("c", *grad);
    auto d_g = params_.view("g", *grad);
    auto d_big = params_.view("G", *grad);
    const Index k = cfg_.k;
    RowMatrix lambda(k, d), next(k, d);
    for (Index t = 0; t < steps; ++t) {
      const LocalTermGrad lg = lrf_local_term_backward(d_pre.slice(t, 0), tr.h.slice(t, 0), grid, tr.local);
      add_local_grads(lg);
      const RowMatrix d_h = d_pre.slice(t, 0) + lg.values;
      const RowMatrix& states = tr.states[static_cast<std::size_t>(t)];
      lambda.setZero();
      for (Index n = n_tok - 1; n >= 0; --n) {
        const auto s_n = states.middleRows(n * k, k);
        const Eigen::RowVectorXd read = c.transpose() * s_n;
        d_big.col(0) += d_h.row(n).cwiseProduct(read).transpose();
        const Eigen::RowVectorXd dy = d_h.row(n).cwiseProduct(big);
        d_c.col(0).noalias() += s_n * dy.transpose();
        next.noalias() = m.transpose() * lambda;
        next.noalias() += c * dy;
        lambda.swap(next);
        d_g.col(0).noalias() += lambda * x.slice(t, 0).row(n).transpose();
        d_x.slice(t, 0).row(n).noalias() = g.transpose() * lambda;
      }
    }
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const Tensor& q = tr.q_sn.trace.spikes;
    const Tensor& kk = tr.k_sn.trace.spikes;
    const Tensor& v = tr.v_sn.trace.spikes;
    Tensor d_q(shape), d_k(shape), d_v(shape);
    for (Index t = 0; t < steps; ++t) {
      const auto gp = d_pre.slice(t, 0);
      const RowMatrix& kv = tr.kv[static_cast<std::size_t>(t)];
      d_q.slice(t, 0).noalias() = scale * (gp * kv.transpose());
      const RowMatrix d_kv = scale * (q.slice(t, 0).transpose() * gp);
      d_k.slice(t, 0).noalias() = v.slice(t, 0) * d_kv.transpose();
      d_v.slice(t, 0).noalias() = kk.slice(t, 0) * d_kv;
      if (cfg_.kind == BlockKind::lrf_ssa) {
        const LocalTermGrad lg = lrf_local_term_backward(gp, v.slice(t, 0), grid, tr.local);
        add_local_grads(lg);
        d_v.slice(t, 0) += lg.values;
      }
    }
    const Tensor d_qc = tr.q_sn.back(d_q, cfg_.lif, cfg_.surrogate);
    const Tensor d_kc = tr.k_sn.back(d_k, cfg_.lif, cfg_.surrogate);
    const Tensor d_vc = tr.v_sn.back(d_v, cfg_.lif, cfg_.surrogate);
    auto d_wq = params_.view("Wq", *grad);
    auto d_wk = params_.view("Wk", *grad);
    auto d_wv = params_.view("Wv", *grad);
    const auto wq = params_.view("Wq");
    const auto wk = params_.view("Wk");
    const auto wv = params_.view("Wv");
    for (Index t = 0; t < steps; ++t) {
      const auto xt = x.slice(t, 0);
      d_wq.noalias() += xt.transpose() * d_qc.slice(t, 0);
      d_wk.noalias() += xt.transpose() * d_kc.slice(t, 0);
      d_wv.noalias() += xt.transpose() * d_vc.slice(t, 0);
      auto dx = d_x.slice(t, 0);
      dx.noalias() = d_qc.slice(t, 0) * wq.transpose();
      dx.noalias() += d_kc.slice(t, 0) * wk.transpose();
      dx.noalias() += d_vc.slice(t, 0) * wv.transpose();
    }
  }

  const Tensor d_cur_t = tr.x_sn.back(d_x, cfg_.lif, cfg_.surrogate);
  RowMatrix d_cur = RowMatrix::Zero(n_tok, d);
  for (Index t = 0; t < steps; ++t) {
    d_cur += d_cur_t.slice(t, 0);
  }
  params_.view("We", *grad).noalias() += tokens.transpose() * d_cur;
  params_.view("be", *grad).row(0) += d_cur.colwise().sum();
  return value;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (epochs < 0) {
    throw std::invalid_argument("TrainConfig: epochs must be nonnegative");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch size must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
  }
  if (timesteps < 1 || k < 1) {
    throw std::invalid_argument("TrainConfig: timesteps and k must be positive");
  }
  surrogate.validate();
}

double accuracy(const ToyModel& model, const std::vector<Sample>& data) {
  if (data.empty()) {
    throw std::domain_error("accuracy: empty data set");
  }
  Index correct = 0;
  for (const auto& s : data) {
    Index arg = 0;
    model.logits(s.tokens).maxCoeff(&arg);
    correct += arg == s.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train_toy(const ToyTask& task, BlockKind kind, const TrainConfig& cfg,
                      const std::function<void(const EpochLog&)>& on_epoch) {
  task.validate();
  cfg.validate();
  ModelConfig mc;
  mc.kind = kind;
  mc.rows = task.rows;
  mc.cols = task.cols;
  mc.d = task.d_embed;
  mc.k = cfg.k;
  mc.classes = task.classes;
  mc.timesteps = cfg.timesteps;
  mc.surrogate = cfg.surrogate;
  Rng init_rng(Rng::derive(cfg.seed, kInitStream, 0));
  ToyModel model = ToyModel::init(mc, init_rng);

  const std::vector<Sample> train = make_split(task, cfg.seed, kTrainSplit, task.train_size);
  const std::vector<Sample> test = make_split(task, cfg.seed, kTestSplit, task.test_size);

  std::vector<EpochLog> log;
  auto emit = [&](const EpochLog& row) {
    log.push_back(row);
    if (on_epoch) {
      on_epoch(row);
    }
  };

  if (cfg.epochs == 0) {
    double total = 0.0;
    for (const auto& s : train) {
      total += model.loss(s.tokens, s.label);
    }
    emit({0, total / static_cast<double>(train.size()), accuracy(model, train), accuracy(model, test)});
    return {std::move(log), std::move(model)};
  }

  const Vector mask = model.params().trainable_mask();
  Vector velocity = Vector::Zero(model.params().size());
  Vector grad(model.params().size());
  std::vector<Index> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<Index>(i);
  }
  Vector logits;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle(Rng::derive(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }
    double total = 0.0;
    Index correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double weight = 1.0 / static_cast<double>(stop - start);
      grad.setZero();
      for (std::size_t i = start; i < stop; ++i) {
        const Sample& s = train[static_cast<std::size_t>(order[i])];
        const double l = model.loss(s.tokens, s.label, &grad, weight, false, &logits);
        if (!std::isfinite(l)) {
          std::ostringstream msg;
          msg << "train_toy: loss diverged at epoch " << epoch << ", sample " << order[i];
          throw std::runtime_error(msg.str());
        }
        total += l;
        Index arg = 0;
        logits.maxCoeff(&arg);
        correct += arg == s.label ? 1 : 0;
      }
      velocity = cfg.momentum * velocity + grad.cwiseProduct(mask);
      model.params().values() -= cfg.learning_rate * velocity;
    }
    if (!model.params().values().allFinite()) {
      throw std::runtime_error("train_toy: parameters became non-finite at epoch " + std::to_string(epoch));
    }
    const auto n_train = static_cast<double>(train.size());
    emit({epoch, total / n_train, static_cast<double>(correct) / n_train, accuracy(model, test)});
  }
  return {std::move(log), std::move(model)};
}

int smoothed_loss_increases(const std::vector<double>& losses, Index window, double fraction) {
  if (window < 1 || !(fraction > 0.0 && fraction <= 1.0)) {
    throw std::domain_error("smoothed_loss_increases: invalid window or fraction");
  }
  const auto n = static_cast<Index>(losses.size());
  if (n < window) {
    return 0;
  }
  std::vector<double> smooth(static_cast<std::size_t>(n), 0.0);
  for (Index e = window - 1; e < n; ++e) {
    double s = 0.0;
    for (Index j = e - window + 1; j <= e; ++j) {
      s += losses[static_cast<std::size_t>(j)];
    }
    smooth[static_cast<std::size_t>(e)] = s / static_cast<double>(window);
  }
  const auto first = std::max<Index>(window - 1, static_cast<Index>(std::ceil((1.0 - fraction) * static_cast<double>(n))));
  int increases = 0;
  for (Index e = first + 1; e < n; ++e) {
    increases += smooth[static_cast<std::size_t>(e)] > smooth[static_cast<std::size_t>(e - 1)] ? 1 : 0;
  }
  return increases;
}

// ---------------------------------------------------------------------------
// Gradient verification

GradCheckResult grad_check(const std::function<double(const Vector&)>& loss, const Vector& params,
                           const Vector& analytic, double epsilon, int samples, Rng& rng, const Vector* mask) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4)) {
    throw std::domain_error("grad_check: epsilon must lie in [1e-6, 1e-4]");
  }
  if (analytic.size() != params.size() || (mask != nullptr && mask->size() != params.size())) {
    throw std::domain_error("grad_check: gradient length differs from parameters");
  }
  std::vector<Index> candidates;
  for (Index i = 0; i < params.size(); ++i) {
    if (mask == nullptr || (*mask)[i] != 0.0) {
      candidates.push_back(i);
    }
  }
  // partial Fisher-Yates picks distinct entries
  const auto take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(std::max(samples, 0)));
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  }
  GradCheckResult res;
  if (!analytic.allFinite()) {
    res.finite = false;
  }
  Vector probe = params;
  for (std::size_t i = 0; i < take; ++i) {
    const Index idx = candidates[i];
    const double orig = probe[idx];
    probe[idx] = orig + epsilon;
    const double up = loss(probe);
    probe[idx] = orig - epsilon;
    const double down = loss(probe);
    probe[idx] = orig;
    const double fd = (up - down) / (2.0 * epsilon);
    const double a = analytic[idx];
    if (!std::isfinite(fd) || !std::isfinite(a)) {
      res.finite = false;
      res.worst_index = idx;
      continue;
    }
    const double rel = std::abs(a - fd) / std::max(std::abs(a) + std::abs(fd), 1e-6);
    if (res.worst_index < 0 || rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = idx;
    }
    ++res.checked;
  }
  return res;
}

GradCheckResult grad_check(const ToyModel& model, const RowMatrix& tokens, int label, double epsilon,
                           int samples, Rng& rng) {
  Vector analytic = Vector::Zero(model.params().size());
  model.loss(tokens, label, &analytic, 1.0, /*smooth=*/true);
  ToyModel probe = model;
  auto f = [&](const Vector& p) {
    probe.params().values() = p;
    return probe.loss(tokens, label, nullptr, 1.0, /*smooth=*/true);
  };
  const Vector mask = model.params().trainable_mask();
  return grad_check(f, model.params().values(), analytic, epsilon, samples, rng, &mask);
}

GradCheckResult smooth_grad_check(BlockKind kind, std::uint64_t seed, int samples) {
  ModelConfig mc;
  mc.kind = kind;
  mc.rows = 4;
  mc.cols = 4;
  mc.d = 8;
  mc.k = 4;
  Rng rng(seed);
  ToyModel model = ToyModel::init(mc, rng);
  // A zero head would make every upstream gradient vanish.
  model.params().view("Wh") = rng.normal_matrix(mc.d, mc.classes, 0.1);
  const RowMatrix tokens = rng.binary_matrix(mc.rows * mc.cols, kPatchSize, 0.3);
  const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(mc.classes)));
  return grad_check(model, tokens, label, 1e-5, samples, rng);
}

// ---------------------------------------------------------------------------
// Files

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,train_loss,train_acc,test_acc\n";
  os << std::setprecision(17);
  for (const auto& e : log) {
    os << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.test_acc << '\n';
  }
}

void save_checkpoint(std::ostream& os, const ToyModel& model) {
  const ModelConfig& c = model.config();
  os << "LRFKIT1\n";
  os << "kind " << to_string(c.kind) << '\n';
  os << "grid " << c.rows << ' ' << c.cols << '\n';
  os << "d " << c.d << '\n';
  os << "k " << c.k << '\n';
  os << "classes " << c.classes << '\n';
  os << "timesteps " << c.timesteps << '\n';
  os << "dilations " << c.dilations.size();
  for (Index dil : c.dilations) {
    os << ' ' << dil;
  }
  os << '\n';
  os << std::setprecision(17);
  os << "lif " << c.lif.v_th << ' ' << c.lif.v_reset << ' ' << c.lif.tau << '\n';
  os << "surrogate " << to_string(c.surrogate.kind) << ' ' << c.surrogate.width << '\n';
  const ParamSet& p = model.params();
  os << "params " << p.blocks().size() << '\n';
  for (const auto& b : p.blocks()) {
    os << "param " << b.name << ' ' << b.rows << ' ' << b.cols << ' ' << (b.trainable ? 1 : 0) << '\n';
    const auto v = p.view(b.name);
    for (Index r = 0; r < b.rows; ++r) {
      for (Index col = 0; col < b.cols; ++col) {
        os << (col == 0 ? "" : " ") << v(r, col);
      }
      os << '\n';
    }
  }
  os << "end\n";
}

namespace {

void expect_key(std::istream& is, const std::string& key) {
  std::string got;
  if (!(is >> got) || got != key) {
    throw std::runtime_error("checkpoint: expected '" + key + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) {
    throw std::runtime_error(std::string("checkpoint: could not read ") + what);
  }
  return v;
}

}  // namespace

ToyModel load_checkpoint(std::istream& is) {
  std::string magic;
  if (!(is >> magic) || magic != "LRFKIT1") {
    throw std::runtime_error("checkpoint: missing LRFKIT1 header");
  }
  ModelConfig c;
  expect_key(is, "kind");
  c.kind = parse_block_kind(read_value<std::string>(is, "kind"));
  expect_key(is, "grid");
  c.rows = read_value<Index>(is, "grid rows");
  c.cols = read_value<Index>(is, "grid cols");
  expect_key(is, "d");
  c.d = read_value<Index>(is, "d");
  expect_key(is, "k");
  c.k = read_value<Index>(is, "k");
  expect_key(is, "classes");
  c.classes = read_value<Index>(is, "classes");
  expect_key(is, "timesteps");
  c.timesteps = read_value<Index>(is, "timesteps");
  expect_key(is, "dilations");
  const auto n_dil = read_value<Index>(is, "dilation count");
  if (n_dil < 0 || n_dil > 64) {
    throw std::runtime_error("checkpoint: implausible dilation count");
  }
  c.dilations.clear();
  for (Index i = 0; i < n_dil; ++i) {
    c.dilations.push_back(read_value<Index>(is, "dilation"));
  }
  expect_key(is, "lif");
  c.lif.v_th = read_value<double>(is, "v_th");
  c.lif.v_reset = read_value<double>(is, "v_reset");
  c.lif.tau = read_value<double>(is, "tau");
  expect_key(is, "surrogate");
  c.surrogate.kind = parse_surrogate_kind(read_value<std::string>(is, "surrogate kind"));
  c.surrogate.width = read_value<double>(is, "surrogate width");
  expect_key(is, "params");
  const auto n_blocks = read_value<Index>(is, "parameter count");
  ParamSet p;
  for (Index b = 0; b < n_blocks; ++b) {
    expect_key(is, "param");
    const auto name = read_value<std::string>(is, "parameter name");
    const auto rows = read_value<Index>(is, "rows");
    const auto cols = read_value<Index>(is, "cols");
    const auto trainable = read_value<int>(is, "trainable flag");
    if (rows < 1 || cols < 1 || rows * cols > (Index{1} << 26)) {
      throw std::runtime_error("checkpoint: implausible shape for " + name);
    }
    RowMatrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = read_value<double>(is, "parameter value");
    }
    p.add(name, m, trainable != 0);
  }
  expect_key(is, "end");
  return ToyModel(std::move(c), std::move(p));
}

}  // namespace lrf
