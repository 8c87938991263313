// lrfkit: verification suites, distance analysis, memory benchmarks, kernel
// export and toy training.

#include "lrf/analysis.hpp"
#include "lrf/dyn.hpp"
#include "lrf/membench.hpp"
#include "lrf/random.hpp"
#include "lrf/train.hpp"
#include "lrf/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads {"<subcommand>": {"<long option>": value}} and top-level options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
      throw CLI::ConversionError("config file must hold a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config values must be strings, numbers, booleans or arrays of those");
  }

  static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) {
          item.inputs.push_back(scalar(v));
        }
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

/// Output file that only appears at `path` once commit() succeeds.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path path) : path_(std::move(path)) {
    tmp_ = path_;
    tmp_ += ".tmp";
    stream_.open(tmp_, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!stream_) {
      throw IoError("cannot write " + path_.string());
    }
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  ~AtomicFile() {
    if (!committed_) {
      stream_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return stream_; }

  void commit() {
    stream_.flush();
    const bool ok = static_cast<bool>(stream_);
    stream_.close();
    std::error_code ec;
    if (ok) {
      fs::rename(tmp_, path_, ec);
    }
    if (!ok || ec) {
      throw IoError("cannot write " + path_.string());
    }
    committed_ = true;
  }

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream stream_;
  bool committed_ = false;
};

template <typename F>
auto translate_errors(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  } catch (const std::out_of_range& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string scope = "all";
  std::string json_path;
  bool perturb_kernel_tap = false;
};

int cmd_verify(const VerifyArgs& a) {
  const lrf::VerifyScope scope = translate_errors([&] { return lrf::parse_verify_scope(a.scope); });
  std::optional<AtomicFile> out;
  if (!a.json_path.empty()) {
    out.emplace(a.json_path);
  }
  lrf::VerifyOptions opts;
  opts.perturb_kernel_tap = a.perturb_kernel_tap;
  const lrf::VerifyReport rep = lrf::run_verify(scope, opts);
  const std::string text = lrf::to_json(rep);
  if (out) {
    out->stream() << text;
    out->commit();
  } else {
    std::cout << text;
  }
  for (const auto& c : rep.checks) {
    std::cerr << (c.passed ? "ok    " : "FAIL  ") << c.name << "  residual " << c.residual << " (tolerance "
              << c.tolerance << ", " << c.cases_passed << "/" << c.cases_total << ")\n";
  }
  if (!rep.passed()) {
    std::cerr << "failed checks:";
    for (const auto& name : rep.failed_names()) {
      std::cerr << ' ' << name;
    }
    std::cerr << '\n';
    return kExitFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string mechanism = "vsa";
  double alpha = 1.0;
  double beta = 0.1;
  lrf::Index n = 64;
  double lambda = 0.5;
  lrf::Index local_radius = 2;
  std::string histogram_path;
  std::string summary_path;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const lrf::DistanceModel model{a.alpha, a.beta, a.n};
  const lrf::Vector dist = translate_errors([&] {
    model.validate();
    if (a.mechanism == "vsa") {
      return lrf::normalize(lrf::model_weights(model, lrf::ModelKind::vsa));
    }
    if (a.mechanism == "ssa") {
      return lrf::normalize(lrf::model_weights(model, lrf::ModelKind::ssa));
    }
    if (a.mechanism == "lrf-ssa") {
      if (!(a.lambda >= 0.0 && a.lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
      }
      if (a.local_radius < 0) {
        throw std::invalid_argument("local radius must be non-negative");
      }
      return lrf::lrf_mix(lrf::normalize(lrf::model_weights(model, lrf::ModelKind::ssa)),
                          lrf::local_uniform(a.n, a.local_radius), a.lambda);
    }
    throw std::invalid_argument("unknown mechanism: " + a.mechanism);
  });
  AtomicFile hist(a.histogram_path);
  AtomicFile summary(a.summary_path);
  lrf::write_histogram_csv(hist.stream(), dist);
  const lrf::SummaryRow row{a.mechanism, lrf::receptive_radius(dist, lrf::distance_axis(a.n)), lrf::entropy(dist)};
  lrf::write_summary_csv(summary.stream(), {row});
  hist.commit();
  summary.commit();
  return kExitOk;
}

// ---------------------------------------------------------------- bench-mem

struct BenchArgs {
  std::vector<std::string> modes{"ssa_v1", "ssa_v2", "lrf_ssa_causal", "lrf_dyn"};
  std::vector<lrf::Index> ns{64};
  std::vector<lrf::Index> ds{64};
  lrf::Index k = 8;
  std::vector<lrf::Index> dilations{3, 5};
  std::uint64_t seed = 0;
  std::string json_path;
  std::string csv_path;
};

int cmd_bench_mem(const BenchArgs& a) {
  std::vector<lrf::MemMode> modes;
  lrf::MemSweep sweep;
  translate_errors([&] {
    for (const auto& m : a.modes) {
      modes.push_back(lrf::parse_mem_mode(m));
    }
    for (const auto n : a.ns) {
      if (n < 1) throw std::invalid_argument("--n values must be positive");
    }
    for (const auto d : a.ds) {
      if (d < 1) throw std::invalid_argument("--d values must be positive");
    }
    if (a.k < 1) throw std::invalid_argument("--k must be positive");
    lrf::LrfConfig::zeros(1, a.dilations).validate();
    return 0;
  });
  sweep.ns = a.ns;
  sweep.ds = a.ds;
  sweep.k = a.k;
  sweep.dilations = a.dilations;
  sweep.seed = a.seed;
  std::optional<AtomicFile> json_out;
  std::optional<AtomicFile> csv_out;
  if (!a.json_path.empty()) json_out.emplace(a.json_path);
  if (!a.csv_path.empty()) csv_out.emplace(a.csv_path);

  const lrf::CompareReport rep = lrf::compare(modes, sweep);
  if (json_out) {
    json_out->stream() << lrf::to_json(rep);
    json_out->commit();
  }
  if (csv_out) {
    csv_out->stream() << lrf::to_csv(rep);
    csv_out->commit();
  }
  if (!json_out && !csv_out) {
    std::cout << lrf::to_json(rep);
  }
  for (const auto& r : rep.ratios) {
    std::cerr << lrf::to_string(r.numerator) << " / " << lrf::to_string(r.denominator) << " at n=" << r.n
              << " d=" << r.d << ": " << r.ratio << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- export-kernel

struct KernelArgs {
  std::uint64_t seed = 0;
  lrf::Index k = 8;
  lrf::Index d = 16;
  lrf::Index length = 64;
  std::string out_path;
};

int cmd_export_kernel(const KernelArgs& a) {
  translate_errors([&] {
    if (a.k < 1 || a.d < 1 || a.length < 1) {
      throw std::invalid_argument("--k, --d and --length must be positive");
    }
    return 0;
  });
  std::optional<AtomicFile> out;
  if (!a.out_path.empty()) out.emplace(a.out_path);
  lrf::Rng rng(a.seed);
  const lrf::DendriticParams params = lrf::DendriticParams::random_stable(a.k, a.d, rng);
  const lrf::DynKernel kernel = lrf::dyn_kernel(params, a.length);
  std::ostringstream os;
  os << "m,channel,tap_value\n";
  os.precision(17);
  for (lrf::Index m = 0; m < kernel.length(); ++m) {
    for (lrf::Index c = 0; c < a.d; ++c) {
      os << m << ',' << c << ',' << kernel.taps(m, c) << '\n';
    }
  }
  if (out) {
    out->stream() << os.str();
    out->commit();
  } else {
    std::cout << os.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string model = "lrf_dyn";
  std::uint64_t seed = 0;
  lrf::Index epochs = 50;
  lrf::Index batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::string surrogate = "sigmoid";
  double surrogate_width = 0.5;
  lrf::Index timesteps = 2;
  lrf::Index k = 8;
  std::string log_path;
  std::string checkpoint_path;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  lrf::BlockKind kind{};
  lrf::TrainConfig cfg;
  translate_errors([&] {
    kind = lrf::parse_block_kind(a.model);
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.learning_rate;
    cfg.momentum = a.momentum;
    cfg.seed = a.seed;
    cfg.surrogate = {lrf::parse_surrogate_kind(a.surrogate), a.surrogate_width};
    cfg.timesteps = a.timesteps;
    cfg.k = a.k;
    cfg.validate();
    return 0;
  });
  AtomicFile log(a.log_path);
  std::optional<AtomicFile> ckpt;
  if (!a.checkpoint_path.empty()) ckpt.emplace(a.checkpoint_path);

  const lrf::TrainResult res = lrf::train_toy(lrf::ToyTask{}, kind, cfg, [&](const lrf::EpochLog& e) {
    if (!a.quiet) {
      std::cerr << "epoch " << e.epoch << "  loss " << e.train_loss << "  train_acc " << e.train_acc
                << "  test_acc " << e.test_acc << '\n';
    }
  });
  lrf::write_log_csv(log.stream(), res.log);
  if (ckpt) {
    lrf::save_checkpoint(ckpt->stream(), res.model);
  }
  log.commit();
  if (ckpt) ckpt->commit();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking attention verification and benchmarking toolkit"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with per-command option values; flags override it");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the invariant suites and print a JSON report");
  verify->add_option("--scope", va.scope, "all, attention, dyn, analysis or membench")->capture_default_str();
  verify->add_option("--json", va.json_path, "Write the report here instead of stdout");
  verify->add_flag("--perturb-kernel-tap", va.perturb_kernel_tap, "Fault injection: scale one kernel tap");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Distance histogram and summary of a 1-D attention model");
  analyze->add_option("--mechanism", aa.mechanism, "vsa, ssa or lrf-ssa")->capture_default_str();
  analyze->add_option("--alpha", aa.alpha, "Similarity intercept")->capture_default_str();
  analyze->add_option("--beta", aa.beta, "Similarity decay per unit distance")->capture_default_str();
  analyze->add_option("--n", aa.n, "Number of distances")->capture_default_str();
  analyze->add_option("--lambda", aa.lambda, "Local mixing weight (lrf-ssa)")->capture_default_str();
  analyze->add_option("--local-radius", aa.local_radius, "Support of the local term (lrf-ssa)")->capture_default_str();
  analyze->add_option("--histogram", aa.histogram_path, "Histogram CSV path")->required();
  analyze->add_option("--summary", aa.summary_path, "Summary CSV path")->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench-mem", "Count streaming inference state per mechanism");
  bench->add_option("--modes", ba.modes, "Comma separated modes")->delimiter(',')->capture_default_str();
  bench->add_option("--n", ba.ns, "Token counts")->delimiter(',')->capture_default_str();
  bench->add_option("--d", ba.ds, "Channel counts")->delimiter(',')->capture_default_str();
  bench->add_option("--k", ba.k, "Dendrites per neuron")->capture_default_str();
  bench->add_option("--dilations", ba.dilations, "Local dilations")->delimiter(',')->capture_default_str();
  bench->add_option("--seed", ba.seed, "Seed for the streaming-vs-batch inputs")->capture_default_str();
  bench->add_option("--json", ba.json_path, "JSON report path");
  bench->add_option("--csv", ba.csv_path, "CSV report path");

  KernelArgs ka;
  auto* kernel = app.add_subcommand("export-kernel", "Write the impulse response of random stable parameters");
  kernel->add_option("--seed", ka.seed, "Parameter seed")->required();
  kernel->add_option("--k", ka.k, "Dendrites per neuron")->capture_default_str();
  kernel->add_option("--d", ka.d, "Channels")->capture_default_str();
  kernel->add_option("--length", ka.length, "Number of taps")->capture_default_str();
  kernel->add_option("--out", ka.out_path, "CSV path (stdout when omitted)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one attention block on the toy motif task");
  train->add_option("--model", ta.model, "ssa, lrf_ssa or lrf_dyn")->capture_default_str();
  train->add_option("--seed", ta.seed, "Data, initialisation and shuffle seed")->required();
  train->add_option("--epochs", ta.epochs, "Epochs; 0 only evaluates the initial model")->capture_default_str();
  train->add_option("--batch-size", ta.batch_size)->capture_default_str();
  train->add_option("--lr", ta.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--momentum", ta.momentum)->capture_default_str();
  train->add_option("--surrogate", ta.surrogate, "sigmoid or rectangular")->capture_default_str();
  train->add_option("--surrogate-width", ta.surrogate_width)->capture_default_str();
  train->add_option("--timesteps", ta.timesteps)->capture_default_str();
  train->add_option("--k", ta.k, "Dendrites per neuron (lrf_dyn)")->capture_default_str();
  train->add_option("--log", ta.log_path, "Training log CSV path")->required();
  train->add_option("--checkpoint", ta.checkpoint_path, "Checkpoint path");
  train->add_flag("--quiet", ta.quiet, "No per-epoch progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va);
    if (*analyze) return cmd_analyze(aa);
    if (*bench) return cmd_bench_mem(ba);
    if (*kernel) return cmd_export_kernel(ka);
    if (*train) return cmd_train(ta);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitUsage;
}
