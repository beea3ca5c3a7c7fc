#include "advdiff/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "advdiff/checkpoint.hpp"
#include "advdiff/config.hpp"
#include "advdiff/data.hpp"
#include "advdiff/errors.hpp"
#include "advdiff/eval.hpp"
#include "advdiff/guidance.hpp"
#include "advdiff/runner.hpp"
#include "advdiff/training.hpp"

namespace advdiff {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* preset_text(const std::string& name) {
  if (name == "mnist-paper") {
    return "[schedule]\n"
           "kind = linear\n"
           "timesteps = 500\n"
           "beta_start = 1e-4\n"
           "beta_end = 0.02\n"
           "[guidance]\n"
           "w = 1\n"
           "s = 0.5\n"
           "a = 1\n"
           "restarts = 10\n"
           "t_star = 0.5\n"
           "[attack]\n"
           "sampler = ddpm\n";
  }
  if (name == "imagenet-paper") {
    return "[schedule]\n"
           "kind = linear\n"
           "timesteps = 1000\n"
           "beta_start = 1e-4\n"
           "beta_end = 0.02\n"
           "[guidance]\n"
           "w = 1\n"
           "s = 0.7\n"
           "a = 0.5\n"
           "restarts = 5\n"
           "t_star = 0.5\n"
           "ddim_steps = 200\n"
           "[attack]\n"
           "sampler = ddim\n";
  }
  throw ConfigError("unknown preset '" + name +
                    "' (expected mnist-paper or imagenet-paper)");
}

Config load_config(const CliOptions& opts) {
  Config cfg;
  if (!opts.preset.empty()) {
    cfg = Config::parse_text(preset_text(opts.preset), "preset");
  }
  if (!opts.config_path.empty()) {
    cfg.overlay(Config::parse_file(opts.config_path));
  }
  if (opts.seed) cfg.set("run", "seed", std::to_string(*opts.seed));
  if (!opts.out_dir.empty()) cfg.set("output", "dir", opts.out_dir);
  return cfg;
}

struct ResolvedCommon {
  std::uint64_t seed = 0;
  fs::path out_dir;
};

ResolvedCommon resolve_common(ConfigReader& r) {
  ResolvedCommon c;
  c.seed = r.get_u64("run", "seed", 0);
  c.out_dir = r.get_string("output", "dir", "out");
  return c;
}

NoiseSchedule resolve_schedule(ConfigReader& r) {
  const std::string kind = r.get_enum("schedule", "kind", "linear", {"linear"});
  const std::uint64_t timesteps = r.get_u64("schedule", "timesteps", 500);
  const double beta_start = r.get_double("schedule", "beta_start", 1e-4);
  const double beta_end = r.get_double("schedule", "beta_end", 0.02);
  return make_schedule(ScheduleKind::kLinear, timesteps, beta_start, beta_end);
}

struct DataSpec {
  std::size_t classes = 8;
  std::size_t per_class = 256;
  double radius = 2.0;
  double gamma = 0.2;
  std::uint64_t seed = 0;
};

DataSpec resolve_data(ConfigReader& r, std::uint64_t master_seed) {
  DataSpec d;
  d.classes = r.get_u64("data", "classes", 8);
  d.per_class = r.get_u64("data", "per_class", 256);
  d.radius = r.get_double("data", "radius", 2.0);
  d.gamma = r.get_double("data", "gamma", 0.2);
  d.seed = r.get_u64("data", "seed", master_seed);
  return d;
}

Dataset build_dataset(const DataSpec& d) {
  return make_ring_mixture(d.classes, d.per_class, d.radius, d.gamma, d.seed);
}

void write_resolved(const ConfigReader& r, const fs::path& out_dir) {
  std::ofstream os(out_dir / "config.resolved.ini");
  if (!os) {
    throw ConfigError("cannot write " +
                      (out_dir / "config.resolved.ini").string());
  }
  os << r.render_resolved();
}

void write_results_csv(const fs::path& path,
                       std::span<const AttackRecord> records) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << "index,label,target,success,first_success,verdicts\n";
  for (const AttackRecord& rec : records) {
    os << rec.task.index << "," << rec.task.label << ",";
    if (rec.task.target) os << *rec.task.target;
    os << "," << (rec.result.success ? 1 : 0) << ",";
    if (rec.result.first_success_restart) {
      os << *rec.result.first_success_restart;
    }
    os << ",";
    for (std::size_t i = 0; i < rec.result.verdicts.size(); ++i) {
      if (i) os << ";";
      os << rec.result.verdicts[i];
    }
    os << "\n";
  }
}

void write_samples_csv(const fs::path& path,
                       std::span<const AttackRecord> records) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  const std::size_t d =
      records.empty() ? 0 : records[0].result.x_final.size();
  os << "index,label";
  for (std::size_t i = 0; i < d; ++i) os << ",x" << i;
  os << "\n";
  for (const AttackRecord& rec : records) {
    os << rec.task.index << "," << rec.task.label;
    for (std::size_t i = 0; i < d; ++i) {
      os << "," << fmt(rec.result.x_final[i]);
    }
    os << "\n";
  }
}

struct BuiltModels {
  std::unique_ptr<Denoiser> denoiser;
  std::unique_ptr<Classifier> classifier;
};

std::unique_ptr<Denoiser> build_denoiser(const std::string& source,
                                         const Dataset& data,
                                         const NoiseSchedule& sched) {
  if (source == "analytic") {
    return std::make_unique<AnalyticDenoiser>(data.centers, data.gamma, sched);
  }
  LoadedDenoiser loaded = load_denoiser_checkpoint(source);
  if (loaded.params.arch.classes != data.classes() ||
      loaded.params.arch.data_dim != data.dim()) {
    throw CheckpointError(
        "checkpoint: denoiser architecture does not match the dataset");
  }
  if (loaded.params.arch.timesteps != sched.timesteps) {
    throw CheckpointError(
        "checkpoint: denoiser was trained for a different timestep count");
  }
  return std::make_unique<MlpDenoiser>(std::move(loaded.params));
}

std::unique_ptr<Classifier> build_classifier(const std::string& source,
                                             double quadratic_tau,
                                             const Dataset& data) {
  if (source == "quadratic") {
    return std::make_unique<QuadraticClassifier>(data.centers, quadratic_tau);
  }
  LoadedClassifier loaded = load_classifier_checkpoint(source);
  if (loaded.params.arch.classes != data.classes() ||
      loaded.params.arch.data_dim != data.dim()) {
    throw CheckpointError(
        "checkpoint: classifier architecture does not match the dataset");
  }
  return std::make_unique<MlpClassifier>(std::move(loaded.params));
}

std::string echo_guidance(const GuidanceConfig& g, const std::string& mode,
                          const std::string& sampler) {
  std::ostringstream os;
  os << "sampler=" << sampler << " mode=" << mode << " w=" << g.w
     << " s=" << g.s << " a=" << g.a << " N=" << g.restarts
     << " t_star=" << g.t_star;
  return os.str();
}

}  // namespace

int cmd_train_denoiser(const CliOptions& opts) {
  const Config cfg = load_config(opts);
  ConfigReader r(cfg);
  const ResolvedCommon common = resolve_common(r);
  const NoiseSchedule sched = resolve_schedule(r);
  const DataSpec dspec = resolve_data(r, common.seed);

  TrainConfig tc;
  tc.epochs = r.get_u64("train", "epochs", 200);
  tc.batch = r.get_u64("train", "batch", 128);
  tc.lr = r.get_double("train", "lr", 0.05);
  tc.p_uncond = r.get_double("train", "p_uncond", 0.1);
  tc.seed = common.seed;
  const std::string ckpt_name =
      r.get_string("output", "checkpoint", "denoiser.ckpt");
  const std::string curve_name =
      r.get_string("output", "curve", "curve_denoiser.csv");
  r.reject_unknown();

  fs::create_directories(common.out_dir);
  const Dataset data = build_dataset(dspec);
  std::vector<TrainCurvePoint> curve;
  const DenoiserParams params = train_denoiser(tc, data, sched, &curve);

  CheckpointMeta meta;
  meta.seed = tc.seed;
  meta.epochs = tc.epochs;
  meta.final_loss = curve.empty() ? 0.0 : curve.back().loss;
  save_denoiser_checkpoint(params, meta, (common.out_dir / ckpt_name).string());
  write_curve_csv((common.out_dir / curve_name).string(), curve);
  write_resolved(r, common.out_dir);
  std::cout << "trained denoiser: final loss " << fmt(meta.final_loss)
            << ", checkpoint " << (common.out_dir / ckpt_name).string()
            << "\n";
  return kExitOk;
}

int cmd_train_classifier(const CliOptions& opts) {
  const Config cfg = load_config(opts);
  ConfigReader r(cfg);
  const ResolvedCommon common = resolve_common(r);
  const DataSpec dspec = resolve_data(r, common.seed);

  TrainConfig tc;
  tc.epochs = r.get_u64("train", "epochs", 120);
  tc.batch = r.get_u64("train", "batch", 128);
  tc.lr = r.get_double("train", "lr", 0.1);
  tc.p_uncond = 0.0;
  tc.seed = common.seed;
  const bool adversarial = r.get_bool("train", "adversarial", false);
  PgdConfig pgd;
  if (adversarial) {
    pgd.epsilon = r.get_double("pgd", "epsilon", 0.6);
    pgd.step_size = r.get_double("pgd", "step_size", 0.075);
    pgd.steps = r.get_u64("pgd", "steps", 10);
    pgd.random_start = r.get_bool("pgd", "random_start", true);
  }
  const std::string ckpt_name =
      r.get_string("output", "checkpoint", "classifier.ckpt");
  const std::string curve_name =
      r.get_string("output", "curve", "curve_classifier.csv");
  r.reject_unknown();

  fs::create_directories(common.out_dir);
  const Dataset data = build_dataset(dspec);
  std::vector<TrainCurvePoint> curve;
  const ClassifierParams params =
      adversarial ? adversarial_train(tc, pgd, data, &curve)
                  : train_classifier(tc, data, &curve);

  CheckpointMeta meta;
  meta.seed = tc.seed;
  meta.epochs = tc.epochs;
  meta.final_loss = curve.empty() ? 0.0 : curve.back().loss;
  save_classifier_checkpoint(params, meta,
                             (common.out_dir / ckpt_name).string());
  write_curve_csv((common.out_dir / curve_name).string(), curve);
  write_resolved(r, common.out_dir);
  std::cout << "trained classifier: final loss " << fmt(meta.final_loss)
            << ", train accuracy "
            << fmt(curve.empty() ? 0.0 : curve.back().accuracy) << "\n";
  return kExitOk;
}

int cmd_attack(const CliOptions& opts) {
  const Config cfg = load_config(opts);
  ConfigReader r(cfg);
  const ResolvedCommon common = resolve_common(r);
  const NoiseSchedule sched = resolve_schedule(r);
  const DataSpec dspec = resolve_data(r, common.seed);

  GuidanceConfig g;
  g.w = r.get_double("guidance", "w", 1.0);
  g.s = r.get_double("guidance", "s", 0.5);
  g.a = r.get_double("guidance", "a", 1.0);
  g.restarts = r.get_u64("guidance", "restarts", 10);
  g.t_star = r.get_double("guidance", "t_star", 0.5);
  g.ddim_steps = r.get_u64("guidance", "ddim_steps", 50);
  const std::string mode =
      r.get_enum("guidance", "mode", "targeted", {"targeted", "untargeted"});
  const std::string noise_scale =
      r.get_enum("guidance", "noise_scale", "per-algorithm",
                 {"per-algorithm", "with-sigma-bar", "without-sigma-bar"});
  g.noise_scale = noise_scale == "per-algorithm"
                      ? NoiseGuidanceScale::kPerAlgorithm
                      : (noise_scale == "with-sigma-bar"
                             ? NoiseGuidanceScale::kWithSigmaBar
                             : NoiseGuidanceScale::kWithoutSigmaBar);

  const std::string sampler =
      r.get_enum("attack", "sampler", "ddpm", {"ddpm", "ddim"});
  const std::uint64_t count = r.get_u64("attack", "count", 100);
  const std::string label_rule = r.get_string("attack", "label", "all");
  const std::string target_rule = r.get_string("attack", "target", "random");
  const std::string den_src = r.get_string("attack", "denoiser", "analytic");
  const std::string clf_src = r.get_string("attack", "classifier", "quadratic");
  const double quad_tau = r.get_double("attack", "quadratic_tau", 0.25);
  r.reject_unknown();

  fs::create_directories(common.out_dir);
  const Dataset data = build_dataset(dspec);
  const auto den = build_denoiser(den_src, data, sched);
  const auto clf = build_classifier(clf_src, quad_tau, data);

  const auto tasks =
      make_attack_tasks(count, data.classes(), label_rule, target_rule,
                        mode == "targeted", common.seed);
  const SamplerKind kind =
      sampler == "ddpm" ? SamplerKind::kDdpm : SamplerKind::kDdim;
  const auto records = run_attack_suite(*den, *clf, g, sched, kind, tasks,
                                        common.seed, opts.threads);

  write_results_csv(common.out_dir / "results.csv", records);
  write_samples_csv(common.out_dir / "samples.csv", records);

  const QuadraticClassifier oracle = nearest_center_oracle(data.centers);
  const EvalReport report =
      make_eval_report(records, oracle, nullptr, data.centers, data.gamma,
                       g.restarts, {}, echo_guidance(g, mode, sampler));
  write_report_text(report, (common.out_dir / "report.txt").string());
  write_report_csv(report, (common.out_dir / "report.csv").string());
  write_resolved(r, common.out_dir);
  std::cout << "attack suite: " << records.size() << " attacks, asr "
            << fmt(report.asr) << ", flipped-label rate "
            << fmt(report.flipped.value) << "\n";
  return kExitOk;
}

int cmd_sample(const CliOptions& opts) {
  const Config cfg = load_config(opts);
  ConfigReader r(cfg);
  const ResolvedCommon common = resolve_common(r);
  const NoiseSchedule sched = resolve_schedule(r);
  const DataSpec dspec = resolve_data(r, common.seed);

  const std::string sampler =
      r.get_enum("sample", "sampler", "ddpm", {"ddpm", "ddim"});
  const std::uint64_t count = r.get_u64("sample", "count", 100);
  const std::string label_rule = r.get_string("sample", "label", "all");
  const double w = r.get_double("sample", "w", 1.0);
  const std::uint64_t ddim_steps = r.get_u64("sample", "ddim_steps", 50);
  const std::string den_src = r.get_string("sample", "denoiser", "analytic");
  r.reject_unknown();

  fs::create_directories(common.out_dir);
  const Dataset data = build_dataset(dspec);
  const auto den = build_denoiser(den_src, data, sched);
  const QuadraticClassifier oracle = nearest_center_oracle(data.centers);

  const auto tasks = make_attack_tasks(count, data.classes(), label_rule,
                                       "random", false, common.seed);
  const SamplerKind kind =
      sampler == "ddpm" ? SamplerKind::kDdpm : SamplerKind::kDdim;
  const auto records = run_benign_suite(*den, oracle, w, sched, kind,
                                        ddim_steps, tasks, common.seed,
                                        opts.threads);
  write_samples_csv(common.out_dir / "samples.csv", records);
  write_resolved(r, common.out_dir);
  std::cout << "sampled " << records.size() << " points\n";
  return kExitOk;
}

namespace {

std::vector<AttackRecord> read_records(const fs::path& results_path,
                                       const fs::path& samples_path) {
  std::ifstream rs(results_path);
  if (!rs) throw ConfigError("cannot open " + results_path.string());
  std::ifstream ss(samples_path);
  if (!ss) throw ConfigError("cannot open " + samples_path.string());

  std::vector<AttackRecord> records;
  std::string line;
  if (!std::getline(rs, line)) throw ConfigError("results: empty file");
  while (std::getline(rs, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    AttackRecord rec;
    std::getline(ls, cell, ',');
    rec.task.index = std::stoull(cell);
    std::getline(ls, cell, ',');
    rec.task.label = std::stoull(cell);
    std::getline(ls, cell, ',');
    if (!cell.empty()) rec.task.target = std::stoull(cell);
    std::getline(ls, cell, ',');
    rec.result.success = cell == "1";
    std::getline(ls, cell, ',');
    if (!cell.empty()) rec.result.first_success_restart = std::stoull(cell);
    if (std::getline(ls, cell)) {
      std::istringstream vs(cell);
      std::string v;
      while (std::getline(vs, v, ';')) {
        rec.result.verdicts.push_back(std::stoull(v));
      }
    }
    records.push_back(std::move(rec));
  }

  if (!std::getline(ss, line)) throw ConfigError("samples: empty file");
  std::size_t dims = 0;
  {
    std::istringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.size() < 3) throw ConfigError("samples: expected coordinates");
    dims = cols.size() - 2;
  }
  std::size_t row = 0;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (row >= records.size()) throw ConfigError("samples: extra rows");
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // index
    if (std::stoull(cell) != records[row].task.index) {
      throw ConfigError("samples: row order does not match results");
    }
    std::getline(ls, cell, ',');  // label
    Tensor x = Tensor::zeros({dims});
    for (std::size_t i = 0; i < dims; ++i) {
      if (!std::getline(ls, cell, ',')) {
        throw ConfigError("samples: short row");
      }
      x[i] = std::stod(cell);
    }
    records[row].result.x_final = std::move(x);
    ++row;
  }
  if (row != records.size()) {
    throw ConfigError("samples: row count does not match results");
  }
  return records;
}

}  // namespace

int cmd_eval(const CliOptions& opts) {
  const Config cfg = load_config(opts);
  ConfigReader r(cfg);
  const ResolvedCommon common = resolve_common(r);
  const DataSpec dspec = resolve_data(r, common.seed);

  const std::string results_path = r.require_string("eval", "results");
  const std::string samples_path = r.require_string("eval", "samples");
  const std::string benign_results =
      r.get_string("eval", "benign_results", "");
  const std::string benign_samples =
      r.get_string("eval", "benign_samples", "");
  const std::string alt_clf_path = r.get_string("eval", "alt_classifier", "");
  r.reject_unknown();

  fs::create_directories(common.out_dir);
  const Dataset data = build_dataset(dspec);
  const auto records = read_records(results_path, samples_path);

  std::vector<AttackRecord> benign;
  if (!benign_results.empty() != !benign_samples.empty()) {
    throw ConfigError(
        "eval: benign_results and benign_samples must be given together");
  }
  if (!benign_results.empty()) {
    benign = read_records(benign_results, benign_samples);
  }

  std::unique_ptr<MlpClassifier> alt;
  if (!alt_clf_path.empty()) {
    alt = std::make_unique<MlpClassifier>(
        load_classifier_checkpoint(alt_clf_path).params);
  }

  std::size_t restarts = 1;
  for (const AttackRecord& rec : records) {
    restarts = std::max(restarts, rec.result.verdicts.size());
  }
  const QuadraticClassifier oracle = nearest_center_oracle(data.centers);
  const EvalReport report = make_eval_report(
      records, oracle, alt.get(), data.centers, data.gamma, restarts, benign,
      "eval of " + results_path);
  write_report_text(report, (common.out_dir / "report.txt").string());
  write_report_csv(report, (common.out_dir / "report.csv").string());
  write_resolved(r, common.out_dir);
  std::cout << "eval: asr " << fmt(report.asr) << ", flipped-label rate "
            << fmt(report.flipped.value) << "\n";
  return kExitOk;
}

int cmd_verify(const CliOptions& opts) {
  const auto results = run_verify_checks(opts.verify);
  std::size_t passed = 0;
  for (const CheckResult& c : results) {
    std::printf("%-34s %-5s measured %-12.4g tol %-12.4g %s  (%.2fs)\n",
                c.name.c_str(), c.monte_carlo ? "MC" : "exact", c.measured,
                c.tolerance, c.pass ? "PASS" : "FAIL", c.seconds);
    if (c.pass) ++passed;
  }
  std::printf("verify: %zu/%zu checks passed\n", passed, results.size());
  return passed == results.size() ? kExitOk : kExitFailure;
}

int run_command(const CliOptions& opts) {
  try {
    if (opts.command == "train-denoiser") return cmd_train_denoiser(opts);
    if (opts.command == "train-classifier") return cmd_train_classifier(opts);
    if (opts.command == "attack") return cmd_attack(opts);
    if (opts.command == "sample") return cmd_sample(opts);
    if (opts.command == "eval") return cmd_eval(opts);
    if (opts.command == "verify") return cmd_verify(opts);
    std::cerr << "error: unknown command '" << opts.command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace advdiff
