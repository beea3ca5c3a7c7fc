#include "advdiff/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double attack_success_rate(std::span<const AttackRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("eval: no attack records");
  }
  std::size_t hits = 0;
  for (const AttackRecord& r : records) {
    if (r.result.success) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

FlippedLabelRate flipped_label_rate(std::span<const AttackRecord> records,
                                    const Classifier& oracle) {
  std::size_t successes = 0;
  std::size_t flipped = 0;
  for (const AttackRecord& r : records) {
    if (!r.result.success) continue;
    ++successes;
    if (oracle.predict(r.result.x_final) != r.task.label) ++flipped;
  }
  if (successes == 0) return {0.0, true};
  return {static_cast<double>(flipped) / static_cast<double>(successes),
          false};
}

std::vector<ClassStats> class_stats_distance(
    std::span<const LabeledSample> samples, const std::vector<Tensor>& centers,
    double gamma, std::size_t min_count) {
  if (samples.empty()) throw std::invalid_argument("eval: no samples");
  const std::size_t d = samples[0].x.size();
  std::map<std::size_t, std::vector<const Tensor*>> by_class;
  for (const LabeledSample& s : samples) {
    if (s.label >= centers.size()) {
      throw std::invalid_argument("eval: sample label outside reference");
    }
    by_class[s.label].push_back(&s.x);
  }
  std::vector<ClassStats> out;
  for (const auto& [label, xs] : by_class) {
    if (xs.size() < min_count) {
      throw std::invalid_argument(
          "eval: class " + std::to_string(label) + " has " +
          std::to_string(xs.size()) + " samples, need >= " +
          std::to_string(min_count));
    }
    Tensor mean = Tensor::zeros({d});
    for (const Tensor* x : xs) {
      for (std::size_t i = 0; i < d; ++i) mean[i] += (*x)[i];
    }
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < d; ++i) mean[i] /= n;

    double trace = 0;
    for (const Tensor* x : xs) trace += squared_norm(*x - mean);
    trace /= (n - 1.0);

    ClassStats cs;
    cs.label = label;
    cs.count = xs.size();
    cs.mean_shift = norm(mean - centers[label]);
    cs.cov_trace_ratio =
        trace / (gamma * gamma * static_cast<double>(d));
    out.push_back(cs);
  }
  return out;
}

std::vector<LabeledSample> records_to_samples(
    std::span<const AttackRecord> records) {
  std::vector<LabeledSample> out;
  out.reserve(records.size());
  for (const AttackRecord& r : records) {
    out.push_back({r.result.x_final, r.task.label});
  }
  return out;
}

namespace {

// class stats need a minimum sample count per class; small runs simply
// omit that section of the report
bool enough_per_class(std::span<const LabeledSample> samples,
                      std::size_t classes, std::size_t min_count) {
  std::vector<std::size_t> counts(classes, 0);
  for (const LabeledSample& s : samples) {
    if (s.label < classes) counts[s.label] += 1;
  }
  for (std::size_t c : counts) {
    if (c > 0 && c < min_count) return false;
  }
  return true;
}

}  // namespace

EvalReport make_eval_report(std::span<const AttackRecord> records,
                            const Classifier& oracle,
                            const Classifier* alt_oracle,
                            const std::vector<Tensor>& centers, double gamma,
                            std::size_t restarts,
                            std::span<const AttackRecord> benign_baseline,
                            std::string config_echo) {
  EvalReport rep;
  rep.asr = attack_success_rate(records);
  rep.flipped = flipped_label_rate(records, oracle);
  if (alt_oracle) rep.flipped_alt = flipped_label_rate(records, *alt_oracle);

  const auto samples = records_to_samples(records);
  if (enough_per_class(samples, centers.size(), 30)) {
    rep.per_class = class_stats_distance(samples, centers, gamma);
  }

  if (!benign_baseline.empty() && !rep.per_class.empty()) {
    const auto benign = records_to_samples(benign_baseline);
    rep.benign_per_class = class_stats_distance(benign, centers, gamma);
    double adv_mean = 0, ben_mean = 0;
    for (const ClassStats& c : rep.per_class) adv_mean += c.mean_shift;
    for (const ClassStats& c : rep.benign_per_class) ben_mean += c.mean_shift;
    adv_mean /= static_cast<double>(rep.per_class.size());
    ben_mean /= static_cast<double>(rep.benign_per_class.size());
    rep.mean_shift_ratio = ben_mean > 0 ? adv_mean / ben_mean
                                        : std::numeric_limits<double>::infinity();
  }

  rep.restart_histogram.assign(restarts + 1, 0);
  for (const AttackRecord& r : records) {
    if (r.result.first_success_restart) {
      rep.restart_histogram[*r.result.first_success_restart] += 1;
    } else {
      rep.restart_histogram[restarts] += 1;
    }
  }
  rep.config_echo = std::move(config_echo);
  return rep;
}

void write_report_text(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("report: cannot write " + path);
  os << "asr: " << fmt(report.asr) << "\n";
  os << "flipped_label_rate: " << fmt(report.flipped.value) << "\n";
  os << "flipped_label_rate_defined: "
     << (report.flipped.no_successes ? "false (no successes)" : "true")
     << "\n";
  if (report.flipped_alt) {
    os << "flipped_label_rate_alt: " << fmt(report.flipped_alt->value) << "\n";
  }
  if (report.mean_shift_ratio) {
    os << "mean_shift_ratio_vs_benign: " << fmt(*report.mean_shift_ratio)
       << "\n";
  }
  os << "restart_histogram:";
  for (std::size_t c : report.restart_histogram) os << " " << c;
  os << "\n";
  for (const ClassStats& c : report.per_class) {
    os << "class " << c.label << ": count " << c.count << " mean_shift "
       << fmt(c.mean_shift) << " cov_trace_ratio " << fmt(c.cov_trace_ratio)
       << "\n";
  }
  for (const ClassStats& c : report.benign_per_class) {
    os << "benign class " << c.label << ": count " << c.count
       << " mean_shift " << fmt(c.mean_shift) << " cov_trace_ratio "
       << fmt(c.cov_trace_ratio) << "\n";
  }
  if (!report.config_echo.empty()) {
    os << "config: " << report.config_echo << "\n";
  }
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("report: cannot write " + path);
  os << "metric,label,value\n";
  os << "asr,," << fmt(report.asr) << "\n";
  os << "flipped_label_rate,," << fmt(report.flipped.value) << "\n";
  os << "flipped_no_successes,," << (report.flipped.no_successes ? 1 : 0)
     << "\n";
  if (report.flipped_alt) {
    os << "flipped_label_rate_alt,," << fmt(report.flipped_alt->value) << "\n";
  }
  if (report.mean_shift_ratio) {
    os << "mean_shift_ratio,," << fmt(*report.mean_shift_ratio) << "\n";
  }
  for (std::size_t i = 0; i < report.restart_histogram.size(); ++i) {
    os << "restart_histogram," << i << "," << report.restart_histogram[i]
       << "\n";
  }
  for (const ClassStats& c : report.per_class) {
    os << "mean_shift," << c.label << "," << fmt(c.mean_shift) << "\n";
    os << "cov_trace_ratio," << c.label << "," << fmt(c.cov_trace_ratio)
       << "\n";
  }
  for (const ClassStats& c : report.benign_per_class) {
    os << "benign_mean_shift," << c.label << "," << fmt(c.mean_shift) << "\n";
    os << "benign_cov_trace_ratio," << c.label << ","
       << fmt(c.cov_trace_ratio) << "\n";
  }
}

}  // namespace advdiff
