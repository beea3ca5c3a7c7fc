#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advdiff/data.hpp"
#include "advdiff/runner.hpp"

namespace advdiff {

struct ClassStats {
  std::size_t label = 0;
  std::size_t count = 0;
  double mean_shift = 0.0;       // |sample mean - c_y|
  double cov_trace_ratio = 0.0;  // tr(sample cov) / (gamma^2 D)
};

struct FlippedLabelRate {
  double value = 0.0;
  bool no_successes = false;  // warning flag; value is then defined as 0
};

struct EvalReport {
  double asr = 0.0;
  FlippedLabelRate flipped;
  std::optional<FlippedLabelRate> flipped_alt;
  std::vector<ClassStats> per_class;
  std::vector<ClassStats> benign_per_class;        // when a baseline is given
  std::optional<double> mean_shift_ratio;          // adv vs benign, class mean
  std::vector<std::size_t> restart_histogram;      // first success; last = none
  std::string config_echo;
};

// Fraction of records with success = true; empty input is an error.
double attack_success_rate(std::span<const AttackRecord> records);

// Fraction of successful attacks whose oracle verdict differs from the
// intended generation label (the sample no longer reads as its class).
FlippedLabelRate flipped_label_rate(std::span<const AttackRecord> records,
                                    const Classifier& oracle);

// Per-class sample-moment distance to the reference mixture; every
// evaluated class needs at least min_count samples.
std::vector<ClassStats> class_stats_distance(
    std::span<const LabeledSample> samples, const std::vector<Tensor>& centers,
    double gamma, std::size_t min_count = 30);

std::vector<LabeledSample> records_to_samples(
    std::span<const AttackRecord> records);

EvalReport make_eval_report(std::span<const AttackRecord> records,
                            const Classifier& oracle,
                            const Classifier* alt_oracle,
                            const std::vector<Tensor>& centers, double gamma,
                            std::size_t restarts,
                            std::span<const AttackRecord> benign_baseline,
                            std::string config_echo);

void write_report_text(const EvalReport& report, const std::string& path);
// long-format rows: metric,label,value
void write_report_csv(const EvalReport& report, const std::string& path);

}  // namespace advdiff
