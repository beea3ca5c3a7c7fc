#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advdiff/guidance.hpp"

namespace advdiff {

enum class SamplerKind { kDdpm, kDdim };

struct AttackTask {
  std::size_t index = 0;
  std::size_t label = 0;
  std::optional<std::size_t> target;  // absent in untargeted mode
};

struct AttackRecord {
  AttackTask task;
  AttackResult result;
};

// Builds the per-attack (y, y_a) assignments. label_rule is "all" (cycle
// through classes) or a class index; target_rule is "random" (uniform over
// the other classes, drawn from the attack's task stream), "offset:<d>"
// or "fixed:<k>". target_rule is ignored in untargeted mode.
std::vector<AttackTask> make_attack_tasks(std::size_t count,
                                          std::size_t classes,
                                          const std::string& label_rule,
                                          const std::string& target_rule,
                                          bool targeted,
                                          std::uint64_t master_seed);

// Runs one attack per task. Attack i draws from stream
// (master_seed, kAttackBase + index), so results are identical however
// the tasks are scheduled; records come back ordered by task position.
std::vector<AttackRecord> run_attack_suite(
    const Denoiser& den, const Classifier& classifier,
    const GuidanceConfig& cfg, const NoiseSchedule& sched, SamplerKind kind,
    std::span<const AttackTask> tasks, std::uint64_t master_seed,
    std::size_t threads);

// Benign per-task sampling with the same stream layout (one sample per
// task, guidance off).
std::vector<AttackRecord> run_benign_suite(const Denoiser& den,
                                           const Classifier& classifier,
                                           double w,
                                           const NoiseSchedule& sched,
                                           SamplerKind kind,
                                           std::size_t ddim_steps,
                                           std::span<const AttackTask> tasks,
                                           std::uint64_t master_seed,
                                           std::size_t threads);

}  // namespace advdiff
