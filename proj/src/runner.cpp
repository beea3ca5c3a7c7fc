#include "advdiff/runner.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

std::size_t parse_rule_value(const std::string& rule, const char* what) {
  try {
    return static_cast<std::size_t>(std::stoull(rule));
  } catch (const std::exception&) {
    throw ConfigError(std::string("attack: bad ") + what + " rule '" + rule +
                      "'");
  }
}

// Runs fn(i) for every index, either inline or on a small worker pool;
// each index owns its output slot so the result is schedule-independent.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(threads, count);
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<AttackTask> make_attack_tasks(std::size_t count,
                                          std::size_t classes,
                                          const std::string& label_rule,
                                          const std::string& target_rule,
                                          bool targeted,
                                          std::uint64_t master_seed) {
  if (classes < 2) throw ConfigError("attack: need >= 2 classes");
  std::vector<AttackTask> tasks(count);
  for (std::size_t i = 0; i < count; ++i) {
    AttackTask& t = tasks[i];
    t.index = i;
    if (label_rule == "all") {
      t.label = i % classes;
    } else {
      t.label = parse_rule_value(label_rule, "label");
      if (t.label >= classes) throw ConfigError("attack: label out of range");
    }
    if (!targeted) continue;
    if (target_rule == "random") {
      RngStream rng(master_seed, stream_ids::kAttackTaskBase + i);
      t.target = (t.label + 1 + rng.below(classes - 1)) % classes;
    } else if (target_rule.rfind("offset:", 0) == 0) {
      const std::size_t d = parse_rule_value(target_rule.substr(7), "target");
      if (d % classes == 0) {
        throw ConfigError("attack: offset target equals the label");
      }
      t.target = (t.label + d) % classes;
    } else if (target_rule.rfind("fixed:", 0) == 0) {
      const std::size_t k = parse_rule_value(target_rule.substr(6), "target");
      if (k >= classes) throw ConfigError("attack: target out of range");
      if (k == t.label) {
        throw ConfigError(
            "attack: fixed target collides with label " +
            std::to_string(t.label) + "; use label != target");
      }
      t.target = k;
    } else {
      throw ConfigError("attack: unknown target rule '" + target_rule + "'");
    }
  }
  return tasks;
}

std::vector<AttackRecord> run_attack_suite(
    const Denoiser& den, const Classifier& classifier,
    const GuidanceConfig& cfg, const NoiseSchedule& sched, SamplerKind kind,
    std::span<const AttackTask> tasks, std::uint64_t master_seed,
    std::size_t threads) {
  std::vector<AttackRecord> records(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    const AttackTask& task = tasks[i];
    AttackSpec spec{task.label, task.target, &classifier};
    RngStream rng(master_seed, stream_ids::kAttackBase + task.index);
    records[i].task = task;
    records[i].result = kind == SamplerKind::kDdpm
                            ? advdiff_ddpm(den, spec, cfg, sched, rng)
                            : advdiff_ddim(den, spec, cfg, sched, rng);
  });
  return records;
}

std::vector<AttackRecord> run_benign_suite(const Denoiser& den,
                                           const Classifier& classifier,
                                           double w,
                                           const NoiseSchedule& sched,
                                           SamplerKind kind,
                                           std::size_t ddim_steps,
                                           std::span<const AttackTask> tasks,
                                           std::uint64_t master_seed,
                                           std::size_t threads) {
  std::vector<AttackRecord> records(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    const AttackTask& task = tasks[i];
    RngStream rng(master_seed, stream_ids::kAttackBase + task.index);
    Tensor x0 = kind == SamplerKind::kDdpm
                    ? sample_ddpm(den, task.label, w, sched, rng)
                    : sample_ddim(den, task.label, w, sched, ddim_steps, rng);
    AttackRecord& rec = records[i];
    rec.task = task;
    const std::size_t verdict = classifier.predict(x0);
    rec.result.verdicts.push_back(verdict);
    rec.result.success = task.target.has_value() ? verdict == *task.target
                                                 : verdict != task.label;
    if (rec.result.success) rec.result.first_success_restart = 0;
    rec.result.x_final = std::move(x0);
  });
  return records;
}

}  // namespace advdiff
