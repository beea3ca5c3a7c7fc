#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "advdiff/verify.hpp"

namespace advdiff {

// Exit codes: 0 success, 1 check or run failure, 2 configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct CliOptions {
  std::string command;
  std::string config_path;  // optional when a preset supplies everything
  std::string preset;       // "", "mnist-paper", "imagenet-paper"
  std::optional<std::uint64_t> seed;
  std::string out_dir;      // overrides [output] dir
  std::size_t threads = 1;  // execution detail, not part of the run config
  VerifyOptions verify;
};

int cmd_train_denoiser(const CliOptions& opts);
int cmd_train_classifier(const CliOptions& opts);
int cmd_attack(const CliOptions& opts);
int cmd_sample(const CliOptions& opts);
int cmd_eval(const CliOptions& opts);
int cmd_verify(const CliOptions& opts);

// Dispatch on opts.command; exceptions map to the exit codes above.
int run_command(const CliOptions& opts);

}  // namespace advdiff
