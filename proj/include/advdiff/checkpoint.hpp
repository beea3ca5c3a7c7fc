#pragma once

#include <cstdint>
#include <string>

#include "advdiff/models.hpp"

namespace advdiff {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t epochs = 0;
  double final_loss = 0.0;
};

// File layout (see README for the full grammar): a line-oriented text
// header — magic+version, kind tag, architecture and metadata fields —
// followed by one "tensor <name> <rows> <cols>" line per weight array,
// each immediately followed by rows*cols raw little-endian 64-bit values,
// and a final "end" line. Loading a file with a different version or kind
// tag fails; a round trip reproduces every weight bitwise.
void save_denoiser_checkpoint(const DenoiserParams& params,
                              const CheckpointMeta& meta,
                              const std::string& path);
void save_classifier_checkpoint(const ClassifierParams& params,
                                const CheckpointMeta& meta,
                                const std::string& path);

struct LoadedDenoiser {
  DenoiserParams params;
  CheckpointMeta meta;
};
struct LoadedClassifier {
  ClassifierParams params;
  CheckpointMeta meta;
};

LoadedDenoiser load_denoiser_checkpoint(const std::string& path);
LoadedClassifier load_classifier_checkpoint(const std::string& path);

}  // namespace advdiff
