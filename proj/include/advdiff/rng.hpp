#pragma once

#include <cstdint>

#include "advdiff/tensor.hpp"

namespace advdiff {

// Counter-based random stream. Draw i of stream (seed, id) is
//
//   mix64(key + i * GAMMA),   key = mix64(mix64(seed) + (id + 1) * GAMMA)
//
// where mix64 is the splitmix64 finalizer and GAMMA its increment
// (0x9E3779B97F4A7C15). Streams never share state, so independent
// consumers (one stream per attack, per dataset, per training run) can
// run in any order — serial and parallel execution draw identical values.
//
// Gaussians come from a Box-Muller pair with the spare cached, so a
// stream's normal sequence depends only on its own draw count.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  double uniform01();                   // [0,1), 53-bit resolution
  double uniform(double lo, double hi);
  double normal();
  std::size_t below(std::size_t n);     // uniform in [0,n), n >= 1

  Tensor normal_tensor(std::vector<std::size_t> shape);
  void fill_normal(Tensor& t);
  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream-id layout for CLI runs; attacks get one stream each so results
// do not depend on scheduling.
namespace stream_ids {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kModelInit = 2;
inline constexpr std::uint64_t kTraining = 3;
inline constexpr std::uint64_t kPgd = 4;
inline constexpr std::uint64_t kAttackTaskBase = 1u << 20;  // + attack index
inline constexpr std::uint64_t kAttackBase = 1u << 21;      // + attack index
}  // namespace stream_ids

}  // namespace advdiff
