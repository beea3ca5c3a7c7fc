#include "advdiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace advdiff {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(mix64(seed) + (stream_id + 1) * kGamma)) {}

std::uint64_t RngStream::next_u64() {
  return mix64(key_ + (++counter_) * kGamma);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] keeps the log finite
  const double u1 =
      static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t RngStream::below(std::size_t n) {
  // multiply-shift keeps the draw count at one word per call
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Tensor RngStream::normal_tensor(std::vector<std::size_t> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  fill_normal(t);
  return t;
}

void RngStream::fill_normal(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal();
}

Tensor RngStream::uniform_tensor(std::vector<std::size_t> shape, double lo,
                                 double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
  return t;
}

}  // namespace advdiff
