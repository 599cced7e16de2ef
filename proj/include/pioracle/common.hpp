#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pioracle {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Thrown when an exact-mode request exceeds the enumeration cap; callers
// should retry with a sampled ensemble.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

std::uint64_t splitmix64(std::uint64_t& state);

// Maps (master seed, stream id) to an independent stream seed. Draw j of any
// Monte Carlo loop uses stream id j, so results do not depend on scheduling
// or on how many draws run in total.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Deterministic per-stream RNG. normal() consumes exactly two engine words
// per variate so streams have no hidden state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1].
  double uniform() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  double normal();

  // Uniform integer on [0, n), unbiased.
  std::int64_t uniform_int(std::int64_t n);

 private:
  std::mt19937_64 gen_;
};

// log(sum(exp(x))) with max subtraction, summed in index order.
double log_sum_exp(std::span<const double> x);

// Same, but summands are sorted first so the result is invariant under
// permutations of the input.
double log_sum_exp_canonical(std::span<const double> x);

// Sum invariant under permutations of the input (sorts, then adds).
double canonical_sum(std::vector<double> terms);

// Indices that sort z ascending; ties keep index order.
std::vector<int> sort_perm(std::span<const double> z);

// Worker count: min(hardware, PI_ORACLE_THREADS if set).
int worker_count();

// Runs body(chunk_index, begin, end) over [0, total) split into fixed-size
// chunks. Chunk boundaries depend only on (total, chunk_size), so per-chunk
// results combined in chunk order are reproducible across thread counts.
void parallel_chunks(std::int64_t total, std::int64_t chunk_size,
                     const std::function<void(int, std::int64_t, std::int64_t)>& body);

// Mean and standard error of a sample given sum and sum of squares.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(double sum, double sum_sq, std::int64_t count);

}  // namespace pioracle
