#include "pioracle/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace pioracle {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t b = splitmix64(s);
  return b ^ splitmix64(s);
}

double RngStream::normal() {
  // Box-Muller; u1 in (0,1] keeps the log finite.
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

std::int64_t RngStream::uniform_int(std::int64_t n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<std::int64_t>(x % un);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_sum_exp_canonical(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return log_sum_exp(sorted);
}

double canonical_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double v : terms) s += v;
  return s;
}

std::vector<int> sort_perm(std::span<const double> z) {
  std::vector<int> idx(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return z[a] < z[b]; });
  return idx;
}

int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("PI_ORACLE_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < hw) hw = cap;
  }
  return hw;
}

void parallel_chunks(std::int64_t total, std::int64_t chunk_size,
                     const std::function<void(int, std::int64_t, std::int64_t)>& body) {
  if (total <= 0) return;
  if (chunk_size <= 0) chunk_size = 1;
  const int n_chunks = static_cast<int>((total + chunk_size - 1) / chunk_size);
  const int workers = std::min(worker_count(), n_chunks);

  if (workers <= 1) {
    for (int c = 0; c < n_chunks; ++c) {
      const std::int64_t b = static_cast<std::int64_t>(c) * chunk_size;
      body(c, b, std::min(total, b + chunk_size));
    }
    return;
  }

  std::atomic<int> next{0};
  auto run = [&]() {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= n_chunks) break;
      const std::int64_t b = static_cast<std::int64_t>(c) * chunk_size;
      body(c, b, std::min(total, b + chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 0; t + 1 < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

MeanSe mean_se(double sum, double sum_sq, std::int64_t count) {
  MeanSe out;
  if (count <= 0) return out;
  out.mean = sum / static_cast<double>(count);
  if (count > 1) {
    double var = (sum_sq - sum * out.mean) / static_cast<double>(count - 1);
    if (var < 0.0) var = 0.0;
    out.se = std::sqrt(var / static_cast<double>(count));
  }
  return out;
}

}  // namespace pioracle
