#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fgi {

// Every reduction in the library goes through these helpers. The index range
// is split into fixed-size chunks, each chunk is summed left-to-right, and
// the per-chunk partials are combined in chunk order. The chunk partition
// depends only on n, never on the thread count, so the result is bitwise
// identical for any OMP_NUM_THREADS — the determinism contract the artifacts
// are tested against. chunked_sum_serial is the reference implementation the
// parallel kernel is compared with (bitwise) in tests and in fgi-bench.

inline constexpr std::int64_t kReductionChunk = 1024;

template <class Term>
double chunked_sum_serial(std::int64_t n, Term&& term) {
  const std::int64_t nchunks = (n + kReductionChunk - 1) / kReductionChunk;
  double total = 0.0;
  for (std::int64_t c = 0; c < nchunks; ++c) {
    const std::int64_t lo = c * kReductionChunk;
    const std::int64_t hi = lo + kReductionChunk < n ? lo + kReductionChunk : n;
    double partial = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) partial += term(i);
    total += partial;
  }
  return total;
}

template <class Term>
double chunked_sum(std::int64_t n, Term&& term) {
  const std::int64_t nchunks = (n + kReductionChunk - 1) / kReductionChunk;
  if (nchunks <= 1) return chunked_sum_serial(n, term);
  std::vector<double> partials(static_cast<std::size_t>(nchunks), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < nchunks; ++c) {
    const std::int64_t lo = c * kReductionChunk;
    const std::int64_t hi = lo + kReductionChunk < n ? lo + kReductionChunk : n;
    double partial = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) partial += term(i);
    partials[static_cast<std::size_t>(c)] = partial;
  }
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

// Max reductions are order-insensitive for IEEE doubles (no NaN inputs in
// our kernels), but we keep the same chunked structure for symmetry.
template <class Term>
double chunked_max_serial(std::int64_t n, Term&& term, double init) {
  double best = init;
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = term(i);
    if (v > best) best = v;
  }
  return best;
}

template <class Term>
double chunked_max(std::int64_t n, Term&& term, double init) {
  double best = init;
#pragma omp parallel
  {
    double local = init;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = term(i);
      if (v > local) local = v;
    }
#pragma omp critical
    {
      if (local > best) best = local;
    }
  }
  return best;
}

inline int current_max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_thread_count(int t) {
#ifdef _OPENMP
  if (t > 0) omp_set_num_threads(t);
#else
  (void)t;
#endif
}

}  // namespace fgi
