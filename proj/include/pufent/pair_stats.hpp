#pragma once

// Statistics of compensated path-pair differences PDCD_i = PDC_ij - PDC_ik.

#include <cmath>
#include <cstdint>
#include <vector>

#include "pufent/compensation.hpp"
#include "pufent/detail/parallel.hpp"
#include "pufent/error.hpp"

namespace pufent {

struct PairKey {
  std::uint32_t j = 0;
  std::uint32_t k = 0;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

struct PairDiffStats {
  PairKey key;
  double u = 0.0;      // ps
  double sigma = 0.0;  // ps
  double var = 0.0;    // ps^2
};

namespace detail {

inline PairDiffStats diff_stats(PairKey key, const double* a, const double* b, std::size_t nc, std::size_t stride) {
  double sum = 0.0;
  for (std::size_t i = 0; i < nc; ++i) sum += a[i * stride] - b[i * stride];
  const double u = sum / static_cast<double>(nc);
  double ss = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    const double d = a[i * stride] - b[i * stride] - u;
    ss += d * d;
    comp += d;
  }
  PairDiffStats s;
  s.key = key;
  s.u = u;
  s.var = nc > 1 ? std::max(0.0, (ss - comp * comp / static_cast<double>(nc)) / static_cast<double>(nc - 1)) : 0.0;
  s.sigma = std::sqrt(s.var);
  return s;
}

}  // namespace detail

/// Path-major copy of the compensated matrix so a pair reads two
/// contiguous columns.
struct ColumnMatrix {
  std::size_t nc = 0;
  std::size_t np = 0;
  std::vector<double> data;  // [path][instance]

  explicit ColumnMatrix(const CompensatedDataset& cds) : nc(cds.nc), np(cds.np), data(cds.pdc.size()) {
    for (std::size_t i = 0; i < nc; ++i) {
      for (std::size_t j = 0; j < np; ++j) data[j * nc + i] = cds.pdc[i * np + j];
    }
  }

  const double* column(std::size_t j) const { return data.data() + j * nc; }
};

/// Mean/variance of PDC_j - PDC_k across instances (two passes, no storage).
inline PairDiffStats pair_diff_stats(const CompensatedDataset& cds, PairKey key) {
  return detail::diff_stats(key, cds.pdc.data() + key.j, cds.pdc.data() + key.k, cds.nc, cds.np);
}

inline PairDiffStats pair_diff_stats(const ColumnMatrix& cols, PairKey key) {
  return detail::diff_stats(key, cols.column(key.j), cols.column(key.k), cols.nc, 1);
}

inline std::vector<PairDiffStats> pair_statistics(const ColumnMatrix& cols, const std::vector<PairKey>& pairs,
                                                  unsigned threads = 1) {
  for (const auto& p : pairs) {
    if (p.j >= cols.np || p.k >= cols.np) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pair (" + std::to_string(p.j) + "," + std::to_string(p.k) + ") outside dataset");
    }
  }
  std::vector<PairDiffStats> out(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t r) { out[r] = pair_diff_stats(cols, pairs[r]); });
  return out;
}

inline std::vector<PairDiffStats> pair_statistics(const CompensatedDataset& cds, const std::vector<PairKey>& pairs,
                                                  unsigned threads = 1) {
  return pair_statistics(ColumnMatrix(cds), pairs, threads);
}

}  // namespace pufent
