#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pufent/compensation.hpp"
#include "pufent/detail/parallel.hpp"
#include "pufent/detail/stats.hpp"
#include "pufent/error.hpp"
#include "pufent/fabric.hpp"

namespace pufent {

struct PathVarianceRecord {
  std::uint32_t path_id = 0;
  double u = 0.0;            // ps, mean over instances
  double sigma = 0.0;        // ps
  double var = 0.0;          // ps^2
  double three_sigma = 0.0;  // ps
  int class_m = 0;           // LUTs + nodes
  int lut_count = 0;
  int node_count = 0;
};

struct ClassAggregate {
  int m = 0;
  std::size_t n_paths = 0;
  double mean_var = 0.0;    // ps^2
  double var_of_var = 0.0;  // ps^4, n-1 denominator
  double max_var = 0.0;     // largest member variance
  double mean_luts = 0.0;   // LUT-like components per path, launch FF included
  double mean_nodes = 0.0;
  bool included = false;
};

namespace detail {

inline void gather_column(const CompensatedDataset& cds, std::size_t j, std::vector<double>& col) {
  col.resize(cds.nc);
  for (std::size_t i = 0; i < cds.nc; ++i) col[i] = cds.pdc[i * cds.np + j];
}

}  // namespace detail

/// Cross-instance mean, deviation and variance of every compensated path.
inline std::vector<PathVarianceRecord> path_statistics(const CompensatedDataset& cds, const FabricDesign& design,
                                                       unsigned threads = 1) {
  if (cds.nc < 3) throw Error(ErrorCode::kInvalidArgument, "path statistics need nc >= 3");
  if (cds.np != design.paths.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset has " + std::to_string(cds.np) + " paths, design has " +
                                                   std::to_string(design.paths.size()));
  }
  std::vector<PathVarianceRecord> out(cds.np);
  detail::parallel_blocks(cds.np, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> col;
    for (std::size_t j = begin; j < end; ++j) {
      detail::gather_column(cds, j, col);
      const auto mv = detail::mean_var(col);
      const auto& p = design.paths[j];
      auto& r = out[j];
      r.path_id = static_cast<std::uint32_t>(j);
      r.u = mv.mean;
      r.var = mv.var;
      r.sigma = std::sqrt(mv.var);
      r.three_sigma = 3.0 * r.sigma;
      r.class_m = lut_node_class(p);
      r.lut_count = p.lut_count;
      r.node_count = p.node_count;
    }
  });
  return out;
}

/// Deviations K_ij = PDC_ij - u_j of one path, for histogramming.
inline std::vector<double> path_deviations(const CompensatedDataset& cds, std::size_t j) {
  std::vector<double> col;
  detail::gather_column(cds, j, col);
  const double u = detail::mean(col);
  for (auto& v : col) v -= u;
  return col;
}

/// Fixed-width histogram keyed by bin lower edge (multiples of bin_width).
inline std::map<long, std::size_t> histogram(const std::vector<double>& xs, double bin_width = 10.0) {
  std::map<long, std::size_t> bins;
  for (double x : xs) ++bins[static_cast<long>(std::floor(x / bin_width))];
  return bins;
}

/// Groups path variances by LUT-node class.
inline std::vector<ClassAggregate> class_aggregates(const std::vector<PathVarianceRecord>& records,
                                                    std::size_t class_min = 300) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no path records");
  std::map<int, std::vector<const PathVarianceRecord*>> groups;
  for (const auto& r : records) groups[r.class_m].push_back(&r);
  std::vector<ClassAggregate> out;
  out.reserve(groups.size());
  std::vector<double> vars;
  for (const auto& [m, members] : groups) {
    ClassAggregate a;
    a.m = m;
    a.n_paths = members.size();
    vars.clear();
    for (const auto* r : members) {
      vars.push_back(r->var);
      a.mean_luts += r->lut_count + 1;
      a.mean_nodes += r->node_count;
      a.max_var = std::max(a.max_var, r->var);
    }
    const auto mv = detail::mean_var(vars);
    a.mean_var = mv.mean;
    a.var_of_var = mv.var;
    a.mean_luts /= static_cast<double>(a.n_paths);
    a.mean_nodes /= static_cast<double>(a.n_paths);
    a.included = a.n_paths >= class_min;
    out.push_back(a);
  }
  return out;
}

/// Slope of the through-origin variance-per-component line.
struct VarianceLine {
  double slope = 0.0;
  double intercept = 0.0;
};

inline VarianceLine predicted_variance_line(double sigma2_lut, double sigma2_node, double lut_fraction) {
  if (lut_fraction < 0.0 || lut_fraction > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "lut_fraction must be in [0,1]");
  }
  return {lut_fraction * sigma2_lut + (1.0 - lut_fraction) * sigma2_node, 0.0};
}

inline void write_path_stats_csv(const std::vector<PathVarianceRecord>& records, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "path_id,m,u,sigma,var,three_sigma\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%u,%d,%.6f,%.6f,%.6f,%.6f\n", r.path_id, r.class_m, r.u, r.sigma, r.var,
                  r.three_sigma);
    out << buf;
  }
}

inline void write_class_agg_csv(const std::vector<ClassAggregate>& aggs, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "m,n_paths,mean_var,var_of_var,included\n";
  char buf[256];
  for (const auto& a : aggs) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.6f,%.6f,%d\n", a.m, a.n_paths, a.mean_var, a.var_of_var,
                  a.included ? 1 : 0);
    out << buf;
  }
}

inline void write_histogram_csv(const std::map<long, std::size_t>& bins, double bin_width, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "bin_lo_ps,count\n";
  for (const auto& [b, n] : bins) out << static_cast<double>(b) * bin_width << ',' << n << '\n';
}

}  // namespace pufent
