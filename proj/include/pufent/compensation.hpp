#pragma once

// Removal of chip-to-chip (global) variation: each instance's delays are
// standardized, then rescaled to the population's mean and spread.

#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pufent/detail/parallel.hpp"
#include "pufent/detail/stats.hpp"
#include "pufent/error.hpp"
#include "pufent/simulator.hpp"

namespace pufent {

struct InstanceStats {
  double u = 0.0;      // ps
  double sigma = 0.0;  // ps, n-1 denominator
};

struct ReferenceStats {
  double u_ref = 0.0;
  double sigma_ref = 0.0;
};

struct CompensatedDataset {
  std::size_t nc = 0;
  std::size_t np = 0;
  std::vector<double> pdc;  // ps, row-major [instance][path]
  std::vector<InstanceStats> instance_stats;
  ReferenceStats reference;
  std::optional<std::vector<double>> z;
  double delta_t = 18.0;

  double at(std::size_t i, std::size_t j) const { return pdc[i * np + j]; }
  std::span<const double> row(std::size_t i) const { return {pdc.data() + i * np, np}; }

  /// The compensated matrix as a picosecond DelayDataset.
  DelayDataset as_dataset() const {
    DelayDataset ds;
    ds.nc = nc;
    ds.np = np;
    ds.pd = pdc;
    ds.units = Units::kPs;
    ds.delta_t = delta_t;
    return ds;
  }
};

/// Per-instance mean and standard deviation over all paths.
inline std::vector<InstanceStats> instance_stats(const DelayDataset& ds, unsigned threads = 1) {
  if (ds.np < 2) throw Error(ErrorCode::kInvalidArgument, "instance statistics need np >= 2");
  const DelayDataset ps = ds.in_ps();
  std::vector<InstanceStats> out(ps.nc);
  detail::parallel_for(ps.nc, threads, [&](std::size_t i) {
    const auto mv = detail::mean_var(ps.row(i));
    out[i] = {mv.mean, std::sqrt(mv.var)};
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i].sigma > 0.0)) {
      throw Error(ErrorCode::kDegenerateInstance, "instance " + std::to_string(i) + " has zero spread");
    }
  }
  return out;
}

inline ReferenceStats reference_stats(std::span<const InstanceStats> stats) {
  ReferenceStats r;
  for (const auto& s : stats) {
    r.u_ref += s.u;
    r.sigma_ref += s.sigma;
  }
  r.u_ref /= static_cast<double>(stats.size());
  r.sigma_ref /= static_cast<double>(stats.size());
  return r;
}

struct CompensateOptions {
  std::optional<ReferenceStats> frozen_reference;  // provisioning use-case
  bool keep_z = false;
  unsigned threads = 1;
};

inline CompensatedDataset compensate(const DelayDataset& ds, const CompensateOptions& opt = {}) {
  if (ds.nc < 2 && !opt.frozen_reference) throw Error(ErrorCode::kInvalidArgument, "compensation needs nc >= 2");
  const DelayDataset ps = ds.in_ps();
  CompensatedDataset out;
  out.nc = ps.nc;
  out.np = ps.np;
  out.delta_t = ps.delta_t;
  out.instance_stats = instance_stats(ps, opt.threads);
  out.reference = opt.frozen_reference ? *opt.frozen_reference : reference_stats(out.instance_stats);
  if (!(out.reference.sigma_ref > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma_ref must be > 0");
  out.pdc.assign(ps.pd.size(), 0.0);
  if (opt.keep_z) out.z.emplace(ps.pd.size(), 0.0);
  detail::parallel_for(out.nc, opt.threads, [&](std::size_t i) {
    const auto [u, sigma] = out.instance_stats[i];
    for (std::size_t j = 0; j < out.np; ++j) {
      const double z = (ps.pd[i * out.np + j] - u) / sigma;
      out.pdc[i * out.np + j] = z * out.reference.sigma_ref + out.reference.u_ref;
      if (out.z) (*out.z)[i * out.np + j] = z;
    }
  });
  return out;
}

inline nlohmann::ordered_json compensation_to_json(const CompensatedDataset& c) {
  nlohmann::ordered_json j;
  j["u_ref"] = c.reference.u_ref;
  j["sigma_ref"] = c.reference.sigma_ref;
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < c.instance_stats.size(); ++i) {
    arr.push_back({{"instance", i}, {"u", c.instance_stats[i].u}, {"sigma", c.instance_stats[i].sigma}});
  }
  j["instances"] = std::move(arr);
  return j;
}

inline void write_compensation(const CompensatedDataset& c, const std::string& pdc_csv, const std::string& json_file) {
  std::ofstream out(pdc_csv, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + pdc_csv);
  write_matrix_csv(out, c.nc, c.np, c.pdc);
  std::ofstream js(json_file, std::ios::binary);
  if (!js) throw Error(ErrorCode::kIoError, "cannot open " + json_file);
  js << compensation_to_json(c).dump(2) << '\n';
}

}  // namespace pufent
