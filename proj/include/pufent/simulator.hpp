#pragma once

// Synthetic delay measurements with known ground truth.
//
// Every random draw is a pure function of (seed, instance, component name)
// or (seed, instance, path, sample), so instances can be realized in any
// order or in parallel and still reproduce the same dataset.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pufent/detail/parallel.hpp"
#include "pufent/detail/rng.hpp"
#include "pufent/error.hpp"
#include "pufent/fabric.hpp"

namespace pufent {

struct GroundTruth {
  double nominal_lut_delay = 130.0;    // ps
  double nominal_node_delay = 24.0;    // ps
  double nominal_ff_clk_to_q = 130.0;  // ps
  double sigma2_lut = 25.38;           // ps^2, also applied to launch FFs
  double sigma2_node = 16.83;          // ps^2
  double heterogeneity = 0.0;          // lognormal spread of per-component variances
  double chip_gain_sigma = 0.03;
  double chip_offset_sigma = 10.0;  // ps
  double noise_sigma = 9.0;         // ps, per strobe sample
  int samples_per_measurement = 16;
  double delta_t = 18.0;  // ps per fine phase shift

  void validate() const {
    if (sigma2_lut < 0 || sigma2_node < 0 || heterogeneity < 0 || chip_gain_sigma < 0 || chip_offset_sigma < 0 ||
        noise_sigma < 0) {
      throw Error(ErrorCode::kInvalidArgument, "ground truth sigmas must be >= 0");
    }
    if (!(delta_t > 0)) throw Error(ErrorCode::kInvalidArgument, "delta_t must be > 0");
    if (samples_per_measurement < 1) throw Error(ErrorCode::kInvalidArgument, "samples_per_measurement must be >= 1");
  }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline nlohmann::ordered_json to_json(const GroundTruth& t) {
  nlohmann::ordered_json j;
  j["nominal_lut_delay"] = t.nominal_lut_delay;
  j["nominal_node_delay"] = t.nominal_node_delay;
  j["nominal_ff_clk_to_q"] = t.nominal_ff_clk_to_q;
  j["sigma2_lut"] = t.sigma2_lut;
  j["sigma2_node"] = t.sigma2_node;
  j["heterogeneity"] = t.heterogeneity;
  j["chip_gain_sigma"] = t.chip_gain_sigma;
  j["chip_offset_sigma"] = t.chip_offset_sigma;
  j["noise_sigma"] = t.noise_sigma;
  j["samples_per_measurement"] = t.samples_per_measurement;
  j["delta_t"] = t.delta_t;
  return j;
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  try {
    t.nominal_lut_delay = j.value("nominal_lut_delay", t.nominal_lut_delay);
    t.nominal_node_delay = j.value("nominal_node_delay", t.nominal_node_delay);
    t.nominal_ff_clk_to_q = j.value("nominal_ff_clk_to_q", t.nominal_ff_clk_to_q);
    t.sigma2_lut = j.value("sigma2_lut", t.sigma2_lut);
    t.sigma2_node = j.value("sigma2_node", t.sigma2_node);
    t.heterogeneity = j.value("heterogeneity", t.heterogeneity);
    t.chip_gain_sigma = j.value("chip_gain_sigma", t.chip_gain_sigma);
    t.chip_offset_sigma = j.value("chip_offset_sigma", t.chip_offset_sigma);
    t.noise_sigma = j.value("noise_sigma", t.noise_sigma);
    t.samples_per_measurement = j.value("samples_per_measurement", t.samples_per_measurement);
    t.delta_t = j.value("delta_t", t.delta_t);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("truth.json: ") + e.what());
  }
  t.validate();
  return t;
}

enum class Units : std::uint8_t { kPs, kFps };

struct DelayDataset {
  std::size_t nc = 0;
  std::size_t np = 0;
  std::vector<double> pd;  // row-major [instance][path]
  Units units = Units::kFps;
  double delta_t = 18.0;
  std::optional<GroundTruth> truth;
  std::string design_ref;

  double at(std::size_t i, std::size_t j) const { return pd[i * np + j]; }
  std::span<const double> row(std::size_t i) const { return {pd.data() + i * np, np}; }

  /// Copy with values expressed in picoseconds.
  DelayDataset in_ps() const {
    DelayDataset out = *this;
    if (units == Units::kFps) {
      for (auto& v : out.pd) v *= delta_t;
      out.units = Units::kPs;
    }
    return out;
  }
};

inline double fps_to_ps(double fps, double delta_t) { return fps * delta_t; }

/// Hidden per-instance state.
struct InstanceRealization {
  std::uint32_t instance_id = 0;
  std::vector<double> delay;  // ps, indexed like FabricDesign::component_catalog
  double gain = 1.0;
  double offset = 0.0;  // ps
};

namespace detail {

enum : std::uint64_t { kTagHetero = 0x4E7E, kTagDelay = 0xDE1A, kTagGain = 0x6A1, kTagOffset = 0x0FF5, kTagNoise = 0x5A3 };

inline double nominal_of(const ComponentId& c, const GroundTruth& t) {
  switch (c.kind) {
    case ComponentKind::kLut: return t.nominal_lut_delay;
    case ComponentKind::kNode: return t.nominal_node_delay;
    case ComponentKind::kLaunchFf: return t.nominal_ff_clk_to_q;
    case ComponentKind::kCaptureFf: return 0.0;
  }
  return 0.0;
}

/// Injected variance for one component, including its heterogeneity factor.
inline double component_variance(const ComponentId& c, const GroundTruth& t, std::uint64_t seed) {
  double base = 0.0;
  switch (c.kind) {
    case ComponentKind::kLut:
    case ComponentKind::kLaunchFf: base = t.sigma2_lut; break;
    case ComponentKind::kNode: base = t.sigma2_node; break;
    case ComponentKind::kCaptureFf: return 0.0;
  }
  if (t.heterogeneity > 0.0) {
    // mean-one lognormal factor, fixed per component across instances
    const double z = normal_from_key(hash_keys(seed, kTagHetero, fnv1a(c.name)));
    base *= std::exp(t.heterogeneity * z - 0.5 * t.heterogeneity * t.heterogeneity);
  }
  return base;
}

}  // namespace detail

/// Realizes a single instance; components are keyed by name so a given
/// component draws the same value whatever catalog it appears in.
inline InstanceRealization realize_instance(const FabricDesign& design, const GroundTruth& truth,
                                            std::uint32_t instance_id, std::uint64_t seed) {
  using namespace detail;
  InstanceRealization r;
  r.instance_id = instance_id;
  r.delay.resize(design.component_catalog.size());
  for (std::size_t c = 0; c < design.component_catalog.size(); ++c) {
    const auto& comp = design.component_catalog[c];
    const double nominal = nominal_of(comp, truth);
    if (comp.kind == ComponentKind::kCaptureFf) {
      r.delay[c] = 0.0;  // folded into the final node run
      continue;
    }
    const double sigma = std::sqrt(component_variance(comp, truth, seed));
    const std::uint64_t name_key = fnv1a(comp.name);
    double d = 0.0;
    int attempt = 0;
    for (; attempt < 8; ++attempt) {
      d = nominal + sigma * normal_from_key(hash_keys(seed, kTagDelay, instance_id, name_key, attempt));
      if (d > 0.0) break;
    }
    if (!(d > 0.0)) {
      throw Error(ErrorCode::kNonpositiveDelay, comp.name + " in instance " + std::to_string(instance_id));
    }
    r.delay[c] = d;
  }
  r.gain = 1.0 + truth.chip_gain_sigma * normal_from_key(hash_keys(seed, kTagGain, instance_id));
  r.offset = truth.chip_offset_sigma * normal_from_key(hash_keys(seed, kTagOffset, instance_id));
  if (!(r.gain > 0.0)) throw Error(ErrorCode::kNonpositiveDelay, "instance gain <= 0");
  return r;
}

inline std::vector<InstanceRealization> realize_instances(const FabricDesign& design, const GroundTruth& truth,
                                                          std::size_t nc, std::uint64_t seed,
                                                          unsigned threads = 1) {
  truth.validate();
  if (nc < 2) throw Error(ErrorCode::kInvalidArgument, "nc must be >= 2");
  std::vector<InstanceRealization> out(nc);
  detail::parallel_for(nc, threads, [&](std::size_t i) {
    out[i] = realize_instance(design, truth, static_cast<std::uint32_t>(i), seed);
  });
  return out;
}

/// Catalog indices of the delay-bearing components of each path.
inline std::vector<std::vector<std::uint32_t>> path_layout(const FabricDesign& design) {
  std::vector<std::vector<std::uint32_t>> layout(design.paths.size());
  for (std::size_t j = 0; j < design.paths.size(); ++j) {
    const auto& p = design.paths[j];
    layout[j].push_back(static_cast<std::uint32_t>(design.index_of(p.launch_ff)));
    for (const auto& c : p.components) layout[j].push_back(static_cast<std::uint32_t>(design.index_of(c)));
  }
  return layout;
}

/// Sum of component delays along a path, before the chip transform.
inline double true_path_delay(const std::vector<std::uint32_t>& layout, const InstanceRealization& r) {
  double sum = 0.0;
  for (auto c : layout) sum += r.delay[c];
  return sum;
}

/// First passing strobe: ceil(delay / delta_t).
inline double digitize(double delay_ps, double delta_t) { return std::ceil(delay_ps / delta_t); }

namespace detail {

inline void measure_row(const std::vector<std::vector<std::uint32_t>>& layout, const InstanceRealization& r,
                        const GroundTruth& truth, std::uint64_t seed, std::span<double> out) {
  const int samples = truth.samples_per_measurement;
  for (std::size_t j = 0; j < layout.size(); ++j) {
    const double x = r.gain * true_path_delay(layout[j], r) + r.offset;
    double acc = 0.0;
    for (int s = 0; s < samples; ++s) {
      double noisy = x;
      if (truth.noise_sigma > 0.0) {
        noisy += truth.noise_sigma * normal_from_key(hash_keys(seed, kTagNoise, r.instance_id, j, s));
      }
      acc += digitize(noisy, truth.delta_t);
    }
    out[j] = acc / samples;
  }
}

}  // namespace detail

/// Clock-strobed measurement of every path on every realized instance (FPS units).
inline DelayDataset measure_dataset(const FabricDesign& design, const std::vector<InstanceRealization>& realizations,
                                    const GroundTruth& truth, std::uint64_t seed, unsigned threads = 1) {
  truth.validate();
  if (realizations.empty()) throw Error(ErrorCode::kInvalidArgument, "no realizations");
  DelayDataset ds;
  ds.nc = realizations.size();
  ds.np = design.paths.size();
  ds.pd.assign(ds.nc * ds.np, 0.0);
  ds.units = Units::kFps;
  ds.delta_t = truth.delta_t;
  ds.truth = truth;
  const auto layout = path_layout(design);
  detail::parallel_for(ds.nc, threads, [&](std::size_t i) {
    detail::measure_row(layout, realizations[i], truth, seed, {ds.pd.data() + i * ds.np, ds.np});
  });
  return ds;
}

/// realize_instances + measure_dataset without holding every realization.
inline DelayDataset simulate(const FabricDesign& design, const GroundTruth& truth, std::size_t nc,
                             std::uint64_t seed, unsigned threads = 1) {
  truth.validate();
  if (nc < 2) throw Error(ErrorCode::kInvalidArgument, "nc must be >= 2");
  const std::uint64_t realize_seed = detail::hash_keys(seed, 1);
  const std::uint64_t measure_seed = detail::hash_keys(seed, 2);
  DelayDataset ds;
  ds.nc = nc;
  ds.np = design.paths.size();
  ds.pd.assign(nc * ds.np, 0.0);
  ds.units = Units::kFps;
  ds.delta_t = truth.delta_t;
  ds.truth = truth;
  const auto layout = path_layout(design);
  detail::parallel_for(nc, threads, [&](std::size_t i) {
    const auto r = realize_instance(design, truth, static_cast<std::uint32_t>(i), realize_seed);
    detail::measure_row(layout, r, truth, measure_seed, {ds.pd.data() + i * ds.np, ds.np});
  });
  return ds;
}

// ---------------------------------------------------------------------------
// CSV: header `path_id,inst_0,...`, one row per path, 4 decimals.

namespace detail {

inline void append_fixed4(std::string& out, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.4f", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace detail

/// Writes a [nc][np] matrix transposed into the path-per-row CSV layout.
inline void write_matrix_csv(std::ostream& out, std::size_t nc, std::size_t np, std::span<const double> values) {
  std::string line = "path_id";
  for (std::size_t i = 0; i < nc; ++i) line += ",inst_" + std::to_string(i);
  out << line << '\n';
  for (std::size_t j = 0; j < np; ++j) {
    line = std::to_string(j);
    for (std::size_t i = 0; i < nc; ++i) {
      line += ',';
      detail::append_fixed4(line, values[i * np + j]);
    }
    out << line << '\n';
  }
}

inline void write_dataset(const DelayDataset& ds, std::ostream& out) { write_matrix_csv(out, ds.nc, ds.np, ds.pd); }

inline void write_dataset(const DelayDataset& ds, const std::string& csv_file,
                          const std::string& truth_file = {}) {
  std::ofstream out(csv_file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + csv_file);
  write_dataset(ds, out);
  if (ds.truth && !truth_file.empty()) {
    std::ofstream t(truth_file, std::ios::binary);
    if (!t) throw Error(ErrorCode::kIoError, "cannot open " + truth_file);
    t << to_json(*ds.truth).dump(2) << '\n';
  }
}

inline DelayDataset read_dataset(std::istream& in, Units units = Units::kFps, double delta_t = 18.0) {
  auto split = [](const std::string& s) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = s.find(',', start);
      fields.emplace_back(s.data() + start, (comma == std::string::npos ? s.size() : comma) - start);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return fields;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "line 1: empty dataset");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "path_id") {
    throw Error(ErrorCode::kParseError, "line 1: header must start with path_id and name >= 1 instance");
  }
  DelayDataset ds;
  ds.nc = header.size() - 1;
  ds.units = units;
  ds.delta_t = delta_t;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "line " + std::to_string(lineno) + ": expected " +
                                                     std::to_string(header.size()) + " fields, got " +
                                                     std::to_string(fields.size()));
    }
    std::size_t id = 0;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || id != rows.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": path_id must be " +
                                              std::to_string(rows.size()));
    }
    std::vector<double> row(ds.nc);
    for (std::size_t i = 0; i < ds.nc; ++i) {
      const auto f = fields[i + 1];
      auto [q, ec2] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      if (ec2 != std::errc() || q != f.data() + f.size() || !std::isfinite(row[i]) || row[i] <= 0.0) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(lineno) + ": bad delay value '" + std::string(f) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  ds.np = rows.size();
  ds.pd.assign(ds.nc * ds.np, 0.0);
  for (std::size_t j = 0; j < ds.np; ++j) {
    for (std::size_t i = 0; i < ds.nc; ++i) ds.pd[i * ds.np + j] = rows[j][i];
  }
  return ds;
}

/// Reads a dataset CSV; the optional truth sidecar supplies delta_t.
inline DelayDataset read_dataset(const std::string& csv_file, const std::string& truth_file = {},
                                 Units units = Units::kFps) {
  std::optional<GroundTruth> truth;
  if (!truth_file.empty()) {
    std::ifstream t(truth_file, std::ios::binary);
    if (!t) throw Error(ErrorCode::kIoError, "cannot open " + truth_file);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, truth_file + ": " + e.what());
    }
    truth = truth_from_json(j);
  }
  std::ifstream in(csv_file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + csv_file);
  DelayDataset ds = read_dataset(in, units, truth ? truth->delta_t : 18.0);
  ds.truth = truth;
  return ds;
}

/// FNV-1a digest of the serialized design, hex encoded.
inline std::string design_digest(const FabricDesign& design) {
  std::ostringstream ss;
  write_design(design, ss);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(ss.str())));
  return buf;
}

}  // namespace pufent
