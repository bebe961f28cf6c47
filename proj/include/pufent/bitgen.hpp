#pragma once

// Bitstring generation from compensated pair differences: remove the
// provisioned per-pair offset, wrap into [0, modulus) centred on modulus/2,
// and threshold at modulus/2. Arithmetic is in fine-phase-shift (FPS) units.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pufent/compensation.hpp"
#include "pufent/error.hpp"
#include "pufent/pair_stats.hpp"

namespace pufent {

struct HelperData {
  std::vector<PairKey> pairs;
  std::vector<double> offsets;  // FPS, mean PDCD per pair
  double modulus = 20.0;        // FPS

  friend bool operator==(const HelperData&, const HelperData&) = default;
};

struct Bitstring {
  std::uint32_t instance_id = 0;
  std::vector<std::uint8_t> bits;

  std::size_t length() const { return bits.size(); }
  std::string str() const {
    std::string s(bits.size(), '0');
    for (std::size_t b = 0; b < bits.size(); ++b) s[b] = bits[b] ? '1' : '0';
    return s;
  }
};

/// PDCD of one instance in FPS.
inline double pdcd_fps(const CompensatedDataset& cds, std::size_t instance, PairKey p) {
  return (cds.at(instance, p.j) - cds.at(instance, p.k)) / cds.delta_t;
}

inline HelperData provision(const CompensatedDataset& cds, const std::vector<PairKey>& pairs,
                            double modulus = 20.0) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no pairs to provision");
  if (!(modulus > 0.0)) throw Error(ErrorCode::kInvalidArgument, "modulus must be > 0");
  HelperData h;
  h.pairs = pairs;
  h.modulus = modulus;
  h.offsets.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.j >= cds.np || p.k >= cds.np) throw Error(ErrorCode::kInvalidArgument, "pair outside dataset");
    double sum = 0.0;
    for (std::size_t i = 0; i < cds.nc; ++i) sum += pdcd_fps(cds, i, p);
    h.offsets.push_back(sum / static_cast<double>(cds.nc));
  }
  return h;
}

/// Position of an offset-removed difference on the modulus circle, in [0, modulus).
inline double modulus_position(double pdcdo, double modulus) {
  double v = std::fmod(pdcdo + modulus / 2.0, modulus);
  if (v < 0.0) v += modulus;
  if (v >= modulus) v -= modulus;
  return v;
}

/// '1' on the upper half, boundary included.
inline std::uint8_t bit_of(double pdcdo, double modulus) {
  return modulus_position(pdcdo, modulus) >= modulus / 2.0 ? 1 : 0;
}

inline Bitstring generate_bits(const CompensatedDataset& cds, const HelperData& helper, std::uint32_t instance_id) {
  if (instance_id >= cds.nc) {
    throw Error(ErrorCode::kInvalidArgument, "instance " + std::to_string(instance_id) + " not in dataset");
  }
  Bitstring b;
  b.instance_id = instance_id;
  b.bits.reserve(helper.pairs.size());
  for (std::size_t r = 0; r < helper.pairs.size(); ++r) {
    const double pdcdo = pdcd_fps(cds, instance_id, helper.pairs[r]) - helper.offsets[r];
    b.bits.push_back(bit_of(pdcdo, helper.modulus));
  }
  return b;
}

struct QualityReport {
  double mean_interchip_hd_pct = 0.0;
  double bit_frequency_mean = 0.0;
  std::vector<double> per_bit_aliasing;  // fraction of instances with '1' at each bit
};

inline QualityReport quality_report(const std::vector<Bitstring>& strings) {
  if (strings.size() < 2) throw Error(ErrorCode::kInvalidArgument, "quality metrics need >= 2 bitstrings");
  const std::size_t len = strings.front().length();
  for (const auto& s : strings) {
    if (s.length() != len) throw Error(ErrorCode::kLengthMismatch, "bitstrings differ in length");
  }
  if (len == 0) throw Error(ErrorCode::kInvalidArgument, "empty bitstrings");
  QualityReport q;
  q.per_bit_aliasing.assign(len, 0.0);
  std::vector<std::size_t> ones(len, 0);
  for (const auto& s : strings) {
    for (std::size_t b = 0; b < len; ++b) ones[b] += s.bits[b];
  }
  const double n = static_cast<double>(strings.size());
  // pairwise HD summed per bit position: ones * zeros
  double hd_sum = 0.0;
  double freq_sum = 0.0;
  for (std::size_t b = 0; b < len; ++b) {
    const double o = static_cast<double>(ones[b]);
    hd_sum += o * (n - o);
    q.per_bit_aliasing[b] = o / n;
    freq_sum += o / n;
  }
  const double n_pairs = n * (n - 1.0) / 2.0;
  q.mean_interchip_hd_pct = 100.0 * hd_sum / (n_pairs * static_cast<double>(len));
  q.bit_frequency_mean = freq_sum / static_cast<double>(len);
  return q;
}

inline nlohmann::ordered_json helper_to_json(const HelperData& h) {
  nlohmann::ordered_json j;
  j["modulus"] = h.modulus;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : h.pairs) pairs.push_back({p.j, p.k});
  j["pairs"] = std::move(pairs);
  j["offsets"] = h.offsets;
  return j;
}

inline HelperData helper_from_json(const nlohmann::json& j) {
  HelperData h;
  try {
    h.modulus = j.at("modulus").get<double>();
    for (const auto& p : j.at("pairs")) h.pairs.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    h.offsets = j.at("offsets").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("helper data: ") + e.what());
  }
  if (h.offsets.size() != h.pairs.size()) throw Error(ErrorCode::kDimensionMismatch, "offsets vs pairs");
  if (!(h.modulus > 0.0)) throw Error(ErrorCode::kParseError, "modulus must be > 0");
  return h;
}

inline void write_helper(const HelperData& h, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << helper_to_json(h).dump() << '\n';
}

inline HelperData read_helper(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file);
  try {
    return helper_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, file + ": " + e.what());
  }
}

inline nlohmann::ordered_json quality_to_json(const QualityReport& q) {
  nlohmann::ordered_json j;
  j["mean_interchip_hd_pct"] = q.mean_interchip_hd_pct;
  j["bit_frequency_mean"] = q.bit_frequency_mean;
  j["per_bit_aliasing"] = q.per_bit_aliasing;
  return j;
}

}  // namespace pufent
