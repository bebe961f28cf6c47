#pragma once

// Same-polarity path pairing. A pair is characterized by L, the number of
// LUTs (launch FFs included) present in exactly one of the two paths, and
// N, the same count for nodes. Only equal-length pairs that share their
// capture FF feed the estimator.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pufent/detail/parallel.hpp"
#include "pufent/detail/rng.hpp"
#include "pufent/error.hpp"
#include "pufent/fabric.hpp"
#include "pufent/pair_stats.hpp"

namespace pufent {

/// Number of same-polarity pairs: C(npr,2) + C(npf,2).
constexpr std::uint64_t count_pairings(std::uint64_t npr, std::uint64_t npf) {
  auto choose2 = [](std::uint64_t n) -> std::uint64_t {
    if (n < 2) return 0;
    return (n % 2 == 0) ? (n / 2) * (n - 1) : n * ((n - 1) / 2);
  };
  return choose2(npr) + choose2(npf);
}

enum class ConfigTag : std::uint8_t { kOneExtraLut, kBubble, kLLutMismatch, kInadmissible };

constexpr std::string_view to_string(ConfigTag t) {
  switch (t) {
    case ConfigTag::kOneExtraLut: return "ONE_EXTRA_LUT";
    case ConfigTag::kBubble: return "BUBBLE";
    case ConfigTag::kLLutMismatch: return "L_LUT_MISMATCH";
    case ConfigTag::kInadmissible: return "INADMISSIBLE";
  }
  return "?";
}

struct PairClassification {
  PairKey key;
  int L = 0;
  int N = 0;
  bool admissible = false;
  ConfigTag tag = ConfigTag::kInadmissible;

  friend bool operator==(const PairClassification&, const PairClassification&) = default;
};

namespace detail {

/// |A Δ B| for sorted ranges (multiset semantics if duplicates are present).
template <typename T>
int sym_diff_count(const std::vector<T>& a, const std::vector<T>& b) {
  std::size_t i = 0, k = 0;
  int common = 0;
  while (i < a.size() && k < b.size()) {
    if (a[i] < b[k]) {
      ++i;
    } else if (b[k] < a[i]) {
      ++k;
    } else {
      ++common;
      ++i;
      ++k;
    }
  }
  return static_cast<int>(a.size() + b.size()) - 2 * common;
}

inline PairClassification classify_counts(PairKey key, int L, int N, bool same_capture, int lut_a, int lut_b) {
  PairClassification c{key, L, N, false, ConfigTag::kInadmissible};
  if (same_capture && lut_a == lut_b && L >= 2) {
    c.admissible = true;
    c.tag = L == 2 ? ConfigTag::kBubble : ConfigTag::kLLutMismatch;
  } else if (same_capture && std::abs(lut_a - lut_b) == 1 && L == 1) {
    c.tag = ConfigTag::kOneExtraLut;
  }
  return c;
}

/// Interned, sorted component sets of one path.
struct PathSignature {
  std::vector<std::uint32_t> luts;   // LUTs plus the launch FF
  std::vector<std::uint32_t> nodes;  // deduplicated unless multiset
  std::uint32_t capture = 0;
  int lut_count = 0;
  Polarity polarity = Polarity::kRising;
};

inline std::vector<PathSignature> signatures(const FabricDesign& design, bool multiset_nodes) {
  std::unordered_map<std::string, std::uint32_t> ids;
  auto intern = [&](const ComponentId& c) {
    // kinds live in disjoint name spaces
    const std::string key = std::string(1, static_cast<char>('0' + static_cast<int>(c.kind))) + c.name;
    return ids.emplace(key, static_cast<std::uint32_t>(ids.size())).first->second;
  };
  std::vector<PathSignature> sigs(design.paths.size());
  for (std::size_t j = 0; j < design.paths.size(); ++j) {
    const auto& p = design.paths[j];
    auto& s = sigs[j];
    s.polarity = p.polarity;
    s.lut_count = p.lut_count;
    s.capture = intern(p.capture_ff);
    s.luts.push_back(intern(p.launch_ff));
    for (const auto& c : p.components) {
      (c.kind == ComponentKind::kNode ? s.nodes : s.luts).push_back(intern(c));
    }
    std::sort(s.luts.begin(), s.luts.end());
    s.luts.erase(std::unique(s.luts.begin(), s.luts.end()), s.luts.end());
    std::sort(s.nodes.begin(), s.nodes.end());
    if (!multiset_nodes) s.nodes.erase(std::unique(s.nodes.begin(), s.nodes.end()), s.nodes.end());
  }
  return sigs;
}

inline PairClassification classify(const PathSignature& a, const PathSignature& b, PairKey key) {
  return classify_counts(key, sym_diff_count(a.luts, b.luts), sym_diff_count(a.nodes, b.nodes),
                         a.capture == b.capture, a.lut_count, b.lut_count);
}

}  // namespace detail

/// Classifies one pair by component name.
inline PairClassification classify_pair(const PathRecord& a, const PathRecord& b, bool multiset_nodes = false) {
  if (a.polarity != b.polarity) {
    throw Error(ErrorCode::kPolarityMismatch,
                "paths " + std::to_string(a.path_id) + " and " + std::to_string(b.path_id));
  }
  auto lut_set = [](const PathRecord& p) {
    std::vector<std::string> v{p.launch_ff.name};
    for (const auto& c : p.components) {
      if (c.kind == ComponentKind::kLut) v.push_back(c.name);
    }
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  auto node_set = [multiset_nodes](const PathRecord& p) {
    std::vector<std::string> v;
    for (const auto& c : p.components) {
      if (c.kind == ComponentKind::kNode) v.push_back(c.name);
    }
    std::sort(v.begin(), v.end());
    if (!multiset_nodes) v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const PairKey key{std::min(a.path_id, b.path_id), std::max(a.path_id, b.path_id)};
  return detail::classify_counts(key, detail::sym_diff_count(lut_set(a), lut_set(b)),
                                 detail::sym_diff_count(node_set(a), node_set(b)), a.capture_ff == b.capture_ff,
                                 a.lut_count, b.lut_count);
}

using SubclassKey = std::pair<int, int>;  // (L, N)

struct Screening {
  bool included = false;
  std::string reason;  // "ok", "membership", "outlier"
};

struct PairingIndex {
  std::map<SubclassKey, std::vector<PairKey>> subgroups;
  std::map<SubclassKey, std::size_t> census;
  std::map<SubclassKey, Screening> screening;
  std::uint64_t total_pairs = 0;       // all same-polarity pairs
  std::uint64_t admissible_pairs = 0;  // before the L filter
  std::uint64_t filtered_pairs = 0;    // admissible but L outside the filter
  std::uint64_t inadmissible_pairs = 0;
  std::uint64_t one_extra_lut_pairs = 0;
  std::uint64_t bubble_pairs = 0;

  std::size_t retained() const {
    std::size_t n = 0;
    for (const auto& [k, v] : subgroups) n += v.size();
    return n;
  }
};

struct IndexOptions {
  std::set<int> l_classes;  // empty keeps every L
  std::size_t min_members = 200;
  std::size_t capacity = 50'000'000;
  bool multiset_nodes = false;
  unsigned threads = 1;
};

/// Streams every same-polarity pair. Pairs with different capture FFs are
/// inadmissible without inspection, so only same-capture groups are scanned.
inline PairingIndex build_index(const FabricDesign& design, const IndexOptions& opt = {}) {
  const auto sigs = detail::signatures(design, opt.multiset_nodes);
  std::map<std::pair<Polarity, std::uint32_t>, std::vector<std::uint32_t>> groups;
  for (std::uint32_t j = 0; j < sigs.size(); ++j) groups[{sigs[j].polarity, sigs[j].capture}].push_back(j);

  struct Row {
    const std::vector<std::uint32_t>* members;
    std::size_t a;
  };
  std::vector<Row> rows;
  for (const auto& [key, members] : groups) {
    for (std::size_t a = 0; a + 1 < members.size(); ++a) rows.push_back({&members, a});
  }

  struct Partial {
    std::vector<PairClassification> kept;
    std::uint64_t admissible = 0;
    std::uint64_t one_extra = 0;
    std::uint64_t bubble = 0;
  };
  std::vector<Partial> partial(rows.size());
  detail::parallel_for(rows.size(), opt.threads, [&](std::size_t r) {
    const auto& m = *rows[r].members;
    const std::uint32_t j = m[rows[r].a];
    auto& out = partial[r];
    for (std::size_t b = rows[r].a + 1; b < m.size(); ++b) {
      const std::uint32_t k = m[b];
      const auto c = detail::classify(sigs[j], sigs[k], {std::min(j, k), std::max(j, k)});
      if (c.tag == ConfigTag::kOneExtraLut) ++out.one_extra;
      if (!c.admissible) continue;
      ++out.admissible;
      if (c.tag == ConfigTag::kBubble) ++out.bubble;
      if (opt.l_classes.empty() || opt.l_classes.count(c.L)) out.kept.push_back(c);
    }
  });

  PairingIndex index;
  index.total_pairs = count_pairings(design.npr, design.npf);
  std::size_t retained = 0;
  for (const auto& p : partial) {
    index.admissible_pairs += p.admissible;
    index.one_extra_lut_pairs += p.one_extra;
    index.bubble_pairs += p.bubble;
    retained += p.kept.size();
    if (retained > opt.capacity) {
      throw Error(ErrorCode::kCapacityExceeded,
                  "more than " + std::to_string(opt.capacity) + " retained pairs; narrow the L filter");
    }
  }
  for (auto& p : partial) {
    for (const auto& c : p.kept) index.subgroups[{c.L, c.N}].push_back(c.key);
    p.kept.clear();
    p.kept.shrink_to_fit();
  }
  index.inadmissible_pairs = index.total_pairs - index.admissible_pairs;
  index.filtered_pairs = index.admissible_pairs - retained;
  for (auto& [key, pairs] : index.subgroups) {
    std::sort(pairs.begin(), pairs.end());
    index.census[key] = pairs.size();
    const bool big = pairs.size() >= opt.min_members;
    index.screening[key] = {big, big ? "ok" : "membership"};
  }
  return index;
}

// ---------------------------------------------------------------------------
// Subclass screening.

enum class OutlierRule : std::uint8_t {
  kSigmaRatio,      // member sigma > k * RMS sigma of the other members
  kMeanPlusKSigma,  // member variance > mean + k * sd of the other members' variances
};

struct ScreenOptions {
  std::size_t min_members = 200;
  double outlier_k = 3.0;
  OutlierRule rule = OutlierRule::kSigmaRatio;
};

/// Leave-one-out outlier test over the variances of one subclass.
inline bool has_outlier(const std::vector<double>& vars, double k, OutlierRule rule) {
  const std::size_t n = vars.size();
  if (n < 3) return false;
  double shift = vars[0];
  double s = 0.0, q = 0.0;
  for (double v : vars) {
    s += v - shift;
    q += (v - shift) * (v - shift);
  }
  for (double v : vars) {
    const double d = v - shift;
    const double m = static_cast<double>(n - 1);
    const double mean_o = (s - d) / m;  // shifted
    if (rule == OutlierRule::kSigmaRatio) {
      if (v > k * k * (mean_o + shift)) return true;
    } else {
      const double var_o = std::max(0.0, (q - d * d - m * mean_o * mean_o) / (m - 1.0));
      if (d > mean_o + k * std::sqrt(var_o)) return true;
    }
  }
  return false;
}

/// Marks subclasses excluded for low membership or for an outlying member.
inline PairingIndex screen_subclasses(const PairingIndex& index,
                                      const std::map<SubclassKey, std::vector<PairDiffStats>>& stats,
                                      const ScreenOptions& opt = {}) {
  PairingIndex out = index;
  std::vector<double> vars;
  for (const auto& [key, pairs] : index.subgroups) {
    auto& scr = out.screening[key];
    if (pairs.size() < opt.min_members) {
      scr = {false, "membership"};
      continue;
    }
    const auto it = stats.find(key);
    if (it == stats.end()) throw Error(ErrorCode::kInvalidArgument, "missing pair statistics for subclass");
    vars.clear();
    for (const auto& s : it->second) vars.push_back(s.var);
    scr = has_outlier(vars, opt.outlier_k, opt.rule) ? Screening{false, "outlier"} : Screening{true, "ok"};
  }
  return out;
}

/// Pair statistics for every retained subgroup.
inline std::map<SubclassKey, std::vector<PairDiffStats>> subgroup_statistics(const CompensatedDataset& cds,
                                                                            const PairingIndex& index,
                                                                            unsigned threads = 1) {
  const ColumnMatrix cols(cds);
  std::map<SubclassKey, std::vector<PairDiffStats>> out;
  for (const auto& [key, pairs] : index.subgroups) out[key] = pair_statistics(cols, pairs, threads);
  return out;
}

inline PairingIndex screen_subclasses(const PairingIndex& index, const CompensatedDataset& cds,
                                      const ScreenOptions& opt = {}, unsigned threads = 1) {
  return screen_subclasses(index, subgroup_statistics(cds, index, threads), opt);
}

/// Seeded sample of retained pairs (all of them if fewer than count).
inline std::vector<PairKey> sample_pairs(const PairingIndex& index, std::size_t count, std::uint64_t seed) {
  std::vector<PairKey> all;
  for (const auto& [key, pairs] : index.subgroups) all.insert(all.end(), pairs.begin(), pairs.end());
  std::sort(all.begin(), all.end());
  if (all.size() <= count) return all;
  detail::Stream rng(detail::hash_keys(seed, 0x5A4D1Eull));
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[rng.uniform(i, all.size() - 1)]);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

inline void write_census_csv(const PairingIndex& index, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "L,N,members,included,reason\n";
  for (const auto& [key, n] : index.census) {
    const auto& s = index.screening.at(key);
    out << key.first << ',' << key.second << ',' << n << ',' << (s.included ? 1 : 0) << ',' << s.reason << '\n';
  }
}

/// Packed little-endian (j,k) u32 pairs.
inline void write_pairs_bin(const std::vector<PairKey>& pairs, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  auto put = [&](std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes, 4);
  };
  for (const auto& p : pairs) {
    put(p.j);
    put(p.k);
  }
}

inline std::vector<PairKey> read_pairs_bin(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() % 8 != 0) throw Error(ErrorCode::kParseError, file + ": size is not a multiple of 8");
  auto get = [&](std::size_t o) {
    return static_cast<std::uint32_t>(buf[o]) | (static_cast<std::uint32_t>(buf[o + 1]) << 8) |
           (static_cast<std::uint32_t>(buf[o + 2]) << 16) | (static_cast<std::uint32_t>(buf[o + 3]) << 24);
  };
  std::vector<PairKey> pairs(buf.size() / 8);
  for (std::size_t r = 0; r < pairs.size(); ++r) pairs[r] = {get(8 * r), get(8 * r + 4)};
  return pairs;
}

}  // namespace pufent
