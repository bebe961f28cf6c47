#pragma once

// Independent reference implementations used by the tests. They favour
// obviousness over speed: std::set algebra, long double accumulation.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pufent/fabric.hpp"

namespace oracle {

inline long double mean(const std::vector<long double>& xs) {
  long double s = 0;
  for (auto x : xs) s += x;
  return s / xs.size();
}

inline long double var(const std::vector<long double>& xs) {
  const long double m = mean(xs);
  long double s = 0;
  for (auto x : xs) s += (x - m) * (x - m);
  return s / (xs.size() - 1);
}

struct PairFacts {
  int L = 0;
  int N = 0;
  bool same_capture = false;
  bool equal_length = false;
};

inline std::set<std::string> lut_names(const pufent::PathRecord& p) {
  std::set<std::string> s{"launch:" + p.launch_ff.name};
  for (const auto& c : p.components) {
    if (c.kind == pufent::ComponentKind::kLut) s.insert("lut:" + c.name);
  }
  return s;
}

inline std::set<std::string> node_names(const pufent::PathRecord& p) {
  std::set<std::string> s;
  for (const auto& c : p.components) {
    if (c.kind == pufent::ComponentKind::kNode) s.insert(c.name);
  }
  return s;
}

inline int sym_diff(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::vector<std::string> out;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return static_cast<int>(out.size());
}

inline PairFacts facts(const pufent::PathRecord& a, const pufent::PathRecord& b) {
  PairFacts f;
  f.L = sym_diff(lut_names(a), lut_names(b));
  f.N = sym_diff(node_names(a), node_names(b));
  f.same_capture = a.capture_ff.name == b.capture_ff.name;
  f.equal_length = a.lut_count == b.lut_count;
  return f;
}

struct Census {
  std::map<std::pair<int, int>, std::vector<std::pair<std::uint32_t, std::uint32_t>>> groups;
  std::uint64_t total = 0;
  std::uint64_t admissible = 0;
  std::uint64_t one_extra_lut = 0;
};

/// Every same-polarity pair, classified from scratch.
inline Census brute_census(const pufent::FabricDesign& d) {
  Census c;
  for (std::size_t j = 0; j < d.paths.size(); ++j) {
    for (std::size_t k = j + 1; k < d.paths.size(); ++k) {
      const auto& a = d.paths[j];
      const auto& b = d.paths[k];
      if (a.polarity != b.polarity) continue;
      ++c.total;
      const auto f = facts(a, b);
      if (f.same_capture && std::abs(a.lut_count - b.lut_count) == 1 && f.L == 1) ++c.one_extra_lut;
      if (!(f.same_capture && f.equal_length && f.L >= 2)) continue;
      ++c.admissible;
      c.groups[{f.L, f.N}].push_back({a.path_id, b.path_id});
    }
  }
  return c;
}

}  // namespace oracle
