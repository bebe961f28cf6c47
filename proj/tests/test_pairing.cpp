#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "pufent/compensation.hpp"
#include "pufent/pairing.hpp"

using namespace pufent;

namespace {

ComponentId node(const std::string& n) { return {ComponentKind::kNode, n}; }
ComponentId lut(const std::string& n) { return {ComponentKind::kLut, n}; }

PathRecord path(std::uint32_t id, Polarity pol, const std::string& launch, const std::string& capture,
                std::vector<ComponentId> comps) {
  PathRecord p;
  p.path_id = id;
  p.polarity = pol;
  p.launch_ff = {ComponentKind::kLaunchFf, launch};
  p.capture_ff = {ComponentKind::kCaptureFf, capture};
  p.components = std::move(comps);
  recount(p);
  return p;
}

// Shared launch and prefix, then two branches of 6 nodes and one LUT each,
// reconverging at a shared LUT.
std::pair<PathRecord, PathRecord> bubble() {
  std::vector<ComponentId> a{node("s0"), lut("S")}, b{node("s0"), lut("S")};
  for (int k = 0; k < 6; ++k) a.push_back(node("a" + std::to_string(k)));
  a.push_back(lut("A"));
  for (int k = 0; k < 6; ++k) b.push_back(node("b" + std::to_string(k)));
  b.push_back(lut("B"));
  for (auto* v : {&a, &b}) {
    v->push_back(node("m0"));
    v->push_back(lut("M"));
    v->push_back(node("out"));
  }
  return {path(0, Polarity::kRising, "FF0", "CAP", a), path(1, Polarity::kRising, "FF0", "CAP", b)};
}

DesignParams small_params(std::uint64_t seed, int target) {
  DesignParams p;
  p.n_inputs = 5;
  p.n_layers = 4;
  p.luts_per_layer = 6;
  p.n_outputs = 2;
  p.fanin = 2;
  p.fanout = 3;
  p.nodes_min = 1;
  p.nodes_max = 3;
  p.target_path_count = target;
  p.bypass_prob = 0.3;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(CountPairings, Examples) {
  EXPECT_EQ(count_pairings(25015, 25000), 625'350'105u);
  EXPECT_EQ(count_pairings(3, 2), 4u);
  EXPECT_EQ(count_pairings(0, 0), 0u);
  EXPECT_EQ(count_pairings(1, 1), 0u);
  static_assert(count_pairings(25015, 25000) == 625'350'105u);
}

TEST(CountPairings, NoOverflowNearLimit) {
  const std::uint64_t n = 1ull << 32;  // C(n,2) = 2^31 (2^32 - 1) < 2^63
  EXPECT_EQ(count_pairings(n, 0), (n / 2) * (n - 1));
  EXPECT_EQ(count_pairings(n + 1, 0), (n + 1) * (n / 2));
}

TEST(ClassifyPair, SelfPairIsInadmissible) {
  const auto [a, b] = bubble();
  const auto c = classify_pair(a, a);
  EXPECT_EQ(c.L, 0);
  EXPECT_EQ(c.N, 0);
  EXPECT_FALSE(c.admissible);
  EXPECT_EQ(c.tag, ConfigTag::kInadmissible);
}

TEST(ClassifyPair, BubbleExample) {
  const auto [a, b] = bubble();
  const auto c = classify_pair(a, b);
  EXPECT_EQ(c.L, 2);
  EXPECT_EQ(c.N, 12);
  EXPECT_TRUE(c.admissible);
  EXPECT_EQ(c.tag, ConfigTag::kBubble);
  EXPECT_EQ(c, classify_pair(b, a));
}

TEST(ClassifyPair, LaunchFfCountsAsLut) {
  const auto [a, b0] = bubble();
  auto b = a;
  b.path_id = 1;
  b.launch_ff.name = "FF1";
  const auto c = classify_pair(a, b);
  EXPECT_EQ(c.L, 2);
  EXPECT_EQ(c.N, 0);
}

TEST(ClassifyPair, OneExtraLutAndCaptureRules) {
  auto a = path(0, Polarity::kRising, "F", "C", {node("n0"), lut("A"), node("n1"), lut("B"), node("n2")});
  auto b = path(1, Polarity::kRising, "F", "C", {node("n0"), lut("A"), node("n1"), node("n2")});
  auto c = classify_pair(a, b);
  EXPECT_EQ(c.tag, ConfigTag::kOneExtraLut);
  EXPECT_FALSE(c.admissible);
  EXPECT_EQ(c.L, 1);

  auto d = a;
  d.path_id = 2;
  d.capture_ff.name = "C2";
  d.components[2] = node("x1");
  d.components[3] = lut("X");
  c = classify_pair(a, d);
  EXPECT_EQ(c.L, 2);
  EXPECT_FALSE(c.admissible) << "different capture FF";

  auto f = a;
  f.polarity = Polarity::kFalling;
  try {
    classify_pair(a, f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPolarityMismatch);
  }
}

TEST(ClassifyPair, RepeatedNodeNamesSetVersusMultiset) {
  auto a = path(0, Polarity::kRising, "F", "C", {node("n"), node("n"), lut("A"), node("o")});
  auto b = path(1, Polarity::kRising, "F", "C", {node("n"), lut("B"), node("o")});
  EXPECT_EQ(classify_pair(a, b).N, 0);
  EXPECT_EQ(classify_pair(a, b, true).N, 1);
}

TEST(BuildIndex, ToyDesignHandEnumerated) {
  FabricDesign d;
  const auto [a, b] = bubble();
  d.paths = {a, b};
  auto c = a;
  c.path_id = 2;
  c.polarity = Polarity::kFalling;
  auto e = b;
  e.path_id = 3;
  e.polarity = Polarity::kFalling;
  e.launch_ff.name = "FF9";
  d.paths.push_back(c);
  d.paths.push_back(e);
  finalize_design(d);
  const auto idx = build_index(d);
  EXPECT_EQ(idx.total_pairs, 2u);
  EXPECT_EQ(idx.admissible_pairs, 2u);
  ASSERT_EQ(idx.census.size(), 2u);
  EXPECT_EQ(idx.subgroups.at({2, 12}), (std::vector<PairKey>{{0, 1}}));
  EXPECT_EQ(idx.subgroups.at({4, 12}), (std::vector<PairKey>{{2, 3}}));
  EXPECT_EQ(idx.bubble_pairs, 1u);
}

TEST(BuildIndex, FilterKeepsOnlyRequestedL) {
  FabricDesign d;
  const auto [a, b] = bubble();
  // a third path that differs from both in several LUTs but no nodes from a
  auto c = a;
  c.path_id = 2;
  c.launch_ff.name = "FF3";
  c.components[1] = lut("T");
  c.components[10] = lut("Q");
  d.paths = {a, b, c};
  finalize_design(d);
  IndexOptions opt;
  opt.l_classes = {2};
  const auto idx = build_index(d, opt);
  ASSERT_EQ(idx.subgroups.size(), 1u);
  EXPECT_EQ(idx.subgroups.begin()->first.first, 2);
  EXPECT_EQ(idx.subgroups.begin()->second.size(), 1u);
  EXPECT_EQ(idx.admissible_pairs, 3u);
  EXPECT_EQ(idx.filtered_pairs, 2u);
}

TEST(BuildIndex, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = generate_design(small_params(seed, 60));
    ASSERT_LE(d.paths.size(), 200u);
    const auto idx = build_index(d);
    const auto ref = oracle::brute_census(d);
    EXPECT_EQ(idx.total_pairs, ref.total);
    EXPECT_EQ(idx.admissible_pairs, ref.admissible);
    EXPECT_EQ(idx.one_extra_lut_pairs, ref.one_extra_lut);
    EXPECT_EQ(idx.inadmissible_pairs + idx.admissible_pairs, count_pairings(d.npr, d.npf));
    ASSERT_EQ(idx.subgroups.size(), ref.groups.size()) << "seed " << seed;
    for (const auto& [key, pairs] : ref.groups) {
      ASSERT_TRUE(idx.subgroups.count(key));
      std::vector<PairKey> want;
      for (const auto& [j, k] : pairs) want.push_back({j, k});
      std::sort(want.begin(), want.end());
      EXPECT_EQ(idx.subgroups.at(key), want);
      EXPECT_EQ(idx.census.at(key), want.size());
      EXPECT_EQ(key.first % 2, 0) << "odd L in an admissible pair";
    }
  }
}

TEST(BuildIndex, DeterministicAndThreadIndependent) {
  const auto d = generate_design(small_params(3, 80));
  IndexOptions one, many;
  many.threads = 4;
  const auto a = build_index(d, one);
  const auto b = build_index(d, many);
  EXPECT_EQ(a.subgroups, b.subgroups);
  EXPECT_EQ(a.census, b.census);
}

TEST(BuildIndex, CapacityExceeded) {
  const auto d = generate_design(small_params(3, 80));
  IndexOptions opt;
  opt.capacity = 5;
  try {
    build_index(d, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapacityExceeded);
  }
}

TEST(Screening, MembershipAndOutlier) {
  PairingIndex idx;
  std::map<SubclassKey, std::vector<PairDiffStats>> stats;
  for (std::uint32_t r = 0; r < 150; ++r) idx.subgroups[{2, 3}].push_back({r, r + 1000});
  for (std::uint32_t r = 0; r < 250; ++r) idx.subgroups[{2, 4}].push_back({r, r + 2000});
  for (std::uint32_t r = 0; r < 250; ++r) idx.subgroups[{2, 5}].push_back({r, r + 3000});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> v(100.0, 6.0);
  for (const auto& [key, pairs] : idx.subgroups) {
    for (const auto& p : pairs) stats[key].push_back({p, 0.0, 10.0, v(rng)});
  }
  stats[{2, 5}][17].var = 1000.0;  // 10x the rest
  const auto out = screen_subclasses(idx, stats);
  EXPECT_EQ(out.screening.at({2, 3}).reason, "membership");
  EXPECT_FALSE(out.screening.at({2, 3}).included);
  EXPECT_TRUE(out.screening.at({2, 4}).included);
  EXPECT_EQ(out.screening.at({2, 5}).reason, "outlier");
}

// A clean subclass of 250 simulated pair variances passes the default rule
// in every trial. The literal mean + 3 sd rule rejects a large share.
TEST(Screening, CleanSubclassOf250IsIncluded) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  const int nc = 100, trials = 200;
  int kept_ratio = 0, kept_literal = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> vars;
    for (int m = 0; m < 250; ++m) {
      std::vector<long double> xs(nc);
      for (auto& x : xs) x = 20.0 * z(rng);
      vars.push_back(static_cast<double>(oracle::var(xs)));
    }
    kept_ratio += !has_outlier(vars, 3.0, OutlierRule::kSigmaRatio);
    kept_literal += !has_outlier(vars, 3.0, OutlierRule::kMeanPlusKSigma);
  }
  EXPECT_EQ(kept_ratio, trials);
  EXPECT_LT(kept_literal, trials * 0.9);
}

TEST(Screening, LeaveOneOutMatchesDirectComputation) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> v(50.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> vars(30);
    for (auto& x : vars) x = v(rng);
    bool direct = false;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      std::vector<long double> others;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        if (k != i) others.push_back(vars[k]);
      }
      direct |= vars[i] > oracle::mean(others) + 2.0 * std::sqrt(oracle::var(others));
    }
    EXPECT_EQ(has_outlier(vars, 2.0, OutlierRule::kMeanPlusKSigma), direct);
  }
}

TEST(PairsBin, RoundTripLittleEndian) {
  const std::vector<PairKey> pairs{{1, 2}, {0x01020304, 7}, {4000000000u, 4000000001u}};
  const auto file = (std::filesystem::temp_directory_path() / "pufent_pairs_test.bin").string();
  write_pairs_bin(pairs, file);
  EXPECT_EQ(read_pairs_bin(file), pairs);
  std::ifstream in(file, std::ios::binary);
  unsigned char first[8];
  in.read(reinterpret_cast<char*>(first), 8);
  EXPECT_EQ(first[0], 1);
  EXPECT_EQ(first[4], 2);
  std::filesystem::remove(file);
}

TEST(SamplePairs, SeededSubsetOfRetained) {
  const auto d = generate_design(small_params(5, 80));
  const auto idx = build_index(d);
  const auto s1 = sample_pairs(idx, 10, 1);
  EXPECT_EQ(s1, sample_pairs(idx, 10, 1));
  EXPECT_EQ(s1.size(), std::min<std::size_t>(10, idx.retained()));
  std::set<PairKey> all;
  for (const auto& [k, v] : idx.subgroups) all.insert(v.begin(), v.end());
  for (const auto& p : s1) EXPECT_TRUE(all.count(p));
  EXPECT_EQ(sample_pairs(idx, 1u << 30, 1).size(), idx.retained());
}
