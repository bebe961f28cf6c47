// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pufent/pipeline.hpp"

using namespace pufent;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool rel_ok(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

void criterion1() {
  const auto n = count_pairings(25015, 25000);
  report(1, n == 625'350'105u, fmt("count_pairings(25015, 25000) = %llu", static_cast<unsigned long long>(n)));
}

void criterion2() {
  const double a = predict_threesigma(34, 189, 25.38, 16.83);
  const double b = predict_threesigma(36, 205, 25.38, 16.83);
  const double c = predict_threesigma(32, 180, 25.38, 16.83);
  const double m = predict_threesigma(16.5, 86.9, 25.38, 16.83);
  const bool ok = std::abs(a - 190) <= 1 && std::abs(b - 198) <= 1 && std::abs(c - 186) <= 1 && std::abs(m - 130.1) <= 1;
  report(2, ok, fmt("%.1f / %.1f / %.1f / %.1f ps", a, b, c, m));
}

void criterion3() {
  const double l = three_sigma(25.38), n = three_sigma(16.83);
  report(3, std::abs(l - 15.1) <= 0.05 && std::abs(n - 12.3) <= 0.05, fmt("%.3f / %.3f ps", l, n));
}

struct Recovery {
  double s2l = 0, s2n = 0;
  int rich_classes = 0;
  double seconds = 0;
};

Recovery recover(int paths_per_polarity, std::size_t nc) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.design.target_path_count = paths_per_polarity;
  cfg.nc = nc;
  const auto design = generate_design(cfg.design);
  const auto cds = compensate(simulate(design, cfg.truth, nc, cfg.seed, cfg.threads));
  const auto pairs = compute_pairs(cfg, design, cds);
  const auto means = subclass_means(pairs.index, pairs.stats);
  const auto est = estimate_variances(means);
  Recovery r;
  r.s2l = est.sigma2_lut;
  r.s2n = est.sigma2_node;
  // L classes holding at least two adjacent-N subclasses of >= 200 members
  std::map<int, std::set<int>> big;
  for (const auto& [key, members] : pairs.index.census) {
    if (members >= 200) big[key.first].insert(key.second);
  }
  for (const auto& [L, ns] : big) {
    for (int n : ns) {
      if (ns.count(n + 1)) {
        ++r.rich_classes;
        break;
      }
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void criterion4() {
  const GroundTruth t;
  const auto full = recover(3000, 500);
  const auto desk = recover(1000, 100);
  const bool full_ok = rel_ok(full.s2l, t.sigma2_lut, 0.10) && rel_ok(full.s2n, t.sigma2_node, 0.10);
  const bool desk_ok = rel_ok(desk.s2l, t.sigma2_lut, 0.20) && rel_ok(desk.s2n, t.sigma2_node, 0.20);
  const bool ok = full_ok && desk_ok && full.rich_classes >= 3 && full.seconds < 300;
  report(4, ok,
         fmt("full NC=500: lut %.2f node %.2f (%d rich L classes, %.1f s); desk NC=100: lut %.2f node %.2f", full.s2l,
             full.s2n, full.rich_classes, full.seconds, desk.s2l, desk.s2n));
}

void criterion5() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> delay(4000.0, 300.0);
  DelayDataset ds;
  ds.nc = 20;
  ds.np = 500;
  ds.units = Units::kPs;
  ds.pd.resize(ds.nc * ds.np);
  for (auto& v : ds.pd) v = delay(rng);
  const auto c = compensate(ds);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.nc; ++i) {
    std::vector<long double> row(c.row(i).begin(), c.row(i).end());
    worst = std::max(worst, std::abs(static_cast<double>(oracle::mean(row)) - c.reference.u_ref) / c.reference.u_ref);
    worst = std::max(worst, std::abs(static_cast<double>(std::sqrt(oracle::var(row))) - c.reference.sigma_ref) /
                                c.reference.sigma_ref);
  }
  CompensateOptions frozen;
  frozen.frozen_reference = c.reference;
  std::uniform_real_distribution<double> gain(0.5, 2.0), off(-500.0, 500.0);
  std::uniform_int_distribution<std::size_t> pick(0, ds.nc - 1);
  int affine_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = ds;
    const std::size_t i = pick(rng);
    const double a = gain(rng), b = off(rng);
    for (std::size_t j = 0; j < p.np; ++j) p.pd[i * p.np + j] = a * p.pd[i * p.np + j] + b;
    const auto cp = compensate(p, frozen);
    bool same = true;
    for (std::size_t j = 0; j < p.np; ++j) same &= std::abs(cp.at(i, j) - c.at(i, j)) <= 1e-9 * std::abs(c.at(i, j));
    affine_ok += same;
  }
  report(5, worst <= 1e-9 && affine_ok == 100,
         fmt("max relative deviation %.2e; affine trials passed %d/100", worst, affine_ok));
}

void criterion6() {
  int designs = 0, matched = 0;
  std::uint64_t admissible = 0, odd = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DesignParams p;
    p.n_inputs = 5;
    p.n_layers = 4;
    p.luts_per_layer = 6;
    p.n_outputs = 2;
    p.fanin = 2;
    p.fanout = 3;
    p.target_path_count = 80;
    p.bypass_prob = 0.3;
    p.seed = seed;
    const auto d = generate_design(p);
    if (d.paths.size() > 200) continue;
    ++designs;
    const auto idx = build_index(d);
    const auto ref = oracle::brute_census(d);
    bool same = idx.total_pairs == ref.total && idx.admissible_pairs == ref.admissible &&
                idx.one_extra_lut_pairs == ref.one_extra_lut && idx.subgroups.size() == ref.groups.size();
    for (const auto& [key, pairs] : ref.groups) {
      std::vector<PairKey> want;
      for (const auto& [j, k] : pairs) want.push_back({j, k});
      std::sort(want.begin(), want.end());
      const auto it = idx.subgroups.find(key);
      same &= it != idx.subgroups.end() && it->second == want;
    }
    for (const auto& [key, n] : idx.census) {
      admissible += n;
      if (key.first % 2) odd += n;
    }
    matched += same;
  }
  report(6, designs > 0 && matched == designs && odd == 0,
         fmt("%d/%d designs match the brute-force census; %llu admissible pairs, %llu with odd L", matched, designs,
             static_cast<unsigned long long>(admissible), static_cast<unsigned long long>(odd)));
}

void criterion7() {
  RunConfig cfg;
  cfg.design.target_path_count = 1000;
  cfg.truth.noise_sigma = 0.0;
  cfg.truth.heterogeneity = 0.0;
  const auto design = generate_design(cfg.design);
  const auto cds = compensate(simulate(design, cfg.truth, 2000, cfg.seed, cfg.threads));
  const auto pairs = compute_pairs(cfg, design, cds);
  const auto means = subclass_means(pairs.index, pairs.stats);
  double worst = 0.0;
  for (const auto& m : means) {
    const double model = m.L * cfg.truth.sigma2_lut + m.N * cfg.truth.sigma2_node;
    worst = std::max(worst, std::abs(m.u_var - model) / model);
  }
  report(7, !means.empty() && worst <= 0.10,
         fmt("%zu included subclasses, worst relative deviation from the additive model %.2f%%", means.size(),
             100 * worst));
}

void criterion8() {
  DesignParams p;
  const auto d = generate_design(p);
  const auto cds = compensate(simulate(d, GroundTruth{}, 100, 1));
  const auto pairs = sample_pairs(build_index(d), 1024, 1);
  const auto h = provision(cds, pairs);
  std::vector<Bitstring> strings;
  for (std::uint32_t i = 0; i < cds.nc; ++i) strings.push_back(generate_bits(cds, h, i));
  const auto q = quality_report(strings);
  double centering = 0.0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    double sum = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < cds.nc; ++i) {
      const double v = pdcd_fps(cds, i, pairs[r]);
      sum += v - h.offsets[r];
      scale += std::abs(v);
    }
    centering = std::max(centering, std::abs(sum / cds.nc) / std::max(1.0, scale / cds.nc));
  }
  const bool ok = pairs.size() == 1024 && q.mean_interchip_hd_pct >= 45 && q.mean_interchip_hd_pct <= 55 &&
                  q.bit_frequency_mean >= 0.45 && q.bit_frequency_mean <= 0.55 && centering <= 1e-9;
  report(8, ok,
         fmt("%zu bits x %zu instances: HD %.2f%%, bit frequency %.4f, centering %.1e", pairs.size(), cds.nc,
             q.mean_interchip_hd_pct, q.bit_frequency_mean, centering));
}

void criterion9() {
  namespace fs = std::filesystem;
  std::string reports[2];
  const unsigned threads[2] = {1, 4};
  for (int k = 0; k < 2; ++k) {
    RunConfig cfg;
    cfg.threads = threads[k];
    cfg.write_pair_files = false;
    cfg.out_dir = (fs::temp_directory_path() / ("pufent_acceptance_" + std::to_string(k))).string();
    fs::remove_all(cfg.out_dir);
    run_pipeline(cfg);
    std::ifstream in(fs::path(cfg.out_dir) / files::kReportJson, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    reports[k] = ss.str();
  }
  report(9, !reports[0].empty() && reports[0] == reports[1],
         fmt("report.json with 1 and 4 threads: %zu vs %zu bytes, %s", reports[0].size(), reports[1].size(),
             reports[0] == reports[1] ? "identical" : "different"));
}

}  // namespace

int main() {
  void (*const criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                criterion6, criterion7, criterion8, criterion9};
  for (int id = 1; id <= 9; ++id) {
    try {
      criteria[id - 1]();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
