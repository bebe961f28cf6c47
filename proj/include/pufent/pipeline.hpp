#pragma once

// File-level pipeline steps shared by the CLI subcommands. Every step reads
// its inputs from and writes its outputs to one run directory.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pufent/bitgen.hpp"
#include "pufent/compensation.hpp"
#include "pufent/decomposition.hpp"
#include "pufent/error.hpp"
#include "pufent/fabric.hpp"
#include "pufent/pair_stats.hpp"
#include "pufent/pairing.hpp"
#include "pufent/pathstats.hpp"
#include "pufent/simulator.hpp"

namespace pufent {

// Published values the report compares against.
inline constexpr double kReferenceSigma2Lut = 25.38;
inline constexpr double kReferenceSigma2Node = 16.83;
inline constexpr double kReferenceThreeSigmaLut = 15.1;
inline constexpr double kReferenceThreeSigmaNode = 12.3;
inline constexpr double kReferenceMeanPathLuts = 16.5;
inline constexpr double kReferenceMeanPathNodes = 86.9;

struct RunConfig {
  DesignParams design;
  GroundTruth truth;
  std::size_t nc = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = "out";
  Units units = Units::kFps;
  double delta_t = 18.0;  // used when no truth.json accompanies a dataset

  // explicit inputs; empty means the run directory's file
  std::string design_file;
  std::string dataset_file;
  std::string pdc_file;

  std::size_t class_min = 300;
  double hist_bin = 10.0;
  std::set<int> l_classes;
  std::size_t capacity = 50'000'000;
  bool multiset_nodes = false;
  ScreenOptions screen;
  ClassWeighting weighting = ClassWeighting::kUnweighted;
  bool write_pair_files = true;

  std::size_t bit_pairs = 2048;
  double modulus = 20.0;
};

namespace files {
inline constexpr const char* kDesign = "design.paths.jsonl";
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kTruth = "truth.json";
inline constexpr const char* kPdc = "pdc.csv";
inline constexpr const char* kCompensation = "compensation.json";
inline constexpr const char* kPathStats = "path_stats.csv";
inline constexpr const char* kClassAgg = "class_agg.csv";
inline constexpr const char* kHistograms = "histograms.csv";
inline constexpr const char* kCensus = "pair_census.csv";
inline constexpr const char* kPairsDir = "pairs";
inline constexpr const char* kEstimates = "estimates.json";
inline constexpr const char* kSubclassMeans = "subclass_means.csv";
inline constexpr const char* kNodeAnalysis = "node_analysis.csv";
inline constexpr const char* kHelper = "helper.json";
inline constexpr const char* kBitsDir = "bits";
inline constexpr const char* kQuality = "quality.json";
inline constexpr const char* kReportMd = "report.md";
inline constexpr const char* kReportJson = "report.json";
}  // namespace files

namespace detail {

inline std::string in_dir(const RunConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
}

inline nlohmann::json read_json(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, file + ": " + e.what());
  }
}

inline void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << text;
}

/// Fixed-precision rendering so reports do not depend on the JSON library's
/// shortest round-trip formatting.
inline double round_to(double v, int digits) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return std::strtod(buf, nullptr);
}

inline std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inputs.

inline FabricDesign load_design(const RunConfig& cfg) {
  return parse_design(cfg.design_file.empty() ? detail::in_dir(cfg, files::kDesign) : cfg.design_file);
}

inline DelayDataset load_dataset(const RunConfig& cfg) {
  const std::string csv = cfg.dataset_file.empty() ? detail::in_dir(cfg, files::kDataset) : cfg.dataset_file;
  const auto sidecar = std::filesystem::path(csv).parent_path() / files::kTruth;
  if (std::filesystem::exists(sidecar)) return read_dataset(csv, sidecar.string(), cfg.units);
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + csv);
  return read_dataset(in, cfg.units, cfg.delta_t);
}

/// Compensated matrix from pdc.csv (ps); instance statistics are not kept.
inline CompensatedDataset load_compensated(const RunConfig& cfg) {
  const std::string csv = cfg.pdc_file.empty() ? detail::in_dir(cfg, files::kPdc) : cfg.pdc_file;
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + csv);
  double delta_t = cfg.delta_t;
  const auto sidecar = std::filesystem::path(csv).parent_path() / files::kTruth;
  if (std::filesystem::exists(sidecar)) delta_t = truth_from_json(detail::read_json(sidecar.string())).delta_t;
  const DelayDataset ds = read_dataset(in, Units::kPs, delta_t);
  CompensatedDataset c;
  c.nc = ds.nc;
  c.np = ds.np;
  c.pdc = ds.pd;
  c.delta_t = delta_t;
  return c;
}

// ---------------------------------------------------------------------------
// Steps.

inline FabricDesign step_gen_design(const RunConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  DesignParams p = cfg.design;
  p.seed = cfg.seed;
  auto design = generate_design(p);
  write_design(design, detail::in_dir(cfg, files::kDesign));
  return design;
}

inline DelayDataset step_simulate(const RunConfig& cfg, const FabricDesign& design) {
  detail::ensure_dir(cfg.out_dir);
  DelayDataset ds = simulate(design, cfg.truth, cfg.nc, cfg.seed, cfg.threads);
  ds.design_ref = design_digest(design);
  const DelayDataset out = cfg.units == Units::kPs ? ds.in_ps() : ds;
  write_dataset(out, detail::in_dir(cfg, files::kDataset), detail::in_dir(cfg, files::kTruth));
  return ds;
}

inline CompensatedDataset step_compensate(const RunConfig& cfg, const DelayDataset& ds) {
  detail::ensure_dir(cfg.out_dir);
  CompensateOptions opt;
  opt.threads = cfg.threads;
  auto cds = compensate(ds, opt);
  write_compensation(cds, detail::in_dir(cfg, files::kPdc), detail::in_dir(cfg, files::kCompensation));
  return cds;
}

struct PathStatsResult {
  std::vector<PathVarianceRecord> records;
  std::vector<ClassAggregate> aggregates;
};

/// Per-path records, class aggregates and deviation histograms of the
/// shortest, median and longest path.
inline PathStatsResult step_pathstats(const RunConfig& cfg, const FabricDesign& design,
                                      const CompensatedDataset& cds) {
  detail::ensure_dir(cfg.out_dir);
  PathStatsResult r;
  r.records = path_statistics(cds, design, cfg.threads);
  r.aggregates = class_aggregates(r.records, cfg.class_min);
  write_path_stats_csv(r.records, detail::in_dir(cfg, files::kPathStats));
  write_class_agg_csv(r.aggregates, detail::in_dir(cfg, files::kClassAgg));

  std::vector<std::uint32_t> order(r.records.size());
  for (std::uint32_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return r.records[a].class_m < r.records[b].class_m; });
  std::set<std::uint32_t> picks{order.front(), order[order.size() / 2], order.back()};
  std::ofstream out(detail::in_dir(cfg, files::kHistograms), std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open histograms.csv");
  out << "path_id,m,bin_lo_ps,count\n";
  for (auto j : picks) {
    for (const auto& [b, n] : histogram(path_deviations(cds, j), cfg.hist_bin)) {
      out << j << ',' << r.records[j].class_m << ',' << static_cast<double>(b) * cfg.hist_bin << ',' << n << '\n';
    }
  }
  return r;
}

struct PairResult {
  PairingIndex index;
  std::map<SubclassKey, std::vector<PairDiffStats>> stats;
};

/// Index, per-subgroup statistics and screening, without writing files.
inline PairResult compute_pairs(const RunConfig& cfg, const FabricDesign& design, const CompensatedDataset& cds) {
  if (cds.np != design.paths.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset has " + std::to_string(cds.np) + " paths, design has " +
                                                   std::to_string(design.paths.size()));
  }
  IndexOptions iopt;
  iopt.l_classes = cfg.l_classes;
  iopt.min_members = cfg.screen.min_members;
  iopt.capacity = cfg.capacity;
  iopt.multiset_nodes = cfg.multiset_nodes;
  iopt.threads = cfg.threads;
  PairResult r;
  const auto raw = build_index(design, iopt);
  r.stats = subgroup_statistics(cds, raw, cfg.threads);
  r.index = screen_subclasses(raw, r.stats, cfg.screen);
  return r;
}

inline PairResult step_pair(const RunConfig& cfg, const FabricDesign& design, const CompensatedDataset& cds) {
  detail::ensure_dir(cfg.out_dir);
  PairResult r = compute_pairs(cfg, design, cds);
  write_census_csv(r.index, detail::in_dir(cfg, files::kCensus));
  if (cfg.write_pair_files) {
    const std::string dir = detail::in_dir(cfg, files::kPairsDir);
    detail::ensure_dir(dir);
    for (const auto& [key, pairs] : r.index.subgroups) {
      const auto name = "pairs_" + std::to_string(key.first) + "_" + std::to_string(key.second) + ".bin";
      write_pairs_bin(pairs, (std::filesystem::path(dir) / name).string());
    }
  }
  return r;
}

inline nlohmann::ordered_json census_to_json(const PairingIndex& index) {
  nlohmann::ordered_json j;
  j["total_pairs"] = index.total_pairs;
  j["admissible_pairs"] = index.admissible_pairs;
  j["inadmissible_pairs"] = index.inadmissible_pairs;
  j["filtered_pairs"] = index.filtered_pairs;
  j["retained_pairs"] = index.retained();
  j["bubble_pairs"] = index.bubble_pairs;
  j["one_extra_lut_pairs"] = index.one_extra_lut_pairs;
  std::size_t included = 0;
  std::set<int> l_included;
  for (const auto& [key, s] : index.screening) {
    if (!s.included) continue;
    ++included;
    l_included.insert(key.first);
  }
  j["subclasses"] = index.census.size();
  j["included_subclasses"] = included;
  j["l_classes_included"] = l_included;
  return j;
}

/// Variance estimates plus the context the report needs: census totals,
/// the uncertainty ratio and the mean-path prediction.
inline nlohmann::ordered_json step_decompose(const RunConfig& cfg, const FabricDesign& design,
                                             const CompensatedDataset& cds, const PairResult& pairs,
                                             const std::vector<ClassAggregate>& aggregates) {
  detail::ensure_dir(cfg.out_dir);
  const auto means = subclass_means(pairs.index, pairs.stats);
  EstimateOptions eopt;
  eopt.weighting = cfg.weighting;
  auto est = estimate_variances(means, eopt);
  try {
    est.uncertainty_bound = uncertainty_ratio(aggregates, est);
  } catch (const Error& e) {
    est.uncertainty_bound = std::nan("");
    est.warnings.push_back(e.what());
  }
  double luts = 0.0, nodes = 0.0;
  for (const auto& p : design.paths) {
    luts += p.lut_count + 1;
    nodes += p.node_count;
  }
  luts /= static_cast<double>(design.paths.size());
  nodes /= static_cast<double>(design.paths.size());

  auto j = estimates_to_json(est, means);
  j["mean_path"] = {{"luts", luts},
                    {"nodes", nodes},
                    {"predicted_three_sigma", predict_threesigma(luts, nodes, est)},
                    {"reference_composition_three_sigma",
                     predict_threesigma(kReferenceMeanPathLuts, kReferenceMeanPathNodes, est)}};
  j["census"] = census_to_json(pairs.index);
  j["nc"] = cds.nc;
  j["np"] = cds.np;
  detail::write_text(detail::in_dir(cfg, files::kEstimates), j.dump(2) + "\n");
  write_subclass_means_csv(means, detail::in_dir(cfg, files::kSubclassMeans));
  write_node_analysis_csv(means, est, detail::in_dir(cfg, files::kNodeAnalysis));
  return j;
}

inline QualityReport step_bitgen(const RunConfig& cfg, const CompensatedDataset& cds, const PairingIndex& index) {
  detail::ensure_dir(cfg.out_dir);
  const auto pairs = sample_pairs(index, cfg.bit_pairs, cfg.seed);
  const auto helper = provision(cds, pairs, cfg.modulus);
  write_helper(helper, detail::in_dir(cfg, files::kHelper));
  std::vector<Bitstring> strings(cds.nc);
  detail::parallel_for(cds.nc, cfg.threads, [&](std::size_t i) {
    strings[i] = generate_bits(cds, helper, static_cast<std::uint32_t>(i));
  });
  const std::string dir = detail::in_dir(cfg, files::kBitsDir);
  detail::ensure_dir(dir);
  for (const auto& s : strings) {
    detail::write_text((std::filesystem::path(dir) / ("bits_" + std::to_string(s.instance_id) + ".txt")).string(),
                       s.str() + "\n");
  }
  const auto q = quality_report(strings);
  auto j = quality_to_json(q);
  j["pairs"] = helper.pairs.size();
  j["instances"] = strings.size();
  j["modulus"] = helper.modulus;
  detail::write_text(detail::in_dir(cfg, files::kQuality), j.dump(2) + "\n");
  return q;
}

// ---------------------------------------------------------------------------
// Report.

inline std::vector<ClassAggregate> read_class_agg_csv(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file);
  std::string line;
  std::getline(in, line);
  std::vector<ClassAggregate> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ClassAggregate a;
    int included = 0;
    if (std::sscanf(line.c_str(), "%d,%zu,%lf,%lf,%d", &a.m, &a.n_paths, &a.mean_var, &a.var_of_var, &included) != 5) {
      throw Error(ErrorCode::kParseError, file + ": line " + std::to_string(lineno));
    }
    a.included = included != 0;
    out.push_back(a);
  }
  return out;
}

/// Keys every report.json carries.
inline const std::vector<std::string>& report_fields() {
  static const std::vector<std::string> f{"sigma2_lut",        "sigma2_node",     "three_sigma_lut",
                                          "three_sigma_node",  "regression",      "uncertainty_bound",
                                          "mean_path",         "census",          "class_aggregates",
                                          "quality",           "comparison",      "warnings"};
  return f;
}

/// Collates estimates.json, class_agg.csv, quality.json and, when present,
/// truth.json into report.json and report.md.
inline nlohmann::ordered_json step_report(const RunConfig& cfg) {
  const auto est = detail::read_json(detail::in_dir(cfg, files::kEstimates));
  const auto aggs = read_class_agg_csv(detail::in_dir(cfg, files::kClassAgg));
  const auto quality = detail::read_json(detail::in_dir(cfg, files::kQuality));
  std::optional<GroundTruth> truth;
  if (std::filesystem::exists(detail::in_dir(cfg, files::kTruth))) {
    truth = truth_from_json(detail::read_json(detail::in_dir(cfg, files::kTruth)));
  }
  auto num = [](const nlohmann::json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
  auto r6 = [](double v) { return detail::round_to(v, 6); };

  nlohmann::ordered_json rep;
  rep["nc"] = est.at("nc");
  rep["np"] = est.at("np");
  const double s2l = num(est.at("sigma2_lut"));
  const double s2n = num(est.at("sigma2_node"));
  rep["sigma2_lut"] = r6(s2l);
  rep["sigma2_node"] = r6(s2n);
  rep["three_sigma_lut"] = r6(num(est.at("three_sigma_lut")));
  rep["three_sigma_node"] = r6(num(est.at("three_sigma_node")));
  const auto& reg = est.at("regression");
  rep["regression"] = {{"slope", r6(num(reg.at("slope")))},
                       {"intercept", r6(num(reg.at("intercept")))},
                       {"se_slope", r6(num(reg.at("se_slope")))},
                       {"se_intercept", r6(num(reg.at("se_intercept")))},
                       {"points", reg.at("points")}};
  rep["uncertainty_bound"] = r6(num(est.at("uncertainty_bound")));
  const auto& mp = est.at("mean_path");
  rep["mean_path"] = {{"luts", r6(num(mp.at("luts")))},
                      {"nodes", r6(num(mp.at("nodes")))},
                      {"predicted_three_sigma", r6(num(mp.at("predicted_three_sigma")))},
                      {"reference_composition_three_sigma", r6(num(mp.at("reference_composition_three_sigma")))}};
  rep["census"] = est.at("census");
  std::size_t included = 0;
  for (const auto& a : aggs) included += a.included;
  rep["class_aggregates"] = {{"classes", aggs.size()}, {"included", included}};
  rep["quality"] = {{"pairs", quality.at("pairs")},
                    {"instances", quality.at("instances")},
                    {"mean_interchip_hd_pct", r6(num(quality.at("mean_interchip_hd_pct")))},
                    {"bit_frequency_mean", r6(num(quality.at("bit_frequency_mean")))}};

  struct Row {
    const char* name;
    double estimated, injected, reference;
  };
  const double inj_l = truth ? truth->sigma2_lut : std::nan("");
  const double inj_n = truth ? truth->sigma2_node : std::nan("");
  const std::vector<Row> rows{
      {"sigma2_lut", s2l, inj_l, kReferenceSigma2Lut},
      {"sigma2_node", s2n, inj_n, kReferenceSigma2Node},
      {"three_sigma_lut", num(est.at("three_sigma_lut")), truth ? three_sigma(inj_l) : std::nan(""),
       kReferenceThreeSigmaLut},
      {"three_sigma_node", num(est.at("three_sigma_node")), truth ? three_sigma(inj_n) : std::nan(""),
       kReferenceThreeSigmaNode},
  };
  auto cmp = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json c;
    c["quantity"] = row.name;
    c["estimated"] = r6(row.estimated);
    c["injected"] = std::isfinite(row.injected) ? nlohmann::ordered_json(r6(row.injected)) : nullptr;
    c["reference"] = row.reference;
    c["error_vs_injected_pct"] = std::isfinite(row.injected)
                                     ? nlohmann::ordered_json(detail::round_to(
                                           100.0 * (row.estimated - row.injected) / row.injected, 3))
                                     : nullptr;
    cmp.push_back(std::move(c));
  }
  rep["comparison"] = cmp;
  rep["warnings"] = est.at("warnings");
  detail::write_text(detail::in_dir(cfg, files::kReportJson), rep.dump(2) + "\n");

  using detail::fixed;
  std::ostringstream md;
  md << "# Entropy analysis report\n\n";
  md << "Instances: " << rep["nc"].get<std::size_t>() << ", paths: " << rep["np"].get<std::size_t>() << "\n\n";
  md << "## Variance estimates\n\n";
  md << "| quantity | estimated | injected | reference | error vs injected |\n";
  md << "|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const bool has = std::isfinite(row.injected);
    md << "| " << row.name << " | " << fixed(row.estimated, 3) << " | " << (has ? fixed(row.injected, 3) : "n/a")
       << " | " << fixed(row.reference, 2) << " | "
       << (has ? fixed(100.0 * (row.estimated - row.injected) / row.injected, 2) + "%" : "n/a") << " |\n";
  }
  md << "\nVariances in ps^2, ThreeSigma in ps.\n\n";
  md << "## Regression of subclass mean variance on L+N\n\n";
  md << "slope " << fixed(num(reg.at("slope")), 4) << " +- " << fixed(num(reg.at("se_slope")), 4) << ", intercept "
     << fixed(num(reg.at("intercept")), 3) << " +- " << fixed(num(reg.at("se_intercept")), 3) << " ("
     << reg.at("points").get<std::size_t>() << " subclasses)\n\n";
  md << "## Predictions\n\n";
  md << "Mean path (" << fixed(num(mp.at("luts")), 2) << " LUTs, " << fixed(num(mp.at("nodes")), 2)
     << " nodes): ThreeSigma " << fixed(num(mp.at("predicted_three_sigma")), 2) << " ps\n\n";
  md << "Mean path of " << fixed(kReferenceMeanPathLuts, 1) << " LUTs and " << fixed(kReferenceMeanPathNodes, 1)
     << " nodes: ThreeSigma " << fixed(num(mp.at("reference_composition_three_sigma")), 2) << " ps\n\n";
  md << "Uncertainty ratio (worst class extreme / predicted): " << fixed(num(est.at("uncertainty_bound")), 3)
     << "\n\n";
  const auto& cen = est.at("census");
  md << "## Pairing census\n\n";
  md << "| total pairs | admissible | retained | bubble | one extra LUT | subclasses | included |\n";
  md << "|---|---|---|---|---|---|---|\n";
  md << "| " << cen.at("total_pairs") << " | " << cen.at("admissible_pairs") << " | " << cen.at("retained_pairs")
     << " | " << cen.at("bubble_pairs") << " | " << cen.at("one_extra_lut_pairs") << " | " << cen.at("subclasses")
     << " | " << cen.at("included_subclasses") << " |\n\n";
  md << "LUT-node classes: " << aggs.size() << ", with at least " << cfg.class_min << " paths: " << included
     << "\n\n";
  md << "## Bitstrings\n\n";
  md << quality.at("instances") << " instances x " << quality.at("pairs") << " bits, mean inter-chip HD "
     << fixed(num(quality.at("mean_interchip_hd_pct")), 2) << "%, mean bit frequency "
     << fixed(num(quality.at("bit_frequency_mean")), 4) << "\n";
  if (!est.at("warnings").empty()) {
    md << "\n## Warnings\n\n";
    for (const auto& w : est.at("warnings")) md << "- " << w.get<std::string>() << "\n";
  }
  detail::write_text(detail::in_dir(cfg, files::kReportMd), md.str());
  return rep;
}

/// All steps in order, in memory, writing every step's files.
inline nlohmann::ordered_json run_pipeline(const RunConfig& cfg) {
  const auto design = step_gen_design(cfg);
  const auto ds = step_simulate(cfg, design);
  const auto cds = step_compensate(cfg, ds);
  const auto ps = step_pathstats(cfg, design, cds);
  const auto pairs = step_pair(cfg, design, cds);
  step_decompose(cfg, design, cds, pairs, ps.aggregates);
  step_bitgen(cfg, cds, pairs.index);
  return step_report(cfg);
}

}  // namespace pufent
