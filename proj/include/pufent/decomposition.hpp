#pragma once

// LUT and node variance estimation from path-pair subclasses.
//
// The variance of a pair difference is modeled as L*var_lut + N*var_node.
// Subclasses that differ by one node within the same L class isolate
// var_node; var_lut then follows by subtracting N*var_node and dividing by L.

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pufent/error.hpp"
#include "pufent/pair_stats.hpp"
#include "pufent/pairing.hpp"
#include "pufent/pathstats.hpp"

namespace pufent {

struct SubclassMean {
  int L = 0;
  int N = 0;
  std::size_t n_pairs = 0;
  double u_var = 0.0;  // ps^2
};

/// Mean member variance of each included subclass.
inline std::vector<SubclassMean> subclass_means(const PairingIndex& index,
                                                const std::map<SubclassKey, std::vector<PairDiffStats>>& stats) {
  std::vector<SubclassMean> out;
  for (const auto& [key, pairs] : index.subgroups) {
    const auto scr = index.screening.find(key);
    if (scr == index.screening.end() || !scr->second.included) continue;
    const auto it = stats.find(key);
    if (it == stats.end() || it->second.empty()) continue;
    double sum = 0.0;
    for (const auto& s : it->second) sum += s.var;
    out.push_back({key.first, key.second, it->second.size(), sum / static_cast<double>(it->second.size())});
  }
  return out;
}

enum class ClassWeighting : std::uint8_t { kUnweighted, kMembership };

struct NodeEstimate {
  std::map<int, double> per_class;  // L -> mean of consecutive differences
  std::map<int, std::size_t> class_weight;
  double sigma2_node = 0.0;
  bool negative = false;
};

struct LutEstimate {
  std::map<int, double> per_class;
  double sigma2_lut = 0.0;
  bool negative = false;
};

namespace detail {

inline double class_mean_of_means(const std::map<int, double>& per_class, const std::map<int, std::size_t>& weight,
                                  ClassWeighting w) {
  double num = 0.0, den = 0.0;
  for (const auto& [L, v] : per_class) {
    const double wt = w == ClassWeighting::kMembership ? static_cast<double>(weight.at(L)) : 1.0;
    num += wt * v;
    den += wt;
  }
  return num / den;
}

inline std::map<int, std::vector<SubclassMean>> by_class(const std::vector<SubclassMean>& means) {
  std::map<int, std::vector<SubclassMean>> classes;
  for (const auto& m : means) classes[m.L].push_back(m);
  for (auto& [L, v] : classes) {
    std::sort(v.begin(), v.end(), [](const SubclassMean& a, const SubclassMean& b) { return a.N < b.N; });
  }
  return classes;
}

}  // namespace detail

/// Differences of adjacent-N subclass means, averaged within each L class,
/// then across classes. Gaps larger than one node are skipped.
inline NodeEstimate estimate_node_variance(const std::vector<SubclassMean>& means,
                                           ClassWeighting weighting = ClassWeighting::kUnweighted) {
  NodeEstimate est;
  for (const auto& [L, members] : detail::by_class(means)) {
    double sum = 0.0;
    std::size_t count = 0, weight = 0;
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (members[i].N != members[i - 1].N + 1) continue;
      sum += members[i].u_var - members[i - 1].u_var;
      weight += members[i].n_pairs + members[i - 1].n_pairs;
      ++count;
    }
    if (count == 0) continue;
    est.per_class[L] = sum / static_cast<double>(count);
    est.class_weight[L] = weight;
  }
  if (est.per_class.empty()) {
    throw Error(ErrorCode::kNoConsecutiveSubclasses, "no L class has two included subclasses with adjacent N");
  }
  est.sigma2_node = detail::class_mean_of_means(est.per_class, est.class_weight, weighting);
  est.negative = est.sigma2_node < 0.0;
  return est;
}

/// (u_var - N * sigma2_node) / L per subclass, averaged within then across classes.
inline LutEstimate estimate_lut_variance(const std::vector<SubclassMean>& means, double sigma2_node,
                                         ClassWeighting weighting = ClassWeighting::kUnweighted) {
  if (!std::isfinite(sigma2_node)) throw Error(ErrorCode::kInvalidArgument, "sigma2_node must be finite");
  LutEstimate est;
  std::map<int, std::size_t> weight;
  for (const auto& [L, members] : detail::by_class(means)) {
    if (L <= 0) continue;
    double sum = 0.0;
    for (const auto& m : members) {
      sum += (m.u_var - m.N * sigma2_node) / m.L;
      weight[L] += m.n_pairs;
    }
    est.per_class[L] = sum / static_cast<double>(members.size());
  }
  if (est.per_class.empty()) throw Error(ErrorCode::kInvalidArgument, "no subclass means");
  est.sigma2_lut = detail::class_mean_of_means(est.per_class, weight, weighting);
  est.negative = est.sigma2_lut < 0.0;
  return est;
}

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double se_slope = 0.0;
  double se_intercept = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares of u_var against L + N.
inline Regression fit_regression(const std::vector<SubclassMean>& means) {
  if (means.size() < 2) throw Error(ErrorCode::kSingularFit, "regression needs at least two points");
  const double n = static_cast<double>(means.size());
  double mx = 0.0, my = 0.0;
  for (const auto& m : means) {
    mx += m.L + m.N;
    my += m.u_var;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& m : means) {
    const double dx = m.L + m.N - mx;
    sxx += dx * dx;
    sxy += dx * (m.u_var - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::kSingularFit, "all subclasses have the same L + N");
  Regression r;
  r.n = means.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (means.size() > 2) {
    double sse = 0.0;
    for (const auto& m : means) {
      const double e = m.u_var - (r.intercept + r.slope * (m.L + m.N));
      sse += e * e;
    }
    const double s2 = sse / (n - 2.0);
    r.se_slope = std::sqrt(s2 / sxx);
    r.se_intercept = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return r;
}

struct VarianceEstimates {
  double sigma2_node = 0.0;  // ps^2
  double sigma2_lut = 0.0;   // ps^2
  std::map<int, double> per_class_node;
  std::map<int, double> per_class_lut;
  Regression regression;
  double three_sigma_lut = 0.0;   // ps
  double three_sigma_node = 0.0;  // ps
  double uncertainty_bound = 0.0;
  std::vector<std::string> warnings;
};

inline double three_sigma(double variance) { return 3.0 * std::sqrt(variance); }

/// 3 * sqrt(luts * var_lut + nodes * var_node).
inline double predict_threesigma(double lut_count_sum, double node_count_sum, double sigma2_lut,
                                 double sigma2_node) {
  return three_sigma(lut_count_sum * sigma2_lut + node_count_sum * sigma2_node);
}

inline double predict_threesigma(double lut_count_sum, double node_count_sum, const VarianceEstimates& est) {
  return predict_threesigma(lut_count_sum, node_count_sum, est.sigma2_lut, est.sigma2_node);
}

inline VarianceLine predicted_variance_line(const VarianceEstimates& est, double lut_fraction) {
  return predicted_variance_line(est.sigma2_lut, est.sigma2_node, lut_fraction);
}

/// Measured extreme variance over the variance predicted from an average
/// LUT/node composition.
inline double uncertainty_ratio(double measured_extreme, double mean_luts, double mean_nodes, double sigma2_lut,
                                double sigma2_node) {
  const double predicted = mean_luts * sigma2_lut + mean_nodes * sigma2_node;
  if (!(predicted > 0.0)) throw Error(ErrorCode::kInvalidArgument, "predicted variance must be > 0");
  return measured_extreme / predicted;
}

/// Picks the included LUT-node class with the largest variance of variances
/// and compares its largest member variance with the model prediction.
inline double uncertainty_ratio(const std::vector<ClassAggregate>& aggs, const VarianceEstimates& est) {
  const ClassAggregate* worst = nullptr;
  for (const auto& a : aggs) {
    if (!a.included) continue;
    if (!worst || a.var_of_var > worst->var_of_var) worst = &a;
  }
  if (!worst) throw Error(ErrorCode::kInvalidArgument, "no included LUT-node class");
  return uncertainty_ratio(worst->max_var, worst->mean_luts, worst->mean_nodes, est.sigma2_lut, est.sigma2_node);
}

struct EstimateOptions {
  ClassWeighting weighting = ClassWeighting::kUnweighted;
};

/// Node estimate, LUT estimate, regression and ThreeSigma conversions.
inline VarianceEstimates estimate_variances(const std::vector<SubclassMean>& means, const EstimateOptions& opt = {}) {
  VarianceEstimates est;
  const auto node = estimate_node_variance(means, opt.weighting);
  const auto lut = estimate_lut_variance(means, node.sigma2_node, opt.weighting);
  est.sigma2_node = node.sigma2_node;
  est.sigma2_lut = lut.sigma2_lut;
  est.per_class_node = node.per_class;
  est.per_class_lut = lut.per_class;
  if (node.negative) est.warnings.push_back("NEGATIVE_ESTIMATE: node variance < 0");
  if (lut.negative) est.warnings.push_back("NEGATIVE_ESTIMATE: LUT variance < 0");
  try {
    est.regression = fit_regression(means);
  } catch (const Error& e) {
    est.warnings.push_back(e.what());
  }
  est.three_sigma_lut = est.sigma2_lut >= 0 ? three_sigma(est.sigma2_lut) : std::nan("");
  est.three_sigma_node = est.sigma2_node >= 0 ? three_sigma(est.sigma2_node) : std::nan("");
  return est;
}

inline nlohmann::ordered_json estimates_to_json(const VarianceEstimates& est, const std::vector<SubclassMean>& means) {
  nlohmann::ordered_json j;
  j["sigma2_node"] = est.sigma2_node;
  j["sigma2_lut"] = est.sigma2_lut;
  j["three_sigma_lut"] = est.three_sigma_lut;
  j["three_sigma_node"] = est.three_sigma_node;
  j["regression"] = {{"slope", est.regression.slope},
                     {"intercept", est.regression.intercept},
                     {"se_slope", est.regression.se_slope},
                     {"se_intercept", est.regression.se_intercept},
                     {"points", est.regression.n}};
  j["uncertainty_bound"] = est.uncertainty_bound;
  auto node = nlohmann::ordered_json::object();
  for (const auto& [L, v] : est.per_class_node) node[std::to_string(L)] = v;
  auto lut = nlohmann::ordered_json::object();
  for (const auto& [L, v] : est.per_class_lut) lut[std::to_string(L)] = v;
  j["per_class_node"] = std::move(node);
  j["per_class_lut"] = std::move(lut);
  auto table = nlohmann::ordered_json::array();
  for (const auto& m : means) table.push_back({{"L", m.L}, {"N", m.N}, {"n_pairs", m.n_pairs}, {"u_var", m.u_var}});
  j["subclass_means"] = std::move(table);
  j["warnings"] = est.warnings;
  return j;
}

inline void write_subclass_means_csv(const std::vector<SubclassMean>& means, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "L,N,n_pairs,u_var\n";
  char buf[128];
  for (const auto& m : means) {
    std::snprintf(buf, sizeof buf, "%d,%d,%zu,%.6f\n", m.L, m.N, m.n_pairs, m.u_var);
    out << buf;
  }
}

/// Measured vs model-predicted subclass means, in plotting order.
inline void write_node_analysis_csv(const std::vector<SubclassMean>& means, const VarianceEstimates& est,
                                    const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  out << "ordinal,L,N,measured_u_var,predicted_u_var\n";
  char buf[160];
  std::size_t ordinal = 0;
  for (const auto& m : means) {
    const double predicted = m.L * est.sigma2_lut + m.N * est.sigma2_node;
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.6f,%.6f\n", ordinal++, m.L, m.N, m.u_var, predicted);
    out << buf;
  }
}

}  // namespace pufent
