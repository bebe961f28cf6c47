// pufent: delay-PUF entropy analysis command line.
//
// Exit codes: 0 success, 2 validation error, 1 internal error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pufent/pufent.hpp"

namespace {

using pufent::RunConfig;

struct Choices {
  std::string units = "fps";
  std::string outlier_rule = "sigma-ratio";
  std::string weighting = "unweighted";
  std::vector<int> l_classes;
  bool no_pair_files = false;
};

void add_options(CLI::App& app, RunConfig& cfg, Choices& ch) {
  app.add_option("--seed", cfg.seed, "PRNG seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads, 0 = all cores")->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "run directory")->capture_default_str();
  app.add_option("--units", ch.units, "dataset units")
      ->check(CLI::IsMember({"ps", "fps"}))
      ->capture_default_str();

  auto& d = cfg.design;
  app.add_option("--n-inputs", d.n_inputs)->capture_default_str()->group("Design");
  app.add_option("--n-layers", d.n_layers)->capture_default_str()->group("Design");
  app.add_option("--luts-per-layer", d.luts_per_layer)->capture_default_str()->group("Design");
  app.add_option("--n-outputs", d.n_outputs, "capture FFs, 0 = luts-per-layer")->capture_default_str()->group("Design");
  app.add_option("--fanin", d.fanin)->capture_default_str()->group("Design");
  app.add_option("--fanout", d.fanout)->capture_default_str()->group("Design");
  app.add_option("--nodes-min", d.nodes_min)->capture_default_str()->group("Design");
  app.add_option("--nodes-max", d.nodes_max)->capture_default_str()->group("Design");
  app.add_option("--paths", d.target_path_count, "paths per polarity")->capture_default_str()->group("Design");
  app.add_option("--bypass-prob", d.bypass_prob)->capture_default_str()->group("Design");

  auto& t = cfg.truth;
  app.add_option("--nc", cfg.nc, "PUF instances")->capture_default_str()->group("Simulation");
  app.add_option("--lut-delay", t.nominal_lut_delay)->capture_default_str()->group("Simulation");
  app.add_option("--node-delay", t.nominal_node_delay)->capture_default_str()->group("Simulation");
  app.add_option("--ff-delay", t.nominal_ff_clk_to_q)->capture_default_str()->group("Simulation");
  app.add_option("--sigma2-lut", t.sigma2_lut)->capture_default_str()->group("Simulation");
  app.add_option("--sigma2-node", t.sigma2_node)->capture_default_str()->group("Simulation");
  app.add_option("--heterogeneity", t.heterogeneity)->capture_default_str()->group("Simulation");
  app.add_option("--gain-sigma", t.chip_gain_sigma)->capture_default_str()->group("Simulation");
  app.add_option("--offset-sigma", t.chip_offset_sigma)->capture_default_str()->group("Simulation");
  app.add_option("--noise", t.noise_sigma)->capture_default_str()->group("Simulation");
  app.add_option("--samples", t.samples_per_measurement)->capture_default_str()->group("Simulation");
  app.add_option("--delta-t", t.delta_t, "strobe increment, ps")->capture_default_str()->group("Simulation");

  app.add_option("--design", cfg.design_file, "design file instead of <out-dir>/design.paths.jsonl")->group("Inputs");
  app.add_option("--dataset", cfg.dataset_file, "dataset CSV instead of <out-dir>/dataset.csv")->group("Inputs");
  app.add_option("--pdc", cfg.pdc_file, "compensated CSV instead of <out-dir>/pdc.csv")->group("Inputs");

  app.add_option("--class-min", cfg.class_min, "paths per included LUT-node class")
      ->capture_default_str()
      ->group("Analysis");
  app.add_option("--hist-bin", cfg.hist_bin, "histogram bin width, ps")->capture_default_str()->group("Analysis");
  app.add_option("--l-classes", ch.l_classes, "keep only these L values")->delimiter(',')->group("Analysis");
  app.add_option("--min-members", cfg.screen.min_members)->capture_default_str()->group("Analysis");
  app.add_option("--outlier-k", cfg.screen.outlier_k)->capture_default_str()->group("Analysis");
  app.add_option("--outlier-rule", ch.outlier_rule)
      ->check(CLI::IsMember({"sigma-ratio", "mean-plus-k-sigma"}))
      ->capture_default_str()
      ->group("Analysis");
  app.add_flag("--multiset-nodes", cfg.multiset_nodes, "count repeated node names")->group("Analysis");
  app.add_option("--capacity", cfg.capacity, "retained pair limit")->capture_default_str()->group("Analysis");
  app.add_flag("--no-pair-files", ch.no_pair_files, "skip pairs_<L>_<N>.bin")->group("Analysis");
  app.add_option("--weighting", ch.weighting, "mean of class means")
      ->check(CLI::IsMember({"unweighted", "membership"}))
      ->capture_default_str()
      ->group("Analysis");
  app.add_option("--bit-pairs", cfg.bit_pairs)->capture_default_str()->group("Bits");
  app.add_option("--modulus", cfg.modulus, "FPS")->capture_default_str()->group("Bits");
}

void apply_choices(RunConfig& cfg, const Choices& ch) {
  cfg.units = ch.units == "ps" ? pufent::Units::kPs : pufent::Units::kFps;
  cfg.delta_t = cfg.truth.delta_t;
  cfg.screen.rule =
      ch.outlier_rule == "sigma-ratio" ? pufent::OutlierRule::kSigmaRatio : pufent::OutlierRule::kMeanPlusKSigma;
  cfg.weighting = ch.weighting == "membership" ? pufent::ClassWeighting::kMembership
                                               : pufent::ClassWeighting::kUnweighted;
  cfg.l_classes = {ch.l_classes.begin(), ch.l_classes.end()};
  cfg.write_pair_files = !ch.no_pair_files;
}

void run(const std::string& cmd, const RunConfig& cfg) {
  using namespace pufent;
  if (cmd == "gen-design") {
    const auto d = step_gen_design(cfg);
    std::printf("%zu paths (%zu rising, %zu falling), %zu components\n", d.paths.size(), d.npr, d.npf,
                d.component_catalog.size());
  } else if (cmd == "simulate") {
    const auto ds = step_simulate(cfg, load_design(cfg));
    std::printf("%zu instances x %zu paths\n", ds.nc, ds.np);
  } else if (cmd == "compensate") {
    const auto c = step_compensate(cfg, load_dataset(cfg));
    std::printf("u_ref %.4f ps, sigma_ref %.4f ps\n", c.reference.u_ref, c.reference.sigma_ref);
  } else if (cmd == "pathstats") {
    const auto r = step_pathstats(cfg, load_design(cfg), load_compensated(cfg));
    std::printf("%zu paths in %zu LUT-node classes\n", r.records.size(), r.aggregates.size());
  } else if (cmd == "pair") {
    const auto r = step_pair(cfg, load_design(cfg), load_compensated(cfg));
    std::printf("%llu same-polarity pairs, %zu retained in %zu subclasses\n",
                static_cast<unsigned long long>(r.index.total_pairs), r.index.retained(), r.index.census.size());
  } else if (cmd == "decompose") {
    const auto design = load_design(cfg);
    const auto cds = load_compensated(cfg);
    const auto aggs = class_aggregates(path_statistics(cds, design, cfg.threads), cfg.class_min);
    const auto j = step_decompose(cfg, design, cds, compute_pairs(cfg, design, cds), aggs);
    std::printf("sigma2_lut %.4f ps^2, sigma2_node %.4f ps^2\n", j["sigma2_lut"].get<double>(),
                j["sigma2_node"].get<double>());
  } else if (cmd == "bitgen") {
    const auto design = load_design(cfg);
    const auto cds = load_compensated(cfg);
    const auto q = step_bitgen(cfg, cds, compute_pairs(cfg, design, cds).index);
    std::printf("inter-chip HD %.2f%%, bit frequency %.4f\n", q.mean_interchip_hd_pct, q.bit_frequency_mean);
  } else if (cmd == "report") {
    step_report(cfg);
    std::printf("%s/report.md\n", cfg.out_dir.c_str());
  } else if (cmd == "pipeline") {
    const auto rep = run_pipeline(cfg);
    std::printf("sigma2_lut %.4f ps^2, sigma2_node %.4f ps^2, report in %s\n", rep["sigma2_lut"].get<double>(),
                rep["sigma2_node"].get<double>(), cfg.out_dir.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-PUF entropy analysis: simulate, compensate, pair and decompose path delays"};
  app.set_config("--config", "", "key = value configuration file");
  app.require_subcommand(1, 1);
  app.fallthrough();

  RunConfig cfg;
  Choices ch;
  add_options(app, cfg, ch);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-design", "generate a synthetic design"},
      {"simulate", "simulate PUF instances of a design"},
      {"compensate", "remove chip-to-chip variation"},
      {"pathstats", "per-path and per-class variance"},
      {"pair", "pairing census and subclass screening"},
      {"decompose", "LUT and node variance estimates"},
      {"bitgen", "helper data, bitstrings and quality"},
      {"report", "collate report.md and report.json"},
      {"pipeline", "all steps end to end"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    apply_choices(cfg, ch);
    run(app.get_subcommands().front()->get_name(), cfg);
  } catch (const pufent::Error& e) {
    std::cerr << "error[" << pufent::to_string(e.code()) << "]: " << e.message() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[INTERNAL]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
