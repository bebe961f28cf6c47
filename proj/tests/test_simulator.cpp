#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "pufent/simulator.hpp"

using namespace pufent;

namespace {

FabricDesign small_design(std::uint64_t seed = 7) {
  DesignParams p;
  p.n_inputs = 6;
  p.n_layers = 4;
  p.luts_per_layer = 8;
  p.n_outputs = 2;
  p.target_path_count = 30;
  p.seed = seed;
  return generate_design(p);
}

GroundTruth quiet_truth() {
  GroundTruth t;
  t.chip_gain_sigma = 0.0;
  t.chip_offset_sigma = 0.0;
  t.noise_sigma = 0.0;
  return t;
}

std::vector<long double> column(const DelayDataset& ds, std::size_t j) {
  std::vector<long double> v(ds.nc);
  for (std::size_t i = 0; i < ds.nc; ++i) v[i] = ds.at(i, j);
  return v;
}

}  // namespace

TEST(Realize, ZeroSigmasGiveNominals) {
  const auto d = small_design();
  GroundTruth t = quiet_truth();
  t.sigma2_lut = 0.0;
  t.sigma2_node = 0.0;
  const auto rs = realize_instances(d, t, 3, 11);
  for (const auto& r : rs) {
    EXPECT_EQ(r.delay, rs[0].delay);
    EXPECT_DOUBLE_EQ(r.gain, 1.0);
    EXPECT_DOUBLE_EQ(r.offset, 0.0);
    for (std::size_t c = 0; c < d.component_catalog.size(); ++c) {
      EXPECT_DOUBLE_EQ(r.delay[c], detail::nominal_of(d.component_catalog[c], t));
    }
  }
}

TEST(Realize, SingleNodeVarianceMonteCarlo) {
  FabricDesign d;
  PathRecord p;
  p.launch_ff = {ComponentKind::kLaunchFf, "L"};
  p.capture_ff = {ComponentKind::kCaptureFf, "C"};
  p.components = {{ComponentKind::kNode, "n0"}, {ComponentKind::kLut, "x"}, {ComponentKind::kNode, "n1"}};
  d.paths = {p};
  finalize_design(d);
  const auto rs = realize_instances(d, quiet_truth(), 10'000, 5);
  const auto idx = d.index_of({ComponentKind::kNode, "n0"});
  std::vector<long double> xs;
  for (const auto& r : rs) xs.push_back(r.delay[idx]);
  EXPECT_NEAR(static_cast<double>(oracle::var(xs)), 16.83, 16.83 * 0.05);
  EXPECT_NEAR(static_cast<double>(oracle::mean(xs)), 24.0, 0.2);
}

TEST(Realize, GainSpreadMatchesChipSigma) {
  const auto d = small_design();
  GroundTruth t = quiet_truth();
  t.chip_gain_sigma = 0.03;
  const auto ds = simulate(d, t, 2000, 3);
  std::vector<long double> means;
  for (std::size_t i = 0; i < ds.nc; ++i) {
    long double s = 0;
    for (double v : ds.row(i)) s += v;
    means.push_back(s / ds.np);
  }
  const double rel = std::sqrt(static_cast<double>(oracle::var(means))) / static_cast<double>(oracle::mean(means));
  EXPECT_NEAR(rel, 0.03, 0.005);
}

TEST(Realize, ComponentIdentityStableAcrossDesigns) {
  // the same component name draws the same delay in a different catalog
  const auto a = small_design(7);
  const auto b = small_design(8);
  const auto ra = realize_instance(a, GroundTruth{}, 4, 99);
  const auto rb = realize_instance(b, GroundTruth{}, 4, 99);
  int shared = 0;
  for (std::size_t c = 0; c < a.component_catalog.size(); ++c) {
    const auto k = b.index_of(a.component_catalog[c]);
    if (k < 0) continue;
    ++shared;
    EXPECT_DOUBLE_EQ(ra.delay[c], rb.delay[k]);
  }
  EXPECT_GT(shared, 0);
}

TEST(Realize, NonpositiveDelayAfterResampling) {
  const auto d = small_design();
  GroundTruth t = quiet_truth();
  t.nominal_node_delay = -1000.0;
  try {
    realize_instances(d, t, 2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonpositiveDelay);
  }
}

TEST(Measure, DigitizeExamples) {
  EXPECT_EQ(digitize(4181.0, 18.0), 233.0);
  EXPECT_EQ(digitize(18.0 * 17, 18.0), 17.0);
  double prev = 0.0;
  for (double x = 0.5; x < 500.0; x += 0.37) {
    const double d = digitize(x, 18.0);
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(Measure, FpsToPs) { EXPECT_NEAR(fps_to_ps(232.3, 18.0), 4181.4, 1e-9); }

TEST(Measure, NoiselessPathIsCeilOfTrueDelay) {
  const auto d = small_design();
  const auto t = quiet_truth();
  const auto rs = realize_instances(d, t, 4, 21);
  const auto ds = measure_dataset(d, rs, t, 22);
  const auto layout = path_layout(d);
  for (std::size_t i = 0; i < ds.nc; ++i) {
    for (std::size_t j = 0; j < ds.np; ++j) {
      long double sum = 0;
      const auto& p = d.paths[j];
      sum += rs[i].delay[d.index_of(p.launch_ff)];
      for (const auto& c : p.components) sum += rs[i].delay[d.index_of(c)];
      EXPECT_EQ(ds.at(i, j), std::ceil(static_cast<double>(sum) / 18.0));
    }
  }
}

TEST(Measure, SixteenSamplesQuarterTheStandardError) {
  FabricDesign d = small_design();
  GroundTruth t = quiet_truth();
  t.sigma2_lut = 0.0;
  t.sigma2_node = 0.0;
  t.noise_sigma = 9.0;
  t.delta_t = 0.01;  // isolate the noise from quantization
  t.samples_per_measurement = 1;
  const auto one = simulate(d, t, 4000, 1);
  t.samples_per_measurement = 16;
  const auto avg = simulate(d, t, 4000, 1);
  const double s1 = std::sqrt(static_cast<double>(oracle::var(column(one, 0))));
  const double s16 = std::sqrt(static_cast<double>(oracle::var(column(avg, 0))));
  EXPECT_NEAR(s1 / s16, 4.0, 0.3);
}

TEST(Measure, PathVarianceIsSumOfComponentVariances) {
  const auto d = small_design();
  GroundTruth t = quiet_truth();
  t.delta_t = 0.01;
  const auto ds = simulate(d, t, 5000, 8);
  for (std::size_t j = 0; j < ds.np; j += 7) {
    const auto& p = d.paths[j];
    const double expected = (p.lut_count + 1) * t.sigma2_lut + p.node_count * t.sigma2_node;
    const double got = static_cast<double>(oracle::var(column(ds, j))) * t.delta_t * t.delta_t;
    EXPECT_NEAR(got, expected, 0.05 * expected) << "path " << j;
  }
}

TEST(Measure, DeterministicAndThreadIndependent) {
  const auto d = small_design();
  const auto a = simulate(d, GroundTruth{}, 20, 77, 1);
  const auto b = simulate(d, GroundTruth{}, 20, 77, 4);
  EXPECT_EQ(a.pd, b.pd);
  std::ostringstream sa, sb;
  write_dataset(a, sa);
  write_dataset(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  const auto c = simulate(d, GroundTruth{}, 20, 78, 1);
  EXPECT_NE(a.pd, c.pd);
}

TEST(DatasetCsv, RoundTrip3x5) {
  DelayDataset ds;
  ds.nc = 3;
  ds.np = 5;
  for (int v = 0; v < 15; ++v) ds.pd.push_back(200.0 + v * 0.0625);
  std::ostringstream out;
  write_dataset(ds, out);
  std::istringstream in(out.str());
  const auto back = read_dataset(in);
  EXPECT_EQ(back.nc, 3u);
  EXPECT_EQ(back.np, 5u);
  EXPECT_EQ(back.pd, ds.pd);
  EXPECT_EQ(out.str().substr(0, 27), "path_id,inst_0,inst_1,inst_");
}

TEST(DatasetCsv, RaggedRow) {
  std::istringstream in("path_id,inst_0,inst_1\n0,1.0,2.0\n1,3.0\n");
  try {
    read_dataset(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(DatasetCsv, RejectsGarbageAndNonpositive) {
  for (const char* text : {"path_id,inst_0\n0,abc\n", "path_id,inst_0\n0,-4\n", "path_id,inst_0\n0,nan\n"}) {
    std::istringstream in(text);
    try {
      read_dataset(in);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << text;
    }
  }
}

TEST(GroundTruthJson, RoundTrip) {
  GroundTruth t;
  t.heterogeneity = 0.4;
  t.noise_sigma = 3.5;
  EXPECT_EQ(truth_from_json(nlohmann::json::parse(to_json(t).dump())), t);
}

TEST(GroundTruthJson, Validation) {
  GroundTruth t;
  t.delta_t = 0.0;
  EXPECT_THROW(t.validate(), Error);
  t = GroundTruth{};
  t.samples_per_measurement = 0;
  EXPECT_THROW(t.validate(), Error);
  t = GroundTruth{};
  t.noise_sigma = -1;
  EXPECT_THROW(t.validate(), Error);
}
