#include <cmath>
#include <random>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "mmdyn/contextualization.hpp"
#include "mmdyn/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmdyn;
using doctest::Approx;

namespace {

struct Rows {
  std::vector<float> data;
  std::size_t cols;
  MatrixView view() const { return {data, data.size() / cols, cols}; }
  oracle::Matrix matrix() const { return oracle::to_matrix(data, data.size() / cols, cols); }
};

Rows repeat(std::vector<float> row, std::size_t n) {
  Rows r{{}, row.size()};
  for (std::size_t i = 0; i < n; ++i) r.data.insert(r.data.end(), row.begin(), row.end());
  return r;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mmdyn::Error");
  return ErrorCode::Io;
}

SimilarityCurve curve_of(std::vector<double> values, CurveKind kind = CurveKind::Inter) {
  SimilarityCurve c;
  c.kind = kind;
  c.values = std::move(values);
  return c;
}

}  // namespace

TEST_CASE("inter_modal_similarity on hand-checked inputs") {
  const Rows same = repeat({1, 2, 2}, 4);
  CHECK(inter_modal_similarity(same.view(), {{0, 2}, {2, 4}}) == Approx(1.0).epsilon(1e-12));

  Rows ortho{{1, 0, 1, 0, 0, 1, 0, 1, 0, 1}, 2};
  CHECK(inter_modal_similarity(ortho.view(), {{0, 2}, {2, 5}}) == 0.0);

  Rows diag{{1, 0, 1, 1}, 2};
  CHECK(std::abs(inter_modal_similarity(diag.view(), {{0, 1}, {1, 2}}) - 0.70710678) < 1e-7);
}

TEST_CASE("inter_modal_similarity matches the double-loop oracle, seed 42") {
  std::mt19937_64 rng(42);
  Rows r{fixtures::uniform(rng, 5 * 6), 6};
  const double got = inter_modal_similarity(r.view(), {{0, 3}, {3, 5}});
  CHECK(std::abs(got - oracle::inter(r.matrix(), 0, 3, 3, 5)) < 1e-12);
}

TEST_CASE("intra_modal_similarity on hand-checked inputs") {
  CHECK(intra_modal_similarity(repeat({0.5f, -1, 3}, 3).view(), {0, 3}) == Approx(1.0).epsilon(1e-12));
  Rows basis{{1, 0, 0, 0, 1, 0, 0, 0, 1}, 3};
  CHECK(intra_modal_similarity(basis.view(), {0, 3}) == 0.0);

  std::mt19937_64 rng(7);
  Rows r{fixtures::uniform(rng, 4 * 8), 8};
  CHECK(std::abs(intra_modal_similarity(r.view(), {0, 4}) - oracle::intra(r.matrix(), 0, 4)) < 1e-12);
}

TEST_CASE("similarity error paths") {
  Rows r{{1, 0, 0, 0, 1, 1}, 2};
  CHECK(code_of([&] { inter_modal_similarity(r.view(), {{0, 1}, {1, 3}}); }) == ErrorCode::ZeroVector);
  CHECK(code_of([&] { intra_modal_similarity(r.view(), {0, 1}); }) == ErrorCode::SpanTooSmall);
  CHECK(code_of([&] { intra_modal_similarity(r.view(), {0, 2}); }) == ErrorCode::ZeroVector);
  CHECK(code_of([&] { inter_modal_similarity(r.view(), {{0, 1}, {2, 4}}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("similarity properties on random blocks") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> tok(2, 16), dim(1, 32);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t T = tok(rng), d = dim(rng);
    std::uniform_int_distribution<std::size_t> cut(1, T - 1);
    const std::size_t split = cut(rng);
    Rows r{fixtures::uniform(rng, T * d), d};
    const ModalitySpan spans{{0, split}, {split, T}};
    const ModalitySpan swapped{{split, T}, {0, split}};
    const double inter = inter_modal_similarity(r.view(), spans);

    CHECK(inter >= -1.0);
    CHECK(inter <= 1.0);
    CHECK(std::abs(inter - oracle::inter(r.matrix(), 0, split, split, T)) < 1e-6);
    CHECK(std::abs(inter - inter_modal_similarity(r.view(), swapped)) < 1e-12);

    Rows scaled = r;
    for (std::size_t i = 0; i < T; ++i) {
      const float c = scale(rng);
      for (std::size_t k = 0; k < d; ++k) scaled.data[i * d + k] *= c;
    }
    CHECK(std::abs(inter - inter_modal_similarity(scaled.view(), spans)) < 1e-6);

    if (T >= 2) {
      const double intra = intra_modal_similarity(r.view(), {0, T});
      CHECK(std::abs(intra - oracle::intra(r.matrix(), 0, T)) < 1e-6);
      CHECK(std::abs(intra - intra_modal_similarity(scaled.view(), {0, T})) < 1e-6);
      CHECK(std::abs(intra) <= 1.0);
    }
  }
}

TEST_CASE("similarity_curve recovers a planted curve") {
  fixtures::TempDir dir;
  const std::vector<double> planted{0.0, 0.2, 0.1, 0.3, 0.25};
  generate_synthetic_dump(fixtures::curve_spec(planted), 3, dir.path());
  const Dump dump = Dump::open(dir.path());
  const SimilarityCurve c = similarity_curve(dump, CurveKind::Inter);
  REQUIRE(c.values.size() == planted.size());
  for (std::size_t l = 0; l < planted.size(); ++l) CHECK(std::abs(c.values[l] - planted[l]) < 1e-3);
  CHECK(c.sample_count == 1);
}

TEST_CASE("planted similarity 1.0 makes every token collinear") {
  const DumpData data = synthesize_dump(fixtures::curve_spec({1.0, 1.0, 1.0}, 8, 16), 5);
  for (const Tensor& h : data.hidden) {
    const MatrixView m = h.matrix();
    const oracle::Matrix rows = oracle::to_matrix(h.data, m.rows(), m.cols());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(oracle::cosine(rows[0], rows[i]) == Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("similarity_curve shape cases") {
  fixtures::TempDir dir;
  fixtures::Rng rng(8);
  DumpData data = fixtures::random_dump_data(rng, {.layers = 3, .tokens = 6, .dim = 8, .heads = 2, .vocab = 8});

  SUBCASE("identical layers give a constant curve") {
    for (auto& h : data.hidden) h = data.hidden[0];
    write_dump(data, dir.path());
    const Dump dump = Dump::open(dir.path());
    for (CurveKind kind : {CurveKind::Inter, CurveKind::IntraVisual, CurveKind::IntraText}) {
      const SimilarityCurve c = similarity_curve(dump, kind);
      for (double v : c.values) CHECK(v == c.values[0]);
    }
  }
  SUBCASE("orthogonal visual rows at layer 0") {
    auto& h0 = data.hidden[0].data;
    std::fill(h0.begin(), h0.begin() + 3 * 8, 0.0f);
    for (std::size_t i = 0; i < 3; ++i) h0[i * 8 + i] = 2.0f;
    write_dump(data, dir.path());
    const SimilarityCurve c = similarity_curve(Dump::open(dir.path()), CurveKind::IntraVisual);
    CHECK(c.values.size() == 4);
    CHECK(c.values[0] == 0.0);
  }
  SUBCASE("zero vector names the layer") {
    std::fill(data.hidden[2].data.begin(), data.hidden[2].data.begin() + 8, 0.0f);
    write_dump(data, dir.path());
    try {
      similarity_curve(Dump::open(dir.path()), CurveKind::Inter);
      FAIL("zero vector accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroVector);
      CHECK(e.detail().find("layer 2") != std::string::npos);
    }
  }
}

TEST_CASE("similarity_curve is bitwise identical across thread counts") {
  fixtures::TempDir dir;
  fixtures::Rng rng(9);
  write_dump(fixtures::random_dump_data(rng, {.layers = 9, .tokens = 16, .dim = 32, .heads = 4, .vocab = 8}),
             dir.path());
  const Dump dump = Dump::open(dir.path());
  for (CurveKind kind : {CurveKind::Inter, CurveKind::IntraVisual, CurveKind::IntraText}) {
    const auto ref = similarity_curve(dump, kind, 1).values;
    for (unsigned threads : {2u, 3u, 8u}) CHECK(similarity_curve(dump, kind, threads).values == ref);
  }
}

TEST_CASE("aggregate_curves") {
  SUBCASE("single curve") {
    const std::vector<SimilarityCurve> one{curve_of({0.1, 0.4, -0.2})};
    const SimilarityCurve agg = aggregate_curves(one);
    CHECK(agg.values == one[0].values);
    REQUIRE(agg.stddev);
    CHECK(*agg.stddev == std::vector<double>{0, 0, 0});
    CHECK(agg.sample_count == 1);
  }
  SUBCASE("two constant curves") {
    const std::vector<SimilarityCurve> two{curve_of({0, 0, 0}), curve_of({1, 1, 1})};
    const SimilarityCurve agg = aggregate_curves(two);
    CHECK(agg.values == std::vector<double>{0.5, 0.5, 0.5});
    CHECK(*agg.stddev == std::vector<double>{0.5, 0.5, 0.5});
    CHECK(agg.sample_count == 2);
  }
  SUBCASE("ten random curves against the summation oracle") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<SimilarityCurve> curves;
    std::vector<std::vector<double>> raw;
    for (int i = 0; i < 10; ++i) {
      std::vector<double> v(33);
      for (double& x : v) x = u(rng);
      raw.push_back(v);
      curves.push_back(curve_of(v));
    }
    const SimilarityCurve agg = aggregate_curves(curves);
    const oracle::MeanSigma ref = oracle::mean_sigma(raw);
    for (std::size_t l = 0; l < 33; ++l) {
      CHECK(std::abs(agg.values[l] - ref.mean[l]) < 1e-12);
      CHECK(std::abs((*agg.stddev)[l] - ref.sigma[l]) < 1e-12);
    }
  }
  SUBCASE("errors") {
    const std::vector<SimilarityCurve> mixed{curve_of({0, 1}), curve_of({0, 1}, CurveKind::IntraText)};
    CHECK(code_of([&] { aggregate_curves(mixed); }) == ErrorCode::MixedKinds);
    const std::vector<SimilarityCurve> ragged{curve_of({0, 1}), curve_of({0, 1, 2})};
    CHECK(code_of([&] { aggregate_curves(ragged); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([] { aggregate_curves({}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("curve_to_csv") {
  SimilarityCurve c = curve_of({0.5, 0.25});
  c.stddev = std::vector<double>{0.0, 0.125};
  c.sample_count = 3;
  CHECK(curve_to_csv(c) == "layer,value,stddev,sample_count\n0,0.5,0,3\n1,0.25,0.125,3\n");
}

TEST_CASE("segment_phases: four-phase curve on 32 layers") {
  const PhaseDiagram d = segment_phases(fixtures::four_phase_curve(32, 3, 10, 28));
  CHECK(d.boundaries == std::vector<std::size_t>{3, 10, 28});
  CHECK(d.canonical);
  REQUIRE(d.phases.size() == 4);
  const PhaseLabel labels[] = {PhaseLabel::I, PhaseLabel::II, PhaseLabel::III, PhaseLabel::IV};
  for (std::size_t k = 0; k < 4; ++k) CHECK(d.phases[k].label == labels[k]);
  CHECK(d.phases.front().start == 0);
  CHECK(d.phases.back().end == 32);
}

TEST_CASE("segment_phases: strictly increasing curve") {
  std::vector<double> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i);
  const PhaseDiagram d = segment_phases(v);
  REQUIRE(d.phases.size() == 1);
  CHECK(d.phases[0].direction == Direction::Rising);
  CHECK_FALSE(d.canonical);
  CHECK_FALSE(d.phases[0].label.has_value());
  CHECK(d.boundaries.empty());
}

TEST_CASE("segment_phases: flat curve and deadband") {
  const PhaseDiagram flat = segment_phases(std::vector<double>(8, 0.3));
  CHECK(flat.phases.size() == 1);

  // A dip smaller than the deadband is absorbed into the surrounding rise.
  std::vector<double> v{0.0, 0.1, 0.2, 0.3, 0.299, 0.4, 0.5, 0.6};
  const PhaseDiagram d = segment_phases(v, {.smooth_window = 1, .deadband = 0.002, .target_phases = 4});
  CHECK(d.phases.size() == 1);
  // Leading flat steps take the first decisive direction.
  const PhaseDiagram lead = segment_phases(std::vector<double>{0.2, 0.2, 0.2, 0.5, 0.8, 0.5, 0.2},
                                           {.smooth_window = 1, .deadband = 0.002, .target_phases = 4});
  CHECK(lead.boundaries == std::vector<std::size_t>{4});
  CHECK(lead.phases[0].direction == Direction::Rising);
}

TEST_CASE("segment_phases: merging reduces to target_phases") {
  // Zig-zag with one small wiggle: six runs before merging.
  const std::vector<double> v{0.0, 0.3, 0.6, 0.55, 0.6, 0.3, 0.0, 0.3, 0.6, 0.3, 0.0};
  const PhaseConfig cfg{.smooth_window = 1, .deadband = 0.002, .target_phases = 4};
  const PhaseDiagram d = segment_phases(v, cfg);
  CHECK(d.phases.size() == 4);
  CHECK(d.canonical);
  CHECK(d.boundaries == std::vector<std::size_t>{4, 6, 8});

  const PhaseDiagram two = segment_phases(v, {.smooth_window = 1, .deadband = 0.002, .target_phases = 2});
  CHECK(two.phases.size() <= 2);
}

TEST_CASE("segment_phases: errors") {
  CHECK(code_of([] { segment_phases(std::vector<double>{0, 1, 2, 3}); }) == ErrorCode::TooShort);
  CHECK(code_of([] { segment_phases(std::vector<double>(10, 0.0), {.smooth_window = 2}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("segment_phases properties on noisy planted curves") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  const double eps = PhaseConfig{}.deadband;
  std::uniform_real_distribution<double> noise(-eps / 2, eps / 2);
  std::uniform_int_distribution<std::size_t> pick(0, 1000);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 24 + pick(rng) % 17;
    const std::size_t a = 3 + pick(rng) % 3;
    const std::size_t b = a + 5 + pick(rng) % 4;
    const std::size_t c = L - 3 - pick(rng) % 3;
    std::vector<double> v = fixtures::four_phase_curve(L, a, b, c);
    for (double& x : v) x += noise(rng);
    const PhaseDiagram d = segment_phases(v);

    REQUIRE(d.boundaries.size() == 3);
    CHECK(d.canonical);
    const std::size_t planted[] = {a, b, c};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto diff = static_cast<long>(d.boundaries[k]) - static_cast<long>(planted[k]);
      CHECK(std::labs(diff) <= 1);
    }

    // Phases partition [0, L] and alternate.
    CHECK(d.phases.front().start == 0);
    CHECK(d.phases.back().end == L);
    for (std::size_t k = 1; k < d.phases.size(); ++k) {
      CHECK(d.phases[k].start == d.phases[k - 1].end);
      CHECK(d.phases[k].direction != d.phases[k - 1].direction);
    }

    // A constant offset leaves the boundaries alone.
    const double offset = shift(rng);
    std::vector<double> moved = v;
    for (double& x : moved) x += offset;
    CHECK(segment_phases(moved).boundaries == d.boundaries);
  }
}

TEST_CASE("phase_diagram_to_json") {
  const PhaseDiagram d = segment_phases(fixtures::four_phase_curve(32, 3, 10, 28));
  const auto doc = nlohmann::json::parse(phase_diagram_to_json(d));
  CHECK(doc["boundaries"] == nlohmann::json::array({3, 10, 28}));
  CHECK(doc["canonical"] == true);
  CHECK(doc["phases"][1]["direction"] == "falling");
  CHECK(doc["phases"][1]["label"] == "II");
  CHECK(doc["phases"][3]["end"] == 32);

  std::vector<double> up(8);
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = static_cast<double>(i);
  CHECK(nlohmann::json::parse(phase_diagram_to_json(segment_phases(up)))["phases"][0]["label"].is_null());
}
