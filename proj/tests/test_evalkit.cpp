#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "acdf/errors.hpp"
#include "acdf/evalkit.hpp"
#include "doctest.h"

using namespace acdf;

namespace {

EvalSample sample(double pu, double pv, double ou, double ov, TerrainClass c = TerrainClass::kFlat) {
  return {pu, pv, ou, ov, c};
}

}  // namespace

TEST_CASE("speed errors") {
  const SpeedErrors same = speed_errors(std::vector<double>{3.0, 7.0}, std::vector<double>{3.0, 7.0});
  CHECK(same.mae.mean == 0.0);
  CHECK(same.me.mean == 0.0);

  const SpeedErrors e = speed_errors(std::vector<double>{3.0, 5.0}, std::vector<double>{4.0, 4.0});
  CHECK(e.mae.mean == 1.0);
  CHECK(e.me.mean == 0.0);
  CHECK(e.me.std == 1.0);
  CHECK(e.mae.std == 0.0);

  const SpeedErrors b = speed_errors(std::vector<double>{12.0, 7.0, 2.0}, std::vector<double>{10.0, 5.0, 0.0});
  CHECK(b.mae.mean == 2.0);
  CHECK(b.me.mean == 2.0);
  CHECK_THROWS_AS(speed_errors(std::vector<double>{1.0}, std::vector<double>{}), ShapeError);

  std::mt19937 rng(3);
  std::normal_distribution<double> n(10.0, 4.0);
  std::vector<double> p(500), o(500);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::abs(n(rng));
    o[i] = std::abs(n(rng));
  }
  const SpeedErrors r = speed_errors(p, o);
  CHECK(r.mae.mean >= std::abs(r.me.mean));
  std::reverse(p.begin(), p.end());
  std::reverse(o.begin(), o.end());
  CHECK(speed_errors(p, o).mae.mean == doctest::Approx(r.mae.mean).epsilon(1e-12));
}

TEST_CASE("direction errors") {
  CHECK(direction_error(10.0, 350.0) == doctest::Approx(20.0));
  CHECK(direction_error(90.0, 270.0) == 180.0);
  CHECK(direction_error(45.0, 45.0) == 0.0);
  CHECK(wind_direction_deg(0.0, 5.0) == 0.0);
  CHECK(wind_direction_deg(5.0, 0.0) == doctest::Approx(90.0));
  CHECK(wind_direction_deg(-5.0, 0.0) == doctest::Approx(270.0));

  // Directions 10 and 350 degrees built from unit vectors.
  auto vec = [](double deg, double s) {
    const double r = deg * M_PI / 180.0;
    return std::array<double, 2>{s * std::sin(r), s * std::cos(r)};
  };
  const DirectionErrors d = direction_mae({vec(10, 5), vec(90, 5), vec(0, 5)}, {vec(350, 5), vec(270, 5), vec(0, 0.2)});
  CHECK(d.count == 2);
  CHECK(d.mae.mean == doctest::Approx(100.0));
  CHECK_THROWS_AS(direction_mae({vec(10, 5)}, {vec(10, 0.1)}), EmptySetError);

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> a(-1000.0, 1000.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = direction_error(a(rng), a(rng));
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
  }
}

TEST_CASE("stratify") {
  std::vector<EvalSample> flat{sample(5, 0, 4, 0), sample(0, 9, 0, 12), sample(3, 3, 2, 2)};
  const MetricsReport r = stratify(flat);
  CHECK(r.terrain.at("valley").sample_count == 0);
  CHECK(r.terrain.at("ridge").sample_count == 0);
  CHECK(r.terrain.at("flat").mae_spd.mean == r.mae_spd.mean);
  CHECK(r.wind.at("all").sample_count == 3);
  CHECK(r.wind.at(">20").sample_count == 0);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  std::uniform_int_distribution<int> c(0, 2);
  std::vector<EvalSample> mixed;
  for (int i = 0; i < 400; ++i) mixed.push_back(sample(u(rng), u(rng), u(rng), u(rng), static_cast<TerrainClass>(c(rng))));
  const MetricsReport m = stratify(mixed, default_wind_bins(15.0));
  std::size_t total = 0;
  double weighted = 0.0;
  for (const auto& [name, sub] : m.terrain) {
    total += sub.sample_count;
    weighted += sub.mae_spd.mean * sub.sample_count;
  }
  CHECK(total == m.sample_count);
  CHECK(weighted / total == doctest::Approx(m.mae_spd.mean));
  CHECK(m.wind.count(">15") == 1);
  CHECK(m.mae_spd.mean >= std::abs(m.me_spd.mean));

  const auto j = m.to_json();
  CHECK(j["terrain"]["ridge"]["sample_count"].get<std::size_t>() == m.terrain.at("ridge").sample_count);
  CHECK(j["std_pooling"] == "station x time");
}

TEST_CASE("improvement") {
  CHECK(improvement(2.245, 1.374) == doctest::Approx(38.8).epsilon(0.002));
  CHECK(std::round(improvement(2.245, 1.374) * 10) / 10 == 38.8);
  CHECK(improvement(2.0, 2.0) == 0.0);
  CHECK(improvement(3.0, 1.5) == 50.0);
  CHECK_THROWS_AS(improvement(0.0, 1.0), InvalidArgumentError);
}

TEST_CASE("LOSO folds") {
  const std::vector<std::string> ids{"E1", "E2", "E3", "E4", "E5"};
  const auto folds = make_loso_folds(ids, 0.15, 42);
  REQUIRE(folds.size() == 5);
  std::set<std::string> held;
  for (const auto& f : folds) {
    held.insert(f.held_out);
    CHECK(std::find(f.train_events.begin(), f.train_events.end(), f.held_out) == f.train_events.end());
    CHECK(f.train_events.size() == 4);
  }
  CHECK(held.size() == 5);
  CHECK_THROWS_AS(make_loso_folds({"E1"}, 0.15, 1), InvalidArgumentError);

  std::vector<std::string> samples;
  for (const auto& id : ids)
    for (int k = 0; k < 13; ++k) samples.push_back(id);
  const FoldSplit s = split_samples(folds[2], samples);
  CHECK(s.test.size() == 13);
  CHECK(s.validation.size() == 8);  // round(0.15 * 52)
  CHECK(s.train.size() == 44);
  for (std::size_t i : s.train) CHECK(samples[i] != "E3");
  for (std::size_t i : s.validation) CHECK(samples[i] != "E3");
  const FoldSplit again = split_samples(make_loso_folds(ids, 0.15, 42)[2], samples);
  CHECK(again.train == s.train);
  CHECK(again.validation == s.validation);
}

TEST_CASE("table and histogram rendering") {
  MetricsReport a;
  a.sample_count = 10;
  a.mae_spd = {2.245, 1.0};
  a.me_spd = {1.584, 2.0};
  a.mae_dir = MeanStd{43.314, 40.0};
  MetricsReport b = a;
  b.mae_spd = {1.374, 0.9};
  const std::string t = render_table({{"E1", "raw", a, std::nullopt}, {"E1", "full", b, improvement(a, b)}});
  CHECK(t.find("MAE_spd (m/s)") != std::string::npos);
  CHECK(t.find("2.245 +/- 1.000") != std::string::npos);
  CHECK(t.find("38.8") != std::string::npos);

  const std::string h = histogram_csv({"obs", "raw"}, {{0.5, 1.5, 1.7, 70.0}, {}}, 1.0, 3.0);
  CHECK(h == "bin_lo,bin_hi,obs,raw\n0,1,0.25,0\n1,2,0.5,0\n2,3,0.25,0\n");
}
