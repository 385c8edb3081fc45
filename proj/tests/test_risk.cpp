#include <cmath>
#include <random>

#include "acdf/errors.hpp"
#include "acdf/risk.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace acdf;

namespace {

const TimePoint kT0 = parse_utc("2020-08-04T00:00:00Z");

// Closed-form cumulative probability under a time-invariant lognormal
// capacity: Phi of the running maximum of the standardized margin.
std::vector<double> analytic_oracle(const TowerExposure& e, const FragilityTable& table) {
  std::vector<double> out;
  double best = -INFINITY;
  for (std::size_t t = 0; t < e.steps(); ++t) {
    if (e.speed[t] > 0.0) {
      const FragilityParams p = fragility_params(table, e.angle[t]);
      best = std::max(best, (std::log(e.speed[t]) - p.mu) / p.sigma);
    }
    out.push_back(std::isinf(best) ? 0.0 : 0.5 * std::erfc(-best / std::sqrt(2.0)));
  }
  return out;
}

TowerExposure random_exposure(std::mt19937& rng, std::size_t steps) {
  std::uniform_real_distribution<double> v(5.0, 40.0), a(0.0, 90.0);
  TowerExposure e;
  for (std::size_t t = 0; t < steps; ++t) {
    e.speed.push_back(v(rng));
    e.angle.push_back(a(rng));
  }
  return e;
}

WindField uniform_wind(const GridSpec& g, std::size_t hours, double u, double v) {
  WindField f(g, hourly_times(kT0, hours));
  for (std::size_t k = 0; k < f.data.size(); k += 2) {
    f.data[k] = u;
    f.data[k + 1] = v;
  }
  return f;
}

}  // namespace

TEST_CASE("attack angle folding") {
  CHECK(attack_angle(90.0, 90.0) == 0.0);
  CHECK(attack_angle(0.0, 90.0) == 90.0);
  CHECK(attack_angle(210.0, 90.0) == doctest::Approx(60.0));
  CHECK(attack_angle(350.0, 10.0) == doctest::Approx(20.0));
  CHECK(attack_angle(270.0, 90.0) == doctest::Approx(0.0));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-720.0, 720.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = attack_angle(d(rng), d(rng));
    CHECK(a >= 0.0);
    CHECK(a <= 90.0);
  }
}

TEST_CASE("fragility table defaults and interpolation") {
  const FragilityTable t = FragilityTable::defaults();
  CHECK(fragility_params(t, 45.0).mu == 3.219);
  CHECK(fragility_params(t, 45.0).sigma == 0.03);
  CHECK(fragility_params(t, 0.0).mu == 2.708);
  CHECK(fragility_params(t, 15.0).mu == doctest::Approx((2.708 + 2.996) / 2).epsilon(1e-14));
  CHECK(fragility_params(t, 90.0).mu == 3.555);
  CHECK_THROWS_AS(fragility_params(t, 90.5), RangeError);
  CHECK_THROWS_AS(fragility_params(t, -1.0), RangeError);

  const FragilityTable back = FragilityTable::from_json(nlohmann::json::parse(t.to_json().dump()));
  CHECK(back.mu == t.mu);
  nlohmann::json bad = t.to_json();
  bad["sigma"][2] = 0.0;
  CHECK_THROWS_AS(FragilityTable::from_json(bad), InvalidArgumentError);
  CHECK_THROWS_AS(FragilityTable::from_json(nlohmann::json{{"angles", {0, 90}}}), FormatError);
}

TEST_CASE("marginal failure probability") {
  const FragilityTable t = FragilityTable::defaults();
  for (std::size_t i = 0; i < t.angles.size(); ++i) {
    CHECK(std::abs(marginal_failure_prob(std::exp(t.mu[i]), t.angles[i]) - 0.5) <= 1e-6);
  }
  CHECK(marginal_failure_prob(25.0, 45.0) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(marginal_failure_prob(25.0, 45.0) - 0.5) <= 0.02);
  CHECK(std::abs(marginal_failure_prob(15.0, 0.0) - 0.5) <= 1e-2);
  CHECK(marginal_failure_prob(0.0, 30.0) == 0.0);

  // Monotone in speed, and non-increasing in angle for the default table.
  for (double v = 1.0; v < 60.0; v += 0.5) {
    CHECK(marginal_failure_prob(v + 0.5, 30.0) >= marginal_failure_prob(v, 30.0));
    for (double a = 0.0; a < 90.0; a += 5.0) CHECK(marginal_failure_prob(v, a + 5.0) <= marginal_failure_prob(v, a));
  }
}

TEST_CASE("conditional failure and survival update") {
  CHECK(conditional_failure(0.0, 26.0, 45.0));
  CHECK_FALSE(conditional_failure(0.0, 24.0, 45.0));
  CHECK_FALSE(conditional_failure(-5.0, 0.0, 45.0));
  CHECK(conditional_failure(1.0, std::exp(3.219 + 0.03 * 1.0) * 1.0001, 45.0));

  CHECK(survival_update(0.0, 0.3) == 0.3);
  CHECK(survival_update(0.5, 0.5) == 0.75);
  CHECK(survival_update(1.0, 0.2) == 1.0);
  CHECK_THROWS_AS(survival_update(1.2, 0.1), RangeError);
  CHECK_THROWS_AS(survival_update(0.2, -0.1), RangeError);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + trial % 12);
    for (double& x : p) x = u(rng);
    double fwd = 0.0, rev = 0.0, prod = 1.0;
    for (double x : p) {
      fwd = survival_update(fwd, x);
      prod *= 1.0 - x;
    }
    for (auto it = p.rbegin(); it != p.rend(); ++it) rev = survival_update(rev, *it);
    CHECK(fwd == doctest::Approx(1.0 - prod).epsilon(1e-12));
    CHECK(rev == doctest::Approx(fwd).epsilon(1e-12));
  }
}

TEST_CASE("tower_risk_mc agrees with the analytic oracle") {
  const FragilityTable t = FragilityTable::defaults();
  TowerExposure calm{std::vector<double>(12, 0.0), std::vector<double>(12, 30.0)};
  for (double p : tower_risk_mc(calm, t, 1000, 1)) CHECK(p == 0.0);

  TowerExposure median{{std::exp(3.219)}, {45.0}};
  CHECK(std::abs(tower_risk_mc(median, t, 100000, 3)[0] - 0.5) <= 0.005);

  TowerExposure seq{{20.0, 30.0, 25.0}, {45.0, 45.0, 45.0}};
  const auto p = tower_risk_mc(seq, t, 100000, 4);
  CHECK(p[0] <= p[1]);
  CHECK(p[1] <= p[2]);
  CHECK(p[2] == doctest::Approx(analytic_oracle(seq, t)[2]).epsilon(1e-9));

  // Steps sharing a running maximum share the same samples, so the 3-sigma
  // band is checked once per distinct value; at 99.7% coverage a couple of
  // misses among the distinct values are expected by chance.
  std::mt19937 rng(21);
  int outside_band = 0, distinct = 0;
  for (int k = 0; k < 20; ++k) {
    const TowerExposure e = random_exposure(rng, 12);
    const auto mc = tower_risk_mc(e, t, 100000, 100 + k);
    const auto exact = analytic_oracle(e, t);
    for (std::size_t s = 0; s < 12; ++s) {
      CHECK(std::abs(mc[s] - exact[s]) <= 0.005);
      if (s > 0 && exact[s] == exact[s - 1]) continue;
      ++distinct;
      const double band = 3.0 * std::sqrt(exact[s] * (1.0 - exact[s]) / 100000.0) + 1.0 / 100000.0;
      if (std::abs(mc[s] - exact[s]) > band) ++outside_band;
    }
  }
  CHECK(distinct >= 40);
  CHECK(outside_band <= 2);

  CHECK(tower_risk_mc(seq, t, 5000, 9) == tower_risk_mc(seq, t, 5000, 9));
  CHECK_THROWS_AS(tower_risk_mc(seq, t, 0, 1), InvalidArgumentError);
}

TEST_CASE("line risk") {
  const auto l = line_risk_independent({{0.1}, {0.2}});
  CHECK(l[0] == doctest::Approx(0.28).epsilon(1e-14));
  CHECK(line_risk_independent({{0.3, 1.0}, {0.1, 0.2}})[1] == 1.0);
  CHECK_THROWS_AS(line_risk_independent({{0.1, 0.2}, {0.1}}), ShapeError);

  SUBCASE("property: monotone and bounded") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t towers = 2 + trial % 7, steps = 1 + trial % 12;
      std::vector<std::vector<double>> probs(towers);
      for (auto& p : probs) {
        double acc = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
          acc = survival_update(acc, u(rng));
          p.push_back(acc);
        }
      }
      const auto line = line_risk_independent(probs);
      for (std::size_t s = 0; s < steps; ++s) {
        double mx = 0.0, sum = 0.0;
        for (const auto& p : probs) {
          mx = std::max(mx, p[s]);
          sum += p[s];
        }
        CHECK(line[s] >= mx);
        CHECK(line[s] <= std::min(1.0, sum));
        if (s > 0) CHECK(line[s] >= line[s - 1]);
      }
    }
  }

  SUBCASE("perfect correlation collapses to the weakest tower") {
    const FragilityTable t = FragilityTable::defaults();
    TowerExposure a{{20.0, 24.0, 23.0}, {45.0, 45.0, 45.0}};
    TowerExposure b{{19.0, 22.0, 26.0}, {45.0, 60.0, 45.0}};
    const auto joint = line_risk_correlated({a, b}, t, 1.0, 100000, 8);
    const auto oa = analytic_oracle(a, t), ob = analytic_oracle(b, t);
    for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(joint[s] - std::max(oa[s], ob[s])) <= 0.005);

    const auto indep = line_risk_correlated({a, b}, t, 0.0, 100000, 8);
    const auto formula = line_risk_independent({oa, ob});
    for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(indep[s] - formula[s]) <= 0.006);
    CHECK_THROWS_AS(line_risk_correlated({a, b}, t, 1.5, 10, 1), RangeError);
  }
}

TEST_CASE("risk_forecast over a network") {
  const GridSpec g = GridSpec::from_bounds(118.0, 118.2, 28.0, 28.2, 0.005);
  Network net;
  add_line(net, "L1", {{28.05, 118.05}, {28.05, 118.06}, {28.05, 118.07}});
  add_line(net, "L2", {{28.15, 118.10}, {28.16, 118.10}});
  RiskConfig cfg;
  cfg.mc_samples = 20000;

  const RiskSeries calm = risk_forecast(uniform_wind(g, 6, 0.0, 0.0), net, FragilityTable::defaults(), cfg);
  for (const auto& p : calm.tower_probs)
    for (double x : p) CHECK(x == 0.0);
  CHECK_FALSE(calm.flagged(0));
  CHECK_FALSE(calm.flagged(1));

  // 36 m/s from the south: perpendicular to the east-west line L1.
  WindField storm = uniform_wind(g, 6, 0.0, 36.0);
  const RiskSeries r = risk_forecast(storm, net, FragilityTable::defaults(), cfg);
  CHECK(r.line_probs[0].back() >= 0.99);
  CHECK(r.flagged(0));
  CHECK(r.first_exceed(0) == std::optional<std::size_t>(0));
  CHECK(r.tower_ids[0] == "L1-T001");

  SUBCASE("sub-hourly steps keep the cumulative probability") {
    RiskConfig fine = cfg;
    fine.substeps_per_hour = 6;
    const RiskSeries s = risk_forecast(storm, net, FragilityTable::defaults(), fine);
    CHECK(s.times.size() == 36);
    CHECK(s.times.back() == r.times.back());
    for (std::size_t h = 0; h < 6; ++h) CHECK(s.line_probs[1][h * 6 + 5] == r.line_probs[1][h]);
  }

  SUBCASE("outputs") {
    const std::string csv = risk_csv(r);
    CHECK(csv.rfind("kind,id,time,probability\n", 0) == 0);
    CHECK(csv.find("line,L1,2020-08-04T00:00:00Z,") != std::string::npos);
    const nlohmann::json gj = nlohmann::json::parse(risk_geojson(r, net).dump());
    CHECK(gj["type"] == "FeatureCollection");
    CHECK(gj["features"].size() == 2);
    CHECK(gj["features"][0]["geometry"]["type"] == "LineString");
    CHECK(gj["features"][0]["properties"]["flagged"] == true);
    CHECK(gj["features"][0]["properties"]["first_exceed_time"] == "2020-08-04T00:00:00Z");
    CHECK(format_number(0.123456789) == "0.123457");
  }

  SUBCASE("towers outside the field are listed") {
    Network far = net;
    add_line(far, "L9", {{29.0, 118.1}, {29.0, 118.11}});
    CHECK_THROWS_WITH_AS(risk_forecast(storm, far, FragilityTable::defaults(), cfg),
                         doctest::Contains("L9-T001"), OutOfDomainError);
  }
}
