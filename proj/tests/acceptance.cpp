// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails or overruns its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "acdf/config.hpp"
#include "acdf/corrector.hpp"
#include "acdf/downscaler.hpp"
#include "acdf/evalkit.hpp"
#include "acdf/grid_io.hpp"
#include "acdf/pipeline.hpp"
#include "acdf/resample.hpp"
#include "acdf/risk.hpp"
#include "acdf/scenario.hpp"
#include "acdf/terrain.hpp"

using namespace acdf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string fmt(const char* pattern, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

void set_threads(int n) { setenv("ACDF_THREADS", std::to_string(n).c_str(), 1); }

// --- independent oracles ----------------------------------------------------

// Table of lognormal capacities, interpolated linearly in angle.
const double kAngles[] = {0.0, 30.0, 45.0, 60.0, 90.0};
const double kMu[] = {2.708, 2.996, 3.219, 3.401, 3.555};
const double kSigma = 0.03;

double oracle_mu(double theta) {
  for (int i = 0; i < 4; ++i) {
    if (theta <= kAngles[i + 1]) {
      const double w = (theta - kAngles[i]) / (kAngles[i + 1] - kAngles[i]);
      return kMu[i] + w * (kMu[i + 1] - kMu[i]);
    }
  }
  return kMu[4];
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double oracle_margin(double v, double theta) { return (std::log(v) - oracle_mu(theta)) / kSigma; }

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

RunConfig scenario_config(const json& extra) {
  json j = {{"scenario", {{"stations", 80}}}};
  j.merge_patch(extra);
  return RunConfig::from_json(j);
}

// --- criteria ---------------------------------------------------------------

Outcome fragility_medians() {
  const FragilityTable t = FragilityTable::defaults();
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    worst = std::max(worst, std::abs(marginal_failure_prob(std::exp(kMu[i]), kAngles[i], t) - 0.5));
  }
  const double p25 = marginal_failure_prob(25.0, 45.0, t);
  return {worst <= 1e-6 && std::abs(p25 - 0.5) <= 0.02,
          fmt("max |p(e^mu)-0.5| = %.2e (<= 1e-6), p(25 m/s, 45 deg) = %.4f (0.5 +/- 0.02)", worst, p25)};
}

Outcome mc_analytic_agreement() {
  const FragilityTable t = FragilityTable::defaults();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> v(5.0, 40.0), a(0.0, 90.0);
  double worst = 0.0;
  for (int seq = 0; seq < 20; ++seq) {
    TowerExposure e;
    for (int k = 0; k < 12; ++k) {
      e.speed.push_back(v(rng));
      e.angle.push_back(a(rng));
    }
    const auto mc = tower_risk_mc(e, t, 100000, 1000 + static_cast<std::uint64_t>(seq));
    double best = -INFINITY;
    for (int k = 0; k < 12; ++k) {
      best = std::max(best, oracle_margin(e.speed[static_cast<std::size_t>(k)], e.angle[static_cast<std::size_t>(k)]));
      worst = std::max(worst, std::abs(mc[static_cast<std::size_t>(k)] - phi(best)));
    }
  }
  return {worst <= 0.005, fmt("max |MC - Phi(max margin)| = %.5f over 20 x 12 steps (<= 0.005)", worst)};
}

Outcome monotonicity_and_bounds() {
  const FragilityTable t = FragilityTable::defaults();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> v(5.0, 45.0), a(0.0, 90.0), u01(0.0, 1.0);
  std::uniform_int_distribution<int> towers(2, 6);
  std::size_t violations = 0, cases = 0;
  double worst_compose = 0.0;
  for (int c = 0; c < 1000; ++c, ++cases) {
    const int n = towers(rng);
    std::vector<TowerExposure> ex(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> probs;
    for (auto& e : ex) {
      for (int k = 0; k < 12; ++k) {
        e.speed.push_back(v(rng));
        e.angle.push_back(a(rng));
      }
      probs.push_back(tower_risk_mc(e, t, 2000, rng()));
    }
    const auto line = line_risk_independent(probs);
    const auto corr = line_risk_correlated(ex, t, 0.5, 2000, rng());
    for (std::size_t k = 0; k < 12; ++k) {
      double mx = 0.0, sum = 0.0;
      for (const auto& p : probs) {
        mx = std::max(mx, p[k]);
        sum += p[k];
        if (k > 0 && p[k] < p[k - 1]) ++violations;
      }
      if (line[k] < mx || line[k] > std::min(1.0, sum)) ++violations;
      if (k > 0 && (line[k] < line[k - 1] || corr[k] < corr[k - 1])) ++violations;
      if (corr[k] < 0.0 || corr[k] > 1.0) ++violations;
    }
    // Survival recursion against the closed-form product.
    double p = 0.0, survive = 1.0;
    for (int k = 0; k < 12; ++k) {
      const double inst = u01(rng);
      p = survival_update(p, inst);
      survive *= 1.0 - inst;
      worst_compose = std::max(worst_compose, std::abs(p - (1.0 - survive)));
    }
  }
  return {violations == 0 && worst_compose <= 1e-12,
          fmt("%.0f random cases, %.0f ordering/bound violations, survival composition error %.1e", double(cases),
              double(violations), worst_compose)};
}

Outcome residual_identities() {
  const RunConfig cfg = scenario_config(json::object());
  const ScenarioData s = build_scenario(cfg);
  const SyntheticEvent& e = s.events[0];
  const TimePoint issue = e.forecast_coarse.times[8];
  const ForecastCycle cycle = make_cycle(e.forecast_coarse, e.truth_coarse, issue);
  const WindField out = apply_correction(CorrectorModel::zero(cycle.horizon), cycle);
  double corr_err = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    corr_err = std::max(corr_err, std::abs(out.data[i] - cycle.forecast.data[cycle.forecast.slice_size() * 6 + i]));
  }
  DownscalerModel::Weights w;
  for (int k = 0; k < kDownscalerTermCount; ++k) w[static_cast<std::size_t>(k)] = 0.1 * (k + 1);
  const DownscalerModel ds = freeze(DownscalerModel(w, {}, {}));
  const WindField window = e.forecast_coarse.time_window(8, 4);
  const WindField fine = downscale_field(ds, window, TerrainFeatures(s.region.fine));
  const WindField bl = bilinear_resample(window, s.region.fine);
  double ds_err = 0.0;
  for (std::size_t i = 0; i < fine.data.size(); ++i) ds_err = std::max(ds_err, std::abs(fine.data[i] - bl.data[i]));
  return {corr_err <= 1e-6 && ds_err <= 1e-6,
          fmt("zero corrector max dev %.1e, featureless downscaler vs bilinear max dev %.1e (<= 1e-6)", corr_err, ds_err)};
}

Outcome gradient_correctness() {
  const RunConfig cfg = scenario_config(json::object());
  const ScenarioData s = build_scenario(cfg);
  const DownscalerModel ds = train_downscaler(s.region, {&s.events[0]}, cfg.downscaler);
  CycleSet set;
  append_cycles(set, s.events[1], 6, 12, 4);
  const CorrectorObjective obj(set.cycles, set.labels, ds, s.region.features, kDefaultAlpha);
  const std::size_t n = obj.parameter_count();

  auto rel_error = [&](const std::vector<double>& theta) {
    std::vector<double> g;
    obj.gradient(theta, g);
    double num = 0.0, den = 0.0;
    std::vector<double> p = theta;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
      p[i] = theta[i] + h;
      const double up = obj.value(p);
      p[i] = theta[i] - h;
      const double down = obj.value(p);
      p[i] = theta[i];
      const double fd = (up - down) / (2.0 * h);
      num += (g[i] - fd) * (g[i] - fd);
      den += fd * fd;
    }
    return std::sqrt(num / den);
  };
  const double at_zero = rel_error(std::vector<double>(n, 0.0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  std::vector<double> theta(n);
  for (double& x : theta) x = d(rng);
  const double at_random = rel_error(theta);
  return {at_zero <= 1e-4 && at_random <= 1e-4,
          fmt("relative gradient error %.2e at theta=0, %.2e at a random point (<= 1e-4), %.0f parameters", at_zero,
              at_random, double(n))};
}

Outcome correction_skill() {
  const RunConfig cfg = scenario_config(json::object());
  const EvalResult r = run_eval(cfg, build_scenario(cfg));
  double worst = 1e9;
  std::string folds;
  for (const json& f : r.report["folds"]) {
    const double imp = f["improvement_pct"]["full"];
    worst = std::min(worst, imp);
    folds += " " + f["held_out"].get<std::string>() + "=" + fmt("%.1f%%", imp);
  }
  const double pooled = r.report["pooled"]["improvement_pct"]["full"];
  const double corr_only = r.report["pooled"]["improvement_pct"]["corrected"];
  const double raw = r.report["pooled"]["models"]["raw"]["mae_spd"]["mean"];
  return {pooled >= 60.0 && worst >= 60.0,
          fmt("station speed MAE %.3f m/s raw -> reduction %.1f%% pooled (>= 60%%; corrected-only %.1f%%), per fold:",
              raw, pooled, corr_only) +
              folds};
}

struct DownscalingExperiment {
  Outcome skill;
  Outcome ridge;
};

DownscalingExperiment downscaling_experiment() {
  const RunConfig cfg = scenario_config({{"scenario", {{"truth_coupling", "modulated_upsample"}, {"k_tpi", 0.3}}}});
  const ScenarioData s = build_scenario(cfg);
  DownscalingExperiment out;

  double worst_grid = 0.0, worst_station = 0.0;
  for (std::size_t h = 0; h < s.events.size(); ++h) {
    std::vector<const SyntheticEvent*> train;
    for (std::size_t k = 0; k < s.events.size(); ++k) {
      if (k != h) train.push_back(&s.events[k]);
    }
    const DownscalerModel ds = train_downscaler(s.region, train, cfg.downscaler);
    const SyntheticEvent& test = s.events[h];
    const WindField fitted = downscale_field(ds, test.truth_coarse, s.region.features);
    const WindField base = bilinear_resample(test.truth_coarse, s.region.fine);
    worst_grid = std::max(worst_grid, mse(fitted.data, test.truth_fine.data) / mse(base.data, test.truth_fine.data));
    const StationSeries fs_ = downscale_at_stations(ds, test.truth_coarse, s.region.features, s.region.stations);
    const StationSeries bs = sample_stations(base, s.region.stations);
    worst_station = std::max(worst_station, mse(fs_.data, test.stations.data) / mse(bs.data, test.stations.data));
  }
  out.skill = {worst_grid <= 0.25 && worst_station <= 0.25,
               fmt("held-out MSE / bilinear MSE: grid %.2e, stations %.2e (<= 0.25, worst fold)", worst_grid,
                   worst_station)};

  const EvalResult r = run_eval(cfg, s);
  const json& pooled = r.report["pooled"];
  const json ridge_imp = pooled["ridge_improvement_full_vs_corrected_pct"];
  const json& terrain = pooled["models"]["full"]["terrain"];
  const double ridge_n = terrain.contains("ridge") ? terrain["ridge"]["sample_count"].get<double>() : 0.0;
  const bool ok = !ridge_imp.is_null() && ridge_n > 0 && ridge_imp.get<double>() > 0.0;
  out.ridge = {ok, ridge_imp.is_null() ? std::string("no ridge samples")
                                       : fmt("ridge-stratum MAE improvement of full over corrected-only %.1f%% (> 0) "
                                             "on %.0f samples",
                                             ridge_imp.get<double>(), ridge_n)};
  return out;
}

Outcome risk_discrimination() {
  // One line runs north-south through a storm corridor with winds across the
  // spans; three lines sit in calm air.
  const GridSpec g = GridSpec::from_bounds(118.0, 119.0, 28.0, 29.0, 0.005);
  Network net;
  std::vector<LatLon> corridor;
  for (int k = 0; k < 25; ++k) corridor.push_back({28.2 + 0.02 * k, 118.5});
  add_line(net, "L073", corridor);
  const double calm_lon[] = {118.1, 118.2, 118.85};
  for (int l = 0; l < 3; ++l) {
    std::vector<LatLon> pts;
    for (int k = 0; k < 25; ++k) pts.push_back({28.2 + 0.02 * k, calm_lon[l]});
    add_line(net, "C" + std::to_string(l + 1), pts);
  }
  const TimePoint t0 = parse_utc("2020-08-04T00:00:00Z");
  WindField wind(g, hourly_times(t0, 12));
  for (std::size_t t = 0; t < 12; ++t) {
    const double storm = std::min(38.0, 20.0 + 3.0 * static_cast<double>(t));
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const double d = std::abs(g.lon(x) - 118.5);
        const double w = std::clamp((0.15 - d) / 0.05, 0.0, 1.0);
        wind.at(t, y, x, 0) = w * storm + (1.0 - w) * 8.0;  // westerly, across north-south spans
        wind.at(t, y, x, 1) = 0.0;
      }
  }
  const fs::path dir = fs::temp_directory_path() / "acdf_acceptance_risk";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_wind_field(dir / "wind.acdf", wind);
  write_file(dir / "network.json", network_to_json(net).dump(2));
  RunConfig cfg = RunConfig::from_json(json::object());
  cfg.risk.mc_samples = 10000;
  cmd_risk(cfg, dir / "wind.acdf", dir / "network.json", dir / "out");

  const json gj = json::parse(read_file(dir / "out" / "risk.geojson"));
  const json summary = json::parse(read_file(dir / "out" / "risk_summary.json"));
  const RiskSeries series = risk_forecast(wind, net, cfg.fragility, cfg.risk);
  bool ok = true;
  std::string detail;
  for (std::size_t l = 0; l < series.line_ids.size(); ++l) {
    const auto& p = series.line_probs[l];
    const json& props = gj["features"][l]["properties"];
    if (series.line_ids[l] == "L073") {
      std::size_t reach = p.size();
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] >= 0.99) {
          reach = k;
          break;
        }
      }
      ok = ok && reach + 1 < p.size() && props["flagged"] == true;
      detail += "L073 reaches P>=0.99 at step " + std::to_string(reach + 1) + "/12, flagged; ";
    } else {
      ok = ok && series.line_max(l) <= 0.01 && props["flagged"] == false;
    }
  }
  double calm_max = 0.0;
  for (std::size_t l = 1; l < series.line_ids.size(); ++l) calm_max = std::max(calm_max, series.line_max(l));
  ok = ok && summary["lines"].size() == 4;
  detail += fmt("calm-zone lines max P = %.2e (<= 0.01)", calm_max);
  return {ok, detail};
}

Outcome throughput() {
  set_threads(8);
  // 951 x 851 fine nodes, 39 x 35 coarse nodes.
  const GridSpec coarse = GridSpec::from_bounds(115.0, 119.75, 25.0, 29.25, 0.125);
  const GridSpec fine = GridSpec::from_bounds(115.0, 119.75, 25.0, 29.25, 0.005);
  TerrainSynthParams tp;
  tp.hills = 60;
  tp.ridges = 30;
  const TerrainFeatures features = terrain_features(synthesize_terrain(fine, tp, 9));
  const Network net = generate_network(fine, 100, 100, 0.4, 21);

  EventSpec ev;
  ev.id = "BIG";
  ev.vortex.v_max = 45.0;
  ev.vortex.r_max_km = 35.0;
  const TimePoint t0 = parse_utc("2021-07-20T00:00:00Z");
  ev.vortex.track = {{t0, 25.5, 119.5}, {t0 + 18 * kHour, 28.8, 115.5}};
  ev.bias.gain = 0.8;
  ev.bias.offset = -1.0;
  const WindField truth = generate_vortex(ev.vortex, coarse, hourly_times(t0, 18));
  const WindField fc = apply_bias(truth, ev.bias, 3);
  const ForecastCycle cycle = make_cycle(fc, truth, t0 + 5 * kHour);

  CorrectorModel corr = CorrectorModel::zero(12);
  std::vector<double> theta = corr.flat_weights();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-0.02, 0.02);
  for (double& x : theta) x = d(rng);
  corr.set_flat_weights(theta);
  const DownscalerModel ds =
      freeze(DownscalerModel(DownscalerModel::Weights{0.05, 0.002, 0.5, -0.4, -0.2, 0.02, 0.0005, 0.3, 0.2, -0.05}, {}, {}));
  RiskConfig rc;
  rc.mc_samples = 10000;

  const auto start = std::chrono::steady_clock::now();
  const WindField corrected = apply_correction(corr, cycle);
  const auto t_corr = std::chrono::steady_clock::now();
  const WindField downscaled = downscale_field(ds, corrected, features);
  const auto t_ds = std::chrono::steady_clock::now();
  const RiskSeries risk = risk_forecast(downscaled, net, FragilityTable::defaults(), rc);
  const auto end = std::chrono::steady_clock::now();
  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  const double total = secs(start, end);
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%dx%d fine x %zu h, %zu towers x %zu MC: correction %.2f s, downscaling %.2f s, risk %.2f s, total "
                "%.2f s (<= 120 s, ACDF_THREADS=8 on %u hardware threads)",
                fine.nx, fine.ny, downscaled.time_count(), risk.tower_ids.size(), rc.mc_samples, secs(start, t_corr),
                secs(t_corr, t_ds), secs(t_ds, end), total, std::thread::hardware_concurrency());
  return {total <= 120.0 && risk.tower_ids.size() == 10000, buf};
}

Outcome reproducibility() {
  json small = {{"scenario", {{"stations", 20}, {"network", {{"lines", 4}, {"towers_per_line", 6}}}}},
                {"risk", {{"mc_samples", 5000}}}};
  const RunConfig cfg = RunConfig::from_json(small);
  const fs::path root = fs::temp_directory_path() / "acdf_acceptance_repro";
  fs::remove_all(root);
  auto run_all = [&](int threads, const std::string& tag) {
    set_threads(threads);
    const fs::path d = root / tag;
    std::vector<json> m;
    m.push_back(cmd_synth(cfg, d / "synth"));
    m.push_back(cmd_train(cfg, d / "synth", d / "train", std::string("TC2")));
    m.push_back(cmd_forecast(cfg, d / "synth", d / "train", "TC2", parse_utc("2021-07-20T07:00:00Z"), d / "forecast"));
    m.push_back(cmd_risk(cfg, d / "forecast" / "downscaled_fine.acdf", d / "synth" / "network.json", d / "risk"));
    m.push_back(cmd_eval(cfg, d / "synth", d / "eval"));
    return m;
  };
  const auto a = run_all(1, "t1");
  const auto b = run_all(4, "t4");
  const auto c = run_all(8, "t8");
  std::size_t files = 0, mismatches = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const json& fa = a[k]["files"];
    if (fa.size() != b[k]["files"].size() || fa.size() != c[k]["files"].size()) ++mismatches;
    for (std::size_t i = 0; i < fa.size() && i < b[k]["files"].size() && i < c[k]["files"].size(); ++i) {
      if (fa[i]["sha256"].is_null()) continue;  // wall-clock timing report
      ++files;
      if (fa[i]["sha256"] != b[k]["files"][i]["sha256"] || fa[i]["sha256"] != c[k]["files"][i]["sha256"]) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0 && files > 0,
          fmt("%.0f hashed files from synth/train/forecast/risk/eval identical across ACDF_THREADS=1,4,8 "
              "(%.0f mismatches)",
              double(files), double(mismatches))};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  DownscalingExperiment exp7;
  bool exp7_done = false;
  auto exp7_get = [&]() -> DownscalingExperiment& {
    if (!exp7_done) {
      exp7 = downscaling_experiment();
      exp7_done = true;
    }
    return exp7;
  };

  const std::vector<Criterion> criteria = {
      {1, "fragility medians", 1.0, fragility_medians},
      {2, "MC-analytic agreement", 30.0, mc_analytic_agreement},
      {3, "monotonicity and series bounds", 10.0, monotonicity_and_bounds},
      {4, "residual identities", 60.0, residual_identities},
      {5, "gradient correctness", 60.0, gradient_correctness},
      {6, "correction skill on synthetic bias", 300.0, correction_skill},
      {7, "downscaling skill", 300.0, [&] { return exp7_get().skill; }},
      {8, "terrain stratification sanity", 300.0, [&] { return exp7_get().ridge; }},
      {9, "end-to-end risk discrimination", 120.0, risk_discrimination},
      {10, "throughput budget", 120.0, throughput},
      {11, "reproducibility", 600.0, reproducibility},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    const char* saved = std::getenv("ACDF_THREADS");
    const std::string restore = saved ? saved : "";
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (saved) {
      setenv("ACDF_THREADS", restore.c_str(), 1);
    } else {
      unsetenv("ACDF_THREADS");
    }
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s  [%2d] %-36s %s [%.2f s / %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
