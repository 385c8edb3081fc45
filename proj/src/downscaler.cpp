#include "acdf/downscaler.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "acdf/errors.hpp"
#include "acdf/hashing.hpp"
#include "acdf/parallel.hpp"
#include "acdf/resample.hpp"

namespace acdf {

using nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

using TermVector = Eigen::Matrix<double, kDownscalerTermCount, 1>;

void fill_terms(const double* features, double speed, TermVector& psi) {
  const double scale = speed / kInteractionSpeedScale;
  for (int f = 0; f < kTerrainFeatureCount; ++f) {
    psi[f] = features[f];
    psi[kTerrainFeatureCount + f] = features[f] * scale;
  }
}

int patch_ratio(int coarse_size, int fine_size) {
  if (coarse_size < 2 || fine_size < coarse_size || (fine_size - 1) % (coarse_size - 1) != 0) {
    throw ShapeError("fine patch size is not an integer refinement of the coarse patch size");
  }
  return (fine_size - 1) / (coarse_size - 1);
}

// Shared by predict() and downscale_field(); terrain(ly, lx) yields a pointer
// to the kTerrainFeatureCount features of a patch cell.
template <class TerrainAt>
void predict_into(const DownscalerModel& model, std::span<const double> coarse_patch, int coarse_size,
                  int fine_size, TerrainAt&& terrain, std::vector<double>& out) {
  out = upsample_patch(coarse_patch, coarse_size, patch_ratio(coarse_size, fine_size));
  for (int y = 0; y < fine_size; ++y) {
    for (int x = 0; x < fine_size; ++x) {
      double* w = &out[(static_cast<std::size_t>(y) * fine_size + x) * 2];
      const double g = model.factor(terrain(y, x), std::hypot(w[0], w[1]));
      w[0] *= g;
      w[1] *= g;
    }
  }
}

void require_trained(const DownscalerModel& model) {
  if (!model.trained()) throw NotTrainedError("downscaler model has not been fitted");
}

}  // namespace

std::vector<std::string> downscaler_term_names() {
  std::vector<std::string> names;
  for (const char* n : kTerrainFeatureNames) names.emplace_back(n);
  for (const char* n : kTerrainFeatureNames) names.push_back(std::string(n) + "*speed");
  return names;
}

json DownscalerConfig::to_json() const {
  return json{{"patch_deg", patch_deg},
              {"stride_deg", stride_deg},
              {"active", std::vector<bool>(active.begin(), active.end())},
              {"ridge_lambda", ridge_lambda}};
}

DownscalerModel::DownscalerModel(Weights weights, DownscalerConfig config, DownscalerTraining training)
    : weights_(weights), config_(config), training_(std::move(training)), trained_(true) {
  for (double w : weights_) {
    if (!std::isfinite(w)) throw InvalidArgumentError("downscaler weights must be finite");
  }
}

void DownscalerModel::check_mutable() const {
  if (frozen_) throw FrozenModelError("downscaler parameters are frozen");
}

void DownscalerModel::set_weights(const Weights& weights) {
  check_mutable();
  for (double w : weights) {
    if (!std::isfinite(w)) throw InvalidArgumentError("downscaler weights must be finite");
  }
  weights_ = weights;
  trained_ = true;
}

void DownscalerModel::set_training(DownscalerTraining training) {
  check_mutable();
  training_ = std::move(training);
}

double DownscalerModel::factor(const double* features, double upsampled_speed) const {
  const double scale = upsampled_speed / kInteractionSpeedScale;
  double g = 1.0;
  for (int f = 0; f < kTerrainFeatureCount; ++f) {
    g += weights_[f] * features[f] + weights_[kTerrainFeatureCount + f] * features[f] * scale;
  }
  return g;
}

json DownscalerModel::to_json() const {
  json training = {{"loss_history", training_.loss_history},
                   {"sample_count", training_.sample_count},
                   {"cell_count", training_.cell_count},
                   {"config_hash", training_.config_hash},
                   {"ridge_fallback", training_.ridge_fallback},
                   {"max_abs_residual", training_.max_abs_residual}};
  std::vector<std::string> features(kTerrainFeatureNames.begin(), kTerrainFeatureNames.end());
  return json{{"version", kModelVersion},
              {"F", kTerrainFeatureCount},
              {"feature_names", features},
              {"terms", downscaler_term_names()},
              {"weights", std::vector<double>(weights_.begin(), weights_.end())},
              {"trained", trained_},
              {"frozen", frozen_},
              {"config", config_.to_json()},
              {"training", training}};
}

std::string DownscalerModel::serialize() const { return to_json().dump(2) + "\n"; }

DownscalerModel DownscalerModel::from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) throw FormatError("unsupported downscaler model version");
    if (j.at("F").get<int>() != kTerrainFeatureCount) {
      throw FormatError("downscaler model expects " + std::to_string(j.at("F").get<int>()) + " terrain features");
    }
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kDownscalerTermCount) throw FormatError("downscaler weight vector has the wrong length");
    DownscalerConfig cfg;
    const json& jc = j.at("config");
    cfg.patch_deg = jc.at("patch_deg").get<double>();
    cfg.stride_deg = jc.at("stride_deg").get<double>();
    cfg.ridge_lambda = jc.at("ridge_lambda").get<double>();
    const auto active = jc.at("active").get<std::vector<bool>>();
    if (active.size() != kDownscalerTermCount) throw FormatError("downscaler active mask has the wrong length");
    std::copy(active.begin(), active.end(), cfg.active.begin());
    DownscalerTraining tr;
    const json& jt = j.at("training");
    tr.loss_history = jt.at("loss_history").get<std::vector<double>>();
    tr.sample_count = jt.at("sample_count").get<std::size_t>();
    tr.cell_count = jt.at("cell_count").get<std::size_t>();
    tr.config_hash = jt.at("config_hash").get<std::string>();
    tr.ridge_fallback = jt.at("ridge_fallback").get<bool>();
    tr.max_abs_residual = jt.at("max_abs_residual").get<double>();
    Weights weights{};
    std::copy(w.begin(), w.end(), weights.begin());
    DownscalerModel m(weights, cfg, std::move(tr));
    m.trained_ = j.at("trained").get<bool>();
    m.frozen_ = j.at("frozen").get<bool>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed downscaler model: ") + e.what());
  }
}

DownscalerModel freeze(DownscalerModel model) {
  model.freeze();
  return model;
}

std::vector<double> upsample_input(std::span<const double> coarse_patch, int coarse_size, int fine_size) {
  return upsample_patch(coarse_patch, coarse_size, patch_ratio(coarse_size, fine_size));
}

std::vector<double> predict(const DownscalerModel& model, std::span<const double> coarse_patch,
                            std::span<const double> terrain_patch, int coarse_size, int fine_size) {
  require_trained(model);
  if (terrain_patch.size() != static_cast<std::size_t>(fine_size) * fine_size * kTerrainFeatureCount) {
    throw ShapeError("terrain patch does not carry " + std::to_string(kTerrainFeatureCount) +
                     " features per fine cell");
  }
  std::vector<double> out;
  predict_into(model, coarse_patch, coarse_size, fine_size,
               [&](int y, int x) {
                 return &terrain_patch[(static_cast<std::size_t>(y) * fine_size + x) * kTerrainFeatureCount];
               },
               out);
  return out;
}

DownscalerFitter::DownscalerFitter(DownscalerConfig config) : config_(config) {
  normal_.setZero();
  rhs_.setZero();
}

void DownscalerFitter::add(const PatchPair& pair) {
  const std::vector<double> up = upsample_input(pair.coarse, pair.coarse_size, pair.fine_size);
  if (pair.terrain.size() != static_cast<std::size_t>(pair.fine_size) * pair.fine_size * kTerrainFeatureCount ||
      pair.fine_label.size() != up.size()) {
    throw ShapeError("patch pair arrays are inconsistent with its sizes");
  }
  Eigen::Matrix<double, kDownscalerTermCount, kDownscalerTermCount> a;
  a.setZero();
  TermVector b = TermVector::Zero();
  TermVector psi;
  const std::size_t cells = static_cast<std::size_t>(pair.fine_size) * pair.fine_size;
  for (std::size_t c = 0; c < cells; ++c) {
    const double u = up[2 * c], v = up[2 * c + 1];
    const double ru = pair.fine_label[2 * c] - u, rv = pair.fine_label[2 * c + 1] - v;
    const double s2 = u * u + v * v;
    fill_terms(&pair.terrain[c * kTerrainFeatureCount], std::sqrt(s2), psi);
    a.selfadjointView<Eigen::Upper>().rankUpdate(psi, s2);
    b += (u * ru + v * rv) * psi;
    baseline_sse_ += ru * ru + rv * rv;
    max_abs_residual_ = std::max(max_abs_residual_, std::hypot(ru, rv));
  }
  normal_ += a;
  rhs_ += b;
  ++pairs_;
  cells_ += cells;
}

DownscalerModel DownscalerFitter::finish() const {
  if (pairs_ == 0) throw InvalidArgumentError("fit_downscaler needs at least one patch pair");
  std::vector<int> idx;
  for (int k = 0; k < kDownscalerTermCount; ++k) {
    if (config_.active[k]) idx.push_back(k);
  }
  const Eigen::Matrix<double, kDownscalerTermCount, kDownscalerTermCount> full =
      normal_.selfadjointView<Eigen::Upper>();
  const double scale = 1.0 / static_cast<double>(cells_);
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    b[i] = rhs_[idx[i]] * scale;
    for (int j = 0; j < m; ++j) a(i, j) = full(idx[i], idx[j]) * scale;
  }

  DownscalerTraining training;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
      training.ridge_fallback = true;
      a.diagonal().array() += config_.ridge_lambda;
    }
    theta = a.ldlt().solve(b);
  }
  DownscalerModel::Weights weights{};
  for (int i = 0; i < m; ++i) weights[idx[i]] = theta[i];

  // Quadratic form of the residual loss: sse(theta) = sse0 - 2 theta.b + theta' A theta.
  const double denom = static_cast<double>(cells_);
  const double baseline = baseline_sse_ / denom;
  double fitted = baseline;
  if (m > 0) {
    Eigen::VectorXd raw_b(m);
    Eigen::MatrixXd raw_a(m, m);
    for (int i = 0; i < m; ++i) {
      raw_b[i] = rhs_[idx[i]];
      for (int j = 0; j < m; ++j) raw_a(i, j) = full(idx[i], idx[j]);
    }
    fitted = std::max(0.0, (baseline_sse_ - 2.0 * theta.dot(raw_b) + theta.dot(raw_a * theta)) / denom);
  }
  training.loss_history = {baseline, fitted};
  training.sample_count = pairs_;
  training.cell_count = cells_;
  training.config_hash = sha256_hex(config_.to_json().dump());
  training.max_abs_residual = max_abs_residual_;
  return DownscalerModel(weights, config_, std::move(training));
}

DownscalerModel fit_downscaler(const std::vector<PatchPair>& pairs, const DownscalerConfig& config) {
  DownscalerFitter fitter(config);
  for (const auto& p : pairs) fitter.add(p);
  return fitter.finish();
}

WindField downscale_field(const DownscalerModel& model, const WindField& coarse, const TerrainFeatures& terrain) {
  require_trained(model);
  const PatchLayout layout =
      make_patch_layout(coarse.spec, terrain.spec, model.config().patch_deg, model.config().stride_deg);
  const int cs = layout.coarse_size, fs = layout.fine_size;
  WindField out(terrain.spec, coarse.times);
  parallel_for(coarse.time_count(), [&](std::size_t t) {
    PatchBlender blender(terrain.spec);
    std::vector<double> patch(static_cast<std::size_t>(cs) * cs * 2);
    std::vector<double> values;
    for (const auto& p : layout.positions) {
      auto it = patch.begin();
      for (int y = 0; y < cs; ++y) {
        for (int x = 0; x < cs; ++x) {
          *it++ = coarse.at(t, p.coarse_y0 + y, p.coarse_x0 + x, 0);
          *it++ = coarse.at(t, p.coarse_y0 + y, p.coarse_x0 + x, 1);
        }
      }
      predict_into(model, patch, cs, fs,
                   [&](int y, int x) { return &terrain.data[terrain.index(p.fine_y0 + y, p.fine_x0 + x, 0)]; },
                   values);
      blender.add(p.fine_x0, p.fine_y0, fs, values);
    }
    const WindField slice = blender.finish(coarse.times[t]);
    std::copy(slice.data.begin(), slice.data.end(), out.data.begin() + static_cast<long>(t * out.slice_size()));
  });
  return out;
}

BilinearStencil upsample_stencil(const GridSpec& coarse, int ratio, int fine_x, int fine_y) {
  BilinearStencil s;
  s.x0 = std::min(fine_x / ratio, coarse.nx - 2);
  s.wx = static_cast<double>(fine_x - s.x0 * ratio) / ratio;
  s.y0 = std::min(fine_y / ratio, coarse.ny - 2);
  s.wy = static_cast<double>(fine_y - s.y0 * ratio) / ratio;
  return s;
}

std::array<double, 2> downscale_node(const DownscalerModel& model, const WindField& coarse, std::size_t t,
                                     const TerrainFeatures& terrain, int fine_x, int fine_y) {
  require_trained(model);
  const BilinearStencil s = upsample_stencil(coarse.spec, refinement_ratio(coarse.spec, terrain.spec), fine_x, fine_y);
  std::array<double, 2> w{};
  for (int c = 0; c < 2; ++c) w[c] = s.apply([&](int y, int x) { return coarse.at(t, y, x, c); });
  const double g = model.factor(&terrain.data[terrain.index(fine_y, fine_x, 0)], std::hypot(w[0], w[1]));
  return {w[0] * g, w[1] * g};
}

}  // namespace acdf
