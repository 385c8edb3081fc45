#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "acdf/grid.hpp"
#include "acdf/patches.hpp"
#include "acdf/resample.hpp"
#include "json.hpp"

namespace acdf {

// Residual terms: the five terrain features, then each feature multiplied by
// (upsampled speed / 10 m/s). There is deliberately no constant term, so a
// featureless terrain always reproduces the bilinear input.
inline constexpr int kDownscalerTermCount = 2 * kTerrainFeatureCount;
inline constexpr double kInteractionSpeedScale = 10.0;

std::vector<std::string> downscaler_term_names();

struct DownscalerConfig {
  double patch_deg = 0.5;
  double stride_deg = 0.25;
  std::array<bool, kDownscalerTermCount> active{true, true, true, true, true,
                                                true, true, true, true, true};
  double ridge_lambda = 1e-8;

  nlohmann::json to_json() const;
};

struct DownscalerTraining {
  std::vector<double> loss_history;  // [bilinear baseline, fitted]
  std::size_t sample_count = 0;      // patch pairs
  std::size_t cell_count = 0;
  std::string config_hash;
  bool ridge_fallback = false;
  double max_abs_residual = 0.0;  // m/s, over training cells
};

class DownscalerModel {
public:
  using Weights = std::array<double, kDownscalerTermCount>;

  DownscalerModel() = default;
  DownscalerModel(Weights weights, DownscalerConfig config, DownscalerTraining training);

  bool trained() const { return trained_; }
  bool frozen() const { return frozen_; }
  const Weights& weights() const { return weights_; }
  const DownscalerConfig& config() const { return config_; }
  const DownscalerTraining& training() const { return training_; }

  /// Throws FrozenModelError once frozen.
  void set_weights(const Weights& weights);
  void set_training(DownscalerTraining training);

  /// Idempotent.
  void freeze() { frozen_ = true; }

  /// Speed multiplier 1 + theta . phi at one fine node.
  double factor(const double* features, double upsampled_speed) const;

  nlohmann::json to_json() const;
  std::string serialize() const;
  static DownscalerModel from_json(const nlohmann::json& j);

private:
  void check_mutable() const;

  Weights weights_{};
  DownscalerConfig config_;
  DownscalerTraining training_;
  bool trained_ = false;
  bool frozen_ = false;
};

/// Returns a frozen copy.
DownscalerModel freeze(DownscalerModel model);

/// Bilinear projection of a coarse patch onto the fine terrain grid
/// (5 x 5 x 2 -> 101 x 101 x 2 at the default geometry).
std::vector<double> upsample_input(std::span<const double> coarse_patch, int coarse_size = 5,
                                   int fine_size = 101);

/// Upsampled input scaled by the learned residual speed factor per cell;
/// direction is preserved wherever the factor is positive.
std::vector<double> predict(const DownscalerModel& model, std::span<const double> coarse_patch,
                            std::span<const double> terrain_patch, int coarse_size = 5,
                            int fine_size = 101);

/// Streaming least-squares accumulator for the mean-squared patch loss.
/// Pairs are accumulated in call order, so results are reproducible.
class DownscalerFitter {
public:
  explicit DownscalerFitter(DownscalerConfig config = {});

  void add(const PatchPair& pair);
  std::size_t pair_count() const { return pairs_; }
  DownscalerModel finish() const;

private:
  DownscalerConfig config_;
  Eigen::Matrix<double, kDownscalerTermCount, kDownscalerTermCount> normal_;
  Eigen::Matrix<double, kDownscalerTermCount, 1> rhs_;
  double baseline_sse_ = 0.0;
  double max_abs_residual_ = 0.0;
  std::size_t pairs_ = 0;
  std::size_t cells_ = 0;
};

DownscalerModel fit_downscaler(const std::vector<PatchPair>& pairs, const DownscalerConfig& config = {});

/// Patch-wise prediction over the whole fine grid of terrain, blended by
/// overlap averaging, for every timestep of coarse.
WindField downscale_field(const DownscalerModel& model, const WindField& coarse,
                          const TerrainFeatures& terrain);

/// Coarse-grid stencil used to upsample onto fine node (fine_x, fine_y) with
/// integer refinement ratio; weights are exact ratios of integers.
BilinearStencil upsample_stencil(const GridSpec& coarse, int ratio, int fine_x, int fine_y);

/// The blended downscaled value at a single fine node for timestep t. All
/// patches covering a node share its bilinear input, so this equals the
/// downscale_field output on covered nodes.
std::array<double, 2> downscale_node(const DownscalerModel& model, const WindField& coarse, std::size_t t,
                                     const TerrainFeatures& terrain, int fine_x, int fine_y);

}  // namespace acdf
