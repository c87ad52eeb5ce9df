#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ductwave/raster.hpp"

namespace ductwave {

struct MetricValue {
  std::string case_id;
  double mse = 0.0;
  double ssim = 1.0;
  double fid = 0.0;
};

double mse(const Raster& a, const Raster& b);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean local SSIM over every position where the Gaussian window fits inside
/// the image. Both images need at least `window` rows and columns.
double ssim(const Raster& a, const Raster& b, const SsimOptions& options = {});

/// Mean and covariance of a population of feature vectors, covariance stored
/// row-major with 1/n normalization.
struct GaussianStats {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> covariance;
};

GaussianStats gaussian_stats(std::span<const double> features, std::size_t dim);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). Eigenvalues between
/// -1e-8 * scale and 0 are clipped; anything more negative is a
/// NumericalError.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Fixed random convolution filters standing in for a pretrained network.
/// Each 16x16 patch (stride 8) is convolved (valid) with every filter, passed
/// through a biased ReLU and average-pooled on a 2x2 grid.
class FeatureBank {
 public:
  explicit FeatureBank(std::uint64_t seed = 20240521, std::size_t n_filters = 8, std::size_t filter_size = 5);

  std::uint64_t seed() const { return seed_; }
  std::size_t n_filters() const { return n_filters_; }
  std::size_t filter_size() const { return filter_size_; }
  std::size_t feature_dim() const { return n_filters_ * kPool * kPool; }

  static constexpr std::size_t kPatch = 16;
  static constexpr std::size_t kStride = 8;
  static constexpr std::size_t kPool = 2;

  /// One feature vector per patch, concatenated.
  std::vector<double> patch_features(const Raster& image) const;

 private:
  std::uint64_t seed_;
  std::size_t n_filters_;
  std::size_t filter_size_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Per-image Fréchet feature distance between the patch populations of a and b.
double frechet_feature_distance(const Raster& a, const Raster& b, const FeatureBank& bank);

/// Distance between the pooled patch populations of two image sets.
double frechet_set_distance(std::span<const Raster> a, std::span<const Raster> b, const FeatureBank& bank);

MetricValue compute_metrics(const std::string& case_id, const Raster& prediction, const Raster& target,
                            const FeatureBank& bank);

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  bool degenerate = false;
};

/// Two-sided Welch test. Zero variance in both samples is reported as
/// degenerate: t = 0, p = 1 for equal means, otherwise t = +-inf, p = 0.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace ductwave
