#include "ductwave/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "ductwave/errors.hpp"
#include "ductwave/rng.hpp"

namespace ductwave {

namespace {

void require_same_shape(const Raster& a, const Raster& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidInputError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
  if (a.size() == 0) throw InvalidInputError(std::string(what) + ": empty image");
}

void require_finite(const Raster& r, const char* what) {
  for (float v : r.values()) {
    if (!std::isfinite(v)) throw InvalidInputError(std::string(what) + ": non-finite pixel");
  }
}

// Separable valid-mode filter: out has (rows - k + 1) x (cols - k + 1).
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& kernel) {
  const std::size_t k = kernel.size();
  const std::size_t orows = rows - k + 1;
  const std::size_t ocols = cols - k + 1;
  std::vector<double> tmp(rows * ocols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ocols; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += kernel[i] * img[r * cols + c + i];
      tmp[r * ocols + c] = s;
    }
  }
  std::vector<double> out(orows * ocols);
  for (std::size_t r = 0; r < orows; ++r) {
    for (std::size_t c = 0; c < ocols; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += kernel[i] * tmp[(r + i) * ocols + c];
      out[r * ocols + c] = s;
    }
  }
  return out;
}

}  // namespace

double mse(const Raster& a, const Raster& b) {
  require_same_shape(a, b, "mse");
  require_finite(a, "mse");
  require_finite(b, "mse");
  const auto va = a.values();
  const auto vb = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - static_cast<double>(vb[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(va.size());
}

double ssim(const Raster& a, const Raster& b, const SsimOptions& options) {
  require_same_shape(a, b, "ssim");
  require_finite(a, "ssim");
  require_finite(b, "ssim");
  const std::size_t k = options.window;
  if (k == 0 || k % 2 == 0) throw InvalidInputError("ssim: window must be odd");
  if (a.rows() < k || a.cols() < k) throw InvalidInputError("ssim: image smaller than the window");

  std::vector<double> kernel(k);
  const double half = static_cast<double>(k / 2);
  double norm = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double x = static_cast<double>(i) - half;
    kernel[i] = std::exp(-0.5 * x * x / (options.sigma * options.sigma));
    norm += kernel[i];
  }
  for (auto& w : kernel) w /= norm;

  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a.values()[i];
    y[i] = b.values()[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, a.rows(), a.cols(), kernel);
  const auto my = filter_valid(y, a.rows(), a.cols(), kernel);
  const auto mxx = filter_valid(xx, a.rows(), a.cols(), kernel);
  const auto myy = filter_valid(yy, a.rows(), a.cols(), kernel);
  const auto mxy = filter_valid(xy, a.rows(), a.cols(), kernel);

  const double c1 = (options.k1 * options.data_range) * (options.k1 * options.data_range);
  const double c2 = (options.k2 * options.data_range) * (options.k2 * options.data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double pxy = mx[i] * my[i];
    const double sx = mxx[i] - mx[i] * mx[i];
    const double sy = myy[i] - my[i] * my[i];
    const double sxy = mxy[i] - pxy;
    const double num = (2.0 * pxy + c1) * (2.0 * sxy + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sx + sy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

GaussianStats gaussian_stats(std::span<const double> features, std::size_t dim) {
  if (dim == 0 || features.size() % dim != 0 || features.empty()) {
    throw InvalidInputError("gaussian_stats: feature buffer is not a whole number of vectors");
  }
  GaussianStats s;
  s.dim = dim;
  s.count = features.size() / dim;
  s.mean.assign(dim, 0.0);
  s.covariance.assign(dim * dim, 0.0);
  for (std::size_t n = 0; n < s.count; ++n) {
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += features[n * dim + i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(s.count);
  std::vector<double> d(dim);
  for (std::size_t n = 0; n < s.count; ++n) {
    for (std::size_t i = 0; i < dim; ++i) d[i] = features[n * dim + i] - s.mean[i];
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = i; j < dim; ++j) s.covariance[i * dim + j] += d[i] * d[j];
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      const double v = s.covariance[i * dim + j] / static_cast<double>(s.count);
      s.covariance[i * dim + j] = v;
      s.covariance[j * dim + i] = v;
    }
  }
  return s;
}

namespace {

using Matrix = Eigen::MatrixXd;

Matrix as_matrix(const GaussianStats& s) {
  Matrix m(s.dim, s.dim);
  for (std::size_t i = 0; i < s.dim; ++i) {
    for (std::size_t j = 0; j < s.dim; ++j) m(i, j) = s.covariance[i * s.dim + j];
  }
  return m;
}

Eigen::VectorXd clipped_eigenvalues(const Eigen::VectorXd& values, double scale, const char* what) {
  const double tol = 1e-8 * std::max(scale, 1.0);
  Eigen::VectorXd out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out(i) < -tol) {
      std::ostringstream msg;
      msg << "frechet_distance: " << what << " has eigenvalue " << out(i) << " below tolerance " << -tol;
      throw NumericalError(msg.str());
    }
    out(i) = std::max(out(i), 0.0);
  }
  return out;
}

double trace_sqrt_product(const Matrix& sa, const Matrix& sb) {
  const double scale = std::max(sa.cwiseAbs().maxCoeff(), sb.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Matrix> ea(0.5 * (sa + sa.transpose()));
  if (ea.info() != Eigen::Success) throw NumericalError("frechet_distance: eigen decomposition failed");
  const Eigen::VectorXd la = clipped_eigenvalues(ea.eigenvalues(), scale, "covariance");
  const Matrix root = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  const Matrix inner = root * sb * root;
  Eigen::SelfAdjointEigenSolver<Matrix> ei(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (ei.info() != Eigen::Success) throw NumericalError("frechet_distance: eigen decomposition failed");
  const Eigen::VectorXd li = clipped_eigenvalues(ei.eigenvalues(), scale * scale, "covariance product");
  return li.cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim != b.dim || a.dim == 0) throw InvalidInputError("frechet_distance: dimension mismatch");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < a.dim; ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  const Matrix sa = as_matrix(a);
  const Matrix sb = as_matrix(b);
  // Averaging both orderings makes the result exactly symmetric.
  const double cross = 0.5 * (trace_sqrt_product(sa, sb) + trace_sqrt_product(sb, sa));
  const double d2 = mean_term + (sa.trace() + sb.trace()) - 2.0 * cross;
  return std::max(d2, 0.0);
}

FeatureBank::FeatureBank(std::uint64_t seed, std::size_t n_filters, std::size_t filter_size)
    : seed_(seed), n_filters_(n_filters), filter_size_(filter_size) {
  if (n_filters == 0) throw InvalidInputError("FeatureBank: need at least one filter");
  if (filter_size == 0 || filter_size + kPool > kPatch) throw InvalidInputError("FeatureBank: bad filter size");
  if ((kPatch - filter_size + 1) % kPool != 0) {
    throw InvalidInputError("FeatureBank: filter size leaves a response map that does not pool evenly");
  }
  DeterministicRng rng(seed);
  const std::size_t taps = filter_size * filter_size;
  weights_.resize(n_filters * taps);
  bias_.resize(n_filters);
  for (std::size_t f = 0; f < n_filters; ++f) {
    double* w = &weights_[f * taps];
    double mean = 0.0;
    for (std::size_t t = 0; t < taps; ++t) {
      w[t] = rng.uniform(-1.0, 1.0);
      mean += w[t];
    }
    mean /= static_cast<double>(taps);
    double norm = 0.0;
    for (std::size_t t = 0; t < taps; ++t) {
      w[t] -= mean;
      norm += w[t] * w[t];
    }
    norm = std::sqrt(norm);
    for (std::size_t t = 0; t < taps; ++t) w[t] /= norm;
    bias_[f] = rng.uniform(-0.05, 0.05);
  }
}

std::vector<double> FeatureBank::patch_features(const Raster& image) const {
  if (image.rows() < kPatch || image.cols() < kPatch) throw InvalidInputError("patch_features: image smaller than a patch");
  require_finite(image, "patch_features");
  const std::size_t k = filter_size_;
  const std::size_t rows = image.rows() - k + 1;
  const std::size_t cols = image.cols() - k + 1;
  const std::size_t taps = k * k;

  // Rectified responses over the whole image; patches are windows into them.
  std::vector<double> maps(n_filters_ * rows * cols);
  for (std::size_t f = 0; f < n_filters_; ++f) {
    const double* w = &weights_[f * taps];
    double* out = &maps[f * rows * cols];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double s = bias_[f];
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) s += w[i * k + j] * image(r + i, c + j);
        }
        out[r * cols + c] = std::max(s, 0.0);
      }
    }
  }

  const std::size_t resp = kPatch - k + 1;
  const std::size_t cell = resp / kPool;
  const std::size_t pr = (image.rows() - kPatch) / kStride + 1;
  const std::size_t pc = (image.cols() - kPatch) / kStride + 1;
  const std::size_t dim = feature_dim();
  std::vector<double> features(pr * pc * dim);
  for (std::size_t py = 0; py < pr; ++py) {
    for (std::size_t px = 0; px < pc; ++px) {
      double* feat = &features[(py * pc + px) * dim];
      for (std::size_t f = 0; f < n_filters_; ++f) {
        const double* m = &maps[f * rows * cols];
        for (std::size_t gy = 0; gy < kPool; ++gy) {
          for (std::size_t gx = 0; gx < kPool; ++gx) {
            double s = 0.0;
            for (std::size_t i = 0; i < cell; ++i) {
              for (std::size_t j = 0; j < cell; ++j) {
                s += m[(py * kStride + gy * cell + i) * cols + px * kStride + gx * cell + j];
              }
            }
            feat[(f * kPool + gy) * kPool + gx] = s / static_cast<double>(cell * cell);
          }
        }
      }
    }
  }
  return features;
}

double frechet_feature_distance(const Raster& a, const Raster& b, const FeatureBank& bank) {
  require_same_shape(a, b, "frechet_feature_distance");
  const auto sa = gaussian_stats(bank.patch_features(a), bank.feature_dim());
  const auto sb = gaussian_stats(bank.patch_features(b), bank.feature_dim());
  return frechet_distance(sa, sb);
}

double frechet_set_distance(std::span<const Raster> a, std::span<const Raster> b, const FeatureBank& bank) {
  if (a.empty() || b.empty()) throw InvalidInputError("frechet_set_distance: empty image set");
  const auto pooled = [&](std::span<const Raster> set) {
    std::vector<double> all;
    for (const auto& img : set) {
      const auto f = bank.patch_features(img);
      all.insert(all.end(), f.begin(), f.end());
    }
    return gaussian_stats(all, bank.feature_dim());
  };
  return frechet_distance(pooled(a), pooled(b));
}

MetricValue compute_metrics(const std::string& case_id, const Raster& prediction, const Raster& target,
                            const FeatureBank& bank) {
  return {case_id, mse(prediction, target), ssim(prediction, target),
          frechet_feature_distance(prediction, target, bank)};
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInputError("welch_t_test: each sample needs at least two values");
  const auto moments = [](std::span<const double> x) {
    double m = 0.0;
    for (double v : x) {
      if (!std::isfinite(v)) throw InvalidInputError("welch_t_test: non-finite value");
      m += v;
    }
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  TTestResult r;
  r.mean_a = ma;
  r.mean_b = mb;
  const double qa = va / na;
  const double qb = vb / nb;
  const double se2 = qa + qb;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.degrees_of_freedom = na + nb - 2.0;
    if (ma == mb) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_statistic = (ma - mb) / std::sqrt(se2);
  r.degrees_of_freedom = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.degrees_of_freedom);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic))), 0.0, 1.0);
  return r;
}

}  // namespace ductwave
