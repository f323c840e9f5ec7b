#include "ipula/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ipula {
namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " must be positive and finite");
  }
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " must be non-negative and finite");
  }
}

void require_gamma(double gamma) { require_positive(gamma, "gamma"); }

}  // namespace

// --- Quadratic -------------------------------------------------------------

QuadraticPotential::QuadraticPotential(double sigma, Vector center)
    : sigma_(sigma), center_(std::move(center)) {
  require_positive(sigma_, "sigma");
  if (center_.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "quadratic dimension must be > 0");
  }
}

double QuadraticPotential::value(const Vector& x) const {
  check_dimension(x, "QuadraticPotential::value");
  return 0.5 * sigma_ * (x - center_).squaredNorm();
}

Vector QuadraticPotential::subgradient_select(const Vector& x) const {
  check_dimension(x, "QuadraticPotential::subgradient_select");
  return sigma_ * (x - center_);
}

std::optional<Vector> QuadraticPotential::exact_prox(const Vector& x,
                                                     double gamma) const {
  require_gamma(gamma);
  check_dimension(x, "QuadraticPotential::exact_prox");
  return Vector((x + gamma * sigma_ * center_) / (1.0 + gamma * sigma_));
}

std::optional<Vector> QuadraticPotential::smooth_part_gradient(
    const Vector& x) const {
  return subgradient_select(x);
}

// --- L1 --------------------------------------------------------------------

L1Potential::L1Potential(double weight, std::size_t dimension)
    : weight_(weight), dimension_(dimension) {
  require_positive(weight_, "l1 weight");
  if (dimension_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "l1 dimension must be > 0");
  }
}

double L1Potential::value(const Vector& x) const {
  check_dimension(x, "L1Potential::value");
  return weight_ * x.lpNorm<1>();
}

Vector L1Potential::subgradient_select(const Vector& x) const {
  check_dimension(x, "L1Potential::subgradient_select");
  return x.unaryExpr([this](double v) { return weight_ * sign0(v); });
}

Vector L1Potential::subgradient_nearest(const Vector& x,
                                        const Vector& target) const {
  check_dimension(x, "L1Potential::subgradient_nearest");
  check_dimension(target, "L1Potential::subgradient_nearest target");
  Vector u = subgradient_select(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) u[i] = std::clamp(target[i], -weight_, weight_);
  }
  return u;
}

std::optional<Vector> L1Potential::exact_prox(const Vector& x,
                                              double gamma) const {
  require_gamma(gamma);
  check_dimension(x, "L1Potential::exact_prox");
  const double t = gamma * weight_;
  return Vector(x.unaryExpr([t](double v) { return soft_threshold(v, t); }));
}

std::optional<Vector> L1Potential::smooth_part_gradient(
    const Vector& x) const {
  check_dimension(x, "L1Potential::smooth_part_gradient");
  return Vector(Vector::Zero(x.size()));
}

std::shared_ptr<const CompositePotential> L1Potential::nonsmooth_part() const {
  return std::make_shared<const L1Potential>(weight_, dimension_);
}

bool L1Potential::snap_to_kinks(Vector& y, double threshold) const {
  bool changed = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && std::abs(y[i]) <= threshold) {
      y[i] = 0.0;
      changed = true;
    }
  }
  return changed;
}

// --- Elastic net -------------------------------------------------------------

ElasticNetPotential::ElasticNetPotential(double l1_weight, double quad_weight,
                                         std::size_t dimension)
    : l1_weight_(l1_weight),
      quad_weight_(quad_weight),
      dimension_(dimension),
      l1_(std::make_shared<const L1Potential>(l1_weight, dimension)) {
  require_positive(quad_weight_, "quad_weight");
}

double ElasticNetPotential::value(const Vector& x) const {
  check_dimension(x, "ElasticNetPotential::value");
  return l1_weight_ * x.lpNorm<1>() + 0.5 * quad_weight_ * x.squaredNorm();
}

Vector ElasticNetPotential::subgradient_select(const Vector& x) const {
  check_dimension(x, "ElasticNetPotential::subgradient_select");
  return x.unaryExpr([this](double v) {
    return l1_weight_ * sign0(v) + quad_weight_ * v;
  });
}

Vector ElasticNetPotential::subgradient_nearest(const Vector& x,
                                                const Vector& target) const {
  // The ridge term vanishes where x_i = 0.
  Vector u = l1_->subgradient_nearest(x, target);
  u += quad_weight_ * x;
  return u;
}

std::optional<Vector> ElasticNetPotential::exact_prox(const Vector& x,
                                                      double gamma) const {
  require_gamma(gamma);
  check_dimension(x, "ElasticNetPotential::exact_prox");
  const double t = gamma * l1_weight_;
  const double shrink = 1.0 + gamma * quad_weight_;
  return Vector(
      x.unaryExpr([t, shrink](double v) { return soft_threshold(v, t) / shrink; }));
}

std::optional<Vector> ElasticNetPotential::smooth_part_gradient(
    const Vector& x) const {
  check_dimension(x, "ElasticNetPotential::smooth_part_gradient");
  return Vector(quad_weight_ * x);
}

bool ElasticNetPotential::snap_to_kinks(Vector& y, double threshold) const {
  return l1_->snap_to_kinks(y, threshold);
}

// --- Total variation -------------------------------------------------------

double total_variation(const Vector& image, std::size_t width,
                       std::size_t height) {
  require_dimension(image, width * height, "total_variation");
  double tv = 0.0;
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t rn = (r + 1) % height;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t cn = (c + 1) % width;
      const double v = image[r * width + c];
      tv += std::abs(image[r * width + cn] - v);
      tv += std::abs(image[rn * width + c] - v);
    }
  }
  return tv;
}

Vector total_variation_subgradient(const Vector& image, std::size_t width,
                                   std::size_t height) {
  require_dimension(image, width * height, "total_variation_subgradient");
  Vector out = Vector::Zero(image.size());
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t rn = (r + 1) % height;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t cn = (c + 1) % width;
      const std::size_t i = r * width + c;
      const double sh = sign0(image[r * width + cn] - image[i]);
      const double sv = sign0(image[rn * width + c] - image[i]);
      // d/dx_i |x_j - x_i| = -s, d/dx_j = +s
      out[i] -= sh + sv;
      out[r * width + cn] += sh;
      out[rn * width + c] += sv;
    }
  }
  return out;
}

TvRidgePotential::TvRidgePotential(double tv_weight, double tikhonov_weight,
                                   std::size_t width, std::size_t height)
    : tv_weight_(tv_weight),
      tikhonov_weight_(tikhonov_weight),
      width_(width),
      height_(height) {
  require_nonnegative(tv_weight_, "tv_weight");
  require_positive(tikhonov_weight_, "tikhonov_weight");
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be > 0");
  }
}

double TvRidgePotential::value(const Vector& x) const {
  check_dimension(x, "TvRidgePotential::value");
  double v = 0.5 * tikhonov_weight_ * x.squaredNorm();
  if (tv_weight_ > 0.0) v += tv_weight_ * total_variation(x, width_, height_);
  return v;
}

Vector TvRidgePotential::subgradient_select(const Vector& x) const {
  check_dimension(x, "TvRidgePotential::subgradient_select");
  Vector g = tikhonov_weight_ * x;
  if (tv_weight_ > 0.0) {
    g += tv_weight_ * total_variation_subgradient(x, width_, height_);
  }
  return g;
}

std::optional<Vector> TvRidgePotential::exact_prox(const Vector& x,
                                                   double gamma) const {
  require_gamma(gamma);
  if (tv_weight_ != 0.0) return std::nullopt;
  check_dimension(x, "TvRidgePotential::exact_prox");
  return Vector(x / (1.0 + gamma * tikhonov_weight_));
}

// --- TV deblurring ---------------------------------------------------------

TvDeblurPotential::TvDeblurPotential(std::shared_ptr<const BlurOperator> blur,
                                     Vector observation, double noise_variance,
                                     double tv_weight, double tikhonov_weight)
    : blur_(std::move(blur)),
      observation_(std::move(observation)),
      noise_variance_(noise_variance),
      tv_weight_(tv_weight),
      tikhonov_weight_(tikhonov_weight) {
  if (!blur_) {
    throw Error(ErrorCode::InvalidArgument, "TV deblur needs a blur operator");
  }
  require_dimension(observation_, blur_->pixels(), "TvDeblurPotential");
  require_positive(noise_variance_, "noise_variance");
  prior_ = std::make_shared<const TvRidgePotential>(
      tv_weight_, tikhonov_weight_, blur_->width(), blur_->height());
  adjoint_observation_ = blur_->adjoint(observation_);
}

TvDeblurTerms TvDeblurPotential::terms(const Vector& x) const {
  check_dimension(x, "TvDeblurPotential::value");
  TvDeblurTerms t;
  t.data = (blur_->apply(x) - observation_).squaredNorm() /
           (2.0 * noise_variance_);
  if (tv_weight_ > 0.0) {
    t.tv = tv_weight_ * total_variation(x, width(), height());
  }
  t.ridge = 0.5 * tikhonov_weight_ * x.squaredNorm();
  return t;
}

double TvDeblurPotential::value(const Vector& x) const {
  return terms(x).total();
}

std::optional<Vector> TvDeblurPotential::smooth_part_gradient(
    const Vector& x) const {
  check_dimension(x, "TvDeblurPotential::smooth_part_gradient");
  return Vector((blur_->apply_normal(x) - adjoint_observation_) /
                noise_variance_);
}

Vector TvDeblurPotential::subgradient_select(const Vector& x) const {
  Vector g = *smooth_part_gradient(x);
  g += prior_->subgradient_select(x);
  return g;
}

}  // namespace ipula
