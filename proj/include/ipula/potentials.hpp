#pragma once

#include <cstddef>
#include <memory>
#include <optional>

#include "ipula/blur.hpp"
#include "ipula/common.hpp"

namespace ipula {

// Potential U = f + g on R^n: f differentiable (possibly zero), g convex and
// possibly nonsmooth. Implementations are immutable after construction.
class CompositePotential {
 public:
  virtual ~CompositePotential() = default;

  virtual std::size_t dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  // Deterministic element of the subdifferential. At kinks sign(0) = 0.
  virtual Vector subgradient_select(const Vector& x) const = 0;
  // Certified strong-convexity modulus of U.
  virtual double strong_convexity() const = 0;

  // Element of the subdifferential at x closest to `target`, where the
  // potential can compute it; otherwise subgradient_select(x). Any return
  // value must lie in dU(x).
  virtual Vector subgradient_nearest(const Vector& x,
                                     const Vector& /*target*/) const {
    return subgradient_select(x);
  }

  // Closed-form prox_{gamma U}(x) when one exists.
  virtual std::optional<Vector> exact_prox(const Vector& /*x*/,
                                           double /*gamma*/) const {
    return std::nullopt;
  }

  // Gradient of the smooth part f, when U declares a splitting.
  virtual std::optional<Vector> smooth_part_gradient(
      const Vector& /*x*/) const {
    return std::nullopt;
  }

  // The nonsmooth part g as a standalone potential; nullptr means g == 0.
  // Only meaningful when smooth_part_gradient is available.
  virtual std::shared_ptr<const CompositePotential> nonsmooth_part() const {
    return nullptr;
  }

  // Zeroes structure (coordinates, differences) that sits within
  // `threshold` of a kink. The inner prox solver uses it to propose
  // candidates at which the sign(0)=0 selection applies; the default does
  // nothing.
  virtual bool snap_to_kinks(Vector& /*y*/, double /*threshold*/) const {
    return false;
  }

 protected:
  void check_dimension(const Vector& x, const char* what) const {
    require_dimension(x, dimension(), what);
  }
};

using PotentialPtr = std::shared_ptr<const CompositePotential>;

// (sigma/2)||x - center||^2. f = U, g = 0.
class QuadraticPotential final : public CompositePotential {
 public:
  QuadraticPotential(double sigma, Vector center);

  std::size_t dimension() const override {
    return static_cast<std::size_t>(center_.size());
  }
  double value(const Vector& x) const override;
  Vector subgradient_select(const Vector& x) const override;
  double strong_convexity() const override { return sigma_; }
  std::optional<Vector> exact_prox(const Vector& x,
                                   double gamma) const override;
  std::optional<Vector> smooth_part_gradient(const Vector& x) const override;

  double sigma() const noexcept { return sigma_; }
  const Vector& center() const noexcept { return center_; }

 private:
  double sigma_;
  Vector center_;
};

// weight * ||x||_1. Convex but not strongly convex; used as the g part of
// the elastic net. As a standalone potential it declares f = 0, g = U.
class L1Potential final : public CompositePotential {
 public:
  L1Potential(double weight, std::size_t dimension);

  std::size_t dimension() const override { return dimension_; }
  double value(const Vector& x) const override;
  Vector subgradient_select(const Vector& x) const override;
  double strong_convexity() const override { return 0.0; }
  Vector subgradient_nearest(const Vector& x,
                             const Vector& target) const override;
  std::optional<Vector> exact_prox(const Vector& x,
                                   double gamma) const override;
  std::optional<Vector> smooth_part_gradient(const Vector& x) const override;
  std::shared_ptr<const CompositePotential> nonsmooth_part() const override;
  bool snap_to_kinks(Vector& y, double threshold) const override;

 private:
  double weight_;
  std::size_t dimension_;
};

// l1_weight * ||x||_1 + (quad_weight/2) ||x||^2. f = ridge, g = l1.
class ElasticNetPotential final : public CompositePotential {
 public:
  ElasticNetPotential(double l1_weight, double quad_weight,
                      std::size_t dimension);

  std::size_t dimension() const override { return dimension_; }
  double value(const Vector& x) const override;
  Vector subgradient_select(const Vector& x) const override;
  double strong_convexity() const override { return quad_weight_; }
  Vector subgradient_nearest(const Vector& x,
                             const Vector& target) const override;
  std::optional<Vector> exact_prox(const Vector& x,
                                   double gamma) const override;
  std::optional<Vector> smooth_part_gradient(const Vector& x) const override;
  std::shared_ptr<const CompositePotential> nonsmooth_part() const override {
    return l1_;
  }
  bool snap_to_kinks(Vector& y, double threshold) const override;

  double l1_weight() const noexcept { return l1_weight_; }
  double quad_weight() const noexcept { return quad_weight_; }

 private:
  double l1_weight_;
  double quad_weight_;
  std::size_t dimension_;
  std::shared_ptr<const L1Potential> l1_;
};

// Anisotropic total variation with periodic forward differences on a
// row-major width x height grid.
double total_variation(const Vector& image, std::size_t width,
                       std::size_t height);
// D_h^T sign(D_h x) + D_v^T sign(D_v x), sign(0) = 0.
Vector total_variation_subgradient(const Vector& image, std::size_t width,
                                   std::size_t height);

// tv_weight * TV(x) + (tikhonov_weight/2) ||x||^2. The g part of the
// deblurring posterior.
class TvRidgePotential final : public CompositePotential {
 public:
  TvRidgePotential(double tv_weight, double tikhonov_weight,
                   std::size_t width, std::size_t height);

  std::size_t dimension() const override { return width_ * height_; }
  double value(const Vector& x) const override;
  Vector subgradient_select(const Vector& x) const override;
  double strong_convexity() const override { return tikhonov_weight_; }
  // Closed form only in the degenerate tv_weight == 0 case (ridge
  // shrinkage x / (1 + gamma * tikhonov_weight)).
  std::optional<Vector> exact_prox(const Vector& x,
                                   double gamma) const override;

 private:
  double tv_weight_;
  double tikhonov_weight_;
  std::size_t width_;
  std::size_t height_;
};

struct TvDeblurTerms {
  double data = 0.0;
  double tv = 0.0;
  double ridge = 0.0;
  double total() const { return data + tv + ridge; }
};

// ||Hx - y||^2 / (2 noise_variance) + tv_weight TV(x)
//   + (tikhonov_weight / 2) ||x||^2.
// f is the data term; g = TvRidgePotential. No closed-form prox.
class TvDeblurPotential final : public CompositePotential {
 public:
  TvDeblurPotential(std::shared_ptr<const BlurOperator> blur,
                    Vector observation, double noise_variance,
                    double tv_weight, double tikhonov_weight);

  std::size_t dimension() const override { return blur_->pixels(); }
  double value(const Vector& x) const override;
  TvDeblurTerms terms(const Vector& x) const;
  Vector subgradient_select(const Vector& x) const override;
  // Reported as tikhonov_weight: the only curvature certified uniformly.
  double strong_convexity() const override { return tikhonov_weight_; }
  std::optional<Vector> smooth_part_gradient(const Vector& x) const override;
  std::shared_ptr<const CompositePotential> nonsmooth_part() const override {
    return prior_;
  }

  std::size_t width() const noexcept { return blur_->width(); }
  std::size_t height() const noexcept { return blur_->height(); }
  double noise_variance() const noexcept { return noise_variance_; }
  double tv_weight() const noexcept { return tv_weight_; }
  double tikhonov_weight() const noexcept { return tikhonov_weight_; }
  const BlurOperator& blur() const noexcept { return *blur_; }
  const Vector& observation() const noexcept { return observation_; }

 private:
  std::shared_ptr<const BlurOperator> blur_;
  Vector observation_;
  Vector adjoint_observation_;
  double noise_variance_;
  double tv_weight_;
  double tikhonov_weight_;
  std::shared_ptr<const TvRidgePotential> prior_;
};

}  // namespace ipula
