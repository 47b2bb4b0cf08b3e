#pragma once

// Poincare-ball geometry (curvature -1).
//
// Every function here is pure apart from the clamp counters, which are
// atomics and may be read from any thread.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace wlhn::hypgeo {

using Vector = Eigen::VectorXd;

/// Points are kept at Euclidean norm <= 1 - kBoundaryEps.
inline constexpr double kBoundaryEps = 1e-7;

struct Diagnostics {
  std::uint64_t boundary_clamps = 0;    // constructor pulled a point inside
  std::uint64_t acosh_clamps = 0;       // acosh argument raised to 1
  std::uint64_t artanh_clamps = 0;      // artanh argument capped
  std::uint64_t denominator_clamps = 0; // Mobius denominator floored
};

Diagnostics diagnostics();
void reset_diagnostics();
/// For batched code that clamps rows itself.
void count_boundary_clamps(std::uint64_t n);

/// acosh(max(x, 1)); counts the clamp.
double acosh_clamped(double x);
/// artanh(min(max(x, 0), 1 - kBoundaryEps)); counts the clamp.
double artanh_clamped(double x);

/// A point of the open unit ball. Construction clamps the norm to
/// 1 - kBoundaryEps.
class BallPoint {
 public:
  BallPoint() = default;
  explicit BallPoint(Vector coords);
  BallPoint(std::initializer_list<double> coords);

  static BallPoint origin(Eigen::Index dim);

  const Vector& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double squared_norm() const { return coords_.squaredNorm(); }
  double norm() const { return coords_.norm(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }

  BallPoint operator-() const;

 private:
  Vector coords_;
};

/// Element of the tangent space at some base point. No norm bound.
struct TangentVector {
  Vector coords;

  TangentVector() = default;
  explicit TangentVector(Vector c) : coords(std::move(c)) {}
  TangentVector(std::initializer_list<double> c);

  double norm() const { return coords.norm(); }
};

/// lambda_x = 2 / (1 - |x|^2).
double conformal_factor(const BallPoint& x);

double distance(const BallPoint& x, const BallPoint& y);

/// Distance of x from the origin, 2 artanh |x|.
double distance_from_origin(const BallPoint& x);

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);

BallPoint exp_map(const BallPoint& x, const TangentVector& v);
TangentVector log_map(const BallPoint& x, const BallPoint& y);

/// Circle inversion that swaps `a` and the origin.
///
/// The inverting sphere has center c = a/|a|^2 and radius^2 = 1/|a|^2 - 1,
/// so it meets the unit sphere orthogonally; the map is a hyperbolic
/// isometry and its own inverse. For a = 0 it is the identity.
class Inversion {
 public:
  explicit Inversion(const Vector& a);

  Vector apply(const Vector& x) const;
  BallPoint apply(const BallPoint& x) const;

  bool is_identity() const { return identity_; }
  const Vector& center() const { return center_; }
  double radius_squared() const { return radius_sq_; }

 private:
  bool identity_ = true;
  Vector center_;
  double radius_sq_ = 0.0;
};

/// Below this norm an inversion degenerates to the identity.
inline constexpr double kInversionMinNorm = 1e-15;

/// Maps a to 0 (and 0 to a) for every point in `points`.
std::vector<BallPoint> reflect_to_origin(const BallPoint& a,
                                         std::span<const BallPoint> points);

/// Householder reflection H = I - 2 q q^T sending unit vector `from` onto
/// unit vector `to`. Identity when the two nearly coincide.
class Householder {
 public:
  Householder(const Vector& from, const Vector& to);

  Vector apply(const Vector& p) const;
  bool is_identity() const { return identity_; }
  const Vector& axis() const { return axis_; }

 private:
  bool identity_ = true;
  Vector axis_;
};

inline constexpr double kHouseholderMinGap = 1e-12;

std::vector<Vector> rotate_about_origin(const Vector& from, const Vector& to,
                                        std::span<const Vector> points);

}  // namespace wlhn::hypgeo
