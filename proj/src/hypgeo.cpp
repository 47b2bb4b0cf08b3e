#include "wlhn/hypgeo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace wlhn::hypgeo {
namespace {

std::atomic<std::uint64_t> g_boundary{0};
std::atomic<std::uint64_t> g_acosh{0};
std::atomic<std::uint64_t> g_artanh{0};
std::atomic<std::uint64_t> g_denominator{0};

constexpr double kMaxNorm = 1.0 - kBoundaryEps;
constexpr double kMinDenominator = 1e-15;

Vector clamp_to_ball(Vector v) {
  const double n = v.norm();
  if (n > kMaxNorm) {
    g_boundary.fetch_add(1, std::memory_order_relaxed);
    v *= kMaxNorm / n;
  }
  return v;
}

Vector mobius_add_raw(const Vector& x, const Vector& y) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  double denom = 1.0 + 2.0 * xy + x2 * y2;
  if (denom < kMinDenominator) {
    g_denominator.fetch_add(1, std::memory_order_relaxed);
    denom = kMinDenominator;
  }
  return ((1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y) / denom;
}

}  // namespace

Diagnostics diagnostics() {
  return {g_boundary.load(), g_acosh.load(), g_artanh.load(), g_denominator.load()};
}

void reset_diagnostics() {
  g_boundary = 0;
  g_acosh = 0;
  g_artanh = 0;
  g_denominator = 0;
}

void count_boundary_clamps(std::uint64_t n) { g_boundary.fetch_add(n, std::memory_order_relaxed); }

double acosh_clamped(double x) {
  if (!(x >= 1.0)) {
    g_acosh.fetch_add(1, std::memory_order_relaxed);
    x = 1.0;
  }
  return std::acosh(x);
}

double artanh_clamped(double x) {
  if (x < 0.0) {
    g_artanh.fetch_add(1, std::memory_order_relaxed);
    x = 0.0;
  } else if (x > kMaxNorm) {
    g_artanh.fetch_add(1, std::memory_order_relaxed);
    x = kMaxNorm;
  }
  return std::atanh(x);
}

BallPoint::BallPoint(Vector coords) : coords_(clamp_to_ball(std::move(coords))) {}

BallPoint::BallPoint(std::initializer_list<double> coords)
    : BallPoint(Vector(Eigen::Map<const Vector>(coords.begin(),
                                                static_cast<Eigen::Index>(coords.size())))) {}

BallPoint BallPoint::origin(Eigen::Index dim) { return BallPoint(Vector::Zero(dim)); }

BallPoint BallPoint::operator-() const { return BallPoint(Vector(-coords_)); }

TangentVector::TangentVector(std::initializer_list<double> c)
    : coords(Eigen::Map<const Vector>(c.begin(), static_cast<Eigen::Index>(c.size()))) {}

double conformal_factor(const BallPoint& x) { return 2.0 / (1.0 - x.squared_norm()); }

double distance(const BallPoint& x, const BallPoint& y) {
  const double diff = (x.coords() - y.coords()).squaredNorm();
  const double denom = (1.0 - x.squared_norm()) * (1.0 - y.squared_norm());
  // cosh d = 1 + 2 diff/denom, written through sinh(d/2) so that nearby
  // points keep their relative precision.
  return 2.0 * std::asinh(std::sqrt(diff / denom));
}

double distance_from_origin(const BallPoint& x) { return 2.0 * artanh_clamped(x.norm()); }

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  return BallPoint(mobius_add_raw(x.coords(), y.coords()));
}

BallPoint exp_map(const BallPoint& x, const TangentVector& v) {
  const double vn = v.norm();
  if (vn == 0.0) return x;
  const double lambda = conformal_factor(x);
  const Vector step = std::tanh(lambda * vn / 2.0) * v.coords / vn;
  return BallPoint(mobius_add_raw(x.coords(), clamp_to_ball(step)));
}

TangentVector log_map(const BallPoint& x, const BallPoint& y) {
  const Vector diff = mobius_add_raw(-x.coords(), y.coords());
  const double dn = diff.norm();
  if (dn == 0.0) return TangentVector(Vector::Zero(x.dim()));
  const double lambda = conformal_factor(x);
  return TangentVector((2.0 / lambda) * artanh_clamped(dn) * diff / dn);
}

Inversion::Inversion(const Vector& a) {
  const double s = a.squaredNorm();
  if (std::sqrt(s) < kInversionMinNorm) {
    identity_ = true;
    return;
  }
  identity_ = false;
  center_ = a / s;
  radius_sq_ = 1.0 / s - 1.0;
}

Vector Inversion::apply(const Vector& x) const {
  if (identity_) return x;
  const Vector offset = x - center_;
  return center_ + radius_sq_ * offset / offset.squaredNorm();
}

BallPoint Inversion::apply(const BallPoint& x) const { return BallPoint(apply(x.coords())); }

std::vector<BallPoint> reflect_to_origin(const BallPoint& a,
                                         std::span<const BallPoint> points) {
  const Inversion inv(a.coords());
  std::vector<BallPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(inv.apply(p));
  return out;
}

Householder::Householder(const Vector& from, const Vector& to) {
  const Vector gap = from - to;
  const double g = gap.norm();
  if (g < kHouseholderMinGap) {
    identity_ = true;
    return;
  }
  identity_ = false;
  axis_ = gap / g;
}

Vector Householder::apply(const Vector& p) const {
  if (identity_) return p;
  return p - 2.0 * axis_ * axis_.dot(p);
}

std::vector<Vector> rotate_about_origin(const Vector& from, const Vector& to,
                                        std::span<const Vector> points) {
  const Householder h(from, to);
  std::vector<Vector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(h.apply(p));
  return out;
}

}  // namespace wlhn::hypgeo
