// Row-wise Poincare-ball maps with hand-derived vector-Jacobian products.
// Forward values go through wlhn::hypgeo so the differentiable path and
// the plain library agree bit for bit.

#include "wlhn/gradnet.hpp"
#include "wlhn/hypgeo.hpp"

#include <cmath>
#include <stdexcept>

namespace wlhn::grad {
namespace {

using RowVec = Eigen::RowVectorXd;

constexpr double kMaxNorm = 1.0 - hypgeo::kBoundaryEps;
constexpr double kSeriesCutoff = 1e-4;

// f(r) = artanh(r)/r and f'(r), with the argument capped like
// hypgeo::artanh_clamped.
void artanh_ratio(double r, double& f, double& df) {
  if (r < kSeriesCutoff) {
    f = 1.0 + r * r / 3.0;
    df = 2.0 * r / 3.0;
    return;
  }
  if (r > kMaxNorm) {
    const double a = std::atanh(kMaxNorm);
    f = a / r;
    df = -a / (r * r);
    return;
  }
  const double a = std::atanh(r);
  f = a / r;
  df = 1.0 / ((1.0 - r * r) * r) - a / (r * r);
}

// f(r) = tanh(r)/r and f'(r).
void tanh_ratio(double r, double& f, double& df) {
  if (r < kSeriesCutoff) {
    f = 1.0 - r * r / 3.0;
    df = -2.0 * r / 3.0;
    return;
  }
  const double th = std::tanh(r);
  f = th / r;
  df = (1.0 - th * th) / r - th / (r * r);
}

void require_rows(Var a, Var b, const char* op) {
  if (a.tape() != b.tape()) throw std::invalid_argument(std::string(op) + ": different tapes");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var log0_rows(Var y) {
  const Eigen::Index n = y.rows();
  Matrix out(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = y.value().row(i).norm();
    if (r == 0.0) {
      out.row(i).setZero();
    } else {
      out.row(i) = hypgeo::artanh_clamped(r) * y.value().row(i) / r;
    }
  }
  const int iy = y.id();
  return y.tape()->record(std::move(out), {iy}, [iy](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& yv = t.value(iy);
    Matrix& gy = t.grad(iy);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double r = yv.row(i).norm();
      double f, df;
      artanh_ratio(r, f, df);
      gy.row(i) += f * g.row(i);
      if (r > 0.0) gy.row(i) += (df * yv.row(i).dot(g.row(i)) / r) * yv.row(i);
    }
  });
}

Var exp0_rows(Var v) {
  const Eigen::Index n = v.rows();
  Matrix out(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = v.value().row(i).norm();
    if (r == 0.0) {
      out.row(i).setZero();
    } else {
      out.row(i) = std::tanh(r) * v.value().row(i) / r;
    }
  }
  const int iv = v.id();
  return v.tape()->record(std::move(out), {iv}, [iv](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& vv = t.value(iv);
    Matrix& gv = t.grad(iv);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double r = vv.row(i).norm();
      double f, df;
      tanh_ratio(r, f, df);
      gv.row(i) += f * g.row(i);
      if (r > 0.0) gv.row(i) += (df * vv.row(i).dot(g.row(i)) / r) * vv.row(i);
    }
  });
}

Var inversion_rows(Var centers, Var x) {
  require_rows(centers, x, "inversion_rows");
  const Eigen::Index n = x.rows();
  Matrix out(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const hypgeo::Inversion inv(centers.value().row(i).transpose());
    out.row(i) = inv.apply(hypgeo::Vector(x.value().row(i).transpose())).transpose();
  }
  const int ia = centers.id(), ix = x.id();
  return x.tape()->record(std::move(out), {ia, ix}, [ia, ix](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& xv = t.value(ix);
    const bool need_a = t.requires_grad(ia);
    const bool need_x = t.requires_grad(ix);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const RowVec a = av.row(i);
      const double s = a.squaredNorm();
      if (std::sqrt(s) < hypgeo::kInversionMinNorm) {
        if (need_x) t.grad(ix).row(i) += g.row(i);
        continue;
      }
      const RowVec c = a / s;
      const double rho = 1.0 / s - 1.0;
      const RowVec y = xv.row(i) - c;
      const double nn = y.squaredNorm();
      const RowVec gi = g.row(i);
      const RowVec gy = rho * (gi / nn - (2.0 * y.dot(gi) / (nn * nn)) * y);
      if (need_x) t.grad(ix).row(i) += gy;
      if (need_a) {
        const RowVec gc = gi - gy;
        const double drho = gi.dot(y) / nn;
        t.grad(ia).row(i) += gc / s - (2.0 * a.dot(gc) / (s * s)) * a - (2.0 * drho / (s * s)) * a;
      }
    }
  });
}

Var householder_rows(Var targets, Var x, const Eigen::RowVectorXd& from) {
  require_rows(targets, x, "householder_rows");
  if (from.size() != x.cols()) throw std::invalid_argument("householder_rows: direction width");
  const Eigen::Index n = x.rows();
  Matrix out(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double un = targets.value().row(i).norm();
    if (un == 0.0) {
      out.row(i) = x.value().row(i);
      continue;
    }
    const hypgeo::Householder h(from.transpose(), targets.value().row(i).transpose() / un);
    out.row(i) = h.apply(hypgeo::Vector(x.value().row(i).transpose())).transpose();
  }
  const int iu = targets.id(), ix = x.id();
  return x.tape()->record(std::move(out), {iu, ix}, [iu, ix, from](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& uv = t.value(iu);
    const Matrix& xv = t.value(ix);
    const bool need_u = t.requires_grad(iu);
    const bool need_x = t.requires_grad(ix);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const RowVec gi = g.row(i);
      const double un = uv.row(i).norm();
      if (un == 0.0) {
        if (need_x) t.grad(ix).row(i) += gi;
        continue;
      }
      const RowVec uhat = uv.row(i) / un;
      const RowVec p = from - uhat;
      const double m = p.norm();
      if (m < hypgeo::kHouseholderMinGap) {
        if (need_x) t.grad(ix).row(i) += gi;
        continue;
      }
      const RowVec q = p / m;
      const double qg = q.dot(gi);
      if (need_x) t.grad(ix).row(i) += gi - (2.0 * qg) * q;
      if (need_u) {
        const RowVec xi = xv.row(i);
        const RowVec gq = -2.0 * (q.dot(xi) * gi + qg * xi);
        const RowVec gp = (gq - q.dot(gq) * q) / m;
        const RowVec guhat = -gp;
        t.grad(iu).row(i) += (guhat - uhat.dot(guhat) * uhat) / un;
      }
    }
  });
}

Var clamp_rows_to_ball(Var x, double max_norm) {
  const Eigen::Index n = x.rows();
  Matrix out = x.value();
  std::uint64_t clamped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = out.row(i).norm();
    if (r > max_norm) {
      out.row(i) *= max_norm / r;
      ++clamped;
    }
  }
  if (clamped == 0) return x;
  hypgeo::count_boundary_clamps(clamped);
  const int ix = x.id();
  return x.tape()->record(std::move(out), {ix}, [ix, max_norm](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(ix);
    Matrix& gx = t.grad(ix);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double r = xv.row(i).norm();
      if (r > max_norm) {
        gx.row(i) += max_norm * (g.row(i) / r - (xv.row(i).dot(g.row(i)) / (r * r * r)) * xv.row(i));
      } else {
        gx.row(i) += g.row(i);
      }
    }
  });
}

}  // namespace wlhn::grad
