#include "svyfosr/pspline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "svyfosr/errors.hpp"

namespace svyfosr {

int SmootherSpec::resolve_basis_dim(Eigen::Index num_points) const {
  if (basis_dim > 0) return basis_dim;
  int k = std::min<int>(static_cast<int>((num_points + 3) / 4), 35);
  return std::max(k, penalty_order + 2);
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& grid, int basis_dim, int degree) {
  const Eigen::Index L = grid.size();
  const int d = degree;
  const int nseg = basis_dim - d;
  if (nseg < 1) throw SchemaError("basis_dim must exceed spline degree");
  const double a = grid[0];
  const double b = grid[L - 1];
  const double h = (b - a) / nseg;

  // Knots t_j = a + (j - d) h, j = 0..basis_dim + d (uniform, unclamped).
  auto knot = [&](int j) { return a + (j - d) * h; };

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(L, basis_dim);
  std::vector<double> N(static_cast<std::size_t>(d) + 1);
  for (Eigen::Index r = 0; r < L; ++r) {
    const double x = grid[r];
    int seg = static_cast<int>(std::floor((x - a) / h));
    seg = std::clamp(seg, 0, nseg - 1);
    const int i = seg + d;  // knot interval index: t_i <= x < t_{i+1}

    // Cox-de Boor triangle over the d+1 nonzero functions i-d..i.
    N.assign(N.size(), 0.0);
    N[static_cast<std::size_t>(d)] = 1.0;
    for (int k = 1; k <= d; ++k) {
      for (int j = d - k; j <= d; ++j) {
        const int fn = i - d + j;  // basis function index at this level
        const double t1 = knot(fn);
        const double t2 = knot(fn + k);
        const double t3 = knot(fn + 1);
        const double t4 = knot(fn + k + 1);
        double left = 0.0, right = 0.0;
        if (j > d - k) left = N[static_cast<std::size_t>(j)] * (x - t1) / (t2 - t1);
        if (j < d) right = N[static_cast<std::size_t>(j) + 1] * (t4 - x) / (t4 - t3);
        N[static_cast<std::size_t>(j)] = left + right;
      }
    }
    for (int j = 0; j <= d; ++j) B(r, i - d + j) = N[static_cast<std::size_t>(j)];
  }
  return B;
}

Eigen::MatrixXd difference_matrix(int basis_dim, int order) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(basis_dim, basis_dim);
  for (int q = 0; q < order; ++q) {
    Eigen::MatrixXd step =
        Eigen::MatrixXd::Zero(basis_dim - q - 1, basis_dim - q);
    for (int r = 0; r < basis_dim - q - 1; ++r) {
      step(r, r) = -1.0;
      step(r, r + 1) = 1.0;
    }
    D = step * D;
  }
  return D;
}

BasisCache make_basis_cache(const Eigen::VectorXd& grid, const SmootherSpec& spec) {
  const int K = spec.resolve_basis_dim(grid.size());
  if (K < spec.penalty_order + 2)
    throw SchemaError("basis_dim must be at least penalty_order + 2");
  if (grid.size() < K)
    throw SchemaError("grid has " + std::to_string(grid.size()) +
                      " points but basis_dim is " + std::to_string(K) +
                      "; choose a smaller basis");
  BasisCache c;
  c.grid = grid;
  c.degree = spec.degree;
  c.penalty_order = spec.penalty_order;
  c.basis = bspline_basis(grid, K, spec.degree);
  c.btb = c.basis.transpose() * c.basis;
  c.diff = difference_matrix(K, spec.penalty_order);
  c.penalty = c.diff.transpose() * c.diff;
  return c;
}

Eigen::VectorXd smooth_row(const BasisCache& cache, const Eigen::VectorXd& y,
                           double lambda) {
  if (lambda < 0.0) throw SchemaError("lambda must be nonnegative");
  // Stacked least-squares form [B; sqrt(lambda) D] theta = [y; 0]: same
  // minimizer as the normal equations but with the square root of their
  // condition number, which matters for very large lambda.
  const Eigen::Index L = cache.basis.rows();
  const Eigen::Index K = cache.basis.cols();
  const Eigen::Index R = cache.diff.rows();
  Eigen::MatrixXd A(L + R, K);
  A.topRows(L) = cache.basis;
  A.bottomRows(R) = std::sqrt(lambda) * cache.diff;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L + R);
  rhs.head(L) = y;
  const Eigen::VectorXd theta = Eigen::HouseholderQR<Eigen::MatrixXd>(A).solve(rhs);
  return cache.basis * theta;
}

double select_lambda_gcv(const BasisCache& cache, const Eigen::VectorXd& y) {
  const Eigen::Index L = y.size();
  const Eigen::VectorXd bty = cache.basis.transpose() * y;

  auto gcv = [&](double lambda) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cache.btb + lambda * cache.penalty);
    const Eigen::VectorXd theta = ldlt.solve(bty);
    const double rss = (y - cache.basis * theta).squaredNorm();
    const double edf = ldlt.solve(cache.btb).trace();
    const double denom = static_cast<double>(L) - edf;
    if (denom <= 1e-8) return std::numeric_limits<double>::infinity();
    return static_cast<double>(L) * rss / (denom * denom);
  };

  // Coarse log10 sweep, then one refinement pass around the minimum.
  double best_lambda = 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double e = -8.0; e <= 8.0; e += 0.5) {
    const double lam = std::pow(10.0, e);
    const double g = gcv(lam);
    if (g < best) {
      best = g;
      best_lambda = lam;
    }
  }
  const double center = std::log10(best_lambda);
  for (double e = center - 0.45; e <= center + 0.45; e += 0.1) {
    const double lam = std::pow(10.0, e);
    const double g = gcv(lam);
    if (g < best) {
      best = g;
      best_lambda = lam;
    }
  }
  return best_lambda;
}

SmoothedCoefficients smooth_coefficients(const Eigen::MatrixXd& raw,
                                         const Eigen::VectorXd& grid,
                                         const SmootherSpec& spec) {
  SmoothedCoefficients out;
  out.cache = make_basis_cache(grid, spec);
  const Eigen::Index P = raw.rows();
  out.beta_hat.resize(P, raw.cols());
  out.lambdas.resize(P);
  for (Eigen::Index p = 0; p < P; ++p) {
    const Eigen::VectorXd row = raw.row(p);
    const double lam = spec.lambda >= 0.0 ? spec.lambda : select_lambda_gcv(out.cache, row);
    out.lambdas[p] = lam;
    out.beta_hat.row(p) = smooth_row(out.cache, row, lam);
  }
  return out;
}

Eigen::MatrixXd smooth_with_fixed_lambda(const Eigen::MatrixXd& raw,
                                         const Eigen::VectorXd& lambdas,
                                         const BasisCache& cache) {
  if (lambdas.size() != raw.rows())
    throw SchemaError("one lambda per coefficient row required");
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index p = 0; p < raw.rows(); ++p)
    out.row(p) = smooth_row(cache, raw.row(p), lambdas[p]);
  return out;
}

}  // namespace svyfosr
