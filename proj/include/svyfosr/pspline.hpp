#ifndef SVYFOSR_PSPLINE_HPP
#define SVYFOSR_PSPLINE_HPP

#include <Eigen/Core>
#include <vector>

namespace svyfosr {

/// P-spline smoother configuration. lambda < 0 means "select by GCV".
struct SmootherSpec {
  int basis_dim = 0;      // K_s; 0 = default min(ceil(L/4), 35)
  int degree = 3;         // cubic B-splines
  int penalty_order = 2;  // second-order difference penalty
  double lambda = -1.0;   // common starting value; per-row selection when < 0

  int resolve_basis_dim(Eigen::Index num_points) const;
};

/// Basis and penalty matrices for one grid, reusable across replicate fits.
struct BasisCache {
  Eigen::MatrixXd basis;    // L x K, uniform unclamped B-splines on [0,1]
  Eigen::MatrixXd btb;      // K x K
  Eigen::MatrixXd diff;     // (K-q) x K difference operator D
  Eigen::MatrixXd penalty;  // K x K, D'D
  Eigen::VectorXd grid;     // as used to build `basis`
  int degree = 0;
  int penalty_order = 0;
};

/// Smoothed coefficient functions plus everything needed to re-smooth
/// replicate estimates with the same lambdas.
struct SmoothedCoefficients {
  Eigen::MatrixXd beta_hat;  // P x L
  Eigen::VectorXd lambdas;   // P
  BasisCache cache;
};

/// B-spline basis with equally spaced (unclamped) knots over the grid range.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& grid, int basis_dim, int degree);

/// q-th order difference operator, (K-q) x K.
Eigen::MatrixXd difference_matrix(int basis_dim, int order);

BasisCache make_basis_cache(const Eigen::VectorXd& grid, const SmootherSpec& spec);

/// Penalized fit of one row: B (B'B + lambda D'D)^{-1} B' y.
Eigen::VectorXd smooth_row(const BasisCache& cache, const Eigen::VectorXd& y,
                           double lambda);

/// GCV(lambda) minimizer over a log-spaced grid.
double select_lambda_gcv(const BasisCache& cache, const Eigen::VectorXd& y);

/// Smooth each row of `raw`, selecting lambda per row by GCV when
/// spec.lambda < 0. Throws SchemaError when the grid is shorter than the
/// basis dimension.
SmoothedCoefficients smooth_coefficients(const Eigen::MatrixXd& raw,
                                         const Eigen::VectorXd& grid,
                                         const SmootherSpec& spec);

/// Same formula with fixed per-row lambdas and a prebuilt cache (replicate
/// path; no GCV search).
Eigen::MatrixXd smooth_with_fixed_lambda(const Eigen::MatrixXd& raw,
                                         const Eigen::VectorXd& lambdas,
                                         const BasisCache& cache);

}  // namespace svyfosr

#endif
