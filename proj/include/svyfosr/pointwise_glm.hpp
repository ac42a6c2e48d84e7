#ifndef SVYFOSR_POINTWISE_GLM_HPP
#define SVYFOSR_POINTWISE_GLM_HPP

#include <Eigen/Core>
#include <vector>

#include "svyfosr/dataset.hpp"
#include "svyfosr/family.hpp"

namespace svyfosr {

/// Unsmoothed coefficient functions, one column per grid point.
struct RawCoefficientMatrix {
  Eigen::MatrixXd beta;             // P x L
  std::vector<std::uint8_t> converged;  // per column
  std::vector<int> iterations;          // per column

  bool all_converged() const {
    for (auto c : converged)
      if (!c) return false;
    return true;
  }
};

/// Weighted least squares at every grid point through one shared QR of the
/// weighted design: X_w = W^{1/2} X = QR, B = R^{-1} Q' W^{1/2} Y.
/// Throws NumericError naming the offending pivot column when X_w is
/// rank deficient. `w` may be replicate weights; zeros are allowed as long
/// as the weighted design keeps full rank.
RawCoefficientMatrix fit_pointwise_gaussian(const Eigen::MatrixXd& X,
                                            const Eigen::MatrixXd& Y,
                                            const Eigen::VectorXd& w);

/// Batched IRLS for Bernoulli/Poisson: all still-active grid points advance
/// together, sharing the linear-predictor update X * B as one product per
/// iteration. Convergence is relative coefficient change < tol; columns that
/// hit max_iter (or Bernoulli separation, |eta| clamped at 30) are returned
/// with converged = false.
RawCoefficientMatrix fit_pointwise_irls(const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& Y,
                                        const Eigen::VectorXd& w, Family family,
                                        double tol = 1e-8, int max_iter = 50);

RawCoefficientMatrix fit_pointwise(const FunctionalDesignDataset& ds,
                                   const Eigen::VectorXd& w, Family family,
                                   double tol = 1e-8, int max_iter = 50);

}  // namespace svyfosr

#endif
