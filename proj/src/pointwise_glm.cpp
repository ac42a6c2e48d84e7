#include "svyfosr/pointwise_glm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>

#include "svyfosr/errors.hpp"

namespace svyfosr {

namespace {

constexpr double kEtaClamp = 30.0;  // Bernoulli separation guard

void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                Eigen::Index p) {
  if (qr.rank() < p) {
    const auto& perm = qr.colsPermutation().indices();
    throw NumericError("weighted design is rank deficient (rank " +
                       std::to_string(qr.rank()) + " of " + std::to_string(p) +
                       "); first dependent pivot is column " +
                       std::to_string(perm[qr.rank()]));
  }
}

}  // namespace

RawCoefficientMatrix fit_pointwise_gaussian(const Eigen::MatrixXd& X,
                                            const Eigen::MatrixXd& Y,
                                            const Eigen::VectorXd& w) {
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  check_rank(qr, p);

  // Full rank established; the multi-RHS solve goes through the normal
  // equations, which cost one n*P*L product instead of applying Q' to Y.
  Eigen::MatrixXd gram(p, p);
  gram.noalias() = Xw.transpose() * Xw;
  Eigen::MatrixXd xty(p, Y.cols());
  xty.noalias() = Xw.transpose() * (sw.asDiagonal() * Y);

  RawCoefficientMatrix out;
  out.beta = gram.llt().solve(xty);
  out.converged.assign(static_cast<std::size_t>(Y.cols()), 1);
  out.iterations.assign(static_cast<std::size_t>(Y.cols()), 1);
  return out;
}

RawCoefficientMatrix fit_pointwise_irls(const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& Y,
                                        const Eigen::VectorXd& w, Family family,
                                        double tol, int max_iter) {
  if (family == Family::Gaussian) return fit_pointwise_gaussian(X, Y, w);

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index L = Y.cols();

  {
    // Rank check with the base weights; working weights only rescale rows.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(
        Eigen::MatrixXd(w.array().sqrt().matrix().asDiagonal() * X));
    check_rank(qr, p);
  }

  // Standard mean initialization, then eta = link(mu).
  Eigen::MatrixXd Mu(n, L);
  if (family == Family::Bernoulli)
    Mu = (Y.array() + 0.5) / 2.0;
  else
    Mu = Y.array() + 0.1;
  Eigen::MatrixXd Eta(n, L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index i = 0; i < n; ++i) Eta(i, l) = link(family, Mu(i, l));

  RawCoefficientMatrix out;
  out.beta = Eigen::MatrixXd::Zero(p, L);
  out.converged.assign(static_cast<std::size_t>(L), 0);
  out.iterations.assign(static_cast<std::size_t>(L), 0);
  std::vector<std::uint8_t> clamped(static_cast<std::size_t>(L), 0);

  std::vector<Eigen::Index> active(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) active[static_cast<std::size_t>(l)] = l;

  Eigen::VectorXd ww(n), z(n), beta_new(p);
  Eigen::MatrixXd A(p, p);
  Eigen::VectorXd rhs(p);

  for (int iter = 1; iter <= max_iter && !active.empty(); ++iter) {
    std::vector<Eigen::Index> still_active;
    still_active.reserve(active.size());
    for (Eigen::Index l : active) {
      // Canonical link: dmu/deta = V(mu), so the working weight is w*V and
      // the working response is eta + (y - mu)/V.
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = inv_link(family, Eta(i, l));
        const double v = std::max(variance(family, mu), 1e-10);
        ww[i] = w[i] * v;
        z[i] = Eta(i, l) + (Y(i, l) - mu) / v;
      }
      A.noalias() = X.transpose() * ww.asDiagonal() * X;
      rhs.noalias() = X.transpose() * (ww.array() * z.array()).matrix();
      beta_new = A.ldlt().solve(rhs);

      const double denom = std::max(out.beta.col(l).norm(), 1e-10);
      const double rel = (beta_new - out.beta.col(l)).norm() / denom;
      out.beta.col(l) = beta_new;
      out.iterations[static_cast<std::size_t>(l)] = iter;

      Eta.col(l).noalias() = X * beta_new;
      if (family == Family::Bernoulli) {
        if ((Eta.col(l).array().abs() > kEtaClamp).any()) {
          Eta.col(l) = Eta.col(l).cwiseMax(-kEtaClamp).cwiseMin(kEtaClamp);
          clamped[static_cast<std::size_t>(l)] = 1;
        }
      }

      if (rel < tol && iter > 1)
        out.converged[static_cast<std::size_t>(l)] = 1;  // frozen from here on
      else
        still_active.push_back(l);
    }
    active.swap(still_active);
  }

  for (std::size_t l = 0; l < clamped.size(); ++l)
    if (clamped[l]) out.converged[l] = 0;
  return out;
}

RawCoefficientMatrix fit_pointwise(const FunctionalDesignDataset& ds,
                                   const Eigen::VectorXd& w, Family family,
                                   double tol, int max_iter) {
  if (family == Family::Gaussian)
    return fit_pointwise_gaussian(ds.covariates, ds.outcomes, w);
  return fit_pointwise_irls(ds.covariates, ds.outcomes, w, family, tol, max_iter);
}

}  // namespace svyfosr
