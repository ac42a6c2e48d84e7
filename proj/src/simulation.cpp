#include "svyfosr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "svyfosr/errors.hpp"
#include "svyfosr/pointwise_glm.hpp"
#include "svyfosr/pspline.hpp"

namespace svyfosr {

ReMode re_mode_from_string(const std::string& s) {
  if (s == "none") return ReMode::None;
  if (s == "noise-only") return ReMode::NoiseOnly;
  if (s == "scaling-and-noise") return ReMode::ScalingAndNoise;
  throw SchemaError("unknown re-mode '" + s + "'");
}

Informativeness informativeness_from_string(const std::string& s) {
  if (s == "none") return Informativeness::None;
  if (s == "medium") return Informativeness::Medium;
  if (s == "high") return Informativeness::High;
  throw SchemaError("unknown informativeness '" + s + "'");
}

SubsampleScheme subsample_scheme_from_string(const std::string& s) {
  if (s == "uniform") return SubsampleScheme::Uniform;
  if (s == "weight-based") return SubsampleScheme::WeightBased;
  if (s == "outcome-based") return SubsampleScheme::OutcomeBased;
  if (s == "mixed") return SubsampleScheme::Mixed;
  throw SchemaError("unknown subsample scheme '" + s + "'");
}

void SuperpopulationConfig::validate() const {
  if (population_size < 1) throw SchemaError("population_size must be positive");
  if (strata < 1) throw SchemaError("strata must be >= 1");
  if (psu_min < 2 || psu_max < psu_min) throw SchemaError("bad psu range");
  if (re_basis_dim < 2) throw SchemaError("re_basis_dim must be >= 2");
  if (sigma_s < 0 || sigma_h < 0 || sigma_eps < 0)
    throw SchemaError("standard deviations must be nonnegative");
  if (grid_length < 2) throw SchemaError("grid_length must be >= 2");
  if (population_size * grid_length > max_cells)
    throw SchemaError(
        "population_size * grid_length exceeds the memory cap; reduce the "
        "population or use streaming generation");
}

double true_beta0(double s) {
  return 0.53 + 0.06 * std::sin(3.0 * M_PI * s) - 0.03 * std::cos(6.5 * M_PI * s);
}

double true_beta1(double s) {
  const double z = (s - 0.6) / 0.0225;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return phi / 20.0;
}

namespace {

std::vector<double> dirichlet(std::mt19937_64& rng, int k, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double informativeness_kappa(Informativeness level) {
  switch (level) {
    case Informativeness::None: return 0.0;
    case Informativeness::Medium: return 1.0;
    case Informativeness::High: return 2.0;
  }
  return 0.0;
}

// Scale raw scores so the clipped inclusion probabilities sum to `target`.
Eigen::VectorXd scale_to_expected_take(const Eigen::VectorXd& raw, double target) {
  const double total = raw.sum();
  if (total <= 0.0) throw NumericError("all inclusion scores are zero");
  double c = target / total;
  Eigen::VectorXd pi;
  for (int pass = 0; pass < 50; ++pass) {
    pi = (c * raw.array()).min(1.0).max(1e-12);
    const double got = pi.sum();
    if (std::abs(got - target) < 1e-9 * std::max(1.0, target)) break;
    const double unclipped = (pi.array() < 1.0).select(raw, 0.0).sum();
    if (unclipped <= 0.0) break;  // everything at certainty
    c *= 1.0 + (target - got) / (c * unclipped);
  }
  return pi;
}

}  // namespace

Superpopulation generate_superpopulation(const SuperpopulationConfig& cfg_in) {
  SuperpopulationConfig cfg = cfg_in;
  if (cfg.snr_b > 0.0 || cfg.snr_eps > 0.0) cfg = calibrate_variances(cfg);
  cfg.validate();

  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<Eigen::Index>(cfg.population_size);
  const Eigen::Index L = cfg.grid_length;
  const int H = cfg.strata;

  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(L, 0.0, 1.0);
  Eigen::VectorXd beta0(L), beta1(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    beta0[l] = true_beta0(grid[l]);
    beta1[l] = true_beta1(grid[l]);
  }

  // Stratum / PSU assignment probabilities.
  const std::vector<double> stratum_probs = dirichlet(rng, H, cfg.dirichlet_strata);
  std::uniform_int_distribution<int> psu_count(cfg.psu_min, cfg.psu_max);
  std::vector<int> psus_per_stratum(static_cast<std::size_t>(H));
  std::vector<std::vector<double>> psu_probs(static_cast<std::size_t>(H));
  std::vector<int> psu_offset(static_cast<std::size_t>(H));
  int total_psus = 0;
  for (int h = 0; h < H; ++h) {
    psus_per_stratum[static_cast<std::size_t>(h)] = psu_count(rng);
    psu_probs[static_cast<std::size_t>(h)] =
        dirichlet(rng, psus_per_stratum[static_cast<std::size_t>(h)], cfg.dirichlet_psu);
    psu_offset[static_cast<std::size_t>(h)] = total_psus;
    total_psus += psus_per_stratum[static_cast<std::size_t>(h)];
  }

  // Stratum slope scales and random-effect curves.
  const bool scaling = cfg.re_mode == ReMode::ScalingAndNoise;
  const bool noise = cfg.re_mode != ReMode::None;
  std::normal_distribution<double> std_normal(0.0, 1.0);
  TrueCoefficients truth;
  truth.beta0 = beta0;
  truth.beta1 = beta1;
  truth.gamma.assign(static_cast<std::size_t>(H), 1.0);
  if (scaling)
    for (int h = 0; h < H; ++h)
      truth.gamma[static_cast<std::size_t>(h)] = 1.0 + cfg.sigma_s * std_normal(rng);

  const Eigen::MatrixXd re_basis = bspline_basis(grid, cfg.re_basis_dim, 3);
  Eigen::MatrixXd stratum_re = Eigen::MatrixXd::Zero(H, L);
  Eigen::MatrixXd psu_re = Eigen::MatrixXd::Zero(total_psus, L);
  if (noise) {
    Eigen::VectorXd coef(cfg.re_basis_dim);
    for (int h = 0; h < H; ++h) {
      for (int k = 0; k < cfg.re_basis_dim; ++k) coef[k] = cfg.sigma_h * std_normal(rng);
      stratum_re.row(h) = (re_basis * coef).transpose();
    }
    const double psu_sd = cfg.sigma_h / std::sqrt(2.0);  // half the stratum variance
    for (int c = 0; c < total_psus; ++c) {
      for (int k = 0; k < cfg.re_basis_dim; ++k) coef[k] = psu_sd * std_normal(rng);
      psu_re.row(c) = (re_basis * coef).transpose();
    }
  }

  std::discrete_distribution<int> pick_stratum(stratum_probs.begin(), stratum_probs.end());
  std::vector<std::discrete_distribution<int>> pick_psu;
  pick_psu.reserve(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h)
    pick_psu.emplace_back(psu_probs[static_cast<std::size_t>(h)].begin(),
                          psu_probs[static_cast<std::size_t>(h)].end());

  Superpopulation pop;
  pop.config = cfg;
  pop.truth = truth;
  auto& ds = pop.data;
  ds.outcomes.resize(n, L);
  ds.covariates.resize(n, 2);
  ds.weights = Eigen::VectorXd::Ones(n);
  ds.stratum_ids.resize(static_cast<std::size_t>(n));
  ds.psu_ids.resize(static_cast<std::size_t>(n));
  ds.grid = grid;
  ds.original_grid = grid;
  ds.covariate_names = {"(intercept)", "x"};
  for (int h = 0; h < H; ++h) ds.stratum_labels.push_back(std::to_string(h));
  for (int c = 0; c < total_psus; ++c) ds.psu_labels.push_back(std::to_string(c));

  const double x_sd = std::sqrt(2.0);  // X ~ N(0, variance 2)
  Eigen::VectorXd eta(L);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int h = pick_stratum(rng);
    const int c = psu_offset[static_cast<std::size_t>(h)] + pick_psu[static_cast<std::size_t>(h)](rng);
    const double x = x_sd * std_normal(rng);
    ds.stratum_ids[static_cast<std::size_t>(i)] = h;
    ds.psu_ids[static_cast<std::size_t>(i)] = c;
    ds.covariates(i, 0) = 1.0;
    ds.covariates(i, 1) = x;

    const double slope_scale = truth.gamma[static_cast<std::size_t>(h)];
    eta = beta0 + x * slope_scale * beta1;
    if (noise) eta += stratum_re.row(h).transpose() + psu_re.row(c).transpose();

    switch (cfg.family) {
      case Family::Gaussian:
        for (Eigen::Index l = 0; l < L; ++l)
          ds.outcomes(i, l) = eta[l] + cfg.sigma_eps * std_normal(rng);
        break;
      case Family::Bernoulli:
        for (Eigen::Index l = 0; l < L; ++l) {
          std::bernoulli_distribution bern(logistic(eta[l]));
          ds.outcomes(i, l) = bern(rng) ? 1.0 : 0.0;
        }
        break;
      case Family::Poisson:
        for (Eigen::Index l = 0; l < L; ++l) {
          std::poisson_distribution<long> pois(std::exp(eta[l]));
          ds.outcomes(i, l) = static_cast<double>(pois(rng));
        }
        break;
    }
  }
  return pop;
}

SuperpopulationConfig calibrate_variances(const SuperpopulationConfig& cfg_in,
                                          long long pilot_size) {
  if (cfg_in.snr_b <= 0.0 && cfg_in.snr_eps <= 0.0)
    throw SchemaError("calibration requires a positive SNR target");
  SuperpopulationConfig cfg = cfg_in;
  std::mt19937_64 rng(cfg.seed ^ 0x70696c6f74ULL);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const Eigen::Index L = cfg.grid_length;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(L, 0.0, 1.0);
  Eigen::VectorXd beta0(L), beta1(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    beta0[l] = true_beta0(grid[l]);
    beta1[l] = true_beta1(grid[l]);
  }
  const Eigen::MatrixXd re_basis = bspline_basis(grid, cfg.re_basis_dim, 3);
  const double x_sd = std::sqrt(2.0);
  const auto m = static_cast<Eigen::Index>(pilot_size);

  // SD of the fixed-effect part over pilot individuals and the grid.
  double sum = 0.0, sumsq = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = x_sd * std_normal(rng);
    for (Eigen::Index l = 0; l < L; ++l) {
      const double f = beta0[l] + x * beta1[l];
      sum += f;
      sumsq += f * f;
    }
  }
  const double cells = static_cast<double>(m) * static_cast<double>(L);
  const double sd_fixed = std::sqrt(std::max(sumsq / cells - (sum / cells) * (sum / cells), 0.0));

  // SD of b_h + b_c at unit sigma_h (PSU coefficients at variance 1/2).
  double sd_re_unit = 0.0;
  if (cfg.re_mode != ReMode::None) {
    double rsum = 0.0, rsumsq = 0.0;
    Eigen::VectorXd coef(cfg.re_basis_dim);
    const Eigen::Index draws = std::max<Eigen::Index>(m / 10, 200);
    for (Eigen::Index d = 0; d < draws; ++d) {
      for (int k = 0; k < cfg.re_basis_dim; ++k)
        coef[k] = std_normal(rng) + std_normal(rng) / std::sqrt(2.0);
      const Eigen::VectorXd b = re_basis * coef;
      rsum += b.sum();
      rsumsq += b.squaredNorm();
    }
    const double rcells = static_cast<double>(draws) * static_cast<double>(L);
    sd_re_unit = std::sqrt(std::max(rsumsq / rcells - (rsum / rcells) * (rsum / rcells), 0.0));
  }

  if (cfg.snr_b > 0.0) {
    if (cfg.re_mode == ReMode::None)
      cfg.sigma_h = 0.0;
    else
      cfg.sigma_h = sd_fixed / (cfg.snr_b * std::max(sd_re_unit, 1e-12));
  }

  if (cfg.snr_eps > 0.0) {
    // SD of the full linear predictor with the calibrated sigma_h in place.
    double esum = 0.0, esumsq = 0.0;
    Eigen::VectorXd coef(cfg.re_basis_dim);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = x_sd * std_normal(rng);
      const double g = cfg.re_mode == ReMode::ScalingAndNoise
                           ? 1.0 + cfg.sigma_s * std_normal(rng)
                           : 1.0;
      Eigen::VectorXd eta = beta0 + x * g * beta1;
      if (cfg.re_mode != ReMode::None) {
        for (int k = 0; k < cfg.re_basis_dim; ++k)
          coef[k] = cfg.sigma_h * (std_normal(rng) + std_normal(rng) / std::sqrt(2.0));
        eta += re_basis * coef;
      }
      esum += eta.sum();
      esumsq += eta.squaredNorm();
    }
    const double sd_eta =
        std::sqrt(std::max(esumsq / cells - (esum / cells) * (esum / cells), 0.0));
    cfg.sigma_eps = sd_eta / cfg.snr_eps;
  }

  cfg.snr_b = 0.0;  // calibrated; avoid re-running on generate
  cfg.snr_eps = 0.0;
  return cfg;
}

namespace {

// Assemble a sampled subset into a fresh dataset with dense stratum/PSU ids.
SampleDraw assemble_sample(const FunctionalDesignDataset& pop,
                           const std::vector<int>& rows,
                           const Eigen::VectorXd& pi1_rows,
                           const Eigen::VectorXd& pi2_rows) {
  if (rows.empty()) throw NumericError("sample came out empty");
  SampleDraw out;
  auto& ds = out.sample;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index L = pop.num_points();
  ds.outcomes.resize(n, L);
  ds.covariates.resize(n, pop.num_covariates());
  ds.weights.resize(n);
  ds.stratum_ids.resize(static_cast<std::size_t>(n));
  ds.psu_ids.resize(static_cast<std::size_t>(n));
  ds.grid = pop.grid;
  ds.original_grid = pop.original_grid;
  ds.covariate_names = pop.covariate_names;
  out.probs.pi1.resize(n);
  out.probs.pi2.resize(n);

  std::vector<int> stratum_map, psu_map;  // old id -> dense new id
  auto dense = [](std::vector<int>& map, int old_id) {
    if (old_id >= static_cast<int>(map.size())) map.resize(static_cast<std::size_t>(old_id) + 1, -1);
    return map[static_cast<std::size_t>(old_id)];
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = rows[static_cast<std::size_t>(k)];
    ds.outcomes.row(k) = pop.outcomes.row(i);
    ds.covariates.row(k) = pop.covariates.row(i);
    ds.weights[k] = 1.0 / (pi1_rows[k] * pi2_rows[k]);
    out.probs.pi1[k] = pi1_rows[k];
    out.probs.pi2[k] = pi2_rows[k];

    const int oh = pop.stratum_ids[static_cast<std::size_t>(i)];
    if (dense(stratum_map, oh) < 0) {
      stratum_map[static_cast<std::size_t>(oh)] = static_cast<int>(ds.stratum_labels.size());
      ds.stratum_labels.push_back(
          oh < static_cast<int>(pop.stratum_labels.size())
              ? pop.stratum_labels[static_cast<std::size_t>(oh)]
              : std::to_string(oh));
    }
    ds.stratum_ids[static_cast<std::size_t>(k)] = stratum_map[static_cast<std::size_t>(oh)];

    const int oc = pop.psu_ids[static_cast<std::size_t>(i)];
    if (dense(psu_map, oc) < 0) {
      psu_map[static_cast<std::size_t>(oc)] = static_cast<int>(ds.psu_labels.size());
      ds.psu_labels.push_back(oc < static_cast<int>(pop.psu_labels.size())
                                  ? pop.psu_labels[static_cast<std::size_t>(oc)]
                                  : std::to_string(oc));
    }
    ds.psu_ids[static_cast<std::size_t>(k)] = psu_map[static_cast<std::size_t>(oc)];
  }
  ds.validate();
  out.grid = pop.grid;
  return out;
}

}  // namespace

SampleDraw draw_two_stage_sample(const Superpopulation& pop, int per_psu_n,
                                 Informativeness informativeness,
                                 std::uint64_t seed) {
  if (per_psu_n < 1) throw SchemaError("per_psu_n must be >= 1");
  const DesignSummary design = summarize_design(pop.data);
  std::mt19937_64 rng(seed);
  const double kappa = informativeness_kappa(informativeness);

  std::vector<int> rows;
  std::vector<double> pi1_v, pi2_v;

  for (int h = 0; h < design.strata_count; ++h) {
    const auto& psus = design.stratum_psus[static_cast<std::size_t>(h)];
    if (psus.size() < 2)
      throw DesignError("stratum " + std::to_string(h) + " has fewer than 2 PSUs");

    double stratum_size = 0.0;
    std::vector<double> sizes(psus.size());
    for (std::size_t k = 0; k < psus.size(); ++k) {
      sizes[k] = static_cast<double>(design.psu_members[static_cast<std::size_t>(psus[k])].size());
      stratum_size += sizes[k];
    }

    // Sequential PPSWOR draw of two PSUs, probability proportional to size.
    std::discrete_distribution<int> first(sizes.begin(), sizes.end());
    const int k1 = first(rng);
    std::vector<double> rest = sizes;
    rest[static_cast<std::size_t>(k1)] = 0.0;
    std::discrete_distribution<int> second(rest.begin(), rest.end());
    const int k2 = second(rng);

    for (int k : {k1, k2}) {
      const int psu = psus[static_cast<std::size_t>(k)];
      // Stored first-stage probability: standard 2 * size / stratum size
      // approximation for a 2-draw PPSWOR, capped below 1.
      const double pi1 =
          std::min(2.0 * sizes[static_cast<std::size_t>(k)] / stratum_size, 0.999);

      const auto& members = design.psu_members[static_cast<std::size_t>(psu)];
      const auto msize = static_cast<Eigen::Index>(members.size());
      Eigen::VectorXd ybar(msize);
      for (Eigen::Index j = 0; j < msize; ++j)
        ybar[j] = pop.data.outcomes.row(members[static_cast<std::size_t>(j)]).mean();
      const double mu = ybar.mean();
      const double sd = std::sqrt((ybar.array() - mu).square().sum() /
                                  std::max<double>(msize - 1, 1));
      Eigen::VectorXd score(msize);
      for (Eigen::Index j = 0; j < msize; ++j) {
        const double ysc = sd > 1e-12 ? (ybar[j] - mu) / sd : 0.0;
        score[j] = logistic(kappa * ysc);
      }
      const double take = std::min<double>(per_psu_n, static_cast<double>(msize));
      const Eigen::VectorXd pi2 = scale_to_expected_take(score, take);

      for (Eigen::Index j = 0; j < msize; ++j) {
        std::bernoulli_distribution keep(pi2[j]);
        if (keep(rng)) {
          rows.push_back(members[static_cast<std::size_t>(j)]);
          pi1_v.push_back(pi1);
          pi2_v.push_back(pi2[j]);
        }
      }
    }
  }

  SampleDraw out = assemble_sample(
      pop.data, rows,
      Eigen::Map<const Eigen::VectorXd>(pi1_v.data(), static_cast<Eigen::Index>(pi1_v.size())),
      Eigen::Map<const Eigen::VectorXd>(pi2_v.data(), static_cast<Eigen::Index>(pi2_v.size())));
  out.beta0_true = pop.truth.beta0;
  out.beta1_true = pop.truth.beta1;
  return out;
}

SampleDraw empirical_subsample(const FunctionalDesignDataset& pop,
                               SubsampleScheme scheme, Eigen::Index n,
                               std::uint64_t seed) {
  if (n > pop.n()) throw SchemaError("subsample size exceeds population size");
  if (n < 1) throw SchemaError("subsample size must be positive");
  std::mt19937_64 rng(seed);
  const Eigen::Index m = pop.n();

  auto standardized = [&](const Eigen::VectorXd& v) {
    const double mu = v.mean();
    const double sd = std::sqrt((v.array() - mu).square().sum() / std::max<double>(m - 1, 1));
    Eigen::VectorXd out(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double z = sd > 1e-12 ? (v[i] - mu) / sd : 0.0;
      out[i] = std::clamp(z, -2.0, 2.0);  // truncate extreme scores
    }
    return out;
  };

  Eigen::VectorXd score(m);
  if (scheme == SubsampleScheme::Uniform) {
    score.setOnes();
  } else {
    const Eigen::VectorXd wsc = standardized(pop.weights);
    const Eigen::VectorXd msc = standardized(pop.outcomes.rowwise().mean());
    for (Eigen::Index i = 0; i < m; ++i) {
      double x = 0.0;
      switch (scheme) {
        case SubsampleScheme::WeightBased: x = wsc[i]; break;
        case SubsampleScheme::OutcomeBased: x = msc[i]; break;
        case SubsampleScheme::Mixed: x = 0.5 * wsc[i] + 0.5 * msc[i]; break;
        case SubsampleScheme::Uniform: break;
      }
      score[i] = logistic(x);
    }
  }

  const Eigen::VectorXd pi = scale_to_expected_take(score, static_cast<double>(n));
  std::vector<int> rows;
  std::vector<double> pi2_v;
  for (Eigen::Index i = 0; i < m; ++i) {
    std::bernoulli_distribution keep(pi[i]);
    if (keep(rng)) {
      rows.push_back(static_cast<int>(i));
      pi2_v.push_back(pi[i]);
    }
  }
  const auto taken = static_cast<Eigen::Index>(rows.size());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(taken);  // single stage
  return assemble_sample(
      pop, rows, ones,
      Eigen::Map<const Eigen::VectorXd>(pi2_v.data(), taken));
}

Eigen::MatrixXd superpopulation_reference_fit(const Superpopulation& pop) {
  if (pop.config.family == Family::Gaussian)
    return fit_pointwise_gaussian(pop.data.covariates, pop.data.outcomes,
                                  Eigen::VectorXd::Ones(pop.data.n()))
        .beta;
  return fit_pointwise_irls(pop.data.covariates, pop.data.outcomes,
                            Eigen::VectorXd::Ones(pop.data.n()), pop.config.family)
      .beta;
}

}  // namespace svyfosr
