#include "svyfosr/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "svyfosr/csv.hpp"
#include "svyfosr/errors.hpp"

namespace svyfosr {

BootType boot_type_from_string(const std::string& s) {
  if (s == "unweighted") return BootType::Unweighted;
  if (s == "weighted") return BootType::Weighted;
  if (s == "brr") return BootType::BRR;
  if (s == "rwyb") return BootType::RWYB;
  throw SchemaError("unknown boot type '" + s + "'");
}

const char* boot_type_name(BootType t) {
  switch (t) {
    case BootType::Unweighted: return "unweighted";
    case BootType::Weighted: return "weighted";
    case BootType::BRR: return "brr";
    case BootType::RWYB: return "rwyb";
  }
  return "?";
}

std::uint64_t replicate_stream_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over (seed, index)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ReplicateWeightSet resample_unweighted(Eigen::Index n, int num_replicates,
                                       std::uint64_t seed) {
  if (n < 1 || num_replicates < 1) throw SchemaError("need n >= 1 and B >= 1");
  ReplicateWeightSet out;
  out.scheme = BootType::Unweighted;
  out.seed = seed;
  out.replicates.resize(static_cast<std::size_t>(num_replicates));
  for (int b = 0; b < num_replicates; ++b) {
    std::mt19937_64 rng(replicate_stream_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) counts[pick(rng)] += 1.0;
    out.replicates[static_cast<std::size_t>(b)] = std::move(counts);
  }
  return out;
}

ReplicateWeightSet resample_survey_weighted(const Eigen::VectorXd& weights,
                                            int num_replicates, std::uint64_t seed) {
  const Eigen::Index n = weights.size();
  if (n < 1 || num_replicates < 1) throw SchemaError("need n >= 1 and B >= 1");
  if ((weights.array() <= 0.0).any()) throw ValidationError("weights must be positive");

  ReplicateWeightSet out;
  out.scheme = BootType::Weighted;
  out.seed = seed;
  out.replicates.resize(static_cast<std::size_t>(num_replicates));
  std::discrete_distribution<Eigen::Index> pick(weights.data(), weights.data() + n);
  for (int b = 0; b < num_replicates; ++b) {
    std::mt19937_64 rng(replicate_stream_seed(seed, static_cast<std::uint64_t>(b)));
    auto local_pick = pick;  // distribution state must not leak across replicates
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) counts[local_pick(rng)] += 1.0;
    out.replicates[static_cast<std::size_t>(b)] = std::move(counts);
  }
  return out;
}

ReplicateWeightSet resample_brr(const DesignSummary& design,
                                const std::vector<int>& row_psu_ids,
                                int num_replicates, std::uint64_t seed) {
  for (int h = 0; h < design.strata_count; ++h)
    if (design.psus_per_stratum[h] % 2 != 0)
      throw DesignError("BRR requires an even PSU count per stratum; stratum " +
                        std::to_string(h) + " has " +
                        std::to_string(design.psus_per_stratum[h]));

  const std::size_t n = row_psu_ids.size();
  ReplicateWeightSet out;
  out.scheme = BootType::BRR;
  out.seed = seed;
  out.replicates.resize(static_cast<std::size_t>(num_replicates));
  for (int b = 0; b < num_replicates; ++b) {
    std::mt19937_64 rng(replicate_stream_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<std::uint8_t> psu_selected(design.psu_members.size(), 0);
    for (int h = 0; h < design.strata_count; ++h) {
      std::vector<int> psus = design.stratum_psus[static_cast<std::size_t>(h)];
      std::shuffle(psus.begin(), psus.end(), rng);
      for (std::size_t k = 0; k < psus.size() / 2; ++k)
        psu_selected[static_cast<std::size_t>(psus[k])] = 1;
    }
    Eigen::VectorXd mult(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      mult[static_cast<Eigen::Index>(i)] =
          psu_selected[static_cast<std::size_t>(row_psu_ids[i])] ? 2.0 : 0.0;
    out.replicates[static_cast<std::size_t>(b)] = std::move(mult);
  }
  return out;
}

ReplicateWeightSet make_rwyb_weights(const DesignSummary& design,
                                     const std::vector<int>& row_psu_ids,
                                     const std::vector<int>& row_stratum_ids,
                                     const StageProbabilities& probs, int m1_rule,
                                     int num_replicates, std::uint64_t seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(row_psu_ids.size());
  if (probs.pi1.size() != n || probs.pi2.size() != n)
    throw SchemaError("stage probabilities must cover every row");
  if ((probs.pi1.array() <= 0.0).any() || (probs.pi1.array() > 1.0).any() ||
      (probs.pi2.array() <= 0.0).any() || (probs.pi2.array() > 1.0).any())
    throw ValidationError("stage probabilities must lie in (0, 1]");
  for (int h = 0; h < design.strata_count; ++h)
    if (design.psus_per_stratum[h] < 2)
      throw DesignError("RWYB needs >= 2 sampled PSUs per stratum; stratum " +
                        std::to_string(h) + " has " +
                        std::to_string(design.psus_per_stratum[h]));

  // pi1 is constant within a PSU; lift it to PSU level once.
  const std::size_t num_psus = design.psu_members.size();
  std::vector<double> psu_pi1(num_psus, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(row_psu_ids[static_cast<std::size_t>(i)]);
    psu_pi1[c] = probs.pi1[i];
  }

  ReplicateWeightSet out;
  out.scheme = BootType::RWYB;
  out.seed = seed;
  out.replicates.resize(static_cast<std::size_t>(num_replicates));

  for (int b = 0; b < num_replicates; ++b) {
    std::mt19937_64 rng(replicate_stream_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<double> a1_cal(num_psus, 1.0);

    // Stage 1: multinomial reselection of PSUs within each stratum, then
    // calibration so the adjustments sum to n1 exactly.
    for (int h = 0; h < design.strata_count; ++h) {
      const auto& psus = design.stratum_psus[static_cast<std::size_t>(h)];
      const int n1 = static_cast<int>(psus.size());
      const int m1 = m1_rule > 0 ? m1_rule : n1 - 1;

      std::vector<int> mstar(psus.size(), 0);
      std::uniform_int_distribution<int> pick(0, n1 - 1);
      for (int d = 0; d < m1; ++d) ++mstar[static_cast<std::size_t>(pick(rng))];

      std::vector<double> a1(psus.size());
      double sum_a1 = 0.0;
      for (std::size_t k = 0; k < psus.size(); ++k) {
        const double pi1 = psu_pi1[static_cast<std::size_t>(psus[k])];
        double a;
        if (pi1 >= 1.0) {
          a = 1.0;  // certainty PSU contributes no first-stage variability
        } else {
          const double r = std::sqrt(m1 * (1.0 - pi1) / (n1 - 1));
          a = 1.0 - r + r * (static_cast<double>(n1) / m1) * mstar[k];
        }
        a1[k] = a;
        sum_a1 += a;
      }
      const double scale = sum_a1 > 0.0 ? n1 / sum_a1 : 0.0;
      for (std::size_t k = 0; k < psus.size(); ++k)
        a1_cal[static_cast<std::size_t>(psus[k])] = a1[k] * scale;
    }

    // Stage 2: gamma adjustments with mean 1 and variance 1 - pi2, shrunk
    // toward 1 by the first-stage inclusion probability.
    Eigen::VectorXd mult(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(row_psu_ids[static_cast<std::size_t>(i)]);
      const double pi1 = psu_pi1[c];
      const double pi2 = probs.pi2[i];
      double a_tilde = 1.0;
      if (pi2 < 1.0) {
        std::gamma_distribution<double> gamma(1.0 / (1.0 - pi2), 1.0 - pi2);
        a_tilde = gamma(rng);
      }
      const double s = std::sqrt(pi1 / (2.0 - pi1));
      const double a2 = 1.0 - s + s * a_tilde;
      mult[i] = a1_cal[c] * a2;
    }
    out.replicates[static_cast<std::size_t>(b)] = std::move(mult);
  }
  (void)row_stratum_ids;
  return out;
}

Eigen::VectorXd replicate_fit_weights(const ReplicateWeightSet& set, std::size_t b,
                                      const Eigen::VectorXd& base_weights) {
  const Eigen::VectorXd& rep = set.replicates.at(b);
  if (rep.size() != base_weights.size())
    throw SchemaError("replicate length does not match base weights");
  return rep.cwiseProduct(base_weights);
}

void save_replicates_csv(const std::string& path, const ReplicateWeightSet& set) {
  if (set.replicates.empty()) throw SchemaError("empty replicate set");
  csv::Table t;
  const std::size_t B = set.replicates.size();
  for (std::size_t b = 0; b < B; ++b) t.header.push_back("rep_" + std::to_string(b + 1));
  const Eigen::Index n = set.replicates[0].size();
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::string> row;
    row.reserve(B);
    for (std::size_t b = 0; b < B; ++b)
      row.push_back(csv::format_double(set.replicates[b][i]));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace svyfosr
