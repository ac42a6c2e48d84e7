#ifndef SVYFOSR_RESAMPLING_HPP
#define SVYFOSR_RESAMPLING_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "svyfosr/dataset.hpp"

namespace svyfosr {

enum class BootType { Unweighted, Weighted, BRR, RWYB };

BootType boot_type_from_string(const std::string& s);
const char* boot_type_name(BootType t);

/// B replicate weight vectors from one resampling scheme. Bootstrap schemes
/// store index multisets as per-row counts; the consumer multiplies counts
/// into its base weights (all-ones for the unweighted comparison arm).
struct ReplicateWeightSet {
  BootType scheme = BootType::Unweighted;
  std::uint64_t seed = 0;
  // replicates[b] is length n: draw counts (bootstraps) or weight
  // multipliers relative to the base weight (BRR: 0 or 2; RWYB: a1*a2).
  std::vector<Eigen::VectorXd> replicates;

  std::size_t num_replicates() const { return replicates.size(); }
};

/// Two-stage selection probabilities carried by each individual.
struct StageProbabilities {
  Eigen::VectorXd pi1;  // per row; constant within PSU, in (0, 1]
  Eigen::VectorXd pi2;  // per row, in (0, 1]
};

/// Uniform with-replacement resampling of n indices, B times.
ReplicateWeightSet resample_unweighted(Eigen::Index n, int num_replicates,
                                       std::uint64_t seed);

/// With-replacement resampling with per-draw selection probability w_i / sum w.
ReplicateWeightSet resample_survey_weighted(const Eigen::VectorXd& weights,
                                            int num_replicates, std::uint64_t seed);

/// Half-sample replication: per stratum, half the PSUs get multiplier 2, the
/// rest 0. Requires an even PSU count in every stratum.
ReplicateWeightSet resample_brr(const DesignSummary& design,
                                const std::vector<int>& row_psu_ids,
                                int num_replicates, std::uint64_t seed);

/// Rao-Wu-Yue-Beaumont weight multipliers a1_cal * a2 for a two-stage design
/// (PPSWOR first stage, Poisson second stage). m1_rule <= 0 selects the
/// standard choice m1 = n1 - 1 per stratum. Certainty PSUs (pi1 == 1) get a
/// fixed first-stage adjustment of 1; certainty individuals (pi2 == 1) get a
/// deterministic gamma draw of 1.
ReplicateWeightSet make_rwyb_weights(const DesignSummary& design,
                                     const std::vector<int>& row_psu_ids,
                                     const std::vector<int>& row_stratum_ids,
                                     const StageProbabilities& probs, int m1_rule,
                                     int num_replicates, std::uint64_t seed);

/// Expand a replicate into effective fitting weights: multiplier (or count)
/// times the base weight, elementwise.
Eigen::VectorXd replicate_fit_weights(const ReplicateWeightSet& set, std::size_t b,
                                      const Eigen::VectorXd& base_weights);

/// Audit export: one column per replicate.
void save_replicates_csv(const std::string& path, const ReplicateWeightSet& set);

/// Deterministic per-replicate stream seed; parallel generation order-independent.
std::uint64_t replicate_stream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace svyfosr

#endif
