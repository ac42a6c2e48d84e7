#ifndef SVYFOSR_DATASET_HPP
#define SVYFOSR_DATASET_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

namespace svyfosr {

/// Survey-structured functional dataset: n individuals, an L-point functional
/// outcome each, P covariate columns (first column is an explicit intercept
/// unless the caller chose otherwise), a positive survey weight, and
/// stratum/PSU membership. Immutable after construction.
struct FunctionalDesignDataset {
  Eigen::MatrixXd outcomes;      // n x L
  Eigen::MatrixXd covariates;    // n x P
  Eigen::VectorXd weights;       // n, all > 0
  std::vector<int> stratum_ids;  // dense 0..H-1
  std::vector<int> psu_ids;      // dense, globally unique across strata
  Eigen::VectorXd grid;          // L, strictly increasing, normalized to [0,1]
  Eigen::VectorXd original_grid; // L, as supplied (for output labeling)

  std::vector<std::string> stratum_labels;    // index -> original label
  std::vector<std::string> psu_labels;        // index -> original label
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return outcomes.rows(); }
  Eigen::Index num_points() const { return outcomes.cols(); }
  Eigen::Index num_covariates() const { return covariates.cols(); }

  // Throws ValidationError on any invariant violation.
  void validate() const;
};

/// Per-stratum PSU structure and total weight of a dataset.
struct DesignSummary {
  int strata_count = 0;                        // H
  std::vector<int> psus_per_stratum;           // C_h
  std::vector<std::vector<int>> psu_members;   // global psu index -> row indices
  std::vector<std::vector<int>> stratum_psus;  // stratum -> global psu indices
  std::vector<int> psu_stratum;                // global psu index -> stratum
  double total_weight = 0.0;                   // N = sum of weights

  int total_psus() const { return static_cast<int>(psu_members.size()); }
};

DesignSummary summarize_design(const FunctionalDesignDataset& ds);

struct ColumnMap {
  std::string outcome_prefix = "y_";
  std::vector<std::string> covariates;  // by name; empty means none
  std::string weight = "weight";
  std::string stratum = "stratum";
  std::string psu = "psu";
  bool add_intercept = true;
};

/// Load a CSV with header. Outcome columns share `outcome_prefix` and are
/// taken in header order as successive grid positions. Grid defaults to L
/// equispaced points on [0,1]. Warnings (e.g. PSU label reuse across strata)
/// are appended to *warnings when non-null.
FunctionalDesignDataset load_dataset(const std::string& path, const ColumnMap& map,
                                     std::vector<std::string>* warnings = nullptr);

/// Serialize mirroring the input schema; load_dataset round-trips bit-for-bit
/// on all numeric fields.
void save_dataset(const std::string& path, const FunctionalDesignDataset& ds);

}  // namespace svyfosr

#endif
