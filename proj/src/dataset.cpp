#include "svyfosr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "svyfosr/csv.hpp"
#include "svyfosr/errors.hpp"

namespace svyfosr {

namespace {

double parse_double(const std::string& s, const std::string& what, std::size_t row) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("row " + std::to_string(row) + ": cannot parse " + what +
                          " value '" + s + "'");
  return x;
}

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (std::size_t k = 0; k < idx.size() && k < 10; ++k) {
    if (k) out += ", ";
    out += std::to_string(idx[k]);
  }
  if (idx.size() > 10) out += ", ...";
  return out;
}

}  // namespace

void FunctionalDesignDataset::validate() const {
  const Eigen::Index nrows = n();
  if (nrows == 0) throw ValidationError("dataset has no rows");
  if (num_points() < 2) throw ValidationError("functional grid must have length >= 2");
  if (nrows < num_covariates())
    throw ValidationError("n < P: fewer rows than covariate columns");
  if (weights.size() != nrows || static_cast<Eigen::Index>(stratum_ids.size()) != nrows ||
      static_cast<Eigen::Index>(psu_ids.size()) != nrows ||
      covariates.rows() != nrows)
    throw ValidationError("inconsistent field lengths");
  if (grid.size() != num_points())
    throw ValidationError("grid length does not match outcome columns");

  std::vector<std::size_t> bad_weight;
  for (Eigen::Index i = 0; i < nrows; ++i)
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      bad_weight.push_back(static_cast<std::size_t>(i));
  if (!bad_weight.empty())
    throw ValidationError("non-positive or non-finite weight at rows: " +
                          join_indices(bad_weight));

  if (!outcomes.allFinite()) throw ValidationError("outcomes contain non-finite values");
  if (!covariates.allFinite()) throw ValidationError("covariates contain non-finite values");

  for (Eigen::Index l = 1; l < grid.size(); ++l)
    if (!(grid[l] > grid[l - 1]))
      throw ValidationError("grid is not strictly increasing at index " + std::to_string(l));

  // A canonical PSU id must live in exactly one stratum.
  std::map<int, int> psu_to_stratum;
  for (Eigen::Index i = 0; i < nrows; ++i) {
    auto [it, inserted] = psu_to_stratum.emplace(psu_ids[i], stratum_ids[i]);
    if (!inserted && it->second != stratum_ids[i])
      throw ValidationError("PSU id " + std::to_string(psu_ids[i]) +
                            " appears in multiple strata");
  }
}

DesignSummary summarize_design(const FunctionalDesignDataset& ds) {
  DesignSummary out;
  int max_stratum = -1, max_psu = -1;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    max_stratum = std::max(max_stratum, ds.stratum_ids[i]);
    max_psu = std::max(max_psu, ds.psu_ids[i]);
  }
  out.strata_count = max_stratum + 1;
  out.psu_members.assign(max_psu + 1, {});
  out.psu_stratum.assign(max_psu + 1, -1);
  out.stratum_psus.assign(out.strata_count, {});
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out.psu_members[ds.psu_ids[i]].push_back(static_cast<int>(i));
    out.psu_stratum[ds.psu_ids[i]] = ds.stratum_ids[i];
  }
  for (int c = 0; c <= max_psu; ++c) {
    if (out.psu_members[c].empty())
      throw ValidationError("PSU index " + std::to_string(c) + " has no members");
    out.stratum_psus[out.psu_stratum[c]].push_back(c);
  }
  out.psus_per_stratum.resize(out.strata_count);
  for (int h = 0; h < out.strata_count; ++h) {
    out.psus_per_stratum[h] = static_cast<int>(out.stratum_psus[h].size());
    if (out.psus_per_stratum[h] == 0)
      throw ValidationError("stratum index " + std::to_string(h) + " has no PSUs");
  }
  out.total_weight = ds.weights.sum();
  return out;
}

FunctionalDesignDataset load_dataset(const std::string& path, const ColumnMap& map,
                                     std::vector<std::string>* warnings) {
  csv::Table t = csv::read_file(path);

  std::vector<std::size_t> outcome_cols;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (t.header[j].rfind(map.outcome_prefix, 0) == 0) outcome_cols.push_back(j);
  if (outcome_cols.size() < 2)
    throw SchemaError("found " + std::to_string(outcome_cols.size()) +
                      " outcome columns with prefix '" + map.outcome_prefix + "'");

  const std::size_t wcol = t.require(map.weight);
  const std::size_t hcol = t.require(map.stratum);
  const std::size_t ccol = t.require(map.psu);
  std::vector<std::size_t> xcols;
  for (const auto& name : map.covariates) xcols.push_back(t.require(name));

  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  const Eigen::Index L = static_cast<Eigen::Index>(outcome_cols.size());
  const Eigen::Index P = static_cast<Eigen::Index>(xcols.size()) + (map.add_intercept ? 1 : 0);

  FunctionalDesignDataset ds;
  ds.outcomes.resize(n, L);
  ds.covariates.resize(n, P);
  ds.weights.resize(n);
  ds.stratum_ids.resize(n);
  ds.psu_ids.resize(n);
  if (map.add_intercept) ds.covariate_names.push_back("(intercept)");
  for (const auto& name : map.covariates) ds.covariate_names.push_back(name);

  std::map<std::string, int> stratum_index;
  std::map<std::pair<int, std::string>, int> psu_index;  // keyed within stratum
  std::map<std::string, int> psu_label_first_stratum;

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::size_t file_row = static_cast<std::size_t>(i) + 2;

    ds.weights[i] = parse_double(row[wcol], "weight", file_row);
    for (Eigen::Index l = 0; l < L; ++l)
      ds.outcomes(i, l) = parse_double(row[outcome_cols[l]], "outcome", file_row);
    Eigen::Index p0 = 0;
    if (map.add_intercept) ds.covariates(i, p0++) = 1.0;
    for (std::size_t k = 0; k < xcols.size(); ++k)
      ds.covariates(i, p0 + static_cast<Eigen::Index>(k)) =
          parse_double(row[xcols[k]], "covariate", file_row);

    const std::string& hlab = row[hcol];
    auto [hit, hnew] = stratum_index.emplace(hlab, static_cast<int>(stratum_index.size()));
    if (hnew) ds.stratum_labels.push_back(hlab);
    ds.stratum_ids[i] = hit->second;

    const std::string& clab = row[ccol];
    auto [pfs, pnew] = psu_label_first_stratum.emplace(clab, hit->second);
    if (!pnew && pfs->second != hit->second && warnings) {
      warnings->push_back("PSU label '" + clab +
                          "' reused across strata; canonicalized to distinct ids");
      pfs->second = hit->second;  // warn once per offending pair
    }
    auto [cit, cnew] =
        psu_index.emplace(std::make_pair(hit->second, clab), static_cast<int>(psu_index.size()));
    if (cnew) ds.psu_labels.push_back(clab);
    ds.psu_ids[i] = cit->second;
  }

  ds.original_grid = Eigen::VectorXd::LinSpaced(L, 0.0, 1.0);
  ds.grid = ds.original_grid;
  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const FunctionalDesignDataset& ds) {
  csv::Table t;
  t.header = {"stratum", "psu", "weight"};
  std::vector<Eigen::Index> saved_covs;
  for (Eigen::Index p = 0; p < ds.num_covariates(); ++p) {
    const std::string& name =
        p < static_cast<Eigen::Index>(ds.covariate_names.size())
            ? ds.covariate_names[static_cast<std::size_t>(p)]
            : "x" + std::to_string(p);
    if (name == "(intercept)") continue;
    t.header.push_back(name);
    saved_covs.push_back(p);
  }
  const Eigen::Index L = ds.num_points();
  for (Eigen::Index l = 0; l < L; ++l) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "y_%04d", static_cast<int>(l + 1));
    t.header.push_back(buf);
  }
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    std::vector<std::string> row;
    row.push_back(ds.stratum_labels.empty()
                      ? std::to_string(ds.stratum_ids[i])
                      : ds.stratum_labels[static_cast<std::size_t>(ds.stratum_ids[i])]);
    row.push_back(ds.psu_labels.empty()
                      ? std::to_string(ds.psu_ids[i])
                      : ds.psu_labels[static_cast<std::size_t>(ds.psu_ids[i])]);
    row.push_back(csv::format_double(ds.weights[i]));
    for (Eigen::Index p : saved_covs) row.push_back(csv::format_double(ds.covariates(i, p)));
    for (Eigen::Index l = 0; l < L; ++l) row.push_back(csv::format_double(ds.outcomes(i, l)));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace svyfosr
