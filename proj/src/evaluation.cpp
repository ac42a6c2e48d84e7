#include "svyfosr/evaluation.hpp"

#include <cmath>

#include "svyfosr/csv.hpp"
#include "svyfosr/errors.hpp"

namespace svyfosr {

double ise(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
           const Eigen::VectorXd& grid) {
  const Eigen::Index L = grid.size();
  if (beta_hat.size() != L || beta_true.size() != L)
    throw SchemaError("ise: grid and coefficient lengths differ");
  const Eigen::ArrayXd sq = (beta_hat - beta_true).array().square();
  double total = 0.0;
  for (Eigen::Index l = 1; l < L; ++l)
    total += 0.5 * (sq[l] + sq[l - 1]) * std::abs(grid[l] - grid[l - 1]);
  return total;
}

void coverage(const BandEstimate& bands, const Eigen::MatrixXd& beta_true,
              Eigen::VectorXd* pointwise_fraction, Eigen::VectorXd* joint_indicator) {
  const Eigen::Index P = bands.beta_hat.rows();
  const Eigen::Index L = bands.beta_hat.cols();
  if (beta_true.rows() != P || beta_true.cols() != L)
    throw SchemaError("coverage: truth shape does not match bands");
  pointwise_fraction->resize(P);
  joint_indicator->resize(P);
  for (Eigen::Index p = 0; p < P; ++p) {
    Eigen::Index inside = 0;
    bool joint = true;
    for (Eigen::Index l = 0; l < L; ++l) {
      const double t = beta_true(p, l);
      const double half = 2.0 * bands.se(p, l);  // table convention: mean +/- 2 SD
      if (t >= bands.beta_hat(p, l) - half && t <= bands.beta_hat(p, l) + half)
        ++inside;
      if (t < bands.cma_lo(p, l) || t > bands.cma_hi(p, l)) joint = false;
    }
    (*pointwise_fraction)[p] = static_cast<double>(inside) / static_cast<double>(L);
    (*joint_indicator)[p] = joint ? 1.0 : 0.0;
  }
}

double variance_proportion(const FunctionalDesignDataset& ds) {
  const DesignSummary design = summarize_design(ds);
  if (design.total_psus() < 2)
    throw DesignError("variance proportion needs at least 2 PSUs");
  const Eigen::Index L = ds.num_points();
  const Eigen::Index n = ds.n();

  double between_int = 0.0, total_int = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    const double grand = ds.outcomes.col(l).mean();
    double total = 0.0, between = 0.0;
    for (const auto& members : design.psu_members) {
      double gmean = 0.0;
      for (int i : members) gmean += ds.outcomes(i, l);
      gmean /= static_cast<double>(members.size());
      between += static_cast<double>(members.size()) * (gmean - grand) * (gmean - grand);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = ds.outcomes(i, l) - grand;
      total += d * d;
    }
    between_int += between / static_cast<double>(n);
    total_int += total / static_cast<double>(n);
  }
  if (total_int <= 0.0) return 0.0;
  return between_int / total_int;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw SchemaError("no reports to aggregate");
  std::vector<AggregateRow> rows;
  for (const auto& r : reports) {
    AggregateRow* row = nullptr;
    for (auto& existing : rows)
      if (existing.keys == r.keys) {
        row = &existing;
        break;
      }
    if (!row) {
      rows.push_back({});
      row = &rows.back();
      row->keys = r.keys;
      row->mise = Eigen::VectorXd::Zero(r.ise.size());
      row->mean_pw_coverage = Eigen::VectorXd::Zero(r.ise.size());
      row->joint_coverage = Eigen::VectorXd::Zero(r.ise.size());
    }
    if (row->mise.size() != r.ise.size())
      throw SchemaError("reports in one group have different coefficient counts");
    row->runs += 1;
    row->mise += r.ise;
    row->mean_pw_coverage += r.pointwise_coverage;
    row->joint_coverage += r.joint_covered;
  }
  for (auto& row : rows) {
    row.mise /= row.runs;
    row.mean_pw_coverage /= row.runs;
    row.joint_coverage /= row.runs;
  }
  return rows;
}

void save_aggregate_csv(const std::string& path,
                        const std::vector<AggregateRow>& rows) {
  if (rows.empty()) throw SchemaError("nothing to write");
  csv::Table t;
  for (const auto& [k, v] : rows.front().keys) t.header.push_back(k);
  const Eigen::Index P = rows.front().mise.size();
  t.header.push_back("coefficient");
  t.header.insert(t.header.end(),
                  {"runs", "mise", "log10_mise", "pw_coverage", "joint_coverage"});
  for (const auto& row : rows) {
    for (Eigen::Index p = 0; p < P; ++p) {
      std::vector<std::string> r;
      for (const auto& [k, v] : row.keys) r.push_back(v);
      r.push_back(std::to_string(p));
      r.push_back(std::to_string(row.runs));
      r.push_back(csv::format_double(row.mise[p]));
      r.push_back(csv::format_double(std::log10(row.mise[p])));
      r.push_back(csv::format_double(row.mean_pw_coverage[p]));
      r.push_back(csv::format_double(row.joint_coverage[p]));
      t.rows.push_back(std::move(r));
    }
  }
  csv::write_file(path, t);
}

}  // namespace svyfosr
