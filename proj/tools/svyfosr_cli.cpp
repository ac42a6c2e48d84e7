#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svyfosr/csv.hpp"
#include "svyfosr/dataset.hpp"
#include "svyfosr/errors.hpp"
#include "svyfosr/evaluation.hpp"
#include "svyfosr/inference.hpp"
#include "svyfosr/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svyfosr;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 validation/schema/design, 3 numerical failure.
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

void write_manifest(const fs::path& dir, const std::string& subcommand,
                    const json& config, double wall_seconds,
                    const std::vector<std::string>& outputs,
                    int replicate_failures = 0) {
  json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  m["version"] = kVersion;
  m["wall_time_seconds"] = wall_seconds;
  m["outputs"] = outputs;
  m["replicate_failures"] = replicate_failures;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

StageProbabilities load_stage_probs(const std::string& path, Eigen::Index n) {
  csv::Table t = csv::read_file(path);
  const std::size_t c1 = t.require("pi1");
  const std::size_t c2 = t.require("pi2");
  if (static_cast<Eigen::Index>(t.rows.size()) != n)
    throw SchemaError("stage-probability file has " + std::to_string(t.rows.size()) +
                      " rows but the dataset has " + std::to_string(n));
  StageProbabilities p;
  p.pi1.resize(n);
  p.pi2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.pi1[i] = std::stod(t.rows[static_cast<std::size_t>(i)][c1]);
    p.pi2[i] = std::stod(t.rows[static_cast<std::size_t>(i)][c2]);
  }
  return p;
}

void save_stage_probs(const std::string& path, const StageProbabilities& p) {
  csv::Table t;
  t.header = {"pi1", "pi2"};
  for (Eigen::Index i = 0; i < p.pi1.size(); ++i)
    t.rows.push_back({csv::format_double(p.pi1[i]), csv::format_double(p.pi2[i])});
  csv::write_file(path, t);
}

// Plain-text key=value config file; unknown keys are rejected.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SchemaError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    trim(key);
    trim(value);
    out[key] = value;
  }
  return out;
}

struct FitArgs {
  std::string data_path;
  std::string covariates;  // comma separated column names
  std::string outcome_prefix = "y_";
  std::string weight_col = "weight";
  std::string stratum_col = "stratum";
  std::string psu_col = "psu";
  std::string family = "gaussian";
  std::string boot_type = "weighted";
  int num_boots = 100;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  int parallel = 1;
  int basis_dim = 0;
  double lambda = -1.0;
  int mc_samples = 10000;
  std::string stage_probs_path;
  std::string out_dir = ".";
};

int run_fit(const FitArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  ColumnMap map;
  map.outcome_prefix = a.outcome_prefix;
  map.covariates = split_csv_list(a.covariates);
  map.weight = a.weight_col;
  map.stratum = a.stratum_col;
  map.psu = a.psu_col;

  std::vector<std::string> warnings;
  FunctionalDesignDataset ds = load_dataset(a.data_path, map, &warnings);

  FitOptions opt;
  opt.family = family_from_string(a.family);
  opt.scheme = boot_type_from_string(a.boot_type);
  opt.num_replicates = a.num_boots;
  opt.smoother.basis_dim = a.basis_dim;
  opt.smoother.lambda = a.lambda;
  opt.alpha = a.alpha;
  opt.seed = a.seed;
  opt.threads = a.parallel;
  opt.mc_samples = a.mc_samples;
  opt.warnings = &warnings;
  if (!a.stage_probs_path.empty())
    opt.stage_probs = load_stage_probs(a.stage_probs_path, ds.n());

  const BandEstimate band = fit_svy_fosr(ds, opt);

  fs::create_directories(a.out_dir);
  std::vector<std::string> outputs;
  for (Eigen::Index p = 0; p < band.beta_hat.rows(); ++p) {
    std::string name = p < static_cast<Eigen::Index>(ds.covariate_names.size())
                           ? ds.covariate_names[static_cast<std::size_t>(p)]
                           : "x" + std::to_string(p);
    if (name == "(intercept)") name = "intercept";
    const std::string path = (fs::path(a.out_dir) / ("band_" + name + ".csv")).string();
    save_band_csv(path, band, p, ds.original_grid);
    outputs.push_back(path);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  json cfg = {{"data", a.data_path},       {"covariates", a.covariates},
              {"family", a.family},        {"boot_type", a.boot_type},
              {"num_boots", a.num_boots},  {"seed", a.seed},
              {"alpha", a.alpha},          {"parallel", a.parallel},
              {"basis_dim", a.basis_dim},  {"lambda", a.lambda},
              {"mc_samples", a.mc_samples}};
  json lambdas = json::array();
  for (Eigen::Index p = 0; p < band.lambdas.size(); ++p) lambdas.push_back(band.lambdas[p]);
  cfg["chosen_lambdas"] = lambdas;
  json qs = json::array();
  for (Eigen::Index p = 0; p < band.q.size(); ++p) qs.push_back(band.q[p]);
  cfg["q"] = qs;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(a.out_dir, "fit", cfg, wall, outputs, band.replicates_failed);
  return 0;
}

struct SimulateArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string out_dir = ".";
};

int run_simulate(const SimulateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::string> kv;
  if (!a.config_path.empty()) kv = read_config_file(a.config_path);
  for (const auto& [k, v] : a.overrides) kv[k] = v;

  SuperpopulationConfig cfg;
  int per_psu_n = 100;
  Informativeness info = Informativeness::None;
  for (const auto& [k, v] : kv) {
    if (k == "population_size") cfg.population_size = std::stoll(v);
    else if (k == "strata") cfg.strata = std::stoi(v);
    else if (k == "psu_min") cfg.psu_min = std::stoi(v);
    else if (k == "psu_max") cfg.psu_max = std::stoi(v);
    else if (k == "dirichlet_strata") cfg.dirichlet_strata = std::stod(v);
    else if (k == "dirichlet_psu") cfg.dirichlet_psu = std::stod(v);
    else if (k == "family") cfg.family = family_from_string(v);
    else if (k == "re_basis_dim") cfg.re_basis_dim = std::stoi(v);
    else if (k == "sigma_s") cfg.sigma_s = std::stod(v);
    else if (k == "sigma_h") cfg.sigma_h = std::stod(v);
    else if (k == "sigma_eps") cfg.sigma_eps = std::stod(v);
    else if (k == "snr_b") cfg.snr_b = std::stod(v);
    else if (k == "snr_eps") cfg.snr_eps = std::stod(v);
    else if (k == "re_mode") cfg.re_mode = re_mode_from_string(v);
    else if (k == "grid_length") cfg.grid_length = std::stoi(v);
    else if (k == "seed") cfg.seed = std::stoull(v);
    else if (k == "per_psu_n") per_psu_n = std::stoi(v);
    else if (k == "informativeness") info = informativeness_from_string(v);
    else throw SchemaError("unknown config key '" + k + "'");
  }

  const Superpopulation pop = generate_superpopulation(cfg);
  const SampleDraw draw = draw_two_stage_sample(pop, per_psu_n, info, cfg.seed + 1);
  const Eigen::MatrixXd ref = superpopulation_reference_fit(pop);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  save_dataset((dir / "sample.csv").string(), draw.sample);
  save_stage_probs((dir / "stage_probs.csv").string(), draw.probs);

  csv::Table truth;
  truth.header = {"s", "beta0_true", "beta1_true", "ref_beta0", "ref_beta1"};
  for (Eigen::Index l = 0; l < draw.grid.size(); ++l)
    truth.rows.push_back({csv::format_double(draw.grid[l]),
                          csv::format_double(draw.beta0_true[l]),
                          csv::format_double(draw.beta1_true[l]),
                          csv::format_double(ref(0, l)),
                          csv::format_double(ref(1, l))});
  csv::write_file((dir / "truth.csv").string(), truth);

  json cfg_json;
  for (const auto& [k, v] : kv) cfg_json[k] = v;
  cfg_json["resolved_sigma_h"] = pop.config.sigma_h;
  cfg_json["resolved_sigma_eps"] = pop.config.sigma_eps;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "simulate", cfg_json, wall,
                 {(dir / "sample.csv").string(), (dir / "truth.csv").string(),
                  (dir / "stage_probs.csv").string()});
  return 0;
}

struct SubsampleArgs {
  std::string data_path;
  std::string covariates;
  std::string scheme = "uniform";
  long long n = 1000;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

int run_subsample(const SubsampleArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  ColumnMap map;
  map.covariates = split_csv_list(a.covariates);
  std::vector<std::string> warnings;
  FunctionalDesignDataset pop = load_dataset(a.data_path, map, &warnings);
  const SampleDraw draw = empirical_subsample(
      pop, subsample_scheme_from_string(a.scheme), static_cast<Eigen::Index>(a.n), a.seed);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  save_dataset((dir / "sample.csv").string(), draw.sample);
  save_stage_probs((dir / "stage_probs.csv").string(), draw.probs);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  json cfg = {{"data", a.data_path}, {"scheme", a.scheme}, {"n", a.n}, {"seed", a.seed}};
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "subsample", cfg, wall,
                 {(dir / "sample.csv").string(), (dir / "stage_probs.csv").string()});
  return 0;
}

struct EvaluateArgs {
  std::string truth_path;
  std::vector<std::string> bands;  // label:truth_column:band_csv
  std::string out_path = "summary.csv";
};

int run_evaluate(const EvaluateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  csv::Table truth = csv::read_file(a.truth_path);
  const std::size_t scol = truth.require("s");
  Eigen::VectorXd grid(static_cast<Eigen::Index>(truth.rows.size()));
  for (std::size_t i = 0; i < truth.rows.size(); ++i)
    grid[static_cast<Eigen::Index>(i)] = std::stod(truth.rows[i][scol]);

  std::vector<EvalReport> reports;
  for (const auto& spec : a.bands) {
    const auto p1 = spec.find(':');
    const auto p2 = spec.find(':', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos)
      throw SchemaError("--band expects label:truth_column:band_csv, got '" + spec + "'");
    const std::string label = spec.substr(0, p1);
    const std::string truth_col = spec.substr(p1 + 1, p2 - p1 - 1);
    const std::string path = spec.substr(p2 + 1);

    const std::size_t tcol = truth.require(truth_col);
    Eigen::VectorXd beta_true(grid.size());
    for (std::size_t i = 0; i < truth.rows.size(); ++i)
      beta_true[static_cast<Eigen::Index>(i)] = std::stod(truth.rows[i][tcol]);

    const BandColumns band = load_band_csv(path);
    if (band.grid.size() != grid.size() ||
        (band.grid - grid).cwiseAbs().maxCoeff() > 1e-9)
      throw SchemaError("grid mismatch between truth and band '" + path + "'");

    EvalReport r;
    r.keys["band"] = label;
    r.ise = Eigen::VectorXd::Constant(1, ise(band.beta_hat, beta_true, grid));
    Eigen::Index inside = 0;
    bool joint = true;
    for (Eigen::Index l = 0; l < grid.size(); ++l) {
      const double half = 2.0 * band.se[l];
      if (beta_true[l] >= band.beta_hat[l] - half && beta_true[l] <= band.beta_hat[l] + half)
        ++inside;
      if (beta_true[l] < band.cma_lo[l] || beta_true[l] > band.cma_hi[l]) joint = false;
    }
    r.pointwise_coverage =
        Eigen::VectorXd::Constant(1, static_cast<double>(inside) / grid.size());
    r.joint_covered = Eigen::VectorXd::Constant(1, joint ? 1.0 : 0.0);
    reports.push_back(std::move(r));
  }
  save_aggregate_csv(a.out_path, aggregate_runs(reports));
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  (void)wall;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survey-design-aware function-on-scalar regression"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit bands on a survey dataset");
  fit->add_option("--data", fit_args.data_path, "dataset CSV")->required();
  fit->add_option("--covariates", fit_args.covariates, "comma-separated covariate columns");
  fit->add_option("--outcome-prefix", fit_args.outcome_prefix);
  fit->add_option("--weight-col", fit_args.weight_col);
  fit->add_option("--stratum-col", fit_args.stratum_col);
  fit->add_option("--psu-col", fit_args.psu_col);
  fit->add_option("--family", fit_args.family, "gaussian|bernoulli|poisson");
  fit->add_option("--boot-type", fit_args.boot_type, "unweighted|weighted|brr|rwyb");
  fit->add_option("--num-boots", fit_args.num_boots);
  fit->add_option("--seed", fit_args.seed);
  fit->add_option("--alpha", fit_args.alpha);
  fit->add_option("--parallel", fit_args.parallel, "replicate fitting threads");
  fit->add_option("--basis-dim", fit_args.basis_dim, "0 = default");
  fit->add_option("--lambda", fit_args.lambda, "fixed smoothing parameter; <0 = GCV");
  fit->add_option("--mc-samples", fit_args.mc_samples);
  fit->add_option("--stage-probs", fit_args.stage_probs_path, "pi1/pi2 CSV (required for rwyb)");
  fit->add_option("--out-dir", fit_args.out_dir);

  SimulateArgs sim_args;
  std::vector<std::string> sim_set;
  auto* sim = app.add_subcommand("simulate", "Generate a superpopulation and draw a sample");
  sim->add_option("--config", sim_args.config_path, "key=value config file");
  sim->add_option("--set", sim_set, "config overrides, key=value")->take_all();
  sim->add_option("--out-dir", sim_args.out_dir);

  SubsampleArgs sub_args;
  auto* sub = app.add_subcommand("subsample", "Informative subsample of an observed population");
  sub->add_option("--data", sub_args.data_path)->required();
  sub->add_option("--covariates", sub_args.covariates);
  sub->add_option("--scheme", sub_args.scheme, "uniform|weight-based|outcome-based|mixed");
  sub->add_option("--n", sub_args.n);
  sub->add_option("--seed", sub_args.seed);
  sub->add_option("--out-dir", sub_args.out_dir);

  EvaluateArgs eval_args;
  auto* ev = app.add_subcommand("evaluate", "Score bands against a truth file");
  ev->add_option("--truth", eval_args.truth_path)->required();
  ev->add_option("--band", eval_args.bands, "label:truth_column:band_csv")->take_all();
  ev->add_option("--out", eval_args.out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(fit_args);
    if (*sim) {
      for (const auto& kv : sim_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw SchemaError("--set expects key=value, got '" + kv + "'");
        sim_args.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      return run_simulate(sim_args);
    }
    if (*sub) return run_subsample(sub_args);
    if (*ev) return run_evaluate(eval_args);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
