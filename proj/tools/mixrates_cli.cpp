// mixrates: penalized EM fitting, mixing-measure losses and the rate
// experiments from the command line.
//
// Exit codes: 0 success, 1 data or validation error, 2 usage error.

#include "mixrates/em.hpp"
#include "mixrates/error.hpp"
#include "mixrates/experiments.hpp"
#include "mixrates/io.hpp"
#include "mixrates/losses.hpp"
#include "mixrates/transport.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

namespace {

using namespace mixrates;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int worker_threads() {
  if (const char* env = std::getenv("MIXRATES_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ScaleMode parse_scale_mode(const std::string& s) { return s == "fixed" ? ScaleMode::Fixed : ScaleMode::Free; }

struct FitArgs {
  std::string data;
  int k = 1;
  std::string xi = "logn";
  std::string scale_mode = "free";
  std::optional<double> fixed_var;
  std::string init;
  std::uint64_t seed = 0;
  std::string out;
  int max_iters = 2000;
  double tol = 1e-8;
};

int cmd_fit(const FitArgs& a) {
  std::ifstream in(a.data);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + a.data);
  const DataMatrix data = io::read_data_csv(in);
  const int n = static_cast<int>(data.rows());

  EmConfig cfg;
  cfg.k = a.k;
  cfg.max_iters = a.max_iters;
  cfg.tol = a.tol;
  cfg.scale_mode = parse_scale_mode(a.scale_mode);
  if (a.xi != "logn") {
    double xi = 0.0;
    std::istringstream ss(a.xi);
    if (!(ss >> xi) || !ss.eof()) throw UsageError("--xi must be a real number or 'logn'");
    cfg.xi = xi;
  }
  if (a.fixed_var) cfg.fixed_covariance = *a.fixed_var * Matrix::Identity(data.cols(), data.cols());
  if (!a.init.empty()) cfg.init = FromMeasureInit{io::measure_from_json(io::read_file(a.init))};
  if (n < cfg.k) throw Error(ErrorKind::DegenerateData, "n < k (n = " + std::to_string(n) + ", k = " + std::to_string(cfg.k) + ")");

  const FitResult result = fit(data, cfg, a.seed);
  if (!a.out.empty()) io::write_file(a.out, io::fit_result_to_json(result));

  std::cout << "n " << n << " d " << data.cols() << " k " << result.measure.order() << '\n'
            << "xi " << io::format_double(cfg.xi_for(n)) << '\n'
            << "iterations " << result.iterations << '\n'
            << "converged " << (result.converged ? "true" : "false") << '\n'
            << "objective " << io::format_double(result.objective_trace.back()) << '\n';
  for (int j = 0; j < result.measure.order(); ++j) {
    std::cout << "component " << j << " weight " << io::format_double(result.measure.weight(j)) << " mean";
    const Vector& mu = result.measure.atom(j).mean;
    for (Eigen::Index c = 0; c < mu.size(); ++c) std::cout << ' ' << io::format_double(mu[c]);
    std::cout << '\n';
  }
  return 0;
}

struct LossArgs {
  std::string loss;
  std::string g;
  std::string g0;
  std::string gstar;
  std::optional<double> r;
  std::string metric = "mean";
};

int cmd_loss(const LossArgs& a) {
  if (a.loss == "wtilde" && a.gstar.empty()) throw UsageError("--loss wtilde requires --gstar");
  if (a.loss == "wasserstein" && !a.r) throw UsageError("--loss wasserstein requires --r");
  const MixingMeasure g = io::measure_from_json(io::read_file(a.g));
  const MixingMeasure g0 = io::measure_from_json(io::read_file(a.g0));
  double value = 0.0;
  if (a.loss == "d") {
    value = loss_d(g, g0);
  } else if (a.loss == "dbar") {
    value = loss_dbar(g, g0);
  } else if (a.loss == "wtilde") {
    value = loss_wtilde(g, g0, io::measure_from_json(io::read_file(a.gstar)));
  } else {
    value = wasserstein(g, g0, *a.r, a.metric == "composite" ? MetricKind::Composite : MetricKind::MeanOnly);
  }
  std::cout << io::format_double(value) << '\n';
  return 0;
}

struct SimulateArgs {
  std::string model;
  std::optional<int> k0;
  std::string g;
  int n = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string truth_out;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.model.empty() == a.g.empty()) throw UsageError("simulate takes exactly one of --model or --g");
  const MixingMeasure truth = [&] {
    if (!a.g.empty()) return io::measure_from_json(io::read_file(a.g));
    const ModelName name = parse_model(a.model);
    const int k0 = a.k0.value_or(default_k0(name));
    return build_model(name, k0, k0, a.n).truth;
  }();
  const DataMatrix data = sample(truth, a.n, a.seed);
  std::ostringstream csv;
  io::write_data_csv(csv, data);
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    io::write_file(a.out, csv.str());
  }
  if (!a.truth_out.empty()) io::write_file(a.truth_out, io::measure_to_json(truth));
  return 0;
}

struct SlopeArgs {
  std::string in;
  std::string out;
};

int cmd_slope(const SlopeArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + a.in);
  const std::vector<ExperimentRecord> records = io::read_records_csv(in);
  const SlopeFit fit = fit_slope(records);
  if (!a.out.empty()) io::write_file(a.out, io::slope_summary_json(fit));
  std::cout << io::slope_summary_text(fit);
  return 0;
}

struct ReproduceArgs {
  std::string model;
  int k = 0;
  std::optional<int> k0;
  std::string scale = "desk";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::optional<int> threads;
  bool timing = false;
};

int cmd_reproduce(const ReproduceArgs& a) {
  const ModelName name = parse_model(a.model);
  const int k0 = a.k0.value_or(name == ModelName::C ? a.k : default_k0(name));
  check_reproducible(name, a.k, k0);
  ExperimentConfig cfg = a.scale == "paper" ? paper_config(name, a.k, k0, a.seed) : desk_config(name, a.k, k0, a.seed);
  cfg.threads = a.threads.value_or(worker_threads());
  cfg.record_timing = a.timing;
  const std::vector<ExperimentRecord> records = run_experiment(cfg);

  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  const std::string stem = "model" + std::string(model_label(name)) + "_k" + std::to_string(a.k) + "_k0" +
                           std::to_string(k0) + "_" + a.scale;
  std::ostringstream csv;
  io::write_records_csv(csv, records);
  io::write_file(dir / (stem + "_records.csv"), csv.str());

  const SlopeFit fit = fit_slope(records);
  io::write_file(dir / (stem + "_summary.json"), io::slope_summary_json(fit));
  std::cout << "records " << records.size() << '\n' << io::slope_summary_text(fit);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized EM for Gaussian mixtures, mixing-measure losses and convergence-rate experiments", "mixrates"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a penalized Gaussian mixture to a CSV data file");
  fit_cmd->add_option("--data", fit_args.data, "Data CSV (one observation per row)")->required();
  fit_cmd->add_option("--k", fit_args.k, "Fitted order")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--xi", fit_args.xi, "Penalty weight, or 'logn'");
  fit_cmd->add_option("--scale-mode", fit_args.scale_mode, "fixed or free")->check(CLI::IsMember({"fixed", "free"}));
  fit_cmd->add_option("--fixed-var", fit_args.fixed_var, "Isotropic kernel variance for --scale-mode fixed");
  fit_cmd->add_option("--init", fit_args.init, "Start from this measure document");
  fit_cmd->add_option("--seed", fit_args.seed, "Seed for the random start");
  fit_cmd->add_option("--out", fit_args.out, "Write the fitted measure document here");
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "Maximum EM iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", fit_args.tol, "Parameter-change tolerance")->check(CLI::PositiveNumber);

  LossArgs loss_args;
  auto* loss_cmd = app.add_subcommand("loss", "Evaluate a loss between two measure documents");
  loss_cmd->add_option("--loss", loss_args.loss, "d, dbar, wtilde or wasserstein")
      ->required()
      ->check(CLI::IsMember({"d", "dbar", "wtilde", "wasserstein"}));
  loss_cmd->add_option("--g", loss_args.g, "Measure G")->required();
  loss_cmd->add_option("--g0", loss_args.g0, "Reference measure G0")->required();
  loss_cmd->add_option("--gstar", loss_args.gstar, "Limiting measure G* (wtilde)");
  loss_cmd->add_option("--r", loss_args.r, "Wasserstein order (>= 1)");
  loss_cmd->add_option("--metric", loss_args.metric, "mean or composite (wasserstein)")
      ->check(CLI::IsMember({"mean", "composite"}));

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a sample from a model or a measure document");
  sim_cmd->add_option("--model", sim_args.model, "A, B or C");
  sim_cmd->add_option("--k0", sim_args.k0, "True order (Model C: 3 or 4)");
  sim_cmd->add_option("--g", sim_args.g, "Measure document to sample from");
  sim_cmd->add_option("--n", sim_args.n, "Sample size")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_args.seed, "Seed");
  sim_cmd->add_option("--out", sim_args.out, "Output CSV (default: standard output)");
  sim_cmd->add_option("--truth-out", sim_args.truth_out, "Write the true measure document here");

  SlopeArgs slope_args;
  auto* slope_cmd = app.add_subcommand("slope", "Least-squares log-log slope of a records CSV");
  slope_cmd->add_option("--in", slope_args.in, "Records CSV")->required();
  slope_cmd->add_option("--out", slope_args.out, "Write the summary document here");

  ReproduceArgs rep_args;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run a convergence-rate experiment and fit its slope");
  rep_cmd->add_option("--model", rep_args.model, "A, B or C")->required();
  rep_cmd->add_option("--k", rep_args.k, "Fitted order")->required();
  rep_cmd->add_option("--k0", rep_args.k0, "True order");
  rep_cmd->add_option("--scale", rep_args.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  rep_cmd->add_option("--seed", rep_args.seed, "Base seed");
  rep_cmd->add_option("--out-dir", rep_args.out_dir, "Output directory");
  rep_cmd->add_option("--threads", rep_args.threads, "Worker threads (default: MIXRATES_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  rep_cmd->add_flag("--timing", rep_args.timing, "Record wall-clock times (output no longer byte-reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args);
    if (loss_cmd->parsed()) return cmd_loss(loss_args);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (slope_cmd->parsed()) return cmd_slope(slope_args);
    if (rep_cmd->parsed()) return cmd_reproduce(rep_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
