// Command-line front end: propagate state ambiguity sets, run the
// reachability and planning experiments, evaluate robust CVaR values, and
// run the verification (oracle) suite.
//
// Exit codes: 0 ok, 1 verification failure, 2 configuration error,
// 3 numeric failure (including infeasible programs).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "otube/apps.hpp"
#include "otube/io.hpp"
#include "otube/oracle.hpp"

using namespace otube;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string epsilon_list;
  std::string mode;
  bool header = false;
  bool svg = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_svg) {
  cmd->add_option("--config", flags.config_path, "experiment configuration JSON")->required();
  cmd->add_option("--out", flags.out_dir, "output directory (created if missing)");
  cmd->add_option("--seed", flags.seed, "override the configured RNG seed")
      ->each([&](const std::string&) { flags.seed_given = true; });
  cmd->add_option("--epsilon", flags.epsilon_list, "comma-separated radius sweep override");
  cmd->add_option("--mode", flags.mode, "lift mode: trajectory | product")
      ->check(CLI::IsMember({"trajectory", "product"}));
  cmd->add_flag("--header", flags.header, "sample CSV files carry a header line");
  if (with_svg) cmd->add_flag("--svg", flags.svg, "emit an SVG scatter plot");
}

ExperimentConfigd load_config(const CommonFlags& flags) {
  const auto base_dir = std::filesystem::path(flags.config_path).parent_path().string();
  auto config =
      io::parse_experiment_json(io::slurp(flags.config_path), base_dir, flags.header);
  if (flags.seed_given) config.seed = flags.seed;
  if (!flags.epsilon_list.empty()) {
    config.epsilons.clear();
    std::stringstream ss(flags.epsilon_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      char* end = nullptr;
      const double eps = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || eps < 0)
        throw io::ConfigError("--epsilon expects a comma-separated list of nonnegative reals");
      config.epsilons.push_back(eps);
    }
  }
  if (flags.mode == "trajectory") config.mode = LiftMode::Trajectory;
  if (flags.mode == "product") config.mode = LiftMode::ProductEnumerate;
  std::filesystem::create_directories(flags.out_dir);
  return config;
}

// test evaluation uses an independent stream derived from the training seed
std::uint64_t test_seed(const ExperimentConfigd& config) { return config.seed + 1000003; }

MatrixXd terminal_states(const LtiSystemd& sys, const VectorXd& v, const TrajectoryBatchd& batch) {
  const auto paths = simulate(sys, v, batch);
  MatrixXd states(sys.state_dim(), Index(paths.size()));
  for (Index i = 0; i < Index(paths.size()); ++i)
    states.col(i) = paths[i].col(batch.horizon());
  return states;
}

io::SweepEvaluation evaluate_decision(const ExperimentConfigd& config, double epsilon,
                                      const SolveReportd& report, const Polytoped& poly,
                                      const VectorXd& v, const TrajectoryBatchd& test) {
  io::SweepEvaluation e;
  e.epsilon = epsilon;
  e.status = to_string(report.status);
  e.lambda = report.lambda;
  e.lambda_analytic = !std::isfinite(report.lambda);
  e.runtime_ms = report.wall_time_ms;
  if (report.status == SolveStatus::Optimal) {
    auto oos = evaluate_out_of_sample(config.system, poly, v, test, config.gamma);
    e.empirical_cvar = oos.empirical_cvar;
    e.violation_fraction = oos.violation_fraction;
  }
  return e;
}

int run_propagate(const CommonFlags& flags) {
  auto config = load_config(flags);
  const auto batch = config.training
                         ? *config.training
                         : sample_noise_batch<double>(config.system.noise_dim(), config.horizon,
                                                      config.training_count, config.seed);
  const double epsilon = config.epsilons.empty()
                             ? radius_rate(batch.count(), int(config.system.noise_dim()), 1.0)
                             : config.epsilons.front();
  const Index m = config.system.input_dim();
  VectorXd v = config.feedforward.size() ? config.feedforward
                                         : VectorXd::Zero(Index(config.horizon) * m);

  AmbiguitySetd noise_ball(dirac(VectorXd(VectorXd::Zero(config.system.noise_dim()))),
                           TransportationCostd::sq_euclidean(config.system.noise_dim()), epsilon);
  const auto ball =
      config.mode == LiftMode::Trajectory
          ? state_ambiguity(config.system, v, noise_ball, batch)
          : state_ambiguity(config.system, config.horizon, v,
                            AmbiguitySetd(detail::pooled_step_samples(batch), noise_ball.cost,
                                          epsilon),
                            config.product_cap);

  const auto out = std::filesystem::path(flags.out_dir);
  MatrixXd atoms_rows(ball.center.size(), ball.center.dimension() + 1);
  atoms_rows.leftCols(ball.center.dimension()) = ball.center.atoms().transpose();
  atoms_rows.rightCols(1) = ball.center.weights();
  std::string header = "";
  for (Index k = 0; k < ball.center.dimension(); ++k)
    header += "x" + std::to_string(k + 1) + ",";
  header += "weight";
  io::write_csv((out / "center_atoms.csv").string(), atoms_rows, header);
  io::write_text((out / "ambiguity.json").string(),
                 io::ambiguity_json(ball, config.horizon, epsilon));
  std::cout << "wrote " << (out / "ambiguity.json").string() << " and center_atoms.csv ("
            << ball.center.size() << " atoms)\n";
  return 0;
}

int run_reach(const CommonFlags& flags) {
  auto config = load_config(flags);
  if (config.directions.rows() < 1) throw io::ConfigError("reach: config needs directions");
  const auto results = reachability(config);
  const auto test = sample_noise_batch<double>(config.system.noise_dim(), config.horizon,
                                               config.test_count, test_seed(config));
  const auto train = config.training ? *config.training
                                     : sample_noise_batch<double>(config.system.noise_dim(),
                                                                  config.horizon,
                                                                  config.training_count,
                                                                  config.seed);
  const VectorXd v = config.feedforward.size()
                         ? config.feedforward
                         : VectorXd::Zero(Index(config.horizon) * config.system.input_dim());

  std::vector<io::SweepEvaluation> sweep;
  bool all_ok = true;
  const Polytoped* last_poly = nullptr;
  std::vector<Polytoped> polys;
  polys.reserve(results.size());
  for (const auto& r : results) {
    polys.emplace_back(config.directions,
                       r.offsets.size() ? r.offsets : VectorXd::Zero(config.directions.rows()));
    auto e = evaluate_decision(config, r.epsilon, r.report, polys.back(), v, test);
    e.decision = r.offsets;
    e.objective = r.offset_sum;
    e.post_hoc_worst_case = r.post_hoc_worst_case;
    sweep.push_back(e);
    if (r.report.status != SolveStatus::Optimal)
      all_ok = false;
    else
      last_poly = &polys.back();
  }

  const auto out = std::filesystem::path(flags.out_dir);
  io::write_text((out / "results.json").string(), io::results_json("reach", config, sweep, "b"));
  io::write_text((out / "timings.json").string(), io::timings_json("reach", sweep));
  const MatrixXd train_states = terminal_states(config.system, v, train);
  const MatrixXd test_states = terminal_states(config.system, v, test);
  io::write_text((out / "scatter.csv").string(), io::scatter_csv(train_states, test_states));
  if (flags.svg)
    io::write_text((out / "reach.svg").string(),
                   io::scatter_svg(train_states, test_states, last_poly,
                                   "reachability set and terminal states"));
  std::cout << "wrote " << (out / "results.json").string() << " (" << sweep.size()
            << " radii)\n";
  return all_ok ? 0 : 3;
}

int run_plan(const CommonFlags& flags) {
  auto config = load_config(flags);
  if (!config.target) throw io::ConfigError("plan: config needs a target polytope");
  const auto plans = plan_trajectory(config);
  const auto test = sample_noise_batch<double>(config.system.noise_dim(), config.horizon,
                                               config.test_count, test_seed(config));
  const auto train = config.training ? *config.training
                                     : sample_noise_batch<double>(config.system.noise_dim(),
                                                                  config.horizon,
                                                                  config.training_count,
                                                                  config.seed);

  std::vector<io::SweepEvaluation> sweep;
  bool all_ok = true;
  VectorXd best_v;
  for (const auto& p : plans) {
    const VectorXd v = p.feedforward.size()
                           ? p.feedforward
                           : VectorXd::Zero(Index(config.horizon) * config.system.input_dim());
    auto e = evaluate_decision(config, p.epsilon, p.report, *config.target, v, test);
    e.decision = p.feedforward;
    e.objective = p.cost;
    e.post_hoc_worst_case = p.post_hoc_worst_case;
    sweep.push_back(e);
    if (p.report.status != SolveStatus::Optimal)
      all_ok = false;
    else
      best_v = p.feedforward;
  }

  const auto out = std::filesystem::path(flags.out_dir);
  io::write_text((out / "results.json").string(), io::results_json("plan", config, sweep, "v"));
  io::write_text((out / "timings.json").string(), io::timings_json("plan", sweep));
  const VectorXd plot_v = best_v.size()
                              ? best_v
                              : VectorXd::Zero(Index(config.horizon) * config.system.input_dim());
  const MatrixXd train_states = terminal_states(config.system, plot_v, train);
  const MatrixXd test_states = terminal_states(config.system, plot_v, test);
  io::write_text((out / "scatter.csv").string(), io::scatter_csv(train_states, test_states));
  if (flags.svg)
    io::write_text((out / "plan.svg").string(),
                   io::scatter_svg(train_states, test_states, &*config.target,
                                   "steered terminal states and target"));
  std::cout << "wrote " << (out / "results.json").string() << " (" << sweep.size()
            << " radii)\n";
  return all_ok ? 0 : 3;
}

int run_cvar(const CommonFlags& flags) {
  auto config = load_config(flags);
  Polytoped poly = config.target
                       ? *config.target
                       : Polytoped(config.directions,
                                   config.offsets.size()
                                       ? config.offsets
                                       : VectorXd::Zero(config.directions.rows()));
  if (poly.count() < 1) throw io::ConfigError("cvar: config needs directions or a target");

  const auto train = config.training ? *config.training
                                     : sample_noise_batch<double>(config.system.noise_dim(),
                                                                  config.horizon,
                                                                  config.training_count,
                                                                  config.seed);
  const VectorXd v = config.feedforward.size()
                         ? config.feedforward
                         : VectorXd::Zero(Index(config.horizon) * config.system.input_dim());

  std::vector<double> epsilons = config.epsilons;
  if (epsilons.empty()) {
    const double rate = radius_rate(train.count(), int(config.system.noise_dim()), 1.0);
    epsilons = {0.0, rate / 2.0, rate};
  }

  std::vector<io::SweepEvaluation> sweep;
  for (double eps : epsilons) {
    AmbiguitySetd noise_ball(dirac(VectorXd(VectorXd::Zero(config.system.noise_dim()))),
                             TransportationCostd::sq_euclidean(config.system.noise_dim()), eps);
    const auto t0 = std::chrono::steady_clock::now();
    const auto ball = state_ambiguity(config.system, v, noise_ball, train);
    io::SweepEvaluation e;
    e.epsilon = eps;
    e.status = "optimal";
    e.objective = worst_case_cvar(ball, poly, config.gamma);
    e.lambda_analytic = true;  // the robust value needs no single reported lambda
    // in-sample evaluation: the robust value at radius zero matches this
    auto oos = evaluate_out_of_sample(config.system, poly, v, train, config.gamma);
    e.empirical_cvar = oos.empirical_cvar;
    e.violation_fraction = oos.violation_fraction;
    e.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    sweep.push_back(e);
  }

  const auto out = std::filesystem::path(flags.out_dir);
  io::write_text((out / "results.json").string(), io::results_json("cvar", config, sweep, ""));
  io::write_text((out / "timings.json").string(), io::timings_json("cvar", sweep));
  const MatrixXd train_states = terminal_states(config.system, v, train);
  io::write_text((out / "scatter.csv").string(),
                 io::scatter_csv(train_states, MatrixXd(train_states.rows(), 0)));
  if (flags.svg)
    io::write_text((out / "cvar.svg").string(),
                   io::scatter_svg(train_states, MatrixXd(train_states.rows(), 0), &poly,
                                   "terminal states under the evaluated polytope"));
  std::cout << "wrote " << (out / "results.json").string() << " (" << sweep.size()
            << " radii)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verification suite

struct VerifyState {
  int failures = 0;
  void check(const std::string& name, bool ok, const std::string& detail = "") {
            std::printf("%-52s %s%s%s\n", name.c_str(), ok ? "ok" : "FAIL",
                detail.empty() ? "" : "  ", detail.c_str());
    if (!ok) ++failures;
  }
};

int run_verify(int trials, std::uint64_t seed, bool force_fail) {
  VerifyState state;
  std::mt19937_64 rng(seed);
  auto uniform_atoms = [&](Index d, Index n) {
    return empirical(MatrixXd(2.0 * gaussian_matrix<double>(rng, d, n)));
  };

  {
    double worst = 0;
    for (int k = 0; k < trials; ++k) {
      const Index d = 1 + k % 3, n = 2 + k % 5;
      auto P = uniform_atoms(d, n);
      auto Q = uniform_atoms(d, n);
      auto c = TransportationCostd::sq_euclidean(d);
      worst = std::max(worst, std::abs(oracle::permutation_ot(c, P, Q) -
                                       ot_discrepancy(c, P, Q).first));
    }
    state.check("transport LP vs permutation enumeration", worst <= 1e-9,
                "max gap " + io::format_real(worst));
  }
  {
    double worst = 0;
    for (int k = 0; k < trials; ++k) {
      const Index d = 1 + k % 3;
      auto x = VectorXd(gaussian_matrix<double>(rng, d, 1));
      auto Q = uniform_atoms(d, 3 + k % 4);
      auto c = TransportationCostd::sq_euclidean(d);
      double closed = 0;
      MatrixXd row(1, Q.size());
      for (Index j = 0; j < Q.size(); ++j) {
        row(0, j) = evaluate_cost(c, VectorXd(x - Q.atom(j)));
        closed += Q.weight(j) * row(0, j);
      }
      const double lp = transport_simplex(row, VectorXd(VectorXd::Ones(1)), Q.weights()).objective;
      worst = std::max(worst, std::abs(closed - lp));
    }
    state.check("dirac closed form vs LP", worst <= 1e-9, "max gap " + io::format_real(worst));
  }
  {
    MatrixXd A(2, 2);
    A << 1.1, -0.4, 0.3, 0.8;
    auto inv = oracle::thm1_trial(uniform_atoms(2, 3), A, 0.25, trials, seed + 1);
    state.check("propagation equality (invertible map)", inv.all_passed,
                "max gap " + io::format_real(inv.max_equality_gap));

    MatrixXd S(1, 1);
    S << 2.0;
    auto scal = oracle::thm1_trial(dirac(VectorXd(VectorXd::Zero(1))), S, 0.3, trials, seed + 2);
    state.check("propagation equality (scalar doubling)", scal.all_passed);

    MatrixXd R(2, 3);
    R << 1, 0, 0.5, 2, 0, 1.0;
    auto wide = oracle::thm1_trial(uniform_atoms(3, 3), R, 0.25, trials, seed + 3);
    state.check("propagation equality (wide full row-rank)", wide.all_passed,
                "max gap " + io::format_real(wide.max_equality_gap));

    MatrixXd Z(2, 2);
    Z << 1, 0, 0, 0;
    auto rank_def = oracle::thm1_trial(uniform_atoms(2, 3), Z, 0.25, trials, seed + 4);
    state.check("propagation inclusion (rank-deficient)",
                rank_def.max_inclusion_violation <= 1e-9,
                "max violation " + io::format_real(rank_def.max_inclusion_violation));
  }
  {
    MatrixXd zero(1, 1), two(1, 1);
    zero << 0.0;
    two << 2.0;
    auto over = oracle::naive_foil(dirac(VectorXd(VectorXd::Zero(1))), zero, 0.5);
    state.check("naive center propagation overestimates (A = 0)",
                over.overestimation.applicable && over.overestimation.in_approximation &&
                    !over.overestimation.in_true_set);
    auto under = oracle::naive_foil(dirac(VectorXd(VectorXd::Zero(1))), two, 0.5);
    state.check("naive center propagation underestimates (A = 2)",
                under.underestimation.applicable && !under.underestimation.in_approximation &&
                    under.underestimation.in_true_set);
    MatrixXd flat = MatrixXd::Zero(3, 3);
    flat(2, 2) = 5.0;
    auto lip = oracle::naive_foil(dirac(VectorXd(VectorXd::Zero(3))), flat, 0.5);
    state.check("Lipschitz bound keeps annihilated directions",
                lip.lipschitz_conservatism.applicable &&
                    lip.lipschitz_conservatism.in_approximation &&
                    !lip.lipschitz_conservatism.in_true_set);
  }
  {
    double worst = -1e300;
    bool bracketed = true;
    const int instances = std::max(2, trials / 10);
    for (int k = 0; k < instances; ++k) {
      MatrixXd D = gaussian_matrix<double>(rng, 2, 4);
      auto cost = TransportationCostd::sq_euclidean_composed(pseudoinverse(D).pinv);
      AmbiguitySetd ball(uniform_atoms(2, 4), cost, 0.1 + 0.2 * (k % 3));
      Polytoped poly(gaussian_matrix<double>(rng, 3, 2),
                     VectorXd(gaussian_matrix<double>(rng, 3, 1)));
      const double grid = oracle::cvar_grid(ball, poly, 0.15, 200);
      const double golden = worst_case_cvar(ball, poly, 0.15);
      bracketed = bracketed && grid >= golden - 1e-6;
      worst = std::max(worst, grid - golden);
    }
    state.check("worst-case CVaR golden-section vs grid", bracketed && worst <= 1e-3,
                "max gap " + io::format_real(worst));
  }
  if (force_fail)
    state.check("forced failure fixture", false, "requested via --force-fail");

  std::printf("%d check group(s) failed\n", state.failures);
  return state.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal-transport uncertainty tubes for stochastic linear systems"};
  app.require_subcommand(1);

  CommonFlags propagate_flags, reach_flags, plan_flags, cvar_flags;
  auto* cmd_propagate =
      app.add_subcommand("propagate", "propagate the noise ambiguity set to the horizon state");
  add_common(cmd_propagate, propagate_flags, /*with_svg=*/false);
  auto* cmd_reach = app.add_subcommand("reach", "distributionally robust reachability analysis");
  add_common(cmd_reach, reach_flags, /*with_svg=*/true);
  auto* cmd_plan = app.add_subcommand("plan", "distributionally robust trajectory planning");
  add_common(cmd_plan, plan_flags, /*with_svg=*/true);
  auto* cmd_cvar = app.add_subcommand("cvar", "evaluate the robust CVaR of a polytope loss");
  add_common(cmd_cvar, cvar_flags, /*with_svg=*/true);

  int verify_trials = 50;
  std::uint64_t verify_seed = 2024;
  bool force_fail = false;
  auto* cmd_verify = app.add_subcommand("verify", "run the independent verification oracles");
  cmd_verify->add_option("--trials", verify_trials, "trials per randomized check")
      ->check(CLI::PositiveNumber);
  cmd_verify->add_option("--seed", verify_seed, "oracle RNG seed");
  cmd_verify->add_flag("--force-fail", force_fail, "inject a failing check (self-test)");

  try {
    app.parse(argc, argv);
    if (cmd_propagate->parsed()) return run_propagate(propagate_flags);
    if (cmd_reach->parsed()) return run_reach(reach_flags);
    if (cmd_plan->parsed()) return run_plan(plan_flags);
    if (cmd_cvar->parsed()) return run_cvar(cvar_flags);
    if (cmd_verify->parsed()) return run_verify(verify_trials, verify_seed, force_fail);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
