// tsr: transductive regression experiments, stability checks and bounds.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsr/bounds.hpp"
#include "tsr/data.hpp"
#include "tsr/experiment.hpp"
#include "tsr/report.hpp"
#include "tsr/stability.hpp"
#include "tsr/verify.hpp"
#include "tsr/version.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

const char* const kFooter =
    "Randomness: every draw comes from std::mt19937_64. Partition k of a run is seeded with\n"
    "splitmix64(seed, k); bounded integers use rejection sampling, uniforms take the top 53\n"
    "bits and normals use Box-Muller, so results are identical across platforms and --jobs.\n"
    "Features are standardized with the population variance (divide by n, not n - 1).\n"
    "Exit status: 0 success, 1 check failure or runtime error, 2 usage or input parse error.";

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

// Options shared by every data-driven command.
struct DataOptions {
  tsr::ExperimentConfig cfg;
  std::string algorithm = "ltr";
  std::string sigma = "cv";
  std::string weighting = "gaussian";
  std::string fallback = "error";
  bool no_center = false;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  auto& c = d.cfg;
  cmd->add_option("--data", c.data_path, "CSV file: header row, feature columns, target last")->required();
  cmd->add_option("--target-scale", c.target_scale, "Multiplier applied to the target column");
  cmd->add_option("--m-fraction", c.m_fraction, "Fraction of points in the training set")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--algorithm", d.algorithm, "Regressor")
      ->check(CLI::IsMember({"ltr", "krr", "cm", "llreg", "gmf", "laplacian", "stabilized-cm",
                             "stabilized-llreg", "stabilized-gmf"}));
  cmd->add_option("--C", c.c, "Labeled trade-off C (LTR, KRR, laplacian)");
  cmd->add_option("--C-prime", c.c_prime, "Unlabeled trade-off C' (LTR)");
  cmd->add_option("--mu", c.mu, "Consistency-method trade-off");
  cmd->add_option("--C-l", c.c_l, "Labeled diagonal weight (llreg, gmf)");
  cmd->add_option("--C-u", c.c_u, "Unlabeled diagonal weight (llreg, gmf)");
  cmd->add_option("--sigma", d.sigma,
                  "Gaussian kernel/affinity width, or 'cv' for 5-fold cross-validation on the training set "
                  "over {0.1,0.3,1,3,10} x median pairwise distance");
  cmd->add_option("--radius-grid", c.radius_grid, "Radii for the LTR local estimator (increasing)")
      ->delimiter(',');
  cmd->add_option("--grid-points", c.auto_grid_points,
                  "Size of the automatic radius grid used when --radius-grid is not given");
  cmd->add_option("--delta", c.delta, "Confidence parameter of the bound");
  cmd->add_option("--weighting", d.weighting, "Local estimator weights")
      ->check(CLI::IsMember({"gaussian", "inverse-distance"}));
  cmd->add_option("--fallback", d.fallback, "Pseudo-target when a test point has no labeled neighbour")
      ->check(CLI::IsMember({"error", "zero"}));
  cmd->add_option("--graph", c.graph_path, "Edge list (1-based 'i j w' lines) for the graph algorithms");
  cmd->add_flag("--no-center-labels", d.no_center, "Do not center labels for the laplacian algorithm");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

tsr::ExperimentConfig finish_config(DataOptions& d, const Globals& g) {
  tsr::ExperimentConfig c = d.cfg;
  c.seed = g.seed;
  c.output_path = g.out;
  c.algorithm = tsr::parse_algorithm(d.algorithm);
  if (d.sigma == "cv") {
    c.sigma.reset();
  } else {
    double v = 0.0;
    if (!tsr::detail::parse_double(d.sigma, v))
      throw tsr::Error(tsr::ErrorCode::InvalidConfig, "--sigma must be a number or 'cv'");
    c.sigma = v;
  }
  c.weighting = d.weighting == "gaussian" ? tsr::Weighting::Gaussian : tsr::Weighting::InverseDistance;
  c.fallback = d.fallback == "zero" ? tsr::Fallback::Zero : tsr::Fallback::Error;
  c.center_labels = !d.no_center;
  c.validate();
  return c;
}

void write_output(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw tsr::Error(tsr::ErrorCode::IoError, "cannot write " + g.out);
  f << text;
  if (!f) throw tsr::Error(tsr::ErrorCode::IoError, "write failed for " + g.out);
}

tsr::LoadedData load(const tsr::ExperimentConfig& c) {
  tsr::LoadedData data = tsr::load_and_normalize(c.data_path, c.target_scale);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
  return data;
}

int cmd_run(DataOptions& d, const Globals& g) {
  const tsr::ExperimentConfig cfg = finish_config(d, g);
  const tsr::ExperimentReport rep = tsr::run_experiment(cfg, load(cfg));
  write_output(g, g.format == "csv" ? tsr::records_csv(rep) : tsr::dump_report(rep));
  for (const auto& r : rep.records)
    if (!r.ok()) std::cerr << "partition " << r.index << " failed: " << r.error << '\n';
  return 0;
}

int cmd_select_radius(DataOptions& d, const Globals& g, tsr::Index partition) {
  tsr::ExperimentConfig cfg = finish_config(d, g);
  if (cfg.algorithm != tsr::Algorithm::Ltr)
    throw tsr::Error(tsr::ErrorCode::InvalidConfig, "select-radius applies to --algorithm ltr");
  const tsr::LoadedData data = load(cfg);
  const auto& s = data.sample;
  const std::uint64_t seed = tsr::partition_seed(cfg.seed, partition);
  const tsr::Partition part = tsr::sample_partition(s, tsr::train_size(s.size(), cfg.m_fraction), seed);
  const tsr::PartitionContext ctx = tsr::make_context(cfg, s, part, seed);
  const std::vector<double> grid =
      cfg.radius_grid.empty() ? tsr::automatic_radius_grid(s, cfg.auto_grid_points) : cfg.radius_grid;
  const tsr::RadiusSelection sel = tsr::select_radius(tsr::ltr_settings(ctx, cfg.c_prime), s, part, grid);
  if (g.format == "csv") {
    std::ostringstream out;
    out << "r,m_r,train_mse,test_mse,beta_loc,beta,slack,objective\n";
    for (const auto& e : sel.per_r)
      out << tsr::format_double(e.r) << ',' << e.m_r << ',' << tsr::format_double(e.train_mse) << ','
          << tsr::format_double(e.test_mse) << ',' << tsr::format_double(e.beta_loc) << ','
          << tsr::format_double(e.beta) << ',' << tsr::format_double(e.slack) << ','
          << tsr::format_double(e.objective) << '\n';
    write_output(g, out.str());
  } else {
    tsr::Json per_r = tsr::Json::array();
    for (const auto& e : sel.per_r) per_r.push_back(tsr::to_json(e));
    tsr::Json j{{"partition", partition}, {"per_r", per_r}, {"r_star", sel.r_star},
                {"seed", seed},           {"sigma", ctx.sigma}};
    write_output(g, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_stability(DataOptions& d, const Globals& g, tsr::Index partition, tsr::Index max_swaps) {
  const tsr::ExperimentConfig cfg = finish_config(d, g);
  const tsr::LoadedData data = load(cfg);
  const auto& s = data.sample;
  const std::uint64_t seed = tsr::partition_seed(cfg.seed, partition);
  const tsr::Partition part = tsr::sample_partition(s, tsr::train_size(s.size(), cfg.m_fraction), seed);
  const tsr::PartitionContext ctx = tsr::make_context(cfg, s, part, seed);
  const tsr::Coefficients co = tsr::theoretical_coefficients(ctx, part);
  const tsr::SwapSelection sel = tsr::select_swaps(part, tsr::mix_seed(seed, 2), max_swaps);
  const auto emp = tsr::empirical_stability(tsr::make_solver(ctx), s, part, sel.swaps, sel.exhaustive);

  const bool score_ok = !co.score_bound || emp.max_score_delta <= *co.score_bound + 1e-9;
  const bool cost_ok = emp.max_cost_delta <= co.beta + 1e-9;
  const tsr::Json j{
      {"algorithm", tsr::to_string(cfg.algorithm)},
      {"cost_bound", tsr::detail::real(co.beta)},
      {"cost_ok", cost_ok},
      {"empirical_cost_delta", emp.max_cost_delta},
      {"empirical_score_delta", emp.max_score_delta},
      {"exhaustive", emp.exhaustive},
      {"max_residual", emp.max_residual},
      {"residual_bound", tsr::detail::real(co.residual_bound)},
      {"score_bound", co.score_bound ? tsr::Json(*co.score_bound) : tsr::Json(nullptr)},
      {"score_ok", score_ok},
      {"swaps_evaluated", emp.swaps_evaluated},
      {"worst_swap", tsr::Json{{"added", emp.worst_swap.added}, {"removed", emp.worst_swap.removed}}}};
  if (g.format == "csv") {
    std::ostringstream out;
    out << "quantity,empirical,bound,ok\n"
        << "score," << tsr::format_double(emp.max_score_delta) << ','
        << (co.score_bound ? tsr::format_double(*co.score_bound) : "") << ',' << score_ok << '\n'
        << "cost," << tsr::format_double(emp.max_cost_delta) << ',' << tsr::format_double(co.beta) << ','
        << cost_ok << '\n';
    write_output(g, out.str());
  } else {
    write_output(g, j.dump(2) + "\n");
  }
  return score_ok && cost_ok ? 0 : kExitCheckFailed;
}

struct BoundArgs {
  double r_hat = 0.0, beta = 0.0, b = 1.0, delta = 0.1;
  tsr::Index m = 1, u = 1;
};

int cmd_bound(const BoundArgs& a, const Globals& g) {
  const tsr::BoundReport r = tsr::generalization_bound(a.r_hat, a.beta, a.b, a.m, a.u, a.delta);
  if (g.format == "csv") {
    write_output(g, "r_hat,beta,B,m,u,delta,alpha,slack,bound\n" + tsr::format_double(r.r_hat) + "," +
                        tsr::format_double(r.beta) + "," + tsr::format_double(r.residual_bound) + "," +
                        std::to_string(r.m) + "," + std::to_string(r.u) + "," + tsr::format_double(r.delta) +
                        "," + tsr::format_double(r.alpha_mu) + "," + tsr::format_double(r.slack) + "," +
                        tsr::format_double(r.bound_value) + "\n");
  } else {
    const tsr::Json j{{"B", r.residual_bound}, {"alpha", r.alpha_mu}, {"beta", r.beta},
                      {"bound", r.bound_value}, {"delta", r.delta},   {"m", r.m},
                      {"r_hat", r.r_hat},       {"slack", r.slack},   {"u", r.u}};
    write_output(g, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_lowerbound(tsr::Index m, double c, const Globals& g) {
  const tsr::LowerBoundInstance inst = tsr::cm_lower_bound_instance(m, c);
  const tsr::SwapPair sw = inst.canonical_swap();
  const tsr::Vector h0 = tsr::solve_unconstrained(inst.problem()).scores;
  const tsr::Vector h1 = tsr::solve_unconstrained(inst.problem_for(inst.part.swapped(sw))).scores;
  const auto k = static_cast<Eigen::Index>(sw.added);
  const double measured = std::abs(h1(k) - h0(k));
  const double floor = c / (2.0 * (c + 1.0));
  const bool ok = std::abs(measured - inst.predicted_a) <= 1e-9 && measured >= floor - 1e-12;
  if (g.format == "csv") {
    write_output(g, "m,C,measured,predicted,floor,ok\n" + std::to_string(m) + "," + tsr::format_double(c) + "," +
                        tsr::format_double(measured) + "," + tsr::format_double(inst.predicted_a) + "," +
                        tsr::format_double(floor) + "," + (ok ? "true" : "false") + "\n");
  } else {
    const tsr::Json j{{"C", c},          {"floor", floor},       {"index", sw.added},
                      {"m", m},          {"measured", measured}, {"ok", ok},
                      {"predicted", inst.predicted_a}};
    write_output(g, j.dump(2) + "\n");
  }
  return ok ? 0 : kExitCheckFailed;
}

int cmd_verify(const std::string& level, double alpha_fault, unsigned jobs, const Globals& g) {
  tsr::VerifyOptions opt;
  opt.level = level == "full" ? tsr::VerifyLevel::Full : tsr::VerifyLevel::Fast;
  opt.seed = g.seed;
  opt.jobs = jobs;
  opt.alpha_fault = alpha_fault;
  const tsr::VerifyReport rep = tsr::verify_suite(opt);
  write_output(g, g.format == "csv" ? rep.to_csv() : rep.to_json().dump(2) + "\n");
  return rep.passed() ? 0 : kExitCheckFailed;
}

int cmd_emit_plot(const std::string& report, const std::string& kind, double scale, const Globals& g) {
  write_output(g, tsr::emit_plot_data(tsr::read_report(report), tsr::parse_plot_kind(kind), scale));
  return 0;
}

bool is_usage_error(tsr::ErrorCode c) {
  return c == tsr::ErrorCode::ParseError || c == tsr::ErrorCode::InvalidConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-based transductive regression: experiments, stability checks and bounds", "tsr"};
  app.footer(kFooter);
  app.set_version_flag("--version", tsr::kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output file (default: stdout)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  DataOptions run_opts, sel_opts, stab_opts;
  tsr::Index sel_partition = 0, stab_partition = 0, max_swaps = 400;

  auto* run = app.add_subcommand("run", "Fit every partition and write the experiment report");
  add_data_options(run, run_opts);
  run->add_option("--partitions", run_opts.cfg.partitions, "Number of random partitions")
      ->check(CLI::PositiveNumber);

  auto* sel = app.add_subcommand("select-radius", "Per-radius LTR sweep and r* for one partition");
  add_data_options(sel, sel_opts);
  sel->add_option("--partition", sel_partition, "Partition index (seeded from --seed)");

  auto* stab = app.add_subcommand("stability", "Empirical swap stability against the theoretical bound");
  add_data_options(stab, stab_opts);
  stab->add_option("--partition", stab_partition, "Partition index (seeded from --seed)");
  stab->add_option("--max-swaps", max_swaps, "Enumerate all swaps when m*u is at most this, else sample");

  BoundArgs bargs;
  auto* bound = app.add_subcommand("bound", "Evaluate the transductive generalization bound");
  bound->add_option("--r-hat", bargs.r_hat, "Empirical (training) error")->required();
  bound->add_option("--beta", bargs.beta, "Cost stability coefficient")->required();
  bound->add_option("--B", bargs.b, "Residual bound |h(x) - y(x)| <= B")->required();
  bound->add_option("--m", bargs.m, "Training set size")->required()->check(CLI::PositiveNumber);
  bound->add_option("--u", bargs.u, "Test set size")->required()->check(CLI::PositiveNumber);
  bound->add_option("--delta", bargs.delta, "Confidence parameter");

  tsr::Index lb_m = 5;
  double lb_c = 1.0;
  auto* lb = app.add_subcommand("lowerbound-demo", "Score change on the consistency-method lower-bound instance");
  lb->add_option("--m", lb_m, "Labeled points (instance has 2m points)")->check(CLI::Range(2, 100000));
  lb->add_option("--C", lb_c, "Trade-off")->check(CLI::PositiveNumber);

  std::string level = "fast";
  double alpha_fault = 1.0;
  unsigned verify_jobs = 1;
  auto* ver = app.add_subcommand("verify", "Run the property checks of every module");
  ver->add_option("--level", level, "fast, or full (adds the 1e5-trial concentration run)")
      ->check(CLI::IsMember({"fast", "full"}));
  ver->add_option("--alpha-fault", alpha_fault, "Scale alpha(m,u) by this factor; the suite must then fail");
  ver->add_option("--jobs", verify_jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string report_path, kind = "mse_vs_r";
  double plot_scale = 1.0;
  auto* plot = app.add_subcommand("emit-plot", "CSV (r, mean, std) from a report with a radius sweep");
  plot->add_option("--report", report_path, "Report written by 'run'")->required();
  plot->add_option("--kind", kind, "mse_vs_r or bound_vs_r")->check(CLI::IsMember({"mse_vs_r", "bound_vs_r"}));
  plot->add_option("--plot-scale", plot_scale, "Factor applied to the complexity term in bound_vs_r");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_opts, g);
    if (*sel) return cmd_select_radius(sel_opts, g, sel_partition);
    if (*stab) return cmd_stability(stab_opts, g, stab_partition, max_swaps);
    if (*bound) return cmd_bound(bargs, g);
    if (*lb) return cmd_lowerbound(lb_m, lb_c, g);
    if (*ver) return cmd_verify(level, alpha_fault, verify_jobs, g);
    if (*plot) return cmd_emit_plot(report_path, kind, plot_scale, g);
  } catch (const tsr::Error& e) {
    std::cerr << "tsr: " << e.what() << '\n';
    return is_usage_error(e.code()) ? kExitUsage : kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "tsr: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
