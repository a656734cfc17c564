// Command line front end: solves stagewise instances loaded from files,
// writes certificates, iteration traces, and benchmark tables.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stagewise/io.hpp"
#include "stagewise/stagewise.hpp"

namespace {

using namespace stagewise;

constexpr int kExitOk = 0;
constexpr int kExitIterationLimit = 2;
constexpr int kExitUsage = 64;
constexpr int kExitDataFormat = 65;

enum class LogLevel { kOff = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("STAGEWISE_LOG");
    if (!env) return LogLevel::kOff;
    const std::string value = env;
    if (value == "debug") return LogLevel::kDebug;
    if (value == "info") return LogLevel::kInfo;
    return LogLevel::kOff;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::fprintf(stderr, "%s\n", msg.c_str());
}

struct CommonOptions {
  std::string solver = "safe";
  bool no_escape = false;
  double epsilon_gap = 1e-6;
  double rel_gap = 1e-2;
  int max_iters = 50;
  unsigned seed = 0;
  std::string emit_trace;
  std::string emit_json;
  bool no_momentum = false;

  void attach(CLI::App* app) {
    app->add_option("--solver", solver, "Solver variant: safe or simple")
        ->check(CLI::IsMember({"safe", "simple"}));
    app->add_flag("--no-escape", no_escape,
                  "Shorthand for --solver simple (skip degeneracy handling)");
    app->add_option("--epsilon-gap", epsilon_gap, "Absolute duality gap target");
    app->add_option("--rel-gap", rel_gap, "Relative duality gap target");
    app->add_option("--max-iters", max_iters, "Iteration budget");
    app->add_option("--seed", seed, "Random seed for generated inputs");
    app->add_option("--emit-trace", emit_trace,
                    "Write per-iteration CSV trace(s) to this path");
    app->add_option("--emit-json", emit_json, "Write result record JSON");
    app->add_flag("--no-momentum", no_momentum, "Disable acceleration");
  }

  SolveConfig config() const {
    SolveConfig cfg;
    cfg.max_iters = max_iters;
    cfg.epsilon = epsilon_gap;
    cfg.relative_epsilon = rel_gap;
    cfg.use_momentum = !no_momentum;
    cfg.seed = seed;
    return cfg;
  }

  bool use_safe() const { return !no_escape && solver == "safe"; }

  SolveReport run(const StagewiseProblem& problem, const Iterate& start,
                  const TraceCallback& callback = {}) const {
    TraceCallback cb = callback;
    if (log_level() >= LogLevel::kDebug) {
      cb = [callback](const TraceRow& row) {
        std::fprintf(stderr, "iter %d primal %.9g dual %.9g gap %.9g\n",
                     row.iter, row.primal, row.dual, row.gap);
        if (callback) callback(row);
      };
    }
    return use_safe() ? solve_safe(problem, start, config(), cb)
                      : solve_simple(problem, start, config(), cb);
  }
};

const char* status_name(SolveStatus status) {
  return status == SolveStatus::kConverged ? "converged" : "iteration_limit";
}

void print_certificate(const std::string& label, const SolveReport& report) {
  std::printf("%s: primal=%.9g dual=%.9g gap=%.9g rel_gap=%.3g iters=%d %s\n",
              label.c_str(), report.certificate.primal,
              report.certificate.dual, report.certificate.gap,
              report.certificate.relative_gap, report.iterations,
              status_name(report.status));
}

nlohmann::json report_record(const SolveReport& report) {
  nlohmann::json rec = io::to_json(report.certificate);
  rec["iterations"] = report.iterations;
  rec["status"] = status_name(report.status);
  return rec;
}

// --- verify ------------------------------------------------------------

int cmd_verify(const std::string& network_file, const std::string& query_file,
               const CommonOptions& opts, int target_flag) {
  const NetworkSpec network = io::load_network(network_file);
  VerificationQuery query = io::load_query(query_file);
  if (target_flag >= 0) query.target_label = target_flag;
  if (query.true_label < 0 || query.true_label >= network.output_dim())
    throw DataFormatError("query true_label out of range for this network");

  std::vector<int> targets;
  if (query.target_label >= 0) {
    targets.push_back(query.target_label);
  } else {
    for (int c = 0; c < network.output_dim(); ++c)
      if (c != query.true_label) targets.push_back(c);
  }

  // independent solves over one immutable family; results keep class order
  std::vector<std::future<SolveReport>> futures;
  for (int target : targets) {
    futures.push_back(std::async(std::launch::async, [&, target] {
      const VerificationProblem problem =
          build_verification_problem(network, query, target);
      TraceCallback cb;
      std::shared_ptr<io::TraceCsvWriter> writer;
      if (!opts.emit_trace.empty()) {
        std::string path = opts.emit_trace;
        if (targets.size() > 1) path += ".c" + std::to_string(target);
        writer = std::make_shared<io::TraceCsvWriter>(path);
        cb = [writer](const TraceRow& row) { (*writer)(row); };
      }
      return opts.run(problem, default_start(problem), cb);
    }));
  }

  bool all_positive = true;
  bool hit_limit = false;
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const SolveReport report = futures[k].get();
    print_certificate("class " + std::to_string(targets[k]), report);
    all_positive = all_positive && report.certificate.dual > 0.0;
    hit_limit = hit_limit || report.status == SolveStatus::kIterationLimit;
    nlohmann::json rec = report_record(report);
    rec["target_label"] = targets[k];
    records.push_back(std::move(rec));
  }

  // the relaxation is one-sided: a nonpositive bound never proves an attack
  const char* verdict = all_positive ? "ROBUST" : "UNKNOWN";
  std::printf("verdict: %s\n", verdict);
  if (!opts.emit_json.empty())
    io::save_json_file(opts.emit_json,
                       {{"verdict", verdict}, {"classes", records}});
  return hit_limit ? kExitIterationLimit : kExitOk;
}

// --- solve -------------------------------------------------------------

std::unique_ptr<StagewiseProblem> make_instance(const std::string& spec) {
  if (spec == "parabola") return std::make_unique<ParabolaProblem>();
  if (spec.rfind("chain:", 0) == 0) {
    const int length = std::stoi(spec.substr(6));
    return std::make_unique<ChainProblem>(length);
  }
  if (spec.rfind("isotonic:", 0) == 0)
    return std::make_unique<IsotonicProblem>(
        io::load_isotonic(spec.substr(9)));
  throw CLI::ValidationError("--instance",
                             "expected parabola, chain:N, or isotonic:FILE");
}

int cmd_solve(const std::string& instance_spec, const CommonOptions& opts,
              const std::vector<double>& start_s,
              const std::vector<double>& start_theta) {
  const std::unique_ptr<StagewiseProblem> problem =
      make_instance(instance_spec);
  Iterate start = default_start(*problem);
  if (!start_s.empty()) {
    if (static_cast<int>(start_s.size()) != problem->s_dim())
      throw DataFormatError("--start-s length mismatch");
    start.s = start_s;
    problem->project_s(start.s);
  }
  if (!start_theta.empty()) {
    if (static_cast<int>(start_theta.size()) != problem->stage_count())
      throw DataFormatError("--start-theta length mismatch");
    start.theta = start_theta;
  }

  TraceCallback cb;
  std::shared_ptr<io::TraceCsvWriter> writer;
  if (!opts.emit_trace.empty()) {
    writer = std::make_shared<io::TraceCsvWriter>(opts.emit_trace);
    cb = [writer](const TraceRow& row) { (*writer)(row); };
  }
  const SolveReport report = opts.run(*problem, start, cb);
  print_certificate(instance_spec, report);
  if (!opts.emit_json.empty())
    io::save_json_file(opts.emit_json, report_record(report));
  return report.status == SolveStatus::kConverged ? kExitOk
                                                  : kExitIterationLimit;
}

// --- bench -------------------------------------------------------------

struct BenchSuite {
  int count = 10;
  int input_dim = 4;
  std::vector<int> hidden{8};
  int classes = 3;
  std::string activation = "relu";
  double epsilon = 0.05;
  unsigned seed = 1;
};

BenchSuite load_suite(const std::string& path) {
  const nlohmann::json doc = io::load_json_file(path);
  BenchSuite suite;
  try {
    suite.count = doc.value("count", suite.count);
    suite.input_dim = doc.value("input_dim", suite.input_dim);
    if (doc.contains("hidden"))
      suite.hidden = doc["hidden"].get<std::vector<int>>();
    suite.classes = doc.value("classes", suite.classes);
    suite.activation = doc.value("activation", suite.activation);
    suite.epsilon = doc.value("epsilon", suite.epsilon);
    suite.seed = doc.value("seed", suite.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("suite file: ") + e.what());
  }
  return suite;
}

NetworkSpec suite_network(const BenchSuite& suite, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NetworkSpec net;
  net.input_dim = suite.input_dim;
  int fan_in = suite.input_dim;
  std::vector<int> sizes = suite.hidden;
  sizes.push_back(suite.classes);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    DenseLayer layer;
    layer.activation = k + 1 == sizes.size()
                           ? Activation::kNone
                           : io::activation_from_name(suite.activation);
    const double scale = 1.5 / std::sqrt(static_cast<double>(fan_in));
    layer.bias.resize(sizes[k]);
    layer.weights.resize(sizes[k]);
    for (int r = 0; r < sizes[k]; ++r) {
      layer.bias[r] = 0.2 * unit(rng);
      layer.weights[r].resize(fan_in);
      for (int j = 0; j < fan_in; ++j) layer.weights[r][j] = scale * unit(rng);
    }
    fan_in = sizes[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

int cmd_bench(const std::string& suite_file, const CommonOptions& opts,
              bool seed_given) {
  BenchSuite suite = load_suite(suite_file);
  if (seed_given) suite.seed = opts.seed;
  std::mt19937_64 rng(suite.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::printf("%-5s %-7s %14s %14s %12s %8s %10s %s\n", "net", "stages",
              "bound", "primal", "gap", "iters", "ms", "status");
  nlohmann::json rows = nlohmann::json::array();
  int converged = 0;
  double total_iters = 0.0;
  for (int k = 0; k < suite.count; ++k) {
    const NetworkSpec net = suite_network(suite, rng);
    VerificationQuery query;
    query.center.resize(suite.input_dim);
    for (double& c : query.center) c = 0.5 * unit(rng);
    query.epsilon = suite.epsilon;
    const Vec scores = net.forward(query.center);
    query.true_label = static_cast<int>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
    int runner_up = query.true_label == 0 ? 1 : 0;
    for (int c = 0; c < suite.classes; ++c)
      if (c != query.true_label && scores[c] > scores[runner_up])
        runner_up = c;

    const VerificationProblem problem =
        build_verification_problem(net, query, runner_up);
    const auto t0 = std::chrono::steady_clock::now();
    const SolveReport report = opts.run(problem, default_start(problem));
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

    converged += report.status == SolveStatus::kConverged;
    total_iters += report.iterations;
    std::printf("%-5d %-7d %14.6g %14.6g %12.4g %8d %10.3f %s\n", k,
                problem.stage_count(), report.certificate.dual,
                report.certificate.primal, report.certificate.gap,
                report.iterations, ms, status_name(report.status));
    rows.push_back({{"net", k},
                    {"stages", problem.stage_count()},
                    {"bound", report.certificate.dual},
                    {"primal", report.certificate.primal},
                    {"gap", report.certificate.gap},
                    {"iters", report.iterations},
                    {"ms", ms},
                    {"status", status_name(report.status)}});
  }

  const double early_pct = 100.0 * converged / std::max(1, suite.count);
  const double avg_iters = total_iters / std::max(1, suite.count);
  std::printf("early_stop_pct=%.1f avg_iters=%.2f\n", early_pct, avg_iters);

  if (!opts.emit_trace.empty()) {
    std::ofstream csv(opts.emit_trace);
    if (!csv) throw DataFormatError("cannot open: " + opts.emit_trace);
    csv << "net,stages,bound,primal,gap,iters,ms,status\n";
    for (const auto& row : rows) {
      csv << row["net"] << ',' << row["stages"] << ',' << row["bound"] << ','
          << row["primal"] << ',' << row["gap"] << ',' << row["iters"] << ','
          << row["ms"] << ',' << row["status"].get<std::string>() << '\n';
    }
  }
  if (!opts.emit_json.empty())
    io::save_json_file(opts.emit_json,
                       {{"rows", rows},
                        {"early_stop_pct", early_pct},
                        {"avg_iters", avg_iters}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stagewise convex solver"};
  app.require_subcommand(1);

  CommonOptions opts;

  auto* verify = app.add_subcommand(
      "verify", "Certify a network's robustness for a query");
  std::string network_file, query_file;
  int target_flag = -1;
  verify->add_option("network", network_file, "Network JSON file")->required();
  verify->add_option("query", query_file, "Query JSON file")->required();
  verify->add_option("--target", target_flag, "Single target class");
  opts.attach(verify);

  auto* solve = app.add_subcommand("solve", "Solve a generic instance");
  std::string instance_spec;
  std::vector<double> start_s, start_theta;
  solve
      ->add_option("--instance", instance_spec,
                   "parabola | chain:N | isotonic:FILE")
      ->required();
  solve->add_option("--start-s", start_s, "Starting s (defaults to center)")
      ->delimiter(',');
  solve
      ->add_option("--start-theta", start_theta,
                   "Starting theta (defaults to 0.5)")
      ->delimiter(',');
  opts.attach(solve);

  auto* bench = app.add_subcommand("bench", "Run a generated benchmark suite");
  std::string suite_file;
  bench->add_option("suite", suite_file, "Suite JSON file")->required();
  opts.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(verify)) {
      log_info("verify " + network_file + " against " + query_file);
      return cmd_verify(network_file, query_file, opts, target_flag);
    }
    if (app.got_subcommand(solve)) {
      log_info("solve " + instance_spec);
      return cmd_solve(instance_spec, opts, start_s, start_theta);
    }
    log_info("bench " + suite_file);
    return cmd_bench(suite_file, opts,
                     bench->count("--seed") > 0);
  } catch (const DataFormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDataFormat;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDataFormat;
  }
}
