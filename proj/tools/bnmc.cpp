// bnmc: command-line front end for the inference library.
//
// Output is one key=value record per line. Exit status 0 on success, 1 for
// inference-level errors (reported as an `error` record on stdout) and 2 for
// usage errors such as malformed flags or unknown node/state names.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnmc/bnmc.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string boolean(bool b) { return b ? "true" : "false"; }

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  return out + "\"";
}

// Names on the command line are user input: a bad one is a usage error.
bnmc::Assignment parse_evidence(const bnmc::BeliefNetwork& net, const std::string& text) {
  try {
    return bnmc::parse_assignment(net, text);
  } catch (const bnmc::Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<bnmc::Query> parse_query_list(const bnmc::BeliefNetwork& net, const std::string& text) {
  try {
    auto queries = bnmc::parse_queries(net, text);
    if (queries.empty()) {
      throw UsageError("--query needs at least one NODE=STATE");
    }
    return queries;
  } catch (const bnmc::Error& e) {
    throw UsageError(e.what());
  }
}

std::string label(const bnmc::BeliefNetwork& net, const bnmc::Query& q) {
  return "node=" + net.node(q.node).name + " state=" + net.node(q.node).states[q.state];
}

struct Common {
  std::string network;
  std::string query;
  std::string evidence;
};

struct InferArgs {
  std::string algorithm = "bv";
  double epsilon = 0.05;
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t max_iterations = 50'000;
  std::string stratify = "off";
  std::uint64_t refresh_interval = 1000;
  std::optional<double> rank_stop;
  std::size_t top_m = 1;
  bool rescore = false;
  bool skip_step3 = false;
};

void print_stream(std::ostream& out, const bnmc::StreamReport& s) {
  out << " phi=" << s.phi << " normalizer=" << s.normalizer << " sum=" << s.sum << " count=" << s.count
      << " status=" << bnmc::to_string(s.status) << " completion=" << s.completion << " delta=" << s.delta;
}

int run_validate(const Common& c) {
  const auto net = bnmc::read_network(c.network);
  std::size_t edges = 0;
  for (const auto& node : net.nodes()) {
    edges += node.parents.size();
  }
  std::cout << "valid=true nodes=" << net.size() << " edges=" << edges
            << " joint_states=" << net.joint_state_count() << "\n";
  return 0;
}

int run_exact(const Common& c) {
  const auto net = bnmc::read_network(c.network);
  const auto evidence = parse_evidence(net, c.evidence);
  for (const auto& q : parse_query_list(net, c.query)) {
    auto query = net.empty_assignment();
    query.bind(q.node, q.state);
    const auto r = bnmc::posterior(net, query, evidence);
    std::cout << "exact " << label(net, q) << " posterior=" << r.posterior << " joint_w=" << r.joint_w
              << " joint_e=" << r.joint_e << " below_precision_floor=" << boolean(r.below_precision_floor) << "\n";
  }
  return 0;
}

int run_infer(const Common& c, const InferArgs& a) {
  const auto net = bnmc::read_network(c.network);
  const auto evidence = parse_evidence(net, c.evidence);
  const auto queries = parse_query_list(net, c.query);
  const bnmc::AccuracyParams params{a.epsilon, a.delta};
  params.check();
  if (params.beyond_analyzed_range()) {
    std::cout << "warning message=\"epsilon above 1 is outside the analyzed range\"\n";
  }
  std::optional<bnmc::StratificationPlan> plan;
  if (a.stratify != "off") {
    plan = bnmc::StratificationPlan::uniform(
        queries.size(), a.stratify == "uniform" ? bnmc::StratificationMode::uniform : bnmc::StratificationMode::proportional,
        a.refresh_interval);
  }
  const auto seeds = bnmc::StreamSeeds::derive(a.seed, queries.size());

  if (a.algorithm == "lw") {
    std::vector<bnmc::NodeIndex> nodes;
    for (const auto& q : queries) {
      if (std::find(nodes.begin(), nodes.end(), q.node) == nodes.end()) {
        nodes.push_back(q.node);
      }
    }
    bnmc::RandomStream rng(seeds.evidence);
    const auto r = bnmc::likelihood_weighting(net, nodes, evidence, a.max_iterations, rng);
    std::cout << "run algorithm=lw iterations=" << r.iterations << " instances_generated=" << r.instances_generated
              << " evidence_estimate=" << r.evidence_estimate << " no_mass=" << boolean(r.no_mass) << "\n";
    for (const auto& q : queries) {
      const auto it = std::find(nodes.begin(), nodes.end(), q.node);
      const auto& est = r.estimates[static_cast<std::size_t>(it - nodes.begin())];
      std::cout << "query " << label(net, q) << " posterior="
                << (r.no_mass ? std::numeric_limits<double>::quiet_NaN() : est.normalized[q.state])
                << " completed=true\n";
    }
    return 0;
  }

  if (a.algorithm == "bv") {
    bnmc::BvOptions options;
    options.max_iterations = a.max_iterations;
    options.rescore = a.rescore;
    options.stratification = plan;
    if (a.rank_stop) {
      options.rank_stop = bnmc::RankStopRule{*a.rank_stop, a.top_m};
    }
    const auto r = bnmc::run_bounded_variance(net, queries, evidence, params, seeds, options);
    std::cout << "run algorithm=bv epsilon=" << a.epsilon << " delta=" << a.delta << " threshold=" << r.threshold
              << " iterations=" << r.iterations << " instances_generated=" << r.instances_generated
              << " instances_rescored=" << r.instances_rescored << "\n";
    std::cout << "evidence";
    print_stream(std::cout, r.evidence);
    std::cout << "\n";
    for (const auto& q : r.queries) {
      std::cout << "query " << label(net, q.query) << " posterior=" << q.posterior
                << " completed=" << boolean(q.reliable) << " clamped=" << boolean(q.clamped)
                << " combined_delta=" << q.combined_delta;
      print_stream(std::cout, q.stream);
      std::cout << "\n";
    }
    if (r.rank) {
      const auto& lead = queries[r.rank->leader];
      const auto& next = queries[r.rank->runner_up];
      std::cout << "rank decided=" << boolean(r.rank->decided) << " leader_node=" << net.node(lead.node).name
                << " leader_state=" << net.node(lead.node).states[lead.state]
                << " runner_up_node=" << net.node(next.node).name
                << " runner_up_state=" << net.node(next.node).states[next.state] << " epsilon=" << r.rank->epsilon
                << " failure=" << r.rank->failure << "\n";
    }
    return 0;
  }

  bnmc::AaOptions options;
  options.max_iterations = a.max_iterations;
  options.rescore = a.rescore;
  options.skip_step3 = a.skip_step3;
  options.stratification = plan;
  const auto r = bnmc::run_aa(net, queries, evidence, params, seeds, options);
  std::cout << "run algorithm=aa epsilon=" << a.epsilon << " delta=" << a.delta << " upsilon=" << r.plan.upsilon
            << " iterations=" << r.iterations << " instances_generated=" << r.instances_generated
            << " instances_rescored=" << r.instances_rescored << " total_samples=" << bnmc::aa_budget(r.plan) << "\n";
  const auto print_plan = [](const bnmc::AaStream& s) {
    std::cout << " phi=" << s.phi << " status=" << bnmc::to_string(s.status) << " completion=" << s.completion
              << " rough_phi=" << s.rough_phi << " step1_samples=" << s.step1_samples << " pairs=" << s.pairs
              << " rho_hat=" << s.rho_hat << " final_samples=" << s.final_samples << " step3_draws=" << s.step3_draws
              << " skipped_step3=" << boolean(s.skipped_step3);
  };
  std::cout << "evidence";
  print_plan(r.plan.evidence);
  std::cout << "\n";
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    const auto& e = r.estimates[i];
    std::cout << "query " << label(net, e.query) << " posterior=" << e.posterior
              << " completed=" << boolean(e.reliable) << " clamped=" << boolean(e.clamped);
    print_plan(r.plan.queries[i]);
    std::cout << "\n";
  }
  return 0;
}

int run_bounds(const Common& c, double epsilon, double delta) {
  const auto net = bnmc::read_network(c.network);
  const auto evidence = parse_evidence(net, c.evidence);
  const auto queries = c.query.empty() ? std::vector<bnmc::Query>{} : parse_query_list(net, c.query);
  const bnmc::AccuracyParams params{epsilon, delta};
  params.check();
  std::cout << "bounds epsilon=" << epsilon << " delta=" << delta << " bv_threshold=" << bnmc::bv_threshold(params)
            << " aa_upsilon=" << bnmc::aa_upsilon(params) << " beyond_analyzed_range=" << boolean(params.beyond_analyzed_range())
            << "\n";
  const auto count = [](const std::optional<std::uint64_t>& n) {
    return n ? std::to_string(*n) : std::string("unbounded");
  };
  const auto describe = [&](const std::string& head, const bnmc::Assignment& clamp) {
    std::cout << head;
    const auto nodes = clamp.bound_nodes();
    if (!nodes.empty()) {
      const auto lvb = net.lvb(nodes);
      std::cout << " lvb_lower=" << lvb.lower << " lvb_upper=" << lvb.upper << " gamma=" << lvb.gamma
                << " k=" << lvb.k << " extreme=" << boolean(lvb.extreme) << " lvb_samples=" << count(bnmc::lvb_samples(lvb, params));
    }
    const double pi = bnmc::ClampedSampler(net, clamp).normalizer();
    try {
      const auto m = bnmc::weight_moments(net, clamp);
      std::cout << " probability=" << m.mean;
      if (pi > 0.0) {
        // moments of the normalized weight, which lies in [0, 1]
        const double mu = m.mean / pi;
        const double sigma2 = m.variance() / (pi * pi);
        std::cout << " zeta_mean=" << mu << " zeta_variance=" << sigma2
                  << " zero_one_samples=" << count(bnmc::zero_one_samples(std::min(1.0, mu), params))
                  << " chebychev_samples=" << count(bnmc::chebychev_samples(sigma2, mu, params));
      }
    } catch (const bnmc::Error& e) {
      if (e.code() != bnmc::ErrorCode::enumeration_too_large) {
        throw;
      }
      std::cout << " probability=unavailable";
    }
    std::cout << "\n";
  };
  describe("evidence", evidence);
  for (const auto& q : queries) {
    if (evidence.is_bound(q.node)) {
      throw bnmc::Error(bnmc::ErrorCode::invalid_argument, "query node '" + net.node(q.node).name + "' is evidence");
    }
    auto clamp = evidence;
    clamp.bind(q.node, q.state);
    describe("query " + label(net, q), clamp);
  }
  return 0;
}

struct BenchArgs {
  std::size_t cases = 50;
  std::uint64_t seed = 0;
  std::string report;
  double epsilon = 0.05;
  double delta = 0.05;
  std::uint64_t budget = 50'000;
  std::vector<std::string> algorithms{"lw", "bv", "aa"};
  std::vector<double> evidence_range{0.1, 0.6};
  std::size_t threads = 1;
  bool rescore = false;
  bool skip_step3 = false;
};

int run_bench(const Common& c, const BenchArgs& a) {
  const auto net = bnmc::read_network(c.network);
  if (a.evidence_range.size() != 2) {
    throw UsageError("--evidence-range takes two fractions");
  }
  bnmc::RandomStream rng(bnmc::derive_seed(a.seed, "cases"));
  const auto cases = bnmc::generate_cases(net, a.cases, {a.evidence_range[0], a.evidence_range[1]}, rng);
  std::vector<bnmc::Algorithm> algorithms;
  for (const auto& name : a.algorithms) {
    algorithms.push_back(name == "lw" ? bnmc::Algorithm::lw : name == "bv" ? bnmc::Algorithm::bv : bnmc::Algorithm::aa);
  }
  bnmc::ComparisonConfig config;
  config.params = {a.epsilon, a.delta};
  config.budget = a.budget;
  config.master_seed = a.seed;
  config.rescore = a.rescore;
  config.skip_step3 = a.skip_step3;
  config.threads = a.threads;
  const auto report = bnmc::run_comparison(net, cases, algorithms, config);
  if (a.report.empty() || a.report == "-") {
    bnmc::write_records(std::cout, report);
  } else {
    std::ofstream out(a.report);
    if (!out) {
      throw bnmc::Error(bnmc::ErrorCode::invalid_argument, "cannot write report '" + a.report + "'");
    }
    bnmc::write_records(out, report);
  }
  bnmc::write_table(a.report.empty() || a.report == "-" ? std::cerr : std::cout, report);
  return 0;
}

struct GenerateArgs {
  bnmc::RandomNetworkConfig config;
  std::uint64_t seed = 0;
  std::string output;
};

int run_generate(const GenerateArgs& a) {
  bnmc::RandomStream rng(bnmc::derive_seed(a.seed, "network"));
  const auto description = bnmc::random_network(a.config, rng);
  (void)bnmc::BeliefNetwork::validate(description);
  if (a.output.empty() || a.output == "-") {
    std::cout << bnmc::format_network(description);
  } else {
    bnmc::write_network(a.output, description);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Belief-network inference with relative-error guarantees"};
  app.require_subcommand(1);

  Common common;
  const auto add_network = [&](CLI::App* sub) {
    sub->add_option("network", common.network, "network file (bnmc-1 JSON)")->required();
  };
  const auto add_assignments = [&](CLI::App* sub, bool query_required) {
    auto* q = sub->add_option("--query,-q", common.query, "hypotheses NODE=STATE[,NODE=STATE...]");
    if (query_required) {
      q->required();
    }
    sub->add_option("--evidence,-e", common.evidence, "evidence NODE=STATE[,NODE=STATE...]");
  };

  auto* validate = app.add_subcommand("validate", "check a network file");
  add_network(validate);

  auto* exact = app.add_subcommand("exact", "exact posterior by enumeration");
  add_network(exact);
  add_assignments(exact, true);

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "approximate posterior by sampling");
  add_network(infer);
  add_assignments(infer, true);
  infer->add_option("--algorithm,-a", infer_args.algorithm, "lw, bv or aa")->check(CLI::IsMember({"lw", "bv", "aa"}));
  infer->add_option("--epsilon", infer_args.epsilon, "relative error target");
  infer->add_option("--delta", infer_args.delta, "failure probability");
  infer->add_option("--seed", infer_args.seed, "master seed");
  infer->add_option("--max-iterations", infer_args.max_iterations, "iteration cap")->check(CLI::PositiveNumber);
  infer->add_option("--stratify", infer_args.stratify, "off, uniform or proportional")
      ->check(CLI::IsMember({"off", "uniform", "proportional"}));
  infer->add_option("--refresh-interval", infer_args.refresh_interval, "iterations between proportional refreshes");
  infer->add_option("--rank-stop", infer_args.rank_stop, "stop once the top hypotheses are ordered at this failure level");
  infer->add_option("--top-m", infer_args.top_m, "rank the m most probable hypotheses")->check(CLI::PositiveNumber);
  infer->add_flag("--rescore", infer_args.rescore, "reuse evidence instances for query streams");
  infer->add_flag("--skip-step3", infer_args.skip_step3, "count AA step 1-2 samples toward the final run");

  double bounds_epsilon = 0.05, bounds_delta = 0.05;
  auto* bounds = app.add_subcommand("bounds", "stopping threshold and a priori sample sizes");
  add_network(bounds);
  add_assignments(bounds, false);
  bounds->add_option("--epsilon", bounds_epsilon, "relative error target");
  bounds->add_option("--delta", bounds_delta, "failure probability");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "compare algorithms on sampled cases");
  add_network(bench);
  bench->add_option("--cases", bench_args.cases, "number of cases");
  bench->add_option("--seed", bench_args.seed, "master seed");
  bench->add_option("--report", bench_args.report, "machine-readable report path ('-' for stdout)");
  bench->add_option("--epsilon", bench_args.epsilon, "relative error target");
  bench->add_option("--delta", bench_args.delta, "failure probability");
  bench->add_option("--budget", bench_args.budget, "iteration cap for BV and AA")->check(CLI::PositiveNumber);
  bench->add_option("--algorithms", bench_args.algorithms, "subset of lw bv aa")
      ->delimiter(',')
      ->check(CLI::IsMember({"lw", "bv", "aa"}));
  bench->add_option("--evidence-range", bench_args.evidence_range, "evidence fraction lo,hi")->delimiter(',');
  bench->add_option("--threads", bench_args.threads, "worker threads");
  bench->add_flag("--rescore", bench_args.rescore, "reuse evidence instances for query streams");
  bench->add_flag("--skip-step3", bench_args.skip_step3, "count AA step 1-2 samples toward the final run");

  GenerateArgs generate_args;
  auto* generate = app.add_subcommand("generate", "write a random network");
  generate->add_option("--nodes", generate_args.config.nodes, "node count");
  generate->add_option("--max-parents", generate_args.config.max_parents, "parents per node");
  generate->add_option("--min-states", generate_args.config.min_states, "smallest state count");
  generate->add_option("--max-states", generate_args.config.max_states, "largest state count");
  generate->add_option("--concentration", generate_args.config.concentration, "CPT skew (1 is flat)");
  generate->add_option("--floor", generate_args.config.floor, "smallest CPT entry");
  generate->add_option("--seed", generate_args.seed, "seed");
  generate->add_option("--output,-o", generate_args.output, "output path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::cout << std::setprecision(6);
  try {
    if (*validate) return run_validate(common);
    if (*exact) return run_exact(common);
    if (*infer) return run_infer(common, infer_args);
    if (*bounds) return run_bounds(common, bounds_epsilon, bounds_delta);
    if (*bench) return run_bench(common, bench_args);
    if (*generate) return run_generate(generate_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const bnmc::Error& e) {
    std::cout << "error code=" << bnmc::to_string(e.code()) << " message=" << quoted(e.what()) << "\n";
    return 1;
  }
  return 2;
}
