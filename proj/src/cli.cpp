#include "jhsvd/cli.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jhsvd/distsim.hpp"
#include "jhsvd/error.hpp"
#include "jhsvd/matrix_io.hpp"
#include "jhsvd/rotation.hpp"
#include "jhsvd/strategy.hpp"
#include "jhsvd/testgen.hpp"

namespace jhsvd {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

const std::vector<std::string> strategy_names = {"row", "col", "rrow", "rcol", "bl", "mm"};

struct SolverOptions {
  std::string variant = "fb";
  std::string strategy = "rrow";
  std::string inner_strategy;  // empty: same as strategy
  int width = 16;
  int max_sweeps = 30;
  bool accumulate_v = false;
  bool solve_v = false;
  std::string shortening = "cholesky";
  std::string input;
  std::optional<long> n_plus;
  std::string lambda;
  std::string out;
  std::string v_out;
};

void add_solver_options(CLI::App* app, SolverOptions& o) {
  app->add_option("--input", o.input, "factor G (binary or .csv)")->required();
  app->add_option("--nplus", o.n_plus, "number of positive signs in J (default: from file, else n)");
  app->add_option("--variant", o.variant, "fb (full block) or bo (block oriented)")
      ->check(CLI::IsMember({"fb", "bo"}))
      ->capture_default_str();
  app->add_option("--strategy", o.strategy, "outer strategy kind")
      ->check(CLI::IsMember(strategy_names))
      ->envname("JHSVD_STRATEGY")
      ->capture_default_str();
  app->add_option("--inner-strategy", o.inner_strategy, "inner strategy kind (default: --strategy)")
      ->check(CLI::IsMember(strategy_names));
  app->add_option("--width", o.width, "block width w")
      ->check(CLI::PositiveNumber)
      ->envname("JHSVD_WIDTH")
      ->capture_default_str();
  app->add_option("--max-sweeps", o.max_sweeps, "block sweep limit")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_flag("--accumulate-v", o.accumulate_v, "accumulate the right factor V");
  app->add_flag("--solve-v", o.solve_v, "recover V by a triangular solve");
  app->add_option("--shortening", o.shortening, "cholesky or qr")
      ->check(CLI::IsMember({"cholesky", "qr"}))
      ->capture_default_str();
  app->add_option("--lambda", o.lambda, "expected eigenvalues (CSV) for the error report");
  app->add_option("--out", o.out, "JSON report (default: stdout)");
  app->add_option("--v-out", o.v_out, "write V here");
}

SolverConfig to_config(const SolverOptions& o) {
  SolverConfig c;
  c.block_width = o.width;
  c.variant = o.variant == "bo" ? Variant::block_oriented : Variant::full_block;
  c.max_block_sweeps = o.max_sweeps;
  c.outer_strategy = parse_strategy_kind(o.strategy);
  c.inner_strategy = parse_strategy_kind(o.inner_strategy.empty() ? o.strategy : o.inner_strategy);
  c.accumulate_v = o.accumulate_v || !o.v_out.empty();
  c.solve_for_v = o.solve_v;
  c.shortening = o.shortening == "qr" ? Shortening::qr : Shortening::cholesky;
  return c;
}

std::string checksum(const Eigen::VectorXd& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over little-endian bytes
  for (Index i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json config_json(const SolverOptions& o, const SolverConfig& c, const MatrixFile& f, Index n_plus) {
  Json j;
  j["input"] = o.input;
  j["rows"] = f.G.rows();
  j["cols"] = f.G.cols();
  j["n_plus"] = n_plus;
  j["variant"] = o.variant;
  j["strategy"] = std::string(to_string(c.outer_strategy));
  j["inner_strategy"] = std::string(to_string(c.inner_strategy));
  j["width"] = c.block_width;
  j["max_sweeps"] = c.max_block_sweeps;
  j["accumulate_v"] = c.accumulate_v;
  j["solve_v"] = c.solve_for_v;
  j["shortening"] = o.shortening;
  return j;
}

void result_json(Json& j, const HsvdResult& r, const SolverOptions& o) {
  j["converged"] = r.converged;
  j["block_sweeps"] = r.block_sweeps;
  Json stats = Json::array();
  std::int64_t total = 0;
  for (std::size_t s = 0; s < r.stats.size(); ++s) {
    stats.push_back({{"sweep", s + 1}, {"rotations", r.stats[s].rotations},
                     {"proper_rotations", r.stats[s].proper_rotations}});
    total += r.stats[s].rotations;
  }
  j["stats"] = stats;
  j["total_rotations"] = total;
  j["sigma"] = std::vector<double>(r.sigma.begin(), r.sigma.end());
  j["sigma_digest"] = {{"min", r.sigma.minCoeff()}, {"max", r.sigma.maxCoeff()}, {"checksum", checksum(r.sigma)}};
  if (!o.lambda.empty()) j["relative_error"] = relative_error(r.sigma, r.J, read_vector_csv(o.lambda));
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Signature signature_for(const SolverOptions& o, const MatrixFile& f) {
  const Index n = f.G.cols();
  const Index k = o.n_plus ? static_cast<Index>(*o.n_plus) : f.n_plus.value_or(n);
  if (k < 0 || k > n) throw InvalidArgument("--nplus must lie in [0, n]");
  return {k};
}

int svd_run(const SolverOptions& o, int threads, std::ostream& out) {
  const MatrixFile f = read_matrix(o.input);
  SolverConfig c = to_config(o);
  c.workers = threads;
  const Signature J = signature_for(o, f);
  const auto t0 = Clock::now();
  const HsvdResult r = block_jacobi(f.G, J, c);
  const double wall = seconds_since(t0);
  Json j;
  j["command"] = "svd run";
  j["config"] = config_json(o, c, f, J.n_plus);
  result_json(j, r, o);
  j["wall_seconds"] = wall;
  if (!o.v_out.empty() && r.V) write_matrix(o.v_out, *r.V);
  emit(o.out, j.dump(2) + "\n", out);
  return 0;
}

int svd_dist(const SolverOptions& o, int g, bool hybrid, const std::string& trace, std::ostream& out) {
  const MatrixFile f = read_matrix(o.input);
  DistConfig c;
  c.solver = to_config(o);
  c.g = g;
  c.hybrid_early_stop = hybrid;
  const Signature J = signature_for(o, f);
  const auto t0 = Clock::now();
  const DistResult d = run_distributed(f.G, J, c);
  const double wall = seconds_since(t0);
  Json j;
  j["command"] = "svd dist";
  j["config"] = config_json(o, c.solver, f, J.n_plus);
  j["config"]["workers"] = g;
  j["config"]["hybrid_early_stop"] = hybrid;
  result_json(j, d.result, o);
  std::int64_t fast = 0;
  for (const auto& e : d.trace) fast += e.link == LinkClass::fast;
  j["exchanges"] = {{"fast_exchanges_per_sweep", d.mapping.fast_exchanges},
                    {"fast_transfers_per_sweep", d.mapping.fast_transfers},
                    {"transfers", d.trace.size()},
                    {"fast_transfers", fast}};
  j["wall_seconds"] = wall;
  if (!trace.empty()) {
    std::string csv = "sweep,step,worker,column,dest,link\n";
    for (const auto& e : d.trace)
      csv += std::to_string(e.sweep) + ',' + std::to_string(e.step) + ',' + std::to_string(e.worker) + ',' +
             std::to_string(e.column) + ',' + std::to_string(e.dest) + ',' + std::string(to_string(e.link)) + '\n';
    emit(trace, csv, out);
  }
  if (!o.v_out.empty() && d.result.V) write_matrix(o.v_out, *d.result.V);
  emit(o.out, j.dump(2) + "\n", out);
  return 0;
}

PStrategy generate_strategy(const std::string& kind_name, int n, int expand) {
  const StrategyKind kind = parse_strategy_kind(kind_name);
  if (expand == 0) return make_pstrategy(kind, n);
  if (kind == StrategyKind::brent_luk || kind == StrategyKind::modified_modulus)
    throw InvalidArgument("--expand applies to the closest strategies only");
  const bool row = kind == StrategyKind::row_closest || kind == StrategyKind::reversed_row;
  const Reference ref = row ? Reference::row : Reference::col;
  PStrategy s = closest_pstrategy(ref, n);
  for (int k = 0; k < expand; ++k) s = expand_pstrategy(s, ref);
  if (kind == StrategyKind::reversed_row || kind == StrategyKind::reversed_col) s = reverse_pstrategy(s);
  return s;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::numeric: return 3;
    case ErrorKind::io: return 4;
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blocked one-sided Jacobi SVD and hyperbolic SVD"};
  app.name("jhsvd");
  app.require_subcommand(1);
  std::function<int()> action;

  // strategy gen / check
  auto* strategy = app.add_subcommand("strategy", "generate or check pivot strategies");
  strategy->require_subcommand(1);
  std::string kind = "rrow", strat_out, strat_file;
  int strat_n = 0, expand = 0;
  auto* gen = strategy->add_subcommand("gen", "print a p-strategy table");
  gen->add_option("--kind", kind, "row, col, rrow, rcol, bl or mm")
      ->check(CLI::IsMember(strategy_names))
      ->envname("JHSVD_STRATEGY")
      ->capture_default_str();
  gen->add_option("--n", strat_n, "even order")->required()->check(CLI::PositiveNumber);
  gen->add_option("--expand", expand, "double the order this many times")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", strat_out, "output file (default: stdout)");
  gen->callback([&] {
    action = [&] {
      emit(strat_out, format_pstrategy(generate_strategy(kind, strat_n, expand)), out);
      return 0;
    };
  });
  auto* check = strategy->add_subcommand("check", "validate a strategy table");
  check->add_option("--input", strat_file, "strategy table")->required();
  check->callback([&] {
    action = [&] {
      const std::string text = read_text(strat_file);
      const PStrategy s = parse_pstrategy(text);  // throws on any violation
      out << "valid p-strategy: n=" << s.n << " steps=" << s.steps.size() << "\n";
      return 0;
    };
  });

  // svd run / dist
  auto* svd = app.add_subcommand("svd", "compute the (hyperbolic) SVD of a factor");
  svd->require_subcommand(1);
  SolverOptions run_opts, dist_opts;
  int threads = 1, g = 4;
  bool hybrid = false;
  std::string trace;
  auto* run = svd->add_subcommand("run", "single-node blocked Jacobi");
  add_solver_options(run, run_opts);
  run->add_option("--threads", threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->callback([&] { action = [&] { return svd_run(run_opts, threads, out); }; });
  auto* dist = svd->add_subcommand("dist", "simulated multi-worker outer level");
  add_solver_options(dist, dist_opts);
  dist->add_option("--workers", g, "simulated workers g")->check(CLI::PositiveNumber)->capture_default_str();
  dist->add_flag("--hybrid-early-stop", hybrid, "first finished worker ends the others' inner loops");
  dist->add_option("--trace", trace, "exchange trace CSV");
  dist->callback([&] { action = [&] { return svd_dist(dist_opts, g, hybrid, trace, out); }; });

  // testgen
  auto* tg = app.add_subcommand("testgen", "generate a test factor with a known spectrum");
  int type = 2;
  long tg_n = 0;
  std::uint64_t seed = 0;
  std::string tg_out, tg_lambda;
  tg->add_option("--type", type, "spectrum type 1..4")->check(CLI::Range(1, 4))->capture_default_str();
  tg->add_option("--n", tg_n, "order")->required()->check(CLI::PositiveNumber);
  tg->add_option("--seed", seed, "seed")->capture_default_str();
  tg->add_option("--out", tg_out, "factor G")->required();
  tg->add_option("--lambda", tg_lambda, "eigenvalues (CSV)");
  tg->callback([&] {
    action = [&] {
      const TestFactor f = gen_factor(gen_spectrum({type, static_cast<Index>(tg_n), seed}), seed);
      write_matrix(tg_out, f.G, f.J.n_plus);
      if (!tg_lambda.empty()) write_vector_csv(tg_lambda, f.lambda);
      return 0;
    };
  });

  // rotation survey
  auto* rot = app.add_subcommand("rotation", "rotation formula studies");
  rot->require_subcommand(1);
  auto* survey = rot->add_subcommand("survey", "mean departure from the rotation identity per exponent");
  std::string rot_kind = "trig", rot_out;
  std::uint64_t samples = 1024, rot_seed = 0;
  std::optional<int> emin;
  int emax = 53;
  survey->add_option("--kind", rot_kind, "trig or hyp")->check(CLI::IsMember({"trig", "hyp"}))->capture_default_str();
  survey->add_option("--samples", samples, "samples per exponent")->check(CLI::PositiveNumber)->capture_default_str();
  survey->add_option("--seed", rot_seed, "seed")->capture_default_str();
  survey->add_option("--emin", emin, "smallest exponent (default: -53 trig, 0 hyp)");
  survey->add_option("--emax", emax, "largest exponent")->capture_default_str();
  survey->add_option("--out", rot_out, "CSV output (default: stdout)");
  survey->callback([&] {
    action = [&] {
      const auto k = rot_kind == "hyp" ? RotationKind::hyperbolic : RotationKind::trig;
      const SurveyResult r = departure_survey(k, emin.value_or(k == RotationKind::trig ? -53 : 0), emax, samples, rot_seed);
      std::string csv = "exponent,mean_d_cs1,mean_d_cs2\n";
      for (const SurveyRow& row : r.rows)
        csv += std::to_string(row.exponent) + ',' + format_double(row.mean_cs1) + ',' + format_double(row.mean_cs2) + '\n';
      csv += "all," + format_double(r.mean_cs1) + ',' + format_double(r.mean_cs2) + '\n';
      emit(rot_out, csv, out);
      return 0;
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "sweep orders, spectra and variants");
  std::vector<int> sizes{128, 256}, types{1, 2, 3, 4};
  std::vector<std::string> variants{"fb", "bo"};
  std::string bench_out, bench_strategy = "rrow";
  std::uint64_t bench_seed = 0;
  int bench_width = 16, bench_threads = 1;
  bench->add_option("--sizes", sizes, "orders")->delimiter(',')->capture_default_str();
  bench->add_option("--types", types, "spectrum types")->delimiter(',')->check(CLI::Range(1, 4))->capture_default_str();
  bench->add_option("--variants", variants, "fb, bo")->delimiter(',')->check(CLI::IsMember({"fb", "bo"}))->capture_default_str();
  bench->add_option("--strategy", bench_strategy, "strategy kind")
      ->check(CLI::IsMember(strategy_names))
      ->envname("JHSVD_STRATEGY")
      ->capture_default_str();
  bench->add_option("--width", bench_width, "block width")->check(CLI::PositiveNumber)->envname("JHSVD_WIDTH")->capture_default_str();
  bench->add_option("--threads", bench_threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--seed", bench_seed, "base seed")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV output (default: stdout)");
  bench->callback([&] {
    action = [&] {
      std::string csv = "n,type,variant,block_sweeps,rotations,proper_rotations,converged,max_rel_error,seconds\n";
      for (int n : sizes)
        for (int t : types) {
          const TestFactor f = make_fixture(t, n, bench_seed);
          for (const std::string& v : variants) {
            SolverConfig c;
            c.block_width = bench_width;
            c.variant = v == "bo" ? Variant::block_oriented : Variant::full_block;
            c.outer_strategy = c.inner_strategy = parse_strategy_kind(bench_strategy);
            c.accumulate_v = false;
            c.workers = bench_threads;
            const auto t0 = Clock::now();
            const HsvdResult r = block_jacobi(f.G, f.J, c);
            const double wall = seconds_since(t0);
            std::int64_t rot = 0, prop = 0;
            for (const auto& s : r.stats) {
              rot += s.rotations;
              prop += s.proper_rotations;
            }
            char secs[32];
            std::snprintf(secs, sizeof secs, "%.6f", wall);
            csv += std::to_string(n) + ',' + std::to_string(t) + ',' + v + ',' + std::to_string(r.block_sweeps) + ',' +
                   std::to_string(rot) + ',' + std::to_string(prop) + ',' + (r.converged ? "1" : "0") + ',' +
                   format_double(relative_error(r.sigma, r.J, f.lambda)) + ',' + secs + '\n';
          }
        }
      emit(bench_out, csv, out);
      return 0;
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }
  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    err << "jhsvd: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "jhsvd: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace jhsvd
