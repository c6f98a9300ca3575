// sessc: check, run, explore and trace session-typed programs.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sessc/diag.hpp"
#include "sessc/parser.hpp"
#include "sessc/runtime.hpp"
#include "sessc/terms.hpp"
#include "sessc/typecheck.hpp"

namespace {

// exit codes: 0 ok, 1 rejected program, 2 runtime anomaly, 3 inconclusive
constexpr int kOk = 0;
constexpr int kRejected = 1;
constexpr int kAnomaly = 2;
constexpr int kInconclusive = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// parse + typecheck; diagnostics go to stderr
bool load(const std::string& path, sessc::Program& out) {
  try {
    out = sessc::parse_program(slurp(path));
    sessc::check_program(out);
    return true;
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return false;
  }
}

struct RunFlags {
  std::uint64_t seed = 0;
  bool roundRobin = false;
  bool buffered = false;
  bool materialized = false;
  bool verify = false;
  long long maxSteps = 100000;
  std::string tracePath;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--seed", f.seed, "random-scheduler seed (default 0)");
  cmd->add_flag("--round-robin", f.roundRobin, "rotate threads instead of sampling");
  cmd->add_flag("--buffered", f.buffered, "asynchronous sends through per-direction queues");
  cmd->add_flag("--materialized", f.materialized, "keep proof steps at runtime");
  cmd->add_flag("--verify", f.verify,
                "audit resources and re-typecheck the pool after every step "
                "(implies --materialized)");
  cmd->add_option("--max-steps", f.maxSteps, "step budget before giving up");
}

int report(const sessc::RunResult& res, std::ostream& out) {
  for (const auto& line : res.output) out << line << "\n";
  switch (res.outcome.kind) {
    case sessc::Outcome::Kind::Terminated:
      out << "main: " << sessc::show_dyn(res.outcome.value) << "\n";
      return kOk;
    case sessc::Outcome::Kind::Deadlock:
      std::cerr << "deadlock after " << res.steps << " steps\n";
      for (const auto& b : res.outcome.blocked) {
        std::cerr << "  thread " << b.thread << ": " << b.op;
        if (b.channel >= 0) std::cerr << " on channel " << b.channel << " role " << b.role;
        if (!b.awaiting.empty()) std::cerr << ", awaiting " << b.awaiting;
        std::cerr << "\n";
      }
      return kAnomaly;
    case sessc::Outcome::Kind::Stuck:
      std::cerr << "stuck: " << res.outcome.message << "\n";
      return kAnomaly;
    case sessc::Outcome::Kind::DepthExceeded:
      std::cerr << "no verdict: " << res.outcome.message << "\n";
      return kInconclusive;
  }
  return kAnomaly;
}

int do_run(const sessc::Program& prog, const RunFlags& f, std::ostream* traceTo,
           std::ostream& out) {
  bool mat = f.materialized || f.verify;  // re-typechecking needs the proof steps
  sessc::Pool pool = sessc::make_pool(prog, mat, f.buffered);
  sessc::FunResolver funs = sessc::pool_funs(prog, mat);
  sessc::Scheduler sched;
  sched.kind = f.roundRobin ? sessc::Scheduler::Kind::RoundRobin
                            : sessc::Scheduler::Kind::Seeded;
  sched.seed = f.seed;
  sessc::RunOpts opts;
  opts.maxSteps = f.maxSteps;
  opts.auditEachStep = f.verify;
  opts.typecheckEachStep = f.verify && mat;
  opts.prog = &prog;
  opts.collectTrace = traceTo != nullptr;
  sessc::RunResult res = sessc::run_pool(std::move(pool), funs, sched, opts);
  if (traceTo)
    for (const auto& e : res.trace) *traceTo << sessc::trace_json_line(e) << "\n";
  return report(res, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"session-typed concurrency: dependent protocols, linear endpoints"};
  app.require_subcommand(1);

  std::string file;
  RunFlags flags;
  long long depth = 10000;

  CLI::App* check = app.add_subcommand("check", "parse and typecheck a program");
  check->add_option("file", file, "program file")->required();

  CLI::App* run = app.add_subcommand("run", "typecheck and execute a program");
  run->add_option("file", file, "program file")->required();
  add_run_flags(run, flags);
  run->add_option("--trace", flags.tracePath, "write a line-delimited JSON trace here");

  CLI::App* explore = app.add_subcommand(
      "explore", "search all interleavings for progress violations");
  explore->add_option("file", file, "program file")->required();
  explore->add_option("--depth", depth, "maximum distinct states (default 10000)");
  explore->add_flag("--buffered", flags.buffered,
                    "asynchronous sends through per-direction queues");
  explore->add_flag("--materialized", flags.materialized, "keep proof steps at runtime");

  CLI::App* trace = app.add_subcommand(
      "trace", "execute and stream the JSON trace to standard output");
  trace->add_option("file", file, "program file")->required();
  add_run_flags(trace, flags);

  CLI11_PARSE(app, argc, argv);

  sessc::Program prog;
  if (!load(file, prog)) return kRejected;

  try {
    if (check->parsed()) {
      std::cout << "ok\n";
      return kOk;
    }
    if (run->parsed()) {
      if (flags.tracePath.empty()) return do_run(prog, flags, nullptr, std::cout);
      std::ofstream tf(flags.tracePath, std::ios::binary);
      if (!tf) {
        std::cerr << "cannot write " << flags.tracePath << "\n";
        return kAnomaly;
      }
      return do_run(prog, flags, &tf, std::cout);
    }
    if (trace->parsed()) {
      // trace lines own stdout; the program's own output goes to stderr
      return do_run(prog, flags, &std::cout, std::cerr);
    }
    if (explore->parsed()) {
      bool mat = flags.materialized;
      sessc::Pool pool = sessc::make_pool(prog, mat, flags.buffered);
      sessc::FunResolver funs = sessc::pool_funs(prog, mat);
      sessc::ExploreResult res = sessc::explore(pool, funs, depth);
      std::cout << "states: " << res.statesVisited << "\n";
      switch (res.verdict) {
        case sessc::ExploreResult::Verdict::AllPathsProgress:
          std::cout << "all paths progress\n";
          return kOk;
        case sessc::ExploreResult::Verdict::DeadlockFound:
          std::cout << "progress violation: " << res.message << "\n";
          for (const auto& e : res.witness)
            std::cout << "  " << sessc::trace_json_line(e) << "\n";
          return kAnomaly;
        case sessc::ExploreResult::Verdict::DepthExceeded:
          std::cout << "no verdict: " << res.message << "\n";
          return kInconclusive;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kAnomaly;
  }
  return kOk;
}
