#ifndef SESSC_RUNTIME_HPP
#define SESSC_RUNTIME_HPP

// Pool execution: a thread table reduced by local steps, spawn rules, the
// rendezvous rules on dual endpoints and the mediated forms over a cut
// thread. The engine owns all state; schedulers only pick among the steps it
// enumerates. Materialized pools keep every proof step and a session-type
// view per endpoint so each intermediate pool re-typechecks; erased pools
// run the proof-free program and keep only endpoint identities.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sessc/parser.hpp"
#include "sessc/terms.hpp"
#include "sessc/typecheck.hpp"

namespace sessc {

// ---------------------------------------------------------------- pool state

struct ChannelInfo {
  // Session-type view per role. Proof steps advance only the acting side, so
  // the two views differ transiently by head processing; communication
  // re-synchronizes them. Null in erased pools. A mediator's slots freeze at
  // cut time.
  SPtr view[2];
  // Thread currently holding each endpoint; -1 while the endpoint rides
  // inside a queued value.
  int holder[2] = {-1, -1};
  // Buffered mode only: queue[r] holds values sent by role r, in order.
  std::deque<DPtr> queue[2];
};

struct Pool {
  std::map<int, DPtr> threads;  // thread 0 is main and is never removed
  int nextThread = 1;
  int nextChannel = 0;
  std::map<int, ChannelInfo> channels;  // live channels only
  bool materialized = true;             // proofs present, views maintained
  bool buffered = false;                // sends complete into queues
  std::map<std::string, Sort> metaSorts;  // runtime witnesses, "?e<k>"
  int nextMeta = 0;
};

// Thread 0 runs the program's main term; definitions resolve through the
// program. Erased pools run erase_proofs over every term.
Pool make_pool(const Program& prog, bool materialized, bool buffered = false);

// The function resolver the pool steps with (bodies erased iff the pool is).
FunResolver pool_funs(const Program& prog, bool materialized);

// ---------------------------------------------------------------- steps

// pr0 groups every single-thread reduction: beta and delta steps, marker
// elimination, and (materialized) the proof operations on an endpoint, which
// advance that endpoint's view. detail names the redex class.
struct Step {
  std::string rule;  // pr0 pr1 pr2 pr-create pr-end pr-msg pr-branch
                     // pr-cut-end pr-cut-msg pr-cut-branch pr-cut-cut;
                     // buffered pools add send choose recv offer forward
  std::string detail;
  std::vector<int> threads;  // acting thread first; cut rules list t1, t, t2
  std::optional<int> channel;
  std::optional<int> channel2;  // mediated rules: the passive-side channel
};

std::vector<Step> enabled_steps(const Pool& p, const FunResolver& funs);

struct TraceEntry {
  long long step = 0;
  std::string rule;
  std::string detail;
  std::vector<int> threads;
  std::optional<int> channel;
  std::optional<int> channel2;
  std::optional<int> dir;   // sending role on channel
  std::optional<int> dir2;  // forwarding role on channel2
  std::string payload;      // value summary for msg/branch transfers
};

// Rewrites exactly the participating threads. output collects print lines;
// te, when given, is filled with the transfer facts (directions, payload).
// Throws IllegalStep when the step is not enabled and StuckTerm when a redex
// is malformed (a soundness bug, never reachable from checked programs).
void apply_step(Pool& p, const Step& s, const FunResolver& funs,
                std::vector<std::string>* output, TraceEntry* te = nullptr);

// ---------------------------------------------------------------- running

std::string trace_json_line(const TraceEntry& e);

// One value transfer as observed on a channel; dir is the sending role.
struct CommEvent {
  int channel;
  int dir;
  std::string value;
};
std::vector<CommEvent> comm_events(const std::vector<TraceEntry>& trace);

struct BlockedShape {
  int thread;
  std::string op;        // what the thread is stuck on
  int channel = -1;
  int role = -1;
  std::string awaiting;  // the dual action that would release it
};

struct Outcome {
  enum class Kind { Terminated, Deadlock, DepthExceeded, Stuck };
  Kind kind = Kind::Terminated;
  DPtr value;                         // Terminated: main's value
  std::vector<BlockedShape> blocked;  // Deadlock
  std::string message;                // Stuck / DepthExceeded context
};

struct Scheduler {
  enum class Kind { Seeded, RoundRobin };
  Kind kind = Kind::Seeded;
  std::uint64_t seed = 0;
};

struct RunOpts {
  long long maxSteps = 100000;
  bool auditEachStep = false;      // audit_resources after every step
  bool typecheckEachStep = false;  // re-typecheck the pool after every step
  const Program* prog = nullptr;   // required by typecheckEachStep
  bool collectTrace = true;
};

struct RunResult {
  Outcome outcome;
  std::vector<TraceEntry> trace;
  std::vector<std::string> output;
  long long steps = 0;
  long long checkedSteps = 0;  // steps after which the pool re-typechecked
};

RunResult run_pool(Pool p, const FunResolver& funs, const Scheduler& sched,
                   const RunOpts& opts);

// ---------------------------------------------------------------- explorer

struct ExploreResult {
  enum class Verdict { AllPathsProgress, DeadlockFound, DepthExceeded };
  Verdict verdict = Verdict::AllPathsProgress;
  long long statesVisited = 0;
  std::vector<TraceEntry> witness;  // a path to the offending state
  std::string message;
};

// Exhaustive search over interleavings with states deduplicated up to
// renaming of thread ids, channel ids and runtime witnesses. Single-thread
// deterministic steps commute with every other step, so each state expands
// either its first such step or all rendezvous steps.
ExploreResult explore(const Pool& start, const FunResolver& funs, long long maxStates = 10000);

// ---------------------------------------------------------------- audits

struct AuditResult {
  bool ok = true;
  std::string violation;
};

// Every live endpoint occurs exactly once pool-wide (threads and queues),
// both roles of every live channel are present, no retired channel appears,
// and recorded holders match the scan.
AuditResult audit_resources(const Pool& p);

// Re-derive well-typedness of a running pool: each thread's term types
// against the current views (workers and mediators at unit), every live
// endpoint is consumed by exactly one thread, and no two threads share one.
struct PoolTypeReport {
  bool ok = true;
  std::string error;
};
PoolTypeReport typecheck_pool(const Pool& p, const Program& prog);

}  // namespace sessc

#endif
