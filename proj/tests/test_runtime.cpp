#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sessc/runtime.hpp"
#include "sessc/typecheck.hpp"

using namespace sessc;

namespace {

RunResult go(const char* src, bool materialized = true, bool buffered = false,
             std::uint64_t seed = 1, bool verify = false) {
  Program prog = parse_program(src);
  check_program(prog);
  Pool p = make_pool(prog, materialized, buffered);
  RunOpts o;
  o.auditEachStep = true;
  if (verify && materialized) {
    o.typecheckEachStep = true;
    o.prog = &prog;
  }
  RunResult r = run_pool(std::move(p), pool_funs(prog, materialized),
                         {Scheduler::Kind::Seeded, seed}, o);
  if (r.outcome.kind != Outcome::Kind::Terminated && getenv("SHOW_RUNS")) {
    MESSAGE("outcome ", (int)r.outcome.kind, ": ", r.outcome.message);
    for (const auto& b : r.outcome.blocked)
      MESSAGE("  thread ", b.thread, " on ", b.op, " ch ", b.channel, " awaiting ", b.awaiting);
    for (const auto& e : r.trace) MESSAGE("  ", trace_json_line(e));
  }
  return r;
}

bool has_rule(const RunResult& r, const std::string& rule, const std::string& detail = "") {
  for (const auto& e : r.trace)
    if (e.rule == rule && (detail.empty() || e.detail == detail)) return true;
  return false;
}

// per-channel, per-direction payload sequences; the scheduler-independent part
std::map<std::pair<int, int>, std::vector<std::string>> wire(const RunResult& r) {
  std::map<std::pair<int, int>, std::vector<std::string>> m;
  for (const auto& ev : comm_events(r.trace)) m[{ev.channel, ev.dir}].push_back(ev.value);
  return m;
}

ExploreResult explore_src(const char* src, bool materialized = true, bool buffered = false) {
  Program prog = parse_program(src);
  check_program(prog);
  return explore(make_pool(prog, materialized, buffered), pool_funs(prog, materialized));
}

const char* kPing = R"(
  (stype ping () (msg C int (msg S int (end S))))
  (defun serve ((ch (chan S ping))) ()
    (let-pair (x ch1) (recv ch) (close (send ch1 (* x 2)))))
  (main (let c (create {ping} (llam (s) (serve s)))
    (let-pair (r c1) (recv (send c 21))
      (seq (print-int r) (wait c1)))))
)";

const char* kRelay = R"(
  (stype ping () (msg C int (msg S int (end S))))
  (defun serve ((ch (chan S ping))) ()
    (let-pair (x ch1) (recv ch) (close (send ch1 (* x 2)))))
  (defun relay ((outer (chan S ping))) ()
    (let inner (create {ping} (llam (s) (serve s)))
      (cut outer inner)))
  (main (let c (create {ping} (llam (s) (relay s)))
    (let-pair (r c1) (recv (send c 21))
      (seq (print-int r) (wait c1)))))
)";

const char* kRelayTwice = R"(
  (stype ping () (msg C int (msg S int (end S))))
  (defun serve ((ch (chan S ping))) ()
    (let-pair (x ch1) (recv ch) (close (send ch1 (* x 2)))))
  (defun hop ((outer (chan S ping))) ()
    (let inner (create {ping} (llam (s) (serve s)))
      (cut outer inner)))
  (defun relay ((outer (chan S ping))) ()
    (let inner (create {ping} (llam (s) (hop s)))
      (cut outer inner)))
  (main (let c (create {ping} (llam (s) (relay s)))
    (let-pair (r c1) (recv (send c 21))
      (seq (print-int r) (wait c1)))))
)";

const char* kCounter = R"(
  (stype counter ((n int))
    (branch C
      (quan C (m int) (msg C (int m) (msg S (int (+ n m)) (counter (+ n m)))))
      (msg S (int n) (end S))))
  (defun serve {n int} ((acc (int n)) (ch (chan S (counter n)))) ()
    (offer (recurse ch)
      (llam (ch1) (let-exists (m ch2) (exify ch1)
        (let-pair (x ch3) (recv ch2)
          (serve {(+ n m)} (+ acc x) (send ch3 (+ acc x))))))
      (llam (ch1) (close (send ch1 acc)))))
  (defun put {n int} {m int} ((v (int m)) (ch (chan C (counter n))))
      (chan C (msg S (int (+ n m)) (counter (+ n m))))
    (send (unify (choose-left (recurse ch)) {m}) v))
  (main (let c (create {(counter 0)} (llam (s) (serve {0} 0 s)))
    (let-pair (x c1) (recv (put {0} {5} 5 c))
      (let-pair (y c2) (recv (put {5} {37} 37 c1))
        (let-pair (t c3) (recv (choose-right (recurse c2)))
          (seq (print-int x) (print-int y) (print-int t) (wait c3)))))))
)";

const char* kPushTwo = R"(
  (stype feed () (msg C int (msg C int (end C))))
  (defun sink ((ch (chan S feed))) ()
    (let-pair (x ch1) (recv ch)
      (let-pair (y ch2) (recv ch1)
        (seq (print-int (+ x y)) (wait ch2)))))
  (main (close (send (send (create {feed} (llam (s) (sink s))) 3) 4)))
)";

const char* kPickLeft = R"(
  (stype pick () (branch C (msg C int (end C)) (msg S bool (end S))))
  (defun duty ((ch (chan S pick))) ()
    (offer ch
      (llam (c1) (let-pair (x c2) (recv c1) (seq (print-int x) (wait c2))))
      (llam (c1) (close (send c1 false)))))
  (main (let c (create {pick} (llam (s) (duty s)))
    (close (send (choose-left c) 11))))
)";

const char* kPickRight = R"(
  (stype pick () (branch C (msg C int (end C)) (msg S bool (end S))))
  (defun duty ((ch (chan S pick))) ()
    (offer ch
      (llam (c1) (let-pair (x c2) (recv c1) (seq (print-int x) (wait c2))))
      (llam (c1) (close (send c1 false)))))
  (main (let c (create {pick} (llam (s) (duty s)))
    (let-pair (b c1) (recv (choose-right c))
      (seq (print-bool b) (wait c1)))))
)";

const char* kTwoSessions = R"(
  (defun echo ((s (chan S (msg C int (end C))))) ()
    (let-pair (x s1) (recv s) (wait s1)))
  (main (let a (create {(msg C int (end C))} (llam (s) (echo s)))
    (let b (create {(msg C int (end C))} (llam (s) (echo s)))
      (seq (close (send a 1)) (close (send b 2))))))
)";

}  // namespace

TEST_CASE("one session runs to completion") {
  RunResult r = go(kPing, true, false, 1, true);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(std::get_if<DUnit>(&r.outcome.value->node));
  CHECK(r.output == std::vector<std::string>{"42"});
  CHECK(r.checkedSteps == r.steps);
  CHECK(has_rule(r, "pr-create"));
  CHECK(has_rule(r, "pr-msg"));
  CHECK(has_rule(r, "pr-end"));
  CHECK(has_rule(r, "pr2"));
  CHECK(has_rule(r, "pr0", "beta"));
}

TEST_CASE("worker spawning without a channel") {
  RunResult r = go(R"(
    (main (seq (thread-create (llam (u) (print-int 7))) (print-int 8)))
  )");
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(has_rule(r, "pr1"));
  std::multiset<std::string> lines(r.output.begin(), r.output.end());
  CHECK(lines == std::multiset<std::string>{"7", "8"});
}

TEST_CASE("erased and buffered runs agree on the wire") {
  RunResult mat = go(kPing, true, false, 3);
  RunResult era = go(kPing, false, false, 3);
  RunResult buf = go(kPing, true, true, 3);
  RunResult both = go(kPing, false, true, 3);
  for (const RunResult* r : {&mat, &era, &buf, &both}) {
    REQUIRE(r->outcome.kind == Outcome::Kind::Terminated);
    CHECK(r->output == std::vector<std::string>{"42"});
  }
  CHECK(wire(mat) == wire(era));
  CHECK(wire(mat) == wire(buf));
  CHECK(wire(mat) == wire(both));
  // proof steps exist only in the materialized pool
  CHECK(has_rule(mat, "pr-msg"));
  CHECK_FALSE(has_rule(era, "pr0", "unify"));
  CHECK(has_rule(buf, "send"));
  CHECK_FALSE(has_rule(buf, "pr-msg"));
}

TEST_CASE("dependent counter runs with witnesses resolved") {
  RunResult r = go(kCounter, true, false, 7, true);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(r.output == std::vector<std::string>{"5", "42", "42"});
  CHECK(r.checkedSteps == r.steps);
  // the server packs a fresh witness, the client picks the index
  CHECK(has_rule(r, "pr0", "exify"));
  CHECK(has_rule(r, "pr0", "unify"));
  CHECK(has_rule(r, "pr0", "recurse"));
  CHECK(has_rule(r, "pr-branch"));

  // same answers under the erased program
  RunResult e = go(kCounter, false, false, 7);
  REQUIRE(e.outcome.kind == Outcome::Kind::Terminated);
  CHECK(e.output == r.output);
  CHECK(wire(e) == wire(r));
}

TEST_CASE("a cut thread relays both directions") {
  RunResult r = go(kRelay, true, false, 1, true);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(r.output == std::vector<std::string>{"42"});
  CHECK(r.checkedSteps == r.steps);
  CHECK(has_rule(r, "pr-cut-msg"));
  CHECK(has_rule(r, "pr-cut-end"));
  // the forwarded transfer shows up on both channels
  bool both = false;
  for (const auto& e : r.trace)
    if (e.rule == "pr-cut-msg" && e.channel && e.channel2 && *e.channel != *e.channel2)
      both = true;
  CHECK(both);
}

TEST_CASE("two mediators on one channel compose") {
  RunResult r = go(kRelayTwice, true, false, 5, true);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(r.output == std::vector<std::string>{"42"});
  CHECK(r.checkedSteps == r.steps);
  CHECK(has_rule(r, "pr-cut-cut"));
  CHECK(has_rule(r, "pr-cut-msg"));
  CHECK(has_rule(r, "pr-cut-end"));
}

TEST_CASE("buffered sends complete before the receiver moves") {
  RunResult r = go(kPushTwo, true, true, 2, true);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(r.output == std::vector<std::string>{"7"});
  CHECK(has_rule(r, "send"));
  CHECK(has_rule(r, "recv"));
  CHECK(has_rule(r, "pr-end"));
  RunResult sync = go(kPushTwo, true, false, 2);
  CHECK(wire(r) == wire(sync));

  // a relayed session forwards queued values
  RunResult fwd = go(kRelay, true, true, 2, true);
  REQUIRE(fwd.outcome.kind == Outcome::Kind::Terminated);
  CHECK(fwd.output == std::vector<std::string>{"42"});
  CHECK(has_rule(fwd, "forward"));
  CHECK(wire(fwd) == wire(go(kRelay, true, false, 2)));
}

TEST_CASE("both arms of a choice run") {
  RunResult l = go(kPickLeft, true, false, 1, true);
  REQUIRE(l.outcome.kind == Outcome::Kind::Terminated);
  CHECK(l.output == std::vector<std::string>{"11"});
  CHECK(has_rule(l, "pr-branch"));
  CHECK(has_rule(l, "pr0", "itet"));

  RunResult rr = go(kPickRight, true, false, 1, true);
  REQUIRE(rr.outcome.kind == Outcome::Kind::Terminated);
  CHECK(rr.output == std::vector<std::string>{"false"});
  CHECK(has_rule(rr, "pr0", "itef"));

  // the tag is one queue message in buffered mode
  RunResult lb = go(kPickLeft, true, true, 1);
  REQUIRE(lb.outcome.kind == Outcome::Kind::Terminated);
  CHECK(has_rule(lb, "choose"));
  CHECK(wire(lb) == wire(l));
}

TEST_CASE("outcomes are scheduler independent") {
  auto base = wire(go(kCounter, true, false, 0));
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    RunResult r = go(kCounter, true, false, seed);
    REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
    CHECK(r.output == std::vector<std::string>{"5", "42", "42"});
    CHECK(wire(r) == base);
  }
  Program prog = parse_program(kCounter);
  check_program(prog);
  RunOpts o;
  Scheduler rrob{Scheduler::Kind::RoundRobin, 0};
  RunResult r = run_pool(make_pool(prog, true), pool_funs(prog, true), rrob, o);
  REQUIRE(r.outcome.kind == Outcome::Kind::Terminated);
  CHECK(r.output == std::vector<std::string>{"5", "42", "42"});
  CHECK(wire(r) == base);
}

TEST_CASE("deadlocked pools report who waits on what") {
  // two receivers whose partners never answer
  Pool p;
  p.materialized = false;
  p.threads[0] = dunit();
  p.threads[1] = dlet("z", dint(1), dconst("recv", {}, {dendpoint(0, 0)}));
  p.threads[2] = dconst("recv", {}, {dendpoint(1, 0)});
  p.nextThread = 3;
  p.nextChannel = 2;
  p.channels[0];
  p.channels[1];
  FunResolver funs = [](const std::string&) -> const UserFunDef* { return nullptr; };

  RunResult r = run_pool(p, funs, {Scheduler::Kind::Seeded, 1}, {});
  REQUIRE(r.outcome.kind == Outcome::Kind::Deadlock);
  REQUIRE(r.outcome.blocked.size() == 2);
  CHECK(r.outcome.blocked[0].op == "recv");
  CHECK(r.outcome.blocked[0].awaiting == "send");
  CHECK(r.outcome.blocked[1].channel == 1);

  ExploreResult ex = explore(p, funs);
  CHECK(ex.verdict == ExploreResult::Verdict::DeadlockFound);
  CHECK(ex.witness.size() == 1);  // the one local step, then nothing moves
}

TEST_CASE("exploration proves progress for healthy programs") {
  ExploreResult tw = explore_src(kTwoSessions);
  CHECK(tw.verdict == ExploreResult::Verdict::AllPathsProgress);
  CHECK(tw.statesVisited > 1);

  CHECK(explore_src(kPing).verdict == ExploreResult::Verdict::AllPathsProgress);
  CHECK(explore_src(kCounter).verdict == ExploreResult::Verdict::AllPathsProgress);
  CHECK(explore_src(kRelayTwice).verdict == ExploreResult::Verdict::AllPathsProgress);
  CHECK(explore_src(kPushTwo, true, true).verdict ==
        ExploreResult::Verdict::AllPathsProgress);
  CHECK(explore_src(kPing, false).verdict == ExploreResult::Verdict::AllPathsProgress);
}

TEST_CASE("the state budget is respected") {
  Program prog = parse_program(kCounter);
  check_program(prog);
  ExploreResult ex = explore(make_pool(prog, true), pool_funs(prog, true), 3);
  CHECK(ex.verdict == ExploreResult::Verdict::DepthExceeded);
  CHECK(ex.statesVisited == 4);
}

TEST_CASE("the resource audit catches corrupted pools") {
  {  // one endpoint twice
    Pool p;
    p.materialized = false;
    p.threads[0] = mk(DPair{dendpoint(0, 0), dendpoint(0, 0)});
    p.channels[0].holder[0] = 0;
    p.channels[0].holder[1] = 0;
    AuditResult a = audit_resources(p);
    CHECK_FALSE(a.ok);
    CHECK(a.violation.find("occurs 2") != std::string::npos);
  }
  {  // a live channel with a vanished endpoint
    Pool p;
    p.materialized = false;
    p.threads[0] = dendpoint(0, 0);
    p.channels[0].holder[0] = 0;
    AuditResult a = audit_resources(p);
    CHECK_FALSE(a.ok);
    CHECK(a.violation.find("gone") != std::string::npos);
  }
  {  // an endpoint of a channel that was already retired
    Pool p;
    p.materialized = false;
    p.threads[0] = dendpoint(7, 1);
    AuditResult a = audit_resources(p);
    CHECK_FALSE(a.ok);
    CHECK(a.violation.find("retired") != std::string::npos);
  }
  {  // holder bookkeeping out of sync with the terms
    Pool p;
    p.materialized = false;
    p.threads[0] = dendpoint(0, 0);
    p.threads[1] = dendpoint(0, 1);
    p.nextThread = 2;
    p.channels[0].holder[0] = 0;
    p.channels[0].holder[1] = 0;
    AuditResult a = audit_resources(p);
    CHECK_FALSE(a.ok);
    CHECK(a.violation.find("stale") != std::string::npos);
  }
}

TEST_CASE("pool re-typechecking accepts mid-run states and rejects corrupted ones") {
  Program prog = parse_program(kPing);
  check_program(prog);
  FunResolver funs = pool_funs(prog, true);
  Pool p = make_pool(prog, true);
  while (p.channels.empty()) {
    auto steps = enabled_steps(p, funs);
    REQUIRE(!steps.empty());
    apply_step(p, steps.front(), funs, nullptr);
  }
  CHECK(typecheck_pool(p, prog).ok);

  Pool shared = p;
  shared.threads[9] = dconst("wait", {}, {dendpoint(0, 0)});
  CHECK_FALSE(typecheck_pool(shared, prog).ok);

  Pool leak = p;
  leak.threads.erase(1);
  PoolTypeReport lr = typecheck_pool(leak, prog);
  CHECK_FALSE(lr.ok);
  CHECK(lr.error.find("no thread") != std::string::npos);

  Pool erased = make_pool(prog, false);
  CHECK_FALSE(typecheck_pool(erased, prog).ok);
}

TEST_CASE("illegal steps are rejected") {
  Program prog = parse_program(kPing);
  check_program(prog);
  FunResolver funs = pool_funs(prog, true);
  Pool p = make_pool(prog, true);
  CHECK_THROWS_AS(apply_step(p, {"pr-msg", "", {0, 1}, 0, {}}, funs, nullptr), IllegalStep);
  CHECK_THROWS_AS(apply_step(p, {"pr2", "", {0}, {}, {}}, funs, nullptr), IllegalStep);
  CHECK_THROWS_AS(apply_step(p, {"nonsense", "", {0}, {}, {}}, funs, nullptr), IllegalStep);
}

TEST_CASE("trace entries serialize as one json object per line") {
  RunResult r = go(kRelay, true, false, 1);
  REQUIRE(!r.trace.empty());
  bool sawTransfer = false;
  for (const auto& e : r.trace) {
    std::string line = trace_json_line(e);
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
    CHECK(line.find("\"step\":") != std::string::npos);
    CHECK(line.find("\"rule\":\"") != std::string::npos);
    CHECK(line.find("\"threads\":[") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
    if (e.rule == "pr-cut-msg") {
      sawTransfer = true;
      CHECK(line.find("\"channel\":") != std::string::npos);
      CHECK(line.find("\"channel2\":") != std::string::npos);
      CHECK(line.find("\"payload\":\"") != std::string::npos);
      CHECK(line.find("\"dir\":") != std::string::npos);
    }
  }
  CHECK(sawTransfer);
  TraceEntry esc;
  esc.step = 1;
  esc.rule = "pr0";
  esc.payload = "a\"b\\c";
  CHECK(trace_json_line(esc) ==
        "{\"step\":1,\"rule\":\"pr0\",\"threads\":[],\"payload\":\"a\\\"b\\\\c\"}");
}

TEST_CASE("the step budget stops runaway pools") {
  const char* spin = R"(
    (defun loop ((n int)) int (loop (+ n 1)))
    (main (print-int (loop 0)))
  )";
  Program prog = parse_program(spin);
  check_program(prog);
  RunOpts o;
  o.maxSteps = 50;
  RunResult r = run_pool(make_pool(prog, true), pool_funs(prog, true),
                         {Scheduler::Kind::Seeded, 1}, o);
  CHECK(r.outcome.kind == Outcome::Kind::DepthExceeded);
  CHECK(r.steps == 50);
}
