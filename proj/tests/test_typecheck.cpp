#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sessc/typecheck.hpp"

using namespace sessc;

namespace {

SPtr ty(const std::string& s) { return parse_type_str(s); }

void check_ok(const char* src) { check_program(parse_program(src)); }

std::string fails_with(const char* src) {
  try {
    check_program(parse_program(src));
  } catch (const TypeError& e) {
    if (getenv("SHOW_ERRORS")) MESSAGE(std::string(e.what()));
    return e.rule;
  }
  return "";
}

}  // namespace

TEST_CASE("subtyping basics") {
  TypeEnv env;
  CHECK(type_leq(env, ty("(int 3)"), ty("int")));
  CHECK_FALSE(type_leq(env, ty("int"), ty("(int 3)")));
  CHECK(type_leq(env, ty("(int 3)"), ty("(int (+ 1 2))")));
  CHECK(type_leq(env, ty("(bool true)"), ty("bool")));
  CHECK(type_leq(env, ty("(times int bool)"), ty("(tensor int bool)")));
  CHECK_FALSE(type_leq(env, ty("(tensor int bool)"), ty("(times int bool)")));
  CHECK(type_leq(env, ty("(-> int int)"), ty("(-o int int)")));
  CHECK_FALSE(type_leq(env, ty("(-o int int)"), ty("(-> int int)")));
  // contravariant domains
  CHECK(type_leq(env, ty("(-> int (int 5))"), ty("(-o (int 1) int)")));
  CHECK_FALSE(type_leq(env, ty("(-> (int 1) int)"), ty("(-o int int)")));
  CHECK(type_leq(env, ty("(chan C (end S))"), ty("(chan C (end S))")));
  CHECK_FALSE(type_leq(env, ty("(chan C (end S))"), ty("(chan S (end S))")));

  TypeEnv facts;
  facts.store.declare("n", sort_int());
  facts.store.declare("m", sort_int());
  facts.store.assume(parse_static_str("(= n m)"));
  CHECK(type_leq(facts, ty("(int n)"), ty("(int m)")));
  CHECK(type_leq(facts, ty("(chan S (msg C (int n) (end S)))"),
                 ty("(chan S (msg C (int m) (end S)))")));
  CHECK_FALSE(type_leq(facts, ty("(int n)"), ty("(int (+ m 1))")));

  // guards: strengthen the premise, weaken under it
  TypeEnv g;
  g.store.declare("k", sort_int());
  CHECK(type_leq(g, ty("(guard (>= k 0) (int k))"), ty("(guard (> k 0) int)")));
  CHECK_FALSE(type_leq(g, ty("(guard (> k 0) int)"), ty("(guard (>= k 0) int)")));
  CHECK(type_leq(g, ty("(assert (> k 0) int)"), ty("(assert (>= k 0) int)")));
}

TEST_CASE("synthesis of literals and operators") {
  TypeEnv env;
  CHECK(alpha_equal(synth(env, parse_term_str("(+ 3 4)")).type, ty("(int 7)")));
  CHECK(alpha_equal(synth(env, parse_term_str("(< 3 4)")).type, ty("(bool true)")));
  CHECK(alpha_equal(synth(env, parse_term_str("(let x 3 (* x x))")).type, ty("(int 9)")));
  CHECK(alpha_equal(synth(env, parse_term_str("(pair 1 true)")).type,
                    ty("(times (int 1) (bool true))")));
  CHECK(alpha_equal(synth(env, parse_term_str("(if (< 1 2) 5 5)")).type, ty("(int 5)")));
  CHECK(alpha_equal(synth(env, parse_term_str("(sub (arr 7 8 9) 1)")).type, ty("int")));
  CHECK(alpha_equal(synth(env, parse_term_str("(fst (pair 1 ()))")).type, ty("(int 1)")));

  // singleton branches join through widening
  SPtr j = synth(env, parse_term_str("(if (< 1 2) 5 6)")).type;
  CHECK((alpha_equal(j, ty("(int 5)")) || alpha_equal(j, ty("(int 6)")) ||
         alpha_equal(j, ty("int"))));
}

TEST_CASE("guard and assert flow") {
  TypeEnv env;
  env.store.declare("n", sort_int());
  env.store.assume(parse_static_str("(>= n 1)"));
  env.vars["v"] = {ty("(guard (>= n 0) (int n))"), false};
  Typed r = synth(env, parse_term_str("(guard-elim v)"));
  CHECK(alpha_equal(r.type, ty("(int n)")));

  // an assert releases its proposition into the body's facts
  env.vars["w"] = {ty("(assert (= n 3) (int n))"), false};
  CHECK_NOTHROW(check(env, parse_term_str("(let-assert x w (sub (arr 1 2 3 4) x))"),
                      ty("int")));

  CHECK_THROWS_AS(check(env, parse_term_str("(assert-intro 5)"), ty("(assert (>= n 5) int)")),
                  TypeError);
  CHECK_NOTHROW(check(env, parse_term_str("(assert-intro 5)"), ty("(assert (>= n 1) int)")));

  // a guard's premise is usable while checking its body
  TypeEnv g;
  g.store.declare("n", sort_int());
  g.vars["d"] = {ty("(int n)"), false};
  CHECK_NOTHROW(check(g, parse_term_str("(guard-intro (sub (arr 1) d))"),
                      ty("(guard (= n 0) int)")));
  CHECK_THROWS_AS(check(g, parse_term_str("(guard-intro (sub (arr 1) d))"),
                        ty("(guard (>= n 0) int)")),
                  TypeError);
}

TEST_CASE("quantifier terms") {
  TypeEnv env;
  CHECK_NOTHROW(check(env,
                      parse_term_str("(forall-lam (a int) (exists-intro {a} (guard-intro ())))"),
                      ty("(forall (a int) (exists (b int) (guard (= b a) unit)))")));
  CHECK_NOTHROW(check(env, parse_term_str("(exists-intro {3} 4)"),
                      ty("(exists (b int) (int (+ b 1)))")));
  CHECK_THROWS_AS(check(env, parse_term_str("(exists-intro {3} 5)"),
                        ty("(exists (b int) (int (+ b 1)))")),
                  TypeError);

  // instantiation substitutes the argument into the synthesized shape
  Typed t = synth(env, parse_term_str("(forall-app (forall-lam (a int) 3) {4})"));
  CHECK(alpha_equal(t.type, ty("(int 3)")));
}

TEST_CASE("full session programs check") {
  check_ok(R"(
    (stype adder () (msg C int (msg C int (msg S int (end S)))))
    (defun serve ((ch (chan S adder))) ()
      (let-pair (x ch1) (recv ch)
        (let-pair (y ch2) (recv ch1)
          (close (send ch2 (+ x y))))))
    (defun client ((ch (chan C adder))) ()
      (let-pair (r ch1) (recv (send (send ch 20) 22))
        (seq (print-int r) (wait ch1))))
    (main (client (create {adder} (llam (s) (serve s)))))
  )");
}

static const char* kCounter = R"(
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

TEST_CASE("dependent counter protocol checks end to end") { check_ok(kCounter); }

TEST_CASE("index tracking catches a wrong payload") {
  // the server tries to send acc+1 where the protocol demands n+m
  const char* bad = R"(
    (stype counter ((n int))
      (branch C
        (quan C (m int) (msg C (int m) (msg S (int (+ n m)) (counter (+ n m)))))
        (msg S (int n) (end S))))
    (defun serve {n int} ((acc (int n)) (ch (chan S (counter n)))) ()
      (offer (recurse ch)
        (llam (ch1) (let-exists (m ch2) (exify ch1)
          (let-pair (x ch3) (recv ch2)
            (serve {(+ n m)} (+ acc x) (send ch3 (+ (+ acc x) 1))))))
        (llam (ch1) (close (send ch1 acc)))))
    (main ())
  )";
  CHECK(fails_with(bad) == "type-mismatch");
}

static const char* kEcho = "(llam (s) (let-pair (x s1) (recv s) (wait s1)))";

TEST_CASE("linearity violations") {
  std::string mk = std::string("(create {(msg C int (end C))} ") + kEcho + ")";

  CHECK(fails_with(("(main (let c " + mk +
                    " (seq (close (send c 1)) (close (send c 2)))))").c_str()) ==
        "linear-reuse");

  CHECK(fails_with(("(main (let c " + mk + " ()))").c_str()) == "linear-unused");

  CHECK(fails_with(("(main (let c " + mk +
                    " (let f (lam (x int) (close (send c x))) (f 1))))").c_str()) ==
        "linear-capture");

  // close is the closing role's move, wait the other side's
  CHECK(fails_with(R"(
    (main (close (create {(end S)} (llam (s) (close s)))))
  )") == "role-mismatch");
}

TEST_CASE("protocol state violations") {
  std::string mk = std::string("(create {(msg C int (end C))} ") + kEcho + ")";

  CHECK(fails_with(("(main (close " + mk + "))").c_str()) == "wrong-protocol-state");

  CHECK(fails_with(R"(
    (main (let c (create {(msg C int (end C))}
                   (llam (s) (let-pair (x s1) (recv s) (seq (close x) (wait s1)))))
      (close (send c 1))))
  )") == "not-a-channel");

  // sending where only receiving is allowed
  CHECK(fails_with(R"(
    (main (let c (create {(msg C int (end C))} (llam (s) (close (send s 1))))
      (close (send c 1))))
  )") == "role-mismatch");
}

TEST_CASE("index precondition violations") {
  CHECK(fails_with(R"(
    (defun f ((a (arrref int 3))) int (sub a 3))
    (main ())
  )") == "index-out-of-bounds");

  CHECK(fails_with(R"(
    (defun f ((a (arrref int 3)) (i int)) int (sub a i))
    (main ())
  )") == "op-arg-mismatch");

  check_ok(R"(
    (defun f {i int (and (>= i 0) (< i 3))} ((a (arrref int 3)) (j (int i))) int
      (sub a j))
    (main (print-int (f {1} (arr 7 8 9) 1)))
  )");

  CHECK(fails_with(R"(
    (defun f {i int (and (>= i 0) (< i 3))} ((a (arrref int 3)) (j (int i))) int
      (sub a j))
    (main (print-int (f {4} (arr 7 8 9) 4)))
  )") == "guard-not-entailed");

  // the fact flows from a dynamic test into the branch
  check_ok(R"(
    (defun g {i int (>= i 0)} ((a (arrref int 3)) (j (int i))) int
      (if (< j 3) (sub a j) 0))
    (main ())
  )");
}

TEST_CASE("conditional protocols need their condition settled") {
  const char* tmpl = R"(
    (stype pick ((b bool)) (ite b (msg C int (end C)) (end C)))
    (defun left ((ch (chan C (pick true)))) ()
      (close (send (itet ch) 1)))
    (main ())
  )";
  check_ok(tmpl);
  CHECK(fails_with(R"(
    (stype pick ((b bool)) (ite b (msg C int (end C)) (end C)))
    (defun wrong ((ch (chan C (pick true)))) ()
      (close (itef ch)))
    (main ())
  )") == "condition-not-entailed");
}

TEST_CASE("offer handlers must consume alike") {
  CHECK(fails_with(R"(
    (stype duo () (branch C (end C) (end C)))
    (main (let c2 (create {(end S)} (llam (s2)
            (let c (create {duo} (llam (s) (offer s
                (llam (ch) (seq (wait ch) (close s2)))
                (llam (ch) (wait ch)))))
              (close (choose-left c)))))
      (wait c2)))
  )") == "branch-usage-mismatch");
}

TEST_CASE("misc negative forms") {
  CHECK(fails_with("(main (close 3))") == "not-a-channel");
  CHECK(fails_with("(main (ghost 1))") == "unbound-var");
  CHECK(fails_with("(main (print-int x))") == "unbound-var");
  CHECK(fails_with("(main (lam (x) x))") == "needs-annotation");
  CHECK(fails_with("(main (+ 1 true))") == "op-arg-mismatch");
  CHECK(fails_with("(main (if 3 1 2))") == "not-a-bool");
  CHECK(fails_with("(main (fst 3))") == "op-arg-mismatch");
  CHECK(fails_with(R"(
    (main (let c (create {(msg C int (end C))}
                   (llam (s) (let-pair (x s1) (recv s) (wait s1))))
      (close (send c true))))
  )") == "type-mismatch");
  CHECK(fails_with("(defun f ((x int)) int true) (main ())") == "type-mismatch");
  CHECK(fails_with("(defun f {n int} ((x (int n))) (int n) x) (main (f 3))") ==
        "static-arity");

  // cut wants dual roles on one protocol
  TypeEnv env;
  env.vars["x"] = {ty("(chan S (msg C int (end C)))"), true};
  env.vars["y"] = {ty("(chan C (msg C int (end C)))"), true};
  env.vars["z"] = {ty("(chan C (end C))"), true};
  Typed cu = synth(env, parse_term_str("(cut x y)"));
  CHECK(alpha_equal(cu.type, ty("unit")));
  CHECK(cu.used == Used{"x", "y"});
  CHECK_THROWS_AS(synth(env, parse_term_str("(cut x x)")), TypeError);
  CHECK_THROWS_AS(synth(env, parse_term_str("(cut x z)")), TypeError);
  CHECK_THROWS_AS(synth(env, parse_term_str("(cut y z)")), TypeError);
}

TEST_CASE("existential escape is stopped") {
  // synthesis may not let the opened index leak into the result type
  TypeEnv env;
  env.vars["p"] = {ty("(exists (a int) (times (int a) unit))"), false};
  CHECK_THROWS_AS(synth(env, parse_term_str("(let-exists (a q) p (fst q))")), TypeError);

  // checking against a closed expected type widens instead
  TypeEnv env2;
  env2.vars["p"] = {ty("(exists (a int) (times (int a) unit))"), false};
  CHECK_NOTHROW(check(env2, parse_term_str("(let-exists (a q) p (fst q))"), ty("int")));

  CHECK(fails_with(R"(
    (stype pk () (quan C (m int) (msg C (int m) (end C))))
    (main (let c (create {pk} (llam (s)
            (let y (let-exists (m s1) (exify s)
                     (let-pair (x s2) (recv s1) (seq (wait s2) x)))
              (print-int y))))
      (close (send (unify c {7}) 7))))
  )") == "existential-escape");
}

TEST_CASE("main must end unrestricted") {
  CHECK(fails_with("(main (create {(end S)} (llam (s) (close s))))") == "main-leaks");
}

TEST_CASE("cut composes dual endpoints of different sessions") {
  check_ok(R"(
    (stype relay () (msg C int (end C)))
    (main (let c (create {relay} (llam (s1)
            (let c2 (create {relay} (llam (s2)
                      (let-pair (x s3) (recv s2) (wait s3))))
              (cut s1 c2))))
      (close (send c 9))))
  )");
}
