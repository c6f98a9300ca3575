#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sessc/parser.hpp"

using namespace sessc;

TEST_CASE("static expressions parse and normalize") {
  SPtr p = parse_static_str("(msg S int (end S))");
  auto h = session_head(p);
  CHECK(h.kind == HeadKind::Msg);

  SPtr q = parse_static_str("(quan C (n int) (msg C (int n) (end C)))");
  CHECK(session_head(q).kind == HeadKind::Quan);
  // binder is de Bruijn: printing then reparsing is stable
  CHECK(alpha_equal(parse_static_str(show_static(q)), q));

  // negative literals and operators
  SPtr a = parse_static_str("(+ -5 n)");
  CHECK(alpha_equal(a, scst("+", {sint(-5), scst("n")})));

  CHECK(alpha_equal(parse_static_str("S"), sint(0)));
  CHECK(alpha_equal(parse_static_str("C"), sint(1)));
  CHECK(alpha_equal(parse_static_str("true"), sbool(true)));

  // types
  SPtr t = parse_type_str("(-o (guard (>= n 0) int) (chan C (end S)))");
  SortEnv env;
  std::map<std::string, Sort> free{{"n", sort_int()}};
  env.free = &free;
  CHECK(sort_check(env, StaticSignature::standard(), t) == sort_vtype());
}

TEST_CASE("sorted binders inside statics") {
  SPtr f = parse_static_str("(forall (a int) (guard (>= a 0) int))");
  SortEnv env;
  CHECK(sort_check(env, StaticSignature::standard(), f) == sort_type());

  SPtr fx = parse_static_str("(fix (s stype) (msg S int s))");
  CHECK(session_head(fx).kind == HeadKind::Fix);

  // raw forms used by the printer parse back
  SPtr sl = parse_static_str("(slam (x int) (+ x 1))");
  CHECK(std::get_if<SLam>(&sl->node) != nullptr);
  SPtr sa = parse_static_str("(sapp (slam (x int) x) 3)");
  CHECK(alpha_equal(beta_normalize(sa), sint(3)));
}

TEST_CASE("protocol definitions elaborate") {
  const char* src = R"(
    (stype ping () (msg C int (msg S int (end S))))
    (stype counter ((n int)) (quan C (m int) (msg C (int m) (counter (+ n m)))))
    (stype stream () (msg S int stream))
    (stype table ((k int)) (msg C (int k) (end C)))
    (main ())
  )";
  Program p = parse_program(src);
  REQUIRE(p.stypes.size() == 4);

  const StypeDef* ping = p.stype("ping");
  REQUIRE(ping != nullptr);
  CHECK_FALSE(ping->recursive);
  CHECK(session_head(stype_ref(*ping, {})).kind == HeadKind::Msg);

  const StypeDef* counter = p.stype("counter");
  REQUIRE(counter != nullptr);
  CHECK(counter->recursive);
  SPtr ref = stype_ref(*counter, {sint(0)});
  CHECK(session_head(ref).kind == HeadKind::HoFix);
  SortEnv env;
  CHECK(sort_check(env, StaticSignature::standard(), ref) == sort_stype());

  const StypeDef* stream = p.stype("stream");
  REQUIRE(stream != nullptr);
  CHECK(stream->recursive);
  CHECK(session_head(stype_ref(*stream, {})).kind == HeadKind::Fix);

  // plain parametric definitions normalize away
  const StypeDef* table = p.stype("table");
  SPtr t5 = stype_ref(*table, {sint(5)});
  CHECK(alpha_equal(t5, parse_static_str("(msg C (int 5) (end C))")));

  // references inside later definitions inline
  const char* src2 = R"(
    (stype base () (end S))
    (stype wrap () (msg C int base))
    (main ())
  )";
  Program p2 = parse_program(src2);
  SPtr w = stype_ref(*p2.stype("wrap"), {});
  CHECK(alpha_equal(w, parse_static_str("(msg C int (end S))")));
}

TEST_CASE("terms parse with op disambiguation") {
  DPtr t = parse_term_str("(let x 3 (+ x 4))");
  CHECK(show_dyn(t) == "((lam (x) (+ x 4)) 3)");

  // a bound variable shadows a primitive name
  DPtr sh = parse_term_str("(lam (not) (not true))");
  auto* l = std::get_if<DLam>(&sh->node);
  REQUIRE(l != nullptr);
  CHECK(std::get_if<DApp>(&l->body->node) != nullptr);

  // unshadowed, the same head is a primitive
  DPtr pr = parse_term_str("(not true)");
  CHECK(std::get_if<DConstApp>(&pr->node) != nullptr);

  // braces attach as static arguments on operations
  DPtr cr = parse_term_str("(create {(msg C int (end C))} (llam (s) (wait s)))");
  auto* c = std::get_if<DConstApp>(&cr->node);
  REQUIRE(c != nullptr);
  CHECK(c->staticArgs.size() == 1);
  CHECK(c->args.size() == 1);

  // branch selection elaborates to the tagged primitive plus its discharge
  std::string cl = show_dyn(parse_term_str("(choose-left x)"));
  CHECK(cl.find("itet") != std::string::npos);
  CHECK(cl.find("(choose x true)") != std::string::npos);
  std::string onr = show_dyn(parse_term_str("(offer x (llam (a) (wait a)) (llam (a) (wait a)))"));
  CHECK(onr.find("let-exists") != std::string::npos);
  CHECK(onr.find("itef") != std::string::npos);

  // braces on a general application instantiate a quantifier
  DPtr fa = parse_term_str("(f {3} x)");
  auto* ap = std::get_if<DApp>(&fa->node);
  REQUIRE(ap != nullptr);
  CHECK(std::get_if<DForallElim>(&ap->fn->node) != nullptr);

  // seq sugar chains lets
  DPtr sq = parse_term_str("(seq (print \"a\") (print \"b\") 7)");
  CHECK(show_dyn(sq).find("lam") != std::string::npos);

  DPtr lp = parse_term_str("(let-pair (a b) p (pair b a))");
  CHECK(std::get_if<DLetPair>(&lp->node) != nullptr);

  DPtr le = parse_term_str("(let-exists (a x) (recv c) x)");
  CHECK(std::get_if<DLetExists>(&le->node) != nullptr);

  DPtr fi = parse_term_str("(forall-lam (a int) (exists-intro {a} ()))");
  auto* f = std::get_if<DForallIntro>(&fi->node);
  REQUIRE(f != nullptr);
  CHECK(f->sort == sort_int());
}

TEST_CASE("programs parse and functions resolve forward") {
  const char* src = R"(
    ; a server that adds its two received numbers
    (stype adder () (msg C int (msg C int (msg S int (end S)))))

    (defun serve ((ch (chan S adder))) ()
      (let-pair (x ch1) (recv ch)
        (let-pair (y ch2) (recv ch1)
          (close (send ch2 (+ x y))))))

    (defun client ((ch (chan C adder))) ()
      (let-pair (r ch1) (recv (send (send ch 20) 22))
        (seq (print-int r) (wait ch1))))

    (main (let-pair (s c) (create {adder})
      (seq (thread-create (llam (u) (serve s)))
           (client c))))
  )";
  Program p = parse_program(src);
  REQUIRE(p.funs.size() == 2);
  REQUIRE(p.main != nullptr);
  CHECK(p.fun("serve") != nullptr);
  CHECK(p.fun("client") != nullptr);
  CHECK(p.fun("absent") == nullptr);

  // calls to defuns parse as constant applications
  std::string printed = print_program(p);
  CHECK(printed.find("(serve s)") != std::string::npos);
}

TEST_CASE("static params with guards") {
  const char* src = R"(
    (defun nth {n int} {i int (and (>= i 0) (< i n))}
        ((a (arrref int n)) (j (int i))) int
      (sub a j))
    (main ())
  )";
  Program p = parse_program(src);
  const FunDef* f = p.fun("nth");
  REQUIRE(f != nullptr);
  REQUIRE(f->staticParams.size() == 2);
  CHECK(f->staticParams[0].name == "n");
  CHECK(f->staticParams[0].prop == nullptr);
  REQUIRE(f->staticParams[1].prop != nullptr);
  CHECK(f->staticParams[1].sort == sort_int());
  CHECK(alpha_equal(f->result, scst("int")));
}

TEST_CASE("print then parse is a fixpoint") {
  const char* src = R"(
    (stype counter ((n int)) (quan C (m int) (msg C (int m) (counter (+ n m)))))
    (defun pump {n int} ((ch (chan S (counter n)))) ()
      (let-pair (x ch1) (recv (unify ch {3}))
        (pump {(+ n 3)} ch1)))
    (defun go ((ch (chan C (counter 0)))) ()
      (close (send (unify ch {3}) 3)))
    (main (let-pair (s c) (create {(counter 0)})
      (seq (thread-create (llam (u) (pump {0} s)))
           (go c))))
  )";
  Program p1 = parse_program(src);
  std::string s1 = print_program(p1);
  Program p2 = parse_program(s1);
  std::string s2 = print_program(p2);
  CHECK(s1 == s2);
  REQUIRE(p2.funs.size() == 2);
  CHECK(alpha_equal(p2.fun("pump")->params[0].second, p1.fun("pump")->params[0].second));
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse_program("(main"), ParseError);
  CHECK_THROWS_AS(parse_program("(main ()) (main ())"), ParseError);
  CHECK_THROWS_AS(parse_program("(widget 3)"), ParseError);
  CHECK_THROWS_AS(parse_program("(defun f ((x)) int x) (main ())"), ParseError);
  CHECK_THROWS_AS(parse_program("(main (lam x x))"), ParseError);
  CHECK_THROWS_AS(parse_static_str("(msg S int)"), ParseError);
  CHECK_THROWS_AS(parse_static_str("(mystery 1 2)"), ParseError);
  CHECK_THROWS_AS(parse_term_str("{3}"), ParseError);
  CHECK_THROWS_AS(parse_program(""), ParseError);

  try {
    parse_program("(stype p ()\n  (msg S int))\n(main ())");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span.line == 2);
    CHECK(std::string(e.what()).find("msg") != std::string::npos);
  }

  // protocols must have declared arity
  CHECK_THROWS_AS(parse_program("(stype q ((n int)) (end S)) (main (create {q}))"), ParseError);
}

TEST_CASE("comments and strings lex") {
  Program p = parse_program("; leading note\n(main (print \"a b\\n\")) ; trailing");
  REQUIRE(p.main != nullptr);
  auto* c = std::get_if<DConstApp>(&p.main->node);
  REQUIRE(c != nullptr);
  auto* s = std::get_if<DStrLit>(&c->args.at(0)->node);
  REQUIRE(s != nullptr);
  CHECK(s->v == "a b\n");
}

TEST_CASE("definition names cannot shadow built-ins") {
  CHECK_THROWS_AS(parse_program("(defun send ((x int)) int x) (main ())"), ParseError);
  CHECK_THROWS_AS(parse_program("(defun if ((x int)) int x) (main ())"), ParseError);
  CHECK_THROWS_AS(parse_program("(defun f ((x int)) int x) (defun f ((x int)) int x) (main ())"),
                  ParseError);
  CHECK_THROWS_AS(parse_program("(stype msg () (end S)) (main ())"), ParseError);
  CHECK_THROWS_AS(parse_program("(stype p () (end S)) (stype p () (end S)) (main ())"),
                  ParseError);
  CHECK_THROWS_AS(parse_program("(defun p ((x int)) int x) (stype p () (end S)) (main ())"),
                  ParseError);
  CHECK_NOTHROW(parse_program("(defun double ((x int)) int (+ x x)) (main (double 2))"));
}
