#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sessc/terms.hpp"

using namespace sessc;

namespace {

const FunResolver kNoFuns = [](const std::string&) -> const UserFunDef* { return nullptr; };

// Reduce Local redexes until the term is a value or a Session redex surfaces.
DPtr eval_local(DPtr t, const FunResolver& funs = kNoFuns,
                std::vector<std::string>* out = nullptr) {
  for (int fuel = 0; fuel < 10000; ++fuel) {
    Decomp d = decompose(t);
    if (d.kind == DecompKind::Value || d.kind == DecompKind::Session) return t;
    if (d.kind == DecompKind::Stuck) throw StuckTerm(d.why);
    auto r = step_local(d.redex, funs, out);
    REQUIRE(r.has_value());
    t = d.plug(*r);
  }
  FAIL("out of fuel");
  return t;
}

long long as_int(const DPtr& t) {
  auto* n = std::get_if<DIntLit>(&t->node);
  REQUIRE(n != nullptr);
  return n->v;
}

DPtr op(std::string name, std::vector<DPtr> args) {
  return dconst(std::move(name), {}, std::move(args));
}

}  // namespace

TEST_CASE("value recognition") {
  CHECK(is_value(dint(3)));
  CHECK(is_value(dbool(true)));
  CHECK(is_value(dunit()));
  CHECK(is_value(dstr("hi")));
  CHECK(is_value(mk(DLam{"x", std::nullopt, false, dvar("x")})));
  CHECK(is_value(mk(DPair{dint(1), dint(2)})));
  CHECK(is_value(dendpoint(0, 1)));
  CHECK(is_value(mk(DGuardIntro{dint(7)})));
  CHECK(is_value(mk(DAssertIntro{dunit()})));
  CHECK(is_value(mk(DForallIntro{"a", sort_int(), op("+", {dvar("x"), dint(1)})})));
  CHECK(is_value(mk(DExistsIntro{sint(3), dint(9)})));

  CHECK_FALSE(is_value(dvar("x")));
  CHECK_FALSE(is_value(dapp(dvar("f"), dint(1))));
  CHECK_FALSE(is_value(mk(DPair{dvar("x"), dint(2)})));
  CHECK_FALSE(is_value(op("+", {dint(1), dint(2)})));
  CHECK_FALSE(is_value(mk(DGuardIntro{op("+", {dint(1), dint(2)})})));
  CHECK_FALSE(is_value(mk(DExistsIntro{sint(3), dvar("y")})));
}

TEST_CASE("beta and lets") {
  DPtr id = mk(DLam{"x", std::nullopt, false, dvar("x")});
  CHECK(as_int(eval_local(dapp(id, dint(42)))) == 42);

  DPtr t = dlet("x", dint(3), op("+", {dvar("x"), dint(4)}));
  CHECK(as_int(eval_local(t)) == 7);

  DPtr pr = mk(DPair{dint(1), dint(2)});
  DPtr lp = mk(DLetPair{"a", "b", pr, op("-", {dvar("a"), dvar("b")})});
  CHECK(as_int(eval_local(lp)) == -1);

  DPtr iff = mk(DIf{op("<", {dint(2), dint(3)}), dint(10), dint(20)});
  CHECK(as_int(eval_local(iff)) == 10);
}

TEST_CASE("delta rules") {
  CHECK(as_int(eval_local(op("*", {dint(6), dint(7)}))) == 42);
  auto evb = [](DPtr t) {
    auto* b = std::get_if<DBoolLit>(&eval_local(t)->node);
    REQUIRE(b != nullptr);
    return b->v;
  };
  CHECK(evb(op("=", {dint(3), dint(3)})));
  CHECK(evb(op("<>", {dint(3), dint(4)})));
  CHECK_FALSE(evb(op(">=", {dint(3), dint(4)})));
  CHECK(evb(op("and", {dbool(true), dbool(true)})));
  CHECK(evb(op("imp", {dbool(false), dbool(false)})));
  CHECK(evb(op("not", {dbool(false)})));
  CHECK(evb(op("=", {dbool(true), dbool(true)})));

  CHECK(as_int(eval_local(op("fst", {mk(DPair{dint(8), dint(9)})}))) == 8);
  CHECK(as_int(eval_local(op("snd", {mk(DPair{dint(8), dint(9)})}))) == 9);
}

TEST_CASE("arrays") {
  DPtr a = eval_local(op("arr", {dint(5), dint(6), dint(7)}));
  auto* av = std::get_if<DArrVal>(&a->node);
  REQUIRE(av != nullptr);
  CHECK(av->elems.size() == 3);
  CHECK(as_int(eval_local(op("sub", {a, dint(2)}))) == 7);
  CHECK_THROWS_AS(eval_local(op("sub", {a, dint(3)})), StuckTerm);
  CHECK_THROWS_AS(eval_local(op("sub", {a, dint(-1)})), StuckTerm);
}

TEST_CASE("print collects output") {
  std::vector<std::string> out;
  DPtr t = dlet("u", op("print-int", {dint(12)}),
                dlet("v", op("print", {dstr("go")}), op("print-bool", {dbool(true)})));
  DPtr v = eval_local(t, kNoFuns, &out);
  CHECK(is_value(v));
  REQUIRE(out.size() == 3);
  CHECK(out[0] == "12");
  CHECK(out[1] == "go");
  CHECK(out[2] == "true");
}

TEST_CASE("proof marker elimination") {
  DPtr g = mk(DGuardElim{mk(DGuardIntro{dint(5)})});
  CHECK(as_int(eval_local(g)) == 5);

  DPtr la = mk(DLetAssert{"x", mk(DAssertIntro{dint(6)}), op("+", {dvar("x"), dint(1)})});
  CHECK(as_int(eval_local(la)) == 7);

  // instantiating a static abstraction substitutes into embedded statics
  DPtr body = mk(DExistsIntro{scst("a"), dint(1)});
  DPtr fi = mk(DForallIntro{"a", sort_int(), body});
  DPtr inst = eval_local(mk(DForallElim{fi, sint(9)}));
  auto* ei = std::get_if<DExistsIntro>(&inst->node);
  REQUIRE(ei != nullptr);
  REQUIRE(ei->witness.has_value());
  CHECK(alpha_equal(*ei->witness, sint(9)));

  DPtr le = mk(DLetExists{"a", "x", mk(DExistsIntro{sint(3), dint(30)}),
                          op("+", {dvar("x"), dint(2)})});
  CHECK(as_int(eval_local(le)) == 32);
}

TEST_CASE("session redexes surface for the pool") {
  DPtr ep = dendpoint(0, 1);
  DPtr t = dlet("x", op("send", {ep, op("+", {dint(1), dint(2)})}), dvar("x"));
  // first the argument computes locally
  t = eval_local(t);
  Decomp d = decompose(t);
  CHECK(d.kind == DecompKind::Session);
  auto* c = std::get_if<DConstApp>(&d.redex->node);
  REQUIRE(c != nullptr);
  CHECK(c->name == "send");
  CHECK(as_int(c->args.at(1)) == 3);
  // plugging a value for the redex resumes local evaluation
  DPtr resumed = d.plug(dendpoint(0, 1));
  CHECK(is_value(eval_local(resumed)));

  CHECK(is_session_op("choose"));
  CHECK(is_session_op("offer"));
  CHECK(is_session_op("unify"));
  CHECK_FALSE(is_session_op("choose-left"));
  CHECK_FALSE(is_session_op("+"));
}

TEST_CASE("stuck terms are reported, not crashed") {
  Decomp d = decompose(dapp(dint(3), dint(4)));
  CHECK(d.kind == DecompKind::Stuck);
  CHECK(!d.why.empty());

  Decomp d2 = decompose(mk(DIf{dint(1), dint(2), dint(3)}));
  CHECK(d2.kind == DecompKind::Stuck);

  Decomp d3 = decompose(dvar("ghost"));
  CHECK(d3.kind == DecompKind::Stuck);
}

TEST_CASE("substitution respects shadowing") {
  // (lam (x) (+ x y))[y := 5]  hits y, leaves x
  DPtr lam = mk(DLam{"x", std::nullopt, false, op("+", {dvar("x"), dvar("y")})});
  DPtr s = subst_var(lam, "y", dint(5));
  DPtr applied = eval_local(dapp(s, dint(2)));
  CHECK(as_int(applied) == 7);
  // (lam (y) y)[y := 5] unchanged
  DPtr shade = mk(DLam{"y", std::nullopt, false, dvar("y")});
  DPtr s2 = subst_var(shade, "y", dint(5));
  CHECK(as_int(eval_local(dapp(s2, dint(1)))) == 1);

  std::vector<std::string> fv;
  free_vars(lam, fv);
  REQUIRE(fv.size() == 1);
  CHECK(fv[0] == "y");
}

TEST_CASE("static substitution reaches embedded statics") {
  DPtr t = mk(DForallElim{dvar("f"), scst("n")});
  DPtr s = subst_statics(t, {{"n", sint(4)}});
  auto* fe = std::get_if<DForallElim>(&s->node);
  REQUIRE(fe != nullptr);
  REQUIRE(fe->arg.has_value());
  CHECK(alpha_equal(*fe->arg, sint(4)));

  // binder for `a` shadows the outer substitution
  DPtr fi = mk(DForallIntro{"a", sort_int(), mk(DExistsIntro{scst("a"), dunit()})});
  DPtr s3 = subst_statics(fi, {{"a", sint(1)}});
  auto* fi2 = std::get_if<DForallIntro>(&s3->node);
  REQUIRE(fi2 != nullptr);
  auto* ei = std::get_if<DExistsIntro>(&fi2->body->node);
  REQUIRE(ei != nullptr);
  CHECK(alpha_equal(*ei->witness, scst("a")));
}

TEST_CASE("user function unfolding") {
  UserFunDef twice;
  twice.staticParams = {};
  twice.params = {{"x", scst("int")}};
  twice.result = scst("int");
  twice.body = op("+", {dvar("x"), dvar("x")});
  FunResolver funs = [&](const std::string& n) -> const UserFunDef* {
    return n == "twice" ? &twice : nullptr;
  };
  DPtr call = dconst("twice", {}, {dint(21)});
  CHECK(as_int(eval_local(call, funs)) == 42);

  UserFunDef pick;
  pick.staticParams = {{"n", sort_int()}};
  pick.params = {{"x", scst("int")}};
  pick.result = scst("int");
  pick.body = mk(DExistsIntro{scst("n"), dvar("x")});
  FunResolver funs2 = [&](const std::string& n) -> const UserFunDef* {
    return n == "pick" ? &pick : nullptr;
  };
  DPtr r = eval_local(dconst("pick", {sint(8)}, {dint(0)}), funs2);
  auto* ei = std::get_if<DExistsIntro>(&r->node);
  REQUIRE(ei != nullptr);
  CHECK(alpha_equal(*ei->witness, sint(8)));
}

TEST_CASE("erasure strips static content") {
  // markers vanish
  DPtr t = mk(DGuardElim{mk(DGuardIntro{dint(3)})});
  CHECK(as_int(erase_proofs(t)) == 3);

  DPtr fi = mk(DForallIntro{"a", sort_int(), dint(4)});
  CHECK(as_int(erase_proofs(mk(DForallElim{fi, sint(1)}))) == 4);

  // proof operations collapse to their endpoint argument
  DPtr u = dconst("unify", {sint(5)}, {dendpoint(2, 0)});
  DPtr e = erase_proofs(u);
  auto* ep = std::get_if<DEndpoint>(&e->node);
  REQUIRE(ep != nullptr);
  CHECK(ep->chan == 2);

  // let-exists becomes a plain let over the eraser of the packed value
  DPtr le = mk(DLetExists{"a", "x", mk(DExistsIntro{sint(3), dint(30)}),
                          op("+", {dvar("x"), dint(2)})});
  CHECK(as_int(eval_local(erase_proofs(le))) == 32);

  // annotations drop from lambdas
  DPtr lam = mk(DLam{"x", scst("int"), false, dvar("x")});
  auto* l = std::get_if<DLam>(&erase_proofs(lam)->node);
  REQUIRE(l != nullptr);
  CHECK_FALSE(l->ann.has_value());

  // session operations keep their dynamic arguments but lose braces
  DPtr sendT = dconst("send", {sint(0)}, {dendpoint(1, 0), dint(5)});
  auto* c = std::get_if<DConstApp>(&erase_proofs(sendT)->node);
  REQUIRE(c != nullptr);
  CHECK(c->name == "send");
  CHECK(c->staticArgs.empty());
  CHECK(c->args.size() == 2);
}

TEST_CASE("endpoint accounting") {
  std::map<std::pair<int, int>, int> eps;
  DPtr t = mk(DPair{dendpoint(0, 0), dlet("x", dendpoint(0, 1), dendpoint(3, 0))});
  collect_endpoints(t, eps);
  CHECK(eps[{0, 0}] == 1);
  CHECK(eps[{0, 1}] == 1);
  CHECK(eps[{3, 0}] == 1);
}

TEST_CASE("printer is stable") {
  DPtr t = dlet("x", op("+", {dint(1), dint(2)}), mk(DPair{dvar("x"), dbool(false)}));
  std::string s1 = show_dyn(t);
  std::string s2 = show_dyn(t);
  CHECK(s1 == s2);
  CHECK(s1.find("pair") != std::string::npos);
}
