#include "sessc/typecheck.hpp"

#include <algorithm>
#include <sstream>

namespace sessc {

namespace {

SPtr norm(const SPtr& t) { return beta_normalize(t); }

const SCst* cst(const SPtr& t, const char* name, size_t arity) {
  const auto* c = std::get_if<SCst>(&t->node);
  if (c && c->name == name && c->args.size() == arity) return c;
  return nullptr;
}

bool has_meta(const SPtr& t) {
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (is_meta_name(c->name)) return true;
    for (const auto& a : c->args)
      if (has_meta(a)) return true;
    return false;
  }
  if (const auto* l = std::get_if<SLam>(&t->node)) return has_meta(l->body);
  if (const auto* a = std::get_if<SApp>(&t->node)) return has_meta(a->fn) || has_meta(a->arg);
  return false;
}

// Strip singleton refinements down to their base types, through pairs.
SPtr widen_singletons(const SPtr& t) {
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if ((c->name == "int" || c->name == "bool") && c->args.size() == 1) return scst(c->name);
    if ((c->name == "times" || c->name == "tensor") && c->args.size() == 2)
      return scst(c->name, {widen_singletons(c->args[0]), widen_singletons(c->args[1])});
  }
  return t;
}

std::string fresh_atom(const TypeEnv& env, const std::string& hint) {
  std::string base = hint.empty() ? "a" : hint;
  if (!env.store.vars.count(base) && !type_signature().known(base)) return base;
  for (int k = 1;; ++k) {
    std::string n = base + "$" + std::to_string(k);
    if (!env.store.vars.count(n)) return n;
  }
}

Verdict entail(const TypeEnv& env, const SPtr& prop) { return entails(env.store, norm(prop)); }

void require_entailed(const TypeEnv& env, const SPtr& prop, const char* rule, Span sp,
                      const std::string& what) {
  Verdict v = entail(env, prop);
  if (is_valid(v)) return;
  if (const auto* inv = std::get_if<Invalid>(&v))
    throw TypeError(rule, sp, what + ": cannot establish " + show_static(norm(prop)),
                    show_countermodel(*inv));
  throw UnsupportedConstraint(std::get<Unsupported>(v).reason + " while checking " + what);
}

bool entailed(const TypeEnv& env, const SPtr& prop) {
  Verdict v = entail(env, prop);
  if (const auto* u = std::get_if<Unsupported>(&v)) throw UnsupportedConstraint(u->reason);
  return is_valid(v);
}

// ------------------------------------------------------------- used sets

void merge_used(Used& acc, const Used& add, Span sp) {
  for (const auto& n : add) {
    if (acc.count(n))
      throw TypeError("linear-reuse", sp, n + " is consumed more than once");
    acc.insert(n);
  }
}

void require_same_used(const Used& a, const Used& b, Span sp, const char* where) {
  if (a == b) return;
  std::string diff;
  for (const auto& n : a)
    if (!b.count(n)) diff += (diff.empty() ? "" : ", ") + n;
  for (const auto& n : b)
    if (!a.count(n)) diff += (diff.empty() ? "" : ", ") + n;
  throw TypeError("branch-usage-mismatch", sp,
                  std::string(where) + " consume different linear resources: " + diff);
}

}  // namespace

// --------------------------------------------------------------- sorting

const StaticSignature& type_signature() {
  static const StaticSignature sig = StaticSignature::standard();
  return sig;
}

Sort sort_of(const TypeEnv& env, const SPtr& t, Span sp) {
  SortEnv se;
  se.free = &env.store.vars;
  try {
    return sort_check(se, type_signature(), t);
  } catch (const SortError& e) {
    throw TypeError("ill-sorted", sp, e.what());
  }
}

bool is_linear_type(const TypeEnv& env, const SPtr& ty) {
  return !sort_leq(sort_of(env, ty), sort_type());
}

// ------------------------------------------------------------- equality

bool sem_equal(const TypeEnv& env, const SPtr& a0, const SPtr& b0) {
  SPtr a = norm(a0), b = norm(b0);
  if (alpha_equal(a, b)) return true;
  Sort sa, sb;
  try {
    sa = sort_of(env, a);
    sb = sort_of(env, b);
  } catch (const TypeError&) {
    return false;
  }
  if (sa != sb) return false;
  if (sa == sort_int() || sa == sort_bool()) return entailed(env, scst("=", {a, b}));

  const auto* ca = std::get_if<SCst>(&a->node);
  const auto* cb = std::get_if<SCst>(&b->node);
  if (ca && cb && ca->name == cb->name && ca->args.size() == cb->args.size()) {
    for (size_t i = 0; i < ca->args.size(); ++i)
      if (!sem_equal(env, ca->args[i], cb->args[i])) return false;
    return true;
  }
  const auto* la = std::get_if<SLam>(&a->node);
  const auto* lb = std::get_if<SLam>(&b->node);
  if (la && lb && la->dom == lb->dom) {
    TypeEnv e2 = env;
    std::string f = fresh_atom(env, la->hint);
    e2.store.declare(f, la->dom);
    return sem_equal(e2, subst_top(la->body, scst(f)), subst_top(lb->body, scst(f)));
  }
  return false;
}

// -------------------------------------------------------------- subtyping

bool type_leq(const TypeEnv& env, const SPtr& sub0, const SPtr& super0) {
  SPtr a = norm(sub0), b = norm(super0);
  if (alpha_equal(a, b)) return true;
  const auto* ca = std::get_if<SCst>(&a->node);
  const auto* cb = std::get_if<SCst>(&b->node);
  if (!ca || !cb) return false;

  auto leq = [&](const SPtr& x, const SPtr& y) { return type_leq(env, x, y); };

  // singleton widening and provable singleton equality
  if (ca->name == "int" && cb->name == "int") {
    if (ca->args.size() == 1 && cb->args.empty()) return true;
    if (ca->args.size() == 1 && cb->args.size() == 1)
      return entailed(env, scst("=", {ca->args[0], cb->args[0]}));
    return false;  // int below int(s) needs a proof the other way
  }
  if (ca->name == "bool" && cb->name == "bool") {
    if (ca->args.size() == 1 && cb->args.empty()) return true;
    if (ca->args.size() == 1 && cb->args.size() == 1)
      return entailed(env, scst("=", {ca->args[0], cb->args[0]}));
    return false;
  }
  if (ca->name == "times" && ca->args.size() == 2 &&
      (cb->name == "times" || cb->name == "tensor") && cb->args.size() == 2)
    return leq(ca->args[0], cb->args[0]) && leq(ca->args[1], cb->args[1]);
  if (ca->name == "tensor" && cb->name == "tensor" && ca->args.size() == 2 &&
      cb->args.size() == 2)
    return leq(ca->args[0], cb->args[0]) && leq(ca->args[1], cb->args[1]);
  if ((ca->name == "->" || ca->name == "-o") && ca->args.size() == 2 &&
      cb->args.size() == 2 &&
      (cb->name == "-o" || (cb->name == "->" && ca->name == "->")))
    return leq(cb->args[0], ca->args[0]) && leq(ca->args[1], cb->args[1]);
  if (ca->name == "guard" && cb->name == "guard" && ca->args.size() == 2 &&
      cb->args.size() == 2) {
    if (!entailed(env, scst("imp", {cb->args[0], ca->args[0]}))) return false;
    TypeEnv e2 = env;
    e2.store.assume(norm(cb->args[0]));
    return type_leq(e2, ca->args[1], cb->args[1]);
  }
  if (ca->name == "assert" && cb->name == "assert" && ca->args.size() == 2 &&
      cb->args.size() == 2) {
    TypeEnv e2 = env;
    e2.store.assume(norm(ca->args[0]));
    if (!entailed(e2, cb->args[0])) return false;
    return type_leq(e2, ca->args[1], cb->args[1]);
  }
  if (ca->name == "chan" && cb->name == "chan" && ca->args.size() == 2 && cb->args.size() == 2)
    return sem_equal(env, ca->args[0], cb->args[0]) &&
           sem_equal(env, ca->args[1], cb->args[1]);
  if (ca->name == "arrref" && cb->name == "arrref" && ca->args.size() == 2 &&
      cb->args.size() == 2)
    return leq(ca->args[0], cb->args[0]) && sem_equal(env, ca->args[1], cb->args[1]);
  if ((ca->name == "forall" || ca->name == "exists") && ca->name == cb->name &&
      ca->args.size() == 1 && cb->args.size() == 1) {
    const auto* la = std::get_if<SLam>(&ca->args[0]->node);
    const auto* lb = std::get_if<SLam>(&cb->args[0]->node);
    if (!la || !lb || !(la->dom == lb->dom)) return false;
    TypeEnv e2 = env;
    std::string f = fresh_atom(env, la->hint);
    e2.store.declare(f, la->dom);
    return type_leq(e2, subst_top(la->body, scst(f)), subst_top(lb->body, scst(f)));
  }
  return false;
}

// ----------------------------------------------------------- op schemes

namespace {

struct SchemeProp {
  SPtr prop;
  const char* rule;
};

struct Scheme {
  std::vector<std::pair<std::string, Sort>> metas;  // names keep the ? prefix
  std::vector<SPtr> params;
  SPtr result;
  std::vector<SchemeProp> props;
};

SPtr M(const char* n) { return scst(std::string("?") + n); }

const std::map<std::string, std::vector<Scheme>>& builtin_schemes() {
  static const std::map<std::string, std::vector<Scheme>> table = [] {
    const Sort i = sort_int(), b = sort_bool(), t = sort_type(), v = sort_vtype(),
               s = sort_stype();
    std::map<std::string, std::vector<Scheme>> m;
    auto C = [](const char* n, std::vector<SPtr> a) { return scst(n, std::move(a)); };
    SPtr U = scst("unit");

    auto chanOf = [&](SPtr role, SPtr proto) { return C("chan", {role, proto}); };
    SPtr recvState = chanOf(M("r"), C("seq", {C("msg", {M("i"), M("t")}), M("p")}));
    SPtr endState = chanOf(M("r"), C("end", {M("i")}));
    SPtr branchState = chanOf(M("r"), C("branch", {M("i"), M("p"), M("q")}));
    SPtr iteState = chanOf(M("r"), C("ite", {M("b"), M("p"), M("q")}));
    auto sessMetas = [&](bool twoConts) {
      std::vector<std::pair<std::string, Sort>> ms{{"?r", i}, {"?i", i}, {"?p", s}};
      if (twoConts) ms.push_back({"?q", s});
      return ms;
    };
    SPtr sameRole = C("=", {M("r"), M("i")});
    SPtr otherRole = C("<>", {M("r"), M("i")});

    {
      Scheme sc;
      sc.metas = sessMetas(false);
      sc.metas.push_back({"?t", v});
      sc.params = {recvState, M("t")};
      sc.result = chanOf(M("r"), M("p"));
      sc.props = {{sameRole, "role-mismatch"}};
      m["send"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = sessMetas(false);
      sc.metas.push_back({"?t", v});
      sc.params = {recvState};
      sc.result = C("tensor", {M("t"), chanOf(M("r"), M("p"))});
      sc.props = {{otherRole, "role-mismatch"}};
      m["recv"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = {{"?r", i}, {"?i", i}};
      sc.params = {endState};
      sc.result = U;
      sc.props = {{sameRole, "role-mismatch"}};
      m["close"] = {sc};
      sc.props = {{otherRole, "role-mismatch"}};
      m["wait"] = {sc};
    }
    {
      // choosing sends the tag; the ite continuation is discharged by itet/itef
      Scheme sc;
      sc.metas = sessMetas(true);
      sc.metas.push_back({"?b", b});
      sc.params = {branchState, C("bool", {M("b")})};
      sc.props = {{sameRole, "role-mismatch"}};
      sc.result = chanOf(M("r"), C("ite", {M("b"), M("p"), M("q")}));
      m["choose"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = sessMetas(true);
      sc.params = {branchState};
      sc.props = {{otherRole, "role-mismatch"}};
      sc.result = C("exists", {slam("b", b, C("tensor", {C("bool", {svar(0, "b")}),
                                                         chanOf(M("r"), C("ite", {svar(0, "b"), M("p"), M("q")}))}))});
      m["offer"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = {{"?r", i}, {"?b", b}, {"?p", s}, {"?q", s}};
      sc.params = {iteState};
      sc.props = {{M("b"), "condition-not-entailed"}};
      sc.result = chanOf(M("r"), M("p"));
      m["itet"] = {sc};
      sc.props = {{C("not", {M("b")}), "condition-not-entailed"}};
      sc.result = chanOf(M("r"), M("q"));
      m["itef"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = {{"?r1", i}, {"?r2", i}, {"?p", s}};
      sc.params = {chanOf(M("r1"), M("p")), chanOf(M("r2"), M("p"))};
      sc.result = U;
      sc.props = {{C("<>", {M("r1"), M("r2")}), "role-mismatch"}};
      m["cut"] = {sc};
    }
    {
      Scheme sc;
      sc.params = {C("-o", {U, U})};
      sc.result = U;
      m["thread-create"] = {sc};
    }
    {
      Scheme sc;
      sc.metas = {{"?t", t}, {"?n", i}, {"?k", i}};
      sc.params = {C("arrref", {M("t"), M("n")}), C("int", {M("k")})};
      sc.result = M("t");
      sc.props = {{C(">=", {M("k"), sint(0)}), "index-out-of-bounds"},
                  {C("<", {M("k"), M("n")}), "index-out-of-bounds"}};
      m["sub"] = {sc};
    }

    auto intS = [&](const char* x) { return C("int", {M(x)}); };
    auto boolS = [&](const char* x) { return C("bool", {M(x)}); };
    SPtr intP = scst("int"), boolP = scst("bool");
    for (const char* op : {"+", "-", "*"}) {
      Scheme s1;
      s1.metas = {{"?a", i}, {"?b", i}};
      s1.params = {intS("a"), intS("b")};
      s1.result = C("int", {C(op, {M("a"), M("b")})});
      Scheme s2;
      s2.params = {intP, intP};
      s2.result = intP;
      m[op] = {s1, s2};
    }
    for (const char* op : {"<", "<=", ">", ">=", "<>"}) {
      Scheme s1;
      s1.metas = {{"?a", i}, {"?b", i}};
      s1.params = {intS("a"), intS("b")};
      s1.result = C("bool", {C(op, {M("a"), M("b")})});
      Scheme s2;
      s2.params = {intP, intP};
      s2.result = boolP;
      m[op] = {s1, s2};
    }
    {
      Scheme s1;
      s1.metas = {{"?a", i}, {"?b", i}};
      s1.params = {intS("a"), intS("b")};
      s1.result = C("bool", {C("=", {M("a"), M("b")})});
      Scheme s2;
      s2.metas = {{"?a", b}, {"?b", b}};
      s2.params = {boolS("a"), boolS("b")};
      s2.result = C("bool", {C("=", {M("a"), M("b")})});
      Scheme s3;
      s3.params = {intP, intP};
      s3.result = boolP;
      Scheme s4;
      s4.params = {boolP, boolP};
      s4.result = boolP;
      m["="] = {s1, s2, s3, s4};
    }
    for (const char* op : {"and", "or", "imp"}) {
      Scheme s1;
      s1.metas = {{"?a", b}, {"?b", b}};
      s1.params = {boolS("a"), boolS("b")};
      s1.result = C("bool", {C(op, {M("a"), M("b")})});
      Scheme s2;
      s2.params = {boolP, boolP};
      s2.result = boolP;
      m[op] = {s1, s2};
    }
    {
      Scheme s1;
      s1.metas = {{"?a", b}};
      s1.params = {boolS("a")};
      s1.result = C("bool", {C("not", {M("a")})});
      Scheme s2;
      s2.params = {boolP};
      s2.result = boolP;
      m["not"] = {s1, s2};
    }
    {
      Scheme s1;
      s1.metas = {{"?a", t}, {"?b", t}};
      s1.params = {C("times", {M("a"), M("b")})};
      s1.result = M("a");
      m["fst"] = {s1};
      s1.result = M("b");
      m["snd"] = {s1};
    }
    {
      Scheme sc;
      sc.params = {scst("string")};
      sc.result = U;
      m["print"] = {sc};
      sc.params = {intP};
      m["print-int"] = {sc};
      sc.params = {boolP};
      m["print-bool"] = {sc};
    }
    return m;
  }();
  return table;
}

bool match(const SPtr& pat, const SPtr& act, std::map<std::string, SPtr>& binds) {
  if (const auto* c = std::get_if<SCst>(&pat->node)) {
    if (is_meta_name(c->name) && c->args.empty()) {
      binds.emplace(c->name, act);  // re-occurrences validated by subtyping
      return true;
    }
    const auto* ca = std::get_if<SCst>(&act->node);
    if (!ca || ca->name != c->name || ca->args.size() != c->args.size()) return false;
    for (size_t i = 0; i < c->args.size(); ++i)
      if (!match(c->args[i], ca->args[i], binds)) return false;
    return true;
  }
  if (const auto* l = std::get_if<SLam>(&pat->node)) {
    const auto* la = std::get_if<SLam>(&act->node);
    return la && l->dom == la->dom && match(l->body, la->body, binds);
  }
  return alpha_equal(pat, act);
}

std::string show_arg_types(const std::vector<Typed>& acts) {
  std::string s;
  for (const auto& a : acts) s += (s.empty() ? "" : ", ") + show_static(a.type);
  return s;
}

}  // namespace

// ------------------------------------------------------------ application

namespace {

Typed apply_user_fun(const TypeEnv& env, const FunDef& f, const DConstApp& c, Span sp) {
  if (c.staticArgs.size() != f.staticParams.size())
    throw TypeError("static-arity", sp,
                    f.name + " expects " + std::to_string(f.staticParams.size()) +
                        " brace arguments, got " + std::to_string(c.staticArgs.size()));
  std::map<std::string, SPtr> inst;
  for (size_t i = 0; i < f.staticParams.size(); ++i) {
    const auto& sp_i = f.staticParams[i];
    Sort got = sort_of(env, c.staticArgs[i], sp);
    if (!sort_leq(got, sp_i.sort))
      throw TypeError("ill-sorted", sp,
                      "brace argument " + std::to_string(i + 1) + " of " + f.name + " has sort " +
                          got.show() + ", expected " + sp_i.sort.show());
    inst[sp_i.name] = norm(c.staticArgs[i]);
  }
  for (const auto& sp_i : f.staticParams)
    if (sp_i.prop)
      require_entailed(env, subst_consts(sp_i.prop, inst), "guard-not-entailed", sp,
                       "precondition of " + f.name);
  if (c.args.size() != f.params.size())
    throw TypeError("arity-mismatch", sp,
                    f.name + " expects " + std::to_string(f.params.size()) + " arguments, got " +
                        std::to_string(c.args.size()));
  Used used;
  for (size_t i = 0; i < c.args.size(); ++i)
    merge_used(used, check(env, c.args[i], norm(subst_consts(f.params[i].second, inst))), sp);
  return {norm(subst_consts(f.result, inst)), used};
}

// Channel argument decomposed to (role, protocol) or a typed error.
std::pair<SPtr, SPtr> chan_parts(const Typed& a, const char* op, Span sp) {
  if (const auto* c = cst(a.type, "chan", 2)) return {c->args[0], c->args[1]};
  throw TypeError("not-a-channel", sp,
                  std::string(op) + " needs a channel, got " + show_static(a.type));
}

Typed apply_op(const TypeEnv& env, const DConstApp& c, Span sp);

Typed synth_const(const TypeEnv& env, const DConstApp& c, Span sp) {
  // forms with their own static discipline
  if (c.name == "create") {
    // spawns the closure on the fresh channel's S side, returns the C side
    if (c.staticArgs.size() != 1 || c.args.size() != 1)
      throw TypeError("op-arg-mismatch", sp,
                      "create takes one brace protocol and one closure");
    SPtr p = norm(c.staticArgs[0]);
    Sort s = sort_of(env, p, sp);
    if (!(s == sort_stype()))
      throw TypeError("not-a-protocol", sp, "create needs an stype, got sort " + s.show());
    Used u = check(env, c.args[0],
                   scst("-o", {scst("chan", {sint(0), p}), scst("unit")}));
    return {scst("chan", {sint(1), p}), u};
  }
  if (c.name == "unify" || c.name == "exify") {
    bool uni = c.name == "unify";
    if (c.args.size() != 1 || c.staticArgs.size() != (uni ? 1u : 0u))
      throw TypeError("op-arg-mismatch", sp,
                      uni ? "unify takes a channel and one brace static"
                          : "exify takes one channel");
    Typed a = synth(env, c.args[0]);
    auto [role, proto] = chan_parts(a, c.name.c_str(), sp);
    SessionHead h = session_head(proto);
    if (h.kind != HeadKind::Quan)
      throw TypeError("wrong-protocol-state", sp,
                      c.name + " needs a quantifier protocol, channel is at " +
                          show_static(proto));
    const auto* lam = std::get_if<SLam>(&h.fn->node);
    SPtr rolesEq = scst("=", {role, h.role});
    if (uni) {
      require_entailed(env, rolesEq, "role-mismatch", sp, "unify on the deciding side");
      Sort got = sort_of(env, c.staticArgs[0], sp);
      if (!sort_leq(got, lam->dom))
        throw TypeError("ill-sorted", sp, "unify argument has sort " + got.show() +
                                              ", binder expects " + lam->dom.show());
      SPtr next = norm(sapp(h.fn, c.staticArgs[0]));
      return {scst("chan", {role, next}), a.used};
    }
    require_entailed(env, scst("not", {rolesEq}), "role-mismatch", sp,
                     "exify on the receiving side");
    SPtr body = scst("chan", {shift(role, 1), sapp(shift(h.fn, 1), svar(0, lam->hint))});
    return {norm(scst("exists", {slam(lam->hint, lam->dom, body)})), a.used};
  }
  if (c.name == "recurse") {
    if (c.args.size() != 1 || !c.staticArgs.empty())
      throw TypeError("op-arg-mismatch", sp, "recurse takes one channel");
    Typed a = synth(env, c.args[0]);
    auto [role, proto] = chan_parts(a, "recurse", sp);
    SessionHead h = session_head(proto);
    if (h.kind != HeadKind::Fix && h.kind != HeadKind::HoFix)
      throw TypeError("wrong-protocol-state", sp,
                      "recurse needs a recursive protocol, channel is at " + show_static(proto));
    return {scst("chan", {role, unfold_session(proto)}), a.used};
  }
  if (c.name == "arr") {
    if (c.args.empty() || !c.staticArgs.empty())
      throw TypeError("op-arg-mismatch", sp, "arr needs at least one element");
    Used used;
    Typed first = synth(env, c.args[0]);
    merge_used(used, first.used, sp);
    SPtr w = widen_singletons(first.type);
    if (is_linear_type(env, w))
      throw TypeError("array-of-linear", sp, "array elements must be unrestricted");
    for (size_t i = 1; i < c.args.size(); ++i) merge_used(used, check(env, c.args[i], w), sp);
    return {scst("arrref", {w, sint((long long)c.args.size())}), used};
  }
  if (env.prog) {
    if (const FunDef* f = env.prog->fun(c.name)) return apply_user_fun(env, *f, c, sp);
  }
  return apply_op(env, c, sp);
}

Typed apply_op(const TypeEnv& env, const DConstApp& c, Span sp) {
  const auto& tab = builtin_schemes();
  auto it = tab.find(c.name);
  if (it == tab.end()) throw TypeError("unknown-op", sp, c.name + " is not defined");
  if (!c.staticArgs.empty())
    throw TypeError("op-arg-mismatch", sp, c.name + " takes no brace arguments");
  const auto& schemes = it->second;
  bool multi = schemes.size() > 1;

  std::vector<std::optional<Typed>> acts(c.args.size());
  auto act = [&](size_t i) -> const Typed& {
    if (!acts[i]) acts[i] = synth(env, c.args[i]);
    return *acts[i];
  };

  for (const auto& sch : schemes) {
    if (sch.params.size() != c.args.size()) continue;
    std::map<std::string, SPtr> binds;
    Used used;
    std::vector<char> checked(c.args.size(), 0);
    bool ok = true;
    for (size_t i = 0; i < c.args.size() && ok; ++i) {
      SPtr seen = norm(subst_consts(sch.params[i], binds));
      if (!has_meta(seen) && !multi) {
        merge_used(used, check(env, c.args[i], seen), sp);
        checked[i] = 1;
      } else {
        // metas must bind by matching; meta-free params verify by the
        // subsumption pass below, so a singleton fits a plain overload
        ok = match(sch.params[i], act(i).type, binds) || !has_meta(seen);
      }
    }
    if (!ok) continue;
    for (const auto& [mn, msort] : sch.metas) {
      auto b = binds.find(mn);
      if (b == binds.end() || !sort_leq(sort_of(env, b->second, sp), msort)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (size_t i = 0; i < c.args.size() && ok; ++i)
      if (!checked[i]) ok = type_leq(env, act(i).type, norm(subst_consts(sch.params[i], binds)));
    if (!ok) continue;
    for (size_t i = 0; i < c.args.size(); ++i)
      if (!checked[i]) merge_used(used, act(i).used, sp);
    for (const auto& pr : sch.props)
      require_entailed(env, subst_consts(pr.prop, binds), pr.rule, sp, "applying " + c.name);
    return {norm(subst_consts(sch.result, binds)), used};
  }

  std::vector<Typed> shown;
  for (size_t i = 0; i < c.args.size(); ++i) shown.push_back(act(i));
  if (is_session_op(c.name) && c.name != "thread-create" && !shown.empty()) {
    if (cst(shown[0].type, "chan", 2))
      throw TypeError("wrong-protocol-state", sp,
                      c.name + " does not apply at " + show_static(shown[0].type));
    throw TypeError("not-a-channel", sp,
                    c.name + " needs a channel, got " + show_static(shown[0].type));
  }
  throw TypeError("op-arg-mismatch", sp,
                  c.name + " does not accept (" + show_arg_types(shown) + ")");
}

// ------------------------------------------------------------- binding

TypeEnv bind_var(const TypeEnv& env, const std::string& x, const SPtr& ty) {
  TypeEnv e2 = env;
  e2.vars[x] = {norm(ty), is_linear_type(env, ty)};
  return e2;
}

void finish_binder(const TypeEnv& inner, const std::string& x, Used& bodyUsed, Span sp) {
  const Binding& b = inner.vars.at(x);
  if (b.linear && !bodyUsed.count(x))
    throw TypeError("linear-unused", sp, x + " : " + show_static(b.type) + " is never consumed");
  bodyUsed.erase(x);
}

SPtr expect_ann(const TypeEnv& env, const std::optional<SPtr>& ann, Span sp, const char* what) {
  if (!ann) throw TypeError("needs-annotation", sp, std::string(what) + " cannot be inferred");
  SPtr ty = norm(*ann);
  Sort s = sort_of(env, ty, sp);
  if (!sort_leq(s, sort_vtype()))
    throw TypeError("ill-sorted", sp, std::string("annotation has sort ") + s.show());
  return ty;
}

bool singleton_bool(const SPtr& ty, SPtr* out) {
  if (const auto* c = cst(ty, "bool", 1)) {
    *out = c->args[0];
    return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------- synth

Typed synth(const TypeEnv& env, const DPtr& t) {
  Span sp = t->span;

  if (const auto* x = std::get_if<DVar>(&t->node)) {
    auto it = env.vars.find(x->name);
    if (it == env.vars.end())
      throw TypeError("unbound-var", sp, x->name + " is not in scope");
    Used u;
    if (it->second.linear) u.insert(x->name);
    return {it->second.type, u};
  }
  if (std::get_if<DUnit>(&t->node)) return {scst("unit"), {}};
  if (const auto* k = std::get_if<DIntLit>(&t->node)) return {scst("int", {sint(k->v)}), {}};
  if (const auto* k = std::get_if<DBoolLit>(&t->node)) return {scst("bool", {sbool(k->v)}), {}};
  if (std::get_if<DStrLit>(&t->node)) return {scst("string"), {}};

  if (const auto* l = std::get_if<DLam>(&t->node)) {
    SPtr dom = expect_ann(env, l->ann, sp, "the parameter of this function");
    TypeEnv e2 = bind_var(env, l->param, dom);
    Typed b = synth(e2, l->body);
    finish_binder(e2, l->param, b.used, sp);
    if (!l->linear && !b.used.empty())
      throw TypeError("linear-capture", sp,
                      "an unrestricted function captures " + *b.used.begin());
    return {scst(l->linear ? "-o" : "->", {dom, b.type}), b.used};
  }

  if (const auto* a = std::get_if<DApp>(&t->node)) {
    // a let binds the argument's synthesized type
    if (const auto* l = std::get_if<DLam>(&a->fn->node); l && !l->ann) {
      Typed rhs = synth(env, a->arg);
      TypeEnv e2 = bind_var(env, l->param, rhs.type);
      Typed b = synth(e2, l->body);
      finish_binder(e2, l->param, b.used, sp);
      merge_used(b.used, rhs.used, sp);
      return b;
    }
    Typed f = synth(env, a->fn);
    const SCst* arrow = cst(f.type, "->", 2);
    if (!arrow) arrow = cst(f.type, "-o", 2);
    if (!arrow)
      throw TypeError("not-a-function", sp, "cannot apply " + show_static(f.type));
    Used u = check(env, a->arg, arrow->args[0]);
    merge_used(u, f.used, sp);
    return {norm(arrow->args[1]), u};
  }

  if (const auto* p = std::get_if<DPair>(&t->node)) {
    Typed a = synth(env, p->fst);
    Typed b = synth(env, p->snd);
    merge_used(a.used, b.used, sp);
    bool lin = is_linear_type(env, a.type) || is_linear_type(env, b.type);
    return {scst(lin ? "tensor" : "times", {a.type, b.type}), a.used};
  }

  if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
    Typed rhs = synth(env, lp->rhs);
    const SCst* pr = cst(rhs.type, "times", 2);
    if (!pr) pr = cst(rhs.type, "tensor", 2);
    if (!pr)
      throw TypeError("not-a-pair", sp, "let-pair needs a pair, got " + show_static(rhs.type));
    TypeEnv e2 = bind_var(env, lp->x, pr->args[0]);
    e2 = bind_var(e2, lp->y, pr->args[1]);
    Typed b = synth(e2, lp->body);
    finish_binder(e2, lp->y, b.used, sp);
    finish_binder(e2, lp->x, b.used, sp);
    merge_used(b.used, rhs.used, sp);
    return b;
  }

  if (const auto* i = std::get_if<DIf>(&t->node)) {
    Typed c = synth(env, i->cond);
    if (!type_leq(env, c.type, scst("bool")))
      throw TypeError("not-a-bool", sp, "condition has type " + show_static(c.type));
    TypeEnv thenEnv = env, elseEnv = env;
    SPtr cs;
    if (singleton_bool(c.type, &cs)) {
      thenEnv.store.assume(cs);
      elseEnv.store.assume(scst("not", {cs}));
    }
    Typed a = synth(thenEnv, i->thenB);
    Typed b = synth(elseEnv, i->elseB);
    require_same_used(a.used, b.used, sp, "if branches");
    merge_used(a.used, c.used, sp);
    if (type_leq(env, a.type, b.type)) return {b.type, a.used};
    if (type_leq(env, b.type, a.type)) return {a.type, a.used};
    // divergent singletons still join at their base type
    SPtr wa = widen_singletons(a.type), wb = widen_singletons(b.type);
    if (alpha_equal(wa, wb)) return {wa, a.used};
    throw TypeError("branch-type-mismatch", sp,
                    show_static(a.type) + " vs " + show_static(b.type));
  }

  if (const auto* c = std::get_if<DConstApp>(&t->node)) return synth_const(env, *c, sp);

  // Proof introductions synthesize their weakest sound type: the premise
  // degrades to top and a packed value gets a constant family. Precision
  // comes from check mode; these rules keep reduction residues typable.
  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) {
    Typed b = synth(env, g->body);
    return {scst("guard", {sbool(true), b.type}), b.used};
  }
  if (const auto* g = std::get_if<DAssertIntro>(&t->node)) {
    Typed b = synth(env, g->body);
    return {scst("assert", {sbool(true), b.type}), b.used};
  }
  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) {
    if (!e->witness)
      throw TypeError("needs-annotation", sp, "a packed value needs its brace witness");
    Sort ws = sort_of(env, *e->witness, sp);
    Typed b = synth(env, e->body);
    // a named witness (atom or runtime meta) is abstracted out of the body
    // type so unpacking re-binds the dependency; anything else gets the
    // constant family, which the literal keeps concrete
    if (const auto* w = std::get_if<SCst>(&(*e->witness)->node); w && w->args.empty())
      return {scst("exists", {slam("a", ws, abstract_const(b.type, w->name))}), b.used};
    return {scst("exists", {slam("a", ws, shift(b.type, 1))}), b.used};
  }

  if (const auto* g = std::get_if<DGuardElim>(&t->node)) {
    Typed b = synth(env, g->body);
    const SCst* gu = cst(b.type, "guard", 2);
    if (!gu)
      throw TypeError("not-a-guard", sp, "guard-elim needs a guard, got " + show_static(b.type));
    require_entailed(env, gu->args[0], "guard-not-entailed", sp, "releasing a guarded value");
    return {norm(gu->args[1]), b.used};
  }

  if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
    Typed rhs = synth(env, la->rhs);
    const SCst* as = cst(rhs.type, "assert", 2);
    if (!as)
      throw TypeError("not-an-assert", sp,
                      "let-assert needs an assert, got " + show_static(rhs.type));
    TypeEnv e2 = env;
    e2.store.assume(norm(as->args[0]));
    e2 = bind_var(e2, la->x, as->args[1]);
    Typed b = synth(e2, la->body);
    finish_binder(e2, la->x, b.used, sp);
    merge_used(b.used, rhs.used, sp);
    return b;
  }

  if (const auto* f = std::get_if<DForallIntro>(&t->node)) {
    std::string a = fresh_atom(env, f->a);
    TypeEnv e2 = env;
    e2.store.declare(a, f->sort);
    DPtr body = a == f->a ? f->body : subst_statics(f->body, {{f->a, scst(a)}});
    Typed b = synth(e2, body);
    return {scst("forall", {slam(f->a, f->sort, abstract_const(b.type, a))}), b.used};
  }

  if (const auto* f = std::get_if<DForallElim>(&t->node)) {
    Typed b = synth(env, f->body);
    const SCst* fa = cst(b.type, "forall", 1);
    const SLam* lam = fa ? std::get_if<SLam>(&fa->args[0]->node) : nullptr;
    if (!lam)
      throw TypeError("not-a-forall", sp,
                      "instantiation needs a forall, got " + show_static(b.type));
    if (!f->arg) throw TypeError("needs-annotation", sp, "instantiation needs its brace static");
    Sort got = sort_of(env, *f->arg, sp);
    if (!sort_leq(got, lam->dom))
      throw TypeError("ill-sorted", sp,
                      "instantiation argument has sort " + got.show() + ", binder expects " +
                          lam->dom.show());
    return {norm(subst_top(lam->body, *f->arg)), b.used};
  }

  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    Typed rhs = synth(env, le->rhs);
    const SCst* ex = cst(rhs.type, "exists", 1);
    const SLam* lam = ex ? std::get_if<SLam>(&ex->args[0]->node) : nullptr;
    if (!lam)
      throw TypeError("not-an-exists", sp,
                      "let-exists needs an existential, got " + show_static(rhs.type));
    std::string a = fresh_atom(env, le->a);
    TypeEnv e2 = env;
    e2.store.declare(a, lam->dom);
    e2 = bind_var(e2, le->x, norm(subst_top(lam->body, scst(a))));
    DPtr body = a == le->a ? le->body : subst_statics(le->body, {{le->a, scst(a)}});
    Typed b = synth(e2, body);
    finish_binder(e2, le->x, b.used, sp);
    if (occurs_const(b.type, a))
      throw TypeError("existential-escape", sp,
                      le->a + " escapes through the result type " + show_static(b.type));
    merge_used(b.used, rhs.used, sp);
    return b;
  }

  if (const auto* ep = std::get_if<DEndpoint>(&t->node)) {
    SPtr ty = env.endpointType ? env.endpointType(ep->chan, ep->role) : nullptr;
    if (!ty)
      throw TypeError("stray-endpoint", sp,
                      "endpoint " + std::to_string(ep->chan) + "." +
                          std::to_string(ep->role) + " has no live channel");
    Used u{"%ep:" + std::to_string(ep->chan) + ":" + std::to_string(ep->role)};
    return {norm(ty), u};
  }

  const auto& av = std::get<DArrVal>(t->node);
  if (av.elems.empty()) throw TypeError("op-arg-mismatch", sp, "empty array value");
  Typed first = synth(env, av.elems[0]);
  SPtr w = first.type;
  if (cst(w, "int", 1)) w = scst("int");
  if (cst(w, "bool", 1)) w = scst("bool");
  Used used = first.used;
  for (size_t i = 1; i < av.elems.size(); ++i) merge_used(used, check(env, av.elems[i], w), sp);
  return {scst("arrref", {w, sint((long long)av.elems.size())}), used};
}

// ---------------------------------------------------------------- check

Used check(const TypeEnv& env, const DPtr& t, const SPtr& expected0) {
  Span sp = t->span;
  SPtr expected = norm(expected0);

  if (const auto* l = std::get_if<DLam>(&t->node)) {
    const SCst* arrow = cst(expected, "->", 2);
    bool linArrow = false;
    if (!arrow) {
      arrow = cst(expected, "-o", 2);
      linArrow = arrow != nullptr;
    }
    if (!arrow)
      throw TypeError("type-mismatch", sp,
                      "a function does not have type " + show_static(expected));
    if (l->linear && !linArrow)
      throw TypeError("type-mismatch", sp,
                      "a linear function cannot be used at " + show_static(expected));
    SPtr dom = norm(arrow->args[0]);
    if (l->ann) {
      SPtr ann = expect_ann(env, l->ann, sp, "the parameter");
      if (!type_leq(env, dom, ann))
        throw TypeError("type-mismatch", sp,
                        "parameter annotation " + show_static(ann) +
                            " does not accept the domain " + show_static(dom));
      dom = ann;
    }
    TypeEnv e2 = bind_var(env, l->param, dom);
    Used u = check(e2, l->body, arrow->args[1]);
    finish_binder(e2, l->param, u, sp);
    if (!l->linear && !u.empty())
      throw TypeError("linear-capture", sp,
                      "an unrestricted function captures " + *u.begin());
    return u;
  }

  if (const auto* a = std::get_if<DApp>(&t->node)) {
    if (const auto* l = std::get_if<DLam>(&a->fn->node); l && !l->ann) {
      Typed rhs = synth(env, a->arg);
      TypeEnv e2 = bind_var(env, l->param, rhs.type);
      Used u = check(e2, l->body, expected);
      finish_binder(e2, l->param, u, sp);
      merge_used(u, rhs.used, sp);
      return u;
    }
  }

  if (const auto* p = std::get_if<DPair>(&t->node)) {
    const SCst* pr = cst(expected, "times", 2);
    if (!pr) pr = cst(expected, "tensor", 2);
    if (pr) {
      Used u = check(env, p->fst, pr->args[0]);
      merge_used(u, check(env, p->snd, pr->args[1]), sp);
      return u;
    }
  }

  if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
    Typed rhs = synth(env, lp->rhs);
    const SCst* pr = cst(rhs.type, "times", 2);
    if (!pr) pr = cst(rhs.type, "tensor", 2);
    if (!pr)
      throw TypeError("not-a-pair", sp, "let-pair needs a pair, got " + show_static(rhs.type));
    TypeEnv e2 = bind_var(env, lp->x, pr->args[0]);
    e2 = bind_var(e2, lp->y, pr->args[1]);
    Used u = check(e2, lp->body, expected);
    finish_binder(e2, lp->y, u, sp);
    finish_binder(e2, lp->x, u, sp);
    merge_used(u, rhs.used, sp);
    return u;
  }

  if (const auto* i = std::get_if<DIf>(&t->node)) {
    Typed c = synth(env, i->cond);
    if (!type_leq(env, c.type, scst("bool")))
      throw TypeError("not-a-bool", sp, "condition has type " + show_static(c.type));
    TypeEnv thenEnv = env, elseEnv = env;
    SPtr cs;
    if (singleton_bool(c.type, &cs)) {
      thenEnv.store.assume(cs);
      elseEnv.store.assume(scst("not", {cs}));
    }
    Used a = check(thenEnv, i->thenB, expected);
    Used b = check(elseEnv, i->elseB, expected);
    require_same_used(a, b, sp, "if branches");
    merge_used(a, c.used, sp);
    return a;
  }

  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) {
    const SCst* gu = cst(expected, "guard", 2);
    if (!gu)
      throw TypeError("type-mismatch", sp,
                      "guard-intro does not produce " + show_static(expected));
    TypeEnv e2 = env;
    e2.store.assume(norm(gu->args[0]));
    return check(e2, g->body, gu->args[1]);
  }

  if (const auto* g = std::get_if<DAssertIntro>(&t->node)) {
    const SCst* as = cst(expected, "assert", 2);
    if (!as)
      throw TypeError("type-mismatch", sp,
                      "assert-intro does not produce " + show_static(expected));
    require_entailed(env, as->args[0], "assert-not-entailed", sp, "introducing an assertion");
    return check(env, g->body, as->args[1]);
  }

  if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
    Typed rhs = synth(env, la->rhs);
    const SCst* as = cst(rhs.type, "assert", 2);
    if (!as)
      throw TypeError("not-an-assert", sp,
                      "let-assert needs an assert, got " + show_static(rhs.type));
    TypeEnv e2 = env;
    e2.store.assume(norm(as->args[0]));
    e2 = bind_var(e2, la->x, as->args[1]);
    Used u = check(e2, la->body, expected);
    finish_binder(e2, la->x, u, sp);
    merge_used(u, rhs.used, sp);
    return u;
  }

  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) {
    const SCst* ex = cst(expected, "exists", 1);
    const SLam* lam = ex ? std::get_if<SLam>(&ex->args[0]->node) : nullptr;
    if (!lam)
      throw TypeError("type-mismatch", sp,
                      "a packed value does not have type " + show_static(expected));
    if (!e->witness)
      throw TypeError("needs-annotation", sp, "a packed value needs its brace witness");
    Sort got = sort_of(env, *e->witness, sp);
    if (!sort_leq(got, lam->dom))
      throw TypeError("ill-sorted", sp, "witness has sort " + got.show() +
                                            ", binder expects " + lam->dom.show());
    return check(env, e->body, norm(subst_top(lam->body, *e->witness)));
  }

  if (const auto* f = std::get_if<DForallIntro>(&t->node)) {
    const SCst* fa = cst(expected, "forall", 1);
    const SLam* lam = fa ? std::get_if<SLam>(&fa->args[0]->node) : nullptr;
    if (!lam)
      throw TypeError("type-mismatch", sp,
                      "a static abstraction does not have type " + show_static(expected));
    if (!(f->sort == lam->dom))
      throw TypeError("type-mismatch", sp, "binder sort " + f->sort.show() +
                                               " differs from " + lam->dom.show());
    std::string a = fresh_atom(env, f->a);
    TypeEnv e2 = env;
    e2.store.declare(a, f->sort);
    DPtr body = a == f->a ? f->body : subst_statics(f->body, {{f->a, scst(a)}});
    return check(e2, body, norm(subst_top(lam->body, scst(a))));
  }

  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    Typed rhs = synth(env, le->rhs);
    const SCst* ex = cst(rhs.type, "exists", 1);
    const SLam* lam = ex ? std::get_if<SLam>(&ex->args[0]->node) : nullptr;
    if (!lam)
      throw TypeError("not-an-exists", sp,
                      "let-exists needs an existential, got " + show_static(rhs.type));
    std::string a = fresh_atom(env, le->a);
    TypeEnv e2 = env;
    e2.store.declare(a, lam->dom);
    e2 = bind_var(e2, le->x, norm(subst_top(lam->body, scst(a))));
    DPtr body = a == le->a ? le->body : subst_statics(le->body, {{le->a, scst(a)}});
    Used u = check(e2, body, expected);
    finish_binder(e2, le->x, u, sp);
    if (occurs_const(expected, a))
      throw TypeError("existential-escape", sp, le->a + " escapes into the expected type");
    merge_used(u, rhs.used, sp);
    return u;
  }

  Typed s = synth(env, t);
  if (!type_leq(env, s.type, expected))
    throw TypeError("type-mismatch", sp,
                    "found " + show_static(s.type) + ", expected " + show_static(expected));
  return s.used;
}

// ------------------------------------------------------------- programs

void check_program(const Program& prog) {
  // protocols sort with their parameters held abstract
  for (const auto& d : prog.stypes) {
    TypeEnv env;
    std::vector<SPtr> args;
    for (const auto& [n, s] : d.params) {
      env.store.declare(n, s);
      args.push_back(scst(n));
    }
    try {
      SPtr ref = stype_ref(d, args);
      Sort s = sort_of(env, ref);
      if (!(s == sort_stype()))
        throw TypeError("not-a-protocol", {}, d.name + " has sort " + s.show());
    } catch (const SortError& e) {
      throw TypeError("ill-sorted", {}, "protocol " + d.name + ": " + e.what());
    }
  }

  for (const auto& f : prog.funs) {
    TypeEnv env;
    env.prog = &prog;
    for (const auto& sp_i : f.staticParams) {
      if (env.store.vars.count(sp_i.name))
        throw TypeError("duplicate-static-param", f.span, sp_i.name + " in " + f.name);
      env.store.declare(sp_i.name, sp_i.sort);
    }
    for (const auto& sp_i : f.staticParams) {
      if (!sp_i.prop) continue;
      Sort s = sort_of(env, sp_i.prop, f.span);
      if (!(s == sort_bool()))
        throw TypeError("ill-sorted", f.span,
                        "precondition of " + f.name + " has sort " + s.show());
      env.store.assume(norm(sp_i.prop));
    }
    std::vector<std::string> linParams;
    for (const auto& [x, ty] : f.params) {
      Sort s = sort_of(env, ty, f.span);
      if (!sort_leq(s, sort_vtype()))
        throw TypeError("ill-sorted", f.span, "parameter " + x + " of " + f.name +
                                                  " has sort " + s.show());
      if (env.vars.count(x))
        throw TypeError("duplicate-param", f.span, x + " in " + f.name);
      env = bind_var(env, x, ty);
      if (env.vars.at(x).linear) linParams.push_back(x);
    }
    Sort rs = sort_of(env, f.result, f.span);
    if (!sort_leq(rs, sort_vtype()))
      throw TypeError("ill-sorted", f.span, "result of " + f.name + " has sort " + rs.show());

    Used u = check(env, f.body, f.result);
    for (const auto& x : linParams)
      if (!u.count(x))
        throw TypeError("linear-unused", f.span, x + " is never consumed in " + f.name);
  }

  if (prog.main) {
    TypeEnv env;
    env.prog = &prog;
    Typed m = synth(env, prog.main);
    if (is_linear_type(env, m.type))
      throw TypeError("main-leaks", prog.mainSpan,
                      "main ends with the linear type " + show_static(m.type));
  }
}

}  // namespace sessc
