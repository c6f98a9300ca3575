#include "sessc/terms.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace sessc {

DPtr mkdyn(Dyn d) { return std::make_shared<const Dyn>(std::move(d)); }

DPtr dvar(std::string n, Span s) { return mk(DVar{std::move(n)}, s); }
DPtr dunit(Span s) { return mk(DUnit{}, s); }
DPtr dint(long long v, Span s) { return mk(DIntLit{v}, s); }
DPtr dbool(bool v, Span s) { return mk(DBoolLit{v}, s); }
DPtr dstr(std::string v, Span s) { return mk(DStrLit{std::move(v)}, s); }
DPtr dapp(DPtr f, DPtr a, Span s) { return mk(DApp{std::move(f), std::move(a)}, s); }
DPtr dlet(std::string x, DPtr rhs, DPtr body, Span s) {
  return dapp(mk(DLam{std::move(x), std::nullopt, false, std::move(body)}, s), std::move(rhs), s);
}
DPtr dconst(std::string name, std::vector<SPtr> staticArgs, std::vector<DPtr> args, Span s) {
  return mk(DConstApp{std::move(name), std::move(staticArgs), std::move(args)}, s);
}
DPtr dendpoint(int chan, int role) { return mk(DEndpoint{chan, role}); }

bool is_session_op(const std::string& n) {
  static const std::set<std::string> ops{"create", "send",  "recv", "close",
                                         "wait",   "offer", "choose", "cut",
                                         "thread-create"};
  return ops.count(n) > 0 || is_proof_op(n);
}
bool is_proof_op(const std::string& n) {
  static const std::set<std::string> ops{"unify", "exify", "itet", "itef", "recurse"};
  return ops.count(n) > 0;
}
bool is_primitive(const std::string& n) {
  static const std::set<std::string> ops{"+",   "-",   "*",   "=",        "<>",        "<",
                                         "<=",  ">",   ">=",  "and",      "or",        "not",
                                         "imp", "fst", "snd", "print",    "print-int", "print-bool",
                                         "arr", "sub"};
  return ops.count(n) > 0;
}

bool is_value(const DPtr& t) {
  if (std::get_if<DUnit>(&t->node) || std::get_if<DIntLit>(&t->node) ||
      std::get_if<DBoolLit>(&t->node) || std::get_if<DStrLit>(&t->node) ||
      std::get_if<DLam>(&t->node) || std::get_if<DEndpoint>(&t->node) ||
      std::get_if<DArrVal>(&t->node))
    return true;
  if (const auto* p = std::get_if<DPair>(&t->node)) return is_value(p->fst) && is_value(p->snd);
  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) return is_value(g->body);
  if (const auto* a = std::get_if<DAssertIntro>(&t->node)) return is_value(a->body);
  if (std::get_if<DForallIntro>(&t->node)) return true;  // body delays
  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) return is_value(e->body);
  return false;
}

// ---------------------------------------------------------------- traversal

void free_vars(const DPtr& t, std::vector<std::string>& out) {
  struct V {
    std::vector<std::string> bound;
    std::vector<std::string>& out;
    void add(const std::string& n) {
      if (std::find(bound.begin(), bound.end(), n) == bound.end() &&
          std::find(out.begin(), out.end(), n) == out.end())
        out.push_back(n);
    }
    void go(const DPtr& t) {
      if (const auto* x = std::get_if<DVar>(&t->node)) return add(x->name);
      if (const auto* l = std::get_if<DLam>(&t->node)) {
        bound.push_back(l->param);
        go(l->body);
        bound.pop_back();
        return;
      }
      if (const auto* a = std::get_if<DApp>(&t->node)) {
        go(a->fn);
        go(a->arg);
        return;
      }
      if (const auto* p = std::get_if<DPair>(&t->node)) {
        go(p->fst);
        go(p->snd);
        return;
      }
      if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
        go(lp->rhs);
        bound.push_back(lp->x);
        bound.push_back(lp->y);
        go(lp->body);
        bound.pop_back();
        bound.pop_back();
        return;
      }
      if (const auto* i = std::get_if<DIf>(&t->node)) {
        go(i->cond);
        go(i->thenB);
        go(i->elseB);
        return;
      }
      if (const auto* c = std::get_if<DConstApp>(&t->node)) {
        for (const auto& a2 : c->args) go(a2);
        return;
      }
      if (const auto* g = std::get_if<DGuardIntro>(&t->node)) return go(g->body);
      if (const auto* g = std::get_if<DGuardElim>(&t->node)) return go(g->body);
      if (const auto* g = std::get_if<DAssertIntro>(&t->node)) return go(g->body);
      if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
        go(la->rhs);
        bound.push_back(la->x);
        go(la->body);
        bound.pop_back();
        return;
      }
      if (const auto* f = std::get_if<DForallIntro>(&t->node)) return go(f->body);
      if (const auto* f = std::get_if<DForallElim>(&t->node)) return go(f->body);
      if (const auto* e = std::get_if<DExistsIntro>(&t->node)) return go(e->body);
      if (const auto* le = std::get_if<DLetExists>(&t->node)) {
        go(le->rhs);
        bound.push_back(le->x);
        go(le->body);
        bound.pop_back();
        return;
      }
    }
  };
  V v{{}, out};
  v.go(t);
}

DPtr subst_var(const DPtr& t, const std::string& name, const DPtr& v) {
  if (const auto* x = std::get_if<DVar>(&t->node)) return x->name == name ? v : t;
  if (std::get_if<DUnit>(&t->node) || std::get_if<DIntLit>(&t->node) ||
      std::get_if<DBoolLit>(&t->node) || std::get_if<DStrLit>(&t->node) ||
      std::get_if<DEndpoint>(&t->node))
    return t;
  if (const auto* l = std::get_if<DLam>(&t->node)) {
    if (l->param == name) return t;
    return mk(DLam{l->param, l->ann, l->linear, subst_var(l->body, name, v)}, t->span);
  }
  if (const auto* a = std::get_if<DApp>(&t->node))
    return mk(DApp{subst_var(a->fn, name, v), subst_var(a->arg, name, v)}, t->span);
  if (const auto* p = std::get_if<DPair>(&t->node))
    return mk(DPair{subst_var(p->fst, name, v), subst_var(p->snd, name, v)}, t->span);
  if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
    DPtr rhs = subst_var(lp->rhs, name, v);
    DPtr body = (lp->x == name || lp->y == name) ? lp->body : subst_var(lp->body, name, v);
    return mk(DLetPair{lp->x, lp->y, rhs, body}, t->span);
  }
  if (const auto* i = std::get_if<DIf>(&t->node))
    return mk(DIf{subst_var(i->cond, name, v), subst_var(i->thenB, name, v),
                  subst_var(i->elseB, name, v)},
              t->span);
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    std::vector<DPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(subst_var(a, name, v));
    return mk(DConstApp{c->name, c->staticArgs, std::move(args)}, t->span);
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node))
    return mk(DGuardIntro{subst_var(g->body, name, v)}, t->span);
  if (const auto* g = std::get_if<DGuardElim>(&t->node))
    return mk(DGuardElim{subst_var(g->body, name, v)}, t->span);
  if (const auto* g = std::get_if<DAssertIntro>(&t->node))
    return mk(DAssertIntro{subst_var(g->body, name, v)}, t->span);
  if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
    DPtr rhs = subst_var(la->rhs, name, v);
    DPtr body = la->x == name ? la->body : subst_var(la->body, name, v);
    return mk(DLetAssert{la->x, rhs, body}, t->span);
  }
  if (const auto* f = std::get_if<DForallIntro>(&t->node))
    return mk(DForallIntro{f->a, f->sort, subst_var(f->body, name, v)}, t->span);
  if (const auto* f = std::get_if<DForallElim>(&t->node))
    return mk(DForallElim{subst_var(f->body, name, v), f->arg}, t->span);
  if (const auto* e = std::get_if<DExistsIntro>(&t->node))
    return mk(DExistsIntro{e->witness, subst_var(e->body, name, v)}, t->span);
  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    DPtr rhs = subst_var(le->rhs, name, v);
    DPtr body = le->x == name ? le->body : subst_var(le->body, name, v);
    return mk(DLetExists{le->a, le->x, rhs, body}, t->span);
  }
  const auto& av = std::get<DArrVal>(t->node);
  std::vector<DPtr> elems;
  elems.reserve(av.elems.size());
  for (const auto& e : av.elems) elems.push_back(subst_var(e, name, v));
  return mk(DArrVal{std::move(elems)}, t->span);
}

DPtr subst_statics(const DPtr& t, const std::map<std::string, SPtr>& m) {
  if (m.empty()) return t;
  auto subS = [&m](const SPtr& s) { return subst_consts(s, m); };
  auto subOpt = [&](const std::optional<SPtr>& s) -> std::optional<SPtr> {
    if (!s) return std::nullopt;
    return subS(*s);
  };
  auto without = [&m](const std::string& n) {
    std::map<std::string, SPtr> m2 = m;
    m2.erase(n);
    return m2;
  };
  if (std::get_if<DVar>(&t->node) || std::get_if<DUnit>(&t->node) ||
      std::get_if<DIntLit>(&t->node) || std::get_if<DBoolLit>(&t->node) ||
      std::get_if<DStrLit>(&t->node) || std::get_if<DEndpoint>(&t->node))
    return t;
  if (const auto* l = std::get_if<DLam>(&t->node))
    return mk(DLam{l->param, subOpt(l->ann), l->linear, subst_statics(l->body, m)}, t->span);
  if (const auto* a = std::get_if<DApp>(&t->node))
    return mk(DApp{subst_statics(a->fn, m), subst_statics(a->arg, m)}, t->span);
  if (const auto* p = std::get_if<DPair>(&t->node))
    return mk(DPair{subst_statics(p->fst, m), subst_statics(p->snd, m)}, t->span);
  if (const auto* lp = std::get_if<DLetPair>(&t->node))
    return mk(DLetPair{lp->x, lp->y, subst_statics(lp->rhs, m), subst_statics(lp->body, m)},
              t->span);
  if (const auto* i = std::get_if<DIf>(&t->node))
    return mk(DIf{subst_statics(i->cond, m), subst_statics(i->thenB, m),
                  subst_statics(i->elseB, m)},
              t->span);
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    std::vector<SPtr> ss;
    ss.reserve(c->staticArgs.size());
    for (const auto& s : c->staticArgs) ss.push_back(subS(s));
    std::vector<DPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(subst_statics(a, m));
    return mk(DConstApp{c->name, std::move(ss), std::move(args)}, t->span);
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node))
    return mk(DGuardIntro{subst_statics(g->body, m)}, t->span);
  if (const auto* g = std::get_if<DGuardElim>(&t->node))
    return mk(DGuardElim{subst_statics(g->body, m)}, t->span);
  if (const auto* g = std::get_if<DAssertIntro>(&t->node))
    return mk(DAssertIntro{subst_statics(g->body, m)}, t->span);
  if (const auto* la = std::get_if<DLetAssert>(&t->node))
    return mk(DLetAssert{la->x, subst_statics(la->rhs, m), subst_statics(la->body, m)}, t->span);
  if (const auto* f = std::get_if<DForallIntro>(&t->node)) {
    auto m2 = without(f->a);
    return mk(DForallIntro{f->a, f->sort, subst_statics(f->body, m2)}, t->span);
  }
  if (const auto* f = std::get_if<DForallElim>(&t->node))
    return mk(DForallElim{subst_statics(f->body, m), subOpt(f->arg)}, t->span);
  if (const auto* e = std::get_if<DExistsIntro>(&t->node))
    return mk(DExistsIntro{subOpt(e->witness), subst_statics(e->body, m)}, t->span);
  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    auto m2 = without(le->a);
    return mk(DLetExists{le->a, le->x, subst_statics(le->rhs, m), subst_statics(le->body, m2)},
              t->span);
  }
  const auto& av = std::get<DArrVal>(t->node);
  std::vector<DPtr> elems;
  elems.reserve(av.elems.size());
  for (const auto& e : av.elems) elems.push_back(subst_statics(e, m));
  return mk(DArrVal{std::move(elems)}, t->span);
}

void collect_endpoints(const DPtr& t, std::map<std::pair<int, int>, int>& out) {
  if (const auto* ep = std::get_if<DEndpoint>(&t->node)) {
    out[{ep->chan, ep->role}]++;
    return;
  }
  if (const auto* l = std::get_if<DLam>(&t->node)) return collect_endpoints(l->body, out);
  if (const auto* a = std::get_if<DApp>(&t->node)) {
    collect_endpoints(a->fn, out);
    collect_endpoints(a->arg, out);
    return;
  }
  if (const auto* p = std::get_if<DPair>(&t->node)) {
    collect_endpoints(p->fst, out);
    collect_endpoints(p->snd, out);
    return;
  }
  if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
    collect_endpoints(lp->rhs, out);
    collect_endpoints(lp->body, out);
    return;
  }
  if (const auto* i = std::get_if<DIf>(&t->node)) {
    collect_endpoints(i->cond, out);
    // one branch runs; linearity makes both consume the same endpoints, so
    // merge them by maximum rather than double-counting
    std::map<std::pair<int, int>, int> thn, els;
    collect_endpoints(i->thenB, thn);
    collect_endpoints(i->elseB, els);
    for (const auto& [k, n] : els) {
      auto it = thn.find(k);
      if (it == thn.end())
        thn[k] = n;
      else
        it->second = std::max(it->second, n);
    }
    for (const auto& [k, n] : thn) out[k] += n;
    return;
  }
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    for (const auto& a : c->args) collect_endpoints(a, out);
    return;
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) return collect_endpoints(g->body, out);
  if (const auto* g = std::get_if<DGuardElim>(&t->node)) return collect_endpoints(g->body, out);
  if (const auto* g = std::get_if<DAssertIntro>(&t->node)) return collect_endpoints(g->body, out);
  if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
    collect_endpoints(la->rhs, out);
    collect_endpoints(la->body, out);
    return;
  }
  if (const auto* f = std::get_if<DForallIntro>(&t->node)) return collect_endpoints(f->body, out);
  if (const auto* f = std::get_if<DForallElim>(&t->node)) return collect_endpoints(f->body, out);
  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) return collect_endpoints(e->body, out);
  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    collect_endpoints(le->rhs, out);
    collect_endpoints(le->body, out);
    return;
  }
  if (const auto* av = std::get_if<DArrVal>(&t->node))
    for (const auto& e : av->elems) collect_endpoints(e, out);
}

// ---------------------------------------------------------------- decompose

namespace {

Decomp value_decomp() { return Decomp{DecompKind::Value, nullptr, nullptr, ""}; }

Decomp here(DecompKind k, const DPtr& t, std::string why = "") {
  return Decomp{k, t, [](DPtr r) { return r; }, std::move(why)};
}

Decomp under(Decomp d, std::function<DPtr(DPtr)> wrap) {
  auto inner = std::move(d.plug);
  d.plug = [inner, wrap](DPtr r) { return wrap(inner(r)); };
  return d;
}

}  // namespace

Decomp decompose(const DPtr& t) {
  if (is_value(t)) return value_decomp();

  if (std::get_if<DVar>(&t->node))
    return here(DecompKind::Stuck, t, "unbound variable " + std::get<DVar>(t->node).name);

  if (const auto* a = std::get_if<DApp>(&t->node)) {
    if (!is_value(a->fn)) {
      DPtr arg = a->arg;
      Span sp = t->span;
      return under(decompose(a->fn), [arg, sp](DPtr r) { return mk(DApp{r, arg}, sp); });
    }
    if (!is_value(a->arg)) {
      DPtr fn = a->fn;
      Span sp = t->span;
      return under(decompose(a->arg), [fn, sp](DPtr r) { return mk(DApp{fn, r}, sp); });
    }
    if (std::get_if<DLam>(&a->fn->node)) return here(DecompKind::Local, t);
    return here(DecompKind::Stuck, t, "application of a non-function");
  }
  if (const auto* p = std::get_if<DPair>(&t->node)) {
    Span sp = t->span;
    if (!is_value(p->fst)) {
      DPtr snd = p->snd;
      return under(decompose(p->fst), [snd, sp](DPtr r) { return mk(DPair{r, snd}, sp); });
    }
    DPtr fst = p->fst;
    return under(decompose(p->snd), [fst, sp](DPtr r) { return mk(DPair{fst, r}, sp); });
  }
  if (const auto* lp = std::get_if<DLetPair>(&t->node)) {
    if (!is_value(lp->rhs)) {
      DLetPair cp = *lp;
      Span sp = t->span;
      return under(decompose(lp->rhs), [cp, sp](DPtr r) {
        return mk(DLetPair{cp.x, cp.y, r, cp.body}, sp);
      });
    }
    if (std::get_if<DPair>(&lp->rhs->node)) return here(DecompKind::Local, t);
    return here(DecompKind::Stuck, t, "let-pair on a non-pair");
  }
  if (const auto* i = std::get_if<DIf>(&t->node)) {
    if (!is_value(i->cond)) {
      DIf cp = *i;
      Span sp = t->span;
      return under(decompose(i->cond), [cp, sp](DPtr r) {
        return mk(DIf{r, cp.thenB, cp.elseB}, sp);
      });
    }
    if (std::get_if<DBoolLit>(&i->cond->node)) return here(DecompKind::Local, t);
    return here(DecompKind::Stuck, t, "if on a non-boolean");
  }
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    for (size_t k = 0; k < c->args.size(); ++k) {
      if (!is_value(c->args[k])) {
        DConstApp cp = *c;
        Span sp = t->span;
        return under(decompose(c->args[k]), [cp, k, sp](DPtr r) {
          DConstApp cc = cp;
          cc.args[k] = r;
          return mk(std::move(cc), sp);
        });
      }
    }
    if (is_session_op(c->name)) return here(DecompKind::Session, t);
    return here(DecompKind::Local, t);
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) {
    Span sp = t->span;
    return under(decompose(g->body), [sp](DPtr r) { return mk(DGuardIntro{r}, sp); });
  }
  if (const auto* g = std::get_if<DGuardElim>(&t->node)) {
    if (!is_value(g->body)) {
      Span sp = t->span;
      return under(decompose(g->body), [sp](DPtr r) { return mk(DGuardElim{r}, sp); });
    }
    return here(DecompKind::Local, t);
  }
  if (const auto* g = std::get_if<DAssertIntro>(&t->node)) {
    Span sp = t->span;
    return under(decompose(g->body), [sp](DPtr r) { return mk(DAssertIntro{r}, sp); });
  }
  if (const auto* la = std::get_if<DLetAssert>(&t->node)) {
    if (!is_value(la->rhs)) {
      DLetAssert cp = *la;
      Span sp = t->span;
      return under(decompose(la->rhs), [cp, sp](DPtr r) {
        return mk(DLetAssert{cp.x, r, cp.body}, sp);
      });
    }
    return here(DecompKind::Local, t);
  }
  // static abstraction delays its body; evaluation resumes after instantiation
  if (const auto* f = std::get_if<DForallElim>(&t->node)) {
    if (!is_value(f->body)) {
      DForallElim cp = *f;
      Span sp = t->span;
      return under(decompose(f->body), [cp, sp](DPtr r) {
        return mk(DForallElim{r, cp.arg}, sp);
      });
    }
    return here(DecompKind::Local, t);
  }
  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) {
    DExistsIntro cp = *e;
    Span sp = t->span;
    return under(decompose(e->body), [cp, sp](DPtr r) {
      return mk(DExistsIntro{cp.witness, r}, sp);
    });
  }
  if (const auto* le = std::get_if<DLetExists>(&t->node)) {
    if (!is_value(le->rhs)) {
      DLetExists cp = *le;
      Span sp = t->span;
      return under(decompose(le->rhs), [cp, sp](DPtr r) {
        return mk(DLetExists{cp.a, cp.x, r, cp.body}, sp);
      });
    }
    return here(DecompKind::Local, t);
  }
  return here(DecompKind::Stuck, t, "unrecognized term shape");
}

// ---------------------------------------------------------------- local steps

namespace {

std::optional<long long> as_int(const DPtr& t) {
  if (const auto* k = std::get_if<DIntLit>(&t->node)) return k->v;
  return std::nullopt;
}
std::optional<bool> as_bool(const DPtr& t) {
  if (const auto* k = std::get_if<DBoolLit>(&t->node)) return k->v;
  return std::nullopt;
}

std::optional<DPtr> delta(const DConstApp& c, std::vector<std::string>* output) {
  const std::string& n = c.name;
  if (c.args.size() == 2) {
    auto a = as_int(c.args[0]), b = as_int(c.args[1]);
    if (a && b) {
      if (n == "+") return dint(*a + *b);
      if (n == "-") return dint(*a - *b);
      if (n == "*") return dint(*a * *b);
      if (n == "=") return dbool(*a == *b);
      if (n == "<>") return dbool(*a != *b);
      if (n == "<") return dbool(*a < *b);
      if (n == "<=") return dbool(*a <= *b);
      if (n == ">") return dbool(*a > *b);
      if (n == ">=") return dbool(*a >= *b);
    }
    auto p = as_bool(c.args[0]), q = as_bool(c.args[1]);
    if (p && q) {
      if (n == "and") return dbool(*p && *q);
      if (n == "or") return dbool(*p || *q);
      if (n == "imp") return dbool(!*p || *q);
      if (n == "=") return dbool(*p == *q);
    }
    if (n == "sub") {
      const auto* arr = std::get_if<DArrVal>(&c.args[0]->node);
      auto i = as_int(c.args[1]);
      if (arr && i) {
        if (*i < 0 || *i >= (long long)arr->elems.size())
          throw StuckTerm("array index " + std::to_string(*i) + " out of bounds");
        return arr->elems[(size_t)*i];
      }
    }
  }
  if (c.args.size() == 1) {
    if (n == "not") {
      if (auto p = as_bool(c.args[0])) return dbool(!*p);
    }
    if (n == "fst" || n == "snd") {
      if (const auto* p = std::get_if<DPair>(&c.args[0]->node))
        return n == "fst" ? p->fst : p->snd;
    }
    if (n == "print" || n == "print-int" || n == "print-bool") {
      std::string line;
      if (const auto* sv = std::get_if<DStrLit>(&c.args[0]->node)) line = sv->v;
      else if (auto i = as_int(c.args[0])) line = std::to_string(*i);
      else if (auto b = as_bool(c.args[0])) line = *b ? "true" : "false";
      else throw StuckTerm(n + " on a non-printable value");
      if (output) output->push_back(line);
      return dunit();
    }
  }
  if (n == "arr") {
    if (c.args.empty()) throw StuckTerm("arr needs at least one element");
    return mk(DArrVal{c.args});
  }
  throw StuckTerm("no delta rule for " + n + "/" + std::to_string(c.args.size()));
}

}  // namespace

std::optional<DPtr> step_local(const DPtr& redex, const FunResolver& funs,
                               std::vector<std::string>* output) {
  if (const auto* a = std::get_if<DApp>(&redex->node)) {
    const auto& l = std::get<DLam>(a->fn->node);
    return subst_var(l.body, l.param, a->arg);
  }
  if (const auto* lp = std::get_if<DLetPair>(&redex->node)) {
    const auto& p = std::get<DPair>(lp->rhs->node);
    return subst_var(subst_var(lp->body, lp->x, p.fst), lp->y, p.snd);
  }
  if (const auto* i = std::get_if<DIf>(&redex->node)) {
    const auto& b = std::get<DBoolLit>(i->cond->node);
    return b.v ? i->thenB : i->elseB;
  }
  if (const auto* g = std::get_if<DGuardElim>(&redex->node)) {
    if (const auto* gi = std::get_if<DGuardIntro>(&g->body->node)) return gi->body;
    throw StuckTerm("guard elimination on an unguarded value");
  }
  if (const auto* la = std::get_if<DLetAssert>(&redex->node)) {
    if (const auto* ai = std::get_if<DAssertIntro>(&la->rhs->node))
      return subst_var(la->body, la->x, ai->body);
    throw StuckTerm("let-assert on a non-assertion");
  }
  if (const auto* f = std::get_if<DForallElim>(&redex->node)) {
    if (const auto* fi = std::get_if<DForallIntro>(&f->body->node)) {
      if (f->arg) return subst_statics(fi->body, {{fi->a, *f->arg}});
      return fi->body;
    }
    throw StuckTerm("instantiation of a non-quantified value");
  }
  if (const auto* le = std::get_if<DLetExists>(&redex->node)) {
    if (const auto* ei = std::get_if<DExistsIntro>(&le->rhs->node)) {
      DPtr body = le->body;
      if (ei->witness) body = subst_statics(body, {{le->a, *ei->witness}});
      return subst_var(body, le->x, ei->body);
    }
    throw StuckTerm("let-exists on a non-package");
  }
  if (const auto* c = std::get_if<DConstApp>(&redex->node)) {
    if (is_session_op(c->name)) return std::nullopt;
    if (is_primitive(c->name)) return delta(*c, output);
    const UserFunDef* def = funs ? funs(c->name) : nullptr;
    if (!def) throw StuckTerm("unknown constant " + c->name);
    if (def->params.size() != c->args.size())
      throw StuckTerm(c->name + " expects " + std::to_string(def->params.size()) + " arguments");
    DPtr body = def->body;
    std::map<std::string, SPtr> sm;
    for (size_t k = 0; k < def->staticParams.size() && k < c->staticArgs.size(); ++k)
      sm[def->staticParams[k].first] = c->staticArgs[k];
    body = subst_statics(body, sm);
    for (size_t k = 0; k < c->args.size(); ++k)
      body = subst_var(body, def->params[k].first, c->args[k]);
    // a function returning a bare closure keeps its parameter type; the
    // residue must stay typable on its own
    if (const auto* l = std::get_if<DLam>(&body->node); l && !l->ann && def->result) {
      if (const auto* arrow = std::get_if<SCst>(&def->result->node);
          arrow && (arrow->name == "->" || arrow->name == "-o") && arrow->args.size() == 2)
        body = mk(DLam{l->param, subst_consts(arrow->args[0], sm), l->linear, l->body},
                  body->span);
    }
    return body;
  }
  throw StuckTerm("not a local redex");
}

// ---------------------------------------------------------------- erasure

DPtr erase_proofs(const DPtr& t) {
  if (std::get_if<DVar>(&t->node) || std::get_if<DUnit>(&t->node) ||
      std::get_if<DIntLit>(&t->node) || std::get_if<DBoolLit>(&t->node) ||
      std::get_if<DStrLit>(&t->node) || std::get_if<DEndpoint>(&t->node))
    return t;
  if (const auto* l = std::get_if<DLam>(&t->node))
    return mk(DLam{l->param, std::nullopt, l->linear, erase_proofs(l->body)}, t->span);
  if (const auto* a = std::get_if<DApp>(&t->node))
    return mk(DApp{erase_proofs(a->fn), erase_proofs(a->arg)}, t->span);
  if (const auto* p = std::get_if<DPair>(&t->node))
    return mk(DPair{erase_proofs(p->fst), erase_proofs(p->snd)}, t->span);
  if (const auto* lp = std::get_if<DLetPair>(&t->node))
    return mk(DLetPair{lp->x, lp->y, erase_proofs(lp->rhs), erase_proofs(lp->body)}, t->span);
  if (const auto* i = std::get_if<DIf>(&t->node))
    return mk(DIf{erase_proofs(i->cond), erase_proofs(i->thenB), erase_proofs(i->elseB)},
              t->span);
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    if (is_proof_op(c->name)) return erase_proofs(c->args.at(0));
    std::vector<DPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(erase_proofs(a));
    return mk(DConstApp{c->name, {}, std::move(args)}, t->span);
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node)) return erase_proofs(g->body);
  if (const auto* g = std::get_if<DGuardElim>(&t->node)) return erase_proofs(g->body);
  if (const auto* g = std::get_if<DAssertIntro>(&t->node)) return erase_proofs(g->body);
  if (const auto* la = std::get_if<DLetAssert>(&t->node))
    return dlet(la->x, erase_proofs(la->rhs), erase_proofs(la->body), t->span);
  if (const auto* f = std::get_if<DForallIntro>(&t->node)) return erase_proofs(f->body);
  if (const auto* f = std::get_if<DForallElim>(&t->node)) return erase_proofs(f->body);
  if (const auto* e = std::get_if<DExistsIntro>(&t->node)) return erase_proofs(e->body);
  if (const auto* le = std::get_if<DLetExists>(&t->node))
    return dlet(le->x, erase_proofs(le->rhs), erase_proofs(le->body), t->span);
  const auto& av = std::get<DArrVal>(t->node);
  std::vector<DPtr> elems;
  elems.reserve(av.elems.size());
  for (const auto& e : av.elems) elems.push_back(erase_proofs(e));
  return mk(DArrVal{std::move(elems)}, t->span);
}

// ---------------------------------------------------------------- printing

std::string show_dyn(const DPtr& t) {
  if (const auto* x = std::get_if<DVar>(&t->node)) return x->name;
  if (std::get_if<DUnit>(&t->node)) return "()";
  if (const auto* k = std::get_if<DIntLit>(&t->node)) return std::to_string(k->v);
  if (const auto* k = std::get_if<DBoolLit>(&t->node)) return k->v ? "true" : "false";
  if (const auto* k = std::get_if<DStrLit>(&t->node)) return "\"" + k->v + "\"";
  if (const auto* l = std::get_if<DLam>(&t->node))
    return std::string(l->linear ? "(llam (" : "(lam (") + l->param +
           (l->ann ? " " + show_static(*l->ann) : "") + ") " + show_dyn(l->body) + ")";
  if (const auto* a = std::get_if<DApp>(&t->node))
    return "(" + show_dyn(a->fn) + " " + show_dyn(a->arg) + ")";
  if (const auto* p = std::get_if<DPair>(&t->node))
    return "(pair " + show_dyn(p->fst) + " " + show_dyn(p->snd) + ")";
  if (const auto* lp = std::get_if<DLetPair>(&t->node))
    return "(let-pair (" + lp->x + " " + lp->y + ") " + show_dyn(lp->rhs) + " " +
           show_dyn(lp->body) + ")";
  if (const auto* i = std::get_if<DIf>(&t->node))
    return "(if " + show_dyn(i->cond) + " " + show_dyn(i->thenB) + " " + show_dyn(i->elseB) + ")";
  if (const auto* c = std::get_if<DConstApp>(&t->node)) {
    std::string s = "(" + c->name;
    for (const auto& st : c->staticArgs) s += " {" + show_static(st) + "}";
    for (const auto& a : c->args) s += " " + show_dyn(a);
    return s + ")";
  }
  if (const auto* g = std::get_if<DGuardIntro>(&t->node))
    return "(guard-intro " + show_dyn(g->body) + ")";
  if (const auto* g = std::get_if<DGuardElim>(&t->node))
    return "(guard-elim " + show_dyn(g->body) + ")";
  if (const auto* g = std::get_if<DAssertIntro>(&t->node))
    return "(assert-intro " + show_dyn(g->body) + ")";
  if (const auto* la = std::get_if<DLetAssert>(&t->node))
    return "(let-assert " + la->x + " " + show_dyn(la->rhs) + " " + show_dyn(la->body) + ")";
  if (const auto* f = std::get_if<DForallIntro>(&t->node))
    return "(forall-lam (" + f->a + " " + f->sort.show() + ") " + show_dyn(f->body) + ")";
  if (const auto* f = std::get_if<DForallElim>(&t->node))
    return "(forall-app " + show_dyn(f->body) +
           (f->arg ? " {" + show_static(*f->arg) + "}" : "") + ")";
  if (const auto* e = std::get_if<DExistsIntro>(&t->node))
    return "(exists-intro" + (e->witness ? " {" + show_static(*e->witness) + "}" : "") + " " +
           show_dyn(e->body) + ")";
  if (const auto* le = std::get_if<DLetExists>(&t->node))
    return "(let-exists (" + le->a + " " + le->x + ") " + show_dyn(le->rhs) + " " +
           show_dyn(le->body) + ")";
  if (const auto* ep = std::get_if<DEndpoint>(&t->node))
    return "<ep " + std::to_string(ep->chan) + "." + (ep->role == 0 ? "S" : "C") + ">";
  const auto& av = std::get<DArrVal>(t->node);
  std::string s = "(arr";
  for (const auto& e : av.elems) s += " " + show_dyn(e);
  return s + ")";
}

}  // namespace sessc
