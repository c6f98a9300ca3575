#include "sessc/statics.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace sessc {

// ---------------------------------------------------------------- sorts

Sort Sort::base(BaseSort b) { return Sort(std::make_shared<const Node>(b)); }
Sort Sort::arrow(Sort dom, Sort cod) {
  return Sort(std::make_shared<const Node>(dom.node_, cod.node_));
}

bool Sort::operator==(const Sort& o) const {
  if (node_ == o.node_) return true;
  if (node_->is_base != o.node_->is_base) return false;
  if (node_->is_base) return node_->b == o.node_->b;
  return dom() == o.dom() && cod() == o.cod();
}

std::string Sort::show() const {
  if (is_base()) {
    switch (base_kind()) {
      case BaseSort::Int: return "int";
      case BaseSort::Bool: return "bool";
      case BaseSort::Type: return "type";
      case BaseSort::VType: return "vtype";
      case BaseSort::SType: return "stype";
    }
  }
  return "(-> " + dom().show() + " " + cod().show() + ")";
}

bool sort_leq(const Sort& found, const Sort& expected) {
  if (found == expected) return true;
  if (found.is_base() && expected.is_base())
    return found.base_kind() == BaseSort::Type && expected.base_kind() == BaseSort::VType;
  if (!found.is_base() && !expected.is_base())
    return found.dom() == expected.dom() && sort_leq(found.cod(), expected.cod());
  return false;
}

// ---------------------------------------------------------------- constructors

SPtr svar(int index, std::string hint) {
  return std::make_shared<const Static>(Static{SVar{index, std::move(hint)}});
}
SPtr sint(long long v) { return std::make_shared<const Static>(Static{SInt{v}}); }
SPtr sbool(bool v) { return std::make_shared<const Static>(Static{SBool{v}}); }
SPtr scst(std::string name, std::vector<SPtr> args) {
  return std::make_shared<const Static>(Static{SCst{std::move(name), std::move(args)}});
}
SPtr slam(std::string hint, Sort dom, SPtr body) {
  return std::make_shared<const Static>(Static{SLam{std::move(hint), dom, std::move(body)}});
}
SPtr sapp(SPtr fn, SPtr arg) {
  return std::make_shared<const Static>(Static{SApp{std::move(fn), std::move(arg)}});
}
SPtr sapps(SPtr fn, const std::vector<SPtr>& args) {
  SPtr r = std::move(fn);
  for (const auto& a : args) r = sapp(r, a);
  return r;
}

bool is_meta(const SPtr& t, std::string* name) {
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty() && is_meta_name(c->name)) {
      if (name) *name = c->name;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------- signature

void StaticSignature::declare(const std::string& name, CSort cs) {
  table_[name].push_back(std::move(cs));
}
bool StaticSignature::known(const std::string& name) const { return table_.count(name) > 0; }
const std::vector<CSort>* StaticSignature::overloads(const std::string& name) const {
  auto it = table_.find(name);
  return it == table_.end() ? nullptr : &it->second;
}

StaticSignature StaticSignature::standard() {
  StaticSignature sig;
  const Sort i = sort_int(), b = sort_bool(), t = sort_type(), v = sort_vtype(),
             s = sort_stype();
  auto cs = [](std::vector<Sort> a, Sort r) { return CSort{std::move(a), r}; };

  // value/type formers
  sig.declare("times", cs({t, t}, t));
  sig.declare("tensor", cs({v, v}, v));
  sig.declare("->", cs({v, v}, t));
  sig.declare("-o", cs({v, v}, v));
  sig.declare("guard", cs({b, t}, t));
  sig.declare("guard", cs({b, v}, v));
  sig.declare("assert", cs({b, t}, t));
  sig.declare("assert", cs({b, v}, v));
  sig.declare("int", cs({}, t));
  sig.declare("int", cs({i}, t));
  sig.declare("bool", cs({}, t));
  sig.declare("bool", cs({b}, t));
  sig.declare("unit", cs({}, t));
  sig.declare("string", cs({}, t));
  sig.declare("arrref", cs({t, i}, t));
  sig.declare("chan", cs({i, s}, v));
  sig.declare("top", cs({}, b));
  sig.declare("bot", cs({}, b));
  sig.declare("subty", cs({v, v}, b));

  // session constructors; msg(i,t)::p is seq(msg(i,t), p)
  sig.declare("end", cs({i}, s));
  sig.declare("msg", cs({i, v}, Sort::arrow(s, s)));
  sig.declare("seq", cs({Sort::arrow(s, s), s}, s));
  sig.declare("branch", cs({i, s, s}, s));
  sig.declare("ite", cs({b, s, s}, s));
  sig.declare("fix", cs({Sort::arrow(s, s)}, s));
  // sort families, resolved in sort_check: quan, hofix, forall, exists
  sig.declare("quan", cs({i, Sort::arrow(i, s)}, s));
  sig.declare("hofix", cs({Sort::arrow(s, s)}, s));
  sig.declare("forall", cs({Sort::arrow(i, v)}, v));
  sig.declare("exists", cs({Sort::arrow(i, v)}, v));

  // index arithmetic and propositions
  sig.declare("+", cs({i, i}, i));
  sig.declare("-", cs({i, i}, i));
  sig.declare("*", cs({i, i}, i));
  for (const char* op : {"=", "<>", "<", "<=", ">", ">="}) sig.declare(op, cs({i, i}, b));
  sig.declare("=", cs({b, b}, b));
  sig.declare("and", cs({b, b}, b));
  sig.declare("or", cs({b, b}, b));
  sig.declare("imp", cs({b, b}, b));
  sig.declare("not", cs({b}, b));
  return sig;
}

// ---------------------------------------------------------------- sort_check

static bool quan_index_sort(const Sort& s) {
  return s.is_base() && (s.base_kind() == BaseSort::Int || s.base_kind() == BaseSort::Bool ||
                         s.base_kind() == BaseSort::SType);
}

Sort sort_check(const SortEnv& env, const StaticSignature& sig, const SPtr& t) {
  struct V {
    const StaticSignature& sig;
    const std::map<std::string, Sort>* free;
    std::vector<Sort> ctx;

    Sort go(const SPtr& t) {
      if (const auto* x = std::get_if<SVar>(&t->node)) {
        if (x->index < 0 || x->index >= (int)ctx.size())
          throw UnboundStaticVar("unbound static variable " +
                                 (x->hint.empty() ? "#" + std::to_string(x->index) : x->hint));
        return ctx[ctx.size() - 1 - x->index];
      }
      if (std::get_if<SInt>(&t->node)) return sort_int();
      if (std::get_if<SBool>(&t->node)) return sort_bool();
      if (const auto* l = std::get_if<SLam>(&t->node)) {
        ctx.push_back(l->dom);
        Sort body = go(l->body);
        ctx.pop_back();
        return Sort::arrow(l->dom, body);
      }
      if (const auto* a = std::get_if<SApp>(&t->node)) {
        Sort f = go(a->fn);
        if (f.is_base()) throw SortError("static application of a non-arrow sort " + f.show());
        Sort x = go(a->arg);
        if (!sort_leq(x, f.dom()))
          throw SortError("static argument sort " + x.show() + " does not fit " + f.dom().show());
        return f.cod();
      }
      const auto& c = std::get<SCst>(t->node);
      return cst(c, t);
    }

    Sort cst(const SCst& c, const SPtr& t) {
      (void)t;
      if (c.args.empty() && free) {
        auto it = free->find(c.name);
        if (it != free->end()) return it->second;
      }
      if (is_meta_name(c.name))
        throw UnboundStaticVar("unknown static meta " + c.name);
      if (c.name == "quan") return family_quan(c);
      if (c.name == "forall" || c.name == "exists") return family_quantifier(c);
      if (c.name == "hofix") return family_hofix(c);
      const auto* ovs = sig.overloads(c.name);
      if (!ovs) {
        if (free && free->count(c.name))
          throw ArityMismatch("static " + c.name + " applied to arguments");
        throw UnboundStaticVar("unknown static constant " + c.name);
      }
      std::vector<Sort> argSorts;
      argSorts.reserve(c.args.size());
      for (const auto& a : c.args) argSorts.push_back(go(a));
      bool arityOk = false;
      for (const auto& ov : *ovs) {
        if (ov.args.size() != argSorts.size()) continue;
        arityOk = true;
        bool fits = true;
        for (size_t k = 0; k < argSorts.size(); ++k)
          if (!sort_leq(argSorts[k], ov.args[k])) { fits = false; break; }
        if (fits) return ov.result;
      }
      if (!arityOk)
        throw ArityMismatch(c.name + " applied to " + std::to_string(c.args.size()) +
                            " static arguments");
      std::string got;
      for (const auto& s : argSorts) got += (got.empty() ? "" : ", ") + s.show();
      throw SortError("no sorting of " + c.name + " accepts (" + got + ")");
    }

    Sort family_quan(const SCst& c) {
      if (c.args.size() != 2) throw ArityMismatch("quan expects a role and a binder");
      Sort r = go(c.args[0]);
      if (!(r == sort_int())) throw SortError("quan role must have sort int");
      Sort f = go(c.args[1]);
      if (f.is_base() || !quan_index_sort(f.dom()) || !(f.cod() == sort_stype()))
        throw SortError("quan body must be a binder over int, bool or stype yielding stype");
      return sort_stype();
    }

    Sort family_quantifier(const SCst& c) {
      if (c.args.size() != 1) throw ArityMismatch(c.name + " expects one binder");
      Sort f = go(c.args[0]);
      if (f.is_base() || !quan_index_sort(f.dom()))
        throw SortError(c.name + " must bind a static of sort int, bool or stype");
      Sort body = f.cod();
      if (!body.is_base() ||
          (body.base_kind() != BaseSort::Type && body.base_kind() != BaseSort::VType))
        throw SortError(c.name + " body must be a type");
      return body;
    }

    Sort family_hofix(const SCst& c) {
      if (c.args.size() < 2) throw ArityMismatch("hofix expects a body and at least one index");
      Sort f = go(c.args[0]);
      // body sort must be T -> T with T = s1 -> ... -> sk -> stype
      if (f.is_base()) throw SortError("hofix body must be an arrow sort");
      Sort t = f.dom();
      if (!(f.cod() == t)) throw SortError("hofix body must have sort (T -> T)");
      Sort walk = t;
      for (size_t k = 1; k < c.args.size(); ++k) {
        if (walk.is_base()) throw ArityMismatch("too many hofix indices");
        Sort a = go(c.args[k]);
        if (!sort_leq(a, walk.dom()))
          throw SortError("hofix index sort " + a.show() + " does not fit " + walk.dom().show());
        walk = walk.cod();
      }
      if (!(walk == sort_stype()))
        throw NotAnStype("hofix application does not land in stype (missing indices?)");
      return sort_stype();
    }
  };
  V v{sig, env.free, env.ctx};
  return v.go(t);
}

// ---------------------------------------------------------------- shift/subst

SPtr shift(const SPtr& t, int d, int cutoff) {
  if (d == 0) return t;
  if (const auto* x = std::get_if<SVar>(&t->node))
    return x->index >= cutoff ? svar(x->index + d, x->hint) : t;
  if (std::get_if<SInt>(&t->node) || std::get_if<SBool>(&t->node)) return t;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) return t;
    std::vector<SPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(shift(a, d, cutoff));
    return scst(c->name, std::move(args));
  }
  if (const auto* l = std::get_if<SLam>(&t->node))
    return slam(l->hint, l->dom, shift(l->body, d, cutoff + 1));
  const auto& a = std::get<SApp>(t->node);
  return sapp(shift(a.fn, d, cutoff), shift(a.arg, d, cutoff));
}

static SPtr subst_index(const SPtr& t, int j, const SPtr& s) {
  if (const auto* x = std::get_if<SVar>(&t->node)) {
    if (x->index == j) return shift(s, j);
    if (x->index > j) return svar(x->index - 1, x->hint);
    return t;
  }
  if (std::get_if<SInt>(&t->node) || std::get_if<SBool>(&t->node)) return t;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) return t;
    std::vector<SPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(subst_index(a, j, s));
    return scst(c->name, std::move(args));
  }
  if (const auto* l = std::get_if<SLam>(&t->node))
    return slam(l->hint, l->dom, subst_index(l->body, j + 1, s));
  const auto& a = std::get<SApp>(t->node);
  return sapp(subst_index(a.fn, j, s), subst_index(a.arg, j, s));
}

SPtr subst_top(const SPtr& body, const SPtr& arg) { return subst_index(body, 0, arg); }

SPtr subst_consts(const SPtr& t, const std::map<std::string, SPtr>& m) {
  if (std::get_if<SVar>(&t->node) || std::get_if<SInt>(&t->node) ||
      std::get_if<SBool>(&t->node))
    return t;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) {
      auto it = m.find(c->name);
      return it == m.end() ? t : it->second;
    }
    std::vector<SPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(subst_consts(a, m));
    return scst(c->name, std::move(args));
  }
  if (const auto* l = std::get_if<SLam>(&t->node))
    return slam(l->hint, l->dom, subst_consts(l->body, m));
  const auto& a = std::get<SApp>(t->node);
  return sapp(subst_consts(a.fn, m), subst_consts(a.arg, m));
}

// ---------------------------------------------------------------- normalize

static std::optional<long long> lit_int(const SPtr& t) {
  if (const auto* k = std::get_if<SInt>(&t->node)) return k->v;
  return std::nullopt;
}
static std::optional<bool> lit_bool(const SPtr& t) {
  if (const auto* k = std::get_if<SBool>(&t->node)) return k->v;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty() && c->name == "top") return true;
    if (c->args.empty() && c->name == "bot") return false;
  }
  return std::nullopt;
}

static SPtr fold_cst(const std::string& name, std::vector<SPtr> args) {
  auto wrap = [&]() { return scst(name, std::move(args)); };
  if (args.size() == 2) {
    auto a = lit_int(args[0]), b = lit_int(args[1]);
    if (a && b) {
      using I = __int128;
      I r;
      if (name == "+") r = (I)*a + (I)*b;
      else if (name == "-") r = (I)*a - (I)*b;
      else if (name == "*") r = (I)*a * (I)*b;
      else if (name == "=") return sbool(*a == *b);
      else if (name == "<>") return sbool(*a != *b);
      else if (name == "<") return sbool(*a < *b);
      else if (name == "<=") return sbool(*a <= *b);
      else if (name == ">") return sbool(*a > *b);
      else if (name == ">=") return sbool(*a >= *b);
      else return wrap();
      if (r > (I)INT64_MAX / 4 || r < (I)INT64_MIN / 4)
        throw SortError("static integer overflow in " + name);
      return sint((long long)r);
    }
    auto p = lit_bool(args[0]), q = lit_bool(args[1]);
    if (name == "and") {
      if (p) return *p ? args[1] : sbool(false);
      if (q) return *q ? args[0] : sbool(false);
    } else if (name == "or") {
      if (p) return *p ? sbool(true) : args[1];
      if (q) return *q ? sbool(true) : args[0];
    } else if (name == "imp") {
      if (p) return *p ? args[1] : sbool(true);
      if (q && *q) return sbool(true);
    } else if (name == "=" && (p || q)) {
      if (p && q) return sbool(*p == *q);
      if (p) return *p ? args[1] : fold_cst("not", {args[1]});
      if (q) return *q ? args[0] : fold_cst("not", {args[0]});
    }
    return wrap();
  }
  if (args.size() == 1 && name == "not") {
    if (auto p = lit_bool(args[0])) return sbool(!*p);
    if (const auto* c = std::get_if<SCst>(&args[0]->node))
      if (c->name == "not" && c->args.size() == 1) return c->args[0];
  }
  return wrap();
}

SPtr beta_normalize(const SPtr& t) {
  if (std::get_if<SVar>(&t->node) || std::get_if<SInt>(&t->node) ||
      std::get_if<SBool>(&t->node))
    return t;
  if (const auto* l = std::get_if<SLam>(&t->node)) {
    SPtr b = beta_normalize(l->body);
    return b == l->body ? t : slam(l->hint, l->dom, b);
  }
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) return t;
    std::vector<SPtr> args;
    args.reserve(c->args.size());
    for (const auto& a : c->args) args.push_back(beta_normalize(a));
    return fold_cst(c->name, std::move(args));
  }
  const auto& a = std::get<SApp>(t->node);
  SPtr f = beta_normalize(a.fn);
  SPtr x = beta_normalize(a.arg);
  if (const auto* l = std::get_if<SLam>(&f->node))
    return beta_normalize(subst_top(l->body, x));
  return sapp(f, x);
}

// ---------------------------------------------------------------- alpha_equal

bool alpha_equal(const SPtr& a, const SPtr& b) {
  if (a == b) return true;
  if (a->node.index() != b->node.index()) return false;
  if (const auto* x = std::get_if<SVar>(&a->node))
    return x->index == std::get<SVar>(b->node).index;
  if (const auto* k = std::get_if<SInt>(&a->node)) return k->v == std::get<SInt>(b->node).v;
  if (const auto* k = std::get_if<SBool>(&a->node)) return k->v == std::get<SBool>(b->node).v;
  if (const auto* c = std::get_if<SCst>(&a->node)) {
    const auto& d = std::get<SCst>(b->node);
    if (c->name != d.name || c->args.size() != d.args.size()) return false;
    for (size_t i = 0; i < c->args.size(); ++i)
      if (!alpha_equal(c->args[i], d.args[i])) return false;
    return true;
  }
  if (const auto* l = std::get_if<SLam>(&a->node)) {
    const auto& m = std::get<SLam>(b->node);
    return l->dom == m.dom && alpha_equal(l->body, m.body);
  }
  const auto& p = std::get<SApp>(a->node);
  const auto& q = std::get<SApp>(b->node);
  return alpha_equal(p.fn, q.fn) && alpha_equal(p.arg, q.arg);
}

bool occurs_const(const SPtr& t, const std::string& name) {
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->name == name) return true;
    for (const auto& a : c->args)
      if (occurs_const(a, name)) return true;
    return false;
  }
  if (const auto* l = std::get_if<SLam>(&t->node)) return occurs_const(l->body, name);
  if (const auto* a = std::get_if<SApp>(&t->node))
    return occurs_const(a->fn, name) || occurs_const(a->arg, name);
  return false;
}

void collect_const_names(const SPtr& t, std::vector<std::string>& out) {
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) out.push_back(c->name);
    for (const auto& a : c->args) collect_const_names(a, out);
    return;
  }
  if (const auto* l = std::get_if<SLam>(&t->node)) return collect_const_names(l->body, out);
  if (const auto* a = std::get_if<SApp>(&t->node)) {
    collect_const_names(a->fn, out);
    collect_const_names(a->arg, out);
  }
}

// ---------------------------------------------------------------- evaluation

std::optional<long long> eval_int(const SPtr& t, const std::map<std::string, long long>& ints,
                                  const std::map<std::string, bool>& bools) {
  if (const auto* k = std::get_if<SInt>(&t->node)) return k->v;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) {
      auto it = ints.find(c->name);
      if (it != ints.end()) return it->second;
      return std::nullopt;
    }
    if (c->args.size() == 2) {
      auto a = eval_int(c->args[0], ints, bools), b = eval_int(c->args[1], ints, bools);
      if (!a || !b) return std::nullopt;
      if (c->name == "+") return *a + *b;
      if (c->name == "-") return *a - *b;
      if (c->name == "*") return *a * *b;
    }
  }
  return std::nullopt;
}

std::optional<bool> eval_bool(const SPtr& t, const std::map<std::string, long long>& ints,
                              const std::map<std::string, bool>& bools) {
  if (const auto* k = std::get_if<SBool>(&t->node)) return k->v;
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) {
      if (c->name == "top") return true;
      if (c->name == "bot") return false;
      auto it = bools.find(c->name);
      if (it != bools.end()) return it->second;
      return std::nullopt;
    }
    if (c->name == "not" && c->args.size() == 1) {
      auto p = eval_bool(c->args[0], ints, bools);
      if (!p) return std::nullopt;
      return !*p;
    }
    if (c->args.size() == 2) {
      const std::string& n = c->name;
      if (n == "and" || n == "or" || n == "imp") {
        auto p = eval_bool(c->args[0], ints, bools), q = eval_bool(c->args[1], ints, bools);
        if (!p || !q) return std::nullopt;
        if (n == "and") return *p && *q;
        if (n == "or") return *p || *q;
        return !*p || *q;
      }
      auto a = eval_int(c->args[0], ints, bools), b = eval_int(c->args[1], ints, bools);
      if (a && b) {
        if (n == "=") return *a == *b;
        if (n == "<>") return *a != *b;
        if (n == "<") return *a < *b;
        if (n == "<=") return *a <= *b;
        if (n == ">") return *a > *b;
        if (n == ">=") return *a >= *b;
      }
      if (n == "=") {
        auto p = eval_bool(c->args[0], ints, bools), q = eval_bool(c->args[1], ints, bools);
        if (p && q) return *p == *q;
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- heads

SessionHead session_head(const SPtr& stype) {
  SessionHead h;
  const auto* c = std::get_if<SCst>(&stype->node);
  if (!c) return h;
  if (c->name == "end" && c->args.size() == 1) {
    h.kind = HeadKind::End;
    h.role = c->args[0];
    return h;
  }
  if (c->name == "seq" && c->args.size() == 2) {
    if (const auto* m = std::get_if<SCst>(&c->args[0]->node)) {
      if (m->name == "msg" && m->args.size() == 2) {
        h.kind = HeadKind::Msg;
        h.role = m->args[0];
        h.payload = m->args[1];
        h.cont = c->args[1];
        return h;
      }
    }
    return h;
  }
  if (c->name == "branch" && c->args.size() == 3) {
    h.kind = HeadKind::Branch;
    h.role = c->args[0];
    h.left = c->args[1];
    h.right = c->args[2];
    return h;
  }
  if (c->name == "ite" && c->args.size() == 3) {
    h.kind = HeadKind::Ite;
    h.cond = c->args[0];
    h.left = c->args[1];
    h.right = c->args[2];
    return h;
  }
  if (c->name == "quan" && c->args.size() == 2 && std::get_if<SLam>(&c->args[1]->node)) {
    h.kind = HeadKind::Quan;
    h.role = c->args[0];
    h.fn = c->args[1];
    return h;
  }
  if (c->name == "fix" && c->args.size() == 1 && std::get_if<SLam>(&c->args[0]->node)) {
    h.kind = HeadKind::Fix;
    h.fn = c->args[0];
    return h;
  }
  if (c->name == "hofix" && c->args.size() >= 2 && std::get_if<SLam>(&c->args[0]->node)) {
    h.kind = HeadKind::HoFix;
    h.fn = c->args[0];
    h.args.assign(c->args.begin() + 1, c->args.end());
    return h;
  }
  return h;
}

SPtr unfold_session(const SPtr& stype) {
  SPtr p = beta_normalize(stype);
  SessionHead h = session_head(p);
  if (h.kind == HeadKind::Fix) return beta_normalize(sapp(h.fn, p));
  if (h.kind == HeadKind::HoFix) {
    size_t k = h.args.size();
    // G = \a1..ak. hofix(F, a1..ak), then unfold to F G s1..sk
    std::vector<SPtr> inner{shift(h.fn, (int)k)};
    for (size_t i = 0; i < k; ++i) inner.push_back(svar((int)(k - 1 - i)));
    SPtr g = scst("hofix", std::move(inner));
    const SLam* lam = std::get_if<SLam>(&h.fn->node);
    std::vector<Sort> doms;
    Sort walk = lam->dom;  // sigma_1 -> .. -> sigma_k -> stype
    for (size_t i = 0; i < k; ++i) {
      if (walk.is_base()) throw SortError("hofix functional arity is below its argument count");
      doms.push_back(walk.dom());
      walk = walk.cod();
    }
    for (size_t i = k; i-- > 0;) g = slam("a" + std::to_string(i), doms[i], g);
    std::vector<SPtr> call{g};
    call.insert(call.end(), h.args.begin(), h.args.end());
    return beta_normalize(sapps(h.fn, call));
  }
  return p;
}

namespace {
SPtr abstract_const_at(const SPtr& t, const std::string& name, int depth) {
  if (const auto* v = std::get_if<SVar>(&t->node)) {
    // a binder is being introduced around t; free indices step over it
    return v->index >= depth ? svar(v->index + 1, v->hint) : t;
  }
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->name == name && c->args.empty()) return svar(depth, name);
    std::vector<SPtr> args;
    args.reserve(c->args.size());
    bool changed = false;
    for (const auto& a : c->args) {
      args.push_back(abstract_const_at(a, name, depth));
      changed = changed || args.back() != a;
    }
    return changed ? scst(c->name, std::move(args)) : t;
  }
  if (const auto* l = std::get_if<SLam>(&t->node)) {
    SPtr b = abstract_const_at(l->body, name, depth + 1);
    return b == l->body ? t : slam(l->hint, l->dom, b);
  }
  if (const auto* a = std::get_if<SApp>(&t->node)) {
    SPtr f = abstract_const_at(a->fn, name, depth);
    SPtr x = abstract_const_at(a->arg, name, depth);
    return f == a->fn && x == a->arg ? t : sapp(f, x);
  }
  return t;
}
}  // namespace

SPtr abstract_const(const SPtr& t, const std::string& name) {
  return abstract_const_at(t, name, 0);
}

// ---------------------------------------------------------------- printing

namespace {

struct Printer {
  std::vector<std::string> names;

  std::string fresh(const std::string& hint) {
    std::string base = hint.empty() ? "a" : hint;
    std::string n = base;
    int k = 0;
    auto taken = [&](const std::string& s) {
      return std::find(names.begin(), names.end(), s) != names.end();
    };
    while (taken(n)) n = base + std::to_string(++k);
    return n;
  }

  static bool role_lit(const SPtr& t, std::string* out) {
    if (const auto* k = std::get_if<SInt>(&t->node)) {
      if (k->v == 0) { *out = "S"; return true; }
      if (k->v == 1) { *out = "C"; return true; }
    }
    return false;
  }

  std::string role(const SPtr& t) {
    std::string r;
    if (role_lit(t, &r)) return r;
    return go(t);
  }

  std::string binder(const SPtr& lam, std::string* bodyOut) {
    const auto& l = std::get<SLam>(lam->node);
    std::string n = fresh(l.hint);
    names.push_back(n);
    *bodyOut = go(l.body);
    names.pop_back();
    return "(" + n + " " + l.dom.show() + ")";
  }

  std::string go(const SPtr& t) {
    if (const auto* x = std::get_if<SVar>(&t->node)) {
      int pos = (int)names.size() - 1 - x->index;
      if (pos >= 0 && pos < (int)names.size()) return names[pos];
      return "#" + std::to_string(x->index);
    }
    if (const auto* k = std::get_if<SInt>(&t->node)) return std::to_string(k->v);
    if (const auto* k = std::get_if<SBool>(&t->node)) return k->v ? "true" : "false";
    if (const auto* l = std::get_if<SLam>(&t->node)) {
      (void)l;
      std::string body;
      std::string b = binder(t, &body);
      return "(slam " + b + " " + body + ")";
    }
    if (const auto* a = std::get_if<SApp>(&t->node))
      return "(sapp " + go(a->fn) + " " + go(a->arg) + ")";
    const auto& c = std::get<SCst>(t->node);
    return cst(c, t);
  }

  std::string cst(const SCst& c, const SPtr& t) {
    if (c.args.empty()) return c.name;
    const std::string& n = c.name;
    if (n == "end" && c.args.size() == 1) return "(end " + role(c.args[0]) + ")";
    if (n == "seq" && c.args.size() == 2) {
      if (const auto* m = std::get_if<SCst>(&c.args[0]->node))
        if (m->name == "msg" && m->args.size() == 2)
          return "(msg " + role(m->args[0]) + " " + go(m->args[1]) + " " + go(c.args[1]) + ")";
      return "(seq " + go(c.args[0]) + " " + go(c.args[1]) + ")";
    }
    if ((n == "branch") && c.args.size() == 3)
      return "(branch " + role(c.args[0]) + " " + go(c.args[1]) + " " + go(c.args[2]) + ")";
    if (n == "quan" && c.args.size() == 2 && std::get_if<SLam>(&c.args[1]->node)) {
      std::string body;
      std::string b = binder(c.args[1], &body);
      return "(quan " + role(c.args[0]) + " " + b + " " + body + ")";
    }
    if ((n == "forall" || n == "exists") && c.args.size() == 1 &&
        std::get_if<SLam>(&c.args[0]->node)) {
      std::string body;
      std::string b = binder(c.args[0], &body);
      return "(" + n + " " + b + " " + body + ")";
    }
    if (n == "fix" && c.args.size() == 1 && std::get_if<SLam>(&c.args[0]->node)) {
      std::string body;
      std::string b = binder(c.args[0], &body);
      return "(fix " + b + " " + body + ")";
    }
    if (n == "chan" && c.args.size() == 2)
      return "(chan " + role(c.args[0]) + " " + go(c.args[1]) + ")";
    (void)t;
    std::string s = "(" + n;
    for (const auto& a : c.args) s += " " + go(a);
    return s + ")";
  }
};

}  // namespace

std::string show_static(const SPtr& t) {
  Printer p;
  return p.go(t);
}

}  // namespace sessc
