#include "sessc/constraints.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sessc {

namespace {

struct Unsup {
  std::string reason;
};
struct Overflow {};

using I64 = long long;

I64 chk_add(I64 a, I64 b) {
  __int128 r = (__int128)a + b;
  if (r > INT64_MAX / 2 || r < INT64_MIN / 2) throw Overflow{};
  return (I64)r;
}
I64 chk_mul(I64 a, I64 b) {
  __int128 r = (__int128)a * b;
  if (r > INT64_MAX / 2 || r < INT64_MIN / 2) throw Overflow{};
  return (I64)r;
}

I64 floordiv(I64 a, I64 b) {
  I64 q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}
I64 ceildiv(I64 a, I64 b) { return -floordiv(-a, b); }

// symmetric residue in (-m/2, m/2]
I64 mod_hat(I64 a, I64 m) {
  I64 r = ((a % m) + m) % m;
  if (2 * r > m) r -= m;
  return r;
}

// ---------------------------------------------------------------- linear forms

struct Lin {
  std::map<std::string, I64> c;
  I64 k = 0;

  void add_var(const std::string& v, I64 a) {
    if (a == 0) return;
    auto it = c.find(v);
    if (it == c.end()) {
      c[v] = a;
    } else {
      it->second = chk_add(it->second, a);
      if (it->second == 0) c.erase(it);
    }
  }
  I64 coeff(const std::string& v) const {
    auto it = c.find(v);
    return it == c.end() ? 0 : it->second;
  }
};

Lin lin_const(I64 k) { return Lin{{}, k}; }
Lin lin_var(const std::string& v) { return Lin{{{v, 1}}, 0}; }

Lin lin_add(const Lin& a, const Lin& b) {
  Lin r = a;
  r.k = chk_add(r.k, b.k);
  for (const auto& [v, x] : b.c) r.add_var(v, x);
  return r;
}
Lin lin_scale(const Lin& a, I64 s) {
  Lin r;
  r.k = chk_mul(a.k, s);
  if (s != 0)
    for (const auto& [v, x] : a.c) r.c[v] = chk_mul(x, s);
  return r;
}
Lin lin_sub(const Lin& a, const Lin& b) { return lin_add(a, lin_scale(b, -1)); }
Lin lin_drop(const Lin& a, const std::string& v) {
  Lin r = a;
  r.c.erase(v);
  return r;
}
I64 lin_eval(const Lin& a, const std::map<std::string, I64>& asg) {
  I64 r = a.k;
  for (const auto& [v, x] : a.c) {
    auto it = asg.find(v);
    if (it == asg.end()) throw std::logic_error("unassigned solver variable " + v);
    r = chk_add(r, chk_mul(x, it->second));
  }
  return r;
}

// as lin_eval, but vars the recursion never constrained default to 0
I64 lin_eval_fill(const Lin& a, std::map<std::string, I64>& asg) {
  I64 r = a.k;
  for (const auto& [v, x] : a.c) {
    auto it = asg.find(v);
    if (it == asg.end()) it = asg.emplace(v, 0).first;
    r = chk_add(r, chk_mul(x, it->second));
  }
  return r;
}

std::optional<Lin> parse_linear(const SPtr& t) {
  if (const auto* k = std::get_if<SInt>(&t->node)) return lin_const(k->v);
  if (const auto* c = std::get_if<SCst>(&t->node)) {
    if (c->args.empty()) return lin_var(c->name);
    if (c->args.size() == 2) {
      auto a = parse_linear(c->args[0]);
      if (!a) return std::nullopt;
      auto b = parse_linear(c->args[1]);
      if (!b) return std::nullopt;
      if (c->name == "+") return lin_add(*a, *b);
      if (c->name == "-") return lin_sub(*a, *b);
      if (c->name == "*") {
        if (a->c.empty()) return lin_scale(*b, a->k);
        if (b->c.empty()) return lin_scale(*a, b->k);
        return std::nullopt;  // nonlinear
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- DNF over atoms

struct Atom {
  enum Kind { BoolVar, Ge, Eq } kind;  // Ge: lin >= 0, Eq: lin == 0
  std::string name;                    // BoolVar
  bool positive = true;                // BoolVar polarity
  Lin lin;                             // Ge/Eq
};
using Clause = std::vector<Atom>;
using Dnf = std::vector<Clause>;

constexpr size_t kClauseCap = 4096;

Dnf dnf_true() { return Dnf{Clause{}}; }
Dnf dnf_false() { return Dnf{}; }

Dnf dnf_or(Dnf a, const Dnf& b) {
  a.insert(a.end(), b.begin(), b.end());
  if (a.size() > kClauseCap) throw Unsup{"proposition too large to normalize"};
  return a;
}
Dnf dnf_and(const Dnf& a, const Dnf& b) {
  Dnf r;
  if (a.size() * b.size() > kClauseCap) throw Unsup{"proposition too large to normalize"};
  for (const auto& x : a)
    for (const auto& y : b) {
      Clause c = x;
      c.insert(c.end(), y.begin(), y.end());
      r.push_back(std::move(c));
    }
  return r;
}

Dnf atom_clause(Atom a) { return Dnf{Clause{std::move(a)}}; }

Dnf cmp_atoms(const std::string& op, const Lin& a, const Lin& b, bool pos) {
  auto ge = [](Lin l) {
    Atom at;
    at.kind = Atom::Ge;
    at.lin = std::move(l);
    return at;
  };
  auto eq = [](Lin l) {
    Atom at;
    at.kind = Atom::Eq;
    at.lin = std::move(l);
    return at;
  };
  // lin != 0 splits into lin - 1 >= 0 or -lin - 1 >= 0
  auto ne = [&](const Lin& l) {
    return dnf_or(atom_clause(ge(lin_add(l, lin_const(-1)))),
                  atom_clause(ge(lin_add(lin_scale(l, -1), lin_const(-1)))));
  };
  if (op == "<") return pos ? atom_clause(ge(lin_add(lin_sub(b, a), lin_const(-1))))
                            : atom_clause(ge(lin_sub(a, b)));
  if (op == "<=") return pos ? atom_clause(ge(lin_sub(b, a)))
                             : atom_clause(ge(lin_add(lin_sub(a, b), lin_const(-1))));
  if (op == ">") return cmp_atoms("<", b, a, pos);
  if (op == ">=") return cmp_atoms("<=", b, a, pos);
  if (op == "=") return pos ? atom_clause(eq(lin_sub(a, b))) : ne(lin_sub(a, b));
  if (op == "<>") return pos ? ne(lin_sub(a, b)) : atom_clause(eq(lin_sub(a, b)));
  throw Unsup{"unknown comparison " + op};
}

bool is_cmp_name(const std::string& n) {
  return n == "=" || n == "<>" || n == "<" || n == "<=" || n == ">" || n == ">=";
}

Dnf to_dnf(const SPtr& t, bool pos) {
  if (const auto* b = std::get_if<SBool>(&t->node)) return b->v == pos ? dnf_true() : dnf_false();
  const auto* c = std::get_if<SCst>(&t->node);
  if (!c) throw Unsup{"proposition head is not a constant: " + show_static(t)};
  if (c->args.empty()) {
    if (c->name == "top") return pos ? dnf_true() : dnf_false();
    if (c->name == "bot") return pos ? dnf_false() : dnf_true();
    Atom a;
    a.kind = Atom::BoolVar;
    a.name = c->name;
    a.positive = pos;
    return atom_clause(std::move(a));
  }
  const std::string& n = c->name;
  if (n == "not" && c->args.size() == 1) return to_dnf(c->args[0], !pos);
  if (c->args.size() == 2) {
    const SPtr& l = c->args[0];
    const SPtr& r = c->args[1];
    if (n == "and")
      return pos ? dnf_and(to_dnf(l, true), to_dnf(r, true))
                 : dnf_or(to_dnf(l, false), to_dnf(r, false));
    if (n == "or")
      return pos ? dnf_or(to_dnf(l, true), to_dnf(r, true))
                 : dnf_and(to_dnf(l, false), to_dnf(r, false));
    if (n == "imp")
      return pos ? dnf_or(to_dnf(l, false), to_dnf(r, true))
                 : dnf_and(to_dnf(l, true), to_dnf(r, false));
    if (is_cmp_name(n)) {
      auto la = parse_linear(l);
      auto ra = parse_linear(r);
      if (la && ra) return cmp_atoms(n, *la, *ra, pos);
      if (n == "=") {
        // boolean equality
        Dnf both = dnf_and(to_dnf(l, true), to_dnf(r, true));
        Dnf neither = dnf_and(to_dnf(l, false), to_dnf(r, false));
        Dnf mixed1 = dnf_and(to_dnf(l, true), to_dnf(r, false));
        Dnf mixed2 = dnf_and(to_dnf(l, false), to_dnf(r, true));
        return pos ? dnf_or(both, neither) : dnf_or(mixed1, mixed2);
      }
      throw Unsup{"nonlinear constraint: " + show_static(t)};
    }
  }
  throw Unsup{"unsupported proposition: " + show_static(t)};
}

// ---------------------------------------------------------------- omega core

struct Con {
  Lin lin;
  bool eq;  // true: lin == 0, false: lin >= 0
};

using Assign = std::map<std::string, I64>;

struct Budget {
  int steps = 0;
  void tick() {
    if (++steps > 200000) throw Unsup{"constraint solver budget exceeded"};
  }
};

// gcd-normalize in place; returns false on contradiction, drops trivial rows
bool normalize(std::vector<Con>& cons) {
  std::vector<Con> out;
  for (auto& cn : cons) {
    if (cn.lin.c.empty()) {
      if (cn.eq ? cn.lin.k != 0 : cn.lin.k < 0) return false;
      continue;
    }
    I64 g = 0;
    for (const auto& [v, a] : cn.lin.c) g = std::gcd(g, a < 0 ? -a : a);
    if (g > 1) {
      if (cn.eq) {
        if (cn.lin.k % g != 0) return false;
        cn.lin.k /= g;
      } else {
        cn.lin.k = floordiv(cn.lin.k, g);
      }
      for (auto& [v, a] : cn.lin.c) a /= g;
    }
    out.push_back(std::move(cn));
  }
  cons = std::move(out);
  return true;
}

// substitute var := expr into lin
Lin lin_subst(const Lin& lin, const std::string& var, const Lin& expr) {
  I64 a = lin.coeff(var);
  if (a == 0) return lin;
  return lin_add(lin_drop(lin, var), lin_scale(expr, a));
}

int fresh_sigma = 0;

std::optional<Assign> omega(std::vector<Con> cons, Budget& budget, int depth) {
  if (depth > 64) throw Unsup{"constraint solver depth exceeded"};
  budget.tick();
  if (!normalize(cons)) return std::nullopt;

  // equality elimination
  for (size_t ei = 0; ei < cons.size(); ++ei) {
    if (!cons[ei].eq) continue;
    const Lin& e = cons[ei].lin;
    std::string xk;
    I64 ak = 0;
    for (const auto& [v, a] : e.c) {
      I64 aa = a < 0 ? -a : a;
      if (ak == 0 || aa < (ak < 0 ? -ak : ak)) {
        xk = v;
        ak = a;
      }
    }
    Lin expr;  // xk := expr
    std::vector<Con> rest;
    if (ak == 1 || ak == -1) {
      // ak*xk + r = 0  =>  xk = -r/ak
      expr = lin_scale(lin_drop(e, xk), ak == 1 ? -1 : 1);
      for (size_t j = 0; j < cons.size(); ++j) {
        if (j == ei) continue;
        rest.push_back({lin_subst(cons[j].lin, xk, expr), cons[j].eq});
      }
    } else {
      // Pugh's modulus trick: shrink coefficients via a fresh variable
      I64 m = (ak < 0 ? -ak : ak) + 1;
      std::string sigma = "$s" + std::to_string(fresh_sigma++);
      Lin e2;
      for (const auto& [v, a] : e.c) e2.add_var(v, mod_hat(a, m));
      e2.k = mod_hat(e.k, m);
      e2.add_var(sigma, -m);
      // coefficient of xk in e2 is -sgn(ak); solve e2 for xk
      I64 cxk = e2.coeff(xk);
      if (cxk != 1 && cxk != -1) throw std::logic_error("omega: modulus step lost unit coeff");
      expr = lin_scale(lin_drop(e2, xk), cxk == 1 ? -1 : 1);
      for (size_t j = 0; j < cons.size(); ++j)
        rest.push_back({lin_subst(cons[j].lin, xk, expr), cons[j].eq});
    }
    auto sub = omega(std::move(rest), budget, depth + 1);
    if (!sub) return std::nullopt;
    (*sub)[xk] = lin_eval_fill(expr, *sub);
    return sub;
  }

  // inequalities only
  if (cons.empty()) return Assign{};

  // choose the variable minimizing #lower * #upper
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& cn : cons)
    for (const auto& [v, a] : cn.lin.c)
      (a > 0 ? counts[v].first : counts[v].second)++;
  std::string x;
  long best = -1;
  for (const auto& [v, lu] : counts) {
    long score = (long)lu.first * lu.second;
    if (best < 0 || score < best) {
      best = score;
      x = v;
    }
  }

  // lower: b*x + p >= 0 (b>0); upper: -a*x + q >= 0 (a>0)
  std::vector<std::pair<I64, Lin>> lowers, uppers;
  std::vector<Con> rest;
  for (const auto& cn : cons) {
    I64 a = cn.lin.coeff(x);
    if (a == 0)
      rest.push_back(cn);
    else if (a > 0)
      lowers.push_back({a, lin_drop(cn.lin, x)});
    else
      uppers.push_back({-a, lin_drop(cn.lin, x)});
  }

  auto pick_x = [&](Assign& sub) -> std::optional<I64> {
    bool has = false;
    I64 lb = 0, ub = 0;
    for (const auto& [b, p] : lowers) {
      I64 v = ceildiv(-lin_eval_fill(p, sub), b);
      lb = has ? std::max(lb, v) : v;
      has = true;
    }
    bool hasU = false;
    for (const auto& [a, q] : uppers) {
      I64 v = floordiv(lin_eval_fill(q, sub), a);
      ub = hasU ? std::min(ub, v) : v;
      hasU = true;
    }
    if (has && hasU && lb > ub) return std::nullopt;
    if (!has && !hasU) return 0;
    if (!has) return std::min<I64>(0, ub);
    if (!hasU) return std::max<I64>(0, lb);
    return std::min(std::max<I64>(0, lb), ub);
  };

  if (lowers.empty() || uppers.empty()) {
    auto sub = omega(std::move(rest), budget, depth + 1);
    if (!sub) return std::nullopt;
    auto v = pick_x(*sub);
    if (!v) throw std::logic_error("omega: unbounded variable had empty range");
    (*sub)[x] = *v;
    return sub;
  }

  bool exact = true;
  for (const auto& [b, p] : lowers)
    for (const auto& [a, q] : uppers)
      if (a != 1 && b != 1) exact = false;

  auto shadow = [&](bool dark) {
    std::vector<Con> out = rest;
    for (const auto& [b, p] : lowers)
      for (const auto& [a, q] : uppers) {
        Lin l = lin_add(lin_scale(p, a), lin_scale(q, b));
        if (dark) l.k = chk_add(l.k, -chk_mul(a - 1, b - 1));
        out.push_back({std::move(l), false});
      }
    return out;
  };

  if (exact) {
    auto sub = omega(shadow(false), budget, depth + 1);
    if (!sub) return std::nullopt;
    auto v = pick_x(*sub);
    if (!v) throw std::logic_error("omega: exact shadow produced empty range");
    (*sub)[x] = *v;
    return sub;
  }

  auto sub = omega(shadow(true), budget, depth + 1);
  if (sub) {
    auto v = pick_x(*sub);
    if (!v) throw std::logic_error("omega: dark shadow produced empty range");
    (*sub)[x] = *v;
    return sub;
  }

  // splinters: some lower bound must be nearly tight
  I64 amax = 1;
  for (const auto& [a, q] : uppers) amax = std::max(amax, a);
  for (const auto& [b, p] : lowers) {
    I64 top = floordiv(chk_mul(amax, b) - amax - b, amax);
    for (I64 i = 0; i <= top; ++i) {
      std::vector<Con> sp = cons;
      Lin eqn = p;
      eqn.add_var(x, b);
      eqn.k = chk_add(eqn.k, -i);
      sp.push_back({std::move(eqn), true});
      auto r = omega(std::move(sp), budget, depth + 1);
      if (r) return r;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- clause solving

struct ClauseProblem {
  std::map<std::string, bool> bools;
  std::vector<Con> cons;
  bool contradictory = false;
};

ClauseProblem split_clause(const Clause& cl) {
  ClauseProblem p;
  for (const auto& a : cl) {
    if (a.kind == Atom::BoolVar) {
      auto it = p.bools.find(a.name);
      if (it != p.bools.end() && it->second != a.positive) {
        p.contradictory = true;
        return p;
      }
      p.bools[a.name] = a.positive;
    } else {
      p.cons.push_back({a.lin, a.kind == Atom::Eq});
    }
  }
  return p;
}

void collect_clause_vars(const Dnf& d, std::vector<std::string>& ints,
                         std::vector<std::string>& bools) {
  std::map<std::string, bool> seenI, seenB;
  for (const auto& cl : d)
    for (const auto& a : cl) {
      if (a.kind == Atom::BoolVar) {
        if (!seenB.count(a.name)) {
          seenB[a.name] = true;
          bools.push_back(a.name);
        }
      } else {
        for (const auto& [v, x] : a.lin.c)
          if (!seenI.count(v)) {
            seenI[v] = true;
            ints.push_back(v);
          }
      }
    }
}

bool clause_holds(const ClauseProblem& p, const Assign& ints,
                  const std::map<std::string, bool>& bools) {
  if (p.contradictory) return false;
  for (const auto& [n, v] : p.bools) {
    auto it = bools.find(n);
    if (it == bools.end() || it->second != v) return false;
  }
  for (const auto& cn : p.cons) {
    I64 v = lin_eval(cn.lin, ints);
    if (cn.eq ? v != 0 : v < 0) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------- public API

std::string show_countermodel(const Invalid& m) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [n, v] : m.ints) {
    os << (first ? "" : ", ") << n << " = " << v;
    first = false;
  }
  for (const auto& [n, v] : m.bools) {
    os << (first ? "" : ", ") << n << " = " << (v ? "true" : "false");
    first = false;
  }
  return os.str();
}

std::optional<bool> eval_prop(const SPtr& prop, const std::map<std::string, long long>& ints,
                              const std::map<std::string, bool>& bools) {
  return eval_bool(beta_normalize(prop), ints, bools);
}

Verdict entails(const ConstraintStore& store, const SPtr& prop) {
  try {
    Dnf neg = to_dnf(beta_normalize(prop), false);
    for (const auto& f : store.facts) neg = dnf_and(neg, to_dnf(beta_normalize(f), true));

    std::vector<std::string> intVars, boolVars;
    collect_clause_vars(neg, intVars, boolVars);
    std::vector<ClauseProblem> probs;
    probs.reserve(neg.size());
    for (const auto& cl : neg) probs.push_back(split_clause(cl));

    auto found = [&](Assign ints, std::map<std::string, bool> bools) {
      Invalid w;
      // complete over the store so callers can evaluate facts and prop
      for (const auto& [n, s] : store.vars) {
        if (s == sort_int() && !ints.count(n)) ints[n] = 0;
        if (s == sort_bool() && !bools.count(n)) bools[n] = false;
      }
      w.ints = {ints.begin(), ints.end()};
      w.bools = std::move(bools);
      return Verdict{std::move(w)};
    };

    // small-first search keeps witnesses inside the reference oracle's range
    constexpr long long kSmall = 8;
    double space = 1;
    for (size_t i = 0; i < intVars.size(); ++i) space *= 2 * kSmall + 1;
    for (size_t i = 0; i < boolVars.size(); ++i) space *= 2;
    if (space <= 200000) {
      Assign ints;
      std::map<std::string, bool> bools;
      // enumerate by increasing max-abs so the first hit is smallest
      std::function<bool(size_t, long long)> go = [&](size_t idx, long long cap) -> bool {
        if (idx < intVars.size()) {
          for (long long v = -cap; v <= cap; ++v) {
            ints[intVars[idx]] = v;
            if (go(idx + 1, cap)) return true;
          }
          ints.erase(intVars[idx]);
          return false;
        }
        size_t bi = idx - intVars.size();
        if (bi < boolVars.size()) {
          for (bool v : {false, true}) {
            bools[boolVars[bi]] = v;
            if (go(idx + 1, cap)) return true;
          }
          bools.erase(boolVars[bi]);
          return false;
        }
        // reject assignments already covered by a smaller cap
        if (cap > 0) {
          bool onEdge = intVars.empty();
          for (const auto& [n, v] : ints)
            if (v == cap || v == -cap) onEdge = true;
          if (!intVars.empty() && !onEdge) return false;
        }
        for (const auto& p : probs)
          if (clause_holds(p, ints, bools)) return true;
        return false;
      };
      for (long long cap = 0; cap <= kSmall; ++cap)
        if (go(0, cap)) return found(ints, bools);
    }

    // definitive answer via the shadow test, clause by clause
    Budget budget;
    for (const auto& p : probs) {
      if (p.contradictory) continue;
      auto sub = omega(p.cons, budget, 0);
      if (sub) {
        Assign ints;
        for (const auto& v : intVars) ints[v] = sub->count(v) ? (*sub)[v] : 0;
        return found(std::move(ints), p.bools);
      }
    }
    return Valid{};
  } catch (const Unsup& u) {
    return Unsupported{u.reason};
  } catch (const Overflow&) {
    return Unsupported{"integer overflow while solving constraints"};
  }
}

OracleResult oracle_entails(const ConstraintStore& store, const SPtr& prop, long long bound) {
  std::vector<std::string> intVars, boolVars;
  for (const auto& [n, s] : store.vars) {
    if (s == sort_int()) intVars.push_back(n);
    else if (s == sort_bool()) boolVars.push_back(n);
  }
  std::vector<SPtr> facts;
  facts.reserve(store.facts.size());
  for (const auto& f : store.facts) facts.push_back(beta_normalize(f));
  SPtr goal = beta_normalize(prop);

  std::map<std::string, long long> ints;
  std::map<std::string, bool> bools;
  OracleResult res{OracleVerdict::Valid, {}};

  std::function<bool(size_t)> go = [&](size_t idx) -> bool {  // true: stop search
    if (idx < intVars.size()) {
      for (long long v = -bound; v <= bound; ++v) {
        ints[intVars[idx]] = v;
        if (go(idx + 1)) return true;
      }
      return false;
    }
    size_t bi = idx - intVars.size();
    if (bi < boolVars.size()) {
      for (bool v : {false, true}) {
        bools[boolVars[bi]] = v;
        if (go(idx + 1)) return true;
      }
      return false;
    }
    for (const auto& f : facts) {
      auto h = eval_bool(f, ints, bools);
      if (!h) {
        res.verdict = OracleVerdict::Inconclusive;
        return true;
      }
      if (!*h) return false;  // assumption violated, assignment irrelevant
    }
    auto g = eval_bool(goal, ints, bools);
    if (!g) {
      res.verdict = OracleVerdict::Inconclusive;
      return true;
    }
    if (!*g) {
      res.verdict = OracleVerdict::Invalid;
      res.witness.ints = ints;
      res.witness.bools = bools;
      return true;
    }
    return false;
  };
  go(0);
  return res;
}

}  // namespace sessc
