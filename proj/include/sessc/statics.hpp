#ifndef SESSC_STATICS_HPP
#define SESSC_STATICS_HPP

// Statics kernel: a simply-sorted lambda calculus whose terms are the index
// expressions, value types and session types of the surface language.
// Session types are ordinary static terms of sort stype; the checker and the
// runtime manipulate them through beta normalization and head analysis only.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sessc/diag.hpp"

namespace sessc {

// ---------------------------------------------------------------- sorts

enum class BaseSort { Int, Bool, Type, VType, SType };

class Sort {
 public:
  Sort() : Sort(base(BaseSort::Int)) {}
  static Sort base(BaseSort b);
  static Sort arrow(Sort dom, Sort cod);

  bool is_base() const { return node_->is_base; }
  BaseSort base_kind() const { return node_->b; }
  Sort dom() const { return Sort(node_->dom); }
  Sort cod() const { return Sort(node_->cod); }

  bool operator==(const Sort& o) const;
  bool operator!=(const Sort& o) const { return !(*this == o); }
  std::string show() const;

 private:
  struct Node {
    bool is_base;
    BaseSort b;
    std::shared_ptr<const Node> dom, cod;  // valid when !is_base
    Node(BaseSort bb) : is_base(true), b(bb) {}
    Node(std::shared_ptr<const Node> d, std::shared_ptr<const Node> c)
        : is_base(false), b(BaseSort::Int), dom(std::move(d)), cod(std::move(c)) {}
  };
  explicit Sort(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

inline Sort sort_int() { return Sort::base(BaseSort::Int); }
inline Sort sort_bool() { return Sort::base(BaseSort::Bool); }
inline Sort sort_type() { return Sort::base(BaseSort::Type); }
inline Sort sort_vtype() { return Sort::base(BaseSort::VType); }
inline Sort sort_stype() { return Sort::base(BaseSort::SType); }

// type is a subsort of vtype (every non-linear type is a value type).
bool sort_leq(const Sort& found, const Sort& expected);

// ---------------------------------------------------------------- terms

struct Static;
using SPtr = std::shared_ptr<const Static>;

struct SVar {
  int index;          // de Bruijn
  std::string hint;   // printing only
};
struct SInt {
  long long v;
};
struct SBool {
  bool v;
};
// Constant application. Free named statics (scheme parameters, let-exists
// binders, runtime metas) are nullary constants: metas are named "?<n>" and
// atoms carry their surface name.
struct SCst {
  std::string name;
  std::vector<SPtr> args;
};
struct SLam {
  std::string hint;
  Sort dom;
  SPtr body;
};
struct SApp {
  SPtr fn;
  SPtr arg;
};

struct Static {
  std::variant<SVar, SInt, SBool, SCst, SLam, SApp> node;
};

SPtr svar(int index, std::string hint = "");
SPtr sint(long long v);
SPtr sbool(bool v);
SPtr scst(std::string name, std::vector<SPtr> args = {});
SPtr slam(std::string hint, Sort dom, SPtr body);
SPtr sapp(SPtr fn, SPtr arg);
// Left-nested application of several arguments.
SPtr sapps(SPtr fn, const std::vector<SPtr>& args);

inline bool is_meta_name(const std::string& n) { return !n.empty() && n[0] == '?'; }
bool is_meta(const SPtr& t, std::string* name = nullptr);

// ---------------------------------------------------------------- signature

struct CSort {
  std::vector<Sort> args;
  Sort result;
};

// Constant table. A name may carry several c-sorts (e.g. int : ()=>type and
// int : (int)=>type); resolution picks the first overload whose arity and
// argument sorts fit. quan/forall/exists/hofix are sort families handled in
// code, but still appear here so lookup knows they exist.
class StaticSignature {
 public:
  static StaticSignature standard();  // all built-in constants preloaded

  void declare(const std::string& name, CSort cs);
  bool known(const std::string& name) const;
  const std::vector<CSort>* overloads(const std::string& name) const;

 private:
  std::map<std::string, std::vector<CSort>> table_;
};

// Sorting environment: de Bruijn context plus free named statics.
struct SortEnv {
  std::vector<Sort> ctx;                  // innermost binder last
  const std::map<std::string, Sort>* free = nullptr;  // atoms and metas
};

// Sort checking. Throws SortError (or a subclass) on failure.
Sort sort_check(const SortEnv& env, const StaticSignature& sig, const SPtr& t);

// ---------------------------------------------------------------- operations

// Shift free de Bruijn indices >= cutoff by d.
SPtr shift(const SPtr& t, int d, int cutoff = 0);
// Substitute `arg` for index 0 of a lambda body (and shift the rest down).
SPtr subst_top(const SPtr& body, const SPtr& arg);
// Replace nullary constants (atoms/metas) by closed terms.
SPtr subst_consts(const SPtr& t, const std::map<std::string, SPtr>& m);

// Full beta normalization plus literal folding of arithmetic, comparisons and
// boolean connectives on literal arguments. fix/hofix are never unrolled and
// ite is never discharged. Idempotent; sort-preserving.
SPtr beta_normalize(const SPtr& t);

// Structural equality up to alpha (hints ignored), no entailment.
bool alpha_equal(const SPtr& a, const SPtr& b);

bool occurs_const(const SPtr& t, const std::string& name);
void collect_const_names(const SPtr& t, std::vector<std::string>& out);

// Closed-term evaluation of int/bool statics (used by literal folding, the
// constraint oracle and the runtime). Returns nullopt on free vars/metas.
std::optional<long long> eval_int(const SPtr& t, const std::map<std::string, long long>& ints,
                                  const std::map<std::string, bool>& bools);
std::optional<bool> eval_bool(const SPtr& t, const std::map<std::string, long long>& ints,
                              const std::map<std::string, bool>& bools);

// ---------------------------------------------------------------- heads

enum class HeadKind { End, Msg, Branch, Ite, Quan, Fix, HoFix, Neutral };

// Decomposition of a beta-normal stype. Fields are set per kind:
//   End: role | Msg: role, payload, cont | Branch: role, left, right
//   Ite: cond, left, right | Quan: role, fn (lam) | Fix: fn (lam)
//   HoFix: fn (lam), args | Neutral: nothing
struct SessionHead {
  HeadKind kind = HeadKind::Neutral;
  SPtr role;
  SPtr payload;
  SPtr cont;
  SPtr cond;
  SPtr left;
  SPtr right;
  SPtr fn;
  std::vector<SPtr> args;
};

SessionHead session_head(const SPtr& stype);

// One unrolling of a fix or hofix head; other heads come back unchanged.
// The result is beta-normal.
SPtr unfold_session(const SPtr& stype);

// Replace every free occurrence of the nullary constant `name` with a
// variable bound just outside `t` (index 0 at the root).
SPtr abstract_const(const SPtr& t, const std::string& name);

// ---------------------------------------------------------------- printing

// S-expression rendering matching the surface grammar; role literals in role
// positions print as S/C.
std::string show_static(const SPtr& t);

}  // namespace sessc

#endif
