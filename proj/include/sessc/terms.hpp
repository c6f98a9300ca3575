#ifndef SESSC_TERMS_HPP
#define SESSC_TERMS_HPP

// Dynamic terms: a call-by-value lambda calculus with pairs, conditionals,
// constant application (primitives, session operations, user functions) and
// explicit proof markers for guarded/asserted/quantified types. Evaluation is
// by substitution; closures are lambdas whose environment has been
// substituted in. Endpoints and arrays exist only at runtime.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sessc/statics.hpp"

namespace sessc {

struct Dyn;
using DPtr = std::shared_ptr<const Dyn>;

struct DVar {
  std::string name;
};
struct DUnit {};
struct DIntLit {
  long long v;
};
struct DBoolLit {
  bool v;
};
struct DStrLit {
  std::string v;
};
struct DLam {
  std::string param;
  std::optional<SPtr> ann;  // parameter type, needed to synthesize
  bool linear;              // linear lambdas may capture endpoints
  DPtr body;
};
struct DApp {
  DPtr fn;
  DPtr arg;
};
struct DPair {
  DPtr fst;
  DPtr snd;
};
struct DLetPair {
  std::string x, y;
  DPtr rhs;
  DPtr body;
};
struct DIf {
  DPtr cond;
  DPtr thenB;
  DPtr elseB;
};
// Constant application: primitives, session API, user functions. staticArgs
// are explicit brace instantiations; more may be inferred during checking.
struct DConstApp {
  std::string name;
  std::vector<SPtr> staticArgs;
  std::vector<DPtr> args;
};
// proof markers
struct DGuardIntro {
  DPtr body;
};
struct DGuardElim {
  DPtr body;
};
struct DAssertIntro {
  DPtr body;
};
struct DLetAssert {
  std::string x;
  DPtr rhs;
  DPtr body;
};
struct DForallIntro {
  std::string a;
  Sort sort;
  DPtr body;
};
struct DForallElim {
  DPtr body;
  std::optional<SPtr> arg;
};
struct DExistsIntro {
  std::optional<SPtr> witness;  // runtime mints a meta when absent
  DPtr body;
};
struct DLetExists {
  std::string a;  // static name
  std::string x;  // dynamic name
  DPtr rhs;
  DPtr body;
};
// runtime-only values
struct DEndpoint {
  int chan;
  int role;  // 0 server, 1 client
};
struct DArrVal {
  std::vector<DPtr> elems;
};

struct Dyn {
  std::variant<DVar, DUnit, DIntLit, DBoolLit, DStrLit, DLam, DApp, DPair, DLetPair, DIf,
               DConstApp, DGuardIntro, DGuardElim, DAssertIntro, DLetAssert, DForallIntro,
               DForallElim, DExistsIntro, DLetExists, DEndpoint, DArrVal>
      node;
  Span span;
};

DPtr mkdyn(Dyn d);
template <typename T>
DPtr mk(T node, Span span = {}) {
  return mkdyn(Dyn{std::move(node), span});
}

DPtr dvar(std::string n, Span s = {});
DPtr dunit(Span s = {});
DPtr dint(long long v, Span s = {});
DPtr dbool(bool v, Span s = {});
DPtr dstr(std::string v, Span s = {});
DPtr dapp(DPtr f, DPtr a, Span s = {});
DPtr dlet(std::string x, DPtr rhs, DPtr body, Span s = {});  // app of a lambda
DPtr dconst(std::string name, std::vector<SPtr> staticArgs, std::vector<DPtr> args, Span s = {});
DPtr dendpoint(int chan, int role);

// session/proof operation classification
bool is_session_op(const std::string& name);   // operations the pool arbitrates
bool is_proof_op(const std::string& name);     // unify/exify/itet/itef/recurse
bool is_primitive(const std::string& name);    // delta rules in step_local

bool is_value(const DPtr& t);

// free dynamic variables (names), for linear-capture checks
void free_vars(const DPtr& t, std::vector<std::string>& out);

// substitute a closed value for a free variable
DPtr subst_var(const DPtr& t, const std::string& name, const DPtr& v);
// substitute statics for free static names in every embedded static
DPtr subst_statics(const DPtr& t, const std::map<std::string, SPtr>& m);

// endpoint multiset of a term (runtime resource accounting)
void collect_endpoints(const DPtr& t, std::map<std::pair<int, int>, int>& out);

// --------------------------------------------------------------- evaluation

enum class DecompKind { Value, Local, Session, Stuck };

struct Decomp {
  DecompKind kind = DecompKind::Value;
  DPtr redex;                          // Local/Session/Stuck
  std::function<DPtr(DPtr)> plug;      // rebuild the whole term
  std::string why;                     // Stuck diagnostics
};

// Leftmost-innermost call-by-value decomposition. Session operations with
// value arguments surface as Session redexes for the pool to arbitrate; in
// materialized runs proof operations do too.
Decomp decompose(const DPtr& t);

// Resolver for user functions: name -> closed definition expecting its
// static and dynamic arguments substituted. Returns nullptr for unknown.
struct UserFunDef {
  std::vector<std::pair<std::string, Sort>> staticParams;
  std::vector<SPtr> props;  // guards, conjoined
  std::vector<std::pair<std::string, SPtr>> params;
  SPtr result;
  DPtr body;
};
using FunResolver = std::function<const UserFunDef*(const std::string&)>;

// Contract a Local redex: beta, pair/if/marker elimination, delta rules for
// primitives, user-function unfolding. print* appends to output. Returns
// nullopt if the redex is not local (session op) and throws StuckTerm when
// the redex is malformed.
std::optional<DPtr> step_local(const DPtr& redex, const FunResolver& funs,
                               std::vector<std::string>* output);

// Strip proof markers, brace instantiations and proof operations; the erased
// program computes the same dynamic values without any static content.
DPtr erase_proofs(const DPtr& t);

std::string show_dyn(const DPtr& t);

}  // namespace sessc

#endif
