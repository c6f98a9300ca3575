#ifndef SESSC_TYPECHECK_HPP
#define SESSC_TYPECHECK_HPP

// Bidirectional linear type checking. Types are beta-normal statics of sort
// type or vtype; linearity is read off the sort (vtype-only types must be
// consumed exactly once). Index preconditions discharge through the
// constraint solver against the facts in scope.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "sessc/constraints.hpp"
#include "sessc/parser.hpp"
#include "sessc/statics.hpp"
#include "sessc/terms.hpp"

namespace sessc {

struct Binding {
  SPtr type;  // beta-normal
  bool linear = false;
};

// Linear variables consumed by a subterm. Endpoint literals (runtime
// checking) appear as "%ep:<chan>:<role>" keys.
using Used = std::set<std::string>;

struct TypeEnv {
  const Program* prog = nullptr;  // user function schemes; may be null
  ConstraintStore store;          // statics in scope and assumed facts
  std::map<std::string, Binding> vars;
  // Types for endpoint literals when checking a running pool; null result
  // means the endpoint is closed or foreign.
  std::function<SPtr(int, int)> endpointType;
};

// The shared sorting signature.
const StaticSignature& type_signature();

// Sort of a static under env.store.vars; SortError surfaces as TypeError
// rule "ill-sorted" at `sp`.
Sort sort_of(const TypeEnv& env, const SPtr& t, Span sp = {});

bool is_linear_type(const TypeEnv& env, const SPtr& ty);

// Provable equality of two statics under the facts in scope.
bool sem_equal(const TypeEnv& env, const SPtr& a, const SPtr& b);

// Subtyping: singleton widening, provable singleton equality, times below
// tensor, unrestricted below linear functions with the usual variances;
// channels compare roles and protocols up to provable index equality.
bool type_leq(const TypeEnv& env, const SPtr& sub, const SPtr& super);

struct Typed {
  SPtr type;
  Used used;
};

Typed synth(const TypeEnv& env, const DPtr& t);
Used check(const TypeEnv& env, const DPtr& t, const SPtr& expected);

// Whole-program checking: protocols sort, each function body checks against
// its declared result consuming exactly its linear parameters, and main
// synthesizes an unrestricted type in the empty environment.
void check_program(const Program& prog);

}  // namespace sessc

#endif
