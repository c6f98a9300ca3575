#ifndef SESSC_CONSTRAINTS_HPP
#define SESSC_CONSTRAINTS_HPP

// Entailment of index propositions: given assumptions over int/bool statics,
// decide whether a bool-sorted static holds for every assignment. Linear
// integer arithmetic is decided exactly (an Omega-style shadow test with
// equality elimination and splintering); anything nonlinear is reported as
// unsupported rather than guessed.

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sessc/statics.hpp"

namespace sessc {

struct ConstraintStore {
  std::map<std::string, Sort> vars;  // free statics in scope (atoms and metas)
  std::vector<SPtr> facts;           // assumed propositions, bool-sorted

  void declare(const std::string& name, Sort s) { vars[name] = s; }
  void assume(SPtr prop) { facts.push_back(std::move(prop)); }
};

struct Valid {};
struct Invalid {
  std::map<std::string, long long> ints;
  std::map<std::string, bool> bools;
};
struct Unsupported {
  std::string reason;
};
using Verdict = std::variant<Valid, Invalid, Unsupported>;

inline bool is_valid(const Verdict& v) { return std::holds_alternative<Valid>(v); }
std::string show_countermodel(const Invalid& m);

// Does store.facts entail prop for all values of store.vars? Invalid carries
// a falsifying assignment, searched small-first so witnesses stay comparable
// with bounded enumeration.
Verdict entails(const ConstraintStore& store, const SPtr& prop);

// Evaluate prop (or a fact conjunction) under a full assignment; nullopt when
// the assignment misses a name or the term is not closed under it.
std::optional<bool> eval_prop(const SPtr& prop, const std::map<std::string, long long>& ints,
                              const std::map<std::string, bool>& bools);

// Brute-force reference: enumerate every assignment with |int| <= bound.
// Reports Invalid only on an in-bound countermodel; Valid means no in-bound
// countermodel exists (weaker than entails' Valid). Inconclusive when some
// assignment fails to evaluate.
enum class OracleVerdict { Valid, Invalid, Inconclusive };
struct OracleResult {
  OracleVerdict verdict;
  Invalid witness;  // set when verdict == Invalid
};
OracleResult oracle_entails(const ConstraintStore& store, const SPtr& prop, long long bound);

}  // namespace sessc

#endif
