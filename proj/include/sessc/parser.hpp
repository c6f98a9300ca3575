#ifndef SESSC_PARSER_HPP
#define SESSC_PARSER_HPP

// S-expression frontend.
//
// program   := toplevel*
// toplevel  := (stype NAME ((a sort)*) proto)        named protocol, may self-recurse
//            | (defun NAME {a sort prop?}* ((x type)*) type term)
//            | (main term)
// sort      := int | bool | stype
// type      := unit | int | bool | string | (int s) | (bool s)
//            | (chan ROLE proto) | (-> t t) | (-o t t) | (times t t) | (tensor t t)
//            | (guard prop t) | (assert prop t)
//            | (forall (a sort) t) | (exists (a sort) t) | (arrref t s)
// proto     := (end ROLE) | (msg ROLE type proto) | (branch ROLE proto proto)
//            | (ite prop proto proto) | (quan ROLE (a sort) proto) | (NAME s*) | NAME
// ROLE      := S | C
// statics s and props use NAME, INT, true/false, top, bot and the operators
//   + - * = <> < <= > >= and or imp not
// term      := NAME | INT | true | false | STRING | ()
//            | (lam (x type?) e) | (llam (x type?) e) | (let x e e)
//            | (let-pair (x y) e e) | (pair e e) | (fst e) | (snd e)
//            | (if e e e) | (seq e e+)
//            | (OP {s}* e*)                            primitives, session ops, functions
//            | (guard-intro e) | (guard-elim e)
//            | (assert-intro e) | (let-assert x e e)
//            | (forall-lam (a sort) e) | (forall-app e {s})
//            | (exists-intro {s} e) | (let-exists (a x) e e)
//            | (e e+)                                  application of a term
// Braces always hold statics. Comments run from ';' to end of line.

#include <string>
#include <vector>

#include "sessc/terms.hpp"

namespace sessc {

struct StypeDef {
  std::string name;
  std::vector<std::pair<std::string, Sort>> params;
  SPtr family;     // k>0 recursive: hofix functional; k>0 plain: lambda; k=0: the protocol
  bool recursive;  // body mentions the definition itself
};

struct StaticParam {
  std::string name;
  Sort sort;
  SPtr prop;  // guard assumed over the parameters; may be null
};

struct FunDef {
  std::string name;
  std::vector<StaticParam> staticParams;
  std::vector<std::pair<std::string, SPtr>> params;
  SPtr result;
  DPtr body;
  Span span;
};

struct Program {
  std::vector<StypeDef> stypes;
  std::vector<FunDef> funs;
  DPtr main;
  Span mainSpan;

  const StypeDef* stype(const std::string& n) const;
  const FunDef* fun(const std::string& n) const;
};

Program parse_program(const std::string& src);

// expand a named protocol reference to its static term
SPtr stype_ref(const StypeDef& def, const std::vector<SPtr>& args);

// test entry points: parse a single expression of each category
SPtr parse_static_str(const std::string& src);
SPtr parse_type_str(const std::string& src);
DPtr parse_term_str(const std::string& src);

std::string print_program(const Program& p);

}  // namespace sessc

#endif
