#include "sessc/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace sessc {

namespace {

// ---------------------------------------------------------------- reader

struct SExpr {
  enum Kind { Sym, Int, Str, List, Braces } kind;
  std::string sym;
  long long num = 0;
  std::vector<SExpr> items;
  Span span;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  Span here() const { return Span{line, col}; }

  void advance() {
    if (pos < src.size() && src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == ';') {
        while (pos < src.size() && src[pos] != '\n') advance();
      } else if (std::isspace((unsigned char)c)) {
        advance();
      } else {
        break;
      }
    }
  }

  bool at_end() {
    skip_ws();
    return pos >= src.size();
  }

  static bool sym_char(char c) {
    return !std::isspace((unsigned char)c) && c != '(' && c != ')' && c != '{' && c != '}' &&
           c != '[' && c != ']' && c != ';' && c != '"';
  }

  SExpr read() {
    skip_ws();
    Span sp = here();
    if (pos >= src.size()) throw ParseError(sp, "unexpected end of input");
    char c = src[pos];
    if (c == '(' || c == '{') {
      char close = c == '(' ? ')' : '}';
      advance();
      SExpr e;
      e.kind = c == '(' ? SExpr::List : SExpr::Braces;
      e.span = sp;
      while (true) {
        skip_ws();
        if (pos >= src.size()) throw ParseError(sp, "unclosed delimiter");
        if (src[pos] == close) {
          advance();
          return e;
        }
        if (src[pos] == ')' || src[pos] == '}')
          throw ParseError(here(), "mismatched delimiter");
        e.items.push_back(read());
      }
    }
    if (c == ')' || c == '}') throw ParseError(sp, "unexpected closing delimiter");
    if (c == '[' || c == ']') throw ParseError(sp, "brackets are not part of the syntax");
    if (c == '"') {
      advance();
      std::string s;
      while (pos < src.size() && src[pos] != '"') {
        if (src[pos] == '\\' && pos + 1 < src.size()) {
          advance();
          char e = src[pos];
          s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        } else {
          s += src[pos];
        }
        advance();
      }
      if (pos >= src.size()) throw ParseError(sp, "unterminated string");
      advance();
      SExpr e;
      e.kind = SExpr::Str;
      e.sym = std::move(s);
      e.span = sp;
      return e;
    }
    std::string tok;
    while (pos < src.size() && sym_char(src[pos])) {
      tok += src[pos];
      advance();
    }
    if (tok.empty()) throw ParseError(sp, std::string("stray character '") + c + "'");
    bool numeric = !tok.empty() && (std::isdigit((unsigned char)tok[0]) ||
                                    (tok[0] == '-' && tok.size() > 1 &&
                                     std::isdigit((unsigned char)tok[1])));
    SExpr e;
    e.span = sp;
    if (numeric) {
      e.kind = SExpr::Int;
      try {
        e.num = std::stoll(tok);
      } catch (...) {
        throw ParseError(sp, "integer literal out of range: " + tok);
      }
    } else {
      e.kind = SExpr::Sym;
      e.sym = std::move(tok);
    }
    return e;
  }
};

bool is_sym(const SExpr& e, const char* s) { return e.kind == SExpr::Sym && e.sym == s; }

const SExpr& need(const SExpr& e, size_t i, const char* what) {
  if (i >= e.items.size()) throw ParseError(e.span, std::string("missing ") + what);
  return e.items[i];
}

std::string need_sym(const SExpr& e, const char* what) {
  if (e.kind != SExpr::Sym) throw ParseError(e.span, std::string("expected ") + what);
  return e.sym;
}

// ---------------------------------------------------------------- statics

struct StBinder {
  std::string name;
  Sort sort;
};

struct Tables {
  std::vector<StypeDef> stypes;
  std::set<std::string> funNames;

  const StypeDef* stype(const std::string& n) const {
    for (const auto& d : stypes)
      if (d.name == n) return &d;
    return nullptr;
  }
};

Sort parse_sort(const SExpr& e) {
  if (e.kind == SExpr::Sym) {
    if (e.sym == "int") return sort_int();
    if (e.sym == "bool") return sort_bool();
    if (e.sym == "stype") return sort_stype();
    if (e.sym == "type") return sort_type();
    if (e.sym == "vtype") return sort_vtype();
    throw ParseError(e.span, "unknown sort " + e.sym);
  }
  if (e.kind == SExpr::List && e.items.size() == 3 && is_sym(e.items[0], "->"))
    return Sort::arrow(parse_sort(e.items[1]), parse_sort(e.items[2]));
  throw ParseError(e.span, "expected a sort");
}

struct StaticCtx {
  const Tables* tables = nullptr;
  std::vector<StBinder> binders;
  bool* usedSelf = nullptr;        // set when `self` resolves
  std::string self;                // name of the enclosing stype def

  int lookup(const std::string& n) const {
    for (int i = (int)binders.size() - 1; i >= 0; --i)
      if (binders[(size_t)i].name == n) return (int)binders.size() - 1 - i;
    return -1;
  }
};

SPtr parse_static(const SExpr& e, StaticCtx& cx);

SPtr parse_binder_form(const SExpr& e, size_t bindIdx, size_t bodyIdx, StaticCtx& cx) {
  const SExpr& b = need(e, bindIdx, "binder");
  if (b.kind != SExpr::List || b.items.size() != 2)
    throw ParseError(b.span, "expected (name sort)");
  std::string name = need_sym(b.items[0], "binder name");
  Sort s = parse_sort(b.items[1]);
  cx.binders.push_back({name, s});
  SPtr body = parse_static(need(e, bodyIdx, "body"), cx);
  cx.binders.pop_back();
  return slam(name, s, body);
}

const std::set<std::string>& binary_static_ops() {
  static const std::set<std::string> ops{"+",   "-",  "*",  "=",  "<>",    "<",     "<=",
                                         ">",   ">=", "and", "or", "imp",   "times", "tensor",
                                         "->",  "-o", "guard", "assert", "arrref", "subty"};
  return ops;
}

SPtr parse_static(const SExpr& e, StaticCtx& cx) {
  switch (e.kind) {
    case SExpr::Int:
      return sint(e.num);
    case SExpr::Str:
      throw ParseError(e.span, "strings are not statics");
    case SExpr::Braces:
      throw ParseError(e.span, "unexpected braces inside a static");
    case SExpr::Sym: {
      const std::string& n = e.sym;
      if (n == "true") return sbool(true);
      if (n == "false") return sbool(false);
      if (n == "S") return sint(0);
      if (n == "C") return sint(1);
      int ix = cx.lookup(n);
      if (ix >= 0) {
        if (cx.usedSelf && n == cx.self) *cx.usedSelf = true;
        return svar(ix, n);
      }
      if (cx.tables) {
        if (const StypeDef* d = cx.tables->stype(n)) {
          if (!d->params.empty())
            throw ParseError(e.span, n + " expects " + std::to_string(d->params.size()) +
                                         " static arguments");
          return stype_ref(*d, {});
        }
      }
      // nullary built-ins and free atoms
      return scst(n);
    }
    case SExpr::List:
      break;
  }
  if (e.items.empty()) return scst("unit");
  if (e.items[0].kind != SExpr::Sym) {
    // raw application (sapp f a) is the only headless form we print
    throw ParseError(e.span, "static application must use a named head");
  }
  const std::string& h = e.items[0].sym;
  auto arg = [&](size_t i) { return parse_static(need(e, i, "static argument"), cx); };
  auto arity = [&](size_t n) {
    if (e.items.size() != n + 1)
      throw ParseError(e.span, h + " expects " + std::to_string(n) + " arguments");
  };

  if (h == "msg") {
    arity(3);
    return scst("seq", {scst("msg", {arg(1), arg(2)}), arg(3)});
  }
  if (h == "seq") {
    arity(2);
    return scst("seq", {arg(1), arg(2)});
  }
  if (h == "end" || h == "not" || h == "int" || h == "bool") {
    arity(1);
    return scst(h, {arg(1)});
  }
  if (h == "branch" || h == "ite") {
    arity(3);
    return scst(h, {arg(1), arg(2), arg(3)});
  }
  if (h == "quan") {
    arity(3);
    return scst("quan", {arg(1), parse_binder_form(e, 2, 3, cx)});
  }
  if (h == "forall" || h == "exists") {
    arity(2);
    return scst(h, {parse_binder_form(e, 1, 2, cx)});
  }
  if (h == "fix") {
    arity(2);
    return scst("fix", {parse_binder_form(e, 1, 2, cx)});
  }
  if (h == "hofix") {
    if (e.items.size() < 3) throw ParseError(e.span, "hofix expects a body and indices");
    std::vector<SPtr> args;
    for (size_t i = 1; i < e.items.size(); ++i) args.push_back(arg(i));
    return scst("hofix", std::move(args));
  }
  if (h == "slam") return parse_binder_form(e, 1, 2, cx);
  if (h == "sapp") {
    arity(2);
    return sapp(arg(1), arg(2));
  }
  if (h == "chan") {
    arity(2);
    return scst("chan", {arg(1), arg(2)});
  }
  if (binary_static_ops().count(h)) {
    arity(2);
    return scst(h, {arg(1), arg(2)});
  }
  // named protocol reference with arguments
  if (cx.lookup(h) >= 0) {
    std::vector<SPtr> args;
    for (size_t i = 1; i < e.items.size(); ++i) args.push_back(arg(i));
    if (cx.usedSelf && h == cx.self) *cx.usedSelf = true;
    return sapps(svar(cx.lookup(h), h), args);
  }
  if (cx.tables) {
    if (const StypeDef* d = cx.tables->stype(h)) {
      if (d->params.size() != e.items.size() - 1)
        throw ParseError(e.span, h + " expects " + std::to_string(d->params.size()) +
                                     " static arguments");
      std::vector<SPtr> args;
      for (size_t i = 1; i < e.items.size(); ++i) args.push_back(arg(i));
      return stype_ref(*d, args);
    }
  }
  throw ParseError(e.span, "unknown static form " + h);
}

// ---------------------------------------------------------------- terms

struct TermCtx {
  const Tables* tables;
  std::vector<std::string> bound;
  int gensym = 0;

  bool is_bound(const std::string& n) const {
    return std::find(bound.begin(), bound.end(), n) != bound.end();
  }
};

DPtr parse_term(const SExpr& e, TermCtx& cx);

SPtr parse_static_in_term(const SExpr& braces, const TermCtx& cx) {
  if (braces.items.size() != 1)
    throw ParseError(braces.span, "braces must hold exactly one static");
  StaticCtx scx;
  scx.tables = cx.tables;
  return parse_static(braces.items[0], scx);
}

SPtr parse_type_in_term(const SExpr& e, const TermCtx& cx) {
  StaticCtx scx;
  scx.tables = cx.tables;
  return parse_static(e, scx);
}

DPtr parse_lam(const SExpr& e, TermCtx& cx, bool linear) {
  const SExpr& b = need(e, 1, "parameter");
  if (b.kind != SExpr::List || b.items.empty() || b.items.size() > 2)
    throw ParseError(b.span, "expected (name) or (name type)");
  std::string x = need_sym(b.items[0], "parameter name");
  std::optional<SPtr> ann;
  if (b.items.size() == 2) ann = parse_type_in_term(b.items[1], cx);
  cx.bound.push_back(x);
  DPtr body = parse_term(need(e, 2, "body"), cx);
  cx.bound.pop_back();
  return mk(DLam{x, ann, linear, body}, e.span);
}

DPtr parse_term(const SExpr& e, TermCtx& cx) {
  switch (e.kind) {
    case SExpr::Int:
      return dint(e.num, e.span);
    case SExpr::Str:
      return dstr(e.sym, e.span);
    case SExpr::Braces:
      throw ParseError(e.span, "braces need an operation to attach to");
    case SExpr::Sym: {
      if (e.sym == "true") return dbool(true, e.span);
      if (e.sym == "false") return dbool(false, e.span);
      return dvar(e.sym, e.span);
    }
    case SExpr::List:
      break;
  }
  if (e.items.empty()) return dunit(e.span);
  const SExpr& head = e.items[0];

  if (head.kind == SExpr::Sym && !cx.is_bound(head.sym)) {
    const std::string& h = head.sym;
    auto sub = [&](size_t i) { return parse_term(need(e, i, "argument"), cx); };
    auto arity = [&](size_t n, const char* what) {
      if (e.items.size() != n + 1) throw ParseError(e.span, std::string(h) + " expects " + what);
    };

    if (h == "lam") return parse_lam(e, cx, false);
    if (h == "llam") return parse_lam(e, cx, true);
    if (h == "let") {
      arity(3, "a name, a value and a body");
      std::string x = need_sym(need(e, 1, "name"), "name");
      DPtr rhs = sub(2);
      cx.bound.push_back(x);
      DPtr body = parse_term(e.items[3], cx);
      cx.bound.pop_back();
      return dlet(x, rhs, body, e.span);
    }
    if (h == "let-pair") {
      arity(3, "names, a value and a body");
      const SExpr& names = e.items[1];
      if (names.kind != SExpr::List || names.items.size() != 2)
        throw ParseError(names.span, "expected (x y)");
      std::string x = need_sym(names.items[0], "name");
      std::string y = need_sym(names.items[1], "name");
      DPtr rhs = sub(2);
      cx.bound.push_back(x);
      cx.bound.push_back(y);
      DPtr body = parse_term(e.items[3], cx);
      cx.bound.pop_back();
      cx.bound.pop_back();
      return mk(DLetPair{x, y, rhs, body}, e.span);
    }
    if (h == "pair") {
      arity(2, "two components");
      return mk(DPair{sub(1), sub(2)}, e.span);
    }
    if (h == "if") {
      arity(3, "a condition and two branches");
      return mk(DIf{sub(1), sub(2), sub(3)}, e.span);
    }
    if (h == "seq") {
      if (e.items.size() < 3) throw ParseError(e.span, "seq expects at least two terms");
      DPtr acc = parse_term(e.items.back(), cx);
      for (size_t i = e.items.size() - 2; i >= 1; --i)
        acc = dlet("_seq" + std::to_string(i), parse_term(e.items[i], cx), acc, e.span);
      return acc;
    }
    if (h == "guard-intro" || h == "guard-elim" || h == "assert-intro") {
      arity(1, "one term");
      DPtr b = sub(1);
      if (h == "guard-intro") return mk(DGuardIntro{b}, e.span);
      if (h == "guard-elim") return mk(DGuardElim{b}, e.span);
      return mk(DAssertIntro{b}, e.span);
    }
    if (h == "let-assert") {
      arity(3, "a name, a value and a body");
      std::string x = need_sym(need(e, 1, "name"), "name");
      DPtr rhs = sub(2);
      cx.bound.push_back(x);
      DPtr body = parse_term(e.items[3], cx);
      cx.bound.pop_back();
      return mk(DLetAssert{x, rhs, body}, e.span);
    }
    if (h == "forall-lam") {
      arity(2, "a binder and a body");
      const SExpr& b = e.items[1];
      if (b.kind != SExpr::List || b.items.size() != 2)
        throw ParseError(b.span, "expected (name sort)");
      return mk(DForallIntro{need_sym(b.items[0], "name"), parse_sort(b.items[1]), sub(2)},
                e.span);
    }
    if (h == "forall-app") {
      arity(2, "a term and a brace static");
      DPtr body = sub(1);
      const SExpr& br = e.items[2];
      if (br.kind != SExpr::Braces) throw ParseError(br.span, "expected {static}");
      return mk(DForallElim{body, parse_static_in_term(br, cx)}, e.span);
    }
    if (h == "exists-intro") {
      arity(2, "a brace witness and a term");
      const SExpr& br = e.items[1];
      if (br.kind != SExpr::Braces) throw ParseError(br.span, "expected {static}");
      return mk(DExistsIntro{parse_static_in_term(br, cx), parse_term(e.items[2], cx)}, e.span);
    }
    if (h == "let-exists") {
      arity(3, "binders, a value and a body");
      const SExpr& names = e.items[1];
      if (names.kind != SExpr::List || names.items.size() != 2)
        throw ParseError(names.span, "expected (a x)");
      std::string a = need_sym(names.items[0], "static name");
      std::string x = need_sym(names.items[1], "name");
      DPtr rhs = sub(2);
      cx.bound.push_back(x);
      DPtr body = parse_term(e.items[3], cx);
      cx.bound.pop_back();
      return mk(DLetExists{a, x, rhs, body}, e.span);
    }
    // sugar over the boolean-tagged branch primitives
    if (h == "choose-left" || h == "choose-right") {
      arity(1, "one channel");
      bool left = h == "choose-left";
      DPtr tagged = dconst("choose", {}, {sub(1), mk(DBoolLit{left}, e.span)}, e.span);
      return dconst(left ? "itet" : "itef", {}, {tagged}, e.span);
    }
    if (h == "offer" && e.items.size() == 4) {
      // (offer ch onLeft onRight): receive the tag, discharge the ite, apply
      std::string k = std::to_string(++cx.gensym);
      std::string b = "%b" + k, pk = "%pk" + k, tag = "%tag" + k, ch = "%ch" + k;
      DPtr rhs = dconst("offer", {}, {sub(1)}, e.span);
      DPtr h1 = sub(2), h2 = sub(3);
      auto arm = [&](DPtr hnd, const char* dis) {
        return dapp(hnd, dconst(dis, {}, {mk(DVar{ch}, e.span)}, e.span), e.span);
      };
      DPtr body = mk(DIf{mk(DVar{tag}, e.span), arm(h1, "itet"), arm(h2, "itef")}, e.span);
      DPtr inner = mk(DLetPair{tag, ch, mk(DVar{pk}, e.span), body}, e.span);
      return mk(DLetExists{b, pk, rhs, inner}, e.span);
    }
    // constant application: primitives, session ops, user functions
    if (is_primitive(h) || is_session_op(h) || cx.tables->funNames.count(h)) {
      std::vector<SPtr> staticArgs;
      std::vector<DPtr> args;
      for (size_t i = 1; i < e.items.size(); ++i) {
        if (e.items[i].kind == SExpr::Braces)
          staticArgs.push_back(parse_static_in_term(e.items[i], cx));
        else
          args.push_back(parse_term(e.items[i], cx));
      }
      return dconst(h, std::move(staticArgs), std::move(args), e.span);
    }
  }

  // application of an arbitrary term; brace arguments instantiate quantifiers
  DPtr acc = parse_term(head, cx);
  for (size_t i = 1; i < e.items.size(); ++i) {
    if (e.items[i].kind == SExpr::Braces)
      acc = mk(DForallElim{acc, parse_static_in_term(e.items[i], cx)}, e.span);
    else
      acc = dapp(acc, parse_term(e.items[i], cx), e.span);
  }
  return acc;
}

// ---------------------------------------------------------------- toplevel

StypeDef parse_stype_def(const SExpr& e, const Tables& tables) {
  StypeDef def;
  def.name = need_sym(need(e, 1, "protocol name"), "protocol name");
  const SExpr& ps = need(e, 2, "parameter list");
  if (ps.kind != SExpr::List) throw ParseError(ps.span, "expected a parameter list");
  for (const auto& p : ps.items) {
    if (p.kind != SExpr::List || p.items.size() != 2)
      throw ParseError(p.span, "expected (name sort)");
    def.params.push_back({need_sym(p.items[0], "name"), parse_sort(p.items[1])});
  }

  Sort selfSort = sort_stype();
  for (auto it = def.params.rbegin(); it != def.params.rend(); ++it)
    selfSort = Sort::arrow(it->second, selfSort);

  bool used = false;
  StaticCtx cx;
  cx.tables = &tables;
  cx.usedSelf = &used;
  cx.self = def.name;
  cx.binders.push_back({def.name, selfSort});
  for (const auto& [n, s] : def.params) cx.binders.push_back({n, s});
  SPtr body = parse_static(need(e, 3, "protocol body"), cx);
  def.recursive = used;

  SPtr inner = body;
  for (auto it = def.params.rbegin(); it != def.params.rend(); ++it)
    inner = slam(it->first, it->second, inner);
  if (def.recursive) {
    def.family = slam(def.name, selfSort, inner);  // functional; ref wraps in fix/hofix
  } else {
    def.family = inner;  // unused self binder leaves indices unaffected
  }
  return def;
}

FunDef parse_fun_def(const SExpr& e, const Tables& tables) {
  FunDef def;
  def.span = e.span;
  def.name = need_sym(need(e, 1, "function name"), "function name");
  size_t i = 2;
  StaticCtx scx;
  scx.tables = &tables;
  while (i < e.items.size() && e.items[i].kind == SExpr::Braces) {
    const SExpr& br = e.items[i];
    if (br.items.size() < 2 || br.items.size() > 3)
      throw ParseError(br.span, "expected {name sort} or {name sort prop}");
    std::string a = need_sym(br.items[0], "static parameter name");
    Sort s = parse_sort(br.items[1]);
    SPtr prop = br.items.size() == 3 ? parse_static(br.items[2], scx) : nullptr;
    def.staticParams.push_back({a, s, prop});
    ++i;
  }
  const SExpr& ps = need(e, i, "parameter list");
  if (ps.kind != SExpr::List) throw ParseError(ps.span, "expected a parameter list");
  TermCtx tcx{&tables, {}};
  for (const auto& p : ps.items) {
    if (p.kind != SExpr::List || p.items.size() != 2)
      throw ParseError(p.span, "expected (name type)");
    std::string x = need_sym(p.items[0], "parameter name");
    def.params.push_back({x, parse_type_in_term(p.items[1], tcx)});
    tcx.bound.push_back(x);
  }
  def.result = parse_static(need(e, i + 1, "result type"), scx);
  def.body = parse_term(need(e, i + 2, "function body"), tcx);
  if (e.items.size() > i + 3) throw ParseError(e.items[i + 3].span, "trailing forms in defun");
  return def;
}

}  // namespace

// ---------------------------------------------------------------- interface

const StypeDef* Program::stype(const std::string& n) const {
  for (const auto& d : stypes)
    if (d.name == n) return &d;
  return nullptr;
}
const FunDef* Program::fun(const std::string& n) const {
  for (const auto& d : funs)
    if (d.name == n) return &d;
  return nullptr;
}

SPtr stype_ref(const StypeDef& def, const std::vector<SPtr>& args) {
  if (args.size() != def.params.size())
    throw ParseError({}, def.name + " expects " + std::to_string(def.params.size()) +
                             " static arguments");
  if (!def.recursive) {
    if (args.empty()) return def.family;
    return beta_normalize(sapps(def.family, args));
  }
  if (def.params.empty()) return scst("fix", {def.family});
  std::vector<SPtr> all{def.family};
  all.insert(all.end(), args.begin(), args.end());
  return scst("hofix", std::move(all));
}

// Definition names may not shadow built-in forms or operators.
bool reserved_fun_name(const std::string& n) {
  static const std::set<std::string> forms{
      "lam",       "llam",       "let",        "let-pair",   "pair",       "if",
      "seq",       "guard-intro", "guard-elim", "assert-intro", "let-assert",
      "forall-lam", "forall-app", "exists-intro", "let-exists", "main",
      "defun",     "stype",      "true",       "false",
      "choose-left", "choose-right"};
  return forms.count(n) || is_primitive(n) || is_session_op(n) || is_proof_op(n);
}

bool reserved_stype_name(const std::string& n) {
  static const std::set<std::string> heads{
      "msg",  "seq",  "end",   "branch", "ite",  "quan",  "forall", "exists",
      "fix",  "hofix", "slam",  "sapp",   "chan", "not",   "unit",   "S",
      "C",    "true", "false", "int",    "bool", "type",  "vtype",  "stype"};
  return heads.count(n) || binary_static_ops().count(n);
}

Program parse_program(const std::string& src) {
  Lexer lx(src);
  std::vector<SExpr> top;
  while (!lx.at_end()) top.push_back(lx.read());

  Tables tables;
  // function names first so bodies can call forward
  for (const auto& e : top)
    if (e.kind == SExpr::List && !e.items.empty() && is_sym(e.items[0], "defun")) {
      const SExpr& ne = need(e, 1, "function name");
      std::string n = need_sym(ne, "function name");
      if (reserved_fun_name(n))
        throw ParseError(ne.span, "function name " + n + " shadows a built-in");
      if (!tables.funNames.insert(n).second)
        throw ParseError(ne.span, "duplicate function " + n);
    }

  Program prog;
  bool sawMain = false;
  for (const auto& e : top) {
    if (e.kind != SExpr::List || e.items.empty() || e.items[0].kind != SExpr::Sym)
      throw ParseError(e.span, "expected (stype ...), (defun ...) or (main ...)");
    const std::string& h = e.items[0].sym;
    if (h == "stype") {
      const SExpr& ne = need(e, 1, "protocol name");
      std::string n = need_sym(ne, "protocol name");
      if (reserved_stype_name(n) || tables.funNames.count(n))
        throw ParseError(ne.span, "protocol name " + n + " shadows a built-in");
      for (const auto& d : tables.stypes)
        if (d.name == n) throw ParseError(ne.span, "duplicate protocol " + n);
      tables.stypes.push_back(parse_stype_def(e, tables));
    } else if (h == "defun") {
      prog.funs.push_back(parse_fun_def(e, tables));
    } else if (h == "main") {
      if (sawMain) throw ParseError(e.span, "duplicate main");
      if (e.items.size() != 2) throw ParseError(e.span, "main expects one term");
      TermCtx tcx{&tables, {}};
      prog.main = parse_term(e.items[1], tcx);
      prog.mainSpan = e.span;
      sawMain = true;
    } else {
      throw ParseError(e.span, "unknown toplevel form " + h);
    }
  }
  if (!sawMain) throw ParseError({}, "program has no main");
  prog.stypes = std::move(tables.stypes);
  return prog;
}

SPtr parse_static_str(const std::string& src) {
  Lexer lx(src);
  SExpr e = lx.read();
  StaticCtx cx;
  return parse_static(e, cx);
}
SPtr parse_type_str(const std::string& src) { return parse_static_str(src); }

DPtr parse_term_str(const std::string& src) {
  Lexer lx(src);
  SExpr e = lx.read();
  Tables tables;
  TermCtx cx{&tables, {}};
  return parse_term(e, cx);
}

std::string print_program(const Program& p) {
  std::ostringstream os;
  for (const auto& f : p.funs) {
    os << "(defun " << f.name;
    for (const auto& sp : f.staticParams) {
      os << " {" << sp.name << " " << sp.sort.show();
      if (sp.prop) os << " " << show_static(sp.prop);
      os << "}";
    }
    os << " (";
    for (size_t i = 0; i < f.params.size(); ++i)
      os << (i ? " " : "") << "(" << f.params[i].first << " " << show_static(f.params[i].second)
         << ")";
    os << ") " << show_static(f.result) << "\n  " << show_dyn(f.body) << ")\n";
  }
  if (p.main) os << "(main " << show_dyn(p.main) << ")\n";
  return os.str();
}

}  // namespace sessc
