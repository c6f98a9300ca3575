#ifndef SESSC_DIAG_HPP
#define SESSC_DIAG_HPP

#include <optional>
#include <stdexcept>
#include <string>

namespace sessc {

// Source position; line 0 means "synthetic" (no surface origin).
struct Span {
  int line = 0;
  int col = 0;
  bool known() const { return line > 0; }
};

inline std::string show_span(const Span& s) {
  if (!s.known()) return "<internal>";
  return std::to_string(s.line) + ":" + std::to_string(s.col);
}

// Kernel-level failures (sorting, normalization, constraint translation).
struct SortError : std::runtime_error {
  explicit SortError(const std::string& m) : std::runtime_error(m) {}
};

struct UnboundStaticVar : SortError {
  explicit UnboundStaticVar(const std::string& m) : SortError(m) {}
};

struct ArityMismatch : SortError {
  explicit ArityMismatch(const std::string& m) : SortError(m) {}
};

struct NotAnStype : SortError {
  explicit NotAnStype(const std::string& m) : SortError(m) {}
};

// Constraint outside the supported linear fragment. Always a hard error.
struct UnsupportedConstraint : std::runtime_error {
  explicit UnsupportedConstraint(const std::string& m) : std::runtime_error(m) {}
};

// Typing failure; `rule` is the stable diagnostic name (e.g. "guard-not-entailed").
struct TypeError : std::runtime_error {
  std::string rule;
  Span span;
  std::string detail;
  std::optional<std::string> countermodel;

  TypeError(std::string rule_, Span span_, std::string detail_,
            std::optional<std::string> cm = std::nullopt)
      : std::runtime_error(format(rule_, span_, detail_, cm)),
        rule(std::move(rule_)),
        span(span_),
        detail(std::move(detail_)),
        countermodel(std::move(cm)) {}

  static std::string format(const std::string& rule, const Span& span,
                            const std::string& detail,
                            const std::optional<std::string>& cm) {
    std::string s = "error[" + rule + "] at " + show_span(span) + ": " + detail;
    if (cm) s += " (countermodel: " + *cm + ")";
    return s;
  }
};

// Evaluation reached a non-value, non-redex, non-blocked term.
struct StuckTerm : std::runtime_error {
  explicit StuckTerm(const std::string& m) : std::runtime_error(m) {}
};

// apply_step called with a step that is not enabled in the given pool.
struct IllegalStep : std::runtime_error {
  explicit IllegalStep(const std::string& m) : std::runtime_error(m) {}
};

struct ParseError : std::runtime_error {
  Span span;
  ParseError(Span sp, const std::string& m)
      : std::runtime_error("parse error at " + show_span(sp) + ": " + m), span(sp) {}
};

}  // namespace sessc

#endif
