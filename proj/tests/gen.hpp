#pragma once

// Seeded random index-expression generator shared by the statics and
// constraint tests: linear int terms and boolean formulas over a fixed
// variable pool, coefficients in [-4,4], constants in [-10,10].

#include <random>
#include <string>
#include <vector>

#include "sessc/statics.hpp"

namespace testgen {

struct Gen {
  std::mt19937 rng;
  std::vector<std::string> intVars{"a", "b", "c"};
  std::vector<std::string> boolVars{"p", "q"};

  explicit Gen(unsigned seed) : rng(seed) {}

  int irand(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin() { return irand(0, 1) == 1; }

  sessc::SPtr int_leaf() {
    if (coin()) return sessc::sint(irand(-10, 10));
    return sessc::scst(intVars[irand(0, (int)intVars.size() - 1)]);
  }

  sessc::SPtr int_expr(int depth) {
    if (depth <= 0 || irand(0, 3) == 0) return int_leaf();
    int pick = irand(0, 3);
    if (pick == 3) {
      int k = irand(-4, 4);
      return sessc::scst("*", {sessc::sint(k), int_expr(depth - 1)});
    }
    const char* ops[] = {"+", "-", "+"};
    return sessc::scst(ops[pick], {int_expr(depth - 1), int_expr(depth - 1)});
  }

  sessc::SPtr cmp() {
    const char* ops[] = {"=", "<>", "<", "<=", ">", ">="};
    return sessc::scst(ops[irand(0, 5)], {int_expr(2), int_expr(2)});
  }

  sessc::SPtr prop(int depth) {
    if (depth <= 0 || irand(0, 3) == 0) {
      int pick = irand(0, 5);
      if (pick == 0) return sessc::scst(boolVars[irand(0, (int)boolVars.size() - 1)]);
      if (pick == 1) return sessc::sbool(coin());
      return cmp();
    }
    int pick = irand(0, 3);
    if (pick == 3) return sessc::scst("not", {prop(depth - 1)});
    const char* ops[] = {"and", "or", "imp"};
    return sessc::scst(ops[pick], {prop(depth - 1), prop(depth - 1)});
  }
};

}  // namespace testgen
