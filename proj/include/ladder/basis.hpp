#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "ladder/config.hpp"
#include "ladder/error.hpp"

namespace ladder {

using Pattern = std::uint32_t;

/// All N-bit patterns with a fixed number of set bits, in ascending order.
/// Bit i < L belongs to the left beam site i, bit L+i to the right beam site i;
/// a set bit is an up spin.
class SectorBasis {
public:
  SectorBasis(int rungs, int up_count) : rungs_(rungs), up_(up_count) {
    const int n = 2 * rungs;
    require(up_count >= 0 && up_count <= n, "up-spin count out of range");
    if (up_count == 0) {
      states_.push_back(0);
      return;
    }
    Pattern p = (Pattern{1} << up_count) - 1;
    const Pattern limit = n == 32 ? ~Pattern{0} : (Pattern{1} << n) - 1;
    while (true) {
      states_.push_back(p);
      if (p == (limit & ~((Pattern{1} << (n - up_count)) - 1))) break;
      // Gosper's hack: next larger pattern with the same popcount.
      const Pattern c = p & (~p + 1);
      const Pattern r = p + c;
      p = (((r ^ p) >> 2) / c) | r;
    }
  }

  int rungs() const { return rungs_; }
  int sites() const { return 2 * rungs_; }
  int up_count() const { return up_; }
  std::size_t size() const { return states_.size(); }
  Pattern state(std::size_t i) const { return states_[i]; }
  const std::vector<Pattern>& states() const { return states_; }

  /// Position of `p` in the basis, or -1 when it is not a member.
  std::ptrdiff_t index(Pattern p) const {
    auto it = std::lower_bound(states_.begin(), states_.end(), p);
    if (it == states_.end() || *it != p) return -1;
    return it - states_.begin();
  }

  Pattern left_mask() const { return (Pattern{1} << rungs_) - 1; }
  Pattern left(Pattern p) const { return p & left_mask(); }
  Pattern right(Pattern p) const { return p >> rungs_; }
  int left_up(Pattern p) const { return std::popcount(left(p)); }
  int right_up(Pattern p) const { return std::popcount(right(p)); }

  /// Half the difference of up counts between the beams.
  double magnetization_difference(Pattern p) const {
    return 0.5 * (left_up(p) - right_up(p));
  }

  Pattern swap_beams(Pattern p) const { return right(p) | (left(p) << rungs_); }

private:
  int rungs_;
  int up_;
  std::vector<Pattern> states_;
};

inline SectorBasis build_basis(const LadderConfig& config) {
  config.validate();
  return SectorBasis(config.rungs, config.up_count());
}

/// Patterns of a single L-site chain with `up` set bits, ascending.
inline std::vector<Pattern> chain_patterns(int length, int up) {
  std::vector<Pattern> out;
  for (Pattern p = 0; p < (Pattern{1} << length); ++p)
    if (std::popcount(p) == up) out.push_back(p);
  return out;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace ladder
