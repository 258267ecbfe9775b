#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "ladder/error.hpp"

namespace ladder {

/// Normalization of the spin operators entering the couplings.
/// `half` uses S = sigma/2 (flip-flop amplitude J/2, zz weight J*Delta/4);
/// `pauli` uses sigma directly (flip-flop amplitude 2J, zz weight J*Delta).
enum class SpinConvention { half, pauli };

inline std::string_view to_string(SpinConvention c) {
  return c == SpinConvention::half ? "half" : "pauli";
}

inline SpinConvention parse_convention(std::string_view s) {
  if (s == "half") return SpinConvention::half;
  if (s == "pauli") return SpinConvention::pauli;
  throw ValidationError("unknown spin convention '" + std::string(s) + "' (expected half|pauli)");
}

/// Two coupled XXZ chains ("beams") of `rungs` sites each, with open boundaries.
struct LadderConfig {
  int rungs = 8;
  double beam_coupling = 1.0;
  double rung_coupling = 0.2;
  double anisotropy = 0.6;
  double total_sz = 0.0;
  SpinConvention convention = SpinConvention::half;

  int sites() const { return 2 * rungs; }

  /// Number of up spins fixed by total_sz.
  int up_count() const { return static_cast<int>(std::lround(sites() / 2.0 + total_sz)); }

  /// Spin length entering the operators: 1/2 for `half`, 1 for `pauli`.
  double spin_scale() const { return convention == SpinConvention::half ? 0.5 : 1.0; }

  /// Matrix element of (SxSx + SySy) between |up,down> and |down,up>.
  double flip_amplitude() const { return 2.0 * spin_scale() * spin_scale(); }

  /// Diagonal weight of SzSz for parallel spins (antiparallel takes the negative).
  double zz_weight() const { return spin_scale() * spin_scale(); }

  void validate() const {
    require(rungs >= 2, "rungs must be >= 2 (got " + std::to_string(rungs) + ")");
    require(rungs <= 16, "rungs must be <= 16 (got " + std::to_string(rungs) + ")");
    require(rung_coupling >= 0.0, "rung coupling kappa must be >= 0");
    require(std::isfinite(beam_coupling) && std::isfinite(anisotropy), "couplings must be finite");
    const double half_n = sites() / 2.0;
    const double ups = half_n + total_sz;
    require(std::abs(total_sz) <= half_n && std::abs(ups - std::round(ups)) < 1e-12,
            "total Sz must be a (half-)integer in [" + std::to_string(-half_n) + ", " +
                std::to_string(half_n) + "] with N/2 + Sz integral");
  }
};

}  // namespace ladder
