#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ladder/config.hpp"
#include "ladder/error.hpp"
#include "ladder/states.hpp"
#include "ladder/tcl.hpp"

namespace ladder {

enum class StochasticModel { naive, tcl_plateau, tcl_time };

/// Everything a run needs; parsed from `key = value` text.
struct RunConfig {
  LadderConfig ladder;
  double t_max = 150.0;
  double dt = 0.5;
  double corr_dt = 0.02;
  double corr_t_max = 10.0;
  double plateau_start = 3.0;
  double plateau_end = 10.0;
  std::optional<double> gamma;  // empty: fitted from the TCL2 plateaus
  double gamma_max_abs_x = 2.0;
  InitialStateSpec initial;
  int draws = 5;
  StochasticModel stochastic = StochasticModel::naive;
  double krylov_tol = 1e-9;
  std::size_t dense_ceiling = 20000;
  unsigned threads = 1;
  std::size_t fine_size = 50;
  double bin_width = 0.12;
  double block_from = 0.0;
  double block_to = 1.0;
  std::string output_dir = "out";

  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) throw ValidationError("'" + v + "' is not a finite number");
  return out;
}

inline long long parse_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ValidationError("'" + v + "' is not an integer");
  return out;
}

inline std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ValidationError("'" + v + "' is not an unsigned 64-bit integer");
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class E>
E pick(const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ValidationError("'" + v + "' is not one of {" + names + "}");
}

// Ordered key table; the order is the echo order.
inline const std::vector<std::pair<std::string, Field>>& fields() {
  using R = RunConfig;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"rungs", {[](R& c, const std::string& v) { c.ladder.rungs = static_cast<int>(parse_int(v)); },
                 [](const R& c) { return std::to_string(c.ladder.rungs); }}},
      {"beam_coupling", {[](R& c, const std::string& v) { c.ladder.beam_coupling = parse_double(v); },
                         [](const R& c) { return fmt(c.ladder.beam_coupling); }}},
      {"kappa", {[](R& c, const std::string& v) { c.ladder.rung_coupling = parse_double(v); },
                 [](const R& c) { return fmt(c.ladder.rung_coupling); }}},
      {"anisotropy", {[](R& c, const std::string& v) { c.ladder.anisotropy = parse_double(v); },
                      [](const R& c) { return fmt(c.ladder.anisotropy); }}},
      {"total_sz", {[](R& c, const std::string& v) { c.ladder.total_sz = parse_double(v); },
                    [](const R& c) { return fmt(c.ladder.total_sz); }}},
      {"convention", {[](R& c, const std::string& v) { c.ladder.convention = parse_convention(v); },
                      [](const R& c) { return std::string(to_string(c.ladder.convention)); }}},
      {"t_max", {[](R& c, const std::string& v) { c.t_max = parse_double(v); }, [](const R& c) { return fmt(c.t_max); }}},
      {"dt", {[](R& c, const std::string& v) { c.dt = parse_double(v); }, [](const R& c) { return fmt(c.dt); }}},
      {"corr_dt", {[](R& c, const std::string& v) { c.corr_dt = parse_double(v); },
                   [](const R& c) { return fmt(c.corr_dt); }}},
      {"corr_t_max", {[](R& c, const std::string& v) { c.corr_t_max = parse_double(v); },
                      [](const R& c) { return fmt(c.corr_t_max); }}},
      {"plateau_start", {[](R& c, const std::string& v) { c.plateau_start = parse_double(v); },
                         [](const R& c) { return fmt(c.plateau_start); }}},
      {"plateau_end", {[](R& c, const std::string& v) { c.plateau_end = parse_double(v); },
                       [](const R& c) { return fmt(c.plateau_end); }}},
      {"gamma", {[](R& c, const std::string& v) {
                   if (v == "fit") c.gamma.reset();
                   else c.gamma = parse_double(v);
                 },
                 [](const R& c) { return c.gamma ? fmt(*c.gamma) : std::string("fit"); }}},
      {"gamma_max_abs_x", {[](R& c, const std::string& v) { c.gamma_max_abs_x = parse_double(v); },
                           [](const R& c) { return fmt(c.gamma_max_abs_x); }}},
      {"initial", {[](R& c, const std::string& v) {
                     c.initial.kind = pick<InitialKind>(v, {{"window_mixed", InitialKind::window_mixed},
                                                            {"product_random", InitialKind::product_random},
                                                            {"entangled_random", InitialKind::entangled_random}});
                   },
                   [](const R& c) {
                     switch (c.initial.kind) {
                       case InitialKind::window_mixed: return std::string("window_mixed");
                       case InitialKind::product_random: return std::string("product_random");
                       default: return std::string("entangled_random");
                     }
                   }}},
      {"initial_x", {[](R& c, const std::string& v) { c.initial.x = parse_double(v); },
                     [](const R& c) { return fmt(c.initial.x); }}},
      {"window_center", {[](R& c, const std::string& v) { c.initial.window_center = parse_double(v); },
                         [](const R& c) { return fmt(c.initial.window_center); }}},
      {"window_width", {[](R& c, const std::string& v) { c.initial.window_width = parse_double(v); },
                        [](const R& c) { return fmt(c.initial.window_width); }}},
      {"mixed_mode", {[](R& c, const std::string& v) {
                        c.initial.mode = pick<MixedMode>(v, {{"exact", MixedMode::exact}, {"typicality", MixedMode::typicality}});
                      },
                      [](const R& c) { return std::string(c.initial.mode == MixedMode::exact ? "exact" : "typicality"); }}},
      {"projector_order", {[](R& c, const std::string& v) {
                             c.initial.order = pick<ProjectorOrder>(
                                 v, {{"literal", ProjectorOrder::literal}, {"x_supported", ProjectorOrder::x_supported}});
                           },
                           [](const R& c) {
                             return std::string(c.initial.order == ProjectorOrder::literal ? "literal" : "x_supported");
                           }}},
      {"samples", {[](R& c, const std::string& v) { c.initial.samples = static_cast<int>(parse_int(v)); },
                   [](const R& c) { return std::to_string(c.initial.samples); }}},
      {"exact_rank_limit", {[](R& c, const std::string& v) { c.initial.exact_rank_limit = static_cast<std::size_t>(parse_u64(v)); },
                            [](const R& c) { return std::to_string(c.initial.exact_rank_limit); }}},
      {"seed", {[](R& c, const std::string& v) { c.initial.seed = parse_u64(v); },
                [](const R& c) { return std::to_string(c.initial.seed); }}},
      {"draws", {[](R& c, const std::string& v) { c.draws = static_cast<int>(parse_int(v)); },
                 [](const R& c) { return std::to_string(c.draws); }}},
      {"stochastic_model", {[](R& c, const std::string& v) {
                              c.stochastic = pick<StochasticModel>(v, {{"naive", StochasticModel::naive},
                                                                       {"tcl_plateau", StochasticModel::tcl_plateau},
                                                                       {"tcl_time", StochasticModel::tcl_time}});
                            },
                            [](const R& c) {
                              switch (c.stochastic) {
                                case StochasticModel::naive: return std::string("naive");
                                case StochasticModel::tcl_plateau: return std::string("tcl_plateau");
                                default: return std::string("tcl_time");
                              }
                            }}},
      {"krylov_tol", {[](R& c, const std::string& v) { c.krylov_tol = parse_double(v); },
                      [](const R& c) { return fmt(c.krylov_tol); }}},
      {"dense_ceiling", {[](R& c, const std::string& v) { c.dense_ceiling = static_cast<std::size_t>(parse_u64(v)); },
                         [](const R& c) { return std::to_string(c.dense_ceiling); }}},
      {"threads", {[](R& c, const std::string& v) { c.threads = static_cast<unsigned>(parse_u64(v)); },
                   [](const R& c) { return std::to_string(c.threads); }}},
      {"fine_size", {[](R& c, const std::string& v) { c.fine_size = static_cast<std::size_t>(parse_u64(v)); },
                     [](const R& c) { return std::to_string(c.fine_size); }}},
      {"bin_width", {[](R& c, const std::string& v) { c.bin_width = parse_double(v); },
                     [](const R& c) { return fmt(c.bin_width); }}},
      {"block_from", {[](R& c, const std::string& v) { c.block_from = parse_double(v); },
                      [](const R& c) { return fmt(c.block_from); }}},
      {"block_to", {[](R& c, const std::string& v) { c.block_to = parse_double(v); },
                    [](const R& c) { return fmt(c.block_to); }}},
      {"output_dir", {[](R& c, const std::string& v) { c.output_dir = v; }, [](const R& c) { return c.output_dir; }}},
  };
  return table;
}

}  // namespace detail

namespace detail {

// Range check for one key in isolation; cross-field rules live in RunConfig::validate.
inline void check_field(const RunConfig& c, const std::string& key) {
  if (key == "rungs") require(c.ladder.rungs >= 2 && c.ladder.rungs <= 16, "rungs must lie in [2, 16]");
  else if (key == "beam_coupling") require(c.ladder.beam_coupling > 0.0, "beam_coupling must be > 0");
  else if (key == "kappa") require(c.ladder.rung_coupling >= 0.0, "kappa must be >= 0");
  else if (key == "anisotropy") require(c.ladder.anisotropy >= 0.0 && c.ladder.anisotropy <= 10.0, "anisotropy must lie in [0, 10]");
  else if (key == "t_max") require(c.t_max > 0.0 && c.t_max <= 1e5, "t_max must lie in (0, 1e5]");
  else if (key == "dt") require(c.dt > 0.0, "dt must be > 0");
  else if (key == "corr_dt") require(c.corr_dt > 0.0 && c.corr_dt <= 0.05, "corr_dt must lie in (0, 0.05] for the rate quadrature");
  else if (key == "corr_t_max") require(c.corr_t_max > 0.0 && c.corr_t_max <= 1000.0, "corr_t_max must lie in (0, 1000]");
  else if (key == "plateau_start") require(c.plateau_start >= 0.0, "plateau_start must be >= 0");
  else if (key == "plateau_end") require(c.plateau_end > 0.0, "plateau_end must be > 0");
  else if (key == "gamma") require(!c.gamma || *c.gamma > 0.0, "gamma must be > 0 (or 'fit')");
  else if (key == "gamma_max_abs_x") require(c.gamma_max_abs_x >= 0.0, "gamma_max_abs_x must be >= 0");
  else if (key == "window_width") require(c.initial.window_width > 0.0, "window_width must be > 0");
  else if (key == "samples") require(c.initial.samples >= 1 && c.initial.samples <= 100000, "samples must lie in [1, 100000]");
  else if (key == "draws") require(c.draws >= 1 && c.draws <= 1000, "draws must lie in [1, 1000]");
  else if (key == "krylov_tol") require(c.krylov_tol > 0.0 && c.krylov_tol <= 1e-6, "krylov_tol must lie in (0, 1e-6]");
  else if (key == "dense_ceiling") require(c.dense_ceiling >= 1, "dense_ceiling must be >= 1");
  else if (key == "threads") require(c.threads >= 1 && c.threads <= 256, "threads must lie in [1, 256]");
  else if (key == "fine_size") require(c.fine_size >= 1, "fine_size must be >= 1");
  else if (key == "bin_width") require(c.bin_width > 0.0, "bin_width must be > 0");
  else if (key == "output_dir") require(!c.output_dir.empty(), "output_dir must not be empty");
}

}  // namespace detail

inline void RunConfig::validate() const {
  for (const auto& f : detail::fields()) detail::check_field(*this, f.first);
  ladder.validate();
  require(dt <= t_max, "dt must not exceed t_max");
  require(corr_t_max > corr_dt, "corr_t_max must exceed corr_dt");
  require(plateau_start < plateau_end && plateau_end <= corr_t_max,
          "plateau window must satisfy plateau_start < plateau_end <= corr_t_max");
  initial.validate();
  require(std::abs(std::abs(block_to - block_from) - 1.0) < 1e-9, "block_from and block_to must differ by 1");
}

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, malformed lines and
/// out-of-range values are reported with their line number.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError("config line " + std::to_string(line_no) + ": empty key or value");
    const auto& table = detail::fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (seen.count(key))
      throw ValidationError("config line " + std::to_string(line_no) + ": key '" + key + "' already set on line " +
                            std::to_string(seen[key]));
    seen[key] = line_no;
    try {
      it->second.set(cfg, value);
      detail::check_field(cfg, key);
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

/// Effective configuration as parseable `key = value` text, one key per line.
inline std::string echo_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

/// FNV-1a 64-bit hash, used to fingerprint the effective configuration.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ladder
