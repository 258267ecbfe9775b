#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ladder/analysis.hpp"
#include "ladder/basis.hpp"
#include "ladder/chain_basis.hpp"
#include "ladder/error.hpp"
#include "ladder/operators.hpp"
#include "ladder/propagation.hpp"
#include "ladder/run_config.hpp"
#include "ladder/spectral.hpp"
#include "ladder/states.hpp"
#include "ladder/stochastic.hpp"
#include "ladder/tcl.hpp"

namespace ladder {

inline constexpr const char* kVersion = "1.0.0";

/// Exit status of a subcommand.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

/// Number formatting used by every artifact: printf "%.12g".
inline std::string format_number(double v) {
  require(std::isfinite(v), "refusing to serialize a non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Label of an X value inside column names: "-4", "1", "-3.5".
inline std::string x_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);
  return buf;
}

/// Header-checked CSV file. Rows are validated against the header before they are written.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : path_(path), header_(std::move(header)) {
    require(!header_.empty(), "CSV header is empty");
    for (const auto& h : header_) check_cell(h);
    out_ << join(header_);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row(cells);
  }

  void row(const std::vector<std::string>& cells) {
    require(cells.size() == header_.size(), path_.filename().string() + ": row has " + std::to_string(cells.size()) +
                                                " cells, header has " + std::to_string(header_.size()));
    for (const auto& c : cells) check_cell(c);
    out_ << join(cells);
    ++rows_;
  }

  std::size_t rows() const { return rows_; }

  /// Writes the file; every line, including the last, ends with exactly one newline.
  void close() {
    std::ofstream f(path_, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + path_.string() + " for writing");
    f << out_.str();
    if (!f) throw ValidationError("failed writing " + path_.string());
  }

private:
  static void check_cell(const std::string& c) {
    require(!c.empty() && c.find_first_of(",\n\r\"") == std::string::npos, "invalid CSV cell '" + c + "'");
  }
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t k = 0; k < cells.size(); ++k) line += (k ? "," : "") + cells[k];
    return line + "\n";
  }

  std::filesystem::path path_;
  std::vector<std::string> header_;
  std::ostringstream out_;
  std::size_t rows_ = 0;
};

/// Peak resident set size in kB from /proc, or -1 where unavailable.
inline long peak_memory_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line))
    if (line.rfind("VmHWM:", 0) == 0) return std::stol(line.substr(6));
  return -1;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Lazily built model objects shared by the subcommands of one run.
class Workspace {
public:
  explicit Workspace(RunConfig cfg, std::ostream& log = std::cerr) : cfg_(std::move(cfg)), log_(&log) {
    cfg_.validate();
  }

  const RunConfig& config() const { return cfg_; }
  std::ostream& log() const { return *log_; }

  const SectorBasis& basis() {
    if (!basis_) basis_ = std::make_unique<SectorBasis>(build_basis(cfg_.ladder));
    return *basis_;
  }
  const XPartition& partition() {
    if (!partition_) partition_ = std::make_unique<XPartition>(build_projectors(basis()));
    return *partition_;
  }
  const SparseOperator& hamiltonian() {
    if (!hamiltonian_) hamiltonian_ = std::make_unique<SparseOperator>(build_hamiltonian(basis(), cfg_.ladder));
    return *hamiltonian_;
  }
  const SpectralDecomposition& spectrum() {
    if (!spectrum_) {
      const auto t0 = std::chrono::steady_clock::now();
      log() << "diagonalizing H (dimension " << basis().size() << ")...\n";
      spectrum_ = std::make_unique<SpectralDecomposition>(
          diagonalize_dense(hamiltonian(), DiagonalizeOptions{cfg_.dense_ceiling, beam_swap_permutation(basis())}));
      log() << "  done in " << seconds_since(t0) << " s\n";
    }
    return *spectrum_;
  }
  const EnergyWindow& window() {
    if (!window_)
      window_ = std::make_unique<EnergyWindow>(
          window_projector(spectrum(), cfg_.initial.window_center, cfg_.initial.window_width));
    return *window_;
  }
  const ChainFactorizedBasis& chains() {
    if (!chains_) chains_ = std::make_unique<ChainFactorizedBasis>(chain_factorize_h0(cfg_.ladder));
    return *chains_;
  }

  /// TCL2 correlations and rates for every admissible pair of the sector.
  const TclRateSet& tcl_rates() {
    if (!rates_) {
      const auto t0 = std::chrono::steady_clock::now();
      rates_ = std::make_unique<TclRateSet>(compute_tcl_rates(chains(), partition().x_values(), cfg_.ladder.rung_coupling,
                                                              correlation_times(), cfg_.plateau_start, cfg_.plateau_end));
      log() << "TCL2 correlations: " << seconds_since(t0) << " s\n";
    }
    return *rates_;
  }
  const GammaFit& gamma_fit() {
    if (!gamma_fit_) {
      gamma_fit_ = std::make_unique<GammaFit>(
          fit_gamma(tcl_rates(), cfg_.ladder.sites(), cfg_.ladder.rung_coupling, cfg_.gamma_max_abs_x));
      log() << "fitted gamma = " << gamma_fit_->gamma << " (pair dispersion " << gamma_fit_->pair_dispersion << ")\n";
    }
    return *gamma_fit_;
  }

  std::vector<double> times() const { return make_grid(cfg_.t_max, cfg_.dt); }
  std::vector<double> correlation_times() const { return make_grid(cfg_.corr_t_max, cfg_.corr_dt); }

  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

private:
  RunConfig cfg_;
  std::ostream* log_;
  std::unique_ptr<SectorBasis> basis_;
  std::unique_ptr<XPartition> partition_;
  std::unique_ptr<SparseOperator> hamiltonian_;
  std::unique_ptr<SpectralDecomposition> spectrum_;
  std::unique_ptr<EnergyWindow> window_;
  std::unique_ptr<ChainFactorizedBasis> chains_;
  std::unique_ptr<TclRateSet> rates_;
  std::unique_ptr<GammaFit> gamma_fit_;
};

/// Collects artifacts and results of one run and writes the manifest.
class RunRecord {
public:
  RunRecord(std::string subcommand, const RunConfig& cfg)
      : subcommand_(std::move(subcommand)), cfg_(cfg), dir_(cfg.output_dir), start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
    const std::string echo = echo_config(cfg_);
    std::ofstream(dir_ / "effective_config.txt", std::ios::binary | std::ios::trunc) << echo;
  }

  const std::filesystem::path& dir() const { return dir_; }

  CsvWriter csv(const std::string& name, std::vector<std::string> header) {
    artifacts_.push_back(name);
    return CsvWriter(dir_ / name, std::move(header));
  }

  nlohmann::json& results() { return results_; }

  void set_gamma(double gamma, const std::string& source) {
    gamma_ = gamma;
    gamma_source_ = source;
  }

  void write_manifest() const {
    const std::string echo = echo_config(cfg_);
    nlohmann::json m;
    m["subcommand"] = subcommand_;
    m["version"] = kVersion;
    m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    m["compiler"] = __VERSION__;
    m["config_hash"] = hex64(fnv1a(echo));
    m["seed"] = cfg_.initial.seed;
    m["config"] = echo;
    if (gamma_) {
      m["gamma"] = *gamma_;
      m["gamma_source"] = gamma_source_;
    } else {
      m["gamma"] = nullptr;
    }
    m["artifacts"] = artifacts_;
    m["results"] = results_;
    m["wall_time_s"] = Workspace::seconds_since(start_);
    m["peak_memory_kb"] = peak_memory_kb();
    std::ofstream(dir_ / "manifest.json", std::ios::binary | std::ios::trunc) << m.dump(2) << "\n";
  }

private:
  std::string subcommand_;
  RunConfig cfg_;
  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
  nlohmann::json results_ = nlohmann::json::object();
  std::optional<double> gamma_;
  std::string gamma_source_;
};

// ---------------------------------------------------------------------------
// Pipelines

inline std::vector<std::string> series_header(const std::vector<double>& x_values) {
  std::vector<std::string> h{"t"};
  for (double x : x_values) h.push_back("P_" + x_label(x));
  h.push_back("mean");
  h.push_back("variance");
  return h;
}

inline void write_series(RunRecord& rec, const std::string& name, const ProbabilitySeries& s) {
  auto csv = rec.csv(name, series_header(s.x_values));
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::vector<double> row{s.times[k]};
    for (std::size_t j = 0; j < s.x_values.size(); ++j)
      row.push_back(s.probabilities(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
    row.push_back(s.mean[k]);
    row.push_back(s.variance[k]);
    csv.row(row);
  }
  csv.close();
}

/// Largest window rank for which the x_supported exact ensemble is propagated member by member.
inline constexpr std::size_t kExactEnsembleMembers = 256;

/// Quantum P_X(t) for one initial-state specification on the run grid.
inline ProbabilitySeries quantum_series(Workspace& ws, const InitialStateSpec& init) {
  init.validate();
  const auto& cfg = ws.config();
  const auto times = ws.times();
  const auto& part = ws.partition();
  const auto t0 = std::chrono::steady_clock::now();
  ProbabilitySeries out;
  if (init.kind == InitialKind::window_mixed) {
    const auto& window = ws.window();
    require(!window.empty(), "energy window [" + format_number(window.center - 0.5 * window.width) + ", " +
                                 format_number(window.center + 0.5 * window.width) + "] holds no eigenvalue");
    ws.log() << "window rank " << window.rank() << ", mode "
             << (init.mode == MixedMode::exact ? "exact" : "typicality") << "\n";
    if (init.mode == MixedMode::exact && init.order == ProjectorOrder::literal) {
      require(window.rank() <= init.exact_rank_limit,
              "window rank " + std::to_string(window.rank()) + " exceeds exact_rank_limit = " +
                  std::to_string(init.exact_rank_limit) + "; raise it or use mixed_mode = typicality");
      out = evolve_window_density(ws.spectrum(), window_density(ws.spectrum(), window, part, init.x), part, times);
    } else {
      if (init.mode == MixedMode::exact)
        require(window.rank() <= kExactEnsembleMembers,
                "exact x_supported ensembles are propagated member by member and are limited to window rank " +
                    std::to_string(kExactEnsembleMembers) + " (got " + std::to_string(window.rank()) +
                    "); use mixed_mode = typicality");
      const MixedEnsemble ens = window_mixed_state(init, ws.spectrum(), window, part);
      out = evolve_series(ens, Propagator(ws.hamiltonian(), cfg.krylov_tol), part, times, cfg.threads);
    }
  } else {
    StateVector psi;
    if (init.kind == InitialKind::product_random) {
      const int left_up = part.at_x(init.x).left_up;
      psi = random_product_state(init.seed, left_up, ws.basis().up_count() - left_up, ws.basis());
    } else {
      psi = random_entangled_state(init.seed, init.x, part, ws.basis().size());
    }
    out = evolve_series(MixedEnsemble::pure(std::move(psi)), Propagator(ws.hamiltonian(), cfg.krylov_tol), part,
                        times, cfg.threads);
  }
  ws.log() << "quantum series: " << Workspace::seconds_since(t0) << " s\n";
  return out;
}

/// Gamma from the config, or fitted from the TCL2 plateaus.
inline double resolve_gamma(Workspace& ws, RunRecord& rec) {
  const auto& cfg = ws.config();
  if (cfg.gamma) {
    rec.set_gamma(*cfg.gamma, "config");
    return *cfg.gamma;
  }
  const GammaFit& fit = ws.gamma_fit();
  rec.set_gamma(fit.gamma, "tcl2_plateau_fit");
  rec.results()["gamma_pair_dispersion"] = fit.pair_dispersion;
  rec.results()["gamma_sample_dispersion"] = fit.sample_dispersion;
  return fit.gamma;
}

/// Master-equation series for the configured stochastic model, started from `p0`.
inline ProbabilitySeries stochastic_series(Workspace& ws, RunRecord& rec, const Eigen::VectorXd& p0) {
  const auto& cfg = ws.config();
  const auto times = ws.times();
  const auto xs = ws.partition().x_values();
  switch (cfg.stochastic) {
    case StochasticModel::naive: {
      const double gamma = resolve_gamma(ws, rec);
      return evolve_master(master_generator(naive_rates(cfg.ladder.sites(), gamma, cfg.ladder.rung_coupling)), p0, times);
    }
    case StochasticModel::tcl_plateau: {
      return evolve_master(
          master_generator(plateau_rate_table(ws.tcl_rates(), cfg.ladder.sites(), cfg.ladder.rung_coupling)), p0, times);
    }
    default: {
      return evolve_tcl_master(ws.tcl_rates(), xs, p0, times, TclRateMode::time_dependent);
    }
  }
}

inline Eigen::VectorXd initial_distribution(const ProbabilitySeries& quantum) {
  Eigen::VectorXd p0 = quantum.probabilities.row(0).transpose();
  p0 = p0.cwiseMax(0.0);
  return p0 / p0.sum();
}

struct Comparison {
  ProbabilitySeries quantum, stochastic;
  CompareReport report;
};

inline Comparison run_comparison(Workspace& ws, RunRecord& rec, const InitialStateSpec& init) {
  Comparison c;
  c.quantum = quantum_series(ws, init);
  c.stochastic = stochastic_series(ws, rec, initial_distribution(c.quantum));
  c.report = compare_report(c.quantum, c.stochastic);
  return c;
}

inline void write_compare(RunRecord& rec, const std::string& name, const CompareReport& r) {
  auto csv = rec.csv(name, {"t", "max_dp", "dmean", "dvariance"});
  for (std::size_t k = 0; k < r.times.size(); ++k) csv.row({r.times[k], r.max_dp[k], r.dmean[k], r.dvariance[k]});
  csv.close();
}

inline nlohmann::json summarize(const Comparison& c) {
  return {{"sup_dp", c.report.sup_dp},
          {"sup_dmean", c.report.sup_dmean},
          {"sup_dvariance", c.report.sup_dvariance},
          {"delta", c.report.delta},
          {"quantum_p0", std::vector<double>(c.quantum.probabilities.row(0).data(),
                                             c.quantum.probabilities.row(0).data() + c.quantum.probabilities.cols())},
          {"quantum_final_variance", c.quantum.variance.back()}};
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_info(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto& cfg = ws.config();
  const auto& part = ws.partition();
  out << "rungs " << cfg.ladder.rungs << ", sites " << cfg.ladder.sites() << ", up spins " << cfg.ladder.up_count()
      << ", convention " << to_string(cfg.ladder.convention) << "\n";
  out << "sector dimension " << ws.basis().size() << "\n";
  out << "X      d_X\n";
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t k = 0; k < part.size(); ++k) {
    char line[64];
    std::snprintf(line, sizeof line, "%-6s %zu\n", x_label(part[k].x).c_str(), part[k].dimension());
    out << line;
    table.push_back({{"x", part[k].x}, {"dimension", part[k].dimension()}});
  }
  rec.results()["sector_dimension"] = ws.basis().size();
  rec.results()["subspaces"] = table;
}

inline void cmd_evolve_quantum(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto s = quantum_series(ws, ws.config().initial);
  write_series(rec, "quantum.csv", s);
  rec.results()["final_mean"] = s.mean.back();
  rec.results()["final_variance"] = s.variance.back();
  out << "wrote " << (rec.dir() / "quantum.csv").string() << "\n";
}

inline void cmd_evolve_stochastic(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto& cfg = ws.config();
  const auto s = stochastic_series(ws, rec, point_mass(ws.partition().x_values(), cfg.initial.x));
  write_series(rec, "stochastic.csv", s);
  rec.results()["final_variance"] = s.variance.back();
  out << "wrote " << (rec.dir() / "stochastic.csv").string() << "\n";
}

inline void cmd_tcl(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto& cfg = ws.config();
  const auto xs = ws.partition().x_values();
  const auto& set = ws.tcl_rates();
  const auto times = ws.correlation_times();

  std::vector<std::string> rate_header{"t"}, corr_header{"t"};
  for (const char* dir : {"up", "down"})
    for (double x : xs) {
      rate_header.push_back(std::string("R_") + dir + "_" + x_label(x));
      corr_header.push_back(std::string("C_") + dir + "_" + x_label(x));
    }
  auto rates = rec.csv("rates.csv", rate_header);
  auto corrs = rec.csv("correlations.csv", corr_header);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> r{times[k]}, c{times[k]};
    for (int dir : {+1, -1})
      for (double x : xs) {
        const auto* rr = set.find(x, x + dir);
        const auto* cc = set.find_correlation(x, x + dir);
        r.push_back(rr ? rr->values[k] : 0.0);
        c.push_back(cc ? cc->values[k] : 0.0);
      }
    rates.row(r);
    corrs.row(c);
  }
  rates.close();
  corrs.close();

  if (cfg.ladder.sites() % 4 == 0 && cfg.ladder.rung_coupling > 0.0) {
    const auto report = check_initial_value(set.correlations, naive_rates(cfg.ladder.sites(), 1.0, cfg.ladder.rung_coupling),
                                            cfg.ladder.flip_amplitude());
    auto iv = rec.csv("initial_value.csv", {"x_from", "x_to", "c0", "naive_rate", "ratio"});
    for (const auto& e : report.entries) iv.row({e.x_from, e.x_to, e.c0, e.naive_rate, e.ratio});
    iv.close();
    rec.results()["initial_value_ratio"] = report.common;
    rec.results()["initial_value_spread"] = report.relative_spread;
    rec.results()["initial_value_explanation"] = report.explanation;
    out << report.explanation << "\n";
  }
  nlohmann::json plateaus = nlohmann::json::array();
  for (const auto& r : set.rates) plateaus.push_back({{"x_from", r.x_from}, {"x_to", r.x_to}, {"plateau", r.plateau}});
  rec.results()["plateaus"] = plateaus;
  out << "wrote rates.csv and correlations.csv to " << rec.dir().string() << "\n";
}

inline void cmd_fit_gamma(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const GammaFit& fit = ws.gamma_fit();
  auto csv = rec.csv("gamma.csv", {"x_from", "x_to", "plateau_ratio"});
  for (const auto& p : fit.pairs) csv.row({p.x_from, p.x_to, p.plateau_ratio});
  csv.close();
  rec.set_gamma(fit.gamma, "tcl2_plateau_fit");
  rec.results()["gamma"] = fit.gamma;
  rec.results()["pair_dispersion"] = fit.pair_dispersion;
  rec.results()["sample_dispersion"] = fit.sample_dispersion;
  out << "gamma = " << format_number(fit.gamma) << "\n";
  out << "pair dispersion = " << format_number(fit.pair_dispersion)
      << ", sample dispersion = " << format_number(fit.sample_dispersion) << "\n";
  for (const auto& p : fit.pairs)
    out << "  " << x_label(p.x_from) << " -> " << x_label(p.x_to) << ": " << format_number(p.plateau_ratio) << "\n";
}

inline void cmd_compare(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto c = run_comparison(ws, rec, ws.config().initial);
  write_series(rec, "quantum.csv", c.quantum);
  write_series(rec, "stochastic.csv", c.stochastic);
  write_compare(rec, "compare.csv", c.report);
  rec.results()["comparison"] = summarize(c);
  out << "sup |dP| = " << format_number(c.report.sup_dp) << ", delta = " << format_number(c.report.delta) << "\n";
}

/// Seeds of the random initial states drawn by `delta`.
inline std::uint64_t draw_seed(std::uint64_t seed, int group, int k) {
  return seed + 1000ull * static_cast<std::uint64_t>(group) + static_cast<std::uint64_t>(k) + 1;
}

struct DeltaRun {
  DeltaReport report;
  nlohmann::json details = nlohmann::json::array();
};

/// delta for the window-mixed state and for `draws` random product and entangled states.
inline DeltaRun run_delta(Workspace& ws, RunRecord& rec) {
  const auto& cfg = ws.config();
  DeltaRun run;
  auto one = [&](const std::string& label, const std::string& group, const InitialStateSpec& init) {
    const auto c = run_comparison(ws, rec, init);
    run.report.entries.push_back({label, group, c.report.delta});
    auto s = summarize(c);
    s["label"] = label;
    run.details.push_back(s);
    ws.log() << label << ": delta = " << format_number(c.report.delta) << "\n";
  };
  InitialStateSpec mixed = cfg.initial;
  mixed.kind = InitialKind::window_mixed;
  one("mixed", "mixed", mixed);
  for (int k = 0; k < cfg.draws; ++k) {
    InitialStateSpec p = cfg.initial;
    p.kind = InitialKind::product_random;
    p.seed = draw_seed(cfg.initial.seed, 1, k);
    one("product_" + std::to_string(k), "product", p);
  }
  for (int k = 0; k < cfg.draws; ++k) {
    InitialStateSpec e = cfg.initial;
    e.kind = InitialKind::entangled_random;
    e.seed = draw_seed(cfg.initial.seed, 2, k);
    one("entangled_" + std::to_string(k), "entangled", e);
  }
  return run;
}

inline void cmd_delta(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto run = run_delta(ws, rec);
  auto csv = rec.csv("delta.csv", {"label", "group", "delta"});
  for (const auto& e : run.report.entries) csv.row(std::vector<std::string>{e.label, e.group, format_number(e.delta)});
  csv.close();
  for (const char* g : {"mixed", "product", "entangled"}) {
    rec.results()[std::string("delta_") + g] = run.report.group_mean(g);
    out << g << ": mean delta = " << format_number(run.report.group_mean(g)) << "\n";
  }
  rec.results()["runs"] = run.details;
}

inline BlockStructureReport block_report(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto block = dirac_rotate_v_block(ws.chains(), cfg.block_from, cfg.block_to);
  return block_structure(block, cfg.fine_size, cfg.bin_width);
}

inline void write_block(RunRecord& rec, const BlockStructureReport& rep, bool fine, bool coarse) {
  if (fine) {
    auto csv = rec.csv("block_fine.csv", {"row_energy", "col_energy", "value"});
    for (const auto& e : rep.fine) csv.row({e.row_energy, e.col_energy, e.value});
    csv.close();
  }
  if (coarse) {
    auto csv = rec.csv("block_coarse.csv", {"row_bin_center", "col_bin_center", "mean_sq", "count"});
    for (const auto& b : rep.coarse) csv.row({b.row_center, b.col_center, b.mean_sq, static_cast<double>(b.count)});
    csv.close();
  }
  const double near = rep.mean_sq_where([](double d) { return d < 1.0; });
  const double far = rep.mean_sq_where([](double d) { return d > 3.0; });
  rec.results()["mean_sq_near"] = near;
  rec.results()["mean_sq_far"] = far;
  rec.results()["fine_mean"] = rep.fine_mean();
  rec.results()["fine_standard_error"] = rep.fine_standard_error();
  rec.results()["fine_shape"] = {rep.fine_rows, rep.fine_cols};
  if (!rep.notice.empty()) rec.results()["notice"] = rep.notice;
}

inline void cmd_block_structure(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto rep = block_report(ws);
  write_block(rec, rep, true, true);
  if (!rep.notice.empty()) out << "note: " << rep.notice << "\n";
  out << "mean |V|^2 for |dE| < 1: " << format_number(rec.results()["mean_sq_near"].get<double>())
      << ", for |dE| > 3: " << format_number(rec.results()["mean_sq_far"].get<double>()) << "\n";
  out << "fine block mean " << format_number(rep.fine_mean()) << " +- " << format_number(rep.fine_standard_error()) << "\n";
}

inline void cmd_eth(Workspace& ws, RunRecord& rec, std::ostream& out) {
  const auto rep = eth_diagonals(ws.spectrum(), ws.basis(), ws.window());
  auto csv = rec.csv("eth.csv", {"E_n", "x_diag", "x2_diag", "parity"});
  for (const auto& r : rep.rows) csv.row({r.energy, r.x_diag, r.x2_diag, static_cast<double>(r.parity)});
  csv.close();
  rec.results()["window_rank"] = rep.rows.size();
  rec.results()["mean_x2"] = rep.mean_x2;
  rec.results()["spread_x2"] = rep.spread_x2;
  rec.results()["max_abs_x"] = rep.max_abs_x;
  out << "window rank " << rep.rows.size() << ", mean <x^2> = " << format_number(rep.mean_x2) << " (spread "
      << format_number(rep.spread_x2) << "), max |<x>| = " << format_number(rep.max_abs_x) << "\n";
}

/// Rung coupling each figure is drawn at.
inline double figure_kappa(int figure) { return figure >= 6 ? 0.15 : 0.2; }

inline void cmd_reproduce_figure(Workspace& ws, RunRecord& rec, std::ostream& out, int figure) {
  rec.results()["figure"] = figure;
  if (figure == 4 || figure == 5) {
    const auto rep = block_report(ws);
    write_block(rec, rep, figure == 4, figure == 5);
    out << "wrote " << (figure == 4 ? "block_fine.csv" : "block_coarse.csv") << " to " << rec.dir().string() << "\n";
    return;
  }
  const auto& cfg = ws.config();
  InitialStateSpec init = cfg.initial;
  init.kind = InitialKind::window_mixed;
  const std::vector<double> xs = figure == 1 ? std::vector<double>{1.0} : std::vector<double>{0.0, 1.0, 2.0};
  nlohmann::json runs = nlohmann::json::array();
  for (double x : xs) {
    init.x = x;
    const auto c = run_comparison(ws, rec, init);
    const std::string suffix = figure == 1 ? "" : "_x" + x_label(x);
    write_series(rec, "quantum" + suffix + ".csv", c.quantum);
    write_series(rec, "stochastic" + suffix + ".csv", c.stochastic);
    write_compare(rec, "compare" + suffix + ".csv", c.report);
    auto s = summarize(c);
    s["x"] = x;
    runs.push_back(s);
    out << "X = " << x_label(x) << ": sup |dP| = " << format_number(c.report.sup_dp)
        << ", delta = " << format_number(c.report.delta) << ", final variance " << format_number(c.quantum.variance.back())
        << "\n";
  }
  rec.results()["runs"] = runs;
}

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"info",  "evolve-quantum",  "evolve-stochastic", "tcl", "fit-gamma",
                                              "delta", "block-structure", "eth",               "compare",
                                              "reproduce-figure"};
  return names;
}

/// Runs one subcommand, writing artifacts and manifest to cfg.output_dir.
/// Returns 0 on success, 1 on invalid input, 2 on numerical failure.
inline int run_subcommand(const std::string& name, RunConfig cfg, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr, int figure = 0) {
  try {
    require(std::find(subcommand_names().begin(), subcommand_names().end(), name) != subcommand_names().end(),
            "unknown subcommand '" + name + "'");
    if (name == "reproduce-figure") {
      require(figure >= 1 && figure <= 7, "figure must be 1..7 (got " + std::to_string(figure) + ")");
      cfg.ladder.rung_coupling = figure_kappa(figure);
    }
    cfg.validate();
    Workspace ws(cfg, err);
    RunRecord rec(name, cfg);
    if (name == "info") cmd_info(ws, rec, out);
    else if (name == "evolve-quantum") cmd_evolve_quantum(ws, rec, out);
    else if (name == "evolve-stochastic") cmd_evolve_stochastic(ws, rec, out);
    else if (name == "tcl") cmd_tcl(ws, rec, out);
    else if (name == "fit-gamma") cmd_fit_gamma(ws, rec, out);
    else if (name == "delta") cmd_delta(ws, rec, out);
    else if (name == "block-structure") cmd_block_structure(ws, rec, out);
    else if (name == "eth") cmd_eth(ws, rec, out);
    else if (name == "compare") cmd_compare(ws, rec, out);
    else cmd_reproduce_figure(ws, rec, out, figure);
    rec.write_manifest();
    return exit_ok;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::bad_alloc&) {
    err << "numerical failure: out of memory (lower dense_ceiling or use mixed_mode = typicality)\n";
    return exit_numerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  }
}

}  // namespace ladder
