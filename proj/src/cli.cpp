#include "qpm/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>

#include "qpm/apodization.hpp"
#include "qpm/dispersion.hpp"
#include "qpm/error.hpp"
#include "qpm/io.hpp"
#include "qpm/measurement.hpp"
#include "qpm/reference_model.hpp"
#include "qpm/spectrum.hpp"
#include "qpm/units.hpp"

namespace qpm::cli {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kConvergenceGate = 0.005;

struct RunConfig {
  std::string subcommand;
  std::string dispersion = "reference";
  std::string sequence;
  std::vector<std::string> sigma{"L/5"};
  double length_um = 9200.0;
  std::optional<double> domain_um;
  double pump_nm = 785.0;
  double pump_fwhm_nm = 4.5;
  double signal_nm = 1520.0;
  std::string pump_mode = "TE0";
  std::string signal_mode = "TE0";
  std::string idler_mode = "TE2";
  std::string frame = "demodulated";
  bool uniform = false;
  bool optimize_pump = false;
  bool linearized = false;
  std::size_t grid = 512;
  double grid_sigmas = 4.0;
  std::size_t compare_grid = 0;
  std::uint64_t seed = 12345;
  std::uint64_t pairs = 1'000'000;
  std::string out_dir;
  unsigned threads = 1;
  bool json = false;
  bool quiet = false;

  // pmf / sfg-map
  std::size_t points = 2001;
  double dk_max = 0.0;
  std::size_t map_points = 161;
  double span_nm = 8.0;

  // spectrometer
  SpectrometerConfig spectrometer;
  std::size_t recon_grid = 64;

  // g2
  std::uint64_t pulses = 1'000'000;
  double mean_photons = 0.01;
  std::size_t batches = 100;
  double transmission = 1.0;
  std::optional<double> purity;
  std::vector<double> lambdas;
  std::optional<double> g2_zero;
  double g2_infinity = 1.0;
  std::optional<double> filter_nm;
};

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["subcommand"] = c.subcommand;
  j["dispersion"] = c.dispersion;
  j["sequence"] = c.sequence;
  j["sigma"] = c.sigma;
  j["length_um"] = c.length_um;
  j["domain_um"] = c.domain_um ? ordered_json(*c.domain_um) : ordered_json(nullptr);
  j["pump_nm"] = c.pump_nm;
  j["pump_fwhm_nm"] = c.pump_fwhm_nm;
  j["signal_nm"] = c.signal_nm;
  j["modes"] = {{"pump", c.pump_mode}, {"signal", c.signal_mode}, {"idler", c.idler_mode}};
  j["frame"] = c.frame;
  j["uniform"] = c.uniform;
  j["optimize_pump"] = c.optimize_pump;
  j["mismatch"] = c.linearized ? "linearized" : "exact";
  j["grid"] = c.grid;
  j["grid_sigmas"] = c.grid_sigmas;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (c.subcommand == "jsa") j["compare_grid"] = c.compare_grid;
  if (c.subcommand == "pmf" || c.subcommand == "design") {
    j["points"] = c.points;
    j["dk_max_rad_per_um"] = c.dk_max;
  }
  if (c.subcommand == "sfg-map") {
    j["map_points"] = c.map_points;
    j["span_nm"] = c.span_nm;
  }
  if (c.subcommand == "spectrometer") {
    const auto& s = c.spectrometer;
    j["pairs"] = c.pairs;
    j["recon_grid"] = c.recon_grid;
    j["spectrometer"] = {{"fiber_length_km", s.fiber_length_km},
                         {"dispersion_ps_per_nm_km", s.dispersion_ps_per_nm_km},
                         {"jitter_fwhm_ps", s.jitter_fwhm_ps},
                         {"bin_width_ps", s.bin_width_ps},
                         {"signal_reference_nm", s.signal_reference_nm},
                         {"idler_reference_nm", s.idler_reference_nm},
                         {"signal_transmission", s.signal_transmission},
                         {"idler_transmission", s.idler_transmission}};
  }
  if (c.subcommand == "g2") {
    j["pulses"] = c.pulses;
    j["mean_photons"] = c.mean_photons;
    j["batches"] = c.batches;
    j["transmission"] = c.transmission;
    j["purity"] = c.purity ? ordered_json(*c.purity) : ordered_json(nullptr);
    j["lambdas"] = c.lambdas;
    j["g2_zero"] = c.g2_zero ? ordered_json(*c.g2_zero) : ordered_json(nullptr);
    j["g2_infinity"] = c.g2_infinity;
    j["filter_nm"] = c.filter_nm ? ordered_json(*c.filter_nm) : ordered_json(nullptr);
  }
  return j;
}

// Accepts a length in um, "L/x" or "L*x".
double parse_sigma(const std::string& text, double length_um) {
  auto number = [&](std::string_view s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(std::string(s), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError("cannot parse sigma '" + text + "'");
    return v;
  };
  double v = 0.0;
  if (text.starts_with("L/")) v = length_um / number(std::string_view(text).substr(2));
  else if (text.starts_with("L*")) v = length_um * number(std::string_view(text).substr(2));
  else v = number(text);
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError("sigma must be positive: '" + text + "'");
  return v;
}

struct Context {
  RunConfig cfg;
  DispersionModel model;
  ProcessSpec spec;
  ordered_json config;

  double domain_um() const { return cfg.domain_um.value_or(*spec.poling_period_um / 2.0); }
  double sigma_um() const {
    if (cfg.sigma.size() != 1) throw InputError("this subcommand takes exactly one sigma");
    return parse_sigma(cfg.sigma.front(), cfg.length_um);
  }
  JsaOptions jsa_options() const {
    JsaOptions o;
    o.threads = cfg.threads;
    if (cfg.linearized) o.mismatch = JsaOptions::MismatchModel::linearized;
    return o;
  }
};

DispersionModel load_model(const std::string& source) {
  if (source == "reference") return reference_model();
  return io::read_dispersion_file(source);
}

Context make_context(const RunConfig& cfg, bool solve_period) {
  if (!(cfg.length_um > 0.0)) throw InputError("--length-um must be positive");
  if (cfg.domain_um && !(*cfg.domain_um > 0.0)) throw InputError("--domain-um must be positive");
  if (cfg.threads < 1) throw InputError("--threads must be at least 1");
  DispersionModel model = load_model(cfg.dispersion);
  ProcessSpec spec = make_process(model, {cfg.pump_mode, cfg.pump_nm},
                                  {cfg.signal_mode, cfg.signal_nm}, cfg.idler_mode);
  validate_process(model, spec);
  if (solve_period) spec = with_solved_period(model, spec);
  ordered_json config = config_json(cfg);
  ordered_json resolved;
  resolved["idler_nm"] = spec.idler.wavelength_nm;
  if (spec.poling_period_um) {
    resolved["poling_period_um"] = *spec.poling_period_um;
    resolved["domain_um"] = cfg.domain_um.value_or(*spec.poling_period_um / 2.0);
  }
  config["resolved"] = resolved;
  return Context{cfg, std::move(model), std::move(spec), std::move(config)};
}

DomainSequence resolve_sequence(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.sequence.empty()) return io::read_sequence_file(cfg.sequence);
  const Frame frame = frame_from_string(cfg.frame);
  const double lc = ctx.domain_um();
  DomainSequence seq = cfg.uniform ? uniform_sequence(cfg.length_um, lc)
                                   : synthesize_domains(cfg.length_um, lc, ctx.sigma_um());
  if (!cfg.uniform) ctx.config["resolved"]["sigma_um"] = ctx.sigma_um();
  return frame == Frame::physical ? to_physical(seq) : seq;
}

fs::path output_path(const RunConfig& cfg, const std::string& name) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw InputError("cannot create output directory '" + cfg.out_dir + "'");
  return dir / name;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  const fs::path path = output_path(cfg, name);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void write_json_file(const RunConfig& cfg, const std::string& name, const ordered_json& j) {
  if (cfg.out_dir.empty()) return;
  auto out = open_output(cfg, name);
  out << j.dump(2) << '\n';
}

std::string config_comment(const ordered_json& config) { return "# config: " + config.dump() + "\n"; }

// Two-column report table.
class Table {
 public:
  void row(std::string_view label, const std::string& value) {
    rows_.emplace_back(std::string(label), value);
  }
  void print(std::ostream& out) const {
    std::size_t width = 0;
    for (const auto& [label, _] : rows_) width = std::max(width, label.size());
    for (const auto& [label, value] : rows_) out << fmt::format("{:<{}}  {}\n", label, width, value);
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

void emit(const Context& ctx, const Table& table, const ordered_json& summary,
          const std::string& file_name, std::ostream& out) {
  ordered_json doc = summary;
  doc["config"] = ctx.config;
  write_json_file(ctx.cfg, file_name, doc);
  if (ctx.cfg.quiet) return;
  if (ctx.cfg.json) out << doc.dump(2) << '\n';
  else table.print(out);
}

std::string_view boundary_name(GvmBoundary b) {
  switch (b) {
    case GvmBoundary::none: return "none";
    case GvmBoundary::signal_equals_pump: return "signal_equals_pump";
    case GvmBoundary::idler_equals_pump: return "idler_equals_pump";
    case GvmBoundary::all_equal: return "all_equal";
  }
  return "none";
}

// --- subcommands -----------------------------------------------------------

int cmd_gvm(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, false);
  const GvmReport r = gvm_check(ctx.model, ctx.spec);
  const double angle = pmf_angle(ctx.model, ctx.spec);
  Table t;
  t.row("pump group index", fmt::format("{:.6f}  ({} @ {} nm)", r.group_index.pump,
                                        ctx.spec.pump.mode, ctx.spec.pump.wavelength_nm));
  t.row("signal group index", fmt::format("{:.6f}  ({} @ {} nm)", r.group_index.signal,
                                          ctx.spec.signal.mode, ctx.spec.signal.wavelength_nm));
  t.row("idler group index", fmt::format("{:.6f}  ({} @ {:.3f} nm)", r.group_index.idler,
                                         ctx.spec.idler.mode, ctx.spec.idler.wavelength_nm));
  t.row("GVM ratio r", fmt::format("{:.6f}", r.ratio));
  t.row("PMF angle", fmt::format("{:.3f} deg", angle));
  t.row("GVM condition", r.satisfied ? "satisfied" : "not satisfied");
  t.row("boundary", std::string(boundary_name(r.boundary)));
  ordered_json s;
  s["group_index"] = {{"pump", r.group_index.pump},
                      {"signal", r.group_index.signal},
                      {"idler", r.group_index.idler}};
  s["gvm_ratio"] = std::isfinite(r.ratio) ? ordered_json(r.ratio) : ordered_json("inf");
  s["pmf_angle_deg"] = angle;
  s["satisfied"] = r.satisfied;
  s["boundary"] = boundary_name(r.boundary);
  emit(ctx, t, s, "gvm.json", out);
  return 0;
}

int cmd_period(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  const auto& sp = ctx.spec;
  const double kp = ctx.model.wavenumber(sp.pump.mode, sp.pump.wavelength_nm / units::kNmPerUm);
  const double ks =
      ctx.model.wavenumber(sp.signal.mode, sp.signal.wavelength_nm / units::kNmPerUm);
  const double ki = ctx.model.wavenumber(sp.idler.mode, sp.idler.wavelength_nm / units::kNmPerUm);
  Table t;
  t.row("idler wavelength", fmt::format("{:.4f} nm", sp.idler.wavelength_nm));
  t.row("k_p", fmt::format("{:.6f} rad/um", kp));
  t.row("k_s", fmt::format("{:.6f} rad/um", ks));
  t.row("k_i", fmt::format("{:.6f} rad/um", ki));
  t.row("poling period", fmt::format("{:.6f} um", *sp.poling_period_um));
  t.row("domain length", fmt::format("{:.6f} um", *sp.poling_period_um / 2.0));
  ordered_json s;
  s["idler_nm"] = sp.idler.wavelength_nm;
  s["k_rad_per_um"] = {{"pump", kp}, {"signal", ks}, {"idler", ki}};
  s["poling_period_um"] = *sp.poling_period_um;
  s["domain_um"] = *sp.poling_period_um / 2.0;
  emit(ctx, t, s, "period.json", out);
  return 0;
}

void write_pmf_csv(const Context& ctx, const DomainSequence& seq, double center, double half,
                   std::size_t points, double peak, const std::string& name) {
  if (ctx.cfg.out_dir.empty()) return;
  auto f = open_output(ctx.cfg, name);
  f << config_comment(ctx.config);
  f << "dk_rad_per_um,abs_phi_um,normalized\n";
  for (std::size_t k = 0; k < points; ++k) {
    const double dk =
        center - half + 2.0 * half * static_cast<double>(k) / static_cast<double>(points - 1);
    const double mag = std::abs(discrete_pmf(seq, dk));
    f << fmt::format("{:.10g},{:.10g},{:.10g}\n", dk, mag, mag / peak);
  }
}

int cmd_design(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  if (cfg.points < 2) throw InputError("--points must be at least 2");
  const double lc = ctx.domain_um();
  const double sigma = ctx.sigma_um();
  DomainSequence demod = cfg.uniform ? uniform_sequence(cfg.length_um, lc)
                                     : synthesize_domains(cfg.length_um, lc, sigma);
  ctx.config["resolved"]["sigma_um"] = sigma;
  const bool physical = frame_from_string(cfg.frame) == Frame::physical;
  const DomainSequence seq = physical ? to_physical(demod) : demod;
  const auto quality = gaussian_fit_quality(demod, sigma);
  const double tracking = tracking_error(demod, gaussian_target(demod.length(), sigma));
  const double bright = brightness(demod);
  const double peak = pmf_peak(demod).magnitude;
  const double half = cfg.dk_max > 0.0 ? cfg.dk_max : 20.0 / sigma;

  if (!cfg.out_dir.empty()) {
    auto f = open_output(cfg, "sequence.txt");
    f << config_comment(ctx.config);
    io::write_sequence(f, seq);
  }
  write_pmf_csv(ctx, demod, 0.0, half, cfg.points, peak, "design_pmf.csv");

  Table t;
  t.row("domains", fmt::format("{}", seq.size()));
  t.row("domain length", fmt::format("{:.6f} um", lc));
  t.row("grating length", fmt::format("{:.3f} um", seq.length()));
  t.row("sigma", fmt::format("{:.3f} um (L/{:.3f})", sigma, seq.length() / sigma));
  t.row("frame", std::string(to_string(seq.frame())));
  t.row("domain walls", fmt::format("{}", seq.domain_walls()));
  t.row("tracking error", fmt::format("{:.4f} um ({:.3f} Lc)", tracking, tracking / lc));
  t.row("brightness", fmt::format("{:.4f}", bright));
  t.row("Gaussian fit RMS", fmt::format("{:.5f}", quality.rms_error));
  t.row("peak sidelobe", fmt::format("{:.3f} %", 100.0 * quality.worst_sidelobe));
  ordered_json s;
  s["domains"] = seq.size();
  s["domain_um"] = lc;
  s["length_um"] = seq.length();
  s["sigma_um"] = sigma;
  s["frame"] = to_string(seq.frame());
  s["domain_walls"] = seq.domain_walls();
  s["tracking_error_um"] = tracking;
  s["brightness"] = bright;
  s["gaussian_fit_rms"] = quality.rms_error;
  s["peak_sidelobe"] = quality.worst_sidelobe;
  emit(ctx, t, s, "design.json", out);
  return 0;
}

int cmd_pmf(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  if (cfg.points < 2) throw InputError("--points must be at least 2");
  const DomainSequence seq = resolve_sequence(ctx);
  const PmfPeak peak = pmf_peak(seq);
  const double center = seq.frame() == Frame::physical ? units::kPi / seq.domain_length() : 0.0;
  const double half = cfg.dk_max > 0.0 ? cfg.dk_max : 40.0 * units::kPi / seq.length();
  write_pmf_csv(ctx, seq, center, half, cfg.points, peak.magnitude, "pmf.csv");
  const double bright = brightness(seq);
  Table t;
  t.row("domains", fmt::format("{}", seq.size()));
  t.row("frame", std::string(to_string(seq.frame())));
  t.row("peak dk", fmt::format("{:.6f} rad/um", peak.dk));
  t.row("peak |phi|", fmt::format("{:.4f} um", peak.magnitude));
  t.row("brightness", fmt::format("{:.4f}", bright));
  ordered_json s;
  s["domains"] = seq.size();
  s["frame"] = to_string(seq.frame());
  s["peak_dk_rad_per_um"] = peak.dk;
  s["peak_abs_phi_um"] = peak.magnitude;
  s["brightness"] = bright;
  emit(ctx, t, s, "pmf.json", out);
  return 0;
}

void write_matrix_csv(std::ostream& f, const ordered_json& config, std::string_view quantity,
                      const FrequencyGrid& grid, const Eigen::MatrixXd& m) {
  f << config_comment(config);
  f << "# " << quantity << "; rows: signal, columns: idler\n";
  f << "# idler_thz";
  for (std::size_t c = 0; c < grid.idler.points; ++c)
    f << fmt::format(",{:.9g}", units::thz_from_omega(grid.idler.at(c)));
  f << "\nsignal_nm\\idler_nm,signal_thz";
  for (std::size_t c = 0; c < grid.idler.points; ++c)
    f << fmt::format(",{:.9g}", units::nm_from_omega(grid.idler.at(c)));
  f << '\n';
  for (std::size_t r = 0; r < grid.signal.points; ++r) {
    f << fmt::format("{:.9g},{:.9g}", units::nm_from_omega(grid.signal.at(r)),
                     units::thz_from_omega(grid.signal.at(r)));
    for (std::size_t c = 0; c < grid.idler.points; ++c)
      f << fmt::format(",{:.9g}", m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    f << '\n';
  }
}

// Marginal fit in frequency, reported as centre wavelength and FWHM in nm.
ordered_json marginal_fit(const Eigen::VectorXd& marginal, const Axis& axis) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(axis.points));
  for (std::size_t k = 0; k < axis.points; ++k)
    x[static_cast<Eigen::Index>(k)] = units::thz_from_omega(axis.at(k));
  const GaussianFit fit = fit_gaussian(x, marginal);
  const double center_nm = units::nm_from_omega(fit.mean * 1e12 * units::kTwoPi);
  const double fwhm_thz = std::abs(fit.sigma) / units::kFwhmToSigma;
  const double fwhm_nm = center_nm * center_nm * fwhm_thz * 1e12 / (units::kSpeedOfLight * 1e3);
  return {{"center_nm", center_nm}, {"fwhm_nm", fwhm_nm}, {"r_squared", fit.r_squared}};
}

double resolve_pump_fwhm(Context& ctx, const DomainSequence& seq) {
  double fwhm = ctx.cfg.pump_fwhm_nm;
  if (ctx.cfg.optimize_pump)
    fwhm = optimize_pump_bandwidth(ctx.model, ctx.spec, seq, ctx.cfg.pump_nm, 128, 0.2, 20.0,
                                   ctx.jsa_options());
  if (!(fwhm > 0.0)) throw InputError("--pump-fwhm-nm must be positive");
  ctx.config["resolved"]["pump_fwhm_nm"] = fwhm;
  return fwhm;
}

int cmd_jsa(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Context ctx = make_context(cfg, true);
  const DomainSequence seq = resolve_sequence(ctx);
  const PumpEnvelope pump(cfg.pump_nm, resolve_pump_fwhm(ctx, seq));
  const std::size_t coarse = cfg.compare_grid ? cfg.compare_grid : cfg.grid / 2;
  ctx.config["resolved"]["compare_grid"] = coarse;
  const auto opts = ctx.jsa_options();

  const JointSpectrum js = compute_jsa(ctx.model, ctx.spec, seq, pump,
                                       default_grid(ctx.spec, pump, cfg.grid, cfg.grid_sigmas), opts);
  const SchmidtResult sr = schmidt(js);
  const Eigen::MatrixXd intensity = jsi(js);
  const double jsi_purity = schmidt_from_jsi(intensity).purity;
  const JointSpectrum js_coarse = compute_jsa(ctx.model, ctx.spec, seq, pump,
                                              default_grid(ctx.spec, pump, coarse, cfg.grid_sigmas), opts);
  const double coarse_purity = schmidt(js_coarse).purity;
  const double delta = std::abs(sr.purity - coarse_purity);
  // Same point count over twice the half width: exposes truncated PMF tails.
  const JointSpectrum js_wide = compute_jsa(
      ctx.model, ctx.spec, seq, pump, default_grid(ctx.spec, pump, coarse, 2.0 * cfg.grid_sigmas),
      opts);
  const double wide_purity = schmidt(js_wide).purity;
  const double extent_delta = std::abs(wide_purity - coarse_purity);
  const Marginals m = marginals(js);
  const ordered_json fit_s = marginal_fit(m.signal, js.grid.signal);
  const ordered_json fit_i = marginal_fit(m.idler, js.grid.idler);

  if (!cfg.out_dir.empty()) {
    auto f = open_output(cfg, "jsi.csv");
    write_matrix_csv(f, ctx.config, "JSI |f|^2 in s^2, sum * dws * dwi = 1", js.grid, intensity);
  }
  if (delta >= kConvergenceGate)
    err << fmt::format("warning: purity changes by {:.4f} between {}x{} and {}x{} grids\n", delta,
                       coarse, coarse, cfg.grid, cfg.grid);
  if (extent_delta >= kConvergenceGate)
    err << fmt::format(
        "warning: purity changes by {:.4f} when the grid half width doubles to {} pump sigmas\n",
        extent_delta, 2.0 * cfg.grid_sigmas);

  const std::size_t shown = std::min<std::size_t>(8, sr.coefficients.size());
  std::vector<double> top(sr.coefficients.begin(), sr.coefficients.begin() + shown);
  std::string top_text;
  for (double l : top) top_text += fmt::format("{}{:.6f}", top_text.empty() ? "" : " ", l);

  Table t;
  t.row("domains", fmt::format("{} ({})", seq.size(), to_string(seq.frame())));
  t.row("pump FWHM", fmt::format("{:.4f} nm", pump.fwhm_nm));
  t.row("grid", fmt::format("{0}x{0}", cfg.grid));
  t.row("purity", fmt::format("{:.4f}", sr.purity));
  t.row("Schmidt number K", fmt::format("{:.4f}", sr.schmidt_number));
  t.row("purity (JSI only)", fmt::format("{:.4f}", jsi_purity));
  t.row("top Schmidt coefficients", top_text);
  t.row("signal marginal", fmt::format("{:.3f} nm, FWHM {:.3f} nm, R2 {:.4f}",
                                       fit_s["center_nm"].get<double>(),
                                       fit_s["fwhm_nm"].get<double>(),
                                       fit_s["r_squared"].get<double>()));
  t.row("idler marginal", fmt::format("{:.3f} nm, FWHM {:.3f} nm, R2 {:.4f}",
                                      fit_i["center_nm"].get<double>(),
                                      fit_i["fwhm_nm"].get<double>(),
                                      fit_i["r_squared"].get<double>()));
  t.row(fmt::format("purity at {0}x{0}", coarse), fmt::format("{:.4f}", coarse_purity));
  t.row("grid convergence delta",
        fmt::format("{:.5f}{}", delta, delta >= kConvergenceGate ? " (above 0.005)" : ""));
  t.row(fmt::format("purity at {}x{}, +-{} sigma", coarse, coarse, 2.0 * cfg.grid_sigmas),
        fmt::format("{:.4f}", wide_purity));
  t.row("grid extent delta", fmt::format("{:.5f}{}", extent_delta,
                                         extent_delta >= kConvergenceGate ? " (above 0.005)" : ""));
  ordered_json s;
  s["domains"] = seq.size();
  s["pump_fwhm_nm"] = pump.fwhm_nm;
  s["purity"] = sr.purity;
  s["schmidt_number"] = sr.schmidt_number;
  s["purity_jsi_only"] = jsi_purity;
  s["schmidt_coefficients"] = top;
  s["marginals"] = {{"signal", fit_s}, {"idler", fit_i}};
  s["convergence"] = {{"grid", cfg.grid},
                      {"compare_grid", coarse},
                      {"compare_purity", coarse_purity},
                      {"delta", delta},
                      {"converged", delta < kConvergenceGate},
                      {"wide_grid_sigmas", 2.0 * cfg.grid_sigmas},
                      {"wide_purity", wide_purity},
                      {"extent_delta", extent_delta},
                      {"extent_converged", extent_delta < kConvergenceGate}};
  emit(ctx, t, s, "jsa_summary.json", out);
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  std::vector<double> sigmas;
  for (const auto& s : cfg.sigma) {
    if (!s.empty()) sigmas.push_back(parse_sigma(s, cfg.length_um));
  }
  if (sigmas.empty()) throw InputError("the sigma list is empty");
  SweepOptions opts;
  opts.grid_points = cfg.grid;
  opts.optimize_pump = cfg.optimize_pump;
  opts.jsa = ctx.jsa_options();
  const PumpEnvelope pump(cfg.pump_nm, cfg.pump_fwhm_nm);
  const auto rows =
      sweep_sigma(ctx.model, ctx.spec, pump, cfg.length_um, ctx.domain_um(), sigmas, opts);
  if (!cfg.out_dir.empty()) {
    auto f = open_output(cfg, "sweep.csv");
    f << config_comment(ctx.config);
    f << "sigma_um,sigma_over_L,purity,brightness,pump_fwhm_nm\n";
    for (const auto& r : rows)
      f << fmt::format("{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", r.sigma_um,
                       r.sigma_um / cfg.length_um, r.purity, r.brightness, r.pump_fwhm_nm);
  }
  Table t;
  t.row("sigma [um]", "purity   brightness  pump FWHM [nm]");
  ordered_json s;
  s["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    t.row(fmt::format("{:.3f}", r.sigma_um),
          fmt::format("{:.4f}   {:.4f}      {:.4f}", r.purity, r.brightness, r.pump_fwhm_nm));
    s["rows"].push_back({{"sigma_um", r.sigma_um},
                         {"purity", r.purity},
                         {"brightness", r.brightness},
                         {"pump_fwhm_nm", r.pump_fwhm_nm}});
  }
  emit(ctx, t, s, "sweep.json", out);
  return 0;
}

int cmd_sfg_map(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  if (cfg.map_points < 3) throw InputError("--map-points must be at least 3");
  if (!(cfg.span_nm > 0.0)) throw InputError("--span-nm must be positive");
  const DomainSequence seq = resolve_sequence(ctx);
  const WavelengthAxis sa{cfg.signal_nm - cfg.span_nm / 2, cfg.signal_nm + cfg.span_nm / 2,
                          cfg.map_points};
  const double idler_nm = ctx.spec.idler.wavelength_nm;
  const WavelengthAxis ia{idler_nm - cfg.span_nm / 2, idler_nm + cfg.span_nm / 2, cfg.map_points};
  const SfgMap map = sfg_map(ctx.model, ctx.spec, seq, sa, ia, cfg.threads);
  const double slope = ridge_slope(map);
  if (!cfg.out_dir.empty()) {
    auto f = open_output(cfg, "sfg_map.csv");
    f << config_comment(ctx.config);
    f << "# |phi|^2 in um^2; rows: signal-mode wavelength, columns: idler-mode wavelength\n";
    f << "signal_nm\\idler_nm";
    for (std::size_t c = 0; c < ia.points; ++c) f << fmt::format(",{:.9g}", ia.at(c));
    f << '\n';
    for (std::size_t r = 0; r < sa.points; ++r) {
      f << fmt::format("{:.9g}", sa.at(r));
      for (std::size_t c = 0; c < ia.points; ++c)
        f << fmt::format(",{:.9g}",
                         map.power(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      f << '\n';
    }
  }
  Table t;
  t.row("signal span", fmt::format("{:.3f} - {:.3f} nm", sa.min_nm, sa.max_nm));
  t.row("idler span", fmt::format("{:.3f} - {:.3f} nm", ia.min_nm, ia.max_nm));
  t.row("ridge slope", fmt::format("{:.5f} nm/nm", slope));
  ordered_json s;
  s["signal_span_nm"] = {sa.min_nm, sa.max_nm};
  s["idler_span_nm"] = {ia.min_nm, ia.max_nm};
  s["ridge_slope"] = slope;
  emit(ctx, t, s, "sfg_map.json", out);
  return 0;
}

int cmd_spectrometer(const RunConfig& cfg, std::ostream& out) {
  Context ctx = make_context(cfg, true);
  const SpectrometerConfig& sc = cfg.spectrometer;
  sc.validate();
  if (cfg.pairs < 1) throw InputError("--pairs must be at least 1");
  if (cfg.recon_grid < 16) throw InputError("--recon-grid must be at least 16");
  const DomainSequence seq = resolve_sequence(ctx);
  const PumpEnvelope pump(cfg.pump_nm, resolve_pump_fwhm(ctx, seq));
  const auto opts = ctx.jsa_options();
  const JointSpectrum js = compute_jsa(ctx.model, ctx.spec, seq, pump,
                                       default_grid(ctx.spec, pump, cfg.grid, cfg.grid_sigmas), opts);
  const CoincidenceHistogram h = acquire(js, sc, cfg.pairs, cfg.seed, cfg.threads);
  const FrequencyGrid target = default_grid(ctx.spec, pump, cfg.recon_grid, cfg.grid_sigmas);
  const Eigen::MatrixXd source = jsi(compute_jsa(ctx.model, ctx.spec, seq, pump, target, opts));
  const Eigen::MatrixXd recon = reconstruct_jsi(h, sc, target);
  const double l2 = relative_l2_error(recon, source);
  const double p_source = schmidt_from_jsi(source).purity;
  const double p_recon = schmidt_from_jsi(recon).purity;
  const double resolution = spectral_resolution(sc);

  if (!cfg.out_dir.empty()) {
    {
      auto f = open_output(cfg, "histogram.csv");
      f << config_comment(ctx.config);
      io::write_histogram_csv(f, h);
    }
    ordered_json meta;
    meta["config"] = ctx.config;
    meta["seed"] = cfg.seed;
    meta["pairs"] = cfg.pairs;
    meta["recorded"] = h.total();
    meta["bin_width_ps"] = h.bin_width_ps;
    meta["signal_origin_ps"] = h.signal_origin_ps;
    meta["idler_origin_ps"] = h.idler_origin_ps;
    meta["signal_bins"] = h.signal_bins;
    meta["idler_bins"] = h.idler_bins;
    write_json_file(cfg, "histogram.json", meta);
    auto f = open_output(cfg, "reconstructed_jsi.csv");
    write_matrix_csv(f, ctx.config, "reconstructed JSI in s^2, sum * dws * dwi = 1", target,
                     recon);
  }
  Table t;
  t.row("spectral resolution", fmt::format("{:.3f} nm", resolution));
  t.row("pairs", fmt::format("{}", cfg.pairs));
  t.row("recorded coincidences", fmt::format("{}", h.total()));
  t.row("histogram bins", fmt::format("{} x {}", h.signal_bins, h.idler_bins));
  t.row("round-trip L2 error", fmt::format("{:.4f}", l2));
  t.row("source JSI purity", fmt::format("{:.4f}", p_source));
  t.row("reconstructed purity", fmt::format("{:.4f}", p_recon));
  ordered_json s;
  s["spectral_resolution_nm"] = resolution;
  s["pairs"] = cfg.pairs;
  s["recorded"] = h.total();
  s["round_trip_l2_error"] = l2;
  s["source_jsi_purity"] = p_source;
  s["reconstructed_purity"] = p_recon;
  emit(ctx, t, s, "spectrometer.json", out);
  return 0;
}

// Thermal-like Schmidt spectrum lambda_n = (1 - x) x^n with purity P.
SchmidtResult geometric_spectrum(double purity) {
  if (!(purity > 0.0 && purity <= 1.0)) throw InputError("purity must lie in (0, 1]");
  const double x = (1.0 - purity) / (1.0 + purity);
  std::vector<double> lambdas{1.0 - x};
  while (x > 0.0 && lambdas.back() > 1e-14) lambdas.push_back(lambdas.back() * x);
  return SchmidtResult::from_coefficients(std::move(lambdas));
}

int cmd_g2(const RunConfig& cfg, std::ostream& out) {
  // Arithmetic only: purity from measured g2 values.
  if (cfg.g2_zero) {
    RunConfig c = cfg;
    ordered_json config = config_json(c);
    const double p = purity_from_g2(*cfg.g2_zero, cfg.g2_infinity);
    Table t;
    t.row("g2(0)", fmt::format("{}", *cfg.g2_zero));
    t.row("g2(inf)", fmt::format("{}", cfg.g2_infinity));
    t.row("purity", fmt::format("{:.4f}", p));
    ordered_json s;
    s["g2_zero"] = *cfg.g2_zero;
    s["g2_infinity"] = cfg.g2_infinity;
    s["purity_estimate"] = p;
    s["config"] = config;
    write_json_file(cfg, "g2.json", s);
    if (cfg.quiet) return 0;
    if (cfg.json) out << s.dump(2) << '\n';
    else t.print(out);
    return 0;
  }

  std::optional<Context> ctx;
  SchmidtResult spectrum;
  std::string source;
  if (cfg.purity || !cfg.lambdas.empty()) {
    spectrum = cfg.lambdas.empty() ? geometric_spectrum(*cfg.purity)
                                   : SchmidtResult::from_coefficients(cfg.lambdas);
    source = cfg.lambdas.empty() ? "injected geometric spectrum" : "injected coefficients";
  } else {
    ctx = make_context(cfg, true);
    const DomainSequence seq = resolve_sequence(*ctx);
    const PumpEnvelope pump(cfg.pump_nm, resolve_pump_fwhm(*ctx, seq));
    const JointSpectrum js = compute_jsa(ctx->model, ctx->spec, seq, pump,
                                         default_grid(ctx->spec, pump, cfg.grid, cfg.grid_sigmas),
                                         ctx->jsa_options());
    if (cfg.filter_nm) {
      if (!(*cfg.filter_nm > 0.0)) throw InputError("--filter-nm must be positive");
      spectrum = filtered_schmidt(js, Arm::signal, cfg.signal_nm - *cfg.filter_nm / 2,
                                  cfg.signal_nm + *cfg.filter_nm / 2);
    } else {
      spectrum = schmidt(js);
    }
    source = "designed grating";
  }
  G2Options opts;
  opts.pulses = cfg.pulses;
  opts.mean_photons = cfg.mean_photons;
  opts.seed = cfg.seed;
  opts.transmission = cfg.transmission;
  opts.batches = cfg.batches;
  opts.threads = cfg.threads;
  const G2Estimate e = simulate_g2(spectrum, opts);
  const double expected = g2_from_purity(spectrum.purity);
  const double z = (e.g2_zero - expected) / e.standard_error;

  Table t;
  t.row("spectrum", source);
  t.row("purity", fmt::format("{:.4f}", spectrum.purity));
  t.row("expected g2(0) = 1 + P", fmt::format("{:.4f}", expected));
  t.row("g2(0) pair estimator", fmt::format("{:.4f} +- {:.4f}", e.g2_zero, e.standard_error));
  t.row("g2(0) click estimator",
        fmt::format("{:.4f} +- {:.4f}", e.g2_zero_clicks, e.clicks_standard_error));
  t.row("g2(inf)", fmt::format("{:.4f}", e.g2_infinity));
  t.row("purity estimate", fmt::format("{:.4f}", e.g2_zero / e.g2_infinity - 1.0));
  t.row("deviation", fmt::format("{:.2f} standard errors", z));
  t.row("pulses", fmt::format("{}", e.pulses));
  t.row("coincidences", fmt::format("{}", e.coincidences));
  ordered_json s;
  s["spectrum"] = source;
  s["purity"] = spectrum.purity;
  s["expected_g2_zero"] = expected;
  s["g2_zero"] = e.g2_zero;
  s["standard_error"] = e.standard_error;
  s["g2_zero_clicks"] = e.g2_zero_clicks;
  s["clicks_standard_error"] = e.clicks_standard_error;
  s["g2_infinity"] = e.g2_infinity;
  s["purity_estimate"] = e.g2_zero / e.g2_infinity - 1.0;
  s["deviation_standard_errors"] = z;
  s["pulses"] = e.pulses;
  s["coincidences"] = e.coincidences;
  if (ctx) {
    emit(*ctx, t, s, "g2.json", out);
  } else {
    s["config"] = config_json(cfg);
    write_json_file(cfg, "g2.json", s);
    if (cfg.quiet) return 0;
    if (cfg.json) out << s.dump(2) << '\n';
    else t.print(out);
  }
  return 0;
}

// --- option wiring -----------------------------------------------------------

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--dispersion", c.dispersion,
                  "Dispersion table file, or 'reference' for the built-in model")
      ->capture_default_str();
  sub->add_option("--pump-nm", c.pump_nm, "Pump centre wavelength [nm]")->capture_default_str();
  sub->add_option("--signal-nm", c.signal_nm, "Signal centre wavelength [nm]")
      ->capture_default_str();
  sub->add_option("--pump-mode", c.pump_mode, "Pump mode label")->capture_default_str();
  sub->add_option("--signal-mode", c.signal_mode, "Signal mode label")->capture_default_str();
  sub->add_option("--idler-mode", c.idler_mode, "Idler mode label")->capture_default_str();
  sub->add_option("--out", c.out_dir, "Output directory for CSV/JSON artifacts");
  sub->add_flag("--json", c.json, "Print the JSON summary instead of the table");
  sub->add_flag("-q,--quiet", c.quiet, "Print nothing on success");
}

void add_geometry(CLI::App* sub, RunConfig& c) {
  sub->add_option("--length-um", c.length_um, "Grating length L [um]")->capture_default_str();
  sub->add_option("--domain-um", c.domain_um, "Domain length Lc [um] (default: period / 2)");
  sub->add_option("--sigma", c.sigma, "Gaussian sigma in um, 'L/x' or 'L*x'")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_flag("--uniform", c.uniform, "Use a uniform (periodic) grating");
  sub->add_option("--frame", c.frame, "Sequence frame: demodulated or physical")
      ->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

void add_sequence_input(CLI::App* sub, RunConfig& c) {
  sub->add_option("--sequence", c.sequence, "Domain-sequence file (overrides synthesis)");
}

void add_spectrum(CLI::App* sub, RunConfig& c) {
  sub->add_option("--pump-fwhm-nm", c.pump_fwhm_nm, "Pump intensity FWHM [nm]")
      ->capture_default_str();
  sub->add_flag("--optimize-pump", c.optimize_pump, "Choose the purity-maximizing pump FWHM");
  sub->add_option("--grid", c.grid, "Grid points per axis")->capture_default_str();
  sub->add_option("--grid-sigmas", c.grid_sigmas,
                  "Grid half width in pump intensity standard deviations")
      ->capture_default_str();
  sub->add_flag("--linearized", c.linearized, "Use the first-order phase mismatch");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Design and analysis toolkit for apodized quasi-phase-matched photon-pair sources",
               "qpmtk"};
  app.require_subcommand(1);

  auto* gvm = app.add_subcommand("gvm", "Group indices, GVM ratio and PMF angle");
  add_common(gvm, c);

  auto* period = app.add_subcommand("period", "First-order QPM poling period");
  add_common(period, c);

  auto* design = app.add_subcommand("design", "Synthesize an apodized domain sequence");
  add_common(design, c);
  add_geometry(design, c);
  design->add_option("--points", c.points, "PMF samples")->capture_default_str();
  design->add_option("--dk-max", c.dk_max, "PMF half range [rad/um] (default 20 / sigma)");

  auto* pmf = app.add_subcommand("pmf", "Phase-matching function of a domain sequence");
  add_common(pmf, c);
  add_geometry(pmf, c);
  add_sequence_input(pmf, c);
  pmf->add_option("--points", c.points, "PMF samples")->capture_default_str();
  pmf->add_option("--dk-max", c.dk_max, "PMF half range [rad/um] (default 40 pi / L)");

  auto* jsa = app.add_subcommand("jsa", "Joint spectrum, Schmidt decomposition and purity");
  add_common(jsa, c);
  add_geometry(jsa, c);
  add_sequence_input(jsa, c);
  add_spectrum(jsa, c);
  jsa->add_option("--compare-grid", c.compare_grid,
                  "Grid size for the convergence check (default grid / 2)");

  auto* sweep = app.add_subcommand("sweep", "Purity and brightness versus sigma");
  add_common(sweep, c);
  add_geometry(sweep, c);
  add_spectrum(sweep, c);

  auto* sfg = app.add_subcommand("sfg-map", "Sum-frequency map of the PMF");
  add_common(sfg, c);
  add_geometry(sfg, c);
  add_sequence_input(sfg, c);
  sfg->add_option("--map-points", c.map_points, "Samples per axis")->capture_default_str();
  sfg->add_option("--span-nm", c.span_nm, "Wavelength span per axis [nm]")->capture_default_str();

  auto* spec = app.add_subcommand("spectrometer", "Simulated fiber-dispersion JSI measurement");
  add_common(spec, c);
  add_geometry(spec, c);
  add_sequence_input(spec, c);
  add_spectrum(spec, c);
  auto& sc = c.spectrometer;
  spec->add_option("--pairs", c.pairs, "Photon pairs to simulate")->capture_default_str();
  spec->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  spec->add_option("--recon-grid", c.recon_grid, "Reconstruction grid points per axis")
      ->capture_default_str();
  spec->add_option("--fiber-km", sc.fiber_length_km, "Fiber length [km]")->capture_default_str();
  spec->add_option("--dispersion-ps-nm-km", sc.dispersion_ps_per_nm_km,
                   "Fiber dispersion [ps/(nm km)]")
      ->capture_default_str();
  spec->add_option("--jitter-ps", sc.jitter_fwhm_ps, "Detector jitter FWHM [ps]")
      ->capture_default_str();
  spec->add_option("--bin-ps", sc.bin_width_ps, "Histogram bin width [ps]")->capture_default_str();
  spec->add_option("--signal-ref-nm", sc.signal_reference_nm, "Signal zero-delay wavelength [nm]")
      ->capture_default_str();
  spec->add_option("--idler-ref-nm", sc.idler_reference_nm, "Idler zero-delay wavelength [nm]")
      ->capture_default_str();
  spec->add_option("--signal-transmission", sc.signal_transmission, "Signal arm transmission")
      ->capture_default_str();
  spec->add_option("--idler-transmission", sc.idler_transmission, "Idler arm transmission")
      ->capture_default_str();

  auto* g2 = app.add_subcommand("g2", "Unheralded g2(0) and purity");
  add_common(g2, c);
  add_geometry(g2, c);
  add_spectrum(g2, c);
  g2->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  g2->add_option("--pulses", c.pulses, "Pump pulses")->capture_default_str();
  g2->add_option("--mean-photons", c.mean_photons, "Mean pair number per pulse")
      ->capture_default_str();
  g2->add_option("--batches", c.batches, "Jackknife batches")->capture_default_str();
  g2->add_option("--transmission", c.transmission, "Arm transmission before the beam splitter")
      ->capture_default_str();
  g2->add_option("--purity", c.purity, "Inject a thermal Schmidt spectrum with this purity");
  g2->add_option("--lambdas", c.lambdas, "Inject explicit Schmidt coefficients")->delimiter(',');
  g2->add_option("--g2-zero", c.g2_zero, "Measured g2(0): only convert to purity");
  g2->add_option("--g2-inf", c.g2_infinity, "Measured g2(inf)")->capture_default_str();
  g2->add_option("--filter-nm", c.filter_nm, "Rectangular signal band-pass width [nm]");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const auto* chosen = app.get_subcommands().front();
  c.subcommand = chosen->get_name();
  try {
    if (chosen == gvm) return cmd_gvm(c, out);
    if (chosen == period) return cmd_period(c, out);
    if (chosen == design) return cmd_design(c, out);
    if (chosen == pmf) return cmd_pmf(c, out);
    if (chosen == jsa) return cmd_jsa(c, out, err);
    if (chosen == sweep) return cmd_sweep(c, out);
    if (chosen == sfg) return cmd_sfg_map(c, out);
    if (chosen == spec) return cmd_spectrometer(c, out);
    return cmd_g2(c, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qpm::cli
