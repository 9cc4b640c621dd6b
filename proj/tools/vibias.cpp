// vibias: command-line front end for mean-field bias diagnostics.

#include "vibias/bias.hpp"
#include "vibias/config.hpp"
#include "vibias/error.hpp"
#include "vibias/expectation.hpp"
#include "vibias/lan.hpp"
#include "vibias/meanfield.hpp"
#include "vibias/serialize.hpp"
#include "vibias/suite.hpp"
#include "vibias/tangent.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace vibias;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;
constexpr int kSuiteFailure = 3;

struct Shared {
  std::string config;
  std::string out;
  std::optional<std::size_t> grid_points;
  std::optional<std::size_t> quad_points;
  std::optional<double> tol;
  std::uint64_t seed = kDefaultProbeSeed;
  std::optional<std::string> preset;
  std::optional<double> rho;
  std::optional<std::string> sigma;
  std::optional<std::string> functional;
  std::vector<long> n;
};

bool g_json_errors = false;

int report_error(std::string_view code, const std::string& message, int exit_code) {
  if (g_json_errors) {
    std::cerr << Json{{"code", std::string(code)}, {"message", message}}.dump() << '\n';
  } else {
    std::cerr << "vibias: " << code << ": " << message << '\n';
  }
  return exit_code;
}

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config, "TOML or JSON experiment file");
  cmd->add_option("--out", s.out, "output path");
  cmd->add_option("--grid-points", s.grid_points, "discretize Gaussian posteriors on N points per axis");
  cmd->add_option("--quad-points", s.quad_points, "Gaussian quadrature points per axis");
  cmd->add_option("--tol", s.tol, "coordinate-ascent tolerance");
  cmd->add_option("--seed", s.seed, "probe seed");
  cmd->add_option("--preset", s.preset, "gaussian2d | gaussian3 | grid-bimodal | lan-default");
  cmd->add_option("--rho", s.rho, "correlation for gaussian2d and lan-default");
  cmd->add_option("--sigma", s.sigma, "covariance file for gaussian3");
  cmd->add_option("--functional", s.functional, "functional JSON, inline or a path");
  cmd->add_option("--n", s.n, "sample sizes for lan-sweep")->delimiter(',');
}

Experiment experiment(const Shared& s) {
  const Json cfg = s.config.empty() ? Json::object() : load_config(s.config);
  Overrides o;
  o.preset = s.preset;
  o.rho = s.rho;
  o.sigma_file = s.sigma;
  o.functional = s.functional;
  if (!s.n.empty()) o.n_grid = s.n;
  o.tol = s.tol;
  o.grid_points = s.grid_points;
  return make_experiment(cfg, o);
}

QuadratureConfig quadrature(const Shared& s) {
  QuadratureConfig q;
  if (s.quad_points) q.points_per_axis = *s.quad_points;
  return q;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  f << text;
}

// Primary document goes to --out (or stdout); the summary goes to stdout when
// a file was written and to stderr otherwise.
std::ostream& summary_stream(const Shared& s) { return s.out.empty() ? std::cerr : std::cout; }

void emit_json(const Shared& s, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  if (s.out.empty()) {
    std::cout << text;
  } else {
    write_text(s.out, text);
  }
}

// CSV at --out, JSON beside it.
void emit_csv_and_json(const Shared& s, const std::string& csv, const Json& j) {
  if (s.out.empty()) {
    std::cout << csv;
    return;
  }
  fs::path csv_path(s.out);
  fs::path json_path(s.out);
  if (csv_path.extension() == ".json") {
    csv_path.replace_extension(".csv");
  } else {
    json_path.replace_extension(".json");
  }
  write_text(csv_path, csv);
  write_text(json_path, j.dump(2) + "\n");
}

const FunctionalSpec& need_functional(const Experiment& e) {
  if (!e.functional) throw Error(ErrorCode::InvalidArgument, "a functional is required (--functional or [functional])");
  return *e.functional;
}

int cmd_fit(const Shared& s) {
  const Experiment e = experiment(s);
  const MeanFieldFit fit = fit_meanfield(e.posterior, e.blocks, e.cavi);
  emit_json(s, to_json(fit));
  auto& os = summary_stream(s);
  os << "KL " << format_double(fit.kl_trace.back()) << '\n'
     << "stationarity_residual " << format_double(fit.stationarity_residual) << '\n'
     << "converged " << (fit.converged ? "true" : "false") << '\n';
  return fit.converged ? kOk : kNotConverged;
}

MeanFieldFit converged_fit(const Experiment& e) {
  MeanFieldFit fit = fit_meanfield(e.posterior, e.blocks, e.cavi);
  if (!fit.converged) throw Error(ErrorCode::NotConverged, "mean-field fit did not converge");
  return fit;
}

int cmd_bias(const Shared& s) {
  const Experiment e = experiment(s);
  const FunctionalSpec& h = need_functional(e);
  const MeanFieldFit fit = converged_fit(e);
  const BiasReport r = bias_report(h, e.posterior, fit, e.functional_id, quadrature(s));
  emit_csv_and_json(s, csv_line(bias_csv_header()) + csv_line(bias_csv_row(r)), to_json(r));
  summary_stream(s) << "identity_residual " << format_double(r.identity_residual) << '\n'
                    << "transfer_residual " << format_double(r.transfer_residual) << '\n';
  return kOk;
}

int cmd_anova(const Shared& s) {
  const Experiment e = experiment(s);
  const FunctionalSpec& h = need_functional(e);
  const MeanFieldFit fit = converged_fit(e);
  Measure q = fit.qstar;
  Json extra = nullptr;
  if (const auto* g = std::get_if<GaussianMeasure>(&fit.qstar); g && !h.is_polynomial()) {
    // No closed form off polynomials: decompose on the quadrature grid of q*.
    std::vector<std::vector<double>> breaks(g->dim());
    if (h.kind() == FunctionalKind::BoxTail) {
      for (std::size_t i : h.box_tail().active_coords()) breaks[i] = {*h.box_tail().lower[i]};
    }
    const GaussianMeasure* cover[] = {g};
    const QuadratureGrid grid = make_quadrature_grid(cover, breaks, quadrature(s));
    q = weighted_grid(*g, grid);
    extra = {{"points_per_axis", grid.info.points_per_axis}, {"step", grid.info.step}};
  }
  const AnovaDecomposition a = anova_decompose(h, q, e.blocks);
  Json j = to_json(a);
  j["functional_id"] = e.functional_id;
  j["quadrature"] = extra;
  emit_json(s, j);
  summary_stream(s) << "mean " << format_double(a.mean) << '\n';
  return kOk;
}

int cmd_orthogonality(const Shared& s, std::size_t probes) {
  const Experiment e = experiment(s);
  const MeanFieldFit fit = converged_fit(e);
  const OrthogonalityReport r =
      orthogonality_report(residual(fit, e.posterior), score_basis(fit), fit.qstar, probes, s.seed);
  Json j = to_json(r);
  j["stationarity_residual"] = fit.stationarity_residual;
  emit_json(s, j);
  summary_stream(s) << "orthogonality " << format_double(r.value()) << '\n';
  return kOk;
}

int cmd_lan_sweep(Shared s) {
  if (s.config.empty() && !s.preset) s.preset = "lan-default";
  const Experiment e = experiment(s);
  const auto* g = std::get_if<GaussianMeasure>(&e.posterior);
  if (!g) throw Error(ErrorCode::RepresentationMismatch, "lan-sweep needs a Gaussian posterior");
  if (e.n_grid.size() < 3) throw Error(ErrorCode::InvalidArgument, "lan-sweep needs at least 3 values of n");
  const FunctionalSpec& h = need_functional(e);
  const LanExperiment exp = LanExperiment::make(g->mean(), g->covariance(), e.n_grid, e.blocks);
  const LanSweepResult r = run_sweep(exp, h);
  Json j = to_json(r);
  j["functional_id"] = e.functional_id;
  j["marker"] = r.degenerate ? Json("DegenerateFit") : Json(nullptr);
  std::optional<TangentAudit> audit;
  try {
    audit = tangent_functional_audit(exp, h);
    j["audit"] = to_json(*audit);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NotBlockAdditive) throw;
    j["audit"] = nullptr;
  }
  std::string csv = csv_line(lan_csv_header());
  for (const auto& row : lan_csv_rows(r)) csv += csv_line(row);
  emit_csv_and_json(s, csv, j);
  auto& os = summary_stream(s);
  os << "slope " << (r.degenerate ? std::string("DegenerateFit") : format_double(r.slope)) << '\n'
     << "limit_n_bias " << format_double(r.limit_n_bias) << '\n';
  if (audit) os << "first_order_bias_vanishes=" << (audit->first_order_bias_vanishes ? "true" : "false") << '\n';
  return kOk;
}

int cmd_suite(const Shared& s, const std::string& fault) {
  SuiteOptions opts;
  opts.seed = s.seed;
  if (fault == "v-perturbation") {
    opts.inject_v_perturbation = true;
  } else if (!fault.empty()) {
    throw Error(ErrorCode::InvalidArgument, "unknown fault " + fault);
  }
  const fs::path dir = s.out.empty() ? fs::path("suite_out") : fs::path(s.out);
  const SuiteResult r = run_suite(dir, opts);
  for (const auto& c : r.criteria) {
    std::cout << "criterion " << c.id << ' ' << c.name << ": " << (c.pass ? "PASS" : "FAIL") << "  measured "
              << c.measured << "  threshold " << c.threshold << '\n';
    if (c.id == 8 || !c.pass) std::cout << "  " << c.detail << '\n';
  }
  std::cout << "summary written to " << (dir / "summary.csv").string() << '\n';
  return r.all_pass() ? kOk : kSuiteFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field variational bias diagnostics"};
  app.require_subcommand(1);
  app.add_flag("--json-errors", g_json_errors, "report errors as JSON on stderr");
  app.set_help_all_flag("--help-all");

  Shared s;
  std::size_t probes = 10;
  std::string fault;
  auto* fit = app.add_subcommand("fit", "fit the mean-field projection");
  auto* bias = app.add_subcommand("bias", "bias report for one functional");
  auto* anova = app.add_subcommand("anova", "ANOVA decomposition under q*");
  auto* orth = app.add_subcommand("orthogonality", "residual vs tangent-space check");
  auto* lan = app.add_subcommand("lan-sweep", "n-scaling of the bias under N(mu, Sigma/n)");
  auto* suite = app.add_subcommand("suite", "run the acceptance battery");
  for (auto* c : {fit, bias, anova, orth, lan, suite}) {
    add_shared(c, s);
    c->add_flag("--json-errors", g_json_errors, "report errors as JSON on stderr");
  }
  orth->add_option("--probes", probes, "number of random block-additive probes");
  suite->add_option("--inject-fault", fault, "test hook: v-perturbation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("ParseError", e.what(), kInputError);
  }

  try {
    if (fit->parsed()) return cmd_fit(s);
    if (bias->parsed()) return cmd_bias(s);
    if (anova->parsed()) return cmd_anova(s);
    if (orth->parsed()) return cmd_orthogonality(s, probes);
    if (lan->parsed()) return cmd_lan_sweep(s);
    if (suite->parsed()) return cmd_suite(s, fault);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), e.code() == ErrorCode::NotConverged ? kNotConverged : kInputError);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), kInputError);
  }
  return kInputError;
}
