#pragma once

// signfac command-line application. `run` is the whole program minus
// process plumbing so that it can be driven from tests.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "signfac/decompose.hpp"
#include "signfac/errors.hpp"
#include "signfac/io.hpp"
#include "signfac/linalg.hpp"
#include "signfac/matching.hpp"
#include "signfac/models.hpp"
#include "signfac/robust.hpp"
#include "signfac/schur.hpp"
#include "signfac/stats.hpp"

namespace signfac::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kReportVersion = "1.0";

enum ExitCode : int { exit_ok = 0, exit_usage = 2 };

struct GlobalOptions {
  std::optional<double> tol;
  std::uint64_t seed = 0;
  std::string format = "csv";
  std::string report;
  std::optional<int> max_iter;
  double rank_tol = Tolerances{}.rank_rel;
  double round_tol = Tolerances{}.entry_round;
  double residual_tol = Tolerances{}.residual_rel;
};

class Context {
 public:
  explicit Context(const GlobalOptions& g) : globals(g) {}

  const GlobalOptions& globals;
  std::string command;
  json files = json::object();
  json parameters = json::object();
  json outputs = json::object();
  json metrics = json::object();
  json result = json::object();

  MatrixFormat format() const { return parse_matrix_format(globals.format); }

  Tolerances tolerances() const {
    Tolerances t;
    t.rank_rel = globals.rank_tol;
    t.entry_round = globals.round_tol;
    t.residual_rel = globals.residual_tol;
    t.validate();
    return t;
  }

  SdpOptions sdp() {
    SdpOptions o;
    if (globals.tol) o.tol = *globals.tol;
    if (globals.max_iter) o.max_iter = *globals.max_iter;
    parameters["sdp_tol"] = o.tol;
    parameters["sdp_max_iter"] = o.max_iter;
    return o;
  }

  PcpOptions pcp(std::optional<double> lambda) {
    PcpOptions o;
    o.lambda = lambda;
    if (globals.tol) o.tol = *globals.tol;
    if (globals.max_iter) o.max_iter = *globals.max_iter;
    parameters["pcp_tol"] = o.tol;
    parameters["pcp_max_iter"] = o.max_iter;
    return o;
  }

  ReaperOptions reaper() {
    ReaperOptions o;
    if (globals.tol) o.tol = *globals.tol;
    if (globals.max_iter) o.max_iter = *globals.max_iter;
    parameters["reaper_tol"] = o.tol;
    parameters["reaper_max_iter"] = o.max_iter;
    return o;
  }

  Matrix read(const std::string& name, const std::string& path) {
    if (path.empty()) throw UsageError("missing --" + name);
    files[name] = path;
    return read_matrix(path, format());
  }

  void write(const std::string& name, const std::string& path, const Matrix& m) {
    if (path.empty()) return;
    write_matrix(m, path, format());
    outputs[name] = path;
  }

  void metric(const std::string& name, double value) {
    if (std::isfinite(value)) {
      metrics[name] = value;
    } else {
      result["nonfinite_metrics"].push_back(name);
    }
  }

  template <class T>
  void param(const std::string& name, const T& value) {
    parameters[name] = value;
  }
};

inline Matrix index_column(const std::vector<int>& idx) {
  Matrix out(static_cast<Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i), 0) = idx[i];
  return out;
}

inline Matrix label_column(Index total, const std::vector<int>& inliers) {
  Matrix out = Matrix::Zero(total, 1);
  for (int i : inliers) out(i, 0) = 1.0;
  return out;
}

inline void require_symmetric(const Matrix& a, const std::string& what) {
  if (a.rows() != a.cols()) throw PreconditionError(what + ": matrix must be square");
  if ((a - a.transpose()).norm() > 1e-12 * std::max(1.0, a.norm()))
    throw PreconditionError(what + ": matrix is not symmetric");
}

inline void tail_metrics(Context& ctx, const TailCheck& c) {
  ctx.metric("trials", static_cast<double>(c.trials));
  ctx.metric("events", static_cast<double>(c.events));
  ctx.metric("frequency", c.frequency);
  ctx.metric("bound", c.bound);
  ctx.metric("slack", c.slack);
  ctx.result["pass"] = c.pass ? json(*c.pass) : json(nullptr);
}

class App {
 public:
  App() : app_("signfac: sign and binary component decompositions", "signfac") {
    app_.option_defaults()->always_capture_default();
    app_.fallthrough();
    app_.require_subcommand(1);
    app_.set_version_flag("--version", "signfac 0.1.0");
    app_.add_option("--tol", g_.tol,
                    "solver tolerance of the iterative method a command runs "
                    "(defaults: SDP 1e-8, PCP 1e-7, REAPER 1e-9)");
    app_.add_option("--seed", g_.seed, "random seed");
    app_.add_option("--format", g_.format, "matrix file format")->check(CLI::IsMember({"csv", "matrixmarket"}));
    app_.add_option("--report", g_.report, "write the JSON report to this path instead of stdout");
    app_.add_option("--max-iter", g_.max_iter,
                    "iteration cap of the iterative method (defaults: SDP 100, PCP 2000, REAPER 500)")
        ->check(CLI::PositiveNumber);
    app_.add_option("--rank-tol", g_.rank_tol, "relative singular value cutoff for numerical rank");
    app_.add_option("--round-tol", g_.round_tol, "entry rounding tolerance for sign and binary recovery");
    app_.add_option("--residual-tol", g_.residual_tol, "relative Frobenius reconstruction tolerance");
    add_decomposition_commands();
    add_denoise_commands();
    add_gen_commands();
    add_stats_commands();
    add_verify_commands();
    add_match_command();
  }

  int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    std::reverse(args.begin(), args.end());
    try {
      app_.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app_.help();
      return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
      out << app_.help("", CLI::AppFormatMode::All);
      return exit_ok;
    } catch (const CLI::CallForVersion&) {
      out << app_.version() << "\n";
      return exit_ok;
    } catch (const CLI::ParseError& e) {
      err << "signfac: " << e.what() << "\n";
      Context ctx(g_);
      ctx.command = selected_name();
      emit(ctx, exit_usage, e.what(), 0.0, out, err);
      return exit_usage;
    }

    Context ctx(g_);
    ctx.command = selected_name();
    const auto handler = handlers_.find(ctx.command);
    if (handler == handlers_.end()) {
      err << "signfac: no command selected\n";
      emit(ctx, exit_usage, "no command selected", 0.0, out, err);
      return exit_usage;
    }
    ctx.param("seed", g_.seed);
    ctx.param("format", g_.format);
    ctx.param("tol", g_.tol ? json(*g_.tol) : json(nullptr));
    ctx.param("max_iter", g_.max_iter ? json(*g_.max_iter) : json(nullptr));
    ctx.param("rank_tol", g_.rank_tol);
    ctx.param("round_tol", g_.round_tol);
    ctx.param("residual_tol", g_.residual_tol);

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    int code = exit_ok;
    std::string message;
    try {
      handler->second(ctx);
    } catch (const Error& e) {
      code = static_cast<int>(e.kind());
      message = std::string(to_string(e.kind())) + ": " + e.what();
      if (const auto* hv = dynamic_cast<const HypothesisViolation*>(&e); hv && hv->residual >= 0.0)
        ctx.metric("violation_residual", hv->residual);
    } catch (const std::exception& e) {
      code = static_cast<int>(ErrorKind::precondition);
      message = std::string("precondition: ") + e.what();
    }
    if (code != exit_ok) err << "signfac " << ctx.command << ": " << message << "\n";
    return emit(ctx, code, message, elapsed(), out, err);
  }

 private:
  using Handler = std::function<void(Context&)>;

  CLI::App app_;
  GlobalOptions g_;
  std::map<std::string, Handler> handlers_;
  std::map<const CLI::App*, std::string> names_;

  CLI::App* command(CLI::App* parent, const std::string& name, const std::string& help, Handler h,
                    const std::string& full_name = "") {
    CLI::App* sub = parent->add_subcommand(name, help);
    const std::string key = full_name.empty() ? name : full_name;
    names_[sub] = key;
    handlers_[key] = std::move(h);
    return sub;
  }

  std::string selected_name() const {
    const CLI::App* cur = &app_;
    std::string name;
    while (true) {
      const auto subs = cur->get_subcommands();
      if (subs.empty()) break;
      cur = subs.front();
      const auto it = names_.find(cur);
      if (it != names_.end()) name = it->second;
    }
    return name;
  }

  int emit(Context& ctx, int code, const std::string& message, double seconds, std::ostream& out, std::ostream& err) {
    if (code == exit_ok) ctx.metric("wall_time_seconds", seconds);
    json report = json::object();
    report["report_version"] = kReportVersion;
    report["command"] = ctx.command;
    report["inputs"] = json{{"files", ctx.files}, {"parameters", ctx.parameters}};
    report["outputs"] = ctx.outputs;
    report["metrics"] = ctx.metrics;
    report["result"] = ctx.result;
    report["status"] = code == exit_ok ? "ok" : "error";
    report["message"] = message;
    report["exit_code"] = code;
    const std::string text = report.dump(2) + "\n";
    if (g_.report.empty()) {
      out << text;
      return code;
    }
    try {
      write_text_atomic(g_.report, text);
    } catch (const Error& e) {
      err << "signfac: cannot write report: " << e.what() << "\n";
      out << text;
      return code == exit_ok ? static_cast<int>(e.kind()) : code;
    }
    return code;
  }

  void add_decomposition_commands() {
    auto* check = command(&app_, "check-schur", "test Schur independence of a sign or binary matrix", [this](Context& ctx) {
      const Matrix m = ctx.read("input", str_["check.input"]);
      const std::string kind = str_["check.kind"];
      ctx.param("kind", kind);
      bool schur = false;
      int rank = 0;
      int needed = 0;
      if (kind == "sign") {
        const SignMatrix s(m);
        schur = is_schur_sign(s);
        rank = exact_rank(sign_schur_system(s));
        needed = static_cast<int>(1 + s.cols() * (s.cols() - 1) / 2);
      } else {
        const BinaryMatrix z(m);
        schur = is_schur_binary(z);
        rank = exact_rank(binary_schur_system(z));
        needed = static_cast<int>(1 + z.cols() + z.cols() * (z.cols() - 1) / 2);
        ctx.result["sign_correspondence"] = correspondence_holds(z);
      }
      ctx.result["schur_independent"] = schur;
      ctx.metric("rows", static_cast<double>(m.rows()));
      ctx.metric("cols", static_cast<double>(m.cols()));
      ctx.metric("schur_system_rank", rank);
      ctx.metric("schur_system_size", needed);
    });
    check->add_option("--input", str_["check.input"], "matrix file")->required();
    check->add_option("--kind", str_["check.kind"], "sign or binary")
        ->default_val("sign")
        ->check(CLI::IsMember({"sign", "binary"}));

    auto* sym = command(&app_, "sym-scd", "A = S diag(tau) S^t for a correlation matrix A", [this](Context& ctx) {
      const Matrix a = ctx.read("input", str_["sym.input"]);
      require_symmetric(a, "sym-scd");
      ctx.param("max_redraws", int_["sym.redraws"]);
      const SymScdResult r =
          sym_scd(SymmetricMatrix::from_dense(a), ctx.tolerances(), ctx.globals.seed, int_["sym.redraws"], ctx.sdp());
      ctx.write("s", str_["sym.out_s"], r.s.dense());
      ctx.write("tau", str_["sym.out_tau"], r.tau);
      ctx.metric("residual", r.residual);
      ctx.metric("rank", static_cast<double>(r.s.cols()));
      ctx.metric("redraws", r.redraws);
      ctx.metric("sdp_iterations", r.sdp_iterations);
    });
    sym->add_option("--input", str_["sym.input"], "symmetric correlation matrix")->required();
    sym->add_option("--out-s", str_["sym.out_s"], "output sign factor");
    sym->add_option("--out-tau", str_["sym.out_tau"], "output convex weights (r x 1)");
    sym->add_option("--max-redraws", int_["sym.redraws"], "Gaussian redraws per step")->default_val(5);

    auto* scd = command(&app_, "scd", "B = S W^t with S a Schur-independent sign matrix", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["scd.input"]);
      const SignDecomposition d = asym_scd(b, ctx.tolerances(), ctx.globals.seed, ctx.sdp());
      ctx.write("s", str_["scd.out_s"], d.s.dense());
      ctx.write("w", str_["scd.out_w"], d.w);
      ctx.metric("residual", d.residual);
      ctx.metric("rank", static_cast<double>(d.s.cols()));
      ctx.metric("sdp_iterations", d.sdp_iterations);
      ctx.metric("redraws", d.redraws);
      ctx.metric("face_inconsistency", d.face_inconsistency);
    });
    scd->add_option("--input", str_["scd.input"], "data matrix B")->required();
    scd->add_option("--out-s", str_["scd.out_s"], "output sign factor");
    scd->add_option("--out-w", str_["scd.out_w"], "output weights");

    auto* bin = command(&app_, "bcd", "C = Z W^t with Z a Schur-independent binary matrix", [this](Context& ctx) {
      const Matrix c = ctx.read("input", str_["bcd.input"]);
      const BinaryDecomposition d = bcd(c, ctx.tolerances(), ctx.globals.seed, ctx.sdp());
      ctx.write("z", str_["bcd.out_z"], d.z.dense());
      ctx.write("w", str_["bcd.out_w"], d.wplus);
      ctx.metric("residual", d.residual);
      ctx.metric("rank", static_cast<double>(d.z.cols()));
      ctx.metric("xi_residual", d.xi_residual);
      ctx.metric("sdp_iterations", d.sdp_iterations);
    });
    bin->add_option("--input", str_["bcd.input"], "data matrix C")->required();
    bin->add_option("--out-z", str_["bcd.out_z"], "output binary factor");
    bin->add_option("--out-w", str_["bcd.out_w"], "output weights");

    auto* planted = command(&app_, "planted-basis", "sign or binary basis of range(B)", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["planted.input"]);
      const std::string kind = str_["planted.kind"];
      ctx.param("kind", kind);
      const Matrix basis = kind == "sign" ? planted_sign_basis(b, ctx.tolerances(), ctx.globals.seed).dense()
                                          : planted_binary_basis(b, ctx.tolerances(), ctx.globals.seed).dense();
      ctx.write("basis", str_["planted.out"], basis);
      ctx.metric("rank", static_cast<double>(basis.cols()));
    });
    planted->add_option("--input", str_["planted.input"], "matrix whose range is searched")->required();
    planted->add_option("--kind", str_["planted.kind"], "sign or binary")
        ->default_val("sign")
        ->check(CLI::IsMember({"sign", "binary"}));
    planted->add_option("--out", str_["planted.out"], "output basis");
  }

  void add_denoise_commands() {
    auto* pcp = command(&app_, "denoise-pcp", "principal component pursuit B = L + Omega", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["pcp.input"]);
      const PcpResult r = pcp_denoise(b, ctx.pcp(opt_lambda()));
      if (!r.converged)
        throw NonConvergenceError("PCP did not converge in " + std::to_string(r.iterations) + " iterations");
      ctx.param("lambda", r.lambda);
      ctx.write("l", str_["pcp.out_l"], r.l);
      ctx.write("omega", str_["pcp.out_omega"], r.omega);
      ctx.metric("objective", r.objective);
      ctx.metric("iterations", r.iterations);
      ctx.metric("split_residual", r.split_residual);
      ctx.metric("rank_l", numerical_rank(r.l, ctx.tolerances()));
      ctx.metric("nonzeros_omega", static_cast<double>((r.omega.array() != 0.0).count()));
    });
    pcp->add_option("--input", str_["pcp.input"], "data matrix")->required();
    pcp->add_option("--out-l", str_["pcp.out_l"], "output low-rank part");
    pcp->add_option("--out-omega", str_["pcp.out_omega"], "output sparse part");
    pcp->add_option("--lambda", dbl_["lambda"], "l1 weight (default 1/sqrt(max(n, m)))");

    auto* rp = command(&app_, "denoise-reaper", "REAPER projector onto the inlier subspace", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["reaper.input"]);
      const int r = int_["reaper.rank"];
      ctx.param("rank", r);
      ctx.param("inlier_tol", dbl_["reaper.inlier_tol"]);
      const ReaperResult res = reaper(b, r, ctx.reaper());
      if (!res.converged)
        throw NonConvergenceError("REAPER did not converge in " + std::to_string(res.iterations) + " iterations");
      const std::vector<int> inl = select_inliers(b, res.p, dbl_["reaper.inlier_tol"]);
      ctx.write("p", str_["reaper.out_p"], res.p);
      ctx.write("labels", str_["reaper.out_labels"], label_column(b.cols(), inl));
      ctx.metric("objective", res.objective);
      ctx.metric("iterations", res.iterations);
      ctx.metric("trace_residual", res.trace_residual);
      ctx.metric("min_eig_p", res.min_eig_p);
      ctx.metric("min_eig_complement", res.min_eig_complement);
      ctx.metric("inliers", static_cast<double>(inl.size()));
    });
    rp->add_option("--input", str_["reaper.input"], "data matrix")->required();
    rp->add_option("--rank", int_["reaper.rank"], "subspace dimension r")->required();
    rp->add_option("--out-p", str_["reaper.out_p"], "output projector");
    rp->add_option("--out-labels", str_["reaper.out_labels"], "output inlier indicator column");
    rp->add_option("--inlier-tol", dbl_["reaper.inlier_tol"], "relative residual for inlier selection")
        ->default_val(1e-6);

    auto* ps = command(&app_, "pipeline-sparse", "PCP followed by sign component decomposition", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["ps.input"]);
      SparsePipelineOptions o;
      o.pcp = ctx.pcp(opt_lambda());
      o.tol = ctx.tolerances();
      o.seed = ctx.globals.seed;
      const SparsePipelineResult r = denoise_factorize_sparse(b, o);
      ctx.write("s", str_["ps.out_s"], r.decomposition.s.dense());
      ctx.write("w", str_["ps.out_w"], r.decomposition.w);
      ctx.write("l", str_["ps.out_l"], r.pcp.l);
      ctx.write("omega", str_["ps.out_omega"], r.pcp.omega);
      ctx.metric("pcp_iterations", r.pcp.iterations);
      ctx.metric("pcp_objective", r.pcp.objective);
      ctx.metric("residual", r.decomposition.residual);
      ctx.metric("rank", static_cast<double>(r.decomposition.s.cols()));
      ctx.metric("sdp_iterations", r.decomposition.sdp_iterations);
    });
    ps->add_option("--input", str_["ps.input"], "data matrix")->required();
    ps->add_option("--out-s", str_["ps.out_s"], "output sign factor");
    ps->add_option("--out-w", str_["ps.out_w"], "output weights");
    ps->add_option("--out-l", str_["ps.out_l"], "output low-rank part");
    ps->add_option("--out-omega", str_["ps.out_omega"], "output sparse part");
    ps->add_option("--lambda", dbl_["lambda"], "l1 weight (default 1/sqrt(max(n, m)))");

    auto* po = command(&app_, "pipeline-outliers", "REAPER followed by sign component decomposition", [this](Context& ctx) {
      const Matrix b = ctx.read("input", str_["po.input"]);
      OutlierPipelineOptions o;
      o.reaper = ctx.reaper();
      o.inlier_tol = dbl_["po.inlier_tol"];
      o.tol = ctx.tolerances();
      o.seed = ctx.globals.seed;
      const int r = int_["po.rank"];
      ctx.param("rank", r);
      ctx.param("inlier_tol", o.inlier_tol);
      const OutlierPipelineResult res = denoise_factorize_outliers(b, r, o);
      ctx.write("s", str_["po.out_s"], res.decomposition.s.dense());
      ctx.write("w", str_["po.out_w"], res.decomposition.w);
      ctx.write("labels", str_["po.out_labels"], label_column(b.cols(), res.inliers));
      ctx.metric("reaper_iterations", res.reaper.iterations);
      ctx.metric("reaper_objective", res.reaper.objective);
      ctx.metric("inliers", static_cast<double>(res.inliers.size()));
      ctx.metric("residual", res.decomposition.residual);
      ctx.metric("sdp_iterations", res.decomposition.sdp_iterations);
    });
    po->add_option("--input", str_["po.input"], "data matrix")->required();
    po->add_option("--rank", int_["po.rank"], "inlier rank r")->required();
    po->add_option("--out-s", str_["po.out_s"], "output sign factor");
    po->add_option("--out-w", str_["po.out_w"], "output weights of the inlier columns");
    po->add_option("--out-labels", str_["po.out_labels"], "output inlier indicator column");
    po->add_option("--inlier-tol", dbl_["po.inlier_tol"], "relative residual for inlier selection")->default_val(1e-6);
  }

  SignMatrix sign_factor(Context& ctx, int n, int r, double min_permeance) {
    ctx.param("n", n);
    ctx.param("r", r);
    if (min_permeance <= 0.0) return random_schur_sign(n, r, splitmix64(ctx.globals.seed ^ 0x5ULL));
    ctx.param("min_permeance", min_permeance);
    for (std::uint64_t k = 0; k < 1000; ++k) {
      SignMatrix s = random_schur_sign(n, r, splitmix64(ctx.globals.seed ^ 0x5ULL) + k);
      if (permeance(s) >= min_permeance) return s;
    }
    throw HypothesisViolation("no sign matrix with permeance >= " + std::to_string(min_permeance) +
                              " found in 1000 draws");
  }

  void add_gen_commands() {
    auto* gen = app_.add_subcommand("gen", "generate synthetic instances");
    gen->require_subcommand(1);

    auto* glm = command(gen, "glm", "Gaussian loadings model L0 = S G^t / sqrt(r)", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["gen.n"], int_["gen.r"], dbl_["gen.min_perm"]);
      ctx.param("m", int_["gen.m"]);
      const GlmInstance inst = sample_glm(s, int_["gen.m"], ctx.globals.seed);
      ctx.write("b", str_["gen.out"], inst.l0);
      ctx.write("truth", str_["gen.out_truth"], s.dense());
      ctx.write("g", str_["gen.out_g"], inst.g);
      ctx.metric("permeance", permeance(s));
    }, "gen glm");
    dims(glm, true);
    glm->add_option("--out-g", str_["gen.out_g"], "output Gaussian factor G");

    auto* sparse = command(gen, "sparse-noise", "B = L0 + Omega0 with sparse gross errors", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["gen.n"], int_["gen.r"], dbl_["gen.min_perm"]);
      ctx.param("m", int_["gen.m"]);
      ctx.param("omega", int_["gen.omega"]);
      ctx.param("magnitude", dbl_["gen.magnitude"]);
      const CorruptionInstance inst =
          sample_sparse_instance(s, int_["gen.m"], int_["gen.omega"], dbl_["gen.magnitude"], ctx.globals.seed);
      ctx.write("b", str_["gen.out"], inst.b);
      ctx.write("truth", str_["gen.out_truth"], s.dense());
      ctx.write("l0", str_["gen.out_l0"], inst.l0);
      ctx.write("omega0", str_["gen.out_omega"], inst.omega0);
      ctx.metric("permeance", permeance(s));
    }, "gen sparse-noise");
    dims(sparse, true);
    sparse->add_option("--omega", int_["gen.omega"], "number of corrupted entries")->required();
    sparse->add_option("--magnitude", dbl_["gen.magnitude"], "corruption magnitude")->default_val(5.0);
    sparse->add_option("--out-l0", str_["gen.out_l0"], "output clean matrix");
    sparse->add_option("--out-omega", str_["gen.out_omega"], "output corruption");

    auto* outl = command(gen, "outlier-mix", "B = [L0 Omega0] Pi with Gaussian outlier columns", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["gen.n"], int_["gen.r"], dbl_["gen.min_perm"]);
      ctx.param("m", int_["gen.m"]);
      ctx.param("m_prime", int_["gen.m_prime"]);
      const CorruptionInstance inst = sample_inlier_outlier(s, int_["gen.m"], int_["gen.m_prime"], ctx.globals.seed);
      ctx.write("b", str_["gen.out"], inst.b);
      ctx.write("truth", str_["gen.out_truth"], s.dense());
      ctx.write("l0", str_["gen.out_l0"], inst.l0);
      ctx.write("labels", str_["gen.out_labels"], label_column(inst.b.cols(), inst.inliers));
      ctx.metric("permeance", permeance(s));
    }, "gen outlier-mix");
    dims(outl, true);
    outl->add_option("--m-prime", int_["gen.m_prime"], "number of outlier columns")->required();
    outl->add_option("--out-l0", str_["gen.out_l0"], "output inlier matrix before mixing");
    outl->add_option("--out-labels", str_["gen.out_labels"], "output inlier indicator column");

    auto* ss = command(gen, "schur-sign", "random Schur-independent sign matrix", [this](Context& ctx) {
      ctx.param("n", int_["gen.n"]);
      ctx.param("r", int_["gen.r"]);
      const SignMatrix s = random_schur_sign(int_["gen.n"], int_["gen.r"], ctx.globals.seed);
      ctx.write("s", str_["gen.out"], s.dense());
      ctx.metric("permeance", permeance(s));
    }, "gen schur-sign");
    dims(ss, false);

    auto* sb = command(gen, "schur-binary", "random Schur-independent binary matrix", [this](Context& ctx) {
      ctx.param("n", int_["gen.n"]);
      ctx.param("r", int_["gen.r"]);
      const BinaryMatrix z = random_schur_binary(int_["gen.n"], int_["gen.r"], ctx.globals.seed);
      ctx.write("z", str_["gen.out"], z.dense());
    }, "gen schur-binary");
    dims(sb, false);
  }

  void dims(CLI::App* sub, bool with_m) {
    sub->add_option("--n", int_["gen.n"], "rows")->required();
    sub->add_option("--r", int_["gen.r"], "number of components")->required();
    if (with_m) {
      sub->add_option("--m", int_["gen.m"], "inlier columns")->required();
      sub->add_option("--min-permeance", dbl_["gen.min_perm"], "redraw the sign factor until its permeance is this large")
          ->default_val(0.0);
      sub->add_option("--out-truth", str_["gen.out_truth"], "output ground-truth sign factor");
    }
    sub->add_option("--out", str_["gen.out"], "output matrix")->required();
  }

  void add_stats_commands() {
    auto* stats = app_.add_subcommand("stats", "summary statistics");
    stats->require_subcommand(1);

    auto* perm = command(stats, "permeance", "lambda_min(S^t S) / n", [this](Context& ctx) {
      const SignMatrix s(ctx.read("input", str_["stats.input"]));
      ctx.metric("permeance", permeance(s));
    }, "stats permeance");
    perm->add_option("--input", str_["stats.input"], "sign matrix")->required();

    auto* inc = command(stats, "incoherence", "incoherence parameters of a matrix", [this](Context& ctx) {
      const IncoherenceReport r = incoherence(ctx.read("input", str_["stats.input"]), ctx.tolerances());
      ctx.metric("mu_left", r.mu_left);
      ctx.metric("mu_right", r.mu_right);
      ctx.metric("mu_tilde", r.mu_tilde);
      ctx.metric("mu", r.mu);
      ctx.metric("rank", r.rank);
    }, "stats incoherence");
    inc->add_option("--input", str_["stats.input"], "matrix")->required();

    auto* ps = command(stats, "permeance-stat", "permeance statistic of a clean data matrix", [this](Context& ctx) {
      PermeanceStatisticOptions o;
      o.restarts = int_["stats.restarts"];
      o.seed = ctx.globals.seed;
      ctx.param("restarts", o.restarts);
      const PermeanceBracket b = permeance_statistic(ctx.read("input", str_["stats.input"]), ctx.tolerances(), o);
      ctx.metric("lower", b.lower);
      ctx.metric("upper", b.upper);
      ctx.result["exact"] = b.exact;
    }, "stats permeance-stat");
    ps->add_option("--input", str_["stats.input"], "clean data matrix L0")->required();
    ps->add_option("--restarts", int_["stats.restarts"], "subgradient restarts when enumeration is too large")
        ->default_val(20);

    auto* sph = command(stats, "spherical-stat", "spherical linear-structure statistic", [this](Context& ctx) {
      const Matrix omega = ctx.read("input", str_["stats.input"]);
      Matrix p_perp;
      if (!str_["stats.projector"].empty()) {
        p_perp = ctx.read("projector", str_["stats.projector"]);
        require_symmetric(p_perp, "spherical-stat");
      } else if (!str_["stats.subspace"].empty()) {
        const Matrix l = ctx.read("subspace", str_["stats.subspace"]);
        p_perp = Matrix::Identity(l.rows(), l.rows()) - range_projector(l, ctx.tolerances());
      } else {
        throw UsageError("spherical-stat needs --projector or --subspace");
      }
      ctx.metric("spherical_stat", spherical_stat(SymmetricMatrix::from_dense(p_perp), omega));
    }, "stats spherical-stat");
    sph->add_option("--input", str_["stats.input"], "outlier matrix Omega0")->required();
    sph->add_option("--projector", str_["stats.projector"], "orthogonal projector onto the complement");
    sph->add_option("--subspace", str_["stats.subspace"], "matrix whose range is the inlier subspace");
  }

  void add_verify_commands() {
    auto* verify = app_.add_subcommand("verify", "Monte-Carlo checks of probabilistic bounds");
    verify->require_subcommand(1);

    auto trials = [this](CLI::App* sub, long long dflt) {
      sub->add_option("--trials", ll_[sub->get_name() + ".trials"], "Monte-Carlo trials")->default_val(dflt);
    };

    auto* tail = command(verify, "tail-bound", "Pr[sum <u_i, v>^2 >= 4rt/m] <= 2 e^-t", [this](Context& ctx) {
      ctx.param("r", int_["tail-bound.r"]);
      ctx.param("m", int_["tail-bound.m"]);
      ctx.param("t", dbl_["tail-bound.t"]);
      ctx.param("trials", ll_["tail-bound.trials"]);
      tail_metrics(ctx, verify_tail_bound(int_["tail-bound.r"], int_["tail-bound.m"], dbl_["tail-bound.t"], ll_["tail-bound.trials"],
                                          ctx.globals.seed));
    }, "verify tail-bound");
    tail->add_option("--r", int_["tail-bound.r"], "number of unit vectors")->required();
    tail->add_option("--m", int_["tail-bound.m"], "ambient dimension")->required();
    tail->add_option("--t", dbl_["tail-bound.t"], "deviation parameter")->default_val(3.0);
    trials(tail, 100000);

    auto* coh = command(verify, "coherence", "incoherence bounds for Gaussian loadings", [this](Context& ctx) {
      SignMatrix s;
      if (!str_["coherence.input"].empty()) {
        s = SignMatrix(ctx.read("input", str_["coherence.input"]));
      } else {
        s = sign_factor(ctx, int_["coherence.n"], int_["coherence.r"], 0.0);
      }
      ctx.param("m", int_["coherence.m"]);
      ctx.param("alpha", dbl_["coherence.alpha"]);
      ctx.param("trials", ll_["coherence.trials"]);
      const CoherenceReport r =
          verify_coherence_bounds(s, int_["coherence.m"], dbl_["coherence.alpha"], ll_["coherence.trials"], ctx.globals.seed);
      ctx.metric("permeance", r.nu);
      ctx.metric("mu_left_violations", static_cast<double>(r.mu_left_violations));
      ctx.metric("max_mu_left", r.max_mu_left);
      ctx.metric("mu_right_frequency", r.mu_right.frequency);
      ctx.metric("mu_right_bound", r.mu_right.bound);
      ctx.metric("mu_tilde_frequency", r.mu_tilde.frequency);
      ctx.metric("mu_tilde_bound", r.mu_tilde.bound);
      if (r.single_draw) {
        ctx.metric("mu_left", r.single_draw->mu_left);
        ctx.metric("mu_right", r.single_draw->mu_right);
        ctx.metric("mu_tilde", r.single_draw->mu_tilde);
      }
      ctx.result["mu_left_pass"] = r.mu_left_violations == 0;
      if (r.mu_right.pass && r.mu_tilde.pass) {
        ctx.result["pass"] = r.mu_left_violations == 0 && *r.mu_right.pass && *r.mu_tilde.pass;
      } else {
        ctx.result["pass"] = nullptr;
      }
    }, "verify coherence");
    coh->add_option("--input", str_["coherence.input"], "sign matrix (otherwise drawn from --n, --r)");
    coh->add_option("--n", int_["coherence.n"], "rows of a drawn sign matrix")->default_val(20);
    coh->add_option("--r", int_["coherence.r"], "columns of a drawn sign matrix")->default_val(3);
    coh->add_option("--m", int_["coherence.m"], "columns of L0")->default_val(30);
    coh->add_option("--alpha", dbl_["coherence.alpha"], "tail exponent")->default_val(1.0);
    trials(coh, 10000);

    auto* gauss = command(verify, "gaussian-norm", "Pr[||Omega|| > sqrt n + sqrt m' + t] <= e^-t^2", [this](Context& ctx) {
      ctx.param("n", int_["gaussian-norm.n"]);
      ctx.param("m_prime", int_["gaussian-norm.m_prime"]);
      ctx.param("t", dbl_["gaussian-norm.t"]);
      ctx.param("trials", ll_["gaussian-norm.trials"]);
      tail_metrics(ctx, verify_gaussian_norm(int_["gaussian-norm.n"], int_["gaussian-norm.m_prime"], dbl_["gaussian-norm.t"],
                                             ll_["gaussian-norm.trials"], ctx.globals.seed));
    }, "verify gaussian-norm");
    gauss->add_option("--n", int_["gaussian-norm.n"], "rows")->default_val(30);
    gauss->add_option("--m-prime", int_["gaussian-norm.m_prime"], "columns")->default_val(30);
    gauss->add_option("--t", dbl_["gaussian-norm.t"], "deviation parameter")->default_val(2.0);
    trials(gauss, 10000);

    auto* width = command(verify, "empirical-width", "empirical width of Gaussian loadings <= sqrt n", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["empirical-width.n"], int_["empirical-width.r"], 0.0);
      ctx.param("m", int_["empirical-width.m"]);
      ctx.param("trials", ll_["empirical-width.trials"]);
      const WidthCheck w = verify_empirical_width(s, int_["empirical-width.m"], ll_["empirical-width.trials"], ctx.globals.seed);
      ctx.metric("mean", w.mean);
      ctx.metric("stddev", w.stddev);
      ctx.metric("bound", w.bound);
      ctx.metric("slack", w.slack);
      ctx.result["pass"] = w.pass ? json(*w.pass) : json(nullptr);
    }, "verify empirical-width");
    width->add_option("--n", int_["empirical-width.n"], "rows")->default_val(20);
    width->add_option("--r", int_["empirical-width.r"], "components")->default_val(3);
    width->add_option("--m", int_["empirical-width.m"], "columns")->default_val(30);
    trials(width, 10000);

    auto* marg = command(verify, "marginal-tail", "Pr[|<u, S g>| >= (2/3) sqrt(nu n)] >= 1/2", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["marginal-tail.n"], int_["marginal-tail.r"], 0.0);
      ctx.param("directions", int_["marginal-tail.directions"]);
      ctx.param("trials", ll_["marginal-tail.trials"]);
      const MarginalTailCheck c =
          verify_marginal_tail(s, int_["marginal-tail.directions"], ll_["marginal-tail.trials"], ctx.globals.seed);
      ctx.metric("threshold", c.threshold);
      ctx.metric("min_frequency", c.min_frequency);
      ctx.metric("bound", c.bound);
      ctx.metric("slack", c.slack);
      ctx.result["pass"] = c.pass ? json(*c.pass) : json(nullptr);
    }, "verify marginal-tail");
    marg->add_option("--n", int_["marginal-tail.n"], "rows")->default_val(20);
    marg->add_option("--r", int_["marginal-tail.r"], "components")->default_val(3);
    marg->add_option("--directions", int_["marginal-tail.directions"], "random unit directions")->default_val(100);
    trials(marg, 10000);

    auto* sph = command(verify, "spherical-bound", "spherical statistic of Gaussian outliers", [this](Context& ctx) {
      ctx.param("n", int_["spherical-bound.n"]);
      ctx.param("r", int_["spherical-bound.r"]);
      ctx.param("m_prime", int_["spherical-bound.m_prime"]);
      ctx.param("t", dbl_["spherical-bound.t"]);
      ctx.param("trials", ll_["spherical-bound.trials"]);
      tail_metrics(ctx, verify_spherical_bound(int_["spherical-bound.n"], int_["spherical-bound.r"], int_["spherical-bound.m_prime"],
                                               dbl_["spherical-bound.t"], ll_["spherical-bound.trials"], ctx.globals.seed));
    }, "verify spherical-bound");
    sph->add_option("--n", int_["spherical-bound.n"], "rows")->default_val(30);
    sph->add_option("--r", int_["spherical-bound.r"], "inlier dimension")->default_val(3);
    sph->add_option("--m-prime", int_["spherical-bound.m_prime"], "outlier columns")->default_val(30);
    sph->add_option("--t", dbl_["spherical-bound.t"], "deviation parameter")->default_val(2.0);
    trials(sph, 5000);

    auto* pb = command(verify, "permeance-bound", "lower bound on the permeance statistic", [this](Context& ctx) {
      const SignMatrix s = sign_factor(ctx, int_["permeance-bound.n"], int_["permeance-bound.r"], 0.0);
      ctx.param("m", int_["permeance-bound.m"]);
      ctx.param("t", dbl_["permeance-bound.t"]);
      ctx.param("trials", ll_["permeance-bound.trials"]);
      const PermeanceBoundCheck c =
          verify_permeance_bound(s, int_["permeance-bound.m"], dbl_["permeance-bound.t"], ll_["permeance-bound.trials"], ctx.globals.seed);
      tail_metrics(ctx, c.check);
      ctx.metric("rhs", c.rhs);
      ctx.metric("min_lower", c.min_lower);
      ctx.result["trivial"] = c.trivial;
    }, "verify permeance-bound");
    pb->add_option("--n", int_["permeance-bound.n"], "rows")->default_val(20);
    pb->add_option("--r", int_["permeance-bound.r"], "components")->default_val(3);
    pb->add_option("--m", int_["permeance-bound.m"], "columns")->default_val(200);
    pb->add_option("--t", dbl_["permeance-bound.t"], "deviation parameter")->default_val(2.0);
    trials(pb, 100);
  }

  void add_match_command() {
    auto* match = command(&app_, "match", "equivalence under signed or plain column permutations", [this](Context& ctx) {
      const Matrix a = ctx.read("a", str_["match.a"]);
      const Matrix b = ctx.read("b", str_["match.b"]);
      const std::string kind = str_["match.kind"];
      ctx.param("kind", kind);
      if (kind == "signed") {
        const auto m = match_signed_permutation(SignMatrix(a), SignMatrix(b));
        ctx.result["match"] = m.has_value();
        if (m) {
          ctx.result["perm"] = m->perm;
          ctx.result["signs"] = m->signs;
        }
      } else {
        const auto m = match_permutation(BinaryMatrix(a), BinaryMatrix(b));
        ctx.result["match"] = m.has_value();
        if (m) ctx.result["perm"] = m->perm;
      }
    });
    match->add_option("--a", str_["match.a"], "first factor")->required();
    match->add_option("--b", str_["match.b"], "second factor")->required();
    match->add_option("--kind", str_["match.kind"], "signed (sign matrices) or plain (binary matrices)")
        ->default_val("signed")
        ->check(CLI::IsMember({"signed", "plain"}));
  }

  std::optional<double> opt_lambda() {
    if (dbl_.count("lambda") && lambda_given()) return dbl_["lambda"];
    return std::nullopt;
  }

  bool lambda_given() const {
    for (const auto* sub : app_.get_subcommands())
      if (const auto* opt = sub->get_option_no_throw("--lambda"); opt && opt->count() > 0) return true;
    return false;
  }

  // Option storage. std::map keeps references stable across insertions.
  std::map<std::string, std::string> str_;
  std::map<std::string, int> int_;
  std::map<std::string, long long> ll_;
  std::map<std::string, double> dbl_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  App app;
  return app.run(args, out, err);
}

}  // namespace signfac::cli
