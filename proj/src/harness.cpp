#include "polarforge/harness.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/io.hpp"
#include "polarforge/select.hpp"
#include "polarforge/simulate.hpp"
#include "polarforge/tradeoff.hpp"

namespace polarforge {

namespace fs = std::filesystem;

namespace {

using Meta = std::vector<std::pair<std::string, std::string>>;

// Raised for post-run invariant violations; maps to exit code 2.
struct Flagged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 1;
    std::size_t budget_nodes = kDefaultNodeBudget;
    std::uint64_t budget_trials = 20'000'000'000ull;
    std::string out_dir;
};

fs::path out_path(const Globals& g, const std::string& p) {
    fs::path path(p);
    if (!g.out_dir.empty() && path.is_relative()) path = fs::path(g.out_dir) / path;
    return path;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

std::string join_uints(const std::vector<unsigned>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
    return s;
}

std::string real(double x) {
    std::ostringstream s;
    s << std::setprecision(10) << x;
    return s.str();
}

Meta base_meta(const std::string& command, const Globals& g) {
    return {{"tool", kToolVersion}, {"command", command}, {"seed", std::to_string(g.seed)}};
}

std::vector<std::string> meta_lines(const Meta& m) {
    std::vector<std::string> out;
    for (const auto& [k, v] : m) out.push_back(k + ": " + v);
    return out;
}

}  // namespace

std::string kernel_analysis_header() { return "name,q,ell,distances,beta_star,op_norm,dice_support,powerful,bounded"; }

std::string kernel_analysis_row(const Kernel& k) {
    std::ostringstream s;
    s << std::setprecision(10);
    s << k.name() << ',' << k.field()->q() << ',' << k.ell() << ',' << join_uints(k.distances(), " ") << ','
      << beta_star(k.dice(), k.ell()) << ',' << k.op_norm() << ',';
    for (std::size_t i = 0; i < k.dice().support.size(); ++i) {
        const auto& a = k.dice().support[i];
        s << (i ? " " : "") << a.y << ':' << a.p;
    }
    s << ',' << (is_powerful(k.dice()) ? 1 : 0) << ',' << (std::isfinite(k.op_norm()) ? 1 : 0);
    return s.str();
}

std::vector<FigureSet> figure_sets() {
    const auto grid_points = 101;
    std::vector<FigureSet> sets;
    const KernelPtr arikan = arikan_kernel();
    const auto grid = beta_grid(beta_star(arikan->dice(), 2), grid_points);
    for (const char* name : {"arikan-bec", "arikan-bdmc"}) {
        const Preset& p = find_preset(name);
        FigureSet f;
        f.stem = p.name;
        f.regions.push_back(region_boundary(arikan->dice(), 2, p.mu_star, grid, p.name));
        // reference curve of the earlier analysis, which reaches (0, 1/(mu*+1))
        f.regions.push_back(region_boundary(arikan->dice(), 2, p.mu_star + 1.0, grid, p.name + "-reference"));
        f.meta = {{"tool", kToolVersion}, {"preset", p.name}, {"mu_star", real(p.mu_star)}, {"citation", p.citation},
                  {"reference_mu_star", real(p.mu_star + 1.0)}};
        sets.push_back(std::move(f));
    }
    FigureSet rs;
    rs.stem = "rs-family";
    const Preset& bec = find_preset("arikan-bec");
    for (unsigned k = 1; k <= 4; ++k) {
        const std::uint64_t ell = std::uint64_t{1} << k;
        const CramerFn c = CramerFn::uniform_log(ell);
        const double log_ell = k * std::log(2.0);
        rs.regions.push_back(region_boundary(c, log_ell, bec.mu_star, beta_grid(c.mean() / log_ell, grid_points),
                                             "rs" + std::to_string(ell)));
    }
    rs.meta = {{"tool", kToolVersion}, {"mu_star_rat", real(bec.mu_star)}, {"citation", bec.citation},
               {"dice", "uniform on log 1 .. log 2^k"}};
    sets.push_back(std::move(rs));
    return sets;
}

std::vector<fs::path> reproduce_figures(const fs::path& dir) {
    std::vector<fs::path> written;
    for (const auto& f : figure_sets()) {
        const fs::path csv = dir / (f.stem + ".csv"), svg = dir / (f.stem + ".svg");
        {
            auto o = open_out(csv);
            curve_emit_csv(o, f.regions, meta_lines(f.meta));
        }
        {
            auto o = open_out(svg);
            curve_emit_svg(o, f.regions, f.stem);
        }
        written.push_back(csv);
        written.push_back(svg);
    }
    return written;
}

namespace {

int cmd_kernel_analyze(const std::string& file, std::ostream& out) {
    const KernelPtr k = resolve_kernel(file);
    out << kernel_analysis_header() << '\n' << kernel_analysis_row(*k) << '\n';
    return kExitOk;
}

int cmd_kernel_write(const std::string& name, const std::string& path, const Globals& g, std::ostream& out) {
    const KernelPtr k = builtin_kernel(name);
    if (!k) throw ValidationError("unknown builtin kernel '" + name + "'");
    if (path.empty()) {
        write_kernel_text(out, *k);
    } else {
        auto o = open_out(out_path(g, path));
        write_kernel_text(o, *k);
    }
    return kExitOk;
}

int cmd_construct(const std::string& recipe, const std::string& out_file, const Globals& g, std::ostream& out) {
    const Recipe r = load_recipe_file(recipe);
    const BuiltTree b = build_recipe(r, g.budget_nodes);
    const ChannelTree& t = b.get();
    Meta meta = base_meta("construct", g);
    meta.push_back({"recipe", recipe});
    meta.push_back({"block_length", block_length(t).str()});
    meta.push_back({"leaves", std::to_string(t.leaves().size())});
    if (b.grafted)
        for (const auto& n : b.grafted->notes) meta.push_back({"note", n});
    std::string why;
    if (!t.power_convention_ok(&why)) throw Flagged("tree violates the power convention: " + why);
    auto o = open_out(out_path(g, out_file));
    write_tree_csv(o, t, meta);
    out << "wrote " << out_path(g, out_file).string() << " (" << t.leaves().size() << " leaves, N = " << block_length(t)
        << ")\n";
    return kExitOk;
}

struct SelectArgs {
    std::string recipe, mode = "threshold", a_out = "A.csv", diag_out = "diag.csv";
    double beta_p = 0.0, inv_mu_p = 0.0, mu_star = 3.627;
    double threshold_ln = std::numeric_limits<double>::quiet_NaN();
    double eps = 0.0, ln_delta = 0.0;
    unsigned s = 0;
};

int cmd_select(const SelectArgs& a, const Globals& g, std::ostream& out) {
    const Recipe r = load_recipe_file(a.recipe);
    const BuiltTree b = build_recipe(r, g.budget_nodes);
    const ChannelTree& t = b.get();
    Meta meta = base_meta("select", g);
    meta.push_back({"recipe", a.recipe});
    meta.push_back({"mode", a.mode});
    SelectionResult res;
    SelectionParams p;
    p.s = a.s;
    if (a.mode == "threshold") {
        const double thr = std::isnan(a.threshold_ln) ? -std::pow(double(r.depth()), 2.0 / 3.0) : a.threshold_ln;
        meta.push_back({"ln_threshold", real(thr)});
        res.a = select_threshold(t, LogReal::from_log(thr));
    } else if (a.mode == "recyclable" || a.mode == "disposable" || a.mode == "graft") {
        if (a.mode == "graft" && !b.grafted) throw ValidationError("graft mode needs a recipe with a [graft] section");
        if (a.mode != "graft" && b.grafted) throw ValidationError("grafted recipes only support graft mode");
        const auto lv = r.levels();
        for (const auto& k : lv)
            if (k != lv.front()) throw ValidationError("templates need a single kernel schedule");
        p.n = r.depth();
        p.mu_star = a.mu_star;
        p.beta_p = a.beta_p;
        if (a.mode == "recyclable") {
            p.mode = SelectMode::Recyclable;
            const auto c = pick_constants_recyclable(*lv.front(), a.mu_star);
            p.eps = c.eps;
            p.ln_delta = c.ln_delta;
            p.upsilon = c.upsilon;
        } else {
            if (a.mode == "graft") {
                p.mode = SelectMode::Graft;
                p.mu_p = r.graft->mu_p;
                p.mu_star = r.graft->mu_star_rat;
            } else {
                p.mode = SelectMode::Disposable;
                if (!(a.inv_mu_p > 0.0)) throw ValidationError("--inv-mu-p must be positive");
                p.mu_p = 1.0 / a.inv_mu_p;
            }
            const KernelPtr& kk = a.mode == "graft" ? r.graft->err : lv.front();
            const auto c = pick_constants_disposable(*kk, p.mu_star, p.beta_p, p.mu_p);
            p.eps = c.eps;
            p.ln_delta = c.ln_delta;
        }
        if (a.eps > 0.0) p.eps = a.eps;
        if (a.ln_delta < 0.0) p.ln_delta = a.ln_delta;
        meta.push_back({"eps", real(p.eps)});
        meta.push_back({"ln_delta", real(p.ln_delta)});
        if (p.mode == SelectMode::Recyclable) res = select_recyclable(t, p);
        else if (p.mode == SelectMode::Disposable) res = select_disposable(t, p);
        else res = select_on_grafted(*b.grafted, p);
        p = resolve_params(p);
        if (p.mode == SelectMode::Graft) {
            p.n = b.grafted->n;
            p.s = b.grafted->s;
        }
    } else {
        throw ValidationError("unknown mode '" + a.mode + "'");
    }
    meta.push_back({"rate", real(code_rate(t, res.a))});
    meta.push_back({"ln_error_bound", real(error_bound(t, res.a).log())});
    {
        auto o = open_out(out_path(g, a.a_out));
        write_a_csv(o, t, res.a, meta);
    }
    if (a.mode != "threshold") {
        auto o = open_out(out_path(g, a.diag_out));
        write_diag_csv(o, res.diag, meta);
    }
    out << a.mode << ": |A| = " << res.a.size() << ", rate = " << code_rate(t, res.a) << '\n';
    if (a.mode != "threshold") {
        std::string why;
        if (!res.diag.identities_hold(&why)) throw Flagged("partition identities fail: " + why);
        const auto rep = check_certificates(t, res, p);
        if (!rep.ok()) throw Flagged("certificate failures: " + std::to_string(rep.failed) + " (first: " +
                                     rep.failures.front() + ")");
        out << "certificates: " << rep.checked << " checked, 0 failed\n";
    }
    return kExitOk;
}

int cmd_simulate(const std::string& recipe, const std::string& a_file, std::uint64_t trials,
                 std::optional<double> eps, const std::string& out_file, const Globals& g, std::ostream& out) {
    const Recipe r = load_recipe_file(recipe);
    const BuiltTree b = build_recipe(r, g.budget_nodes);
    const ChannelTree& t = b.get();
    const auto a = read_a_csv(read_text_file(a_file), a_file);
    const BigInt n = block_length(t);
    if (BigInt(trials) * n > BigInt(g.budget_trials))
        throw BudgetError("N * trials exceeds --budget-trials " + std::to_string(g.budget_trials));
    SimConfig cfg;
    cfg.trials = trials;
    cfg.seed = g.seed;
    cfg.eps_override = eps;
    const SimReport rep = simulate(t, a, cfg);
    Meta meta = base_meta("simulate", g);
    meta.push_back({"recipe", recipe});
    meta.push_back({"trials", std::to_string(trials)});
    meta.push_back({"eps", real(rep.eps)});
    {
        auto o = open_out(out_path(g, out_file));
        write_sim_csv(o, t, rep, meta);
    }
    const UnionCheck c = verify_union_bound(rep);
    out << c.message << '\n';
    if (!c.ok) throw Flagged("union bound check flagged: " + c.message);
    return kExitOk;
}

struct TradeoffArgs {
    std::string kernel, preset, out = "region.csv", svg;
    double mu_star = 0.0;
    bool hull_check = false;
    std::size_t grid = 101;
};

int cmd_tradeoff(const TradeoffArgs& a, const Globals& g, std::ostream& out) {
    KernelPtr k;
    double mu_star = a.mu_star;
    Meta meta = base_meta("tradeoff", g);
    if (!a.preset.empty()) {
        const Preset& p = find_preset(a.preset);
        k = builtin_kernel(p.kernel);
        if (!(mu_star > 0.0)) mu_star = p.mu_star;
        meta.push_back({"preset", p.name});
        meta.push_back({"citation", p.citation});
    }
    if (!a.kernel.empty()) k = resolve_kernel(a.kernel);
    if (!k) throw ValidationError("tradeoff needs --kernel or --preset");
    if (!(mu_star > 0.0)) throw ValidationError("--mu-star must be positive");
    meta.push_back({"kernel", k->name()});
    meta.push_back({"mu_star", real(mu_star)});
    if (a.grid < 2) throw ValidationError("--grid must be >= 2");
    const auto grid = beta_grid(beta_star(k->dice(), k->ell()), a.grid);
    std::vector<TradeoffRegion> regions{region_boundary(k->dice(), k->ell(), mu_star, grid, k->name())};
    double sup = 0.0;
    if (a.hull_check) {
        regions.push_back(region_hull(k->dice(), k->ell(), mu_star, grid, k->name() + "-hull"));
        for (std::size_t i = 0; i < grid.size(); ++i)
            sup = std::max(sup, std::abs(regions[0].boundary[i].inv_mu_p - regions[1].boundary[i].inv_mu_p));
        meta.push_back({"hull_sup_distance", real(sup)});
    }
    {
        auto o = open_out(out_path(g, a.out));
        curve_emit_csv(o, regions, meta_lines(meta));
    }
    if (!a.svg.empty()) {
        auto o = open_out(out_path(g, a.svg));
        curve_emit_svg(o, regions, k->name());
    }
    out << "beta=0 intercept 1/mu' = " << regions[0].boundary.front().inv_mu_p << ", beta* = " << regions[0].beta_star
        << '\n';
    if (a.hull_check) {
        out << "hull sup distance " << sup << '\n';
        if (sup > 1e-3) throw Flagged("predicate scan and hull differ by " + real(sup));
    }
    return kExitOk;
}

int cmd_estimate_mu(const std::string& kernel, const std::vector<double>& eps, unsigned n_lo, unsigned n_hi,
                    const std::string& out_file, const Globals& g, std::ostream& out) {
    const KernelPtr k = resolve_kernel(kernel);
    const MuStarEstimate est = estimate_mu_star(*k, eps, n_lo, n_hi);
    Meta meta = base_meta("estimate-mu", g);
    meta.push_back({"kernel", k->name()});
    meta.push_back({"summary", real(est.summary) + " (estimate of a limsup)"});
    auto o = open_out(out_path(g, out_file));
    write_metadata(o, meta);
    o << "eps,n,log_n,rate,gap,estimate\n";
    for (const auto& r : est.rows)
        o << fmt_double(r.eps) << ',' << r.n << ',' << fmt_double(r.log_n) << ',' << fmt_double(r.rate) << ','
          << fmt_double(r.gap) << ',' << fmt_double(r.estimate) << '\n';
    out << "mu* estimate " << est.summary << '\n';
    return kExitOk;
}

}  // namespace

int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Polar-code construction over erasure channels", "polarforge"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--budget-nodes", g.budget_nodes, "maximum tree vertices")->check(CLI::PositiveNumber);
    app.add_option("--budget-trials", g.budget_trials, "maximum N * trials")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "directory for relative output paths");

    std::function<int()> action;

    auto* kernel = app.add_subcommand("kernel", "kernel utilities");
    kernel->require_subcommand(1);
    std::string kfile, kname, kout;
    auto* analyze = kernel->add_subcommand("analyze", "distances, beta*, |T| and dice of a kernel");
    analyze->add_option("file", kfile, "kernel file or builtin name")->required();
    analyze->callback([&] { action = [&] { return cmd_kernel_analyze(kfile, out); }; });
    auto* kwrite = kernel->add_subcommand("write", "emit a builtin kernel as a kernel file");
    kwrite->add_option("name", kname, "arikan, rs4, rs8 or arikan2")->required();
    kwrite->add_option("--out", kout, "output file (stdout if omitted)");
    kwrite->callback([&] { action = [&] { return cmd_kernel_write(kname, kout, g, out); }; });

    std::string recipe, tree_out = "tree.csv";
    auto* construct = app.add_subcommand("construct", "build a channel tree from a recipe");
    construct->add_option("--recipe", recipe)->required();
    construct->add_option("--out", tree_out);
    construct->callback([&] { action = [&] { return cmd_construct(recipe, tree_out, g, out); }; });

    SelectArgs sa;
    auto* sel = app.add_subcommand("select", "choose the information set A");
    sel->add_option("--recipe", sa.recipe)->required();
    sel->add_option("--mode", sa.mode)->check(CLI::IsMember({"threshold", "recyclable", "disposable", "graft"}));
    sel->add_option("--beta-p", sa.beta_p)->check(CLI::Range(0.0, 1.0));
    sel->add_option("--inv-mu-p", sa.inv_mu_p)->check(CLI::Range(0.0, 0.5));
    sel->add_option("--mu-star", sa.mu_star)->check(CLI::PositiveNumber);
    sel->add_option("--ln-threshold", sa.threshold_ln, "threshold mode: select ln Z below this");
    sel->add_option("--eps", sa.eps, "override the picked eps")->check(CLI::Range(0.0, 1.0));
    sel->add_option("--ln-delta", sa.ln_delta, "override the picked ln delta");
    sel->add_option("--s", sa.s, "round spacing (default ceil(sqrt(n)))");
    sel->add_option("--out", sa.a_out);
    sel->add_option("--diag", sa.diag_out);
    sel->callback([&] { action = [&] { return cmd_select(sa, g, out); }; });

    std::string a_file, sim_out = "sim.csv";
    std::uint64_t trials = 10000;
    std::optional<double> sim_eps;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo erasure simulation");
    sim->add_option("--recipe", recipe)->required();
    sim->add_option("--A", a_file)->required();
    sim->add_option("--trials", trials)->check(CLI::PositiveNumber);
    sim->add_option("--eps", sim_eps)->check(CLI::Range(0.0, 1.0));
    sim->add_option("--out", sim_out);
    sim->callback([&] { action = [&] { return cmd_simulate(recipe, a_file, trials, sim_eps, sim_out, g, out); }; });

    TradeoffArgs ta;
    auto* trade = app.add_subcommand("tradeoff", "achievable (beta', 1/mu') region");
    trade->add_option("--kernel", ta.kernel);
    trade->add_option("--preset", ta.preset);
    trade->add_option("--mu-star", ta.mu_star)->check(CLI::PositiveNumber);
    trade->add_option("--out", ta.out);
    trade->add_option("--svg", ta.svg);
    trade->add_option("--grid", ta.grid);
    trade->add_flag("--hull-check", ta.hull_check);
    trade->callback([&] { action = [&] { return cmd_tradeoff(ta, g, out); }; });

    std::string mu_kernel, mu_out = "mu_star.csv";
    std::vector<double> mu_eps{0.3, 0.5, 0.7};
    unsigned n_lo = 10, n_hi = 16;
    auto* est = app.add_subcommand("estimate-mu", "finite-n estimate of mu*");
    est->add_option("--kernel", mu_kernel)->required();
    est->add_option("--eps", mu_eps)->delimiter(',');
    est->add_option("--n-lo", n_lo);
    est->add_option("--n-hi", n_hi);
    est->add_option("--out", mu_out);
    est->callback([&] { action = [&] { return cmd_estimate_mu(mu_kernel, mu_eps, n_lo, n_hi, mu_out, g, out); }; });

    auto* fig = app.add_subcommand("figures", "reproduce the region figures");
    fig->callback([&] {
        action = [&] {
            for (const auto& p : reproduce_figures(g.out_dir.empty() ? fs::path("figures") : fs::path(g.out_dir)))
                out << "wrote " << p.string() << '\n';
            return kExitOk;
        };
    });

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }
    try {
        return action ? action() : kExitInvalid;
    } catch (const Flagged& e) {
        err << "flagged: " << e.what() << '\n';
        return kExitFlagged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}

}  // namespace polarforge
