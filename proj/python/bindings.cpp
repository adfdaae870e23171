#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/harness.hpp"
#include "polarforge/io.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/select.hpp"
#include "polarforge/simulate.hpp"
#include "polarforge/tradeoff.hpp"
#include "polarforge/tree.hpp"

namespace py = pybind11;
using namespace polarforge;

namespace {

// pybind11 holders cannot point to const; only const members are exposed.
using KernelHolder = std::shared_ptr<Kernel>;
using FieldHolder = std::shared_ptr<Field>;
KernelHolder hold(const KernelPtr& k) { return std::const_pointer_cast<Kernel>(k); }
FieldHolder hold(const FieldPtr& f) { return std::const_pointer_cast<Field>(f); }

std::vector<std::pair<double, double>> dice_atoms(const DiceDistribution& d) {
    std::vector<std::pair<double, double>> out;
    for (const auto& a : d.support) out.emplace_back(a.y, a.p);
    return out;
}

std::vector<std::vector<Element>> kernel_rows(const Kernel& k) {
    std::vector<std::vector<Element>> out(k.ell(), std::vector<Element>(k.ell()));
    for (std::size_t i = 0; i < k.ell(); ++i)
        for (std::size_t j = 0; j < k.ell(); ++j) out[i][j] = k.rows()(i, j);
    return out;
}

py::dict diag_dict(const SelectionDiagnostics& d) {
    py::list rounds;
    for (const auto& r : d.rounds) {
        py::dict x;
        x["m"] = r.m;
        x["a"] = r.a;
        x["b"] = r.b;
        x["c"] = r.c;
        x["d"] = r.d;
        x["e"] = r.e;
        x["a0"] = r.a0;
        x["e0"] = r.e0;
        x["f"] = r.f;
        x["g"] = r.g;
        rounds.append(x);
    }
    py::dict out;
    out["unit"] = d.unit;
    out["capacity"] = d.capacity;
    out["rounds"] = rounds;
    out["notes"] = d.notes;
    out["identities_hold"] = d.identities_hold();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Polar-code construction over q-ary erasure channels";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

    py::class_<Field, FieldHolder>(m, "Field")
        .def_static("of_size", [](std::uint32_t q) { return hold(Field::of_size(q)); }, py::arg("q"))
        .def_property_readonly("q", &Field::q)
        .def_property_readonly("p", &Field::p)
        .def("add", &Field::add)
        .def("mul", &Field::mul)
        .def("inv", &Field::inv)
        .def("__repr__", [](const Field& f) { return "Field(" + f.name() + ")"; });

    py::class_<ErasureChannel>(m, "ErasureChannel")
        .def_readonly("eps", &ErasureChannel::eps)
        .def_readonly("ln_eps", &ErasureChannel::ln_eps)
        .def_property_readonly("q", &ErasureChannel::q)
        .def_property_readonly("capacity", &ErasureChannel::capacity)
        .def_property_readonly("z", &ErasureChannel::z_param);
    m.def("qec", [](std::uint32_t q, double eps) { return qec_make(Field::of_size(q), eps); }, py::arg("q"), py::arg("eps"));
    m.def("power_channel", &power_channel, py::arg("channel"), py::arg("k"));

    py::class_<Kernel, KernelHolder>(m, "Kernel")
        .def_property_readonly("name", &Kernel::name)
        .def_property_readonly("ell", &Kernel::ell)
        .def_property_readonly("q", [](const Kernel& k) { return k.field()->q(); })
        .def_property_readonly("rows", &kernel_rows)
        .def_property_readonly("distances", &Kernel::distances)
        .def_property_readonly("erasure_table", [](const Kernel& k) { return k.table().counts; })
        .def_property_readonly("dice", [](const Kernel& k) { return dice_atoms(k.dice()); })
        .def_property_readonly("beta_star", [](const Kernel& k) { return beta_star(k.dice(), k.ell()); })
        .def_property_readonly("op_norm", &Kernel::op_norm)
        .def_property_readonly("powerful", [](const Kernel& k) { return is_powerful(k.dice()); })
        .def("children", [](const Kernel& k, double eps) {
            std::vector<double> out;
            for (const auto& c : synthetic_children(k, qec_make(k.field(), eps))) out.push_back(c.eps);
            return out;
        }, py::arg("eps"))
        .def("__repr__", [](const Kernel& k) { return "Kernel(" + k.name() + ", ell=" + std::to_string(k.ell()) + ")"; });

    m.def("kernel", [](std::uint32_t q, const std::vector<std::vector<Element>>& rows, std::string name) {
        return hold(kernel_load(Field::of_size(q), rows, std::move(name)));
    }, py::arg("q"), py::arg("rows"), py::arg("name") = "kernel");
    m.def("arikan_kernel", [] { return hold(arikan_kernel()); });
    m.def("rs_kernel", [](std::uint32_t q) { return hold(rs_kernel(Field::of_size(q))); }, py::arg("q"));
    m.def("random_kernel", [](std::uint32_t q, std::size_t ell, std::uint64_t seed) {
        return hold(random_kernel(Field::of_size(q), ell, seed));
    }, py::arg("q"), py::arg("ell"), py::arg("seed"));
    m.def("kronecker_kernel", [](const Kernel& a, const Kernel& b) { return hold(kronecker_kernel(a, b)); });
    m.def("resolve_kernel", [](const std::string& s) { return hold(resolve_kernel(s)); }, py::arg("name_or_path"));
    m.def("parse_kernel_text", [](const std::string& text, const std::string& source) {
        return hold(parse_kernel_text(text, source));
    }, py::arg("text"), py::arg("source") = "<string>");

    py::class_<ChannelTree>(m, "ChannelTree")
        .def_property_readonly("size", &ChannelTree::size)
        .def("leaves", &ChannelTree::leaves)
        .def("ln_z", [](const ChannelTree& t, NodeId v) { return t.node(v).ln_z; })
        .def("depth", [](const ChannelTree& t, NodeId v) { return t.node(v).depth; })
        .def("path", &ChannelTree::path)
        .def_property_readonly("block_length", [](const ChannelTree& t) { return block_length(t).str(); })
        .def("code_rate", [](const ChannelTree& t, const std::vector<NodeId>& a) { return code_rate(t, a); })
        .def("ln_error_bound", [](const ChannelTree& t, const std::vector<NodeId>& a) { return error_bound(t, a).log(); })
        .def("power_convention_ok", [](const ChannelTree& t) { return t.power_convention_ok(); });
    m.def("perfect_tree", [](const ErasureChannel& w, KernelHolder k, unsigned n) { return perfect_tree(w, k, n); },
          py::arg("channel"), py::arg("kernel"), py::arg("n"));
    m.def("multi_tree", [](const ErasureChannel& w, const std::vector<KernelHolder>& s) {
        return multi_tree(w, std::vector<KernelPtr>(s.begin(), s.end()));
    },
          py::arg("channel"), py::arg("schedule"));

    py::class_<GraftedTree>(m, "GraftedTree")
        .def_property_readonly("tree", [](const GraftedTree& g) -> const ChannelTree& { return g.tree; },
                               py::return_value_policy::reference_internal)
        .def_readonly("n", &GraftedTree::n)
        .def_readonly("n_rat", &GraftedTree::n_rat)
        .def_readonly("k", &GraftedTree::k)
        .def_property_readonly("recruits", [](const GraftedTree& g) {
            std::vector<std::pair<unsigned, std::vector<NodeId>>> out;
            for (const auto& r : g.rounds) out.emplace_back(r.m, r.recruits);
            return out;
        });
    m.def("build_grafted_tree", [](const ErasureChannel& w, KernelHolder rat, KernelHolder err, unsigned k, unsigned n,
                                   double mu_star_rat, double mu_p) {
        return build_grafted_tree(w, rat, err, k, n, mu_star_rat, mu_p);
    }, py::arg("channel"), py::arg("t_rat"), py::arg("t_err"), py::arg("k"), py::arg("n"), py::arg("mu_star_rat"),
          py::arg("mu_p"));

    py::enum_<SelectMode>(m, "SelectMode")
        .value("THRESHOLD", SelectMode::Threshold)
        .value("RECYCLABLE", SelectMode::Recyclable)
        .value("DISPOSABLE", SelectMode::Disposable)
        .value("GRAFT", SelectMode::Graft);
    py::class_<SelectionParams>(m, "SelectionParams")
        .def(py::init<>())
        .def_readwrite("mode", &SelectionParams::mode)
        .def_readwrite("n", &SelectionParams::n)
        .def_readwrite("s", &SelectionParams::s)
        .def_readwrite("eps", &SelectionParams::eps)
        .def_readwrite("ln_delta", &SelectionParams::ln_delta)
        .def_readwrite("upsilon", &SelectionParams::upsilon)
        .def_readwrite("beta_p", &SelectionParams::beta_p)
        .def_readwrite("mu_p", &SelectionParams::mu_p)
        .def_readwrite("mu_star", &SelectionParams::mu_star)
        .def_readwrite("n_rat", &SelectionParams::n_rat);

    m.def("select_threshold", [](const ChannelTree& t, double ln_threshold) {
        return select_threshold(t, LogReal::from_log(ln_threshold));
    }, py::arg("tree"), py::arg("ln_threshold"));
    auto run_select = [](const ChannelTree& t, const SelectionResult& r, const SelectionParams& p) {
        py::dict out;
        out["A"] = r.a;
        out["recruit_depth"] = r.recruit_depth;
        out["diagnostics"] = diag_dict(r.diag);
        const auto cert = check_certificates(t, r, p);
        out["certificates_ok"] = cert.ok();
        out["certificate_failures"] = cert.failures;
        return out;
    };
    m.def("select_recyclable", [run_select](const ChannelTree& t, const SelectionParams& p) {
        return run_select(t, select_recyclable(t, p), p);
    });
    m.def("select_disposable", [run_select](const ChannelTree& t, const SelectionParams& p) {
        return run_select(t, select_disposable(t, p), p);
    });
    m.def("select_on_grafted", [run_select](const GraftedTree& g, const SelectionParams& p) {
        return run_select(g.tree, select_on_grafted(g, p), p);
    });
    m.def("pick_constants_recyclable", [](const Kernel& k, double mu_star) {
        const auto c = pick_constants_recyclable(k, mu_star);
        return py::dict(py::arg("upsilon") = c.upsilon, py::arg("eps") = c.eps, py::arg("ln_delta") = c.ln_delta);
    });
    m.def("pick_constants_disposable", [](const Kernel& k, double mu_star, double beta_p, double mu_p) {
        const auto c = pick_constants_disposable(k, mu_star, beta_p, mu_p);
        return py::dict(py::arg("eps") = c.eps, py::arg("ln_delta") = c.ln_delta);
    });
    m.def("estimate_mu_star", [](const Kernel& k, const std::vector<double>& eps, unsigned n_lo, unsigned n_hi) {
        const auto e = estimate_mu_star(k, eps, n_lo, n_hi);
        std::vector<py::dict> rows;
        for (const auto& r : e.rows)
            rows.push_back(py::dict(py::arg("eps") = r.eps, py::arg("n") = r.n, py::arg("rate") = r.rate,
                                    py::arg("gap") = r.gap, py::arg("estimate") = r.estimate));
        return py::make_tuple(rows, e.summary);
    });

    m.def("simulate", [](const ChannelTree& t, const std::vector<NodeId>& a, std::uint64_t trials, std::uint64_t seed) {
        SimConfig cfg;
        cfg.trials = trials;
        cfg.seed = seed;
        const auto r = simulate(t, a, cfg);
        std::vector<double> rates, predicted;
        for (const auto& l : r.leaves) {
            rates.push_back(l.rate);
            predicted.push_back(l.predicted);
        }
        py::dict out;
        out["bler"] = r.bler;
        out["bler_ci"] = py::make_tuple(r.bler_ci_lo, r.bler_ci_hi);
        out["union_bound"] = r.union_bound;
        out["ln_formula_bound"] = r.formula_bound.log();
        out["leaf_rates"] = rates;
        out["leaf_predicted"] = predicted;
        out["union_ok"] = verify_union_bound(r).ok;
        return out;
    }, py::arg("tree"), py::arg("A"), py::arg("trials") = 10000, py::arg("seed") = 1);

    m.def("cramer_eval", [](const Kernel& k, double y) { return cramer_eval(k.dice(), y); }, py::arg("kernel"), py::arg("y"));
    m.def("cramer_closed_arikan", &cramer_closed_arikan, py::arg("beta"));
    m.def("chernoff_tail", [](const Kernel& k, unsigned n, double y) { return chernoff_tail(k.dice(), n, y); });
    m.def("feasible_thm5", [](const Kernel& k, double mu_star, double beta_p, double mu_p) {
        const auto f = feasible_thm5(k.dice(), k.ell(), mu_star, beta_p, mu_p);
        return py::make_tuple(f.feasible, f.margin);
    }, py::arg("kernel"), py::arg("mu_star"), py::arg("beta_p"), py::arg("mu_p"));
    m.def("region_boundary", [](const Kernel& k, double mu_star, std::size_t points, bool hull) {
        const auto grid = beta_grid(beta_star(k.dice(), k.ell()), points);
        const auto r = hull ? region_hull(k.dice(), k.ell(), mu_star, grid) : region_boundary(k.dice(), k.ell(), mu_star, grid);
        std::vector<std::pair<double, double>> out;
        for (const auto& p : r.boundary) out.emplace_back(p.beta_p, p.inv_mu_p);
        return out;
    }, py::arg("kernel"), py::arg("mu_star"), py::arg("points") = 101, py::arg("hull") = false);
    m.def("choose_rs_parameters", [](double beta_p, double mu_p, double mu_star_rat) {
        const auto c = choose_rs_parameters(beta_p, mu_p, mu_star_rat);
        return py::make_tuple(c.k, c.ell, c.margin);
    }, py::arg("beta_p"), py::arg("mu_p"), py::arg("mu_star_rat"));

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_pipeline(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"));
    m.attr("__version__") = kToolVersion;
}
