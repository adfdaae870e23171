#include "polarforge/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/tradeoff.hpp"

namespace polarforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Vertex measures in units of 1/unit, unit = lcm of leaf 1/P (block length without k).
struct Weights {
    std::uint64_t unit = 1;
    std::vector<std::uint64_t> w;
};

Weights vertex_weights(const ChannelTree& tree) {
    const BigInt l = block_length(tree) / tree.k_power();
    if (l > BigInt(std::numeric_limits<std::uint64_t>::max() / 4))
        throw BudgetError("selection measures need the block length to fit in 62 bits");
    Weights out;
    out.unit = l.convert_to<std::uint64_t>();
    out.w.assign(tree.size(), 0);
    out.w[0] = out.unit;
    for (NodeId v = 1; v < tree.size(); ++v) {
        const TreeNode& n = tree.node(v);
        const TreeNode& p = tree.node(n.parent);
        out.w[v] = p.kind == Transform::Kernel ? out.w[n.parent] / p.num_children : out.w[n.parent];
    }
    return out;
}

std::vector<std::vector<NodeId>> by_depth(const ChannelTree& tree, unsigned n) {
    std::vector<std::vector<NodeId>> out(n + 1);
    for (NodeId v = 0; v < tree.size(); ++v) {
        const TreeNode& x = tree.node(v);
        // a power child shares its parent's depth; keep the topmost vertex of each depth
        if (x.parent != kNoNode && tree.node(x.parent).kind == Transform::Power) continue;
        if (x.depth <= n) out[x.depth].push_back(v);
    }
    return out;
}

void require_perfect_depth(const ChannelTree& tree, unsigned n) {
    for (NodeId v = 0; v < tree.size(); ++v)
        if (tree.is_leaf(v) && tree.node(v).depth != n)
            throw ValidationError("templates need every leaf at depth n = " + std::to_string(n) + "; leaf " +
                                  std::to_string(v) + " is at depth " + std::to_string(tree.node(v).depth));
}

// Descend from start to the first non-power vertices at end_depth. The window classification
// callback sees (vertex, delta_hit, dice_sum).
template <class Visit>
void walk_window(const ChannelTree& tree, NodeId start, unsigned end_depth, double ln_delta, Visit&& visit) {
    struct Item {
        NodeId v;
        bool hit;
        double ysum;
    };
    std::vector<Item> stack{{start, tree.node(start).ln_z >= ln_delta, 0.0}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        const TreeNode& n = tree.node(it.v);
        if (n.depth == end_depth && n.kind != Transform::Power) {
            visit(it.v, it.hit, it.ysum);
            continue;
        }
        if (n.kind == Transform::Leaf)
            throw ValidationError("window from vertex " + std::to_string(start) + " ends early at leaf " +
                                  std::to_string(it.v));
        for (std::size_t i = n.num_children; i-- > 0;) {
            const NodeId c = n.first_child + static_cast<NodeId>(i);
            const double y = n.kind == Transform::Kernel ? tree.kernels()[n.op]->branch_dice()[i] : 0.0;
            stack.push_back({c, it.hit || tree.node(c).ln_z >= ln_delta, it.ysum + y});
        }
    }
}

void collect_leaves(const ChannelTree& tree, NodeId v, std::vector<NodeId>& out) {
    std::vector<NodeId> stack{v};
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        const TreeNode& n = tree.node(u);
        if (n.kind == Transform::Leaf) {
            out.push_back(u);
            continue;
        }
        for (std::size_t i = n.num_children; i-- > 0;) stack.push_back(n.first_child + static_cast<NodeId>(i));
    }
}

bool blocked_by(const ChannelTree& tree, NodeId v, const std::vector<std::uint8_t>& mark) {
    for (NodeId u = v; u != kNoNode; u = tree.node(u).parent)
        if (mark[u]) return true;
    return false;
}

void sort_result(SelectionResult& r) {
    std::vector<std::size_t> idx(r.a.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return r.a[x] < r.a[y]; });
    std::vector<NodeId> a;
    std::vector<unsigned> m;
    for (auto i : idx) {
        a.push_back(r.a[i]);
        m.push_back(r.recruit_depth[i]);
    }
    r.a = std::move(a);
    r.recruit_depth = std::move(m);
}

const char* mode_name(SelectMode m) {
    switch (m) {
        case SelectMode::Threshold: return "threshold";
        case SelectMode::Recyclable: return "recyclable";
        case SelectMode::Disposable: return "disposable";
        case SelectMode::Graft: return "graft";
    }
    return "?";
}

double log_ell_of(const ChannelTree& tree, bool error_kernel) {
    if (tree.kernels().empty()) throw ValidationError("tree has no kernel vertex");
    if (error_kernel)
        for (NodeId v = 0; v < tree.size(); ++v)
            if (tree.node(v).kind == Transform::Power) {
                const NodeId c = tree.node(v).first_child;
                if (tree.node(c).kind == Transform::Kernel) return std::log(double(tree.kernel_at(c).ell()));
            }
    return std::log(static_cast<double>(tree.kernels().front()->ell()));
}

}  // namespace

bool SelectionDiagnostics::identities_hold(std::string* why) const {
    std::ostringstream msg;
    std::uint64_t e0 = 0, a0 = 0;
    bool ok = true;
    for (const auto& r : rounds) {
        e0 += r.e;
        a0 += r.a;
        auto check = [&](bool cond, const char* what) {
            if (!cond) {
                ok = false;
                msg << "round " << r.m << ": " << what << "; ";
            }
        };
        check(r.b == r.a, "b != a");
        check(r.c + r.d + r.e == r.b, "c + d + e != b");
        check(r.e0 == e0, "e0 does not telescope");
        check(r.a0 == a0, "a0 does not telescope");
        check(r.g == capacity - measure(r.e0), "g != I - e0");
        if (mode != SelectMode::Recyclable) check(r.f == capacity - measure(r.a0), "f != I - a0");
    }
    if (why) *why = msg.str();
    return ok;
}

std::vector<NodeId> select_threshold(const ChannelTree& tree, LogReal threshold) {
    std::vector<NodeId> out;
    const bool all = threshold.log() >= 0.0;
    for (NodeId v = 0; v < tree.size(); ++v)
        if (tree.is_leaf(v) && (all || tree.node(v).ln_z < threshold.log())) out.push_back(v);
    return out;
}

namespace {

SpectrumSelection finish(const LeafSpectrum& sp, SpectrumSelection s, std::uint64_t partial_count = 0,
                         std::size_t partial_class = 0) {
    std::vector<double> terms;
    for (auto c : s.classes) {
        const auto& k = sp.classes[c];
        s.leaves += k.count;
        if (k.ln_z != kNegInf) terms.push_back(std::log(static_cast<double>(k.count)) + k.ln_z);
    }
    if (partial_count) {
        s.leaves += partial_count;
        const auto& k = sp.classes[partial_class];
        if (k.ln_z != kNegInf) terms.push_back(std::log(static_cast<double>(partial_count)) + k.ln_z);
    }
    s.rate = static_cast<double>(s.leaves) / std::pow(static_cast<double>(sp.ell), sp.n);
    s.error_bound = terms.empty() ? LogReal::zero() : LogReal::from_log(log_sum_exp(terms));
    return s;
}

}  // namespace

SpectrumSelection select_threshold(const LeafSpectrum& sp, LogReal threshold) {
    SpectrumSelection s;
    const bool all = threshold.log() >= 0.0;
    for (std::size_t i = 0; i < sp.classes.size(); ++i)
        if (all || sp.classes[i].ln_z < threshold.log()) s.classes.push_back(i);
    return finish(sp, std::move(s));
}

SpectrumSelection select_by_budget(const LeafSpectrum& sp, LogReal budget) {
    SpectrumSelection s;
    double acc = kNegInf;
    for (std::size_t i = 0; i < sp.classes.size(); ++i) {
        const auto& k = sp.classes[i];
        const double term = k.ln_z == kNegInf ? kNegInf : std::log(static_cast<double>(k.count)) + k.ln_z;
        const double next = log_add(acc, term);
        if (next > budget.log()) break;
        acc = next;
        s.classes.push_back(i);
    }
    return finish(sp, std::move(s));
}

SpectrumSelection select_by_rate(const LeafSpectrum& sp, double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("rate must lie in [0,1]");
    const double total = std::pow(static_cast<double>(sp.ell), sp.n);
    auto want = static_cast<std::uint64_t>(std::ceil(rate * total - 1e-9));
    SpectrumSelection s;
    for (std::size_t i = 0; i < sp.classes.size() && want > 0; ++i) {
        const auto& k = sp.classes[i];
        if (k.count <= want) {
            s.classes.push_back(i);
            want -= k.count;
        } else {
            return finish(sp, std::move(s), want, i);
        }
    }
    return finish(sp, std::move(s));
}

SelectionParams resolve_params(SelectionParams p, std::vector<std::string>* notes) {
    if (p.n < 1) throw ValidationError("n must be >= 1");
    const auto s_default = static_cast<unsigned>(std::ceil(std::sqrt(static_cast<double>(p.n)) - 1e-12));
    if (p.s == 0) p.s = std::max(1u, s_default);
    if (p.mode == SelectMode::Disposable || p.mode == SelectMode::Graft) {
        if (!(p.mu_p > 0.0) || !(p.mu_star > 0.0)) throw ValidationError("disposable mode needs mu' and mu*");
        if (p.n_rat == 0) {
            p.n_rat = rat_depth(p.n, p.mu_star, p.mu_p);
            if (notes) {
                std::ostringstream msg;
                msg << "n_rat = round(" << p.n << " * " << p.mu_star << " / " << p.mu_p << ") = " << p.n_rat;
                notes->push_back(msg.str());
            }
        }
        if (p.n_rat > p.n) throw ValidationError("n_rat exceeds n");
        if (notes && p.n_rat % p.s != 0)
            notes->push_back("n_rat is not a multiple of s = " + std::to_string(p.s) + "; last round at " +
                             std::to_string(p.n_rat / p.s * p.s));
    } else if (p.mode == SelectMode::Recyclable && notes && p.n >= p.s && (p.n - p.s) % p.s != 0) {
        notes->push_back("n - s is not a multiple of s = " + std::to_string(p.s) + "; last round at " +
                         std::to_string((p.n - p.s) / p.s * p.s));
    }
    if (p.mode != SelectMode::Threshold && !(p.eps > 0.0 && p.eps < 1.0)) throw ValidationError("eps must lie in (0,1)");
    if (p.mode != SelectMode::Threshold && !(p.ln_delta < 0.0)) throw ValidationError("delta must lie in (0,1)");
    return p;
}

SelectionResult select_recyclable(const ChannelTree& tree, const SelectionParams& params) {
    SelectionResult r;
    SelectionParams p = params;
    p.mode = SelectMode::Recyclable;
    p = resolve_params(p, &r.diag.notes);
    require_perfect_depth(tree, p.n);
    const Weights w = vertex_weights(tree);
    r.diag.unit = w.unit;
    r.diag.capacity = tree.channel(tree.root()).capacity();
    r.diag.mode = SelectMode::Recyclable;
    const auto levels = by_depth(tree, p.n);
    std::vector<std::uint8_t> in_e(tree.size(), 0);
    std::vector<std::pair<NodeId, unsigned>> e_members;
    std::uint64_t e0 = 0, a0 = 0;
    for (unsigned m = p.s; m + p.s <= p.n; m += p.s) {
        RoundDiag d;
        d.m = m;
        const double ln_thr = -std::pow(static_cast<double>(m), 2.0 / 3.0);
        for (NodeId v : levels[m]) {
            if (tree.node(v).ln_z > ln_thr || blocked_by(tree, v, in_e)) continue;
            d.a += w.w[v];
            walk_window(tree, v, m + p.s, p.ln_delta, [&](NodeId u, bool hit, double ysum) {
                d.b += w.w[u];
                if (hit) {
                    d.c += w.w[u];
                } else if (ysum / p.s <= 2.0 * p.eps) {
                    d.d += w.w[u];
                } else {
                    d.e += w.w[u];
                    in_e[u] = 1;
                    e_members.push_back({u, m});
                }
            });
        }
        e0 += d.e;
        a0 += d.a;
        d.e0 = e0;
        d.a0 = a0;
        d.g = r.diag.capacity - r.diag.measure(e0);
        d.f = r.diag.capacity - r.diag.measure(a0);
        r.diag.rounds.push_back(d);
    }
    for (auto [u, m] : e_members) {
        collect_leaves(tree, u, r.a);
        r.recruit_depth.resize(r.a.size(), m);
    }
    sort_result(r);
    return r;
}

namespace {

SelectionResult disposable_core(const ChannelTree& tree, const SelectionParams& p, SelectMode mode,
                                const std::vector<RecruitRound>* given) {
    SelectionResult r;
    r.diag.mode = mode;
    require_perfect_depth(tree, p.n);
    const Weights w = vertex_weights(tree);
    r.diag.unit = w.unit;
    r.diag.capacity = tree.channel(tree.root()).capacity();
    const double log_ell = log_ell_of(tree, mode == SelectMode::Graft);
    const auto levels = by_depth(tree, p.n);
    std::vector<std::uint8_t> in_a(tree.size(), 0);
    std::uint64_t e0 = 0, a0 = 0;

    std::vector<RecruitRound> rounds;
    if (given) {
        rounds = *given;
    } else {
        for (unsigned m : disposable_rounds(p.n, p.n_rat)) {
            RecruitRound rr{m, {}};
            const double ln_thr = -std::exp(std::cbrt(static_cast<double>(m)));
            for (NodeId v : levels[m])
                if (tree.node(v).ln_z < ln_thr && !blocked_by(tree, v, in_a)) {
                    rr.recruits.push_back(v);
                    in_a[v] = 1;
                }
            rounds.push_back(std::move(rr));
        }
    }
    for (const auto& rr : rounds) {
        RoundDiag d;
        d.m = rr.m;
        const double thr = p.beta_p * log_ell / (1.0 - static_cast<double>(rr.m) / p.n) + p.eps;
        const double span = static_cast<double>(p.n - rr.m);
        for (NodeId v : rr.recruits) {
            d.a += w.w[v];
            walk_window(tree, v, p.n, p.ln_delta, [&](NodeId u, bool hit, double ysum) {
                d.b += w.w[u];
                if (hit) {
                    d.c += w.w[u];
                } else if (ysum / span <= thr) {
                    d.d += w.w[u];
                } else {
                    d.e += w.w[u];
                    r.a.push_back(u);
                    r.recruit_depth.push_back(rr.m);
                }
            });
        }
        e0 += d.e;
        a0 += d.a;
        d.e0 = e0;
        d.a0 = a0;
        d.f = r.diag.capacity - r.diag.measure(a0);
        d.g = r.diag.capacity - r.diag.measure(e0);
        r.diag.rounds.push_back(d);
    }
    sort_result(r);
    return r;
}

}  // namespace

SelectionResult select_disposable(const ChannelTree& tree, const SelectionParams& params) {
    SelectionParams p = params;
    p.mode = SelectMode::Disposable;
    std::vector<std::string> notes;
    p = resolve_params(p, &notes);
    SelectionResult r = disposable_core(tree, p, SelectMode::Disposable, nullptr);
    r.diag.notes = std::move(notes);
    return r;
}

SelectionResult select_recyclable(const ErasureChannel& w, const KernelPtr& t, const SelectionParams& params,
                                  std::size_t node_budget) {
    return select_recyclable(perfect_tree(w, t, params.n, node_budget), params);
}

SelectionResult select_disposable(const ErasureChannel& w, const KernelPtr& t, const SelectionParams& params,
                                  std::size_t node_budget) {
    SelectionParams p = params;
    p.mode = SelectMode::Disposable;
    p = resolve_params(p);
    const KernelPtr& k = t;
    const Feasibility f = feasible_thm5(k->dice(), k->ell(), p.mu_star, p.beta_p, p.mu_p);
    if (!f.feasible) {
        std::ostringstream msg;
        msg << "target (" << p.beta_p << ", " << 1.0 / p.mu_p << ") fails the feasibility predicate (margin "
            << f.margin << ")";
        throw InfeasibleError(msg.str());
    }
    return select_disposable(perfect_tree(w, t, p.n, node_budget), params);
}

SelectionResult select_on_grafted(const GraftedTree& g, const SelectionParams& params) {
    SelectionParams p = params;
    p.mode = SelectMode::Graft;
    p.n = g.n;
    p.n_rat = g.n_rat;
    p.s = g.s;
    std::vector<std::string> notes = g.notes;
    p = resolve_params(p, &notes);
    SelectionResult r = disposable_core(g.tree, p, SelectMode::Graft, &g.rounds);
    r.diag.notes = std::move(notes);
    if (g.k > 1) r.diag.notes.push_back("error bound counts N = k * lcm, so each leaf use weighs k times");
    return r;
}

CertificateReport check_certificates(const ChannelTree& tree, const SelectionResult& r, const SelectionParams& params) {
    CertificateReport rep;
    if (r.a.size() != r.recruit_depth.size()) throw ValidationError("selection result arrays differ in length");
    const SelectMode mode = params.mode;
    const unsigned s = params.s ? params.s : static_cast<unsigned>(std::ceil(std::sqrt(double(params.n)) - 1e-12));
    auto fail = [&](NodeId v, const std::string& why) {
        ++rep.failed;
        if (rep.failures.size() < 8) rep.failures.push_back("leaf " + std::to_string(v) + ": " + why);
    };
    for (std::size_t i = 0; i < r.a.size(); ++i) {
        ++rep.checked;
        const NodeId leaf = r.a[i];
        const unsigned m = r.recruit_depth[i];
        const std::vector<NodeId> path = tree.path(leaf);
        // recruit: topmost path vertex at depth m; window end at depth m + s (recyclable) or the leaf
        std::size_t start = path.size(), end = path.size() - 1;
        for (std::size_t j = 0; j < path.size(); ++j)
            if (tree.node(path[j]).depth == m) {
                start = j;
                break;
            }
        if (start == path.size()) {
            fail(leaf, "no ancestor at recruit depth");
            continue;
        }
        if (mode == SelectMode::Recyclable) {
            end = start;
            while (end < path.size() && tree.node(path[end]).depth < m + s) ++end;
            if (end == path.size()) {
                fail(leaf, "window end missing");
                continue;
            }
        }
        bool hit = false;
        double ysum = 0.0;
        for (std::size_t j = start; j <= end; ++j) {
            const TreeNode& n = tree.node(path[j]);
            hit = hit || n.ln_z >= params.ln_delta;
            if (j > start) {
                const TreeNode& par = tree.node(path[j - 1]);
                if (par.kind == Transform::Kernel)
                    ysum += std::log(static_cast<double>(tree.kernel_at(path[j - 1]).distances()[n.branch]));
            }
        }
        if (hit) fail(leaf, "window touches Z >= delta");
        // empirical gains over kernel steps, summed stepwise and checked against the telescoped form
        // on a grafted tree the T_C^k step is not a kernel step; gains start at the power child
        std::size_t emp_start = start;
        if (tree.node(path[start]).kind == Transform::Power) emp_start = start + 1;
        double emp = 0.0;
        for (std::size_t j = emp_start + 1; j <= end; ++j)
            emp += std::log(tree.node(path[j]).ln_z / tree.node(path[j - 1]).ln_z);
        const double tele = std::log(-tree.node(path[end]).ln_z) - std::log(-tree.node(path[emp_start]).ln_z);
        if (!(std::abs(emp - tele) <= 1e-9 * (1.0 + std::abs(tele)))) fail(leaf, "telescoping identity broken");
        if (mode == SelectMode::Recyclable) {
            if (!(ysum / s > 2.0 * params.eps)) fail(leaf, "window dice sum <= 2 eps s");
            if (!(emp > params.eps * s)) fail(leaf, "empirical gain <= eps s");
        } else {
            const double log_ell = log_ell_of(tree, mode == SelectMode::Graft);
            const double span = static_cast<double>(params.n - m);
            const double thr = params.beta_p * log_ell / (1.0 - static_cast<double>(m) / params.n) + params.eps;
            if (!(ysum / span > thr)) fail(leaf, "window dice sum fails the retain inequality");
            if (!(emp > params.beta_p * params.n * log_ell)) fail(leaf, "empirical gain <= beta' n log ell");
        }
    }
    return rep;
}

MuStarEstimate estimate_mu_star(const Kernel& t, const std::vector<double>& eps_grid, unsigned n_lo, unsigned n_hi) {
    if (n_lo < 1 || n_hi < n_lo) throw ValidationError("need 1 <= n_lo <= n_hi");
    MuStarEstimate out;
    for (double eps : eps_grid) {
        const ErasureChannel w = qec_make(t.field(), eps);
        LeafSpectrum sp = perfect_spectrum(w, t, n_lo);
        double last = 0.0;
        for (unsigned n = n_lo; n <= n_hi; ++n) {
            if (n > n_lo) sp = advance_spectrum(sp, t);
            const double log_n = sp.log_leaves();
            const auto sel = select_threshold(sp, LogReal::from_log(-std::pow(static_cast<double>(n), 2.0 / 3.0)));
            const double gap = w.capacity() - sel.rate;
            const double clamp = std::exp(-0.5 * log_n);
            const double est = log_n / -std::log(std::max(gap, clamp));
            out.rows.push_back({eps, n, log_n, sel.rate, gap, est});
            last = est;
        }
        out.summary = std::max(out.summary, last);
    }
    return out;
}

ExponentSeries empirical_exponents(const std::vector<CodePoint>& series) {
    if (series.size() < 2) throw ValidationError("need at least 2 code points");
    ExponentSeries out;
    double bmin = std::numeric_limits<double>::infinity(), vmin = bmin;
    for (const auto& pt : series) {
        const double gap = pt.capacity - pt.rate;
        const bool skip = !(gap > 0.0) || !(pt.ln_p < 0.0) || pt.ln_p == kNegInf || !(pt.log_n > 0.0);
        out.skipped.push_back(skip);
        if (skip) {
            out.beta_hat.push_back(kNaN);
            out.inv_mu_hat.push_back(kNaN);
        } else {
            out.beta_hat.push_back(std::log(-pt.ln_p) / pt.log_n);
            out.inv_mu_hat.push_back(-std::log(gap) / pt.log_n);
            bmin = std::min(bmin, out.beta_hat.back());
            vmin = std::min(vmin, out.inv_mu_hat.back());
        }
        out.beta_running_min.push_back(bmin);
        out.inv_mu_running_min.push_back(vmin);
    }
    return out;
}

const char* select_mode_name(SelectMode m) { return mode_name(m); }

}  // namespace polarforge
