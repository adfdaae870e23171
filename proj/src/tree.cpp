#include "polarforge/tree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "polarforge/errors.hpp"

namespace polarforge {

ChannelTree::ChannelTree(const ErasureChannel& root, std::size_t node_budget) : budget_(node_budget) {
    if (!root.field) throw ValidationError("root channel needs a field");
    if (budget_ < 1) throw ValidationError("node budget must be >= 1");
    TreeNode r;
    r.ln_z = root.ln_eps;
    r.ln_i = root.ln_cap;
    r.field_id = field_index(root.field);
    nodes_.push_back(r);
}

std::uint8_t ChannelTree::field_index(const FieldPtr& f) {
    for (std::size_t i = 0; i < fields_.size(); ++i)
        if (fields_[i] == f || *fields_[i] == *f) return static_cast<std::uint8_t>(i);
    if (fields_.size() >= 255) throw ValidationError("too many distinct fields in one tree");
    fields_.push_back(f);
    return static_cast<std::uint8_t>(fields_.size() - 1);
}

std::uint16_t ChannelTree::kernel_index(const KernelPtr& k) {
    for (std::size_t i = 0; i < kernels_.size(); ++i)
        if (kernels_[i] == k) return static_cast<std::uint16_t>(i);
    if (kernels_.size() >= 0xffff) throw ValidationError("too many kernels in one tree");
    kernels_.push_back(k);
    return static_cast<std::uint16_t>(kernels_.size() - 1);
}

ErasureChannel ChannelTree::channel(NodeId v) const {
    const TreeNode& n = nodes_.at(v);
    return qec_from_logs(fields_[n.field_id], n.ln_z, n.ln_i);
}

const Kernel& ChannelTree::kernel_at(NodeId v) const {
    const TreeNode& n = nodes_.at(v);
    if (n.kind != Transform::Kernel) throw ValidationError("vertex " + std::to_string(v) + " is not a kernel vertex");
    return *kernels_[n.op];
}

std::optional<double> ChannelTree::dice_into(NodeId v) const {
    const TreeNode& n = nodes_.at(v);
    if (n.parent == kNoNode) return std::nullopt;
    const TreeNode& p = nodes_[n.parent];
    if (p.kind != Transform::Kernel) return std::nullopt;
    return kernels_[p.op]->branch_dice()[n.branch];
}

NodeId ChannelTree::allocate(std::size_t count) {
    if (nodes_.size() + count > budget_)
        throw BudgetError("tree would exceed the node budget of " + std::to_string(budget_));
    const auto first = static_cast<NodeId>(nodes_.size());
    nodes_.resize(nodes_.size() + count);
    return first;
}

NodeId ChannelTree::apply_kernel(NodeId v, const KernelPtr& kernel) {
    if (!kernel) throw ValidationError("null kernel");
    if (nodes_.at(v).kind != Transform::Leaf) throw ValidationError("vertex " + std::to_string(v) + " is not a leaf");
    const FieldPtr& f = fields_[nodes_[v].field_id];
    if (!kernel->same_field(*f))
        throw ValidationError("kernel over " + kernel->field()->name() + " applied to a channel over " + f->name());
    if (nodes_[v].depth == 0xffff) throw ValidationError("tree depth limit reached");
    const std::uint16_t kid = kernel_index(kernel);
    const std::size_t ell = kernel->ell();
    const NodeId first = allocate(ell);
    TreeNode& p = nodes_[v];
    p.kind = Transform::Kernel;
    p.op = kid;
    p.first_child = first;
    p.num_children = static_cast<std::uint16_t>(ell);
    std::vector<std::pair<double, double>> logs;
    kernel->child_logs_all(eps_from_logs(p.ln_z, p.ln_i), p.ln_z, p.ln_i, logs);
    const double log_ell = std::log(static_cast<double>(ell));
    for (std::size_t i = 0; i < ell; ++i) {
        TreeNode& c = nodes_[first + i];
        c.ln_z = std::min(logs[i].first, 0.0);
        c.ln_i = std::min(logs[i].second, 0.0);
        c.log_inv_prob = p.log_inv_prob + log_ell;
        c.parent = v;
        c.depth = static_cast<std::uint16_t>(p.depth + 1);
        c.branch = static_cast<std::uint16_t>(i);
        c.field_id = p.field_id;
    }
    return first;
}

NodeId ChannelTree::apply_power(NodeId v, unsigned k) {
    if (k < 1 || k > 0xffff) throw ValidationError("power k must be in 1..65535");
    if (nodes_.at(v).kind != Transform::Leaf) throw ValidationError("vertex " + std::to_string(v) + " is not a leaf");
    if (has_power_ && k != k_power_) throw ValidationError("all T_C^k vertices in a tree must share k");
    const FieldPtr base = fields_[nodes_[v].field_id];
    const FieldPtr ext = k == 1 ? base : Field::standard(base->p(), base->e() * k);
    const std::uint8_t fid = field_index(ext);
    const NodeId c = allocate(1);
    TreeNode& p = nodes_[v];
    p.kind = Transform::Power;
    p.op = static_cast<std::uint16_t>(k);
    p.first_child = c;
    p.num_children = 1;
    auto [le, lc] = power_logs(p.ln_z, p.ln_i, k);
    TreeNode& ch = nodes_[c];
    ch.ln_z = std::min(le, 0.0);
    ch.ln_i = lc;
    ch.log_inv_prob = p.log_inv_prob;
    ch.parent = v;
    ch.depth = p.depth;
    ch.field_id = fid;
    has_power_ = true;
    k_power_ = k;
    return c;
}

std::vector<NodeId> ChannelTree::leaves() const {
    std::vector<NodeId> out, stack{0};
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        const TreeNode& n = nodes_[v];
        if (n.kind == Transform::Leaf) {
            out.push_back(v);
            continue;
        }
        for (std::size_t i = n.num_children; i-- > 0;) stack.push_back(n.first_child + static_cast<NodeId>(i));
    }
    return out;
}

std::vector<NodeId> ChannelTree::path(NodeId v) const {
    std::vector<NodeId> out;
    for (NodeId u = v; u != kNoNode; u = nodes_.at(u).parent) out.push_back(u);
    std::reverse(out.begin(), out.end());
    return out;
}

bool ChannelTree::power_convention_ok(std::string* why) const {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!has_power_) return true;
    // per vertex: number of power vertices strictly above it
    std::vector<std::uint8_t> above(nodes_.size(), 0);
    int rate = -1, err = -1;
    for (NodeId v = 0; v < nodes_.size(); ++v) {
        const TreeNode& n = nodes_[v];
        if (n.parent != kNoNode) above[v] = above[n.parent] + (nodes_[n.parent].kind == Transform::Power ? 1 : 0);
        if (above[v] > 1) return fail("vertex " + std::to_string(v) + " lies below two T_C^k vertices");
        if (n.kind == Transform::Power && above[v] != 0) return fail("nested T_C^k at vertex " + std::to_string(v));
        if (n.kind == Transform::Kernel) {
            int& slot = above[v] ? err : rate;
            if (slot == -1) slot = n.op;
            if (slot != n.op)
                return fail(std::string(above[v] ? "more than one error kernel" : "more than one rate kernel"));
        }
        if (n.kind == Transform::Leaf && above[v] != 1)
            return fail("leaf " + std::to_string(v) + " is not below exactly one T_C^k");
    }
    return true;
}

ChannelTree perfect_tree(const ErasureChannel& w, const KernelPtr& t, unsigned n, std::size_t node_budget) {
    if (!t) throw ValidationError("null kernel");
    // total nodes = (ell^(n+1) - 1) / (ell - 1)
    long double total = 0, level = 1;
    for (unsigned d = 0; d <= n; ++d) {
        total += level;
        level *= static_cast<long double>(t->ell());
    }
    if (total > static_cast<long double>(node_budget))
        throw BudgetError("perfect tree with ell = " + std::to_string(t->ell()) + ", n = " + std::to_string(n) +
                          " needs more than the node budget of " + std::to_string(node_budget));
    return multi_tree(w, std::vector<KernelPtr>(n, t), node_budget);
}

ChannelTree multi_tree(const ErasureChannel& w, const std::vector<KernelPtr>& schedule, std::size_t node_budget) {
    ChannelTree tree(w, node_budget);
    std::vector<NodeId> level{tree.root()}, next;
    for (const auto& k : schedule) {
        next.clear();
        for (NodeId v : level) {
            const NodeId first = tree.apply_kernel(v, k);
            for (std::size_t i = 0; i < k->ell(); ++i) next.push_back(first + static_cast<NodeId>(i));
        }
        level.swap(next);
    }
    return tree;
}

BigInt inverse_prob(const ChannelTree& tree, NodeId v) {
    BigInt d = 1;
    for (NodeId u = v; tree.node(u).parent != kNoNode; u = tree.node(u).parent) {
        const TreeNode& p = tree.node(tree.node(u).parent);
        if (p.kind == Transform::Kernel) d *= p.num_children;
    }
    return d;
}

Rational vertex_prob(const ChannelTree& tree, NodeId v) {
    if (v >= tree.size()) throw ValidationError("invalid vertex id " + std::to_string(v));
    return Rational(1, inverse_prob(tree, v));
}

namespace {

// distinct leaf denominators with multiplicities, via one top-down pass
std::map<BigInt, std::uint64_t> leaf_denominators(const ChannelTree& tree, std::span<const NodeId> subset,
                                                  bool all) {
    std::vector<std::uint32_t> sig;  // index into a table of distinct denominators
    std::vector<BigInt> table{1};
    std::map<BigInt, std::uint32_t> index{{BigInt(1), 0}};
    sig.assign(tree.size(), 0);
    for (NodeId v = 1; v < tree.size(); ++v) {
        const TreeNode& n = tree.node(v);
        const TreeNode& p = tree.node(n.parent);
        if (p.kind != Transform::Kernel) {
            sig[v] = sig[n.parent];
            continue;
        }
        BigInt d = table[sig[n.parent]] * p.num_children;
        auto it = index.find(d);
        if (it == index.end()) {
            it = index.emplace(d, static_cast<std::uint32_t>(table.size())).first;
            table.push_back(d);
        }
        sig[v] = it->second;
    }
    std::map<BigInt, std::uint64_t> out;
    if (all) {
        for (NodeId v = 0; v < tree.size(); ++v)
            if (tree.is_leaf(v)) ++out[table[sig[v]]];
    } else {
        for (NodeId v : subset) ++out[table[sig[v]]];
    }
    return out;
}

}  // namespace

BigInt block_length(const ChannelTree& tree) {
    BigInt l = 1;
    for (const auto& [d, c] : leaf_denominators(tree, {}, true)) l = boost::multiprecision::lcm(l, d);
    return l * tree.k_power();
}

void require_leaves(const ChannelTree& tree, std::span<const NodeId> a) {
    for (NodeId v : a) {
        if (v >= tree.size()) throw ValidationError("invalid vertex id " + std::to_string(v));
        if (!tree.is_leaf(v)) throw ValidationError("vertex " + std::to_string(v) + " in A is not a leaf");
    }
}

Rational code_rate_exact(const ChannelTree& tree, std::span<const NodeId> a) {
    require_leaves(tree, a);
    Rational r = 0;
    for (const auto& [d, c] : leaf_denominators(tree, a, false)) r += Rational(BigInt(c), d);
    return r;
}

double code_rate(const ChannelTree& tree, std::span<const NodeId> a) {
    return static_cast<double>(code_rate_exact(tree, a));
}

double log_big(const BigInt& x) {
    if (x <= 0) return kNegInf;
    const std::size_t bits = boost::multiprecision::msb(x) + 1;
    if (bits <= 60) return std::log(static_cast<double>(x.convert_to<std::uint64_t>()));
    const std::size_t shift = bits - 60;
    const BigInt top = x >> shift;
    return std::log(static_cast<double>(top.convert_to<std::uint64_t>())) + static_cast<double>(shift) * std::log(2.0);
}

LogReal error_bound(const ChannelTree& tree, std::span<const NodeId> a) {
    require_leaves(tree, a);
    if (a.empty()) return LogReal::zero();
    const double ln_n = log_big(block_length(tree));
    std::vector<double> terms;
    terms.reserve(a.size());
    for (NodeId v : a) {
        const TreeNode& n = tree.node(v);
        if (n.ln_z != kNegInf) terms.push_back(ln_n - n.log_inv_prob + n.ln_z);
    }
    return LogReal::from_log(log_sum_exp(terms));
}

unsigned rat_depth(unsigned n, double mu_star, double mu_p) {
    if (!(mu_p > 0.0) || !(mu_star > 0.0)) throw ValidationError("mu* and mu' must be positive");
    const long r = std::lround(static_cast<double>(n) * mu_star / mu_p);
    if (r < 0) return 0;
    return static_cast<unsigned>(r);
}

std::vector<unsigned> disposable_rounds(unsigned n, unsigned n_rat, unsigned* s_out) {
    const auto s = static_cast<unsigned>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-12));
    if (s_out) *s_out = std::max(1u, s);
    std::vector<unsigned> out;
    if (s == 0) return out;
    for (unsigned m = s; m <= n_rat && m < n; m += s) out.push_back(m);
    return out;
}

GraftedTree build_grafted_tree(const ErasureChannel& w, const KernelPtr& t_rat, const KernelPtr& t_err, unsigned k,
                               unsigned n, double mu_star_rat, double mu_p, std::size_t node_budget) {
    if (!t_rat || !t_err) throw ValidationError("null kernel");
    if (k < 1) throw ValidationError("power k must be >= 1");
    if (!t_rat->same_field(*w.field)) throw ValidationError("stock kernel field does not match the channel");
    std::uint64_t qk = 1;
    for (unsigned i = 0; i < k; ++i) {
        qk *= t_rat->field()->q();
        if (qk > Field::kMaxSize) throw ValidationError("extension field too large");
    }
    if (t_err->field()->q() != qk || t_err->field()->p() != t_rat->field()->p())
        throw ValidationError("error kernel must be over the degree-" + std::to_string(k) + " extension (q = " +
                              std::to_string(qk) + "), got " + t_err->field()->name());
    const unsigned n_rat = rat_depth(n, mu_star_rat, mu_p);
    if (n_rat == 0) throw ValidationError("n_rat = round(n mu*_rat / mu') rounds to 0");
    if (n_rat > n) throw ValidationError("n_rat = " + std::to_string(n_rat) + " exceeds n = " + std::to_string(n));

    GraftedTree g{ChannelTree(w, node_budget), n, n_rat, 0, k, {}, {}};
    const auto rounds = disposable_rounds(n, n_rat, &g.s);
    for (unsigned m : rounds) g.rounds.push_back({m, {}});
    if (n_rat % g.s != 0)
        g.notes.push_back("n_rat = " + std::to_string(n_rat) + " is not a multiple of s = " + std::to_string(g.s) +
                          "; last round at " + (rounds.empty() ? std::string("none") : std::to_string(rounds.back())));
    if (rounds.empty()) g.notes.push_back("no recruit round fits below n_rat; grafting only at depth n");

    ChannelTree& tree = g.tree;
    auto graft = [&](NodeId v, unsigned depth) {
        std::vector<NodeId> level{tree.apply_power(v, k)}, next;
        for (unsigned d = depth; d < n; ++d) {
            next.clear();
            for (NodeId u : level) {
                const NodeId first = tree.apply_kernel(u, t_err);
                for (std::size_t i = 0; i < t_err->ell(); ++i) next.push_back(first + static_cast<NodeId>(i));
            }
            level.swap(next);
        }
    };
    std::vector<NodeId> level{tree.root()}, next;
    std::size_t round_idx = 0;
    for (unsigned d = 0; d <= n; ++d) {
        next.clear();
        const bool is_round = round_idx < rounds.size() && rounds[round_idx] == d;
        const double ln_threshold = -std::exp(std::cbrt(static_cast<double>(d)));
        for (NodeId v : level) {
            if (is_round && tree.node(v).ln_z < ln_threshold) {
                g.rounds[round_idx].recruits.push_back(v);
                graft(v, d);
            } else if (d == n) {
                graft(v, d);
            } else {
                const NodeId first = tree.apply_kernel(v, t_rat);
                for (std::size_t i = 0; i < t_rat->ell(); ++i) next.push_back(first + static_cast<NodeId>(i));
            }
        }
        if (is_round) ++round_idx;
        level.swap(next);
    }
    return g;
}

PathSample z_process_sample(const ChannelTree& tree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PathSample s;
    NodeId v = tree.root();
    s.nodes.push_back(v);
    s.ln_z.push_back(tree.node(v).ln_z);
    while (!tree.is_leaf(v)) {
        const TreeNode& n = tree.node(v);
        std::uniform_int_distribution<unsigned> pick(0, n.num_children - 1u);
        const unsigned x = n.num_children > 1 ? pick(rng) : 0u;
        const double prev = n.ln_z;
        v = n.first_child + x;
        const double cur = tree.node(v).ln_z;
        s.nodes.push_back(v);
        s.ln_z.push_back(cur);
        s.branch.push_back(x);
        if (prev == 0.0 || prev == kNegInf)
            s.y_emp.emplace_back(std::nullopt);
        else
            s.y_emp.emplace_back(std::log(cur / prev));
    }
    s.tau = s.branch.size();
    return s;
}

LeafSpectrum advance_spectrum(const LeafSpectrum& sp, const Kernel& t, std::size_t class_budget) {
    if (sp.ell != t.ell()) throw ValidationError("spectrum and kernel sizes differ");
    if (sp.classes.size() * t.ell() > class_budget)
        throw BudgetError("leaf spectrum would exceed " + std::to_string(class_budget) + " classes");
    std::vector<SpectrumClass> next;
    next.reserve(sp.classes.size() * t.ell());
    std::vector<std::pair<double, double>> logs;
    for (const auto& c : sp.classes) {
        t.child_logs_all(eps_from_logs(c.ln_z, c.ln_i), c.ln_z, c.ln_i, logs);
        for (auto [le, lc] : logs) next.push_back({std::min(le, 0.0), std::min(lc, 0.0), c.count});
    }
    std::sort(next.begin(), next.end(), [](const SpectrumClass& a, const SpectrumClass& b) {
        return a.ln_z < b.ln_z || (a.ln_z == b.ln_z && a.ln_i < b.ln_i);
    });
    LeafSpectrum out;
    out.ell = sp.ell;
    out.n = sp.n + 1;
    out.root_capacity = sp.root_capacity;
    for (const auto& c : next) {
        if (!out.classes.empty() && out.classes.back().ln_z == c.ln_z && out.classes.back().ln_i == c.ln_i)
            out.classes.back().count += c.count;
        else
            out.classes.push_back(c);
    }
    return out;
}

LeafSpectrum perfect_spectrum(const ErasureChannel& w, const Kernel& t, unsigned n, std::size_t class_budget) {
    if (!t.same_field(*w.field)) throw ValidationError("kernel field does not match the channel");
    LeafSpectrum sp;
    sp.ell = t.ell();
    sp.root_capacity = w.capacity();
    sp.classes.push_back({w.ln_eps, w.ln_cap, 1});
    for (unsigned d = 0; d < n; ++d) sp = advance_spectrum(sp, t, class_budget);
    return sp;
}

}  // namespace polarforge
