#include "polarforge/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "polarforge/channel.hpp"
#include "polarforge/errors.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/parallel.hpp"

namespace polarforge {

namespace {

using Word = std::uint64_t;

struct Plan {
    std::vector<std::uint64_t> uses;
    std::vector<std::size_t> offset;
    std::size_t words = 0;
    std::uint64_t n = 0;
    std::vector<std::vector<std::vector<std::uint32_t>>> min_sets;  // per kernel registry entry, per child
};

Plan make_plan(const ChannelTree& tree, std::size_t word_budget) {
    Plan p;
    const BigInt n = block_length(tree);
    if (n > BigInt(word_budget)) throw BudgetError("block length exceeds the simulation word budget");
    p.n = n.convert_to<std::uint64_t>();
    p.uses.assign(tree.size(), 0);
    p.offset.assign(tree.size(), 0);
    p.uses[0] = p.n;
    for (NodeId v = 1; v < tree.size(); ++v) {
        const TreeNode& x = tree.node(v);
        const TreeNode& par = tree.node(x.parent);
        p.uses[v] = p.uses[x.parent] / (par.kind == Transform::Kernel ? par.num_children : par.op);
    }
    for (NodeId v = 0; v < tree.size(); ++v) {
        p.offset[v] = p.words;
        p.words += p.uses[v];
        if (p.words > word_budget)
            throw BudgetError("simulation needs more than " + std::to_string(word_budget) + " words per batch");
    }
    for (const auto& k : tree.kernels()) {
        std::vector<std::vector<std::uint32_t>> sets;
        for (std::size_t i = 0; i < k->ell(); ++i) sets.push_back(k->minimal_erasure_sets(i));
        p.min_sets.push_back(std::move(sets));
    }
    return p;
}

void fill_bernoulli(std::mt19937_64& rng, double p, Word* out, std::size_t words) {
    std::fill(out, out + words, Word{0});
    if (p <= 0.0) return;
    if (p >= 1.0) {
        std::fill(out, out + words, ~Word{0});
        return;
    }
    if (p == 0.5) {
        for (std::size_t i = 0; i < words; ++i) out[i] = rng();
        return;
    }
    const bool flip = p > 0.5;
    std::geometric_distribution<std::uint64_t> skip(flip ? 1.0 - p : p);
    const std::uint64_t bits = static_cast<std::uint64_t>(words) * 64;
    for (std::uint64_t pos = skip(rng); pos < bits; pos += 1 + skip(rng)) out[pos >> 6] |= Word{1} << (pos & 63);
    if (flip)
        for (std::size_t i = 0; i < words; ++i) out[i] = ~out[i];
}

struct Tally {
    std::vector<std::uint64_t> erasures;
    std::uint64_t block_errors = 0;
};

void run_batch(const ChannelTree& tree, const Plan& plan, std::span<const NodeId> a, const SimConfig& cfg, double eps,
               std::uint64_t batch, Word mask, std::vector<Word>& buf, Tally& tally) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
    std::mt19937_64 rng(seq);
    buf.resize(plan.words);
    fill_bernoulli(rng, eps, buf.data(), plan.uses[0]);
    for (NodeId v = 0; v < tree.size(); ++v) {
        const TreeNode& x = tree.node(v);
        if (x.kind == Transform::Leaf) continue;
        const Word* par = buf.data() + plan.offset[v];
        const std::size_t blocks = x.kind == Transform::Kernel ? x.num_children : x.op;
        const std::size_t c = plan.uses[v] / blocks;
        auto at = [&](std::size_t t, std::size_t j) {
            return cfg.block_grouping ? par[j * blocks + t] : par[t * c + j];
        };
        if (x.kind == Transform::Power) {
            Word* out = buf.data() + plan.offset[x.first_child];
            for (std::size_t j = 0; j < c; ++j) {
                Word w = 0;
                for (std::size_t t = 0; t < blocks; ++t) w |= at(t, j);
                out[j] = w;
            }
            continue;
        }
        const auto& sets = plan.min_sets[x.op];
        for (std::size_t i = 0; i < blocks; ++i) {
            Word* out = buf.data() + plan.offset[x.first_child + i];
            for (std::size_t j = 0; j < c; ++j) {
                Word w = 0;
                for (std::uint32_t s : sets[i]) {
                    Word all = ~Word{0};
                    for (std::uint32_t m = s; m; m &= m - 1) all &= at(static_cast<std::size_t>(std::countr_zero(m)), j);
                    w |= all;
                }
                out[j] = w;
            }
        }
    }
    Word block = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Word* w = buf.data() + plan.offset[a[i]];
        for (std::size_t j = 0; j < plan.uses[a[i]]; ++j) {
            const Word m = w[j] & mask;
            tally.erasures[i] += static_cast<std::uint64_t>(std::popcount(m));
            block |= m;
        }
    }
    tally.block_errors += static_cast<std::uint64_t>(std::popcount(block));
}

// Leaf Z values recomputed top-down for a different base eps.
std::vector<double> leaf_ln_z(const ChannelTree& tree, double eps) {
    std::vector<double> ln_z(tree.size()), ln_i(tree.size());
    const ErasureChannel root = qec_make(tree.channel(0).field, eps);
    ln_z[0] = root.ln_eps;
    ln_i[0] = root.ln_cap;
    std::vector<std::pair<double, double>> kids;
    for (NodeId v = 0; v < tree.size(); ++v) {
        const TreeNode& x = tree.node(v);
        if (x.kind == Transform::Kernel) {
            tree.kernel_at(v).child_logs_all(eps_from_logs(ln_z[v], ln_i[v]), ln_z[v], ln_i[v], kids);
            for (std::size_t i = 0; i < x.num_children; ++i) {
                ln_z[x.first_child + i] = kids[i].first;
                ln_i[x.first_child + i] = kids[i].second;
            }
        } else if (x.kind == Transform::Power) {
            const auto [z, c] = power_logs(ln_z[v], ln_i[v], x.op);
            ln_z[x.first_child] = z;
            ln_i[x.first_child] = c;
        }
    }
    return ln_z;
}

}  // namespace

std::pair<double, double> wilson_interval(std::uint64_t k, std::uint64_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double nn = static_cast<double>(n), ph = static_cast<double>(k) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (ph + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

SimReport simulate(const ChannelTree& tree, std::span<const NodeId> a, const SimConfig& cfg) {
    require_leaves(tree, a);
    if (cfg.trials == 0) throw ValidationError("trials must be >= 1");
    const double eps = cfg.eps_override ? *cfg.eps_override : tree.channel(0).eps;
    if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("erasure probability must lie in [0,1]");
    const Plan plan = make_plan(tree, cfg.word_budget);

    const std::uint64_t batches = (cfg.trials + 63) / 64;
    const unsigned shards = static_cast<unsigned>(
        std::min<std::uint64_t>(batches, cfg.shards ? cfg.shards : worker_count()));
    std::vector<Tally> tallies(shards);
    std::vector<std::exception_ptr> errors(shards);
    auto work = [&](unsigned s) {
        try {
            Tally& t = tallies[s];
            t.erasures.assign(a.size(), 0);
            std::vector<Word> buf;
            for (std::uint64_t b = s; b < batches; b += shards) {
                const std::uint64_t left = cfg.trials - b * 64;
                const Word mask = left >= 64 ? ~Word{0} : (Word{1} << left) - 1;
                run_batch(tree, plan, a, cfg, eps, b, mask, buf, t);
            }
        } catch (...) {
            errors[s] = std::current_exception();
        }
    };
    if (shards <= 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (unsigned s = 0; s < shards; ++s) threads.emplace_back(work, s);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    SimReport r;
    r.trials = cfg.trials;
    r.block_length = plan.n;
    r.eps = eps;
    const std::vector<double> ln_z = leaf_ln_z(tree, eps);
    std::vector<double> terms;
    const double ln_n = std::log(static_cast<double>(plan.n));
    for (std::size_t i = 0; i < a.size(); ++i) {
        LeafStat st;
        st.leaf = a[i];
        st.uses = plan.uses[a[i]];
        for (const auto& t : tallies) st.erasures += t.erasures[i];
        const std::uint64_t n = st.uses * cfg.trials;
        st.rate = static_cast<double>(st.erasures) / static_cast<double>(n);
        std::tie(st.ci_lo, st.ci_hi) = wilson_interval(st.erasures, n);
        st.predicted = std::exp(ln_z[a[i]]);
        st.ln_predicted = ln_z[a[i]];
        r.union_bound += static_cast<double>(st.uses) * st.predicted;
        if (ln_z[a[i]] != kNegInf) terms.push_back(ln_n - tree.node(a[i]).log_inv_prob + ln_z[a[i]]);
        r.leaves.push_back(st);
    }
    r.formula_bound = LogReal::from_log(log_sum_exp(terms));
    for (const auto& t : tallies) r.block_errors += t.block_errors;
    r.bler = static_cast<double>(r.block_errors) / static_cast<double>(cfg.trials);
    std::tie(r.bler_ci_lo, r.bler_ci_hi) = wilson_interval(r.block_errors, cfg.trials);
    return r;
}

UnionCheck verify_union_bound(const SimReport& r) {
    UnionCheck c;
    const double ub = std::min(1.0, r.union_bound);
    c.slack = 4.0 * std::sqrt(std::max(ub * (1.0 - ub), 1e-300) / static_cast<double>(r.trials));
    c.ok = r.bler <= ub + c.slack;
    std::ostringstream msg;
    msg << "bler " << r.bler << (c.ok ? " <= " : " > ") << "union bound " << r.union_bound << " + 4 sigma " << c.slack;
    c.message = msg.str();
    return c;
}

}  // namespace polarforge
