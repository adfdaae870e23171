#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "polarforge/errors.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/tree.hpp"

using namespace polarforge;

namespace {

const FieldPtr& gf2() {
    static const FieldPtr f = Field::of_size(2);
    return f;
}

KernelPtr ternary() { return kernel_load(gf2(), {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}}, "t3"); }

// Plain-arithmetic BEC recursion: the minus child first, as in the tree's branch order.
std::vector<double> bec_leaves(double e, unsigned n) {
    std::vector<double> z{e};
    for (unsigned d = 0; d < n; ++d) {
        std::vector<double> next;
        for (double x : z) {
            next.push_back(2 * x - x * x);
            next.push_back(x * x);
        }
        z = next;
    }
    return z;
}

std::vector<double> leaf_z(const ChannelTree& t) {
    std::vector<double> out;
    for (NodeId v : t.leaves()) out.push_back(std::exp(t.node(v).ln_z));
    return out;
}

}  // namespace

TEST_CASE("perfect_tree examples") {
    const auto w = qec_make(gf2(), 0.5);
    auto z1 = leaf_z(perfect_tree(w, arikan_kernel(), 1));
    CHECK(z1.size() == 2);
    CHECK(z1[0] == doctest::Approx(0.75));
    CHECK(z1[1] == doctest::Approx(0.25));
    const auto t0 = perfect_tree(w, arikan_kernel(), 0);
    CHECK(t0.size() == 1);
    CHECK(t0.leaves() == std::vector<NodeId>{0});
    auto z2 = leaf_z(perfect_tree(w, arikan_kernel(), 2));
    const std::vector<double> want{0.9375, 0.5625, 0.4375, 0.0625};
    REQUIRE(z2.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(z2[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("perfect_tree agrees with the plain BEC recursion") {
    for (double e : {0.1, 0.5, 0.83}) {
        const auto got = leaf_z(perfect_tree(qec_make(gf2(), e), arikan_kernel(), 8));
        const auto want = bec_leaves(e, 8);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12).scale(1e-300));
    }
}

TEST_CASE("multi_tree examples") {
    const auto w = qec_make(gf2(), 0.3);
    const auto t6 = multi_tree(w, {arikan_kernel(), ternary()});
    CHECK(t6.leaves().size() == 6);
    CHECK(block_length(t6) == 6);
    const auto a = multi_tree(w, {arikan_kernel()});
    CHECK(leaf_z(a) == leaf_z(perfect_tree(w, arikan_kernel(), 1)));
    const auto t36 = multi_tree(w, {arikan_kernel(), arikan_kernel(), ternary(), ternary()});
    CHECK(t36.leaves().size() == 36);
    CHECK(block_length(t36) == 36);
}

TEST_CASE("vertex_prob on perfect and unbalanced trees") {
    const auto w = qec_make(gf2(), 0.5);
    const auto t = perfect_tree(w, arikan_kernel(), 3);
    CHECK(vertex_prob(t, t.root()) == 1);
    for (NodeId v : t.leaves()) CHECK(vertex_prob(t, v) == Rational(1, 8));
    CHECK(block_length(t) == 8);

    // stop training at depth 2 on one branch, go to depth 3 elsewhere
    ChannelTree u(w);
    const NodeId c = u.apply_kernel(u.root(), arikan_kernel());
    const NodeId g0 = u.apply_kernel(c, arikan_kernel());
    const NodeId g1 = u.apply_kernel(c + 1, arikan_kernel());
    u.apply_kernel(g1, arikan_kernel());
    CHECK(vertex_prob(u, g0) == Rational(1, 4));
    CHECK(vertex_prob(u, g0 + 1) == Rational(1, 4));
    Rational total = 0;
    for (NodeId v : u.leaves()) total += vertex_prob(u, v);
    CHECK(total == 1);
    CHECK(block_length(u) == 8);
    CHECK(inverse_prob(u, g0) == 4);
    // Y_1 along the sharp branch of BEC(0.5) is log(log 0.25 / log 0.5) = log 2
    const auto d = u.dice_into(c + 1);
    REQUIRE(d.has_value());
    CHECK(*d == doctest::Approx(std::log(2.0)));
    CHECK_FALSE(u.dice_into(u.root()).has_value());
}

TEST_CASE("sum of P is 1 and capacity is conserved on kernel-only trees") {
    const auto rs4 = rs_kernel(Field::of_size(4));
    const auto w4 = qec_make(Field::of_size(4), 0.37);
    for (const ChannelTree& t : {perfect_tree(w4, rs4, 4), multi_tree(qec_make(gf2(), 0.2), {arikan_kernel(), ternary(), random_kernel(gf2(), 5, 9)})}) {
        Rational total = 0;
        double cap = 0.0;
        for (NodeId v : t.leaves()) {
            total += vertex_prob(t, v);
            cap += std::exp(t.node(v).ln_i - t.node(v).log_inv_prob);
        }
        CHECK(total == 1);
        CHECK(cap == doctest::Approx(t.channel(t.root()).capacity()).epsilon(1e-12));
        CHECK(block_length(t) == t.leaves().size());
    }
}

TEST_CASE("power vertices lose capacity and count k in N") {
    const auto w = qec_make(gf2(), 0.2);
    ChannelTree t(w);
    const NodeId c = t.apply_kernel(t.root(), arikan_kernel());
    const NodeId p0 = t.apply_power(c, 2), p1 = t.apply_power(c + 1, 2);
    const auto rs4 = rs_kernel(Field::of_size(4));
    t.apply_kernel(p0, rs4);
    t.apply_kernel(p1, rs4);
    CHECK(t.power_convention_ok());
    CHECK(t.k_power() == 2);
    CHECK(block_length(t) == 2 * 8);
    double cap = 0.0;
    Rational total = 0;
    for (NodeId v : t.leaves()) {
        cap += std::exp(t.node(v).ln_i - t.node(v).log_inv_prob);
        total += vertex_prob(t, v);
    }
    CHECK(total == 1);
    CHECK(cap < 0.8);
    CHECK(t.node(p0).depth == t.node(c).depth);
    CHECK(std::exp(t.node(p0).ln_z) == doctest::Approx(1 - std::pow(1 - std::exp(t.node(c).ln_z), 2)));
    CHECK_THROWS_AS(t.apply_kernel(t.leaves().front(), arikan_kernel()), ValidationError);  // GF(4) vs GF(2)

    ChannelTree bad(w);
    const NodeId b = bad.apply_kernel(bad.root(), arikan_kernel());
    bad.apply_power(b, 2);
    std::string why;
    CHECK_FALSE(bad.power_convention_ok(&why));
    CHECK_FALSE(why.empty());
}

TEST_CASE("code_rate and error_bound examples") {
    const auto w = qec_make(gf2(), 0.5);
    const auto t1 = perfect_tree(w, arikan_kernel(), 1);
    const auto l1 = t1.leaves();
    CHECK(code_rate(t1, l1) == 1.0);
    CHECK(code_rate(t1, {}) == 0.0);
    CHECK(error_bound(t1, {}).is_zero());
    const std::vector<NodeId> sharp{l1[1]};
    CHECK(error_bound(t1, sharp).value() == doctest::Approx(0.25));
    const auto t2 = perfect_tree(w, arikan_kernel(), 2);
    const std::vector<NodeId> best{t2.leaves()[3]};
    CHECK(code_rate(t2, best) == 0.25);
    CHECK(code_rate_exact(t2, best) == Rational(1, 4));
    CHECK(error_bound(t2, best).value() == doctest::Approx(0.0625));
    const std::vector<NodeId> notleaf{t2.root()};
    CHECK_THROWS_AS(require_leaves(t2, notleaf), ValidationError);
    // monotone in A
    auto all = t2.leaves();
    LogReal prev = LogReal::zero();
    for (std::size_t k = 1; k <= all.size(); ++k) {
        const auto e = error_bound(t2, std::span(all.data(), k));
        CHECK(prev <= e);
        prev = e;
    }
}

TEST_CASE("node budget is enforced") {
    CHECK_THROWS_AS(perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 12, 1000), BudgetError);
}

TEST_CASE("log_big on big integers") {
    BigInt x = 1;
    for (int i = 0; i < 300; ++i) x *= 7;
    CHECK(log_big(x) == doctest::Approx(300 * std::log(7.0)).epsilon(1e-14));
    CHECK(log_big(BigInt(1)) == 0.0);
}

TEST_CASE("rat_depth and disposable_rounds") {
    CHECK(rat_depth(16, 3.627, 20) == 3);
    CHECK(rat_depth(16, 3.627, 4) == 15);
    unsigned s = 0;
    CHECK(disposable_rounds(16, 15, &s) == std::vector<unsigned>{4, 8, 12});
    CHECK(s == 4);
    CHECK(disposable_rounds(16, 3).empty());
    CHECK(disposable_rounds(9, 9) == std::vector<unsigned>{3, 6});
}

TEST_CASE("grafted tree: k = 2 Arikan x Arikan stock with RS_4 graft") {
    const auto a2 = kronecker_kernel(*arikan_kernel(), *arikan_kernel());
    const auto rs4 = rs_kernel(Field::of_size(4));
    const auto g = build_grafted_tree(qec_make(gf2(), 0.3), a2, rs4, 2, 8, 3.627, 5);
    CHECK(block_length(g.tree) == 2 * BigInt(65536));
    CHECK(g.tree.power_convention_ok());
    CHECK(g.k == 2);
    for (NodeId v : g.tree.leaves()) CHECK(g.tree.node(v).depth == 8);
    Rational total = 0;
    for (NodeId v : g.tree.leaves()) total += vertex_prob(g.tree, v);
    CHECK(total == 1);
    // recruits keep no stock descendants: their only child is the power vertex
    for (const auto& r : g.rounds)
        for (NodeId v : r.recruits) {
            CHECK(g.tree.node(v).depth == r.m);
            CHECK(g.tree.node(v).kind == Transform::Power);
        }
    CHECK_THROWS_AS(build_grafted_tree(qec_make(gf2(), 0.3), a2, rs4, 3, 8, 3.627, 5), ValidationError);
}

TEST_CASE("grafted tree with k = 1 and no recruits grafts at depth n_rat") {
    const auto g = build_grafted_tree(qec_make(gf2(), 0.5), arikan_kernel(), arikan_kernel(), 1, 6, 3.627, 6);
    CHECK(g.tree.power_convention_ok());
    CHECK(block_length(g.tree) == 64);
    for (NodeId v : g.tree.leaves()) CHECK(g.tree.node(v).depth == 6);
    std::size_t recruits = 0;
    for (const auto& r : g.rounds) recruits += r.recruits.size();
    if (recruits == 0)
        for (NodeId v : g.tree.leaves()) {
            const auto p = g.tree.path(v);
            const auto it = std::find_if(p.begin(), p.end(), [&](NodeId u) { return g.tree.node(u).kind == Transform::Power; });
            REQUIRE(it != p.end());
            CHECK(g.tree.node(*it).depth == g.n_rat);
        }
    // same Z values as the perfect tree, since T_C^1 is the identity
    const auto plain = leaf_z(perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 6));
    auto graft = leaf_z(g.tree);
    auto p2 = plain;
    std::sort(p2.begin(), p2.end());
    std::sort(graft.begin(), graft.end());
    for (std::size_t i = 0; i < p2.size(); ++i) CHECK(graft[i] == doctest::Approx(p2[i]).epsilon(1e-12));
}

TEST_CASE("z_process_sample") {
    const auto w = qec_make(gf2(), 0.5);
    const auto single = z_process_sample(ChannelTree(w), 1);
    CHECK(single.tau == 0);
    CHECK(single.branch.empty());
    const auto t = perfect_tree(w, arikan_kernel(), 3);
    const auto s = z_process_sample(t, 42);
    CHECK(s.tau == 3);
    CHECK(s.nodes.size() == 4);
    const auto again = z_process_sample(t, 42);
    CHECK(again.nodes == s.nodes);
    for (std::size_t i = 1; i <= s.tau; ++i) {
        REQUIRE(s.y_emp[i - 1].has_value());
        const double want = std::log(s.ln_z[i] / s.ln_z[i - 1]);
        CHECK(*s.y_emp[i - 1] == doctest::Approx(want));
    }
    // step to the sharp child: log 2
    const auto t1 = perfect_tree(w, arikan_kernel(), 1);
    bool seen_sharp = false;
    for (std::uint64_t seed = 0; seed < 32 && !seen_sharp; ++seed) {
        const auto p = z_process_sample(t1, seed);
        if (p.branch[0] == 1) {
            seen_sharp = true;
            CHECK(*p.y_emp[0] == doctest::Approx(std::log(2.0)));
        }
    }
    CHECK(seen_sharp);
    // perfect root channel: increments absent
    const auto z0 = z_process_sample(perfect_tree(qec_make(gf2(), 0.0), arikan_kernel(), 2), 3);
    CHECK_FALSE(z0.y_emp[0].has_value());
}

TEST_CASE("z_process leaf frequencies are uniform on a perfect tree") {
    const auto t = perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 3);
    std::map<NodeId, int> count;
    const int runs = 16000;
    for (int s = 0; s < runs; ++s) ++count[z_process_sample(t, s).nodes.back()];
    CHECK(count.size() == 8);
    double chi2 = 0.0;
    for (auto [v, c] : count) chi2 += (c - runs / 8.0) * (c - runs / 8.0) / (runs / 8.0);
    CHECK(chi2 < 24.3);  // 7 dof, p = 0.001
}

TEST_CASE("perfect_spectrum matches the explicit tree") {
    const auto w = qec_make(gf2(), 0.4);
    const auto t = perfect_tree(w, arikan_kernel(), 10);
    const auto sp = perfect_spectrum(w, *arikan_kernel(), 10);
    std::uint64_t total = 0;
    for (const auto& c : sp.classes) total += c.count;
    CHECK(total == 1024);
    auto z = leaf_z(t);
    std::sort(z.begin(), z.end());
    std::size_t i = 0;
    for (const auto& c : sp.classes)
        for (std::uint64_t j = 0; j < c.count; ++j, ++i) CHECK(std::exp(c.ln_z) == doctest::Approx(z[i]).epsilon(1e-10).scale(1e-300));
    CHECK(sp.log_leaves() == doctest::Approx(10 * std::log(2.0)));
}
