#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "polarforge/errors.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/select.hpp"
#include "polarforge/tree.hpp"

using namespace polarforge;

namespace {

const FieldPtr& gf2() {
    static const FieldPtr f = Field::of_size(2);
    return f;
}

SelectionParams recyclable_params(unsigned n) {
    const auto c = pick_constants_recyclable(*arikan_kernel(), 3.627);
    SelectionParams p;
    p.mode = SelectMode::Recyclable;
    p.n = n;
    p.s = 4;
    p.eps = c.eps;
    p.ln_delta = c.ln_delta;
    p.upsilon = c.upsilon;
    return p;
}

SelectionParams disposable_params(unsigned n, double beta_p, double inv_mu_p) {
    const auto c = pick_constants_disposable(*arikan_kernel(), 3.627, beta_p, 1 / inv_mu_p);
    SelectionParams p;
    p.mode = SelectMode::Disposable;
    p.n = n;
    p.s = 4;
    p.eps = c.eps;
    p.ln_delta = c.ln_delta;
    p.beta_p = beta_p;
    p.mu_p = 1 / inv_mu_p;
    p.mu_star = 3.627;
    return p;
}

// Leaves under a set of ancestors, computed by walking up from every leaf.
std::vector<NodeId> leaves_under(const ChannelTree& t, const std::vector<NodeId>& tops) {
    std::vector<NodeId> out;
    for (NodeId v : t.leaves()) {
        for (NodeId u = v; u != kNoNode; u = t.node(u).parent)
            if (std::find(tops.begin(), tops.end(), u) != tops.end()) {
                out.push_back(v);
                break;
            }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("select_threshold examples") {
    const auto t = perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 2);
    const auto a = select_threshold(t, LogReal::from_value(0.3));
    REQUIRE(a.size() == 1);
    CHECK(std::exp(t.node(a[0]).ln_z) == doctest::Approx(0.0625));
    CHECK(select_threshold(t, LogReal::from_value(1.0)).size() == 4);
    CHECK(select_threshold(t, LogReal::from_value(5.0)).size() == 4);
    CHECK(select_threshold(t, LogReal::zero()).empty());
}

TEST_CASE("spectrum selectors agree with the explicit tree") {
    const auto w = qec_make(gf2(), 0.5);
    const auto t = perfect_tree(w, arikan_kernel(), 12);
    const auto sp = perfect_spectrum(w, *arikan_kernel(), 12);
    for (double thr : {1e-1, 1e-3, 1e-6}) {
        const auto a = select_threshold(t, LogReal::from_value(thr));
        const auto s = select_threshold(sp, LogReal::from_value(thr));
        CHECK(s.leaves == a.size());
        CHECK(s.rate == doctest::Approx(code_rate(t, a)));
        CHECK(s.error_bound.log() == doctest::Approx(error_bound(t, a).log()).epsilon(1e-12));
    }
    const auto b = select_by_budget(sp, LogReal::from_value(1e-3));
    CHECK(b.error_bound <= LogReal::from_value(1e-3));
    // one more class would exceed the budget
    if (b.classes.size() < sp.classes.size()) {
        const auto& nx = sp.classes[b.classes.size()];
        CHECK(LogReal::from_value(1e-3) < b.error_bound + LogReal::from_log(nx.ln_z + std::log(double(nx.count))));
    }
    const auto r = select_by_rate(sp, 0.4);
    CHECK(r.leaves == static_cast<std::uint64_t>(std::ceil(0.4 * 4096)));
}

TEST_CASE("resolve_params fills s and n_rat") {
    SelectionParams p = disposable_params(16, 0.02, 0.25);
    p.s = 0;
    std::vector<std::string> notes;
    const auto r = resolve_params(p, &notes);
    CHECK(r.s == 4);
    CHECK(r.n_rat == 15);
    SelectionParams bad = p;
    bad.eps = 0.0;
    CHECK_THROWS_AS(resolve_params(bad), ValidationError);
}

TEST_CASE("recyclable template at n = 16") {
    const auto w = qec_make(gf2(), 0.5);
    const auto t = perfect_tree(w, arikan_kernel(), 16);
    const auto p = recyclable_params(16);
    const auto r = select_recyclable(t, p);
    std::string why;
    CHECK_MESSAGE(r.diag.identities_hold(&why), why);
    CHECK_FALSE(r.a.empty());
    CHECK(std::is_sorted(r.a.begin(), r.a.end()));
    CHECK(r.a.size() == r.recruit_depth.size());
    const auto cert = check_certificates(t, r, p);
    CHECK(cert.checked == r.a.size());
    CHECK(cert.ok());
    CHECK(r.diag.unit == 65536);
    for (const auto& rd : r.diag.rounds) {
        CHECK(rd.m % 4 == 0);
        CHECK(rd.m + 4 <= 16);
    }
    // tampering is caught: a leaf outside any certificate fails
    SelectionResult bad = r;
    const auto leaves = t.leaves();
    const NodeId worst = leaves.front();
    if (std::find(bad.a.begin(), bad.a.end(), worst) == bad.a.end()) {
        bad.a.push_back(worst);
        bad.recruit_depth.push_back(4);
        CHECK_FALSE(check_certificates(t, bad, p).ok());
    }
}

TEST_CASE("recyclable with unreachable thresholds returns a tiny set") {
    const auto t = perfect_tree(qec_make(gf2(), 0.999), arikan_kernel(), 16);
    const auto r = select_recyclable(t, recyclable_params(16));
    CHECK(r.diag.identities_hold());
    CHECK(code_rate(t, r.a) < 0.01);
}

TEST_CASE("disposable template at n = 16") {
    const auto t = perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 16);
    const auto p = disposable_params(16, 0.02, 0.25);
    const auto r = select_disposable(t, p);
    std::string why;
    CHECK_MESSAGE(r.diag.identities_hold(&why), why);
    CHECK_FALSE(r.a.empty());
    const auto cert = check_certificates(t, r, p);
    CHECK(cert.ok());
    // A is contained in the leaves under the recorded rounds' recruits
    CHECK(r.diag.rounds.size() == 3);
    for (const auto& rd : r.diag.rounds) {
        CHECK(rd.f == doctest::Approx(r.diag.capacity - r.diag.measure(rd.a0)));
        CHECK(rd.g == doctest::Approx(r.diag.capacity - r.diag.measure(rd.e0)));
    }
}

TEST_CASE("disposable with the small-rate target at n = 16 has no rounds") {
    const auto t = perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 16);
    const auto p = disposable_params(16, 0.05, 0.05);
    const auto r = select_disposable(t, p);
    CHECK(r.a.empty());
    CHECK(r.diag.identities_hold());
}

TEST_CASE("disposable n = 4 recruits nothing") {
    const auto t = perfect_tree(qec_make(gf2(), 0.5), arikan_kernel(), 4);
    auto p = disposable_params(4, 0.02, 0.25);
    p.s = 0;
    const auto r = select_disposable(t, p);
    CHECK(r.a.empty());
    CHECK(r.diag.identities_hold());
}

TEST_CASE("infeasible disposable targets are rejected before tree work") {
    SelectionParams p;
    p.mode = SelectMode::Disposable;
    p.n = 40;  // far beyond any node budget; must fail on the predicate first
    p.eps = 0.01;
    p.ln_delta = -5;
    p.beta_p = 0.6;
    p.mu_p = 5;
    p.mu_star = 3.627;
    CHECK_THROWS_AS(select_disposable(qec_make(gf2(), 0.5), arikan_kernel(), p), InfeasibleError);
    CHECK_THROWS_AS(pick_constants_disposable(*arikan_kernel(), 3.627, 0.6, 5), InfeasibleError);
}

TEST_CASE("recyclable needs the precondition") {
    CHECK_THROWS_AS(pick_constants_recyclable(*identity_kernel(gf2(), 2), 3.627), InfeasibleError);
}

TEST_CASE("graft selection on the k = 2 stock") {
    const auto a2 = kronecker_kernel(*arikan_kernel(), *arikan_kernel());
    const auto rs4 = rs_kernel(Field::of_size(4));
    const auto g = build_grafted_tree(qec_make(gf2(), 0.3), a2, rs4, 2, 8, 3.627, 5);
    const auto c = pick_constants_disposable(*rs4, 3.627, 0.05, 5);
    SelectionParams p;
    p.mode = SelectMode::Graft;
    p.n = 8;
    p.eps = c.eps;
    p.ln_delta = c.ln_delta;
    p.beta_p = 0.05;
    p.mu_p = 5;
    p.mu_star = 3.627;
    const auto r = select_on_grafted(g, p);
    CHECK(r.diag.identities_hold());
    CHECK(check_certificates(g.tree, r, p).ok());
    CHECK_FALSE(r.a.empty());
    // every retained leaf sits under a recorded recruit
    std::vector<NodeId> recruits;
    for (const auto& rd : g.rounds) recruits.insert(recruits.end(), rd.recruits.begin(), rd.recruits.end());
    const auto under = leaves_under(g.tree, recruits);
    for (NodeId v : r.a) CHECK(std::binary_search(under.begin(), under.end(), v));
}

TEST_CASE("graft with k = 1 and one kernel matches disposable on the same tree") {
    const auto w = qec_make(gf2(), 0.5);
    const auto g = build_grafted_tree(w, arikan_kernel(), arikan_kernel(), 1, 16, 3.627, 4);
    auto p = disposable_params(16, 0.02, 0.25);
    p.n_rat = g.n_rat;
    const auto d = select_disposable(g.tree, p);
    p.mode = SelectMode::Graft;
    const auto r = select_on_grafted(g, p);
    CHECK(r.a == d.a);
    CHECK(r.diag.rounds.size() == d.diag.rounds.size());
}

TEST_CASE("estimate_mu_star") {
    const auto e = estimate_mu_star(*arikan_kernel(), {0.3, 0.5, 0.7}, 10, 16);
    CHECK(e.rows.size() == 21);
    for (const auto& r : e.rows) {
        CHECK(r.estimate >= 2.0);
        CHECK(r.estimate <= 6.0);
    }
    // clamp active: the perfect channel has zero gap, estimate exactly 2
    const auto z = estimate_mu_star(*arikan_kernel(), {0.0}, 4, 6);
    for (const auto& r : z.rows) CHECK(r.estimate == doctest::Approx(2.0).epsilon(1e-12));
    // no polarization: gap stays at eps
    const auto id = estimate_mu_star(*identity_kernel(gf2(), 2), {0.5}, 4, 8);
    for (const auto& r : id.rows) CHECK(r.gap == doctest::Approx(0.5));
    CHECK_THROWS_AS(estimate_mu_star(*arikan_kernel(), {0.5}, 5, 4), ValidationError);
}

TEST_CASE("empirical_exponents algebra") {
    std::vector<CodePoint> a, b;
    for (unsigned n = 4; n <= 10; ++n) {
        const double ln_n = n * std::log(2.0), big_n = std::exp(ln_n);
        a.push_back({ln_n, 0.2, -std::sqrt(big_n), 0.5});
        b.push_back({ln_n, 0.5 - std::pow(big_n, -1.0 / 3), -1.0, 0.5});
    }
    const auto ea = empirical_exponents(a), eb = empirical_exponents(b);
    for (double x : ea.beta_hat) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));
    for (double x : eb.inv_mu_hat) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-12));
    std::vector<CodePoint> c = a;
    c[2].rate = 0.6;
    const auto ec = empirical_exponents(c);
    CHECK(ec.skipped[2]);
    CHECK(std::isnan(ec.beta_hat[2]));
    CHECK_FALSE(ec.skipped[1]);
    CHECK_THROWS_AS(empirical_exponents({a[0]}), ValidationError);
}
