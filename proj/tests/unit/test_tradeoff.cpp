#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/tradeoff.hpp"

using namespace polarforge;

namespace {

const double kLn2 = std::log(2.0);

// Relative entropy D(b || 1/2) in nats: the Arikan Cramer function at y = b log 2.
double arikan_cramer_nats(double y) {
    const double b = y / kLn2;
    if (b >= 0.5) return 0.0;
    if (b < 0.0) return INFINITY;
    auto xlx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
    return kLn2 + xlx(b) + xlx(1 - b);
}

// Predicate decided with the closed-form Cramer function on a fine pi grid.
double arikan_margin_oracle(double mu_star, double beta_p, double mu_p) {
    if (!(mu_p > mu_star)) return -INFINITY;
    double best = INFINITY;
    for (int j = 0; j <= 20000; ++j) {
        const double pi = j / 20000.0, den = mu_p - pi * mu_star;
        best = std::min(best, arikan_cramer_nats(beta_p * mu_p * kLn2 / den) - (1 - pi) * kLn2 / den);
    }
    return best;
}

DiceDistribution uniform_log_dice(unsigned ell) {
    std::vector<DiceAtom> a;
    for (unsigned d = 1; d <= ell; ++d) a.push_back({std::log(double(d)), 1.0 / ell});
    return DiceDistribution::make(a);
}

}  // namespace

TEST_CASE("Cramer function matches the Arikan closed form") {
    const auto& d = arikan_kernel()->dice();
    double err = 0.0;
    for (int j = 0; j <= 50; ++j) {
        const double b = j / 100.0;
        err = std::max(err, std::abs(cramer_eval(d, b * kLn2) / kLn2 - cramer_closed_arikan(b)));
    }
    CHECK(err <= 1e-6);
    for (double b : {0.5, 0.6, 0.9, 1.0}) {
        CHECK(cramer_eval(d, b * kLn2) == 0.0);
        CHECK(cramer_closed_arikan(b) == 0.0);
    }
    CHECK(cramer_eval(d, 0.0) == doctest::Approx(kLn2));  // -log P{Y = 0}
    CHECK_THROWS(cramer_eval(d, -0.1));
}

TEST_CASE("Cramer function is convex and nonincreasing below the mean") {
    const KernelPtr rs8 = rs_kernel(Field::of_size(8));
    const CramerFn c(rs8->dice());
    double prev = INFINITY;
    std::vector<double> v;
    for (int j = 0; j <= 100; ++j) {
        const double y = c.mean() * j / 100.0;
        const double x = c(y);
        CHECK(x <= prev + 1e-12);
        prev = x;
        v.push_back(x);
    }
    for (std::size_t j = 1; j + 1 < v.size(); ++j) CHECK(v[j - 1] + v[j + 1] - 2 * v[j] >= -1e-9);
    CHECK(c(c.mean()) == 0.0);
}

TEST_CASE("uniform_log agrees with the explicit dice") {
    for (unsigned ell : {2u, 4u, 8u, 100u, 300u, 1000u}) {
        CAPTURE(ell);
        const CramerFn u = CramerFn::uniform_log(ell);
        const CramerFn d(uniform_log_dice(ell));
        CHECK(u.mean() == doctest::Approx(d.mean()).epsilon(1e-12));
        CHECK(u.prob_min() == doctest::Approx(1.0 / ell));
        for (int j = 1; j < 20; ++j) {
            const double y = d.mean() * j / 20.0;
            CHECK(u(y) == doctest::Approx(d(y)).epsilon(1e-8));
        }
    }
}

TEST_CASE("uniform_log for huge ell: mean follows Stirling") {
    for (unsigned k : {20u, 30u, 40u}) {
        const std::uint64_t ell = std::uint64_t{1} << k;
        const CramerFn u = CramerFn::uniform_log(ell);
        const double L = std::log(double(ell));
        // (1/ell) log ell! = L - 1 + log(2 pi ell)/(2 ell) + ...
        CHECK(u.mean() == doctest::Approx(L - 1 + std::log(2 * M_PI * ell) / (2.0 * ell)).epsilon(1e-12));
        CHECK(u(u.mean()) == 0.0);
        CHECK(u(0.5 * u.mean()) > 0.0);
    }
}

TEST_CASE("moments are consistent with finite differences of the log mgf") {
    const KernelPtr rs4 = rs_kernel(Field::of_size(4));
    const CramerFn c(rs4->dice());
    for (double lam : {-5.0, -1.0, -0.1}) {
        const double h = 1e-5;
        const auto m = c.moments(lam);
        const double d1 = (c.moments(lam + h).log_mgf - c.moments(lam - h).log_mgf) / (2 * h);
        CHECK(m.m1 == doctest::Approx(d1).epsilon(1e-6));
    }
}

TEST_CASE("chernoff_tail dominates the exact Arikan binomial tail") {
    const auto& d = arikan_kernel()->dice();
    for (unsigned n : {10u, 20u, 40u}) {
        for (double b : {0.1, 0.2, 0.3, 0.45}) {
            // P{S_n/n <= b log 2} with S_n = log2 * Binomial(n, 1/2)
            double tail = 0.0;
            for (unsigned j = 0; j <= n; ++j)
                if (j <= b * n + 1e-12) tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) - n * kLn2);
            CHECK(tail <= chernoff_tail(d, n, b * kLn2) * (1 + 1e-12));
        }
    }
}

TEST_CASE("chernoff_tail dominates Monte Carlo tails for RS dice") {
    const KernelPtr rs4 = rs_kernel(Field::of_size(4));
    const auto& d = rs4->dice();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(1, 4);
    const int samples = 200000;
    for (unsigned n : {5u, 10u}) {
        for (double frac : {0.3, 0.6}) {
            const double y = frac * d.mean;
            int hits = 0;
            for (int s = 0; s < samples; ++s) {
                double sum = 0.0;
                for (unsigned i = 0; i < n; ++i) sum += std::log(double(pick(rng)));
                hits += sum / n <= y;
            }
            const double p = double(hits) / samples;
            const double bound = chernoff_tail(d, n, y);
            CHECK(p <= bound + 4 * std::sqrt(bound * (1 - bound) / samples) + 1e-12);
        }
    }
}

TEST_CASE("feasibility predicate matches the closed-form oracle") {
    const auto& d = arikan_kernel()->dice();
    for (double mu_star : {3.627, 4.714}) {
        for (double b : {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.45}) {
            for (double v : {0.005, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25}) {
                const double oracle = arikan_margin_oracle(mu_star, b, 1 / v);
                const Feasibility f = feasible_thm5(d, 2, mu_star, b, 1 / v);
                CAPTURE(b);
                CAPTURE(v);
                if (std::isinf(oracle)) {
                    CHECK_FALSE(f.feasible);
                    continue;
                }
                CHECK(f.margin == doctest::Approx(oracle).epsilon(1e-6).scale(1));
                if (std::abs(oracle) > 1e-6) CHECK(f.feasible == (oracle > 0));
            }
        }
    }
    CHECK(feasible_thm5(d, 2, 3.627, 0.45, 1 / 0.005).feasible);
    CHECK_FALSE(feasible_thm5(d, 2, 3.627, 0.45, 1 / 0.01).feasible);
    CHECK_FALSE(feasible_thm5(d, 2, 3.627, 0.3, 1 / 0.3).feasible);
    const KernelPtr id = identity_kernel(Field::of_size(2), 2);
    CHECK_FALSE(feasible_thm5(id->dice(), 2, 3.627, 0.01, 100).precondition);
}

TEST_CASE("thm6 form takes the stock precondition as input") {
    const CramerFn c = CramerFn::uniform_log(16);
    const Feasibility a = feasible_thm6(c, std::log(16.0), 2.1, true, 0.3, 10);
    const Feasibility b = feasible_thm6(c, std::log(16.0), 2.1, false, 0.3, 10);
    CHECK(a.margin == b.margin);
    CHECK_FALSE(b.feasible);
}

TEST_CASE("region boundary endpoints and monotone nesting") {
    const auto& d = arikan_kernel()->dice();
    const auto grid = beta_grid(0.5, 51);
    const auto r1 = region_boundary(d, 2, 3.627, grid);
    const auto r2 = region_boundary(d, 2, 4.714, grid);
    CHECK(r1.boundary.front().inv_mu_p == doctest::Approx(1 / 3.627).epsilon(1e-3));
    CHECK(r1.boundary.back().inv_mu_p == doctest::Approx(0.0).epsilon(1e-3));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(r2.boundary[i].inv_mu_p <= r1.boundary[i].inv_mu_p + 1e-12);
        if (i > 0) CHECK(r1.boundary[i].inv_mu_p <= r1.boundary[i - 1].inv_mu_p + 1e-12);
    }
    // larger E[Y] moves the beta intercept out
    const KernelPtr rs4 = rs_kernel(Field::of_size(4));
    CHECK(region_boundary(rs4->dice(), 4, 3.627, beta_grid(0.57, 3)).beta_star > r1.beta_star);
}

TEST_CASE("predicate scan and hull agree") {
    const KernelPtr rs4 = rs_kernel(Field::of_size(4)), rs8 = rs_kernel(Field::of_size(8));
    for (auto [dice, ell] : {std::pair{&arikan_kernel()->dice(), 2u}, std::pair{&rs4->dice(), 4u},
                             std::pair{&rs8->dice(), 8u}}) {
        const auto grid = beta_grid(beta_star(*dice, ell), 41);
        const auto a = region_boundary(*dice, ell, 3.627, grid);
        const auto h = region_hull(*dice, ell, 3.627, grid);
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            sup = std::max(sup, std::abs(a.boundary[i].inv_mu_p - h.boundary[i].inv_mu_p));
        CHECK(sup <= 1e-3);
    }
}

TEST_CASE("Propositions 12 and 13 directions") {
    const auto& d = arikan_kernel()->dice();
    const auto grid = beta_grid(0.5, 26);
    const auto r = region_boundary(d, 2, 3.627, grid);
    for (const auto& p : r.boundary)
        if (p.beta_p < 0.5 - 0.02) CHECK(p.inv_mu_p > 0.0);
    for (double v = 0.02; v < 1 / 3.627 - 0.02; v += 0.02) {
        CAPTURE(v);
        bool any = false;
        for (double b = 0.002; b < 0.5 && !any; b += 0.002) any = feasible_thm5(d, 2, 3.627, b, 1 / v).feasible;
        CHECK(any);
    }
}

TEST_CASE("q_point, rs_bound, rs_ystar") {
    const auto [x, y] = q_point(0.2, 10, 3, 0.5);
    CHECK(x == doctest::Approx(0.2 * 10 / 8.5));
    CHECK(y == doctest::Approx(0.5 / 8.5));
    CHECK_THROWS(q_point(0.2, 3, 3, 1.0));
    const double L = std::log(256.0);
    CHECK(rs_bound(256, rs_ystar(256)) == doctest::Approx(0.0).scale(1));
    CHECK(rs_bound(256, 0) == doctest::Approx(L * (1 - 1 / L) - std::log(L)));
    CHECK_THROWS(rs_bound(2, 0.1));
    CHECK_THROWS(rs_bound(256, -1));
    // the closed-form chain lower-bounds the RS Cramer function
    for (unsigned k : {4u, 8u, 16u}) {
        const double ell = std::ldexp(1.0, k);
        const CramerFn c = CramerFn::uniform_log(std::uint64_t{1} << k);
        for (int j = 0; j <= 10; ++j) {
            const double yy = rs_ystar(ell) * j / 10.0;
            CHECK(c(yy) >= rs_bound(ell, yy) - 1e-9);
        }
    }
}

TEST_CASE("choose_rs_parameters") {
    const auto tip = choose_rs_parameters(0.8, 1 / 0.05, 2.1);
    CHECK(tip.k >= 1);
    CHECK(tip.margin > 0.0);
    CHECK(feasible_thm6(CramerFn::uniform_log(tip.ell), tip.k * kLn2, 2.1, true, 0.8, 20).feasible);
    CHECK_THROWS_AS(choose_rs_parameters(0.6, 1 / 0.45, 2.1), ValidationError);
    CHECK_THROWS_AS(choose_rs_parameters(0.0, 10, 2.1), ValidationError);
}

TEST_CASE("curve emitters") {
    std::ostringstream empty;
    curve_emit_csv(empty, {});
    CHECK(empty.str() == "label,beta_p,inv_mu_p,margin\n");
    const auto r = region_boundary(arikan_kernel()->dice(), 2, 3.627, beta_grid(0.5, 3), "a");
    std::ostringstream csv, svg;
    curve_emit_csv(csv, {r}, {"k: v"});
    CHECK(csv.str().rfind("# k: v\nlabel,beta_p,inv_mu_p,margin\na,0,", 0) == 0);
    curve_emit_svg(svg, {r});
    CHECK(svg.str().find("class=\"triangle\"") != std::string::npos);
    CHECK(svg.str().find("polyline") != std::string::npos);
}
