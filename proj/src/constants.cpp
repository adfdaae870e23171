#include <cmath>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/logmath.hpp"
#include "polarforge/tradeoff.hpp"

namespace polarforge {

namespace {

// eps grid 0.5 * 0.8^j
constexpr int kEpsSteps = 240;
double eps_at(int j) { return 0.5 * std::pow(0.8, j); }

// ln E[exp(-u Y)]
double ln_mgf_neg(const DiceDistribution& d, double u) {
    double m = kNegInf;
    for (const auto& a : d.support) m = std::max(m, std::log(a.p) - u * a.y);
    double s = 0.0;
    for (const auto& a : d.support) s += std::exp(std::log(a.p) - u * a.y - m);
    return m + std::log(s);
}

}  // namespace

bool formula142_check(const Kernel& k, double eps, double ln_delta) {
    if (!(ln_delta < 0.0)) return false;
    const auto& d = k.distances();
    // ln eps' = ln_delta * 1.02^j down to about -1e8
    for (double ln_e = ln_delta; ln_e > -1e8; ln_e *= 1.02) {
        const double ln_cap = log1m_exp(ln_e);
        for (std::size_t i = 0; i < k.ell(); ++i) {
            const double ln_child = k.child_logs(i, ln_e, ln_cap).first;
            const double ratio = ln_child / ln_e;
            if (!(ratio > 0.0)) return false;
            if (!(std::log(ratio) > std::log(static_cast<double>(d[i])) - eps)) return false;
        }
    }
    return true;
}

double pick_delta(const Kernel& k, double eps) {
    const DiceDistribution& dice = k.dice();
    const double p_lo = dice.prob_below(2.0 * eps), p_hi = 1.0 - p_lo;
    const double balance = 1.0 - std::pow(k.op_norm(), eps) * p_lo;
    if (!(balance > 0.0)) throw InfeasibleError("|T|^eps P{Y<2eps} >= 1 for eps = " + std::to_string(eps));
    // delta^(eps^2) p_hi <= balance
    double ln_delta_max = -1e-3;
    if (p_hi > 0.0) ln_delta_max = std::min(ln_delta_max, std::log(balance / p_hi) / (eps * eps));

    if (formula142_check(k, eps, ln_delta_max)) return ln_delta_max;
    double hi = ln_delta_max, lo = std::min(2.0 * ln_delta_max, -1.0);
    while (!formula142_check(k, eps, lo)) {
        hi = lo;
        lo *= 4.0;
        if (lo < -1e7) throw InfeasibleError("no delta passes the log-ratio check for eps = " + std::to_string(eps));
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (formula142_check(k, eps, mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

RecyclableConstants pick_constants_recyclable(const Kernel& k, double mu_star) {
    if (!(mu_star > 0.0)) throw ValidationError("mu* must be positive");
    const DiceDistribution& dice = k.dice();
    const double log_ell = std::log(static_cast<double>(k.ell()));
    const double target = -log_ell / mu_star;  // ln ell^(-1/mu*)
    const double p0 = dice.prob_zero();
    if (!(p0 > 0.0 ? std::log(p0) < target : true)) {
        std::ostringstream msg;
        msg << "P{Y=0} = " << p0 << " is not below ell^(-1/mu*) = " << std::exp(target);
        throw InfeasibleError(msg.str());
    }
    double u = 0.0;
    for (int e = 2; e <= 20 && u == 0.0; ++e)
        if (ln_mgf_neg(dice, e) < target) u = e;
    if (u == 0.0) throw InfeasibleError("no Upsilon in {e^2..e^20} satisfies E[Upsilon^-Y] < ell^(-1/mu*)");
    const double base = ln_mgf_neg(dice, u);
    for (int j = 0; j < kEpsSteps; ++j) {
        const double eps = eps_at(j);
        if (!(base + 2.0 * eps * u < target)) continue;
        if (!(std::pow(k.op_norm(), eps) * dice.prob_below(2.0 * eps) < 1.0)) continue;
        return {std::exp(u), u, eps, pick_delta(k, eps)};
    }
    throw InfeasibleError("no eps on the search grid satisfies the recyclable constraints");
}

DisposableConstants pick_constants_disposable(const Kernel& k, double mu_star, double beta_p, double mu_p) {
    const CramerFn cramer(k.dice());
    const double log_ell = std::log(static_cast<double>(k.ell()));
    const Feasibility base = feasibility_scan(cramer, log_ell, mu_star, beta_p, mu_p);
    if (!base.feasible) {
        std::ostringstream msg;
        msg << "target (" << beta_p << ", " << 1.0 / mu_p << ") is infeasible for mu* = " << mu_star
            << " (margin " << base.margin << ")";
        throw InfeasibleError(msg.str());
    }
    const DiceDistribution& dice = k.dice();
    for (int j = 0; j < kEpsSteps; ++j) {
        const double eps = eps_at(j);
        PredicateOptions opt;
        opt.slack = eps;
        opt.mu_shift = eps;
        if (!feasibility_scan(cramer, log_ell, mu_star, beta_p, mu_p, opt).feasible) continue;
        if (!(std::pow(k.op_norm(), eps) * dice.prob_below(2.0 * eps) < 1.0)) continue;
        return {eps, pick_delta(k, eps)};
    }
    throw InfeasibleError("no eps on the search grid keeps the predicate with slack");
}

}  // namespace polarforge
