#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polarforge/kernel.hpp"

namespace polarforge {

/// Negative-lambda Legendre transform of a nonnegative dice:
/// L(y) = sup_{lambda<0} (lambda*y - log E exp(lambda*Y)), which vanishes for y >= E[Y].
class CramerFn {
public:
    explicit CramerFn(DiceDistribution dice);
    /// Y = log d with d uniform on 1..ell (the Reed-Solomon dice), any ell >= 2 up to 2^62.
    static CramerFn uniform_log(std::uint64_t ell);

    double mean() const { return mean_; }
    double min_value() const { return min_value_; }
    /// P{Y = min_value()}.
    double prob_min() const { return prob_min_; }

    struct Moments {
        double log_mgf;  // log E exp(lambda Y)
        double m1;       // tilted mean
        double m2;       // tilted second moment
    };
    Moments moments(double lambda) const;

    /// L(y); +inf below the support, 0 at or above the mean.
    double operator()(double y) const;
    /// The maximizing lambda (0 when y >= mean, -inf at the support minimum).
    double argmax_lambda(double y) const;

private:
    CramerFn() = default;
    Moments uniform_moments(double lambda) const;

    bool uniform_ = false;
    std::uint64_t ell_ = 0;
    DiceDistribution dice_;
    double mean_ = 0.0, min_value_ = 0.0, prob_min_ = 1.0;
};

double cramer_eval(const DiceDistribution& dice, double y);
/// 1 + b log2 b + (1-b) log2(1-b) for b <= 1/2, else 0.
double cramer_closed_arikan(double beta);
/// exp(-n L(y)), the bound on P{S_n/n <= y}.
double chernoff_tail(const DiceDistribution& dice, unsigned n, double y);

struct Feasibility {
    bool feasible = false;
    bool precondition = false;  // P{Y=0} < ell^(-1/mu*)
    double margin = 0.0;        // min over pi of RHS - LHS; -inf when a denominator crosses zero
    double argmin_pi = 0.0;
};

struct PredicateOptions {
    std::size_t pi_grid = 1024;  // interior points; endpoints always included
    double slack = 0.0;          // added inside the Cramer argument
    double mu_shift = 0.0;       // mu' is replaced by mu' - mu_shift
};

/// For all pi in [0,1]: (1-pi) log ell / (m - pi mu*) < L(beta' m log ell / (m - pi mu*) + slack)
/// with m = mu' - mu_shift. The precondition is read off the Cramer function.
Feasibility feasibility_scan(const CramerFn& cramer, double log_ell, double mu_star, double beta_p, double mu_p,
                             const PredicateOptions& opt = {});

Feasibility feasible_thm5(const DiceDistribution& dice, std::size_t ell, double mu_star, double beta_p, double mu_p,
                          std::size_t pi_grid_size = 1024);
/// The error-kernel Cramer function with mu*_rat; the stock precondition is an input.
Feasibility feasible_thm6(const CramerFn& cramer_err, double log_ell, double mu_star_rat, bool rat_precondition,
                          double beta_p, double mu_p, std::size_t pi_grid_size = 1024);
Feasibility feasible_thm6(const DiceDistribution& dice_err, std::size_t ell, double mu_star_rat, bool rat_precondition,
                          double beta_p, double mu_p, std::size_t pi_grid_size = 1024);

struct RegionPoint {
    double beta_p;
    double inv_mu_p;
    double margin;
};

struct TradeoffRegion {
    std::string label;
    std::string method;  // "predicate-scan" or "hull"
    double mu_star = 0.0;
    double beta_star = 0.0;
    std::vector<RegionPoint> boundary;
};

/// Uniform grid 0, b*/(count-1), ..., b* (inclusive).
std::vector<double> beta_grid(double beta_star, std::size_t count);

/// Supremal feasible 1/mu' for each beta' by 40-step bisection on the predicate.
TradeoffRegion region_boundary(const CramerFn& cramer, double log_ell, double mu_star, const std::vector<double>& grid,
                               std::string label = "region");
TradeoffRegion region_boundary(const DiceDistribution& dice, std::size_t ell, double mu_star,
                               const std::vector<double>& grid, std::string label = "region");

/// Lower boundary of the convex hull of (0, 1/mu*) and the epigraph of b -> L(b log ell)/log ell.
TradeoffRegion region_hull(const CramerFn& cramer, double log_ell, double mu_star, const std::vector<double>& grid,
                           std::string label = "hull");
TradeoffRegion region_hull(const DiceDistribution& dice, std::size_t ell, double mu_star,
                           const std::vector<double>& grid, std::string label = "hull");

/// Point on the ray diagnostic through (beta', 1/mu').
std::pair<double, double> q_point(double beta_p, double mu_p, double mu_star, double pi);

/// (log ell - y)(1 - 1/log ell) - log log ell, for ell >= 4.
double rs_bound(double ell, double y);
/// Zero of rs_bound: log ell - log log ell / (1 - 1/log ell).
double rs_ystar(double ell);

struct RsChoice {
    unsigned k = 0;
    std::uint64_t ell = 0;
    double margin = 0.0;
};

/// Smallest k <= max_k with the RS_{2^k} dice feasible for the target; throws
/// ValidationError outside the triangle and InfeasibleError when no k is found.
RsChoice choose_rs_parameters(double beta_p, double mu_p, double mu_star_rat, unsigned max_k = 30);

/// CSV with columns label,beta_p,inv_mu_p,margin; metadata lines start with '#'.
void curve_emit_csv(std::ostream& out, const std::vector<TradeoffRegion>& regions,
                    const std::vector<std::string>& metadata = {});
/// Fixed-template SVG with the (0,1/2)-(0,0)-(1,0) reference triangle.
void curve_emit_svg(std::ostream& out, const std::vector<TradeoffRegion>& regions, const std::string& title = "");

}  // namespace polarforge
