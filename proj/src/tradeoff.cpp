#include "polarforge/tradeoff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "polarforge/errors.hpp"
#include "polarforge/logmath.hpp"

namespace polarforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kExactUniform = 256;
constexpr std::uint64_t kHead = 64;

// x^mu * sum_r c[r] L^r with L = ln x; derivative in place.
struct LogPoly {
    double mu;
    std::array<double, 3> c;

    void differentiate() {
        std::array<double, 3> d{};
        for (int r = 0; r < 3; ++r) {
            d[r] += mu * c[r];
            if (r > 0) d[r - 1] += r * c[r];
        }
        c = d;
        mu -= 1.0;
    }
    double at(double x) const {
        const double L = std::log(x);
        const double p = std::exp(mu * L);
        return p * (c[0] + L * (c[1] + L * c[2]));
    }
};

// integral over [ua, ub] of u^j e^{cu} du
double log_weight_integral(int j, double c, double ua, double ub) {
    if (std::abs(c) * ub <= 1.0) {
        double sum = 0.0, coef = 1.0;  // c^k / k!
        for (int k = 0; k < 80; ++k) {
            const int p = k + j + 1;
            const double term = coef * (std::pow(ub, p) - std::pow(ua, p)) / p;
            sum += term;
            if (k > 4 && std::abs(term) <= 1e-18 * std::abs(sum)) break;
            coef *= c / (k + 1);
        }
        return sum;
    }
    auto F = [&](double u) {
        double s = 0.0, fall = 1.0, cpow = c;  // j!/(j-r)!, c^{r+1}
        for (int r = 0; r <= j; ++r) {
            s += (r % 2 ? -1.0 : 1.0) * fall * std::pow(u, j - r) / cpow;
            fall *= j - r;
            cpow *= c;
        }
        return std::exp(c * u) * s;
    };
    return F(ub) - F(ua);
}

}  // namespace

CramerFn::CramerFn(DiceDistribution dice) : dice_(std::move(dice)) {
    mean_ = dice_.mean;
    min_value_ = dice_.support.front().y;
    prob_min_ = dice_.support.front().p;
}

CramerFn CramerFn::uniform_log(std::uint64_t ell) {
    if (ell < 2 || ell > (std::uint64_t{1} << 62)) throw ValidationError("uniform log dice needs 2 <= ell <= 2^62");
    CramerFn f;
    f.uniform_ = true;
    f.ell_ = ell;
    const double l = static_cast<double>(ell);
    f.mean_ = std::lgamma(l + 1.0) / l;
    f.min_value_ = 0.0;
    f.prob_min_ = 1.0 / l;
    return f;
}

CramerFn::Moments CramerFn::uniform_moments(double lambda) const {
    std::array<double, 3> s{};
    const std::uint64_t head = ell_ <= kExactUniform ? ell_ : kHead;
    for (std::uint64_t x = 1; x <= head; ++x) {
        const double L = std::log(static_cast<double>(x));
        const double p = std::exp(lambda * L);
        s[0] += p;
        s[1] += p * L;
        s[2] += p * L * L;
    }
    if (ell_ > head) {
        // Euler-Maclaurin over [a, b] with B2, B4, B6 corrections
        const double a = static_cast<double>(head + 1), b = static_cast<double>(ell_);
        const double ua = std::log(a), ub = std::log(b);
        static constexpr std::array<double, 3> kCoef = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0};
        for (int j = 0; j < 3; ++j) {
            LogPoly f{lambda, {0.0, 0.0, 0.0}};
            f.c[j] = 1.0;
            double t = log_weight_integral(j, lambda + 1.0, ua, ub) + 0.5 * (f.at(a) + f.at(b));
            for (int m = 0; m < 3; ++m) {
                f.differentiate();
                t += kCoef[m] * (f.at(b) - f.at(a));
                f.differentiate();
            }
            s[j] += t;
        }
    }
    return {std::log(s[0] / static_cast<double>(ell_)), s[1] / s[0], s[2] / s[0]};
}

CramerFn::Moments CramerFn::moments(double lambda) const {
    if (uniform_) return uniform_moments(lambda);
    double shift = kNegInf;
    for (const auto& a : dice_.support) shift = std::max(shift, std::log(a.p) + lambda * a.y);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (const auto& a : dice_.support) {
        const double w = std::exp(std::log(a.p) + lambda * a.y - shift);
        s0 += w;
        s1 += w * a.y;
        s2 += w * a.y * a.y;
    }
    return {shift + std::log(s0), s1 / s0, s2 / s0};
}

double CramerFn::argmax_lambda(double y) const {
    if (y >= mean_) return 0.0;
    if (y <= min_value_) return kNegInf;
    double hi = 0.0, lo = -1.0;
    for (int i = 0; i < 2000 && moments(lo).m1 > y; ++i) {
        hi = lo;
        lo *= 2.0;
    }
    double lambda = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const Moments m = moments(lambda);
        const double g = m.m1 - y;
        if (std::abs(g) <= 1e-15 * (1.0 + std::abs(y))) break;
        if (g > 0.0)
            hi = lambda;
        else
            lo = lambda;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(lambda))) break;
        const double var = m.m2 - m.m1 * m.m1;
        double next = var > 0.0 ? lambda - g / var : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        lambda = next;
    }
    return std::min(lambda, -1e-12);
}

double CramerFn::operator()(double y) const {
    if (y >= mean_) return 0.0;
    if (y < min_value_) return kInf;
    if (y == min_value_) return -std::log(prob_min_);
    const double lambda = argmax_lambda(y);
    return std::max(0.0, lambda * y - moments(lambda).log_mgf);
}

double cramer_eval(const DiceDistribution& dice, double y) {
    if (y < 0.0) throw ValidationError("Cramer argument must be >= 0");
    return CramerFn(dice)(y);
}

double cramer_closed_arikan(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in [0,1]");
    if (beta >= 0.5) return 0.0;
    auto xlog2x = [](double x) { return x > 0.0 ? x * std::log2(x) : 0.0; };
    return 1.0 + xlog2x(beta) + xlog2x(1.0 - beta);
}

double chernoff_tail(const DiceDistribution& dice, unsigned n, double y) {
    if (n < 1) throw ValidationError("n must be >= 1");
    return std::exp(-static_cast<double>(n) * CramerFn(dice)(y));
}

Feasibility feasibility_scan(const CramerFn& cramer, double log_ell, double mu_star, double beta_p, double mu_p,
                             const PredicateOptions& opt) {
    if (!(mu_p > 0.0) || !(beta_p >= 0.0)) throw ValidationError("need mu' > 0 and beta' >= 0");
    if (!(mu_star > 0.0)) throw ValidationError("mu* must be positive");
    Feasibility out;
    const double ln_p0 = cramer.min_value() == 0.0 ? std::log(cramer.prob_min()) : kNegInf;
    out.precondition = ln_p0 < -log_ell / mu_star;
    const double mu = mu_p - opt.mu_shift;
    if (!(mu > mu_star)) {
        out.margin = kNegInf;
        out.argmin_pi = mu > 0.0 ? std::min(1.0, mu / mu_star) : 0.0;
        return out;
    }
    auto margin = [&](double pi) {
        const double den = mu - pi * mu_star;
        return cramer(beta_p * mu * log_ell / den + opt.slack) - (1.0 - pi) * log_ell / den;
    };
    const std::size_t n = opt.pi_grid + 1;
    double best = kInf;
    std::size_t arg = 0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double v = margin(static_cast<double>(j) / static_cast<double>(n));
        if (v < best) {
            best = v;
            arg = j;
        }
    }
    double best_pi = static_cast<double>(arg) / static_cast<double>(n);
    // golden-section refinement in the two neighbouring cells
    double a = static_cast<double>(arg == 0 ? 0 : arg - 1) / static_cast<double>(n);
    double b = static_cast<double>(std::min(arg + 1, n)) / static_cast<double>(n);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = margin(x1), f2 = margin(x2);
    for (int it = 0; it < 60 && b - a > 1e-14; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = margin(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = margin(x2);
        }
    }
    for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}})
        if (f < best) {
            best = f;
            best_pi = x;
        }
    out.margin = best;
    out.argmin_pi = best_pi;
    out.feasible = out.precondition && best > 0.0;
    return out;
}

Feasibility feasible_thm5(const DiceDistribution& dice, std::size_t ell, double mu_star, double beta_p, double mu_p,
                          std::size_t pi_grid_size) {
    if (ell < 2) throw ValidationError("ell must be >= 2");
    PredicateOptions opt;
    opt.pi_grid = pi_grid_size;
    return feasibility_scan(CramerFn(dice), std::log(static_cast<double>(ell)), mu_star, beta_p, mu_p, opt);
}

Feasibility feasible_thm6(const CramerFn& cramer_err, double log_ell, double mu_star_rat, bool rat_precondition,
                          double beta_p, double mu_p, std::size_t pi_grid_size) {
    PredicateOptions opt;
    opt.pi_grid = pi_grid_size;
    Feasibility f = feasibility_scan(cramer_err, log_ell, mu_star_rat, beta_p, mu_p, opt);
    // the error kernel's own P{Y=0} plays no role here; the stock kernel's does
    f.precondition = rat_precondition;
    f.feasible = rat_precondition && f.margin > 0.0;
    return f;
}

Feasibility feasible_thm6(const DiceDistribution& dice_err, std::size_t ell, double mu_star_rat, bool rat_precondition,
                          double beta_p, double mu_p, std::size_t pi_grid_size) {
    if (ell < 2) throw ValidationError("ell must be >= 2");
    return feasible_thm6(CramerFn(dice_err), std::log(static_cast<double>(ell)), mu_star_rat, rat_precondition, beta_p,
                         mu_p, pi_grid_size);
}

std::vector<double> beta_grid(double beta_star, std::size_t count) {
    if (count < 2) throw ValidationError("beta grid needs at least 2 points");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) g[i] = beta_star * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

namespace {

void require_precondition(const CramerFn& c, double log_ell, double mu_star) {
    const double ln_p0 = c.min_value() == 0.0 ? std::log(c.prob_min()) : kNegInf;
    if (!(ln_p0 < -log_ell / mu_star))
        throw InfeasibleError("P{Y=0} = " + std::to_string(c.min_value() == 0.0 ? c.prob_min() : 0.0) +
                              " is not below ell^(-1/mu*) = " + std::to_string(std::exp(-log_ell / mu_star)));
}

}  // namespace

TradeoffRegion region_boundary(const CramerFn& cramer, double log_ell, double mu_star, const std::vector<double>& grid,
                               std::string label) {
    require_precondition(cramer, log_ell, mu_star);
    TradeoffRegion r;
    r.label = std::move(label);
    r.method = "predicate-scan";
    r.mu_star = mu_star;
    r.beta_star = cramer.mean() / log_ell;
    for (double b : grid) {
        double lo = 0.0, hi = 1.0 / mu_star, lo_margin = 0.0;
        if (b < r.beta_star) {
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Feasibility f = feasibility_scan(cramer, log_ell, mu_star, b, 1.0 / mid);
                if (f.feasible) {
                    lo = mid;
                    lo_margin = f.margin;
                } else {
                    hi = mid;
                }
            }
        }
        r.boundary.push_back({b, lo, lo_margin});
    }
    return r;
}

TradeoffRegion region_boundary(const DiceDistribution& dice, std::size_t ell, double mu_star,
                               const std::vector<double>& grid, std::string label) {
    return region_boundary(CramerFn(dice), std::log(static_cast<double>(ell)), mu_star, grid, std::move(label));
}

TradeoffRegion region_hull(const CramerFn& cramer, double log_ell, double mu_star, const std::vector<double>& grid,
                           std::string label) {
    require_precondition(cramer, log_ell, mu_star);
    TradeoffRegion r;
    r.label = std::move(label);
    r.method = "hull";
    r.mu_star = mu_star;
    const double bstar = cramer.mean() / log_ell;
    r.beta_star = bstar;
    auto f = [&](double b) { return cramer(b * log_ell) / log_ell; };
    const double apex = 1.0 / mu_star;
    for (double beta : grid) {
        double h;
        if (beta >= bstar) {
            h = 0.0;
        } else if (beta <= 0.0) {
            h = std::min(apex, f(0.0));
        } else {
            // chords from the apex to graph points (b, f(b)) with b in (beta, b*]
            auto chord = [&](double b) { return (1.0 - beta / b) * apex + (beta / b) * f(b); };
            constexpr int kSamples = 2000;
            double best = chord(bstar), best_b = bstar;
            for (int i = 1; i < kSamples; ++i) {
                const double b = beta + (bstar - beta) * i / kSamples;
                const double v = chord(b);
                if (v < best) {
                    best = v;
                    best_b = b;
                }
            }
            const double step = (bstar - beta) / kSamples;
            double a = std::max(beta + 1e-15, best_b - step), c = std::min(bstar, best_b + step);
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            for (int it = 0; it < 80 && c - a > 1e-15; ++it) {
                const double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
                if (chord(x1) < chord(x2))
                    c = x2;
                else
                    a = x1;
            }
            best = std::min(best, chord(0.5 * (a + c)));
            h = std::min(f(beta), best);
        }
        r.boundary.push_back({beta, std::max(0.0, h), 0.0});
    }
    return r;
}

TradeoffRegion region_hull(const DiceDistribution& dice, std::size_t ell, double mu_star,
                           const std::vector<double>& grid, std::string label) {
    return region_hull(CramerFn(dice), std::log(static_cast<double>(ell)), mu_star, grid, std::move(label));
}

std::pair<double, double> q_point(double beta_p, double mu_p, double mu_star, double pi) {
    const double den = mu_p - pi * mu_star;
    if (!(den > 0.0)) throw ValidationError("q_point needs mu' > pi * mu*");
    return {beta_p * mu_p / den, (1.0 - pi) / den};
}

double rs_bound(double ell, double y) {
    if (!(ell > std::exp(1.0))) throw ValidationError("rs_bound needs ell > e");
    if (!(y >= 0.0) || y > rs_ystar(ell) * (1.0 + 1e-12)) throw ValidationError("rs_bound needs 0 <= y <= y*");
    const double L = std::log(ell);
    return (L - y) * (1.0 - 1.0 / L) - std::log(L);
}

double rs_ystar(double ell) {
    if (!(ell > std::exp(1.0))) throw ValidationError("rs_ystar needs ell > e");
    const double L = std::log(ell);
    return L - std::log(L) / (1.0 - 1.0 / L);
}

RsChoice choose_rs_parameters(double beta_p, double mu_p, double mu_star_rat, unsigned max_k) {
    if (!(mu_p > 0.0)) throw ValidationError("mu' must be positive");
    const double v = 1.0 / mu_p;
    if (!(beta_p > 0.0 && v > 0.0 && beta_p + 2.0 * v < 1.0))
        throw ValidationError("target (" + std::to_string(beta_p) + ", " + std::to_string(v) +
                              ") is outside the triangle (0,1/2)-(0,0)-(1,0)");
    if (max_k > 62) throw ValidationError("k is limited to 62");
    double best_margin = kNegInf;
    for (unsigned k = 1; k <= max_k; ++k) {
        const std::uint64_t ell = std::uint64_t{1} << k;
        const CramerFn c = CramerFn::uniform_log(ell);
        const Feasibility f = feasible_thm6(c, k * std::log(2.0), mu_star_rat, true, beta_p, mu_p);
        best_margin = std::max(best_margin, f.margin);
        if (f.feasible) return {k, ell, f.margin};
    }
    std::ostringstream msg;
    msg << "no k <= " << max_k << " certifies (" << beta_p << ", " << v << ") with mu*_rat = " << mu_star_rat
        << "; best margin " << best_margin;
    throw InfeasibleError(msg.str());
}

void curve_emit_csv(std::ostream& out, const std::vector<TradeoffRegion>& regions,
                    const std::vector<std::string>& metadata) {
    for (const auto& m : metadata) out << "# " << m << '\n';
    out << "label,beta_p,inv_mu_p,margin\n";
    std::ostringstream row;
    row << std::setprecision(10);
    for (const auto& r : regions)
        for (const auto& p : r.boundary) row << r.label << ',' << p.beta_p << ',' << p.inv_mu_p << ',' << p.margin << '\n';
    out << row.str();
}

void curve_emit_svg(std::ostream& out, const std::vector<TradeoffRegion>& regions, const std::string& title) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 30, B = 50;
    auto px = [&](double b) { return L + b * (W - L - R); };
    auto py = [&](double v) { return H - B - v / 0.5 * (H - T - B); };
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};
    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    s << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\"" << py(0.5)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 10; ++i) {
        s << "<text x=\"" << px(i / 10.0) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << std::setprecision(1) << i / 10.0 << std::setprecision(2) << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        s << "<text x=\"" << px(0) - 6 << "\" y=\"" << py(i / 10.0) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
          << std::setprecision(1) << i / 10.0 << std::setprecision(2) << "</text>\n";
    }
    s << "<text x=\"" << px(0.5) << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">beta'</text>\n";
    s << "<text x=\"16\" y=\"" << py(0.25) << "\" font-size=\"12\" transform=\"rotate(-90 16 " << py(0.25)
      << ")\">1/mu'</text>\n";
    s << "<polygon points=\"" << px(0) << ',' << py(0.5) << ' ' << px(0) << ',' << py(0) << ' ' << px(1) << ','
      << py(0) << "\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\" class=\"triangle\"/>\n";
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        const char* color = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : r.boundary) s << px(p.beta_p) << ',' << py(std::min(p.inv_mu_p, 0.5)) << ' ';
        s << "\"/>\n";
        s << "<text x=\"" << px(0.62) << "\" y=\"" << T + 14 * (i + 1) << "\" font-size=\"11\" fill=\"" << color
          << "\">" << r.label << "</text>\n";
    }
    s << "</svg>\n";
    out << s.str();
}

}  // namespace polarforge
