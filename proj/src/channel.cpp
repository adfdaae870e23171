#include "polarforge/channel.hpp"

#include <cmath>

#include "polarforge/errors.hpp"
#include "polarforge/logmath.hpp"

namespace polarforge {

ErasureChannel qec_make(FieldPtr field, double eps) {
    if (!field) throw ValidationError("channel needs a field");
    if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("erasure probability must lie in [0,1]");
    ErasureChannel ch;
    ch.field = std::move(field);
    ch.eps = eps;
    ch.ln_eps = eps > 0.0 ? std::log(eps) : kNegInf;
    ch.ln_cap = eps < 1.0 ? std::log1p(-eps) : kNegInf;
    return ch;
}

ErasureChannel qec_from_logs(FieldPtr field, double ln_eps, double ln_cap) {
    if (!field) throw ValidationError("channel needs a field");
    if (!(ln_eps <= 0.0) || !(ln_cap <= 0.0)) throw ValidationError("log-probabilities must be <= 0");
    ErasureChannel ch;
    ch.field = std::move(field);
    ch.ln_eps = ln_eps;
    ch.ln_cap = ln_cap;
    ch.eps = eps_from_logs(ln_eps, ln_cap);
    return ch;
}

std::pair<double, double> power_logs(double ln_eps, double ln_cap, unsigned k) {
    if (k < 1) throw ValidationError("power k must be >= 1");
    const double kd = static_cast<double>(k);
    if (ln_eps < -30.0) {
        // 1 - (1-eps)^k = k eps (1 - (k-1) eps / 2 + ...), ln(1 - eps) may have underflowed to 0
        const double eps = std::exp(ln_eps);
        return {ln_eps + std::log(kd) + std::log1p(-0.5 * (kd - 1.0) * eps), std::min(0.0, -kd * eps)};
    }
    if (ln_eps < -0.6931471805599453) {
        const double cap = kd * std::log1p(-std::exp(ln_eps));
        return {std::log(-std::expm1(cap)), cap};
    }
    const double cap = ln_cap == kNegInf ? kNegInf : ln_cap * kd;
    return {log1m_exp(cap), cap};
}

ErasureChannel power_channel(const ErasureChannel& ch, unsigned k) {
    if (k < 1) throw ValidationError("power k must be >= 1");
    if (k == 1) return ch;
    FieldPtr ext = Field::standard(ch.field->p(), ch.field->e() * k);
    auto [ln_eps, ln_cap] = power_logs(ch.ln_eps, ch.ln_cap, k);
    return qec_from_logs(std::move(ext), ln_eps, ln_cap);
}

}  // namespace polarforge
