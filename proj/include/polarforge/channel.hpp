#pragma once

#include <cmath>
#include <utility>

#include "polarforge/field.hpp"
#include "polarforge/logmath.hpp"

namespace polarforge {

/// q-ary erasure channel. The erasure probability is carried both linearly and
/// as ln(eps) / ln(1 - eps) so that values far below double range stay exact.
struct ErasureChannel {
    FieldPtr field;
    double eps = 0.0;
    double ln_eps = kNegInf;
    double ln_cap = 0.0;  // ln(1 - eps)

    double z_param() const { return eps; }
    /// Per-symbol capacity, 1 - eps.
    double capacity() const { return 1.0 - eps; }
    std::uint32_t q() const { return field->q(); }
};

/// Linear erasure probability from the log pair, using whichever side is better conditioned.
inline double eps_from_logs(double ln_eps, double ln_cap) {
    return ln_eps < -0.6931471805599453 ? std::exp(ln_eps) : -std::expm1(ln_cap);
}

/// Throws ValidationError unless 0 <= eps <= 1.
ErasureChannel qec_make(FieldPtr field, double eps);

/// Channel from its log-domain pair; ln_eps <= 0 and ln_cap <= 0 must describe
/// complementary probabilities (not checked beyond sign).
ErasureChannel qec_from_logs(FieldPtr field, double ln_eps, double ln_cap);

/// Packages k uses into one use over the degree-k extension: erased iff any constituent is.
/// The result field is Field::standard(p, e*k).
ErasureChannel power_channel(const ErasureChannel& ch, unsigned k);

/// Same erasure rule without constructing the extension field (for q^k beyond table range).
/// Returns ln_eps, ln_cap of 1 - (1 - eps)^k.
std::pair<double, double> power_logs(double ln_eps, double ln_cap, unsigned k);

}  // namespace polarforge
