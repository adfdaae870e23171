#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "polarforge/channel.hpp"
#include "polarforge/field.hpp"
#include "polarforge/linalg.hpp"

namespace polarforge {

/// Largest kernel size for which the 2^ell erasure-pattern enumeration is done.
inline constexpr std::size_t kMaxEnumerableEll = 20;

/// counts[i][s]: number of size-s erasure subsets leaving synthetic index i undetermined.
/// Indices are 0-based here; row 0 is the first (least reliable) synthetic channel.
struct ErasureTable {
    std::size_t ell = 0;
    std::vector<std::vector<std::uint64_t>> counts;
};

struct DiceAtom {
    double y;
    double p;
};

/// Finite distribution of a nonnegative random variable.
struct DiceDistribution {
    std::vector<DiceAtom> support;  // sorted by y, merged
    double mean = 0.0;

    /// Validates, sorts and merges equal values.
    static DiceDistribution make(std::vector<DiceAtom> atoms);

    double prob_zero() const { return prob_below(1e-300); }
    /// P{Y < y}.
    double prob_below(double y) const;
    double min_value() const { return support.front().y; }
};

class Kernel;
using KernelPtr = std::shared_ptr<const Kernel>;

/// Invertible ell x ell matrix over F_q with its derived erasure data.
class Kernel {
public:
    const FieldPtr& field() const { return field_; }
    std::size_t ell() const { return ell_; }
    const Matrix& rows() const { return rows_; }
    const std::string& name() const { return name_; }

    const ErasureTable& table() const { return table_; }
    const std::vector<unsigned>& distances() const { return distances_; }
    const DiceDistribution& dice() const { return dice_; }
    /// log d_i per synthetic index.
    const std::vector<double>& branch_dice() const { return branch_dice_; }
    double op_norm() const { return op_norm_; }

    /// Bit i of erased_mask(S) is set iff synthetic index i is undetermined when the
    /// columns in S are erased. Size 2^ell.
    std::uint32_t erased_mask(std::uint32_t subset) const { return patterns_[subset]; }

    /// ln eps_i and ln(1 - eps_i) of child i for a parent with the given log pair.
    std::pair<double, double> child_logs(std::size_t i, double ln_eps, double ln_cap) const;
    /// Same for every child at once; eps is the parent's linear value.
    void child_logs_all(double eps, double ln_eps, double ln_cap, std::vector<std::pair<double, double>>& out) const;

    /// Erased-column subsets, as bitmasks, that are minimal for undetermining child i.
    std::vector<std::uint32_t> minimal_erasure_sets(std::size_t i) const;

    bool same_field(const Field& f) const { return same_alphabet(*field_, f); }

private:
    friend KernelPtr kernel_load(FieldPtr, const Matrix&, std::string);
    Kernel() = default;

    FieldPtr field_;
    std::size_t ell_ = 0;
    Matrix rows_;
    std::string name_;
    ErasureTable table_;
    std::vector<std::uint32_t> patterns_;
    std::vector<std::vector<double>> ln_counts_, ln_complement_;
    std::vector<unsigned> distances_;
    std::vector<double> branch_dice_;
    DiceDistribution dice_;
    double op_norm_ = 1.0;
};

/// Validates and analyzes a square invertible matrix with 2 <= ell <= 20.
KernelPtr kernel_load(FieldPtr field, const Matrix& rows, std::string name = "kernel");
KernelPtr kernel_load(FieldPtr field, const std::vector<std::vector<Element>>& rows, std::string name = "kernel");

const ErasureTable& erasure_table(const Kernel& k);

/// Children of ch under the kernel; throws on alphabet mismatch.
std::vector<ErasureChannel> synthetic_children(const Kernel& k, const ErasureChannel& ch);

const std::vector<unsigned>& partial_distances(const Kernel& k);
const DiceDistribution& dice(const Kernel& k);

/// E[Y] / log ell.
double beta_star(const DiceDistribution& dice, std::size_t ell);
double op_norm(const Kernel& k);
bool is_powerful(const DiceDistribution& dice);

/// Row j evaluates x^(ell-j) (1-based j) at every field element, 0^0 = 1.
KernelPtr rs_kernel(FieldPtr field);
/// Uniform invertible matrix by rejection, deterministic per seed.
KernelPtr random_kernel(FieldPtr field, std::size_t ell, std::uint64_t seed);
KernelPtr kronecker_kernel(const Kernel& a, const Kernel& b);
KernelPtr arikan_kernel();
KernelPtr identity_kernel(FieldPtr field, std::size_t ell);

struct RecyclableConstants {
    double upsilon;   // the base, e^u
    double ln_upsilon;
    double eps;
    double ln_delta;  // delta itself may underflow
};

struct DisposableConstants {
    double eps;
    double ln_delta;
};

/// Checks: for every ln eps' in a geometric grid from ln_delta deep into the log domain
/// and every i, log(log eps_i(eps') / log eps') > log d_i - eps.
bool formula142_check(const Kernel& k, double eps, double ln_delta);

/// Largest ln delta (by bisection) satisfying both the supermartingale balance
/// |T|^eps P{Y<2eps} + delta^(eps^2) P{Y>=2eps} <= 1 and formula142_check.
double pick_delta(const Kernel& k, double eps);

RecyclableConstants pick_constants_recyclable(const Kernel& k, double mu_star);

/// Requires the feasibility predicate for (beta_p, 1/mu_p); the kernel supplies the
/// erasure polynomials needed for delta.
DisposableConstants pick_constants_disposable(const Kernel& k, double mu_star, double beta_p, double mu_p);

}  // namespace polarforge
