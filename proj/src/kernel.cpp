#include "polarforge/kernel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <random>

#include "polarforge/errors.hpp"
#include "polarforge/logmath.hpp"
#include "polarforge/parallel.hpp"

namespace polarforge {

DiceDistribution DiceDistribution::make(std::vector<DiceAtom> atoms) {
    if (atoms.empty()) throw ValidationError("dice needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.y >= 0.0) || !std::isfinite(a.y)) throw ValidationError("dice values must be finite and >= 0");
        if (!(a.p >= 0.0)) throw ValidationError("dice probabilities must be >= 0");
        total += a.p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("dice probabilities must sum to 1");
    std::sort(atoms.begin(), atoms.end(), [](const DiceAtom& a, const DiceAtom& b) { return a.y < b.y; });
    DiceDistribution d;
    for (const auto& a : atoms) {
        if (a.p == 0.0) continue;
        if (!d.support.empty() && d.support.back().y == a.y)
            d.support.back().p += a.p;
        else
            d.support.push_back(a);
    }
    for (const auto& a : d.support) d.mean += a.p * a.y;
    return d;
}

double DiceDistribution::prob_below(double y) const {
    double p = 0.0;
    for (const auto& a : support)
        if (a.y < y) p += a.p;
    return p;
}

namespace {

std::uint64_t binomial(std::size_t n, std::size_t k) {
    std::uint64_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<std::uint32_t> patterns_gf2(const Matrix& rows) {
    const std::size_t ell = rows.rows();
    std::vector<std::uint32_t> masks(ell);
    for (std::size_t r = 0; r < ell; ++r)
        for (std::size_t c = 0; c < ell; ++c)
            if (rows(r, c)) masks[r] |= 1u << c;
    std::vector<std::uint32_t> out(std::size_t{1} << ell);
    parallel_chunks(out.size(), [&](std::size_t b, std::size_t e) {
        std::array<std::uint32_t, 32> basis{};
        for (std::size_t s = b; s < e; ++s) {
            const std::uint32_t keep = ~static_cast<std::uint32_t>(s);
            basis.fill(0);
            std::uint32_t erased = 0;
            for (std::size_t r = ell; r-- > 0;) {
                std::uint32_t v = masks[r] & keep;
                while (v) {
                    const int top = 31 - std::countl_zero(v);
                    if (!basis[top]) break;
                    v ^= basis[top];
                }
                if (v)
                    basis[31 - std::countl_zero(v)] = v;
                else
                    erased |= 1u << r;
            }
            out[s] = erased;
        }
    });
    return out;
}

std::vector<std::uint32_t> patterns_general(const Field& f, const Matrix& rows) {
    const std::size_t ell = rows.rows();
    std::vector<std::uint32_t> out(std::size_t{1} << ell);
    parallel_chunks(out.size(), [&](std::size_t b, std::size_t e) {
        std::vector<std::size_t> cols;
        std::vector<Element> v;
        for (std::size_t s = b; s < e; ++s) {
            cols.clear();
            for (std::size_t c = 0; c < ell; ++c)
                if (!(s >> c & 1)) cols.push_back(c);
            SpanBasis basis(f, cols.size());
            std::uint32_t erased = 0;
            for (std::size_t r = ell; r-- > 0;) {
                v.resize(cols.size());
                for (std::size_t j = 0; j < cols.size(); ++j) v[j] = rows(r, cols[j]);
                if (basis.insert(v)) erased |= 1u << r;
            }
            out[s] = erased;
        }
    });
    return out;
}

}  // namespace

KernelPtr kernel_load(FieldPtr field, const Matrix& rows, std::string name) {
    if (!field) throw ValidationError("kernel needs a field");
    const std::size_t ell = rows.rows();
    if (ell != rows.cols()) throw ValidationError("kernel matrix must be square");
    if (ell < 2) throw ValidationError("kernel size must be >= 2");
    if (ell > kMaxEnumerableEll)
        throw BudgetError("kernel size " + std::to_string(ell) + " exceeds the enumeration limit of " +
                          std::to_string(kMaxEnumerableEll));
    for (std::size_t r = 0; r < ell; ++r)
        for (std::size_t c = 0; c < ell; ++c)
            if (!field->valid(rows(r, c)))
                throw ValidationError("entry (" + std::to_string(r + 1) + "," + std::to_string(c + 1) +
                                      ") = " + std::to_string(rows(r, c)) + " outside " + field->name());
    if (mat_rank(*field, rows) != ell) throw ValidationError("kernel matrix is singular");

    std::shared_ptr<Kernel> k(new Kernel());
    k->field_ = std::move(field);
    k->ell_ = ell;
    k->rows_ = rows;
    k->name_ = std::move(name);
    k->patterns_ = k->field_->q() == 2 ? patterns_gf2(rows) : patterns_general(*k->field_, rows);

    k->table_.ell = ell;
    k->table_.counts.assign(ell, std::vector<std::uint64_t>(ell + 1, 0));
    for (std::size_t s = 0; s < k->patterns_.size(); ++s) {
        const auto size = static_cast<std::size_t>(std::popcount(static_cast<std::uint32_t>(s)));
        for (std::uint32_t m = k->patterns_[s]; m; m &= m - 1) ++k->table_.counts[std::countr_zero(m)][size];
    }

    k->ln_counts_.assign(ell, std::vector<double>(ell + 1, kNegInf));
    k->ln_complement_.assign(ell, std::vector<double>(ell + 1, kNegInf));
    k->distances_.assign(ell, 0);
    for (std::size_t i = 0; i < ell; ++i) {
        for (std::size_t s = 0; s <= ell; ++s) {
            const std::uint64_t a = k->table_.counts[i][s], c = binomial(ell, s) - a;
            if (a) k->ln_counts_[i][s] = std::log(static_cast<double>(a));
            if (c) k->ln_complement_[i][s] = std::log(static_cast<double>(c));
            if (a && k->distances_[i] == 0) k->distances_[i] = static_cast<unsigned>(s);
        }
    }
    std::vector<DiceAtom> atoms;
    for (auto d : k->distances_) {
        k->branch_dice_.push_back(std::log(static_cast<double>(d)));
        atoms.push_back({k->branch_dice_.back(), 1.0 / static_cast<double>(ell)});
    }
    k->dice_ = DiceDistribution::make(std::move(atoms));

    // sup of eps_i/eps on a logistic grid, and the eps -> 0 limit for rows with d_i = 1
    double sup = 1.0;
    for (std::size_t i = 0; i < ell; ++i)
        if (k->distances_[i] == 1) sup = std::max(sup, static_cast<double>(k->table_.counts[i][1]));
    constexpr int kGrid = 10000;
    for (int g = 0; g < kGrid; ++g) {
        const double t = -30.0 + 60.0 * g / (kGrid - 1);
        const double ln_eps = -std::log1p(std::exp(-t)), ln_cap = -std::log1p(std::exp(t));
        for (std::size_t i = 0; i < ell; ++i) sup = std::max(sup, std::exp(k->child_logs(i, ln_eps, ln_cap).first - ln_eps));
    }
    k->op_norm_ = sup * (1.0 + 1e-9);
    return k;
}

KernelPtr kernel_load(FieldPtr field, const std::vector<std::vector<Element>>& rows, std::string name) {
    return kernel_load(std::move(field), Matrix::from_rows(rows), std::move(name));
}

namespace {

// Keeps the better-conditioned side and derives the other, so Z + I = 1 survives tiny Z.
std::pair<double, double> complementary(double le, double lc) {
    le = std::min(0.0, le);
    lc = std::min(0.0, lc);
    if (le < -0.6931471805599453) return {le, log1m_exp(le)};
    return {log1m_exp(lc), lc};
}

}  // namespace

std::pair<double, double> Kernel::child_logs(std::size_t i, double ln_eps, double ln_cap) const {
    std::array<double, kMaxEnumerableEll + 1> te{}, tc{};
    for (std::size_t s = 0; s <= ell_; ++s) {
        const double base = (s ? static_cast<double>(s) * ln_eps : 0.0) +
                            (s < ell_ ? static_cast<double>(ell_ - s) * ln_cap : 0.0);
        te[s] = ln_counts_[i][s] == kNegInf ? kNegInf : ln_counts_[i][s] + base;
        tc[s] = ln_complement_[i][s] == kNegInf ? kNegInf : ln_complement_[i][s] + base;
    }
    return complementary(log_sum_exp({te.data(), ell_ + 1}), log_sum_exp({tc.data(), ell_ + 1}));
}

void Kernel::child_logs_all(double eps, double ln_eps, double ln_cap,
                            std::vector<std::pair<double, double>>& out) const {
    out.resize(ell_);
    if (eps >= 1e-6 && eps <= 1.0 - 1e-6) {
        std::array<double, kMaxEnumerableEll + 1> pe{}, pc{};
        const double cap = std::exp(ln_cap);
        pe[0] = pc[0] = 1.0;
        for (std::size_t s = 1; s <= ell_; ++s) {
            pe[s] = pe[s - 1] * eps;
            pc[s] = pc[s - 1] * cap;
        }
        for (std::size_t i = 0; i < ell_; ++i) {
            double e = 0.0, c = 0.0;
            for (std::size_t s = 0; s <= ell_; ++s) {
                const double term = pe[s] * pc[ell_ - s];
                const std::uint64_t a = table_.counts[i][s];
                e += static_cast<double>(a) * term;
                c += static_cast<double>(binomial(ell_, s) - a) * term;
            }
            out[i] = complementary(std::log(e), std::log(c));
        }
        return;
    }
    for (std::size_t i = 0; i < ell_; ++i) out[i] = child_logs(i, ln_eps, ln_cap);
}

std::vector<std::uint32_t> Kernel::minimal_erasure_sets(std::size_t i) const {
    std::vector<std::uint32_t> out;
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t s = 0; s < patterns_.size(); ++s) {
        if (!(patterns_[s] & bit)) continue;
        bool minimal = true;
        for (std::uint32_t m = s; m && minimal; m &= m - 1)
            minimal = !(patterns_[s & ~(m & (~m + 1))] & bit);
        if (minimal) out.push_back(s);
    }
    return out;
}

const ErasureTable& erasure_table(const Kernel& k) { return k.table(); }

std::vector<ErasureChannel> synthetic_children(const Kernel& k, const ErasureChannel& ch) {
    if (!k.same_field(*ch.field))
        throw ValidationError("channel over " + ch.field->name() + " does not match kernel over " + k.field()->name());
    std::vector<std::pair<double, double>> logs;
    k.child_logs_all(ch.eps, ch.ln_eps, ch.ln_cap, logs);
    std::vector<ErasureChannel> out;
    out.reserve(logs.size());
    for (auto [le, lc] : logs) out.push_back(qec_from_logs(ch.field, std::min(le, 0.0), std::min(lc, 0.0)));
    return out;
}

const std::vector<unsigned>& partial_distances(const Kernel& k) { return k.distances(); }
const DiceDistribution& dice(const Kernel& k) { return k.dice(); }

double beta_star(const DiceDistribution& dice, std::size_t ell) {
    if (ell < 2) throw ValidationError("ell must be >= 2");
    return dice.mean / std::log(static_cast<double>(ell));
}

double op_norm(const Kernel& k) { return k.op_norm(); }

bool is_powerful(const DiceDistribution& dice) {
    return std::any_of(dice.support.begin(), dice.support.end(), [](const DiceAtom& a) { return a.y > 0.0 && a.p > 0.0; });
}

KernelPtr rs_kernel(FieldPtr field) {
    if (!field || field->q() < 2) throw ValidationError("field too small for a Reed-Solomon kernel");
    const std::size_t ell = field->q();
    Matrix m(ell, ell);
    for (std::size_t j = 0; j < ell; ++j)
        for (std::size_t c = 0; c < ell; ++c) m(j, c) = field->pow(static_cast<Element>(c), ell - 1 - j);
    return kernel_load(field, m, "rs" + std::to_string(ell));
}

KernelPtr random_kernel(FieldPtr field, std::size_t ell, std::uint64_t seed) {
    if (!field) throw ValidationError("kernel needs a field");
    if (ell < 2) throw ValidationError("kernel size must be >= 2");
    if (ell > kMaxEnumerableEll) throw BudgetError("kernel size exceeds the enumeration limit");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Element> pick(0, field->q() - 1);
    Matrix m(ell, ell);
    for (;;) {
        for (std::size_t r = 0; r < ell; ++r)
            for (std::size_t c = 0; c < ell; ++c) m(r, c) = pick(rng);
        if (mat_rank(*field, m) == ell) break;
    }
    return kernel_load(field, m, "random" + std::to_string(ell) + "-" + std::to_string(seed));
}

KernelPtr kronecker_kernel(const Kernel& a, const Kernel& b) {
    if (!(*a.field() == *b.field())) throw ValidationError("kronecker factors must share a field");
    return kernel_load(a.field(), kronecker(*a.field(), a.rows(), b.rows()), a.name() + "x" + b.name());
}

KernelPtr arikan_kernel() {
    static const KernelPtr k = kernel_load(Field::standard(2, 1), Matrix::from_rows({{1, 0}, {1, 1}}), "arikan");
    return k;
}

KernelPtr identity_kernel(FieldPtr field, std::size_t ell) {
    return kernel_load(std::move(field), Matrix::identity(ell), "identity" + std::to_string(ell));
}

}  // namespace polarforge
