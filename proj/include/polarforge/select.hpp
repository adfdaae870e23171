#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polarforge/kernel.hpp"
#include "polarforge/tree.hpp"

namespace polarforge {

enum class SelectMode { Threshold, Recyclable, Disposable, Graft };
const char* select_mode_name(SelectMode m);

struct SelectionParams {
    SelectMode mode = SelectMode::Threshold;
    unsigned n = 0;
    unsigned s = 0;  // 0: ceil(sqrt(n))
    double eps = 0.0;
    double ln_delta = 0.0;
    double upsilon = 0.0;
    // disposable and graft
    double beta_p = 0.0;
    double mu_p = 0.0;
    double mu_star = 0.0;
    unsigned n_rat = 0;  // 0: round(n mu* / mu')
};

/// Probability measures in units of 1/unit (unit = lcm of leaf 1/P, so all are integers).
struct RoundDiag {
    unsigned m = 0;
    std::uint64_t a = 0, b = 0, c = 0, d = 0, e = 0, a0 = 0, e0 = 0;
    double f = 0.0;  // I(W) - a0 (disposable and graft)
    double g = 0.0;  // I(W) - e0
};

struct SelectionDiagnostics {
    std::uint64_t unit = 1;
    double capacity = 0.0;  // I(W) of the root
    SelectMode mode = SelectMode::Threshold;
    std::vector<RoundDiag> rounds;
    std::vector<std::string> notes;

    double measure(std::uint64_t x) const { return static_cast<double>(x) / static_cast<double>(unit); }
    /// b = a, c + d + e = b, e0 and a0 telescoping, f and g consistent; lists failures in `why`.
    bool identities_hold(std::string* why = nullptr) const;
};

struct SelectionResult {
    std::vector<NodeId> a;              // retained leaves, ascending ids
    std::vector<unsigned> recruit_depth;  // parallel to a: depth m of the recruit round
    SelectionDiagnostics diag;
};

/// Leaves with Z < threshold; a threshold >= 1 admits every leaf.
std::vector<NodeId> select_threshold(const ChannelTree& tree, LogReal threshold);

struct SpectrumSelection {
    std::vector<std::size_t> classes;  // indices into the spectrum
    std::uint64_t leaves = 0;
    double rate = 0.0;
    LogReal error_bound;  // sum of Z over selected leaves (N P(w) = 1 on a perfect tree)
};
SpectrumSelection select_threshold(const LeafSpectrum& sp, LogReal threshold);
/// Largest prefix (by ascending Z) whose summed Z stays <= budget.
SpectrumSelection select_by_budget(const LeafSpectrum& sp, LogReal budget);
/// The ceil(rate * N) best leaves.
SpectrumSelection select_by_rate(const LeafSpectrum& sp, double rate);

/// Fills s (and n_rat for disposable) from n and the other fields; records rounding notes.
SelectionParams resolve_params(SelectionParams p, std::vector<std::string>* notes = nullptr);

SelectionResult select_recyclable(const ChannelTree& tree, const SelectionParams& params);
SelectionResult select_disposable(const ChannelTree& tree, const SelectionParams& params);
/// Convenience forms that build the perfect tree first.
SelectionResult select_recyclable(const ErasureChannel& w, const KernelPtr& t, const SelectionParams& params,
                                  std::size_t node_budget = kDefaultNodeBudget);
SelectionResult select_disposable(const ErasureChannel& w, const KernelPtr& t, const SelectionParams& params,
                                  std::size_t node_budget = kDefaultNodeBudget);

/// Retain machinery on the error-kernel subtrees below the recorded recruits.
SelectionResult select_on_grafted(const GraftedTree& g, const SelectionParams& params);

struct CertificateReport {
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::vector<std::string> failures;  // first few
    bool ok() const { return failed == 0; }
};

/// Recomputes every retained leaf's path quantities from the tree alone: no delta hit in the
/// window, the dice-sum inequality, and the telescoped empirical gain bound.
CertificateReport check_certificates(const ChannelTree& tree, const SelectionResult& r, const SelectionParams& params);

struct MuStarRow {
    double eps;
    unsigned n;
    double log_n;
    double rate;
    double gap;
    double estimate;
};

struct MuStarEstimate {
    std::vector<MuStarRow> rows;
    double summary = 0.0;  // max over channels of the last-n estimate (a limsup proxy)
};

MuStarEstimate estimate_mu_star(const Kernel& t, const std::vector<double>& eps_grid, unsigned n_lo, unsigned n_hi);

struct CodePoint {
    double log_n;     // ln N
    double rate;
    double ln_p;      // ln P
    double capacity;  // I(W)
};

struct ExponentSeries {
    std::vector<double> beta_hat;    // log(-log P) / log N, NaN when skipped
    std::vector<double> inv_mu_hat;  // -log(I - R) / log N, NaN when skipped
    std::vector<double> beta_running_min, inv_mu_running_min;
    std::vector<bool> skipped;  // R >= I or P outside (0,1)
};

ExponentSeries empirical_exponents(const std::vector<CodePoint>& series);

}  // namespace polarforge
