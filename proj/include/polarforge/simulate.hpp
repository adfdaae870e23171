#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polarforge/logmath.hpp"
#include "polarforge/tree.hpp"

namespace polarforge {

struct SimConfig {
    std::uint64_t trials = 10000;
    std::uint64_t seed = 1;
    std::optional<double> eps_override;  // base erasure probability; default is the root channel's
    unsigned shards = 0;                 // 0: worker_count()
    bool block_grouping = false;         // child use j reads parent uses j*ell .. j*ell+ell-1
    std::size_t word_budget = std::size_t{1} << 24;  // 64-trial words held per batch
};

struct LeafStat {
    NodeId leaf = 0;
    std::uint64_t uses = 0;      // channel uses of this leaf per block
    std::uint64_t erasures = 0;  // over uses * trials
    double rate = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // 95% Wilson
    double predicted = 0.0;           // Z of the leaf under the simulated eps
    double ln_predicted = 0.0;
};

struct SimReport {
    std::uint64_t trials = 0;
    std::uint64_t block_length = 0;  // base-field uses per block
    double eps = 0.0;
    std::vector<LeafStat> leaves;  // one per id of A, in A's order
    std::uint64_t block_errors = 0;
    double bler = 0.0;
    double bler_ci_lo = 0.0, bler_ci_hi = 0.0;
    /// sum over A of uses * Z under the simulated eps (exact use counts).
    double union_bound = 0.0;
    /// The same sum with N P(w) weights, as error_bound reports it.
    LogReal formula_bound;
};

/// Genie-aided successive-cancellation erasure simulation, 64 trials per machine word.
/// Deterministic for a fixed seed regardless of thread count.
SimReport simulate(const ChannelTree& tree, std::span<const NodeId> a, const SimConfig& cfg);

struct UnionCheck {
    bool ok = true;
    double slack = 0.0;  // 4 binomial standard deviations at the bound
    std::string message;
};

/// Flags (does not throw) when the empirical block error rate exceeds the union bound by more
/// than 4 binomial standard deviations.
UnionCheck verify_union_bound(const SimReport& r);

/// 95% Wilson interval for k successes in n trials.
std::pair<double, double> wilson_interval(std::uint64_t k, std::uint64_t n);

}  // namespace polarforge
