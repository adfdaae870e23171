#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polarforge/channel.hpp"
#include "polarforge/kernel.hpp"
#include "polarforge/logmath.hpp"

namespace polarforge {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;
inline constexpr std::size_t kDefaultNodeBudget = std::size_t{1} << 22;

enum class Transform : std::uint8_t { Leaf, Kernel, Power };

struct TreeNode {
    double ln_z = kNegInf;    // ln Z = ln eps
    double ln_i = 0.0;        // ln I = ln(1 - eps)
    double log_inv_prob = 0;  // ln(1/P(v))
    NodeId parent = kNoNode;
    NodeId first_child = kNoNode;
    std::uint16_t num_children = 0;
    std::uint16_t depth = 0;   // kernel depth; a power child shares its parent's depth
    std::uint16_t branch = 0;  // index among the parent's children
    Transform kind = Transform::Leaf;
    std::uint8_t field_id = 0;
    std::uint16_t op = 0;      // kernel registry index, or k for a power node
};

/// Rooted tree of erasure channels. Children of a vertex are stored contiguously.
class ChannelTree {
public:
    explicit ChannelTree(const ErasureChannel& root, std::size_t node_budget = kDefaultNodeBudget);

    NodeId root() const { return 0; }
    std::size_t size() const { return nodes_.size(); }
    const TreeNode& node(NodeId v) const { return nodes_.at(v); }
    ErasureChannel channel(NodeId v) const;
    bool is_leaf(NodeId v) const { return nodes_.at(v).kind == Transform::Leaf; }
    std::span<const TreeNode> nodes() const { return nodes_; }

    /// Kernel applied at v (v must be a kernel vertex).
    const Kernel& kernel_at(NodeId v) const;
    const std::vector<KernelPtr>& kernels() const { return kernels_; }
    /// log d of the branch taken into v from its kernel parent; nullopt under a power vertex or at the root.
    std::optional<double> dice_into(NodeId v) const;

    /// Expands leaf v with the kernel; returns the id of the first of ell children.
    NodeId apply_kernel(NodeId v, const KernelPtr& kernel);
    /// Expands leaf v with T_C^k; returns the single child's id.
    NodeId apply_power(NodeId v, unsigned k);

    std::vector<NodeId> leaves() const;
    std::vector<NodeId> path(NodeId v) const;  // root .. v
    std::size_t node_budget() const { return budget_; }

    /// The common T_C^k parameter, 1 if no power vertex exists.
    unsigned k_power() const { return k_power_; }
    bool has_power() const { return has_power_; }

    /// True iff every root-to-leaf path passes exactly one power vertex, a single kernel is
    /// used above and a single kernel below (trees without power vertices conform trivially).
    bool power_convention_ok(std::string* why = nullptr) const;

private:
    NodeId allocate(std::size_t count);
    std::uint8_t field_index(const FieldPtr& f);
    std::uint16_t kernel_index(const KernelPtr& k);

    std::vector<TreeNode> nodes_;
    std::vector<FieldPtr> fields_;
    std::vector<KernelPtr> kernels_;
    std::size_t budget_;
    unsigned k_power_ = 1;
    bool has_power_ = false;
};

ChannelTree perfect_tree(const ErasureChannel& w, const KernelPtr& t, unsigned n,
                         std::size_t node_budget = kDefaultNodeBudget);
ChannelTree multi_tree(const ErasureChannel& w, const std::vector<KernelPtr>& schedule,
                       std::size_t node_budget = kDefaultNodeBudget);

/// 1/P(v) as an exact integer (product of kernel arities on the root path).
BigInt inverse_prob(const ChannelTree& tree, NodeId v);
Rational vertex_prob(const ChannelTree& tree, NodeId v);

/// lcm over leaves of 1/P(w), times k when a power vertex exists.
BigInt block_length(const ChannelTree& tree);
Rational code_rate_exact(const ChannelTree& tree, std::span<const NodeId> a);
double code_rate(const ChannelTree& tree, std::span<const NodeId> a);
/// sum over A of N P(w) Z(w), accumulated in the log domain.
LogReal error_bound(const ChannelTree& tree, std::span<const NodeId> a);

/// Natural log of a nonnegative big integer.
double log_big(const BigInt& x);

/// Throws ValidationError unless every id is a leaf.
void require_leaves(const ChannelTree& tree, std::span<const NodeId> a);

struct RecruitRound {
    unsigned m = 0;
    std::vector<NodeId> recruits;  // stock vertices at depth m
};

struct GraftedTree {
    ChannelTree tree;
    unsigned n = 0, n_rat = 0, s = 0, k = 1;
    std::vector<RecruitRound> rounds;
    std::vector<std::string> notes;
};

/// Stock-prune-graft: perfect T_rat stock of depth n; recruits (disposable rule) keep no
/// stock descendants; every remaining stock leaf at depth m receives T_C^k and then a
/// perfect T_err subtree of depth n - m.
GraftedTree build_grafted_tree(const ErasureChannel& w, const KernelPtr& t_rat, const KernelPtr& t_err, unsigned k,
                               unsigned n, double mu_star_rat, double mu_p,
                               std::size_t node_budget = kDefaultNodeBudget);

/// Disposable-template round schedule: s = ceil(sqrt(n)), rounds s, 2s, ... up to n_rat and below n.
std::vector<unsigned> disposable_rounds(unsigned n, unsigned n_rat, unsigned* s_out = nullptr);
unsigned rat_depth(unsigned n, double mu_star, double mu_p);

struct PathSample {
    std::vector<NodeId> nodes;                // W_0 .. W_tau
    std::vector<double> ln_z;                 // ln Z_i
    std::vector<unsigned> branch;             // X_i for i >= 1
    std::vector<std::optional<double>> y_emp;  // empirical increment for i >= 1; absent when Z_{i-1} is 0 or 1
    std::size_t tau = 0;
};

PathSample z_process_sample(const ChannelTree& tree, std::uint64_t seed);

/// Leaves of a perfect tree grouped into classes of identical (ln Z, ln I).
struct SpectrumClass {
    double ln_z;
    double ln_i;
    std::uint64_t count;
};

struct LeafSpectrum {
    std::size_t ell = 0;
    unsigned n = 0;
    double root_capacity = 0.0;
    std::vector<SpectrumClass> classes;  // sorted by ln_z ascending

    double log_leaves() const { return n * std::log(static_cast<double>(ell)); }
};

/// One more level of the perfect tree, merging exact duplicates.
LeafSpectrum advance_spectrum(const LeafSpectrum& sp, const Kernel& t, std::size_t class_budget = std::size_t{1} << 23);

/// Level-by-level evolution with exact-duplicate merging; budget bounds the class count.
LeafSpectrum perfect_spectrum(const ErasureChannel& w, const Kernel& t, unsigned n,
                              std::size_t class_budget = std::size_t{1} << 23);

}  // namespace polarforge
