#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "polarforge/kernel.hpp"
#include "polarforge/select.hpp"
#include "polarforge/simulate.hpp"
#include "polarforge/tree.hpp"

namespace polarforge {

inline constexpr const char* kToolVersion = "polarforge 0.1.0";

/// Kernel text: `q ell name`, then ell rows of ell field-element codes. Blank lines and
/// `#` comments are skipped. Errors name the offending line.
KernelPtr parse_kernel_text(const std::string& text, const std::string& source = "<string>");
KernelPtr load_kernel_file(const std::filesystem::path& path);
void write_kernel_text(std::ostream& out, const Kernel& k);

/// Built-in kernels by name: arikan, rs4, rs8, arikan2 (Arikan Kronecker square).
KernelPtr builtin_kernel(const std::string& name);
/// A builtin name or a file path.
KernelPtr resolve_kernel(const std::string& name_or_path, const std::filesystem::path& base = {});

struct GraftSpec {
    unsigned k = 1;
    unsigned n = 0;
    double mu_star_rat = 0.0;
    double mu_p = 0.0;
    KernelPtr err;
};

/// Sectioned recipe:
///   [channel]  q eps
///   [schedule] depth kernel        (repeated; kernel applied `depth` times in order)
///   [graft]    k n mu_star_rat mu_prime err-kernel
struct Recipe {
    std::uint32_t q = 2;
    double eps = 0.5;
    std::vector<std::pair<unsigned, KernelPtr>> schedule;
    std::optional<GraftSpec> graft;

    ErasureChannel channel() const;
    unsigned depth() const;
    /// Kernel per level, flattened.
    std::vector<KernelPtr> levels() const;
};

Recipe parse_recipe_text(const std::string& text, const std::filesystem::path& base = {},
                         const std::string& source = "<string>");
Recipe load_recipe_file(const std::filesystem::path& path);

/// The recipe's tree; grafted recipes build the stock-prune-graft tree.
struct BuiltTree {
    std::optional<ChannelTree> plain;
    std::optional<GraftedTree> grafted;
    const ChannelTree& get() const { return grafted ? grafted->tree : *plain; }
};
BuiltTree build_recipe(const Recipe& r, std::size_t node_budget = kDefaultNodeBudget);

struct Preset {
    std::string name;
    std::string kernel;  // builtin kernel name
    double mu_star;
    std::string citation;
};
const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);

/// `# key: value` header lines.
void write_metadata(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta);

/// A.csv: header `leaf_id,ln_z`.
void write_a_csv(std::ostream& out, const ChannelTree& tree, const std::vector<NodeId>& a,
                 const std::vector<std::pair<std::string, std::string>>& meta = {});
std::vector<NodeId> read_a_csv(const std::string& text, const std::string& source = "<string>");

void write_diag_csv(std::ostream& out, const SelectionDiagnostics& d,
                    const std::vector<std::pair<std::string, std::string>>& meta = {});
/// Per-leaf rows: leaf_id,path_index,depth,ln_z,p (P(w) as an exact fraction).
void write_tree_csv(std::ostream& out, const ChannelTree& tree,
                    const std::vector<std::pair<std::string, std::string>>& meta = {});
void write_sim_csv(std::ostream& out, const ChannelTree& tree, const SimReport& r,
                   const std::vector<std::pair<std::string, std::string>>& meta = {});

std::string read_text_file(const std::filesystem::path& path);
/// Shortest round-trip decimal for a double ("inf", "-inf", "nan" spelled out).
std::string fmt_double(double x);

}  // namespace polarforge
