#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "polarforge/kernel.hpp"
#include "polarforge/tradeoff.hpp"

namespace polarforge {

/// Exit codes of run_pipeline.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFlagged = 2;

/// Parses `args` (without the program name) and dispatches a subcommand.
int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string kernel_analysis_header();
std::string kernel_analysis_row(const Kernel& k);

struct FigureSet {
    std::string stem;
    std::vector<TradeoffRegion> regions;
    std::vector<std::pair<std::string, std::string>> meta;
};

/// Arikan/BEC pair, Arikan/BDMC pair and the RS_{2^k} family for k = 1..4.
std::vector<FigureSet> figure_sets();
/// Writes <stem>.csv and <stem>.svg per figure set; returns the written paths.
std::vector<std::filesystem::path> reproduce_figures(const std::filesystem::path& dir);

}  // namespace polarforge
