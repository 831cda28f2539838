#pragma once

#include <cstdint>
#include <string>

#include "nullflow/flow.hpp"

namespace nullflow {

/// Fully validated run configuration loaded from an INI-style file.
struct Scenario {
    std::string name;  // file stem, used to label artifacts
    EvolutionSetup setup;
    int refinements = 3;
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: caller picks
    double pass_rtol = 1e-4;
    double min_order = 0.8;
};

/// Parse and validate scenario text. Collects every problem it can find and
/// throws a single ScenarioError listing all of them with line numbers.
Scenario parse_scenario(const std::string& text, const std::string& origin);

Scenario load_scenario(const std::string& path);

}  // namespace nullflow
