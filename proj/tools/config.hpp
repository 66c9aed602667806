#pragma once

// Experiment configuration: TOML files plus command-line overrides.

#include "gq/geom.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gq::cli {

struct Tolerances {
    double newton = 1e-12;        // flow: moment-map Newton residual relative to k
    double monotonicity = 1e-9;   // flow: allowed drop of f between grid points
    double chain = 1e-8;          // flow: Cauchy-Schwarz chain slack
    double inequality = 1e-8;     // lower-bound: ||s - S|| >= bound - tolerance
    double refinement = 1e-8;     // exact backend: norm quadrature refinement

    Tolerances scaled(double factor) const;
};

struct ExperimentConfig {
    std::string command;
    // manifold: a preset name ("cp1", "interval2", "square", "triangle",
    // "hirzebruch", "t2") or a polytope JSON file
    std::string manifold = "cp1";
    std::string polytope_file;
    double epsilon = 0.0;
    int quadrature_order = 64;
    int spectral_grid = 128;
    double spectral_window = 1.0;  // C1; non-positive selects the automatic window

    std::vector<int> ks;
    std::vector<Eigen::VectorXd> directions;
    int samples = 20;
    std::uint64_t seed = 7;
    double t_min = 1e-3;
    Tolerances tolerances;
    double tolerance_scale = 1.0;

    std::string output = "out";
    std::string cache;  // directory for QSPACE files, empty disables caching
    int threads = 1;

    bool spectral() const { return manifold == "t2"; }
    Tolerances effective_tolerances() const { return tolerances.scaled(tolerance_scale); }
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// "a..b", "a..b:step" or a comma-separated list. Throws ConfigError.
std::vector<int> parse_k_range(const std::string& text);

/// Reads a TOML file; parse errors and bad fields throw ConfigError with the
/// file, line and field. Missing keys keep their defaults.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// Polytope from a preset name or a JSON file
///   {"name": "...", "facets": [{"normal": [1, 0], "offset": "0"}, ...]}
/// or {"preset": "hirzebruch"}.
DelzantPolytope load_polytope(const std::string& name_or_path);

/// Structure for the configured manifold, with epsilon * prod l_f^2 added to the potential.
AlmostKahlerStructure make_structure(const ExperimentConfig& config);

}  // namespace gq::cli
