#pragma once

// Subcommands of the experiment runner. Each returns a process exit status.

#include "config.hpp"
#include "output.hpp"

#include <ostream>

namespace gq::cli {

int dim_count_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
/// Fits a0, a1 on the round sphere, derives kappa and stores it in the manifest.
int calibrate_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int bergman_fit_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int embed_check_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int futaki_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int lower_bound_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int flow_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);
int qop_command(const ExperimentConfig& config, OutputSink& sink, std::ostream& log);

/// Dispatches on config.command, validates the config and commits the manifest.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace gq::cli
