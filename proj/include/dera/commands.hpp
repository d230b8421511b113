#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dera/config.hpp"

namespace dera {

struct OracleCheckParams {
    int n_tuples = 200;
    int grid_points = 200000;
    double half_span_sigmas = 8.0; // grid reaches this many SDs past each mean
    std::uint64_t seed = 2025;
    double tolerance = 1e-4;
    int composition_checks = 50;
    double composition_tolerance = 1e-10;
};

/// Runs every (anchor, target) realignment cell, compares against seeded
/// from-scratch baselines, writes sweep.csv and sweep_summary.json under
/// out_dir. Returns a process exit status.
int cmd_sweep(const ExperimentConfig& config, const std::string& out_dir, int threads,
              std::ostream& log);

/// Bayesian-optimizes lambda against the sweep's reward estimator; writes
/// bo_history.csv and bo_result.json.
int cmd_bo(const ExperimentConfig& config, const std::string& out_dir, int threads,
           std::ostream& log);

/// Closed-form-vs-grid oracle comparison plus tilt-composition checks; writes
/// oracle_check.csv when out_dir is nonempty. Exit 0 iff all within tolerance.
int cmd_oracle_check(const OracleCheckParams& params, const std::string& out_dir,
                     std::ostream& log);

/// One realigned sampling run; dumps samples.csv, samples.json and, when
/// recording is enabled, trajectory.csv.
int cmd_sample(const ExperimentConfig& config, const std::string& out_dir, int threads,
               std::ostream& log);

} // namespace dera
