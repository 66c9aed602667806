#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace gq {

/// Power-law fit r_k ~ C k^p by least squares in log-log coordinates.
struct DecayFit {
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double log_constant = 0.0;
    /// Every residual lies below the floor: the exponent is reported as -infinity.
    bool at_floor = false;
    int points_used = 0;
};

/// Residuals below `floor` are dropped from the regression; if all are, at_floor is set.
DecayFit fit_decay(const std::vector<double>& ks, const std::vector<double>& residuals, double floor = 1e-12);

/// Pearson correlation; NaN when either sample is constant to relative 1e-8.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace gq
