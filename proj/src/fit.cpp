#include "gq/fit.hpp"

#include "gq/error.hpp"

#include <cmath>

namespace gq {

DecayFit fit_decay(const std::vector<double>& ks, const std::vector<double>& residuals, double floor) {
    if (ks.size() != residuals.size()) throw FitError("fit_decay", "size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (residuals[i] > floor) {
            lx.push_back(std::log(ks[i]));
            ly.push_back(std::log(residuals[i]));
        }
    DecayFit fit;
    fit.points_used = static_cast<int>(lx.size());
    if (lx.empty()) {
        fit.at_floor = true;
        fit.exponent = -std::numeric_limits<double>::infinity();
        return fit;
    }
    if (lx.size() < 2) throw FitError("fit_decay", "fewer than two residuals above the floor");
    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double den = n * sxx - sx * sx;
    if (den <= 0) throw FitError("fit_decay", "degenerate abscissae");
    fit.exponent = (n * sxy - sx * sy) / den;
    fit.log_constant = (sy - fit.exponent * sx) / n;
    return fit;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
    const double na = std::sqrt((da * da).sum()), nb = std::sqrt((db * db).sum());
    const double scale = std::sqrt(static_cast<double>(a.size()));
    if (na <= 1e-8 * scale * (1.0 + a.cwiseAbs().maxCoeff()) || nb <= 1e-8 * scale * (1.0 + b.cwiseAbs().maxCoeff()))
        return std::numeric_limits<double>::quiet_NaN();
    return (da * db).sum() / (na * nb);
}

}  // namespace gq
