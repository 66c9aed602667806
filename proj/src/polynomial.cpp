#include "gq/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gq {

Polynomial::Polynomial(int variables, int degree)
    : variables_(variables), degree_(degree), c_((degree + 1) * (degree + 1), 0.0) {
    if (variables < 1 || variables > 2) throw std::invalid_argument("Polynomial: 1 or 2 variables");
}

Polynomial Polynomial::constant(int variables, double value) {
    Polynomial p(variables, 0);
    p.coeff(0, 0) = value;
    return p;
}

Polynomial Polynomial::affine(double constant_term, const Eigen::VectorXd& linear) {
    Polynomial p(static_cast<int>(linear.size()), 1);
    p.coeff(0, 0) = constant_term;
    p.coeff(1, 0) = linear(0);
    if (linear.size() > 1) p.coeff(0, 1) = linear(1);
    return p;
}

bool Polynomial::is_zero() const {
    return std::all_of(c_.begin(), c_.end(), [](double v) { return v == 0.0; });
}

double Polynomial::operator()(const Eigen::VectorXd& x) const {
    const double y = variables_ > 1 ? x(1) : 0.0;
    double acc = 0.0;
    for (int i = degree_; i >= 0; --i) {
        double row = 0.0;
        for (int j = degree_; j >= 0; --j) row = row * y + coeff(i, j);
        acc = acc * x(0) + row;
    }
    return acc;
}

Polynomial Polynomial::derivative(int variable) const {
    Polynomial d(variables_, std::max(degree_ - 1, 0));
    if (variable >= variables_) return d;
    for (int i = 0; i <= degree_; ++i)
        for (int j = 0; j <= degree_; ++j) {
            const double c = coeff(i, j);
            if (c == 0.0) continue;
            if (variable == 0 && i > 0) d.coeff(i - 1, j) += c * i;
            if (variable == 1 && j > 0) d.coeff(i, j - 1) += c * j;
        }
    return d;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial r(std::max(variables_, o.variables_), degree_ + o.degree_);
    for (int i = 0; i <= degree_; ++i)
        for (int j = 0; j <= degree_; ++j) {
            const double a = coeff(i, j);
            if (a == 0.0) continue;
            for (int p = 0; p <= o.degree_; ++p)
                for (int q = 0; q <= o.degree_; ++q) r.coeff(i + p, j + q) += a * o.coeff(p, q);
        }
    return r;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial r(std::max(variables_, o.variables_), std::max(degree_, o.degree_));
    for (int i = 0; i <= degree_; ++i)
        for (int j = 0; j <= degree_; ++j) r.coeff(i, j) += coeff(i, j);
    for (int i = 0; i <= o.degree_; ++i)
        for (int j = 0; j <= o.degree_; ++j) r.coeff(i, j) += o.coeff(i, j);
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r = *this;
    for (double& v : r.c_) v *= s;
    return r;
}

}  // namespace gq
