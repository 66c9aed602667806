#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gq {

/// Dense real polynomial in one or two variables; coefficient (i, j) multiplies x^i y^j.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(int variables, int degree);

    static Polynomial constant(int variables, double value);
    /// a_0 + a_1 x (+ a_2 y)
    static Polynomial affine(double constant_term, const Eigen::VectorXd& linear);

    int variables() const { return variables_; }
    int degree() const { return degree_; }
    bool is_zero() const;

    double& coeff(int i, int j = 0) { return c_[i * (degree_ + 1) + j]; }
    double coeff(int i, int j = 0) const { return c_[i * (degree_ + 1) + j]; }

    double operator()(const Eigen::VectorXd& x) const;
    Polynomial derivative(int variable) const;

    Polynomial operator*(const Polynomial& other) const;
    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator*(double s) const;

private:
    int variables_ = 1;
    int degree_ = 0;
    std::vector<double> c_{0.0};
};

}  // namespace gq
