#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <vector>

namespace gq {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Parses "p", "p/q" or a finite decimal such as "-0.25".
Rational parse_rational(const std::string& text);

double to_double(const Rational& r);
std::string to_string(const Rational& r);

/// Coefficients c_0..c_d (ascending powers) of the unique polynomial of
/// degree <= `degree` through the first degree+1 points; the remaining
/// points are checked exactly. Returns false if any check fails.
bool interpolate_exact(const std::vector<long>& xs, const std::vector<Rational>& ys, int degree,
                       std::vector<Rational>& coefficients);

Rational evaluate(const std::vector<Rational>& coefficients, const Rational& x);

}  // namespace gq
