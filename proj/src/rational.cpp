#include "gq/rational.hpp"

#include "gq/error.hpp"

#include <cctype>

namespace gq {

Rational parse_rational(const std::string& raw) {
    std::string text;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) text.push_back(c);
    if (text.empty()) throw FormatError("rational", "empty number");
    try {
        auto slash = text.find('/');
        if (slash != std::string::npos) {
            BigInt num(text.substr(0, slash));
            BigInt den(text.substr(slash + 1));
            if (den == 0) throw FormatError("rational", "zero denominator in '" + raw + "'");
            return Rational(num, den);
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) return Rational(BigInt(text));
        std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        if (digits == "-" || digits == "+" || digits.empty()) digits += "0";
        BigInt den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        return Rational(BigInt(digits), den);
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("rational", "cannot parse '" + raw + "'");
    }
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string to_string(const Rational& r) {
    const auto num = boost::multiprecision::numerator(r);
    const auto den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

bool interpolate_exact(const std::vector<long>& xs, const std::vector<Rational>& ys, int degree,
                       std::vector<Rational>& coefficients) {
    const int m = degree + 1;
    if (static_cast<int>(xs.size()) < m || xs.size() != ys.size()) return false;

    // Newton divided differences on the first m nodes, then expand.
    std::vector<Rational> dd(ys.begin(), ys.begin() + m);
    for (int j = 1; j < m; ++j)
        for (int i = m - 1; i >= j; --i) dd[i] = (dd[i] - dd[i - 1]) / Rational(xs[i] - xs[i - j]);

    std::vector<Rational> poly(m, Rational(0));
    poly[0] = dd[m - 1];
    int len = 1;
    for (int j = m - 2; j >= 0; --j) {
        // poly <- poly * (x - xs[j]) + dd[j]
        std::vector<Rational> next(m, Rational(0));
        for (int i = 0; i < len; ++i) {
            next[i + 1] += poly[i];
            next[i] -= poly[i] * Rational(xs[j]);
        }
        next[0] += dd[j];
        poly = std::move(next);
        ++len;
    }
    coefficients = poly;
    for (std::size_t i = m; i < xs.size(); ++i)
        if (evaluate(coefficients, Rational(xs[i])) != ys[i]) return false;
    return true;
}

Rational evaluate(const std::vector<Rational>& c, const Rational& x) {
    Rational acc = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

}  // namespace gq
