#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpm {

using RealVec = std::vector<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kHalfPi = kPi / 2.0;

/// Runtime failure carrying the name of the operation that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string op, const std::string& detail)
        : std::runtime_error(op + ": " + detail), op_(std::move(op)) {}

    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

inline void require(bool cond, const char* op, const std::string& detail) {
    if (!cond) throw Error(op, detail);
}

inline bool all_finite(const RealVec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Complex vector stored as split real/imaginary arrays.
struct ComplexVec {
    RealVec re, im;

    ComplexVec() = default;
    explicit ComplexVec(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
    ComplexVec(RealVec r, RealVec i) : re(std::move(r)), im(std::move(i)) {
        require(re.size() == im.size(), "complex_vec", "re/im length mismatch");
    }

    std::size_t size() const { return re.size(); }

    double norm2() const {
        double s = 0.0;
        for (std::size_t i = 0; i < re.size(); ++i) s += re[i] * re[i] + im[i] * im[i];
        return std::sqrt(s);
    }
};

/// Fold an angle into the principal interval [-pi/2, pi/2].
///
/// Same function as arcsin(sin(phi)) but computed with an exact IEEE
/// remainder plus one reflection, so folding an already-folded value is a
/// bit-exact no-op.
inline double fold_angle(double phi) {
    double r = std::remainder(phi, kTwoPi);  // [-pi, pi]
    if (r > kHalfPi)
        r = kPi - r;
    else if (r < -kHalfPi)
        r = -kPi - r;
    return r;
}

}  // namespace lpm
