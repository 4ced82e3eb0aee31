#include "lpm/dft.hpp"

#include <cmath>
#include <utility>

namespace lpm {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

void fft_radix2(RealVec& re, RealVec& im, bool inverse) {
    const std::size_t n = re.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t base = 0; base < n; base += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::size_t a = base + k, b = base + k + len / 2;
                const double xr = re[b] * cr - im[b] * ci;
                const double xi = re[b] * ci + im[b] * cr;
                re[b] = re[a] - xr;
                im[b] = im[a] - xi;
                re[a] += xr;
                im[a] += xi;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

void dft_direct(ComplexVec& z, bool inverse) {
    const std::size_t n = z.size();
    RealVec wr(n), wi(n);  // w^m = e^{-+i 2pi m/n}
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t m = 0; m < n; ++m) {
        const double a = sgn * kTwoPi * static_cast<double>(m) / static_cast<double>(n);
        wr[m] = std::cos(a);
        wi[m] = std::sin(a);
    }
    RealVec ore(n, 0.0), oim(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double sr = 0.0, si = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t m = (k * t) % n;
            sr += z.re[t] * wr[m] - z.im[t] * wi[m];
            si += z.re[t] * wi[m] + z.im[t] * wr[m];
        }
        ore[k] = sr;
        oim[k] = si;
    }
    z.re = std::move(ore);
    z.im = std::move(oim);
}

}  // namespace

void dft_inplace(ComplexVec& z, bool inverse) {
    const std::size_t n = z.size();
    require(n >= 1, "dft", "empty input");
    if (is_pow2(n))
        fft_radix2(z.re, z.im, inverse);
    else
        dft_direct(z, inverse);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        z.re[i] *= s;
        z.im[i] *= s;
    }
}

ComplexVec dft(const ComplexVec& z) {
    ComplexVec out = z;
    dft_inplace(out, false);
    return out;
}

ComplexVec idft(const ComplexVec& z) {
    ComplexVec out = z;
    dft_inplace(out, true);
    return out;
}

}  // namespace lpm
