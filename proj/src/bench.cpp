#include "lpm/bench.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "lpm/attention.hpp"
#include "lpm/dft.hpp"
#include "lpm/rng.hpp"

namespace lpm {

namespace {

/// Best-of-batches timing; iteration count is calibrated first so each batch
/// is long enough for the clock.
double time_per_call(const std::function<void()>& op) {
    using clock = std::chrono::steady_clock;
    constexpr double kMinBatchSeconds = 0.01;
    constexpr int kBatches = 5;

    std::size_t iters = 1;
    for (;;) {
        const auto t0 = clock::now();
        for (std::size_t i = 0; i < iters; ++i) op();
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        if (dt >= kMinBatchSeconds) break;
        iters = (dt <= 0.0) ? iters * 8 : iters * 2;
    }
    double best = 1e300;
    for (int b = 0; b < kBatches; ++b) {
        const auto t0 = clock::now();
        for (std::size_t i = 0; i < iters; ++i) op();
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        best = std::min(best, dt / static_cast<double>(iters));
    }
    return best;
}

}  // namespace

double loglog_slope(const std::vector<std::size_t>& sizes, const std::vector<double>& seconds) {
    require(sizes.size() == seconds.size() && sizes.size() >= 2, "loglog_slope",
            "need at least two matching points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double x = std::log(static_cast<double>(sizes[i]));
        const double y = std::log(seconds[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingResult measure_phasor_mixing(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    ScalingResult res;
    res.sizes = sizes;
    for (std::size_t n : sizes) {
        Rng rng(substream_seed(seed, n));
        ComplexVec state(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double phi = rng.uniform(-kPi, kPi);
            state.re[i] = std::cos(phi);
            state.im[i] = std::sin(phi);
        }
        ComplexVec scratch(n);
        res.seconds.push_back(time_per_call([&] {
            scratch.re = state.re;
            scratch.im = state.im;
            dft_inplace(scratch, false);
        }));
    }
    res.slope = loglog_slope(res.sizes, res.seconds);
    return res;
}

ScalingResult measure_attention_mixing(const std::vector<std::size_t>& sizes,
                                       std::uint64_t seed) {
    constexpr std::size_t kDModel = 16, kHeads = 4;
    ScalingResult res;
    res.sizes = sizes;
    for (std::size_t n : sizes) {
        Rng rng(substream_seed(seed, n));
        RealVec q(n * kDModel), k(n * kDModel), v(n * kDModel);
        for (auto* buf : {&q, &k, &v})
            for (double& x : *buf) x = rng.uniform(-1.0, 1.0);
        RealVec out, scratch;
        res.seconds.push_back(
            time_per_call([&] { attention_mix(q, k, v, n, kDModel, kHeads, out, scratch); }));
    }
    res.slope = loglog_slope(res.sizes, res.seconds);
    return res;
}

}  // namespace lpm
