#pragma once

#include <cstdint>
#include <vector>

#include "lpm/types.hpp"

namespace lpm {

struct ScalingResult {
    std::vector<std::size_t> sizes;
    std::vector<double> seconds;  // per-application time at each size
    double slope = 0.0;           // least-squares slope of log t vs log n
};

double loglog_slope(const std::vector<std::size_t>& sizes, const std::vector<double>& seconds);

/// Time the DFT token-mixing stage at each context length.
ScalingResult measure_phasor_mixing(const std::vector<std::size_t>& sizes, std::uint64_t seed);

/// Time the attention token-mixing stage (scores + softmax + weighted sum).
ScalingResult measure_attention_mixing(const std::vector<std::size_t>& sizes,
                                       std::uint64_t seed);

}  // namespace lpm
