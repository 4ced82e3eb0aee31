#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpm/model.hpp"

namespace lpm {

struct GradCheckGroup {
    std::string name;
    double max_abs_diff = 0.0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    int points = 0;
    double step = 0.0;
    std::vector<GradCheckGroup> groups;  // worst case per parameter group

    bool pass(double tol = 1e-4) const { return max_rel_err < tol; }
    std::string to_json() const;
};

/// Analytic batch gradients vs central finite differences at `points` random
/// parameter draws. Draws whose forward pass comes too close to a branch cut
/// (fold points, vanishing arg modulus) are rejected and redrawn.
///
/// Relative error is normed per point: max_i |a_i - f_i| over the max
/// magnitude of either gradient (floored at 1e-8).
GradCheckReport check_gradients(Model& model, const std::vector<SequenceSample>& batch,
                                int points, double step, std::uint64_t seed);

}  // namespace lpm
