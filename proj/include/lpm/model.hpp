#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpm/data.hpp"
#include "lpm/types.hpp"

namespace lpm {

enum class LossKind { mse, mae };

/// Diagnostics from a forward pass, used to keep gradient-check sample
/// points away from non-smooth regions (phase folds, vanishing moduli).
struct ForwardProbe {
    double min_abs_cos = 1.0;   // over inputs of every phase fold
    double min_modulus = 1e30;  // over inputs of every arg extraction
};

/// Trainable model over fixed-length context windows. Parameters are a flat
/// vector with a named-segment layout owned by the concrete model.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string name() const = 0;
    virtual std::size_t param_count() const = 0;
    virtual RealVec& flat_params() = 0;
    virtual const RealVec& flat_params() const = 0;

    /// (name, size) segments in flat layout order.
    virtual std::vector<std::pair<std::string, std::size_t>> param_groups() const = 0;

    /// Seeded re-initialization. lo/hi give the uniform range for phase
    /// parameters; models with their own scheme (fan-in scaling) ignore them.
    virtual void init(std::uint64_t seed, double lo, double hi) = 0;

    virtual double predict(const RealVec& context) const = 0;
    virtual double predict_probed(const RealVec& context, ForwardProbe& probe) const = 0;

    /// Mean loss over the batch plus parameter gradient (same flat layout).
    /// Refuses samples tagged from_test.
    virtual double batch_loss_and_grad(const std::vector<SequenceSample>& samples,
                                       LossKind kind, RealVec& grad) = 0;
    virtual double batch_loss(const std::vector<SequenceSample>& samples,
                              LossKind kind) const = 0;

    virtual std::string checkpoint_json() const = 0;
};

}  // namespace lpm
