#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpm/autodiff.hpp"
#include "lpm/model.hpp"
#include "lpm/types.hpp"

namespace lpm {

enum class Encoding { amplitude_norm, tanh_map };

std::string encoding_name(Encoding e);
Encoding encoding_from_name(const std::string& name);

/// Structure of a depth-D phasor stack over T token threads.
///
/// Trainable parameters: one pre- and one post-shift vector (T angles each)
/// per block, plus an optional readout shift, so (2D+1)*T angles with the
/// readout shift and 2D*T without.
struct LpmConfig {
    std::size_t context_len = 10;  // T
    std::size_t depth = 1;         // D
    bool readout_shift = true;
    std::size_t readout_thread = 0;
    Encoding encoding = Encoding::amplitude_norm;
    bool pullback_between_blocks = true;
};

std::size_t count_params(const LpmConfig& cfg);

/// Per-block shift angles, kept as explicit vectors for serialization.
struct LpmParams {
    std::vector<RealVec> pre;   // depth vectors of length T
    std::vector<RealVec> post;  // depth vectors of length T
    RealVec readout;            // length T, or empty when absent

    static LpmParams zeros(const LpmConfig& cfg);
    std::size_t count() const;
    RealVec flatten() const;
    static LpmParams unflatten(const LpmConfig& cfg, const RealVec& flat);
};

struct Encoded {
    ComplexVec state;  // unit-modulus threads
    RealVec phases;
    double scale = 1.0;  // max|x| for amplitude_norm (1 for a zero window)
};

/// Map a context window onto the torus. amplitude_norm: phi = x/max|x| * pi/2;
/// tanh_map: phi = pi * tanh(x).
Encoded encode(const RealVec& x, Encoding enc);

/// Invert the encoding for a single output phase.
double decode_phase(double phase, double scale, Encoding enc);

// Plain state-space kernels; the autodiff ops compute the same arithmetic.
ComplexVec shift(const ComplexVec& z, const RealVec& theta);
ComplexVec dft_mix(const ComplexVec& z);
ComplexVec pullback(const ComplexVec& z);
ComplexVec block(const ComplexVec& z, const RealVec& pre, const RealVec& post);

class PhasorModel : public Model {
public:
    explicit PhasorModel(LpmConfig cfg);
    PhasorModel(LpmConfig cfg, LpmParams params);

    const LpmConfig& config() const { return cfg_; }
    LpmParams params() const;  // structured copy of the flat vector

    std::string name() const override { return "phasor"; }
    std::size_t param_count() const override { return count_params(cfg_); }
    RealVec& flat_params() override { return flat_; }
    const RealVec& flat_params() const override { return flat_; }
    std::vector<std::pair<std::string, std::size_t>> param_groups() const override;
    void init(std::uint64_t seed, double lo, double hi) override;

    double predict(const RealVec& context) const override;
    double predict_probed(const RealVec& context, ForwardProbe& probe) const override;

    double batch_loss_and_grad(const std::vector<SequenceSample>& samples, LossKind kind,
                               RealVec& grad) override;
    double batch_loss(const std::vector<SequenceSample>& samples,
                      LossKind kind) const override;

    /// Registers every parameter vector as a tape leaf (flat layout order).
    std::vector<ad::NodeRef> register_leaves(ad::Tape& t) const;
    ad::NodeRef forward_on_tape(ad::Tape& t, const std::vector<ad::NodeRef>& leaves,
                                const RealVec& context) const;

    std::string checkpoint_json() const override;
    static PhasorModel from_checkpoint_json(const std::string& text);

private:
    LpmConfig cfg_;
    RealVec flat_;

    double forward_kernel(const RealVec& context, ForwardProbe* probe) const;
};

}  // namespace lpm
