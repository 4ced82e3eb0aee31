#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpm/autodiff.hpp"
#include "lpm/model.hpp"
#include "lpm/types.hpp"

namespace lpm {

/// Single-layer post-norm encoder: scalar embedding, multi-head
/// self-attention, tanh feed-forward, readout from the last position.
/// Trainable parameter count is independent of context length (3329 at the
/// default sizes).
struct AttnConfig {
    std::size_t d_model = 16;
    std::size_t heads = 4;
    std::size_t d_ff = 64;
    std::size_t context_len = 32;
    std::size_t input_dim = 1;
};

std::size_t count_params(const AttnConfig& cfg);
std::size_t mixing_param_count(const AttnConfig& cfg);  // QKV + out proj weights: 4 d^2
std::size_t ffn_param_count(const AttnConfig& cfg);     // two linear layer weights: 8 d^2

/// Optional capture of attention internals for inspection/tests.
struct AttnTrace {
    std::vector<std::vector<RealVec>> head_attention;  // [head][row] -> weights
};

class AttentionModel : public Model {
public:
    explicit AttentionModel(AttnConfig cfg);

    const AttnConfig& config() const { return cfg_; }

    std::string name() const override { return "attention"; }
    std::size_t param_count() const override { return count_params(cfg_); }
    RealVec& flat_params() override { return flat_; }
    const RealVec& flat_params() const override { return flat_; }
    std::vector<std::pair<std::string, std::size_t>> param_groups() const override;
    void init(std::uint64_t seed, double lo, double hi) override;

    double predict(const RealVec& context) const override;
    double predict_probed(const RealVec& context, ForwardProbe& probe) const override;
    double predict_traced(const RealVec& context, AttnTrace& trace) const;

    double batch_loss_and_grad(const std::vector<SequenceSample>& samples, LossKind kind,
                               RealVec& grad) override;
    double batch_loss(const std::vector<SequenceSample>& samples,
                      LossKind kind) const override;

    std::vector<ad::NodeRef> register_leaves(ad::Tape& t) const;
    ad::NodeRef forward_on_tape(ad::Tape& t, const std::vector<ad::NodeRef>& leaves,
                                const RealVec& context, AttnTrace* trace = nullptr) const;

    std::string checkpoint_json() const override;
    static AttentionModel from_checkpoint_json(const std::string& text);

private:
    AttnConfig cfg_;
    RealVec flat_;
};

/// Token-mixing stage only (per-head scaled scores, softmax, weighted sum),
/// on plain buffers. Used for complexity measurements.
void attention_mix(const RealVec& q, const RealVec& k, const RealVec& v, std::size_t n,
                   std::size_t d_model, std::size_t heads, RealVec& out,
                   RealVec& scores_scratch);

}  // namespace lpm
