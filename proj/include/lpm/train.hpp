#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpm/data.hpp"
#include "lpm/model.hpp"
#include "lpm/types.hpp"

namespace lpm {

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 100;
    double init_lo = -kPi / 10.0;  // phase-parameter init range
    double init_hi = kPi / 10.0;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::mse;
    double divergence_factor = 1e3;  // abort when loss exceeds this x initial
};

struct AdamState {
    RealVec m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// One bias-corrected Adam update, in place.
void adam_step(RealVec& params, const RealVec& grad, AdamState& state, double lr);

struct Metrics {
    double mse = 0.0, mae = 0.0;
};

struct TrainResult {
    RealVec curve;  // train loss per epoch; index 0 is the initialized model
    Metrics train_final, val, test;
    double wall_seconds = 0.0;
    std::size_t param_count = 0;
};

/// Full-batch training: init from config seed, one Adam step per epoch,
/// post-update train loss recorded per epoch, held-out metrics at the end.
/// Deterministic given the config.
TrainResult train_model(Model& model, const DatasetSplit& data, const TrainConfig& cfg);

Metrics evaluate(const Model& model, const std::vector<SequenceSample>& samples);

/// MAE of predicting the mean train target everywhere; a floor any trained
/// model should beat.
double constant_predictor_mae(const std::vector<SequenceSample>& train,
                              const std::vector<SequenceSample>& eval);

struct RolloutResult {
    RealVec predictions;
    bool truncated = false;  // stopped early on a non-finite prediction
};

/// Autoregressive continuation: predict, append, slide. The window is
/// re-encoded from scratch each step, so the decode scale tracks the current
/// (partially generated) window.
RolloutResult rollout(const Model& model, const RealVec& context, std::size_t steps);

}  // namespace lpm
