#include "lpm/train.hpp"

#include <chrono>
#include <cmath>

namespace lpm {

void adam_step(RealVec& params, const RealVec& grad, AdamState& state, double lr) {
    require(params.size() == grad.size(), "adam_step",
            "shape mismatch: params " + std::to_string(params.size()) + " vs grad " +
                std::to_string(grad.size()));
    require(state.m.size() == params.size() && state.v.size() == params.size(), "adam_step",
            "moment buffers do not match parameter shape");
    require(all_finite(grad), "adam_step", "non-finite gradient");
    require(lr > 0.0, "adam_step", "learning rate must be positive");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

TrainResult train_model(Model& model, const DatasetSplit& data, const TrainConfig& cfg) {
    require(cfg.epochs >= 0, "train", "epochs must be >= 0");
    require(cfg.learning_rate > 0.0, "train", "learning_rate must be positive");
    require(!data.train.empty(), "train", "empty training split");

    const auto t0 = std::chrono::steady_clock::now();
    model.init(cfg.seed, cfg.init_lo, cfg.init_hi);

    TrainResult res;
    res.param_count = model.param_count();
    res.curve.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    res.curve.push_back(model.batch_loss(data.train, cfg.loss));

    AdamState adam;
    adam.m.assign(model.param_count(), 0.0);
    adam.v.assign(model.param_count(), 0.0);
    RealVec grad;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        try {
            model.batch_loss_and_grad(data.train, cfg.loss, grad);
            adam_step(model.flat_params(), grad, adam, cfg.learning_rate);
        } catch (const Error& e) {
            throw Error("train", "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double loss = model.batch_loss(data.train, cfg.loss);
        if (!std::isfinite(loss))
            throw Error("train", "non-finite loss at epoch " + std::to_string(epoch));
        res.curve.push_back(loss);
        if (loss > cfg.divergence_factor * std::max(res.curve.front(), 1e-12))
            throw Error("train", "diverged at epoch " + std::to_string(epoch) + " (loss " +
                                     std::to_string(loss) + ")");
    }

    res.train_final = evaluate(model, data.train);
    if (!data.val.empty()) res.val = evaluate(model, data.val);
    if (!data.test.empty()) res.test = evaluate(model, data.test);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

Metrics evaluate(const Model& model, const std::vector<SequenceSample>& samples) {
    require(!samples.empty(), "evaluate", "empty sample set");
    double se = 0.0, ae = 0.0;
    for (const auto& s : samples) {
        const double p = model.predict(s.context);
        const double d = p - s.target;
        se += d * d;
        ae += std::fabs(d);
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    return {se * inv, ae * inv};
}

double constant_predictor_mae(const std::vector<SequenceSample>& train,
                              const std::vector<SequenceSample>& eval) {
    require(!train.empty() && !eval.empty(), "evaluate", "empty sample set");
    double mean = 0.0;
    for (const auto& s : train) mean += s.target;
    mean /= static_cast<double>(train.size());
    double ae = 0.0;
    for (const auto& s : eval) ae += std::fabs(mean - s.target);
    return ae / static_cast<double>(eval.size());
}

RolloutResult rollout(const Model& model, const RealVec& context, std::size_t steps) {
    require(steps >= 1, "rollout", "steps must be >= 1");
    require(!context.empty(), "rollout", "empty context");
    RealVec window = context;
    RolloutResult res;
    res.predictions.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        const double p = model.predict(window);
        if (!std::isfinite(p)) {
            res.truncated = true;
            break;
        }
        res.predictions.push_back(p);
        window.erase(window.begin());
        window.push_back(p);
    }
    return res;
}

}  // namespace lpm
