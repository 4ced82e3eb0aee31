#include "lpm/gradcheck.hpp"

#include <cmath>

#include <json.hpp>

#include "lpm/rng.hpp"
#include "lpm/train.hpp"

namespace lpm {

namespace {
constexpr double kMinAbsCos = 0.1;   // distance from fold points
constexpr double kMinModulus = 1e-3;  // distance from the arg singularity
constexpr int kMaxDrawAttempts = 200;

bool point_is_safe(Model& model, const std::vector<SequenceSample>& batch) {
    ForwardProbe probe;
    for (const auto& s : batch) model.predict_probed(s.context, probe);
    return probe.min_abs_cos > kMinAbsCos && probe.min_modulus > kMinModulus;
}
}  // namespace

std::string GradCheckReport::to_json() const {
    nlohmann::json j;
    j["max_rel_err"] = max_rel_err;
    j["points"] = points;
    j["step"] = step;
    j["pass"] = pass();
    nlohmann::json groups_json = nlohmann::json::array();
    for (const auto& g : groups)
        groups_json.push_back(
            {{"group", g.name}, {"max_abs_diff", g.max_abs_diff}, {"max_rel_err", g.max_rel_err}});
    j["groups"] = groups_json;
    return j.dump(2) + "\n";
}

GradCheckReport check_gradients(Model& model, const std::vector<SequenceSample>& batch,
                                int points, double step, std::uint64_t seed) {
    require(points >= 1, "check_gradients", "points must be >= 1");
    require(step > 0.0, "check_gradients", "step must be positive");
    require(!batch.empty(), "check_gradients", "empty batch");

    GradCheckReport report;
    report.points = points;
    report.step = step;
    for (const auto& [name, size] : model.param_groups())
        report.groups.push_back({name, 0.0, 0.0});

    const TrainConfig defaults;  // phase init range for redraws
    int attempts = 0;
    for (int p = 0; p < points; ++p) {
        do {
            require(attempts < kMaxDrawAttempts, "check_gradients",
                    "could not find a parameter point away from branch cuts");
            model.init(substream_seed(seed, static_cast<std::uint64_t>(attempts++)),
                       defaults.init_lo, defaults.init_hi);
        } while (!point_is_safe(model, batch));

        RealVec analytic;
        model.batch_loss_and_grad(batch, LossKind::mse, analytic);

        RealVec& params = model.flat_params();
        RealVec numeric(params.size(), 0.0);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + step;
            const double up = model.batch_loss(batch, LossKind::mse);
            params[i] = saved - step;
            const double down = model.batch_loss(batch, LossKind::mse);
            params[i] = saved;
            numeric[i] = (up - down) / (2.0 * step);
        }

        double scale = 1e-8;
        for (std::size_t i = 0; i < params.size(); ++i)
            scale = std::max({scale, std::fabs(analytic[i]), std::fabs(numeric[i])});

        std::size_t off = 0;
        std::size_t gi = 0;
        for (const auto& [name, size] : model.param_groups()) {
            double worst = 0.0;
            for (std::size_t i = off; i < off + size; ++i)
                worst = std::max(worst, std::fabs(analytic[i] - numeric[i]));
            report.groups[gi].max_abs_diff = std::max(report.groups[gi].max_abs_diff, worst);
            report.groups[gi].max_rel_err =
                std::max(report.groups[gi].max_rel_err, worst / scale);
            report.max_rel_err = std::max(report.max_rel_err, worst / scale);
            off += size;
            ++gi;
        }
    }
    return report;
}

}  // namespace lpm
