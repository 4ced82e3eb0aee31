#include "lpm/phasor.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "lpm/dft.hpp"
#include "lpm/rng.hpp"

namespace lpm {

namespace {
constexpr double kZeroWindowTol = 1e-12;
constexpr double kTanhDecodeLimit = 1.0 - 1e-9;

void validate(const LpmConfig& cfg) {
    require(cfg.context_len >= 1, "lpm_config", "context_len must be >= 1");
    require(cfg.depth >= 1, "lpm_config", "depth must be >= 1");
    require(cfg.readout_thread < cfg.context_len, "lpm_config",
            "readout_thread out of range");
}
}  // namespace

std::string encoding_name(Encoding e) {
    return e == Encoding::amplitude_norm ? "amplitude_norm" : "tanh";
}

Encoding encoding_from_name(const std::string& name) {
    if (name == "amplitude_norm") return Encoding::amplitude_norm;
    if (name == "tanh") return Encoding::tanh_map;
    throw Error("lpm_config", "unknown encoding: " + name);
}

std::size_t count_params(const LpmConfig& cfg) {
    validate(cfg);
    const std::size_t per_block = 2 * cfg.context_len;
    return cfg.depth * per_block + (cfg.readout_shift ? cfg.context_len : 0);
}

LpmParams LpmParams::zeros(const LpmConfig& cfg) {
    validate(cfg);
    LpmParams p;
    p.pre.assign(cfg.depth, RealVec(cfg.context_len, 0.0));
    p.post.assign(cfg.depth, RealVec(cfg.context_len, 0.0));
    if (cfg.readout_shift) p.readout.assign(cfg.context_len, 0.0);
    return p;
}

std::size_t LpmParams::count() const {
    std::size_t n = readout.size();
    for (const auto& v : pre) n += v.size();
    for (const auto& v : post) n += v.size();
    return n;
}

RealVec LpmParams::flatten() const {
    RealVec flat;
    flat.reserve(count());
    for (std::size_t d = 0; d < pre.size(); ++d) {
        flat.insert(flat.end(), pre[d].begin(), pre[d].end());
        flat.insert(flat.end(), post[d].begin(), post[d].end());
    }
    flat.insert(flat.end(), readout.begin(), readout.end());
    return flat;
}

LpmParams LpmParams::unflatten(const LpmConfig& cfg, const RealVec& flat) {
    require(flat.size() == count_params(cfg), "lpm_params",
            "flat size " + std::to_string(flat.size()) + " does not match config count " +
                std::to_string(count_params(cfg)));
    LpmParams p = zeros(cfg);
    const std::size_t t = cfg.context_len;
    std::size_t off = 0;
    for (std::size_t d = 0; d < cfg.depth; ++d) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t, p.pre[d].begin());
        off += t;
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t, p.post[d].begin());
        off += t;
    }
    if (cfg.readout_shift) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t, p.readout.begin());
    }
    return p;
}

Encoded encode(const RealVec& x, Encoding enc) {
    require(!x.empty(), "encode", "empty window");
    require(all_finite(x), "encode", "non-finite input");
    const std::size_t n = x.size();
    Encoded e;
    e.phases.resize(n);
    if (enc == Encoding::amplitude_norm) {
        double s = 0.0;
        for (double v : x) s = std::max(s, std::fabs(v));
        if (s < kZeroWindowTol) s = 1.0;
        e.scale = s;
        for (std::size_t i = 0; i < n; ++i) e.phases[i] = (x[i] / s) * kHalfPi;
    } else {
        e.scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) e.phases[i] = kPi * std::tanh(x[i]);
    }
    e.state = ComplexVec(n);
    for (std::size_t i = 0; i < n; ++i) {
        e.state.re[i] = std::cos(e.phases[i]);
        e.state.im[i] = std::sin(e.phases[i]);
    }
    return e;
}

double decode_phase(double phase, double scale, Encoding enc) {
    if (enc == Encoding::amplitude_norm) return phase * scale / kHalfPi;
    const double u = std::clamp(phase / kPi, -kTanhDecodeLimit, kTanhDecodeLimit);
    return std::atanh(u);
}

ComplexVec shift(const ComplexVec& z, const RealVec& theta) {
    require(z.size() == theta.size(), "shift",
            "length mismatch: state " + std::to_string(z.size()) + " vs theta " +
                std::to_string(theta.size()));
    const std::size_t n = z.size();
    ComplexVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double cr = std::cos(theta[i]);
        const double sr = std::sin(theta[i]);
        out.re[i] = cr * z.re[i] - sr * z.im[i];
        out.im[i] = cr * z.im[i] + sr * z.re[i];
    }
    return out;
}

ComplexVec dft_mix(const ComplexVec& z) { return dft(z); }

ComplexVec pullback(const ComplexVec& z) {
    const std::size_t n = z.size();
    ComplexVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = fold_angle(std::atan2(z.im[i], z.re[i]));
        out.re[i] = std::cos(phi);
        out.im[i] = std::sin(phi);
    }
    return out;
}

ComplexVec block(const ComplexVec& z, const RealVec& pre, const RealVec& post) {
    return shift(dft_mix(shift(z, pre)), post);
}

PhasorModel::PhasorModel(LpmConfig cfg) : cfg_(cfg) {
    validate(cfg_);
    flat_.assign(count_params(cfg_), 0.0);
}

PhasorModel::PhasorModel(LpmConfig cfg, LpmParams params) : cfg_(cfg) {
    validate(cfg_);
    require(params.count() == count_params(cfg_), "phasor_model",
            "parameter count " + std::to_string(params.count()) + " does not match config (" +
                std::to_string(count_params(cfg_)) + ")");
    require(params.pre.size() == cfg_.depth && params.post.size() == cfg_.depth, "phasor_model",
            "block count does not match depth");
    require(cfg_.readout_shift == !params.readout.empty(), "phasor_model",
            "readout shift presence does not match config");
    flat_ = params.flatten();
}

LpmParams PhasorModel::params() const { return LpmParams::unflatten(cfg_, flat_); }

std::vector<std::pair<std::string, std::size_t>> PhasorModel::param_groups() const {
    std::vector<std::pair<std::string, std::size_t>> g;
    for (std::size_t d = 0; d < cfg_.depth; ++d) {
        g.emplace_back("block" + std::to_string(d) + ".pre", cfg_.context_len);
        g.emplace_back("block" + std::to_string(d) + ".post", cfg_.context_len);
    }
    if (cfg_.readout_shift) g.emplace_back("readout", cfg_.context_len);
    return g;
}

void PhasorModel::init(std::uint64_t seed, double lo, double hi) {
    Rng rng(seed);
    for (double& v : flat_) v = rng.uniform(lo, hi);
}

double PhasorModel::forward_kernel(const RealVec& context, ForwardProbe* probe) const {
    require(context.size() == cfg_.context_len, "lpm_forward",
            "context length " + std::to_string(context.size()) + " does not match config T=" +
                std::to_string(cfg_.context_len));
    const std::size_t t = cfg_.context_len;
    Encoded e = encode(context, cfg_.encoding);
    ComplexVec z = std::move(e.state);
    std::size_t off = 0;
    auto theta = [&](std::size_t at) {
        return RealVec(flat_.begin() + static_cast<std::ptrdiff_t>(at),
                       flat_.begin() + static_cast<std::ptrdiff_t>(at + t));
    };
    for (std::size_t d = 0; d < cfg_.depth; ++d) {
        z = shift(z, theta(off));
        off += t;
        z = dft_mix(z);
        z = shift(z, theta(off));
        off += t;
        if (d + 1 < cfg_.depth && cfg_.pullback_between_blocks) {
            if (probe) {
                for (std::size_t i = 0; i < z.size(); ++i) {
                    const double m = std::sqrt(z.re[i] * z.re[i] + z.im[i] * z.im[i]);
                    probe->min_modulus = std::min(probe->min_modulus, m);
                    const double phi = std::atan2(z.im[i], z.re[i]);
                    probe->min_abs_cos = std::min(probe->min_abs_cos, std::fabs(std::cos(phi)));
                }
            }
            z = pullback(z);
        }
    }
    if (cfg_.readout_shift) z = shift(z, theta(off));
    const std::size_t th = cfg_.readout_thread;
    if (probe) {
        const double m = std::sqrt(z.re[th] * z.re[th] + z.im[th] * z.im[th]);
        probe->min_modulus = std::min(probe->min_modulus, m);
    }
    const double phi_out = std::atan2(z.im[th], z.re[th]);
    return decode_phase(phi_out, e.scale, cfg_.encoding);
}

double PhasorModel::predict(const RealVec& context) const {
    return forward_kernel(context, nullptr);
}

double PhasorModel::predict_probed(const RealVec& context, ForwardProbe& probe) const {
    return forward_kernel(context, &probe);
}

std::vector<ad::NodeRef> PhasorModel::register_leaves(ad::Tape& t) const {
    const LpmParams p = params();
    std::vector<ad::NodeRef> leaves;
    for (std::size_t d = 0; d < cfg_.depth; ++d) {
        leaves.push_back(t.leaf(p.pre[d]));
        leaves.push_back(t.leaf(p.post[d]));
    }
    if (cfg_.readout_shift) leaves.push_back(t.leaf(p.readout));
    return leaves;
}

ad::NodeRef PhasorModel::forward_on_tape(ad::Tape& t, const std::vector<ad::NodeRef>& leaves,
                                         const RealVec& context) const {
    const std::size_t expected = 2 * cfg_.depth + (cfg_.readout_shift ? 1 : 0);
    require(leaves.size() == expected, "lpm_forward", "leaf count does not match config");
    Encoded e = encode(context, cfg_.encoding);
    ad::NodeRef z = t.constant_complex(e.state);
    std::size_t li = 0;
    for (std::size_t d = 0; d < cfg_.depth; ++d) {
        z = t.complex_mul(t.complex_from_polar(leaves[li++]), z);
        z = t.dft(z);
        z = t.complex_mul(t.complex_from_polar(leaves[li++]), z);
        if (d + 1 < cfg_.depth && cfg_.pullback_between_blocks)
            z = t.complex_from_polar(t.fold_phase(t.complex_arg(z)));
    }
    if (cfg_.readout_shift) z = t.complex_mul(t.complex_from_polar(leaves[li++]), z);
    ad::NodeRef phi = t.pick(t.complex_arg(z), cfg_.readout_thread);
    if (cfg_.encoding == Encoding::amplitude_norm)
        return t.scalar_mul(phi, e.scale / kHalfPi);
    return t.atanh_clamped(t.scalar_mul(phi, 1.0 / kPi), kTanhDecodeLimit);
}

double PhasorModel::batch_loss_and_grad(const std::vector<SequenceSample>& samples,
                                        LossKind kind, RealVec& grad) {
    require(!samples.empty(), "train", "empty batch");
    grad.assign(flat_.size(), 0.0);
    double total = 0.0;
    for (const auto& s : samples) {
        require(!s.from_test, "train", "gradient pass touched a held-out test sample");
        ad::Tape t;
        auto leaves = register_leaves(t);
        ad::NodeRef pred = forward_on_tape(t, leaves, s.context);
        ad::NodeRef loss = (kind == LossKind::mse) ? t.mse_loss(pred, {s.target})
                                                   : t.mae_loss(pred, {s.target});
        total += t.scalar(loss);
        ad::Gradient g = t.backward(loss);
        std::size_t off = 0;
        for (const RealVec& leaf_grad : g.leaves) {
            for (std::size_t j = 0; j < leaf_grad.size(); ++j) grad[off + j] += leaf_grad[j];
            off += leaf_grad.size();
        }
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& v : grad) v *= inv;
    return total * inv;
}

double PhasorModel::batch_loss(const std::vector<SequenceSample>& samples,
                               LossKind kind) const {
    require(!samples.empty(), "evaluate", "empty batch");
    double total = 0.0;
    for (const auto& s : samples) {
        const double p = predict(s.context);
        const double d = p - s.target;
        total += (kind == LossKind::mse) ? d * d : std::fabs(d);
    }
    return total / static_cast<double>(samples.size());
}

std::string PhasorModel::checkpoint_json() const {
    const LpmParams p = params();
    nlohmann::json j;
    j["format_version"] = 1;
    j["model"] = "phasor";
    j["config"] = {{"T", cfg_.context_len},
                   {"D", cfg_.depth},
                   {"readout_shift", cfg_.readout_shift},
                   {"readout_thread", cfg_.readout_thread},
                   {"encoding", encoding_name(cfg_.encoding)},
                   {"pullback_between_blocks", cfg_.pullback_between_blocks}};
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t d = 0; d < cfg_.depth; ++d)
        blocks.push_back({{"pre", p.pre[d]}, {"post", p.post[d]}});
    j["params"] = {{"blocks", blocks},
                   {"readout", cfg_.readout_shift ? nlohmann::json(p.readout)
                                                  : nlohmann::json(nullptr)}};
    return j.dump(2) + "\n";
}

PhasorModel PhasorModel::from_checkpoint_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint", std::string("invalid JSON: ") + e.what());
    }
    require(j.value("format_version", 0) == 1, "checkpoint", "unsupported format_version");
    require(j.value("model", "") == "phasor", "checkpoint", "not a phasor checkpoint");
    const auto& c = j.at("config");
    LpmConfig cfg;
    cfg.context_len = c.at("T").get<std::size_t>();
    cfg.depth = c.at("D").get<std::size_t>();
    cfg.readout_shift = c.at("readout_shift").get<bool>();
    cfg.readout_thread = c.at("readout_thread").get<std::size_t>();
    cfg.encoding = encoding_from_name(c.at("encoding").get<std::string>());
    cfg.pullback_between_blocks = c.at("pullback_between_blocks").get<bool>();
    LpmParams p;
    for (const auto& b : j.at("params").at("blocks")) {
        p.pre.push_back(b.at("pre").get<RealVec>());
        p.post.push_back(b.at("post").get<RealVec>());
    }
    const auto& ro = j.at("params").at("readout");
    if (!ro.is_null()) p.readout = ro.get<RealVec>();
    return PhasorModel(cfg, std::move(p));
}

}  // namespace lpm
