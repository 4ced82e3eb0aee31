#include "lpm/attention.hpp"

#include <cmath>

#include <json.hpp>

#include "lpm/rng.hpp"

namespace lpm {

namespace {

constexpr double kLayerNormEps = 1e-5;

void validate(const AttnConfig& cfg) {
    require(cfg.input_dim == 1, "attn_config", "only scalar tokens are supported");
    require(cfg.d_model >= 1 && cfg.heads >= 1 && cfg.d_ff >= 1, "attn_config",
            "dimensions must be positive");
    require(cfg.d_model % cfg.heads == 0, "attn_config", "d_model must be divisible by heads");
    require(cfg.context_len >= 1, "attn_config", "context_len must be >= 1");
}

struct Segment {
    const char* name;
    std::size_t size;
    std::size_t fan_in;  // 0: init to zero, 1-based otherwise; kOne => init to one
};

constexpr std::size_t kOne = static_cast<std::size_t>(-1);

std::vector<Segment> segments(const AttnConfig& c) {
    const std::size_t d = c.d_model, f = c.d_ff;
    return {
        {"embed_w", d, 1},          {"embed_b", d, 1},
        {"wq", d * d, d},           {"bq", d, d},
        {"wk", d * d, d},           {"bk", d, d},
        {"wv", d * d, d},           {"bv", d, d},
        {"wo", d * d, d},           {"bo", d, d},
        {"ln1_gamma", d, kOne},     {"ln1_beta", d, 0},
        {"ff1_w", d * f, d},        {"ff1_b", f, d},
        {"ff2_w", f * d, f},        {"ff2_b", d, f},
        {"ln2_gamma", d, kOne},     {"ln2_beta", d, 0},
        {"readout_w", d, d},        {"readout_b", 1, d},
    };
}

}  // namespace

std::size_t count_params(const AttnConfig& cfg) {
    validate(cfg);
    std::size_t n = 0;
    for (const auto& s : segments(cfg)) n += s.size;
    return n;
}

std::size_t mixing_param_count(const AttnConfig& cfg) {
    validate(cfg);
    return 4 * cfg.d_model * cfg.d_model;
}

std::size_t ffn_param_count(const AttnConfig& cfg) {
    validate(cfg);
    return 2 * cfg.d_model * cfg.d_ff;
}

AttentionModel::AttentionModel(AttnConfig cfg) : cfg_(cfg) {
    validate(cfg_);
    flat_.assign(count_params(cfg_), 0.0);
}

std::vector<std::pair<std::string, std::size_t>> AttentionModel::param_groups() const {
    std::vector<std::pair<std::string, std::size_t>> g;
    for (const auto& s : segments(cfg_)) g.emplace_back(s.name, s.size);
    return g;
}

void AttentionModel::init(std::uint64_t seed, double /*lo*/, double /*hi*/) {
    // Weights and biases uniform in +-1/sqrt(fan_in); norm scales start at 1.
    Rng rng(seed);
    std::size_t off = 0;
    for (const auto& s : segments(cfg_)) {
        if (s.fan_in == kOne) {
            for (std::size_t i = 0; i < s.size; ++i) flat_[off + i] = 1.0;
        } else if (s.fan_in == 0) {
            for (std::size_t i = 0; i < s.size; ++i) flat_[off + i] = 0.0;
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
            for (std::size_t i = 0; i < s.size; ++i) flat_[off + i] = rng.uniform(-bound, bound);
        }
        off += s.size;
    }
}

std::vector<ad::NodeRef> AttentionModel::register_leaves(ad::Tape& t) const {
    const std::size_t d = cfg_.d_model, f = cfg_.d_ff;
    std::vector<ad::NodeRef> leaves;
    std::size_t off = 0;
    for (const auto& s : segments(cfg_)) {
        RealVec v(flat_.begin() + static_cast<std::ptrdiff_t>(off),
                  flat_.begin() + static_cast<std::ptrdiff_t>(off + s.size));
        std::size_t rows = s.size, cols = 1;
        const std::string name(s.name);
        if (name == "embed_w" || name == "embed_b") {
            rows = 1;
            cols = d;
        } else if (name == "wq" || name == "wk" || name == "wv" || name == "wo") {
            rows = d;
            cols = d;
        } else if (name == "ff1_w") {
            rows = d;
            cols = f;
        } else if (name == "ff2_w") {
            rows = f;
            cols = d;
        } else if (name == "readout_w") {
            rows = 1;
            cols = d;
        }
        leaves.push_back(t.leaf_matrix(v, rows, cols));
        off += s.size;
    }
    return leaves;
}

ad::NodeRef AttentionModel::forward_on_tape(ad::Tape& t, const std::vector<ad::NodeRef>& leaves,
                                            const RealVec& context, AttnTrace* trace) const {
    require(leaves.size() == segments(cfg_).size(), "attention_forward",
            "leaf count does not match parameter layout");
    require(!context.empty(), "attention_forward", "empty context");
    enum {
        kEmbedW, kEmbedB, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
        kLn1G, kLn1B, kFf1W, kFf1B, kFf2W, kFf2B, kLn2G, kLn2B, kRoW, kRoB,
    };
    const std::size_t n = context.size();
    const std::size_t d = cfg_.d_model, heads = cfg_.heads, dk = d / heads;

    ad::NodeRef x = t.constant_matrix(context, n, 1);
    ad::NodeRef h = t.add_rows(t.matmul(x, leaves[kEmbedW]), leaves[kEmbedB]);  // n x d

    ad::NodeRef q = t.add_rows(t.matmul(h, leaves[kWq]), leaves[kBq]);
    ad::NodeRef k = t.add_rows(t.matmul(h, leaves[kWk]), leaves[kBk]);
    ad::NodeRef v = t.add_rows(t.matmul(h, leaves[kWv]), leaves[kBv]);

    std::vector<ad::NodeRef> head_out;
    for (std::size_t hd = 0; hd < heads; ++hd) {
        ad::NodeRef qh = t.slice_cols(q, hd * dk, (hd + 1) * dk);
        ad::NodeRef kh = t.slice_cols(k, hd * dk, (hd + 1) * dk);
        ad::NodeRef vh = t.slice_cols(v, hd * dk, (hd + 1) * dk);
        ad::NodeRef scores =
            t.scalar_mul(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dk)));
        ad::NodeRef attn = t.softmax_rows(scores);
        if (trace) {
            const RealVec& a = t.value(attn);
            std::vector<RealVec> rows;
            for (std::size_t i = 0; i < n; ++i)
                rows.emplace_back(a.begin() + static_cast<std::ptrdiff_t>(i * n),
                                  a.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
            trace->head_attention.push_back(std::move(rows));
        }
        head_out.push_back(t.matmul(attn, vh));
    }
    ad::NodeRef attn_out =
        t.add_rows(t.matmul(t.concat_cols(head_out), leaves[kWo]), leaves[kBo]);
    ad::NodeRef l1 =
        t.layernorm_rows(t.add(h, attn_out), leaves[kLn1G], leaves[kLn1B], kLayerNormEps);

    ad::NodeRef ff = t.tanh(t.add_rows(t.matmul(l1, leaves[kFf1W]), leaves[kFf1B]));
    ad::NodeRef ff2 = t.add_rows(t.matmul(ff, leaves[kFf2W]), leaves[kFf2B]);
    ad::NodeRef l2 =
        t.layernorm_rows(t.add(l1, ff2), leaves[kLn2G], leaves[kLn2B], kLayerNormEps);

    ad::NodeRef last = t.slice_row(l2, n - 1);
    return t.add(t.matmul_nt(last, leaves[kRoW]), leaves[kRoB]);  // 1 x 1
}

double AttentionModel::predict(const RealVec& context) const {
    ad::Tape t;
    auto leaves = register_leaves(t);
    return t.scalar(forward_on_tape(t, leaves, context));
}

double AttentionModel::predict_probed(const RealVec& context, ForwardProbe& /*probe*/) const {
    // smooth everywhere; no fold or arg branch cuts to track
    return predict(context);
}

double AttentionModel::predict_traced(const RealVec& context, AttnTrace& trace) const {
    ad::Tape t;
    auto leaves = register_leaves(t);
    return t.scalar(forward_on_tape(t, leaves, context, &trace));
}

double AttentionModel::batch_loss_and_grad(const std::vector<SequenceSample>& samples,
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
    for (double& g : grad) g *= inv;
    return total * inv;
}

double AttentionModel::batch_loss(const std::vector<SequenceSample>& samples,
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

std::string AttentionModel::checkpoint_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["model"] = "attention";
    j["config"] = {{"d_model", cfg_.d_model},
                   {"heads", cfg_.heads},
                   {"d_ff", cfg_.d_ff},
                   {"context_len", cfg_.context_len},
                   {"input_dim", cfg_.input_dim}};
    nlohmann::json params;
    std::size_t off = 0;
    for (const auto& s : segments(cfg_)) {
        params[s.name] = RealVec(flat_.begin() + static_cast<std::ptrdiff_t>(off),
                                 flat_.begin() + static_cast<std::ptrdiff_t>(off + s.size));
        off += s.size;
    }
    j["params"] = params;
    return j.dump(2) + "\n";
}

AttentionModel AttentionModel::from_checkpoint_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint", std::string("invalid JSON: ") + e.what());
    }
    require(j.value("format_version", 0) == 1, "checkpoint", "unsupported format_version");
    require(j.value("model", "") == "attention", "checkpoint", "not an attention checkpoint");
    const auto& c = j.at("config");
    AttnConfig cfg;
    cfg.d_model = c.at("d_model").get<std::size_t>();
    cfg.heads = c.at("heads").get<std::size_t>();
    cfg.d_ff = c.at("d_ff").get<std::size_t>();
    cfg.context_len = c.at("context_len").get<std::size_t>();
    cfg.input_dim = c.at("input_dim").get<std::size_t>();
    AttentionModel m(cfg);
    std::size_t off = 0;
    for (const auto& s : segments(cfg)) {
        RealVec v = j.at("params").at(s.name).get<RealVec>();
        require(v.size() == s.size, "checkpoint",
                std::string("segment ") + s.name + " has wrong size");
        std::copy(v.begin(), v.end(), m.flat_.begin() + static_cast<std::ptrdiff_t>(off));
        off += s.size;
    }
    return m;
}

void attention_mix(const RealVec& q, const RealVec& k, const RealVec& v, std::size_t n,
                   std::size_t d_model, std::size_t heads, RealVec& out,
                   RealVec& scores_scratch) {
    require(q.size() == n * d_model && k.size() == q.size() && v.size() == q.size(),
            "attention_mix", "buffer sizes do not match n x d_model");
    require(d_model % heads == 0, "attention_mix", "d_model must be divisible by heads");
    const std::size_t dk = d_model / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    out.assign(n * d_model, 0.0);
    scores_scratch.resize(n * n);
    for (std::size_t hd = 0; hd < heads; ++hd) {
        const std::size_t base = hd * dk;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dk; ++c)
                    s += q[i * d_model + base + c] * k[j * d_model + base + c];
                scores_scratch[i * n + j] = s * scale;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double m = scores_scratch[i * n];
            for (std::size_t j = 1; j < n; ++j) m = std::max(m, scores_scratch[i * n + j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(scores_scratch[i * n + j] - m);
                scores_scratch[i * n + j] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (std::size_t j = 0; j < n; ++j) {
                const double a = scores_scratch[i * n + j] * inv;
                for (std::size_t c = 0; c < dk; ++c)
                    out[i * d_model + base + c] += a * v[j * d_model + base + c];
            }
        }
    }
}

}  // namespace lpm
