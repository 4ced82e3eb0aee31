#include "lpm/experiments.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lpm/bench.hpp"

namespace lpm {

namespace {

std::string loss_name(LossKind k) { return k == LossKind::mse ? "mse" : "mae"; }

LossKind loss_from_name(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "mae") return LossKind::mae;
    throw Error("experiment", "unknown loss: " + s);
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"t10_single", "n32_phasor", "n32_attention", "d3_rollout"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    if (name == "t10_single") {
        // Two blocks with a readout shift: 5T = 50 phase parameters at T=10.
        cfg.benchmark = Benchmark::t10_single;
        cfg.kind = ModelKind::phasor;
        cfg.lpm = {/*context_len=*/10, /*depth=*/2, /*readout_shift=*/true,
                   /*readout_thread=*/0, Encoding::amplitude_norm,
                   /*pullback_between_blocks=*/true};
        cfg.train.seed = 11;
    } else if (name == "n32_phasor") {
        // Single block, no readout shift: 64 angles at T=32.
        cfg.benchmark = Benchmark::n32_vs_attention;
        cfg.kind = ModelKind::phasor;
        cfg.lpm = {32, 1, false, 0, Encoding::amplitude_norm, true};
        cfg.train.seed = 12;
    } else if (name == "n32_attention") {
        cfg.benchmark = Benchmark::n32_vs_attention;
        cfg.kind = ModelKind::attention;
        cfg.attn = {16, 4, 64, 32, 1};
        cfg.train.seed = 13;
        cfg.train.learning_rate = 1e-2;  // full-batch steps; see README
        cfg.train.epochs = 400;
    } else if (name == "d3_rollout") {
        // Three blocks with fold normalization between them: 112 parameters.
        cfg.benchmark = Benchmark::d3_rollout;
        cfg.kind = ModelKind::phasor;
        cfg.lpm = {16, 3, true, 0, Encoding::amplitude_norm, true};
        cfg.train.seed = 14;
    } else {
        throw Error("experiment", "unknown preset: " + name);
    }
    cfg.data_seed = benchmark_spec(cfg.benchmark).gen.seed;
    return cfg;
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["name"] = name;
    j["benchmark"] = benchmark_spec(benchmark).name;
    j["data_seed"] = data_seed;
    j["model"] = (kind == ModelKind::phasor) ? "phasor" : "attention";
    if (kind == ModelKind::phasor) {
        j["lpm"] = {{"T", lpm.context_len},
                    {"D", lpm.depth},
                    {"readout_shift", lpm.readout_shift},
                    {"readout_thread", lpm.readout_thread},
                    {"encoding", encoding_name(lpm.encoding)},
                    {"pullback_between_blocks", lpm.pullback_between_blocks}};
    } else {
        j["attn"] = {{"d_model", attn.d_model},
                     {"heads", attn.heads},
                     {"d_ff", attn.d_ff},
                     {"context_len", attn.context_len},
                     {"input_dim", attn.input_dim}};
    }
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"epochs", train.epochs},
                  {"init_lo", train.init_lo},
                  {"init_hi", train.init_hi},
                  {"seed", train.seed},
                  {"loss", loss_name(train.loss)}};
    return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error("experiment", std::string("invalid config JSON: ") + e.what());
    }
    require(j.value("format_version", 0) == 1, "experiment", "unsupported format_version");
    ExperimentConfig cfg;
    cfg.name = j.at("name").get<std::string>();
    cfg.benchmark = benchmark_from_name(j.at("benchmark").get<std::string>());
    cfg.data_seed = j.value("data_seed", std::uint64_t{0});
    const std::string kind = j.at("model").get<std::string>();
    if (kind == "phasor") {
        cfg.kind = ModelKind::phasor;
        const auto& l = j.at("lpm");
        cfg.lpm.context_len = l.at("T").get<std::size_t>();
        cfg.lpm.depth = l.at("D").get<std::size_t>();
        cfg.lpm.readout_shift = l.at("readout_shift").get<bool>();
        cfg.lpm.readout_thread = l.at("readout_thread").get<std::size_t>();
        cfg.lpm.encoding = encoding_from_name(l.at("encoding").get<std::string>());
        cfg.lpm.pullback_between_blocks = l.at("pullback_between_blocks").get<bool>();
    } else if (kind == "attention") {
        cfg.kind = ModelKind::attention;
        const auto& a = j.at("attn");
        cfg.attn.d_model = a.at("d_model").get<std::size_t>();
        cfg.attn.heads = a.at("heads").get<std::size_t>();
        cfg.attn.d_ff = a.at("d_ff").get<std::size_t>();
        cfg.attn.context_len = a.at("context_len").get<std::size_t>();
        cfg.attn.input_dim = a.at("input_dim").get<std::size_t>();
    } else {
        throw Error("experiment", "unknown model kind: " + kind);
    }
    const auto& t = j.at("train");
    cfg.train.learning_rate = t.at("learning_rate").get<double>();
    cfg.train.epochs = t.at("epochs").get<int>();
    cfg.train.init_lo = t.at("init_lo").get<double>();
    cfg.train.init_hi = t.at("init_hi").get<double>();
    cfg.train.seed = t.at("seed").get<std::uint64_t>();
    cfg.train.loss = loss_from_name(t.at("loss").get<std::string>());
    return cfg;
}

std::unique_ptr<Model> make_model(const ExperimentConfig& cfg) {
    if (cfg.kind == ModelKind::phasor) return std::make_unique<PhasorModel>(cfg.lpm);
    return std::make_unique<AttentionModel>(cfg.attn);
}

BenchmarkData make_experiment_data(const ExperimentConfig& cfg) {
    std::optional<std::uint64_t> seed;
    if (cfg.data_seed != 0) seed = cfg.data_seed;
    return make_benchmark(cfg.benchmark, seed);
}

namespace {

nlohmann::json metrics_to_json(const ExperimentConfig& cfg, const TrainResult& res,
                               bool include_timing) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["experiment"] = cfg.name;
    j["model"] = (cfg.kind == ModelKind::phasor) ? "phasor" : "attention";
    j["param_count"] = res.param_count;
    j["seed"] = cfg.train.seed;
    j["data_seed"] = cfg.data_seed;
    j["epochs"] = cfg.train.epochs;
    j["loss"] = loss_name(cfg.train.loss);
    j["curve"] = res.curve;
    j["final"] = {{"train_mse", res.train_final.mse}, {"train_mae", res.train_final.mae},
                  {"val_mse", res.val.mse},           {"val_mae", res.val.mae},
                  {"test_mse", res.test.mse},         {"test_mae", res.test.mae}};
    if (include_timing) j["wall_seconds"] = res.wall_seconds;
    return j;
}

std::string curve_to_csv(const RealVec& curve) {
    std::string out = "epoch,train_loss\n";
    for (std::size_t e = 0; e < curve.size(); ++e)
        out += std::to_string(e) + "," + format_g17(curve[e]) + "\n";
    return out;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& cfg, bool include_timing) {
    BenchmarkData data = make_experiment_data(cfg);
    auto model = make_model(cfg);
    RunArtifacts art;
    art.result = train_model(*model, data.split, cfg.train);
    art.metrics_json = metrics_to_json(cfg, art.result, include_timing).dump(2) + "\n";
    art.curve_csv = curve_to_csv(art.result.curve);
    art.checkpoint_json = model->checkpoint_json();
    return art;
}

BenchmarkReport run_benchmark_comparison(bool include_timing) {
    const ExperimentConfig phasor_cfg = preset("n32_phasor");
    const ExperimentConfig attn_cfg = preset("n32_attention");
    require(phasor_cfg.data_seed == attn_cfg.data_seed, "benchmark",
            "presets must share one split");

    BenchmarkData data = make_experiment_data(phasor_cfg);

    auto phasor = make_model(phasor_cfg);
    TrainResult pres = train_model(*phasor, data.split, phasor_cfg.train);
    auto attn = make_model(attn_cfg);
    TrainResult ares = train_model(*attn, data.split, attn_cfg.train);

    const double const_mae = constant_predictor_mae(data.split.train, data.split.test);
    const double ratio = static_cast<double>(ares.param_count) /
                         static_cast<double>(pres.param_count);

    const std::vector<std::size_t> sizes = {64, 128, 256, 512, 1024};
    ScalingResult pscale = measure_phasor_mixing(sizes, 7001);
    ScalingResult ascale = measure_attention_mixing(sizes, 7002);

    nlohmann::json j;
    j["format_version"] = 1;
    j["benchmark"] = benchmark_spec(phasor_cfg.benchmark).name;
    j["models"] = {{{"name", "phasor"},
                    {"param_count", pres.param_count},
                    {"test_mse", pres.test.mse},
                    {"test_mae", pres.test.mae}},
                   {{"name", "attention"},
                    {"param_count", ares.param_count},
                    {"test_mse", ares.test.mse},
                    {"test_mae", ares.test.mae}}};
    j["param_ratio"] = ratio;
    j["constant_predictor_mae"] = const_mae;
    j["mixing_scaling"] = {{"sizes", sizes},
                           {"phasor_slope", pscale.slope},
                           {"attention_slope", ascale.slope}};
    if (include_timing) {
        j["mixing_scaling"]["phasor_seconds"] = pscale.seconds;
        j["mixing_scaling"]["attention_seconds"] = ascale.seconds;
        j["wall_seconds"] = {{"phasor", pres.wall_seconds}, {"attention", ares.wall_seconds}};
    }
    return {j.dump(2) + "\n"};
}

void write_text_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw Error("write_file", "cannot create directory " + p.parent_path().string());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("write_file", "cannot open " + path);
    out << content;
    if (!out) throw Error("write_file", "write failure on " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_file", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lpm
