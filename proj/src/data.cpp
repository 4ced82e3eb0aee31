#include "lpm/data.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lpm/rng.hpp"

namespace lpm {

namespace {

void validate(const GenSpec& s) {
    require(s.num_components >= 1, "generate_series", "num_components must be >= 1");
    require(s.freq_lo > 0.0 && s.freq_hi >= s.freq_lo, "generate_series",
            "frequency range invalid");
    require(s.amp_lo > 0.0 && s.amp_hi >= s.amp_lo, "generate_series", "amplitude range invalid");
    require(s.noise_sigma >= 0.0, "generate_series", "noise_sigma must be >= 0");
    require(s.series_len >= 1, "generate_series", "series_len must be >= 1");
}

}  // namespace

Series generate_series(const GenSpec& spec, std::uint64_t index) {
    validate(spec);
    Rng rng(substream_seed(spec.seed, index));
    const std::size_t k = spec.num_components;
    RealVec amp(k), freq(k), phase(k);
    for (std::size_t c = 0; c < k; ++c) {
        amp[c] = rng.uniform(spec.amp_lo, spec.amp_hi);
        freq[c] = rng.uniform(spec.freq_lo, spec.freq_hi);
        phase[c] = rng.uniform(0.0, kTwoPi);
    }
    Series s;
    s.clean.resize(spec.series_len);
    s.noisy.resize(spec.series_len);
    for (std::size_t t = 0; t < spec.series_len; ++t) {
        double v = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            v += amp[c] * std::sin(kTwoPi * freq[c] * static_cast<double>(t) + phase[c]);
        s.clean[t] = v;
        s.noisy[t] = v + spec.noise_sigma * rng.normal();
    }
    return s;
}

std::vector<SequenceSample> window(const Series& s, std::size_t context_len,
                                   std::size_t horizon) {
    require(context_len >= 1, "window", "context_len must be >= 1");
    require(horizon >= 1, "window", "horizon must be >= 1");
    const std::size_t len = s.noisy.size();
    require(len >= context_len + horizon, "window",
            "series too short: len " + std::to_string(len) + ", need >= " +
                std::to_string(context_len + horizon));
    const std::size_t count = len - context_len - horizon + 1;
    std::vector<SequenceSample> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        SequenceSample sm;
        sm.context.assign(s.noisy.begin() + static_cast<std::ptrdiff_t>(w),
                          s.noisy.begin() + static_cast<std::ptrdiff_t>(w + context_len));
        sm.target = s.noisy[w + context_len];
        sm.clean_targets.assign(
            s.clean.begin() + static_cast<std::ptrdiff_t>(w + context_len),
            s.clean.begin() + static_cast<std::ptrdiff_t>(w + context_len + horizon));
        out.push_back(std::move(sm));
    }
    return out;
}

std::vector<SequenceSample> window(const RealVec& values, std::size_t context_len,
                                   std::size_t horizon) {
    Series s;
    s.clean = values;
    s.noisy = values;
    return window(s, context_len, horizon);
}

Benchmark benchmark_from_name(const std::string& name) {
    if (name == "t10" || name == "t10_single") return Benchmark::t10_single;
    if (name == "n32" || name == "n32_vs_attention") return Benchmark::n32_vs_attention;
    if (name == "d3" || name == "d3_rollout") return Benchmark::d3_rollout;
    throw Error("benchmark", "unknown benchmark name: " + name);
}

BenchmarkSpec benchmark_spec(Benchmark b) {
    BenchmarkSpec s;
    switch (b) {
        case Benchmark::t10_single:
            s.name = "t10_single";
            s.context_len = 10;
            s.horizon = 1;
            s.gen.series_len = 35;  // 25 windows per series
            s.gen.seed = 101;
            break;
        case Benchmark::n32_vs_attention:
            s.name = "n32_vs_attention";
            s.context_len = 32;
            s.horizon = 1;
            s.gen.series_len = 57;
            s.gen.seed = 3201;
            break;
        case Benchmark::d3_rollout:
            s.name = "d3_rollout";
            s.context_len = 16;
            s.horizon = 20;
            s.gen.freq_hi = 0.35;  // harder multi-frequency mix
            s.gen.series_len = 60;
            s.gen.seed = 1601;
            break;
    }
    return s;
}

BenchmarkData make_benchmark(Benchmark b, std::optional<std::uint64_t> seed) {
    BenchmarkData data;
    data.spec = benchmark_spec(b);
    if (seed) data.spec.gen.seed = *seed;
    const BenchmarkSpec& spec = data.spec;
    const std::size_t counts[3] = {spec.train_series, spec.val_series, spec.test_series};
    std::uint64_t idx = 0;
    for (int part = 0; part < 3; ++part) {
        for (std::size_t i = 0; i < counts[part]; ++i, ++idx) {
            Series ser = generate_series(spec.gen, idx);
            auto samples = window(ser, spec.context_len, spec.horizon);
            for (auto& sm : samples) {
                sm.from_test = (part == 2);
                if (part == 0)
                    data.split.train.push_back(std::move(sm));
                else if (part == 1)
                    data.split.val.push_back(std::move(sm));
                else
                    data.split.test.push_back(std::move(sm));
            }
            data.series.push_back(std::move(ser));
            data.series_split.push_back(part);
        }
    }
    return data;
}

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* split_name(int part) { return part == 0 ? "train" : (part == 1 ? "val" : "test"); }

int split_index(const std::string& name) {
    if (name == "train") return 0;
    if (name == "val") return 1;
    if (name == "test") return 2;
    throw Error("import_dataset", "unknown split name: " + name);
}

}  // namespace

void export_dataset(const BenchmarkData& data, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("export_dataset", "cannot create directory " + dir);

    std::ofstream csv(fs::path(dir) / "series.csv");
    if (!csv) throw Error("export_dataset", "cannot open series.csv for writing");
    csv << "series_id,t,value\n";
    for (std::size_t sid = 0; sid < data.series.size(); ++sid)
        for (std::size_t t = 0; t < data.series[sid].noisy.size(); ++t)
            csv << sid << "," << t << "," << format_g17(data.series[sid].noisy[t]) << "\n";
    csv.close();
    if (!csv) throw Error("export_dataset", "write failure on series.csv");

    nlohmann::json j;
    j["format_version"] = 1;
    j["benchmark"] = data.spec.name;
    j["context_len"] = data.spec.context_len;
    j["horizon"] = data.spec.horizon;
    j["genspec"] = {{"num_components", data.spec.gen.num_components},
                    {"freq", {data.spec.gen.freq_lo, data.spec.gen.freq_hi}},
                    {"amp", {data.spec.gen.amp_lo, data.spec.gen.amp_hi}},
                    {"noise_sigma", data.spec.gen.noise_sigma},
                    {"series_len", data.spec.gen.series_len},
                    {"seed", data.spec.gen.seed}};
    nlohmann::json series = nlohmann::json::array();
    for (std::size_t sid = 0; sid < data.series.size(); ++sid)
        series.push_back({{"id", sid}, {"split", split_name(data.series_split[sid])}});
    j["series"] = series;

    std::ofstream side(fs::path(dir) / "dataset.json");
    if (!side) throw Error("export_dataset", "cannot open dataset.json for writing");
    side << j.dump(2) << "\n";
}

BenchmarkData import_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream side(fs::path(dir) / "dataset.json");
    if (!side) throw Error("import_dataset", "cannot open dataset.json");
    nlohmann::json j;
    try {
        side >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("import_dataset", std::string("invalid sidecar JSON: ") + e.what());
    }

    BenchmarkData data;
    data.spec.name = j.at("benchmark").get<std::string>();
    data.spec.context_len = j.at("context_len").get<std::size_t>();
    data.spec.horizon = j.at("horizon").get<std::size_t>();
    const auto& g = j.at("genspec");
    data.spec.gen.num_components = g.at("num_components").get<std::size_t>();
    data.spec.gen.freq_lo = g.at("freq")[0].get<double>();
    data.spec.gen.freq_hi = g.at("freq")[1].get<double>();
    data.spec.gen.amp_lo = g.at("amp")[0].get<double>();
    data.spec.gen.amp_hi = g.at("amp")[1].get<double>();
    data.spec.gen.noise_sigma = g.at("noise_sigma").get<double>();
    data.spec.gen.series_len = g.at("series_len").get<std::size_t>();
    data.spec.gen.seed = g.at("seed").get<std::uint64_t>();

    std::size_t counts[3] = {0, 0, 0};
    std::vector<int> parts;
    for (const auto& entry : j.at("series")) {
        const int part = split_index(entry.at("split").get<std::string>());
        parts.push_back(part);
        ++counts[part];
    }
    data.spec.train_series = counts[0];
    data.spec.val_series = counts[1];
    data.spec.test_series = counts[2];

    // Regenerate and cross-check against the exported values.
    for (std::uint64_t idx = 0; idx < parts.size(); ++idx) {
        Series ser = generate_series(data.spec.gen, idx);
        auto samples = window(ser, data.spec.context_len, data.spec.horizon);
        const int part = parts[idx];
        for (auto& sm : samples) {
            sm.from_test = (part == 2);
            if (part == 0)
                data.split.train.push_back(std::move(sm));
            else if (part == 1)
                data.split.val.push_back(std::move(sm));
            else
                data.split.test.push_back(std::move(sm));
        }
        data.series.push_back(std::move(ser));
        data.series_split.push_back(part);
    }

    std::ifstream csv(fs::path(dir) / "series.csv");
    if (!csv) throw Error("import_dataset", "cannot open series.csv");
    std::string line;
    std::getline(csv, line);
    if (line != "series_id,t,value")
        throw Error("import_dataset", "unexpected CSV header: " + line);
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::uint64_t sid = 0, t = 0;
        double v = 0.0;
        if (std::sscanf(line.c_str(), "%" SCNu64 ",%" SCNu64 ",%lf", &sid, &t, &v) != 3)
            throw Error("import_dataset", "malformed CSV row: " + line);
        if (sid >= data.series.size() || t >= data.series[sid].noisy.size())
            throw Error("import_dataset", "CSV row out of range: " + line);
        if (v != data.series[sid].noisy[t])
            throw Error("import_dataset",
                        "CSV value differs from regenerated series at row: " + line);
    }
    return data;
}

}  // namespace lpm
