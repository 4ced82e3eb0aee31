#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "lpm/attention.hpp"
#include "lpm/data.hpp"
#include "lpm/phasor.hpp"
#include "lpm/train.hpp"

namespace lpm {

enum class ModelKind { phasor, attention };

/// Everything needed to rerun one experiment: data recipe, model shape,
/// optimizer settings. Serializable; a stored config reproduces its run
/// byte-for-byte on one platform.
struct ExperimentConfig {
    std::string name;
    Benchmark benchmark = Benchmark::t10_single;
    std::uint64_t data_seed = 0;  // 0 => benchmark default
    ModelKind kind = ModelKind::phasor;
    LpmConfig lpm;
    AttnConfig attn;
    TrainConfig train;

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
};

/// Named presets: t10_single, n32_phasor, n32_attention, d3_rollout.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

std::unique_ptr<Model> make_model(const ExperimentConfig& cfg);
BenchmarkData make_experiment_data(const ExperimentConfig& cfg);

struct RunArtifacts {
    TrainResult result;
    std::string metrics_json;
    std::string curve_csv;
    std::string checkpoint_json;
};

/// Train per the config and render the output artifacts. Timing fields are
/// omitted when include_timing is false so reruns compare byte-identically.
RunArtifacts run_experiment(const ExperimentConfig& cfg, bool include_timing);

/// Comparison report for the shared-split benchmark: trains the phasor and
/// attention presets on the same data, evaluates both, and measures the
/// token-mixing time scaling of each mixer.
struct BenchmarkReport {
    std::string report_json;
};
BenchmarkReport run_benchmark_comparison(bool include_timing);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace lpm
