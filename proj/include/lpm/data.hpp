#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpm/types.hpp"

namespace lpm {

/// Generator spec for one family of synthetic series: a sum of K random
/// sinusoids plus additive Gaussian noise. Identical specs produce
/// byte-identical data (see rng.hpp for the pinned generator).
struct GenSpec {
    std::size_t num_components = 3;
    double freq_lo = 0.02, freq_hi = 0.25;  // cycles per step
    double amp_lo = 0.5, amp_hi = 1.5;
    double noise_sigma = 0.1;
    std::size_t series_len = 35;
    std::uint64_t seed = 1;
};

struct Series {
    RealVec clean;  // noiseless signal
    RealVec noisy;  // clean + sigma * eps
};

/// One supervised example: context window, one-step-ahead target, and the
/// noiseless continuation used for rollout scoring.
struct SequenceSample {
    RealVec context;
    double target = 0.0;
    RealVec clean_targets;  // horizon values starting at the target step
    bool from_test = false;
};

struct DatasetSplit {
    std::vector<SequenceSample> train, val, test;
};

enum class Benchmark { t10_single, n32_vs_attention, d3_rollout };

struct BenchmarkSpec {
    std::string name;
    GenSpec gen;
    std::size_t context_len = 10;
    std::size_t horizon = 1;
    std::size_t train_series = 40, val_series = 10, test_series = 10;
};

/// A benchmark dataset plus the raw series it was windowed from.
struct BenchmarkData {
    BenchmarkSpec spec;
    DatasetSplit split;
    std::vector<Series> series;      // in generation order
    std::vector<int> series_split;   // 0 train / 1 val / 2 test
};

/// Series `index` of the family described by `spec`; the per-series stream is
/// seeded with substream_seed(spec.seed, index).
Series generate_series(const GenSpec& spec, std::uint64_t index = 0);

std::vector<SequenceSample> window(const Series& s, std::size_t context_len,
                                   std::size_t horizon);
std::vector<SequenceSample> window(const RealVec& values, std::size_t context_len,
                                   std::size_t horizon);

Benchmark benchmark_from_name(const std::string& name);
BenchmarkSpec benchmark_spec(Benchmark b);
BenchmarkData make_benchmark(Benchmark b, std::optional<std::uint64_t> seed = {});

/// series.csv (header series_id,t,value; %.17g values) plus dataset.json
/// sidecar with the generator spec and split assignment.
void export_dataset(const BenchmarkData& data, const std::string& dir);

/// Regenerates from the sidecar spec and verifies the CSV matches bit for bit.
BenchmarkData import_dataset(const std::string& dir);

}  // namespace lpm
