#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "divi/datagen.hpp"
#include "divi/prior.hpp"
#include "divi/trainer.hpp"

namespace divi {

enum class Scenario { Matched, HeavyTailed, Correlated, ExternalCsv };
enum class Method { DiviInfo, DiviNonInfo, DiviRandom, KMeans, Gmm };

std::string to_string(Scenario s);
std::string to_string(Method m);
Scenario scenario_from_string(const std::string& name);
Method method_from_string(const std::string& name);

bool is_divi(Method m) noexcept;
PriorMode prior_mode_for(Method m);

inline const std::vector<std::string> kSweepAxes = {"t_split", "beta_mult", "tau_mult", "lr", "t_min"};

struct ExperimentConfig {
    Scenario scenario = Scenario::Matched;
    std::vector<std::size_t> sizes = {1000};
    std::size_t d = 100;
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods = {Method::DiviInfo, Method::DiviNonInfo, Method::DiviRandom, Method::KMeans,
                                   Method::Gmm};
    TrainConfig train;
    std::size_t k = 3;   // oracle cluster count for the baselines
    std::size_t k0 = kDefaultRoughClusters;
    double rho = 0.6;    // correlated scenario only
    std::size_t block = 10;
    std::filesystem::path data_path; // external-csv only
    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::size_t jobs = 1;

    // Throws std::invalid_argument before any run starts.
    void validate() const;
};

// Seeds 0..count-1.
std::vector<std::uint64_t> seed_range(std::size_t count);

// Canonical JSON text for a config: fixed key order, two-space indent.
std::string config_to_json(const ExperimentConfig& config);

// Keys missing from the document keep the values already present in `base`,
// so command-line defaults can be layered under a file and flags over it.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Applies one TrainConfig field by sweep-axis name.
void set_train_field(TrainConfig& config, const std::string& axis, double value);

struct ResultRow {
    std::string scenario;
    std::string method;
    std::size_t n = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::optional<double> sweep_value;
    double ari = 0.0;
    double nmi = 0.0;
    std::optional<double> feature_f1;
    std::size_t final_k = 0;
    std::optional<std::size_t> active_dims;
    double wall_time_seconds = 0.0;
    std::size_t split_count = 0;
    std::string error; // empty on success

    bool ok() const noexcept { return error.empty(); }
};

struct Stat {
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation, 0 for a single value
};

struct SummaryRow {
    std::string scenario;
    std::string method;
    std::size_t n = 0;
    std::size_t d = 0;
    std::optional<double> sweep_value;
    std::size_t runs = 0;
    std::size_t failures = 0;
    Stat ari, nmi, final_k, wall_time_seconds, split_count;
    std::optional<Stat> feature_f1, active_dims;
};

struct BenchmarkTable {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;

    std::size_t failures() const;
};

Stat mean_sd(const std::vector<double>& values);

// The dataset a benchmark run sees for `seed`, before standardization.
Dataset make_dataset(const ExperimentConfig& config, std::size_t n, std::uint64_t seed);

// One (dataset, method) run against the ground truth carried by `data`, which
// must already be standardized.
ResultRow run_method(const Dataset& data, Method method, const ExperimentConfig& config, std::uint64_t seed);

BenchmarkTable run_benchmark(const ExperimentConfig& config);

// One benchmark per value of config.sweep_axis, on the same seeds and thus the
// same datasets. Rows carry the axis value.
BenchmarkTable run_sweep(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                       const std::string& sweep_axis = {});
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows,
                       const std::string& sweep_axis = {});
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config, const BenchmarkTable& table,
                    const std::string& command);

// Median wall time of one training epoch (gate draw, objective gradient, Adam
// step) on synthetic data of the given shape.
double time_epoch(std::size_t n, std::size_t d, std::size_t k, std::size_t repeats, std::uint64_t seed);

} // namespace divi
