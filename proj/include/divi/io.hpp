#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "divi/datagen.hpp"
#include "divi/model.hpp"
#include "divi/trainer.hpp"

namespace divi {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kSnapshotSchemaVersion = 1;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// CSV with header f1..fD and an optional trailing `label` column. Values are
// written with 17 significant digits so doubles round-trip exactly. A
// non-empty informative mask goes to the sidecar `<path>.mask` as one line of
// 0/1 flags.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

std::filesystem::path mask_sidecar_path(const std::filesystem::path& path);

/// Everything needed to reuse a fitted model on new data.
struct ModelSnapshot {
    ModelParams params;
    std::vector<double> gate_probs;
    std::optional<Standardization> stats;
    TrainConfig config;
    std::uint64_t seed = 0;

    bool operator==(const ModelSnapshot& other) const;
};

ModelSnapshot make_snapshot(const FitResult& result, const TrainConfig& config,
                            const std::optional<Standardization>& stats);

// JSON document with a `schema_version` field. Loading validates the version
// and every shape before returning, so a failed load yields no object.
void save_model(const ModelSnapshot& snapshot, const std::filesystem::path& path);
ModelSnapshot load_model(const std::filesystem::path& path);

std::string snapshot_to_json(const ModelSnapshot& snapshot);
ModelSnapshot snapshot_from_json(const std::string& text);

// Writes integer labels, one per line, with a `label` header.
void write_labels_csv(const std::filesystem::path& path, const Labels& labels);
Labels read_labels_csv(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& text) noexcept;

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

} // namespace divi
