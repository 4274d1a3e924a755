#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stablefi/rng.hpp"
#include "stablefi/schema.hpp"

namespace stablefi {

struct ActiveFeature {
    int field = 0;
    int feature = 0;  // index within the field

    friend bool operator==(const ActiveFeature&, const ActiveFeature&) = default;
};

/// One sparse multi-hot sample. A field may contribute several active
/// features; duplicate (field, feature) pairs are invalid.
struct Instance {
    std::vector<ActiveFeature> active;
    int label = 0;  // binary

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// All instances collected in one chronological period.
struct EnvironmentDataset {
    int env_id = 0;
    std::vector<Instance> instances;

    friend bool operator==(const EnvironmentDataset&, const EnvironmentDataset&) = default;
};

/// Chronological allocation of environment ids to train/valid/test.
struct SplitPlan {
    std::vector<int> train_env_ids;
    std::vector<int> valid_env_ids;
    std::vector<int> test_env_ids;
};

/// Per-environment slices drawn for one optimization step; every training
/// environment is represented.
struct Batch {
    std::map<int, std::vector<Instance>> per_env;

    std::size_t total_instances() const;
};

/// Parses one dataset line: `<label> <field>:<feature> [<field>:<feature> ...]`.
/// `line_no` (1-based) is only used in error messages.
Instance parse_instance(const std::string& line, const FeatureSchema& schema, int line_no = 0);

/// Inverse of parse_instance; used by the generators and round-trip tests.
std::string format_instance(const Instance& instance);

void validate_instance(const Instance& instance, const FeatureSchema& schema, int line_no = 0);

/// Loads one `env_<t>.txt` file. Preserves file order; rejects empty files
/// and aborts on the first malformed line.
EnvironmentDataset load_environment(const std::filesystem::path& path,
                                    const FeatureSchema& schema, int env_id);

std::string format_environment(const EnvironmentDataset& env);

/// First n_train ids go to train, the next n_valid to valid, the last n_test
/// to test; counts must cover the id list exactly and n_train must be >= 2.
SplitPlan split_chronological(const std::vector<int>& env_ids, int n_train, int n_valid,
                              int n_test);

/// Samples `per_env_count` instances uniformly with replacement from each
/// training environment. Deterministic given the rng state; environments are
/// visited in ascending env-id order.
Batch stratified_batch(const std::vector<const EnvironmentDataset*>& train_envs,
                       int per_env_count, Rng& rng);

/// A dataset directory: schema.json + env_<t>.txt files (t parsed from the
/// file name, datasets sorted by t).
struct DatasetDir {
    FeatureSchema schema;
    std::uint64_t schema_hash = 0;
    std::vector<EnvironmentDataset> environments;

    std::vector<int> env_ids() const;
    const EnvironmentDataset& by_id(int env_id) const;
};

DatasetDir load_dataset_dir(const std::filesystem::path& dir);

/// Canonical environment file name: env_<t>.txt with zero-padded decimal t.
std::string env_file_name(int env_id);

}  // namespace stablefi
