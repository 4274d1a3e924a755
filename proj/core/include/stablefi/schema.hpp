#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stablefi {

/// Field/feature vocabulary shared by every instance of a dataset.
///
/// Field i owns the contiguous global feature index range
/// [field_offsets[i], field_offsets[i] + field_cardinalities[i]).
struct FeatureSchema {
    std::vector<std::string> field_names;
    std::vector<int> field_cardinalities;
    std::vector<int> field_offsets;
    int num_features = 0;

    int num_fields() const { return static_cast<int>(field_cardinalities.size()); }

    int global_index(int field, int feature) const { return field_offsets[field] + feature; }
};

/// Builds a validated schema from per-field cardinalities. Names default to
/// "f0", "f1", ... when omitted.
FeatureSchema make_schema(const std::vector<int>& cardinalities,
                          std::vector<std::string> names = {});

/// Checks the structural invariants (M >= 2, positive cardinalities,
/// offsets consistent). Throws ParseError with the offending field.
void validate_schema(const FeatureSchema& schema);

/// Parses a schema.json document (`{"fields": [{"name":..., "cardinality":...}, ...]}`).
FeatureSchema parse_schema_json(const std::string& text);

FeatureSchema load_schema(const std::filesystem::path& path);

/// Canonical serialization used both for the on-disk schema.json and for
/// hashing: field order defines field indices.
std::string schema_to_json(const FeatureSchema& schema, bool pretty);

/// 64-bit FNV-1a over the canonical (compact) schema JSON bytes.
std::uint64_t schema_hash(const FeatureSchema& schema);

/// 16 lowercase hex digits, the rendering used in model files and reports.
std::string hash_to_hex(std::uint64_t hash);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace stablefi
