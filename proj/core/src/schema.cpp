#include "stablefi/schema.hpp"

#include <nlohmann/json.hpp>

#include "stablefi/errors.hpp"
#include "stablefi/io.hpp"

namespace stablefi {

using nlohmann::json;

FeatureSchema make_schema(const std::vector<int>& cardinalities, std::vector<std::string> names) {
    FeatureSchema schema;
    schema.field_cardinalities = cardinalities;
    if (names.empty()) {
        for (std::size_t i = 0; i < cardinalities.size(); ++i) {
            names.push_back("f" + std::to_string(i));
        }
    }
    schema.field_names = std::move(names);
    schema.field_offsets.resize(cardinalities.size());
    int offset = 0;
    for (std::size_t i = 0; i < cardinalities.size(); ++i) {
        schema.field_offsets[i] = offset;
        offset += cardinalities[i];
    }
    schema.num_features = offset;
    validate_schema(schema);
    return schema;
}

void validate_schema(const FeatureSchema& schema) {
    const int m = schema.num_fields();
    if (m < 2) {
        throw ParseError("schema must declare at least 2 fields, got " + std::to_string(m));
    }
    if (schema.field_names.size() != schema.field_cardinalities.size() ||
        schema.field_offsets.size() != schema.field_cardinalities.size()) {
        throw ParseError("schema: names/cardinalities/offsets length mismatch");
    }
    int offset = 0;
    int total = 0;
    for (int i = 0; i < m; ++i) {
        if (schema.field_cardinalities[i] <= 0) {
            throw ParseError("schema field " + std::to_string(i) + " ('" + schema.field_names[i] +
                             "') has non-positive cardinality");
        }
        if (schema.field_offsets[i] != offset) {
            throw ParseError("schema field " + std::to_string(i) + " has offset " +
                             std::to_string(schema.field_offsets[i]) + ", expected " +
                             std::to_string(offset));
        }
        offset += schema.field_cardinalities[i];
        total += schema.field_cardinalities[i];
    }
    if (schema.num_features != total) {
        throw ParseError("schema num_features " + std::to_string(schema.num_features) +
                         " does not equal the cardinality sum " + std::to_string(total));
    }
}

FeatureSchema parse_schema_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("schema.json: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("fields") || !doc["fields"].is_array()) {
        throw ParseError("schema.json: expected an object with a \"fields\" array");
    }
    std::vector<int> cards;
    std::vector<std::string> names;
    int idx = 0;
    for (const auto& field : doc["fields"]) {
        if (!field.is_object() || !field.contains("name") || !field.contains("cardinality")) {
            throw ParseError("schema.json: field " + std::to_string(idx) +
                             " must have \"name\" and \"cardinality\"");
        }
        if (!field["cardinality"].is_number_integer() || field["cardinality"].get<long long>() <= 0) {
            throw ParseError("schema.json: field " + std::to_string(idx) +
                             " has a non-positive cardinality");
        }
        names.push_back(field["name"].get<std::string>());
        cards.push_back(field["cardinality"].get<int>());
        ++idx;
    }
    return make_schema(cards, std::move(names));
}

FeatureSchema load_schema(const std::filesystem::path& path) {
    return parse_schema_json(read_file(path));
}

std::string schema_to_json(const FeatureSchema& schema, bool pretty) {
    json fields = json::array();
    for (int i = 0; i < schema.num_fields(); ++i) {
        fields.push_back({{"name", schema.field_names[i]},
                          {"cardinality", schema.field_cardinalities[i]}});
    }
    json doc{{"fields", fields}};
    return pretty ? doc.dump(2) + "\n" : doc.dump();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t schema_hash(const FeatureSchema& schema) {
    return fnv1a64(schema_to_json(schema, /*pretty=*/false));
}

std::string hash_to_hex(std::uint64_t hash) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

}  // namespace stablefi
