#include <nlohmann/json.hpp>

#include "stablefi/errors.hpp"
#include "stablefi/io.hpp"
#include "stablefi/model.hpp"

namespace stablefi {

using nlohmann::json;

namespace {

json table_to_json(const EmbeddingTable& table) {
    json rows = json::array();
    for (int i = 0; i < table.rows(); ++i) {
        json row = json::array();
        for (double x : table.row(i)) row.push_back(x);
        rows.push_back(std::move(row));
    }
    return rows;
}

EmbeddingTable table_from_json(const json& rows, int dim, int expected_rows, const char* what) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != expected_rows) {
        throw ParseError(std::string("model: ") + what + " must have " +
                         std::to_string(expected_rows) + " rows");
    }
    EmbeddingTable table;
    table.dim = dim;
    table.data.reserve(static_cast<std::size_t>(expected_rows) * dim);
    for (const auto& row : rows) {
        if (!row.is_array() || static_cast<int>(row.size()) != dim) {
            throw ParseError(std::string("model: ") + what + " row width != dim");
        }
        for (const auto& x : row) table.data.push_back(x.get<double>());
    }
    return table;
}

// alpha matrices are serialized as full M x M with zeros on and below the
// diagonal; only i < j entries are read back.
json alpha_to_json(const std::vector<double>& packed, int m) {
    json matrix = json::array();
    for (int i = 0; i < m; ++i) {
        json row = json::array();
        for (int j = 0; j < m; ++j) {
            row.push_back(j > i ? packed[FieldWeightSet::pair_index(i, j, m)] : 0.0);
        }
        matrix.push_back(std::move(row));
    }
    return matrix;
}

std::vector<double> alpha_from_json(const json& matrix, int m, const char* what) {
    if (!matrix.is_array() || static_cast<int>(matrix.size()) != m) {
        throw ParseError(std::string("model: ") + what + " must be " + std::to_string(m) + "x" +
                         std::to_string(m));
    }
    std::vector<double> packed(static_cast<std::size_t>(m) * (m - 1) / 2, 0.0);
    for (int i = 0; i < m; ++i) {
        const auto& row = matrix[i];
        if (!row.is_array() || static_cast<int>(row.size()) != m) {
            throw ParseError(std::string("model: ") + what + " row " + std::to_string(i) +
                             " has wrong width");
        }
        for (int j = i + 1; j < m; ++j) {
            packed[FieldWeightSet::pair_index(i, j, m)] = row[j].get<double>();
        }
    }
    return packed;
}

int model_dim(const ModelState& model) {
    return model.kind == ModelKind::dil ? model.dis.shared_invariant.dim : model.embeddings.dim;
}

}  // namespace

std::string model_to_json(const ModelState& model) {
    json doc;
    doc["kind"] = to_string(model.kind);
    doc["dim"] = model_dim(model);
    doc["schema_hash"] = hash_to_hex(model.schema_hash);
    doc["seed"] = model.seed;

    const int m = model.schema.num_fields();
    switch (model.kind) {
        case ModelKind::fm:
            doc["embeddings"] = table_to_json(model.embeddings);
            break;
        case ModelKind::fieldfm:
            doc["embeddings"] = table_to_json(model.embeddings);
            doc["alpha_s"] = alpha_to_json(model.field_weights.invariant, m);
            break;
        case ModelKind::dil: {
            doc["embeddings"] = table_to_json(model.dis.shared_invariant);
            json envs = json::object();
            for (const auto& [t, table] : model.dis.per_env) {
                envs[std::to_string(t)] = table_to_json(table);
            }
            doc["env_embeddings"] = std::move(envs);
            break;
        }
        case ModelKind::lightdil: {
            doc["embeddings"] = table_to_json(model.embeddings);
            doc["alpha_s"] = alpha_to_json(model.field_weights.invariant, m);
            json envs = json::object();
            for (const auto& [t, packed] : model.field_weights.per_env) {
                envs[std::to_string(t)] = alpha_to_json(packed, m);
            }
            doc["alpha_t"] = std::move(envs);
            break;
        }
    }
    return doc.dump(2) + "\n";
}

ModelState model_from_json(const std::string& text, const FeatureSchema& schema) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    for (const char* key : {"kind", "dim", "schema_hash", "seed"}) {
        if (!doc.contains(key)) {
            throw ParseError(std::string("model file: missing key \"") + key + "\"");
        }
    }

    ModelState model;
    model.kind = model_kind_from_string(doc["kind"].get<std::string>());
    model.schema = schema;
    model.schema_hash = schema_hash(schema);
    model.seed = doc["seed"].get<std::uint64_t>();

    const std::string stored_hash = doc["schema_hash"].get<std::string>();
    if (stored_hash != hash_to_hex(model.schema_hash)) {
        throw ConfigError("model schema_hash " + stored_hash +
                          " does not match the dataset schema hash " +
                          hash_to_hex(model.schema_hash));
    }

    const int dim = doc["dim"].get<int>();
    if (dim < 1) throw ParseError("model file: dim must be >= 1");
    const int n = schema.num_features;
    const int m = schema.num_fields();

    if (!doc.contains("embeddings")) {
        throw ParseError("model file: missing key \"embeddings\"");
    }
    EmbeddingTable table = table_from_json(doc["embeddings"], dim, n, "embeddings");

    switch (model.kind) {
        case ModelKind::fm:
            model.embeddings = std::move(table);
            break;
        case ModelKind::fieldfm:
            model.embeddings = std::move(table);
            model.field_weights.num_fields = m;
            model.field_weights.invariant = alpha_from_json(doc.at("alpha_s"), m, "alpha_s");
            break;
        case ModelKind::dil: {
            model.dis.shared_invariant = std::move(table);
            if (doc.contains("env_embeddings")) {
                for (const auto& [key, value] : doc["env_embeddings"].items()) {
                    model.dis.per_env[std::stoi(key)] =
                        table_from_json(value, dim, n, "env_embeddings");
                }
            }
            break;
        }
        case ModelKind::lightdil: {
            model.embeddings = std::move(table);
            model.field_weights.num_fields = m;
            model.field_weights.invariant = alpha_from_json(doc.at("alpha_s"), m, "alpha_s");
            if (doc.contains("alpha_t")) {
                for (const auto& [key, value] : doc["alpha_t"].items()) {
                    model.field_weights.per_env[std::stoi(key)] =
                        alpha_from_json(value, m, "alpha_t");
                }
            }
            break;
        }
    }
    return model;
}

void save_model(const ModelState& model, const std::filesystem::path& path) {
    atomic_write_file(path, model_to_json(model));
}

ModelState load_model(const std::filesystem::path& path, const FeatureSchema& schema) {
    return model_from_json(read_file(path), schema);
}

}  // namespace stablefi
