#include "stablefi/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "stablefi/errors.hpp"

namespace stablefi {

namespace {

std::string at_line(int line_no) {
    return line_no > 0 ? " (line " + std::to_string(line_no) + ")" : "";
}

int parse_int_token(std::string_view token, const char* what, int line_no) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || value < 0) {
        throw ParseError(std::string("bad ") + what + " token '" + std::string(token) + "'" +
                         at_line(line_no));
    }
    return value;
}

}  // namespace

std::size_t Batch::total_instances() const {
    std::size_t n = 0;
    for (const auto& [env, slice] : per_env) n += slice.size();
    return n;
}

void validate_instance(const Instance& instance, const FeatureSchema& schema, int line_no) {
    std::set<std::pair<int, int>> seen;
    for (const auto& af : instance.active) {
        if (af.field < 0 || af.field >= schema.num_fields()) {
            throw ParseError("field index " + std::to_string(af.field) + " out of range [0, " +
                             std::to_string(schema.num_fields()) + ")" + at_line(line_no));
        }
        if (af.feature < 0 || af.feature >= schema.field_cardinalities[af.field]) {
            throw ParseError("feature index " + std::to_string(af.feature) + " >= cardinality " +
                             std::to_string(schema.field_cardinalities[af.field]) + " of field " +
                             std::to_string(af.field) + at_line(line_no));
        }
        if (!seen.insert({af.field, af.feature}).second) {
            throw ParseError("duplicate feature " + std::to_string(af.field) + ":" +
                             std::to_string(af.feature) + at_line(line_no));
        }
    }
    if (instance.label != 0 && instance.label != 1) {
        throw ParseError("label must be 0 or 1, got " + std::to_string(instance.label) +
                         at_line(line_no));
    }
}

Instance parse_instance(const std::string& line, const FeatureSchema& schema, int line_no) {
    std::istringstream in(line);
    std::string token;
    if (!(in >> token)) {
        throw ParseError("empty instance line" + at_line(line_no));
    }
    Instance instance;
    if (token == "0") {
        instance.label = 0;
    } else if (token == "1") {
        instance.label = 1;
    } else {
        throw ParseError("bad label token '" + token + "', expected 0 or 1" + at_line(line_no));
    }
    while (in >> token) {
        auto colon = token.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == token.size()) {
            throw ParseError("bad feature token '" + token + "', expected <field>:<feature>" +
                             at_line(line_no));
        }
        ActiveFeature af;
        af.field = parse_int_token(std::string_view(token).substr(0, colon), "field", line_no);
        af.feature = parse_int_token(std::string_view(token).substr(colon + 1), "feature", line_no);
        instance.active.push_back(af);
    }
    if (instance.active.empty()) {
        throw ParseError("instance line has no features" + at_line(line_no));
    }
    validate_instance(instance, schema, line_no);
    return instance;
}

std::string format_instance(const Instance& instance) {
    std::string out = std::to_string(instance.label);
    for (const auto& af : instance.active) {
        out += ' ';
        out += std::to_string(af.field);
        out += ':';
        out += std::to_string(af.feature);
    }
    return out;
}

EnvironmentDataset load_environment(const std::filesystem::path& path,
                                    const FeatureSchema& schema, int env_id) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open environment file: " + path.string());
    }
    EnvironmentDataset env;
    env.env_id = env_id;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.eof()) break;  // tolerate a trailing newline
        try {
            env.instances.push_back(parse_instance(line, schema, line_no));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
    }
    if (env.instances.empty()) {
        throw ParseError("environment file is empty: " + path.string());
    }
    return env;
}

std::string format_environment(const EnvironmentDataset& env) {
    std::string out;
    for (const auto& instance : env.instances) {
        out += format_instance(instance);
        out += '\n';
    }
    return out;
}

SplitPlan split_chronological(const std::vector<int>& env_ids, int n_train, int n_valid,
                              int n_test) {
    if (n_train < 2) {
        throw ConfigError("split needs at least 2 training environments, got " +
                          std::to_string(n_train));
    }
    if (n_valid < 0 || n_test < 0 ||
        static_cast<std::size_t>(n_train) + n_valid + n_test != env_ids.size()) {
        throw ConfigError("split counts " + std::to_string(n_train) + "+" +
                          std::to_string(n_valid) + "+" + std::to_string(n_test) +
                          " do not cover the " + std::to_string(env_ids.size()) +
                          " environments");
    }
    SplitPlan plan;
    plan.train_env_ids.assign(env_ids.begin(), env_ids.begin() + n_train);
    plan.valid_env_ids.assign(env_ids.begin() + n_train, env_ids.begin() + n_train + n_valid);
    plan.test_env_ids.assign(env_ids.begin() + n_train + n_valid, env_ids.end());
    return plan;
}

Batch stratified_batch(const std::vector<const EnvironmentDataset*>& train_envs,
                       int per_env_count, Rng& rng) {
    if (per_env_count < 1) {
        throw ConfigError("per_env_count must be >= 1");
    }
    std::vector<const EnvironmentDataset*> ordered = train_envs;
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->env_id < b->env_id; });
    Batch batch;
    for (const auto* env : ordered) {
        if (env->instances.empty()) {
            throw ConfigError("training environment " + std::to_string(env->env_id) +
                              " is empty");
        }
        auto& slice = batch.per_env[env->env_id];
        slice.reserve(per_env_count);
        for (int i = 0; i < per_env_count; ++i) {
            slice.push_back(env->instances[rng.uniform_index(env->instances.size())]);
        }
    }
    return batch;
}

std::string env_file_name(int env_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "env_%03d.txt", env_id);
    return buf;
}

std::vector<int> DatasetDir::env_ids() const {
    std::vector<int> ids;
    ids.reserve(environments.size());
    for (const auto& env : environments) ids.push_back(env.env_id);
    return ids;
}

const EnvironmentDataset& DatasetDir::by_id(int env_id) const {
    for (const auto& env : environments) {
        if (env.env_id == env_id) return env;
    }
    throw ConfigError("no environment with id " + std::to_string(env_id));
}

DatasetDir load_dataset_dir(const std::filesystem::path& dir) {
    DatasetDir data;
    data.schema = load_schema(dir / "schema.json");
    data.schema_hash = schema_hash(data.schema);

    std::vector<std::pair<int, std::filesystem::path>> env_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("env_", 0) != 0 || name.size() < 9 ||
            name.substr(name.size() - 4) != ".txt") {
            continue;
        }
        const std::string digits = name.substr(4, name.size() - 8);
        try {
            env_files.emplace_back(std::stoi(digits), entry.path());
        } catch (const std::exception&) {
            throw ParseError("bad environment file name: " + name);
        }
    }
    if (env_files.empty()) {
        throw ParseError("no env_<t>.txt files in " + dir.string());
    }
    std::sort(env_files.begin(), env_files.end());
    for (const auto& [env_id, path] : env_files) {
        data.environments.push_back(load_environment(path, data.schema, env_id));
    }
    return data;
}

}  // namespace stablefi
