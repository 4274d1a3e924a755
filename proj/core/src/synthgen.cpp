#include "stablefi/synthgen.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "stablefi/errors.hpp"
#include "stablefi/io.hpp"

namespace stablefi {

using nlohmann::json;

namespace {

// Stream tags for deriving independent rng streams from the master seed.
constexpr std::uint64_t kTruthStream = 0;
constexpr std::uint64_t kBaseStreamOffset = 1;
constexpr std::uint64_t kInjectStreamOffset = 1u << 20;

}  // namespace

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "stable") return SynthKind::stable;
    if (s == "sp") return SynthKind::sp;
    if (s == "dc") return SynthKind::dc;
    throw ConfigError("unknown dataset kind '" + s + "' (expected stable|sp|dc)");
}

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::stable: return "stable";
        case SynthKind::sp: return "sp";
        case SynthKind::dc: return "dc";
    }
    throw std::logic_error("unreachable synth kind");
}

SynthConfig default_synth_config(SynthKind kind) {
    SynthConfig cfg;
    cfg.base_fields = {8, 8, 8, 8, 8, 8};
    cfg.embed_dim_true = 4;
    cfg.stable_pairs = {{0, 1, 0.5}, {2, 3, 0.5}, {4, 5, 0.5}};
    cfg.num_envs = 10;
    cfg.instances_per_env = 10000;
    if (kind == SynthKind::sp) {
        cfg.flip_probs.assign(kSpFlipSchedule.begin(), kSpFlipSchedule.end());
    } else if (kind == SynthKind::dc) {
        cfg.bern_probs.assign(kDcBernSchedule.begin(), kDcBernSchedule.end());
        cfg.causal_strengths.assign(kDcBetaSchedule.begin(), kDcBetaSchedule.end());
    }
    return cfg;
}

void validate_synth_config(const SynthConfig& cfg, SynthKind kind) {
    if (cfg.base_fields.size() < 2) {
        throw ConfigError("synth config needs at least 2 base fields");
    }
    for (int c : cfg.base_fields) {
        if (c <= 0) throw ConfigError("base field cardinality must be positive");
    }
    if (cfg.embed_dim_true < 1) throw ConfigError("embed_dim_true must be >= 1");
    if (cfg.num_envs < 1) throw ConfigError("num_envs must be >= 1");
    if (cfg.instances_per_env < 1) throw ConfigError("instances_per_env must be >= 1");
    const int m = static_cast<int>(cfg.base_fields.size());
    for (const auto& [i, j, w] : cfg.stable_pairs) {
        if (i < 0 || j < 0 || i >= m || j >= m || i >= j) {
            throw ConfigError("stable pair (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") must satisfy 0 <= i < j < " + std::to_string(m));
        }
        if (!std::isfinite(w)) throw ConfigError("stable pair weight must be finite");
    }
    auto check_probs = [&](const std::vector<double>& probs, const char* name) {
        if (static_cast<int>(probs.size()) != cfg.num_envs) {
            throw ConfigError(std::string(name) + " must have one entry per environment (" +
                              std::to_string(cfg.num_envs) + "), got " +
                              std::to_string(probs.size()));
        }
        for (double p : probs) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ConfigError(std::string(name) + " entries must lie in [0, 1]");
            }
        }
    };
    if (kind == SynthKind::sp) {
        check_probs(cfg.flip_probs, "flip_probs");
    } else if (kind == SynthKind::dc) {
        check_probs(cfg.bern_probs, "bern_probs");
        if (static_cast<int>(cfg.causal_strengths.size()) != cfg.num_envs) {
            throw ConfigError("causal_strengths must have one entry per environment");
        }
        if (!(cfg.alpha_range.first < cfg.alpha_range.second)) {
            throw ConfigError("alpha_range must be a non-degenerate interval");
        }
        if (!(cfg.noise_range.first < cfg.noise_range.second)) {
            throw ConfigError("noise_range must be a non-degenerate interval");
        }
    }
}

double truth_logit(const Instance& instance, const GroundTruth& truth,
                   const FeatureSchema& base_schema) {
    // One active per base field by construction; find each field's feature.
    std::vector<int> active_of_field(base_schema.num_fields(), -1);
    for (const auto& af : instance.active) {
        if (af.field < base_schema.num_fields()) active_of_field[af.field] = af.feature;
    }
    double z = 0.0;
    for (const auto& [i, j, w] : truth.stable_pairs) {
        if (active_of_field[i] < 0 || active_of_field[j] < 0) continue;
        auto ei = truth.embeddings.row(base_schema.global_index(i, active_of_field[i]));
        auto ej = truth.embeddings.row(base_schema.global_index(j, active_of_field[j]));
        double d = 0.0;
        for (std::size_t k = 0; k < ei.size(); ++k) d += ei[k] * ej[k];
        z += w * d;
    }
    return z;
}

std::pair<std::vector<EnvironmentDataset>, GroundTruth> gen_stable_base(const SynthConfig& cfg) {
    validate_synth_config(cfg, SynthKind::stable);
    const FeatureSchema schema = make_schema(cfg.base_fields);

    GroundTruth truth;
    truth.stable_pairs = cfg.stable_pairs;
    truth.embeddings.dim = cfg.embed_dim_true;
    truth.embeddings.data.resize(static_cast<std::size_t>(schema.num_features) *
                                 cfg.embed_dim_true);
    Rng truth_rng(derive_seed(cfg.seed, kTruthStream));
    for (double& x : truth.embeddings.data) x = truth_rng.normal(0.0, 1.0);

    std::vector<EnvironmentDataset> envs;
    envs.reserve(cfg.num_envs);
    for (int t = 0; t < cfg.num_envs; ++t) {
        Rng rng(derive_seed(cfg.seed, kBaseStreamOffset + static_cast<std::uint64_t>(t)));
        EnvironmentDataset env;
        env.env_id = t;
        env.instances.reserve(cfg.instances_per_env);
        for (int n = 0; n < cfg.instances_per_env; ++n) {
            Instance instance;
            instance.active.reserve(cfg.base_fields.size());
            for (int f = 0; f < schema.num_fields(); ++f) {
                instance.active.push_back(
                    {f, static_cast<int>(rng.uniform_index(cfg.base_fields[f]))});
            }
            const double z = truth_logit(instance, truth, schema);
            instance.label = rng.bernoulli(sigmoid(z)) ? 1 : 0;
            env.instances.push_back(std::move(instance));
        }
        envs.push_back(std::move(env));
    }
    return {std::move(envs), std::move(truth)};
}

InjectedInstance inject_spurious(const Instance& instance, double p_t, Rng& rng) {
    const int eps = rng.bernoulli(p_t) ? 1 : 0;
    const int y = instance.label;
    InjectedInstance out;
    out.base = instance;
    out.x1_prime = eps * (1 - y) + (1 - eps) * y;
    out.x2_prime = out.x1_prime;
    out.new_label = y;
    return out;
}

InjectedInstance inject_dynamic(const Instance& instance, double p_t, double beta_t,
                                std::pair<double, double> alpha_range,
                                std::pair<double, double> noise_range, Rng& rng) {
    const double eps = rng.uniform(noise_range.first, noise_range.second);
    const int x_prime = rng.bernoulli(p_t) ? 1 : 0;
    const double alpha = rng.uniform(alpha_range.first, alpha_range.second);
    const double y_tilde = alpha * instance.label + beta_t * x_prime * x_prime + eps;
    InjectedInstance out;
    out.base = instance;
    out.x1_prime = x_prime;
    out.x2_prime = x_prime;
    out.new_label = y_tilde > 0.5 ? 1 : 0;
    return out;
}

FeatureSchema extended_schema(const FeatureSchema& base) {
    std::vector<int> cards = base.field_cardinalities;
    std::vector<std::string> names = base.field_names;
    cards.push_back(2);
    cards.push_back(2);
    names.push_back("x_prime_1");
    names.push_back("x_prime_2");
    return make_schema(cards, std::move(names));
}

Instance to_extended_instance(const InjectedInstance& injected, int num_base_fields) {
    Instance out = injected.base;
    out.active.push_back({num_base_fields, injected.x1_prime});
    out.active.push_back({num_base_fields + 1, injected.x2_prime});
    out.label = injected.new_label;
    return out;
}

GenSummary gen_dataset(SynthKind kind, const SynthConfig& cfg,
                       const std::filesystem::path& out_dir) {
    validate_synth_config(cfg, kind);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }

    auto [base_envs, truth] = gen_stable_base(cfg);
    const FeatureSchema base_schema = make_schema(cfg.base_fields);
    const FeatureSchema schema =
        kind == SynthKind::stable ? base_schema : extended_schema(base_schema);
    const int m_base = base_schema.num_fields();

    GenSummary summary;
    summary.num_envs = cfg.num_envs;
    summary.num_fields = schema.num_fields();
    summary.num_features = schema.num_features;

    for (int t = 0; t < cfg.num_envs; ++t) {
        EnvironmentDataset env;
        env.env_id = t;
        if (kind == SynthKind::stable) {
            env = std::move(base_envs[t]);
        } else {
            Rng rng(derive_seed(cfg.seed, kInjectStreamOffset + static_cast<std::uint64_t>(t)));
            env.instances.reserve(base_envs[t].instances.size());
            for (const Instance& base : base_envs[t].instances) {
                InjectedInstance injected =
                    kind == SynthKind::sp
                        ? inject_spurious(base, cfg.flip_probs[t], rng)
                        : inject_dynamic(base, cfg.bern_probs[t], cfg.causal_strengths[t],
                                         cfg.alpha_range, cfg.noise_range, rng);
                env.instances.push_back(to_extended_instance(injected, m_base));
            }
        }
        summary.total_instances += static_cast<long long>(env.instances.size());
        atomic_write_file(out_dir / env_file_name(t), format_environment(env));
    }

    atomic_write_file(out_dir / "schema.json", schema_to_json(schema, /*pretty=*/true));

    json truth_doc;
    truth_doc["kind"] = to_string(kind);
    truth_doc["p_t"] = kind == SynthKind::sp   ? json(cfg.flip_probs)
                       : kind == SynthKind::dc ? json(cfg.bern_probs)
                                               : json(json::array());
    truth_doc["beta_t"] = kind == SynthKind::dc ? json(cfg.causal_strengths) : json(json::array());
    json pairs = json::array();
    for (const auto& [i, j, w] : cfg.stable_pairs) {
        pairs.push_back(json::array({i, j, w}));
    }
    truth_doc["stable_pairs"] = std::move(pairs);
    truth_doc["seed"] = cfg.seed;
    json embeddings = json::array();
    for (int i = 0; i < truth.embeddings.rows(); ++i) {
        json row = json::array();
        for (double x : truth.embeddings.row(i)) row.push_back(x);
        embeddings.push_back(std::move(row));
    }
    truth_doc["embeddings"] = std::move(embeddings);
    atomic_write_file(out_dir / "truth.json", truth_doc.dump(2) + "\n");

    return summary;
}

}  // namespace stablefi
