#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "stablefi/data.hpp"
#include "stablefi/model.hpp"
#include "stablefi/rng.hpp"
#include "stablefi/schema.hpp"

namespace stablefi {

enum class SynthKind { stable, sp, dc };

SynthKind synth_kind_from_string(const std::string& s);
std::string to_string(SynthKind kind);

// Default 10-environment injection schedules.
inline constexpr std::array<double, 10> kSpFlipSchedule = {0.1, 0.15, 0.2, 0.25, 0.5,
                                                           0.5, 0.7,  0.8, 0.85, 0.9};
inline constexpr std::array<double, 10> kDcBernSchedule = {0.1, 0.2, 0.2, 0.2, 0.2,
                                                           0.1, 0.2, 0.2, 0.2, 0.2};
inline constexpr std::array<double, 10> kDcBetaSchedule = {0.6, 0.5,  0.15,  0.0,   -0.15,
                                                           0.0, 0.1, -0.15, -0.25, -0.4};

struct SynthConfig {
    std::vector<int> base_fields;  // per-field cardinalities of the stable base
    int embed_dim_true = 4;
    std::vector<std::tuple<int, int, double>> stable_pairs;  // (field_i, field_j, weight)
    int num_envs = 10;
    int instances_per_env = 10000;
    std::vector<double> flip_probs;        // SP p_t, one per environment
    std::vector<double> bern_probs;        // DC p_t
    std::vector<double> causal_strengths;  // DC beta_t
    std::pair<double, double> alpha_range{0.55, 0.65};
    std::pair<double, double> noise_range{0.0, 0.01};
    std::uint64_t seed = 0;
};

/// Default desk-scale configuration: 6 base fields of cardinality 8, three
/// ground-truth field interactions, and the paper schedules for sp/dc.
SynthConfig default_synth_config(SynthKind kind);

void validate_synth_config(const SynthConfig& cfg, SynthKind kind);

/// Fixed random per-feature embeddings plus the interaction weights that
/// define the stable labeling law; written to truth.json for test assertions.
struct GroundTruth {
    EmbeddingTable embeddings;
    std::vector<std::tuple<int, int, double>> stable_pairs;
};

/// Ground-truth logit of one base instance: sum of w * <e_i, e_j> over the
/// configured stable field pairs.
double truth_logit(const Instance& instance, const GroundTruth& truth,
                   const FeatureSchema& base_schema);

/// One active feature per field drawn uniformly, label ~ Bernoulli(sigmoid of
/// the ground-truth logit). The generation law is identical in every
/// environment; per-environment streams are derived from cfg.seed.
std::pair<std::vector<EnvironmentDataset>, GroundTruth> gen_stable_base(const SynthConfig& cfg);

struct InjectedInstance {
    Instance base;
    int x1_prime = 0;
    int x2_prime = 0;  // always equal to x1_prime
    int new_label = 0;
};

/// SP construction: eps ~ Bernoulli(p_t), x' = eps (1 - y) + (1 - eps) y.
/// The label is never changed.
InjectedInstance inject_spurious(const Instance& instance, double p_t, Rng& rng);

/// DC construction: eps ~ U(noise_range), x' ~ Bernoulli(p_t),
/// alpha ~ U(alpha_range), new label = 1 iff alpha y + beta_t x'_1 x'_2 + eps
/// is strictly greater than 0.5.
InjectedInstance inject_dynamic(const Instance& instance, double p_t, double beta_t,
                                std::pair<double, double> alpha_range,
                                std::pair<double, double> noise_range, Rng& rng);

/// Base schema plus two appended one-hot fields of cardinality 2 holding the
/// injected binary features.
FeatureSchema extended_schema(const FeatureSchema& base);

/// The injected instance in the extended schema: base actives plus one active
/// per injected field whose feature index is the binary value.
Instance to_extended_instance(const InjectedInstance& injected, int num_base_fields);

struct GenSummary {
    int num_envs = 0;
    long long total_instances = 0;
    int num_fields = 0;
    int num_features = 0;
};

/// Writes schema.json, env_<t>.txt files, and truth.json into out_dir.
/// Identical (cfg, seed) produce byte-identical directories.
GenSummary gen_dataset(SynthKind kind, const SynthConfig& cfg,
                       const std::filesystem::path& out_dir);

}  // namespace stablefi
