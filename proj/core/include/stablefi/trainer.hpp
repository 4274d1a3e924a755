#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablefi/data.hpp"
#include "stablefi/model.hpp"
#include "stablefi/objective.hpp"

namespace stablefi {

enum class ObjectiveKind { erm, vrex, groupdro, dil };
enum class MetaMode { first_order, exact_hvp };

ObjectiveKind objective_kind_from_string(const std::string& s);
std::string to_string(ObjectiveKind kind);
MetaMode meta_mode_from_string(const std::string& s);
std::string to_string(MetaMode mode);

struct TrainConfig {
    ModelKind model_kind = ModelKind::fm;
    ObjectiveKind objective_kind = ObjectiveKind::erm;
    int embed_dim = 8;
    double init_scale = 0.1;
    HyperParams hyper;
    double lr_shared = 1e-3;
    double lr_inner = 1e-3;
    double lr_outer = 1e-3;
    double lr_env = 1e-3;
    int batch_per_env = 64;
    int max_steps = 1000;
    int eval_every = 100;
    int patience = 5;
    MetaMode meta_mode = MetaMode::first_order;
    std::uint64_t seed = 0;
    bool deterministic = true;
};

void validate_train_config(const TrainConfig& cfg);

/// Parses the training config JSON. The key set is fixed; unknown or missing
/// keys fail fast with the offending key named.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

/// Sparse Adam: only slots present in the gradient advance their
/// accumulators; bias correction uses the shared step counter.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::map<int, std::vector<double>> m_rows, v_rows;
    std::map<int, double> m_cells, v_cells;
};

void adam_step(ModelState& model, const ParamSelector& sel, const GradientSet& grad,
               AdamState& state, double lr);

struct EvalRecord {
    int step = 0;
    std::optional<double> val_auc;
    double val_logloss = 0.0;
    std::map<int, double> train_risks;  // full-environment risks at this step
    double v_r = 0.0;
    std::map<int, double> env_weights_snapshot;
};

struct TrainHistory {
    std::vector<EvalRecord> records;
    int best_step = -1;
    std::string stop_reason;
};

std::string history_to_json(const TrainHistory& history, const TrainConfig& cfg);

struct TrainResult {
    ModelState model;  // parameters at the best validation AUC
    TrainHistory history;
};

using EnvRefs = std::vector<const EnvironmentDataset*>;

/// Temporary invariant parameters, Eq.-(9)-style plain step:
/// phi_s_tilde = phi_s - lr_inner * grad_{phi_s} R(slice_t; phi_s, phi_t).
/// The model itself is left untouched.
InvariantParams meta_train_step(const ModelState& model, std::span<const Instance> slice_t,
                                int t, double lr_inner);

/// Gradient of the outer loss (weighted risks + lambda V_R, weights constant)
/// with respect to phi_s_tilde, evaluated at phi_s_tilde on the batch.
GradientSet dil_outer_gradient(const ModelState& model, const InvariantParams& phi_tilde,
                               const Batch& batch, const HyperParams& hyper);

/// Hessian-vector product of the inner risk at phi_s along `direction`,
/// by central differencing of the inner gradient at phi_s +/- h * direction,
/// h = 1e-4 * (1 + max|phi_s|).
GradientSet inner_hvp(const ModelState& model, int t, std::span<const Instance> slice_t,
                      const GradientSet& direction);

/// Outer update of phi_s via Adam. first_order applies the outer gradient
/// directly; exact_hvp multiplies through the inner-step Jacobian
/// (I - lr_inner * H). Returns the gradient that was applied. No phi_t is
/// mutated.
GradientSet meta_test_step(ModelState& model, const InvariantParams& phi_tilde, int inner_env,
                           const Batch& batch, const HyperParams& hyper, double lr_outer,
                           MetaMode mode, double lr_inner, AdamState& state);

/// Environment-specific update of phi_t via Adam with gradient
/// grad R(slice_t) - eta * sum_{t' != t} grad R(slice_t'; ..., phi_t).
/// Returns the applied gradient. phi_s and the shared table are not mutated.
GradientSet env_update_step(ModelState& model, int t, const Batch& batch, double eta,
                            double lr_env, AdamState& state);

TrainResult train_erm(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                      const FeatureSchema& schema, const TrainConfig& cfg);

TrainResult train_robust(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                         const FeatureSchema& schema, const TrainConfig& cfg);

TrainResult dil_train(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                      const FeatureSchema& schema, const TrainConfig& cfg);

/// Dispatches on cfg.objective_kind.
TrainResult train(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                  const FeatureSchema& schema, const TrainConfig& cfg);

}  // namespace stablefi
