#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>

#include "stablefi/data.hpp"
#include "stablefi/model.hpp"

namespace stablefi {

struct HyperParams {
    double lambda = 0.0;    // variance regularizer strength
    double eta = 0.0;       // environment-specific regularizer strength
    double tau = 1.0;       // softmax temperature for the environment weights
    double l2_embed = 0.0;  // L2 coefficient on embedding parameters
};

void validate_hyper(const HyperParams& hyper);

/// Per-environment risk values R^t, keyed by training environment id.
struct RiskVector {
    std::map<int, double> per_env;

    int size() const { return static_cast<int>(per_env.size()); }
};

/// Mean logloss of `slice` under the given environment mode.
double logloss_risk(std::span<const Instance> slice, const ModelState& model,
                    std::optional<int> env);

/// Sample variance of the risks with divisor T-1; defined as 0 when T == 1.
double risk_variance(const RiskVector& risks);

/// Softmax over R^t / tau (max-subtracted). Weights sum to 1 and are strictly
/// increasing in the risk.
std::map<int, double> env_weights(const RiskVector& risks, double tau);

/// Environment-specific regularizer
///   L_t = sum_{t' != t} [R(D_t'; phi_s, phi_t') - R(D_t'; phi_s, phi_t)],
/// evaluated on the given per-environment slices. Only the second term
/// carries gradient, and only through phi_t.
double env_specific_reg(const ModelState& model, int t, const Batch& slices);

/// Mean risk plus lambda times the risk variance.
double vrex_objective(const RiskVector& risks, double lambda);

/// Worst-environment risk; ties break toward the smallest env id.
std::pair<double, int> groupdro_objective(const RiskVector& risks);

/// Invariant-learning outer loss: sum_t w_t R^t + lambda * V_R, with the
/// weights treated as constants for differentiation.
double dil_outer_loss(const RiskVector& risks, double tau, double lambda);

/// Per-environment coefficient of grad R^t in the gradient of dil_outer_loss:
/// w_t + lambda * dV_R/dR^t = w_t + 2 lambda (R^t - mean R) / (T - 1).
std::map<int, double> dil_outer_risk_coefficients(const RiskVector& risks, double tau,
                                                  double lambda);

}  // namespace stablefi
