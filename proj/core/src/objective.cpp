#include "stablefi/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stablefi/errors.hpp"

namespace stablefi {

void validate_hyper(const HyperParams& hyper) {
    if (hyper.lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (hyper.eta < 0.0) throw ConfigError("eta must be >= 0");
    if (!(hyper.tau > 0.0)) throw ConfigError("tau must be > 0");
    if (hyper.l2_embed < 0.0) throw ConfigError("l2_embed must be >= 0");
}

double logloss_risk(std::span<const Instance> slice, const ModelState& model,
                    std::optional<int> env) {
    if (slice.empty()) {
        throw ConfigError("logloss_risk over an empty slice");
    }
    double total = 0.0;
    for (const Instance& instance : slice) {
        const double p = predict_proba(model_forward(model, instance, env));
        total += instance.label == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(slice.size());
}

double risk_variance(const RiskVector& risks) {
    const int t = risks.size();
    if (t <= 1) return 0.0;
    double mean = 0.0;
    for (const auto& [_, r] : risks.per_env) mean += r;
    mean /= t;
    double ss = 0.0;
    for (const auto& [_, r] : risks.per_env) ss += (r - mean) * (r - mean);
    return ss / (t - 1);
}

std::map<int, double> env_weights(const RiskVector& risks, double tau) {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (risks.per_env.empty()) throw ConfigError("env_weights needs at least one risk");
    double max_scaled = -std::numeric_limits<double>::infinity();
    for (const auto& [_, r] : risks.per_env) max_scaled = std::max(max_scaled, r / tau);
    std::map<int, double> weights;
    double norm = 0.0;
    for (const auto& [t, r] : risks.per_env) {
        const double e = std::exp(r / tau - max_scaled);
        weights[t] = e;
        norm += e;
    }
    for (auto& [_, w] : weights) w /= norm;
    return weights;
}

double env_specific_reg(const ModelState& model, int t, const Batch& slices) {
    if (slices.per_env.size() < 2) {
        throw ConfigError("env_specific_reg needs at least 2 environments");
    }
    if (!slices.per_env.count(t)) {
        throw ConfigError("env_specific_reg: environment " + std::to_string(t) +
                          " not in the batch");
    }
    double value = 0.0;
    for (const auto& [other, slice] : slices.per_env) {
        if (other == t) continue;
        value += logloss_risk(slice, model, other) - logloss_risk(slice, model, t);
    }
    return value;
}

double vrex_objective(const RiskVector& risks, double lambda) {
    if (risks.per_env.empty()) throw ConfigError("vrex_objective needs at least one risk");
    double mean = 0.0;
    for (const auto& [_, r] : risks.per_env) mean += r;
    mean /= risks.size();
    return mean + lambda * risk_variance(risks);
}

std::pair<double, int> groupdro_objective(const RiskVector& risks) {
    if (risks.per_env.empty()) throw ConfigError("groupdro_objective needs at least one risk");
    // map iteration is ascending in env id, so > keeps the smallest id on ties
    double worst = -std::numeric_limits<double>::infinity();
    int worst_env = -1;
    for (const auto& [t, r] : risks.per_env) {
        if (r > worst) {
            worst = r;
            worst_env = t;
        }
    }
    return {worst, worst_env};
}

double dil_outer_loss(const RiskVector& risks, double tau, double lambda) {
    const auto weights = env_weights(risks, tau);
    double loss = 0.0;
    for (const auto& [t, r] : risks.per_env) loss += weights.at(t) * r;
    return loss + lambda * risk_variance(risks);
}

std::map<int, double> dil_outer_risk_coefficients(const RiskVector& risks, double tau,
                                                  double lambda) {
    auto coef = env_weights(risks, tau);
    const int t_count = risks.size();
    if (t_count > 1 && lambda != 0.0) {
        double mean = 0.0;
        for (const auto& [_, r] : risks.per_env) mean += r;
        mean /= t_count;
        for (auto& [t, c] : coef) {
            c += lambda * 2.0 * (risks.per_env.at(t) - mean) / (t_count - 1);
        }
    }
    return coef;
}

}  // namespace stablefi
