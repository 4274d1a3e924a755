#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablefi/data.hpp"
#include "stablefi/model.hpp"

namespace stablefi {

/// Mann-Whitney AUC with midrank tie handling:
/// (sum of positive ranks - n_pos (n_pos + 1) / 2) / (n_pos * n_neg).
/// Throws ConfigError when only one class is present (AUC undefined).
double auc(std::span<const int> labels, std::span<const double> scores);

/// Mean binary cross-entropy of already-clipped probabilities.
double logloss_metric(std::span<const int> labels, std::span<const double> probabilities);

struct EnvMetrics {
    std::optional<double> auc;  // absent for single-class environments
    double logloss = 0.0;
    int n = 0;
};

/// Per-environment metrics plus mean +/- sample std aggregates (divisor T-1,
/// std 0 for a single environment). Single-class environments keep their
/// logloss but are excluded from the AUC aggregate, with a warning recorded.
struct MetricsReport {
    std::map<int, EnvMetrics> per_env;
    std::optional<double> auc_mean;
    std::optional<double> auc_std;
    double logloss_mean = 0.0;
    double logloss_std = 0.0;
    std::string model_hash;  // hex schema hash of the evaluated model
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

/// Scores every environment in inference mode (phi_s only for disentangled
/// models) and aggregates.
MetricsReport evaluate_split(const ModelState& model,
                             const std::vector<const EnvironmentDataset*>& split);

/// Report JSON; `config_echo_json` is embedded verbatim under "config" (pass
/// "{}" when there is nothing to echo).
std::string report_to_json(const MetricsReport& report, const std::string& config_echo_json);

void save_report(const MetricsReport& report, const std::string& config_echo_json,
                 const std::filesystem::path& path);

}  // namespace stablefi
