#include "stablefi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "stablefi/errors.hpp"
#include "stablefi/io.hpp"

namespace stablefi {

using nlohmann::json;

double auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) {
        throw ConfigError("auc: labels and scores differ in length");
    }
    const std::size_t n = labels.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw ConfigError("auc undefined: only one class present");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: tied scores share the average of their 1-based rank range.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss_metric(std::span<const int> labels, std::span<const double> probabilities) {
    if (labels.size() != probabilities.size() || labels.empty()) {
        throw ConfigError("logloss_metric: bad input lengths");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += labels[i] == 1 ? -std::log(probabilities[i]) : -std::log(1.0 - probabilities[i]);
    }
    return total / static_cast<double>(labels.size());
}

namespace {

std::pair<double, double> mean_and_sample_std(const std::vector<double>& values) {
    const int t = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= t;
    if (t < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (t - 1))};
}

}  // namespace

MetricsReport evaluate_split(const ModelState& model,
                             const std::vector<const EnvironmentDataset*>& split) {
    if (split.empty()) {
        throw ConfigError("evaluate_split: empty split");
    }
    MetricsReport report;
    report.model_hash = hash_to_hex(model.schema_hash);
    report.seed = model.seed;

    std::vector<const EnvironmentDataset*> ordered = split;
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->env_id < b->env_id; });

    std::vector<double> aucs;
    std::vector<double> loglosses;
    for (const auto* env : ordered) {
        std::vector<int> labels;
        std::vector<double> probs;
        labels.reserve(env->instances.size());
        probs.reserve(env->instances.size());
        for (const Instance& instance : env->instances) {
            labels.push_back(instance.label);
            probs.push_back(predict_proba(model_forward(model, instance, std::nullopt)));
        }
        EnvMetrics metrics;
        metrics.n = static_cast<int>(labels.size());
        metrics.logloss = logloss_metric(labels, probs);
        loglosses.push_back(metrics.logloss);
        try {
            metrics.auc = auc(labels, probs);
            aucs.push_back(*metrics.auc);
        } catch (const ConfigError&) {
            report.warnings.push_back("environment " + std::to_string(env->env_id) +
                                      ": single-class labels, auc omitted from aggregate");
        }
        report.per_env[env->env_id] = metrics;
    }

    auto [ll_mean, ll_std] = mean_and_sample_std(loglosses);
    report.logloss_mean = ll_mean;
    report.logloss_std = ll_std;
    if (!aucs.empty()) {
        auto [auc_mean, auc_std] = mean_and_sample_std(aucs);
        report.auc_mean = auc_mean;
        report.auc_std = auc_std;
    }
    return report;
}

std::string report_to_json(const MetricsReport& report, const std::string& config_echo_json) {
    json per_env = json::object();
    for (const auto& [t, metrics] : report.per_env) {
        json entry{{"logloss", metrics.logloss}, {"n", metrics.n}};
        entry["auc"] = metrics.auc ? json(*metrics.auc) : json(nullptr);
        per_env[std::to_string(t)] = std::move(entry);
    }
    json aggregate{{"logloss_mean", report.logloss_mean}, {"logloss_std", report.logloss_std}};
    aggregate["auc_mean"] = report.auc_mean ? json(*report.auc_mean) : json(nullptr);
    aggregate["auc_std"] = report.auc_std ? json(*report.auc_std) : json(nullptr);

    json doc;
    doc["per_env"] = std::move(per_env);
    doc["aggregate"] = std::move(aggregate);
    doc["model_hash"] = report.model_hash;
    doc["seed"] = report.seed;
    doc["config"] = json::parse(config_echo_json);
    doc["warnings"] = report.warnings;
    return doc.dump(2) + "\n";
}

void save_report(const MetricsReport& report, const std::string& config_echo_json,
                 const std::filesystem::path& path) {
    atomic_write_file(path, report_to_json(report, config_echo_json));
}

}  // namespace stablefi
