// stable-fi: generate synthetic multi-environment CTR datasets, train
// FM-family models under ERM / V-REx / Group-DRO / DIL objectives, and
// evaluate them per environment split.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stablefi/data.hpp"
#include "stablefi/errors.hpp"
#include "stablefi/eval.hpp"
#include "stablefi/io.hpp"
#include "stablefi/model.hpp"
#include "stablefi/synthgen.hpp"
#include "stablefi/trainer.hpp"

namespace {

using namespace stablefi;
using nlohmann::json;

struct SplitCounts {
    int train = 5;
    int valid = 2;
    int test = 3;
};

SplitPlan make_plan(const DatasetDir& data, const SplitCounts& counts) {
    return split_chronological(data.env_ids(), counts.train, counts.valid, counts.test);
}

EnvRefs collect(const DatasetDir& data, const std::vector<int>& ids) {
    EnvRefs refs;
    refs.reserve(ids.size());
    for (int id : ids) refs.push_back(&data.by_id(id));
    return refs;
}

std::string fmt4(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
}

std::string fmt_opt(const std::optional<double>& x) { return x ? fmt4(*x) : "n/a"; }

int run_gen(const std::string& kind_str, const std::string& out_dir, std::uint64_t seed,
            int envs, int per_env, const std::string& fields_csv) {
    const SynthKind kind = synth_kind_from_string(kind_str);
    SynthConfig cfg = default_synth_config(kind);
    cfg.seed = seed;
    cfg.instances_per_env = per_env;
    if (!fields_csv.empty()) {
        std::vector<int> cards;
        std::size_t pos = 0;
        while (pos <= fields_csv.size()) {
            std::size_t comma = fields_csv.find(',', pos);
            if (comma == std::string::npos) comma = fields_csv.size();
            cards.push_back(std::stoi(fields_csv.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        cfg.base_fields = cards;
        // Ground-truth pairs must reference existing fields; keep only those
        // that still fit.
        std::erase_if(cfg.stable_pairs, [&](const auto& p) {
            return std::get<1>(p) >= static_cast<int>(cards.size());
        });
    }
    if (envs != cfg.num_envs) {
        if (kind != SynthKind::stable) {
            throw ConfigError("the sp/dc injection schedules are defined for " +
                              std::to_string(cfg.num_envs) + " environments; --envs " +
                              std::to_string(envs) + " is only supported for --kind stable");
        }
        cfg.num_envs = envs;
    }

    GenSummary summary = gen_dataset(kind, cfg, out_dir);
    std::cout << "wrote " << kind_str << " dataset: " << summary.num_envs << " envs, "
              << summary.total_instances << " instances, " << summary.num_fields << " fields, "
              << summary.num_features << " features -> " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& model_out, std::optional<std::uint64_t> seed_override,
              const SplitCounts& counts) {
    DatasetDir data = load_dataset_dir(data_dir);
    TrainConfig cfg = train_config_from_json(read_file(config_path));
    if (seed_override) cfg.seed = *seed_override;

    SplitPlan plan = make_plan(data, counts);
    EnvRefs train_envs = collect(data, plan.train_env_ids);
    EnvRefs valid_envs = collect(data, plan.valid_env_ids);

    TrainResult result = train(train_envs, valid_envs, data.schema, cfg);
    save_model(result.model, model_out);
    atomic_write_file(model_out + ".history.json", history_to_json(result.history, cfg));

    const EvalRecord* best = nullptr;
    for (const auto& record : result.history.records) {
        if (record.step == result.history.best_step) best = &record;
    }
    std::cout << "best step " << result.history.best_step << " | valid AUC "
              << (best ? fmt_opt(best->val_auc) : "n/a") << " | valid logloss "
              << (best ? fmt4(best->val_logloss) : "n/a") << " | stop: "
              << result.history.stop_reason << "\n";
    return 0;
}

int run_eval(const std::string& data_dir, const std::string& split_name,
             const std::string& model_path, const std::string& report_path,
             const SplitCounts& counts) {
    DatasetDir data = load_dataset_dir(data_dir);
    ModelState model = load_model(model_path, data.schema);

    SplitPlan plan = make_plan(data, counts);
    const std::vector<int>* ids = nullptr;
    if (split_name == "train") {
        ids = &plan.train_env_ids;
    } else if (split_name == "valid") {
        ids = &plan.valid_env_ids;
    } else if (split_name == "test") {
        ids = &plan.test_env_ids;
    } else {
        throw ConfigError("--split must be train, valid, or test");
    }

    MetricsReport report = evaluate_split(model, collect(data, *ids));

    json echo;
    echo["data"] = data_dir;
    echo["split"] = split_name;
    echo["model"] = model_path;
    echo["train_envs"] = counts.train;
    echo["valid_envs"] = counts.valid;
    echo["test_envs"] = counts.test;
    save_report(report, echo.dump(), report_path);

    std::cout << "AUC " << fmt_opt(report.auc_mean) << " ± " << fmt_opt(report.auc_std)
              << " | logloss " << fmt4(report.logloss_mean) << " ± "
              << fmt4(report.logloss_std) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stable feature-interaction learning for CTR prediction"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset directory");
    std::string gen_kind;
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    int gen_envs = 10;
    int gen_per_env = 10000;
    std::string gen_fields;
    gen->add_option("--kind", gen_kind, "stable|sp|dc")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "master seed")->required();
    gen->add_option("--envs", gen_envs, "number of environments (stable only; sp/dc use 10)");
    gen->add_option("--per-env", gen_per_env, "instances per environment");
    gen->add_option("--fields", gen_fields, "base field cardinalities, e.g. 8,8,8,8,8,8");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset directory");
    std::string train_data;
    std::string train_config;
    std::string train_model_out;
    std::optional<std::uint64_t> train_seed;
    SplitCounts train_counts;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--config", train_config, "training config JSON")->required();
    train_cmd->add_option("--model-out", train_model_out, "output model file")->required();
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_option("--train-envs", train_counts.train, "training environment count");
    train_cmd->add_option("--valid-envs", train_counts.valid, "validation environment count");
    train_cmd->add_option("--test-envs", train_counts.test, "test environment count");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on one split");
    std::string eval_data;
    std::string eval_split;
    std::string eval_model;
    std::string eval_report;
    SplitCounts eval_counts;
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "train|valid|test")->required();
    eval_cmd->add_option("--model", eval_model, "model file")->required();
    eval_cmd->add_option("--report", eval_report, "output report JSON")->required();
    eval_cmd->add_option("--train-envs", eval_counts.train, "training environment count");
    eval_cmd->add_option("--valid-envs", eval_counts.valid, "validation environment count");
    eval_cmd->add_option("--test-envs", eval_counts.test, "test environment count");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) {
            return run_gen(gen_kind, gen_out, gen_seed, gen_envs, gen_per_env, gen_fields);
        }
        if (train_cmd->parsed()) {
            return run_train(train_data, train_config, train_model_out, train_seed, train_counts);
        }
        if (eval_cmd->parsed()) {
            return run_eval(eval_data, eval_split, eval_model, eval_report, eval_counts);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
