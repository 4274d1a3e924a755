#include "stablefi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "stablefi/errors.hpp"
#include "stablefi/eval.hpp"
#include "stablefi/rng.hpp"

namespace stablefi {

using nlohmann::json;

ObjectiveKind objective_kind_from_string(const std::string& s) {
    if (s == "erm") return ObjectiveKind::erm;
    if (s == "vrex") return ObjectiveKind::vrex;
    if (s == "groupdro") return ObjectiveKind::groupdro;
    if (s == "dil") return ObjectiveKind::dil;
    throw ConfigError("unknown objective kind '" + s + "'");
}

std::string to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::erm: return "erm";
        case ObjectiveKind::vrex: return "vrex";
        case ObjectiveKind::groupdro: return "groupdro";
        case ObjectiveKind::dil: return "dil";
    }
    throw std::logic_error("unreachable objective kind");
}

MetaMode meta_mode_from_string(const std::string& s) {
    if (s == "first_order") return MetaMode::first_order;
    if (s == "exact_hvp") return MetaMode::exact_hvp;
    throw ConfigError("unknown meta_mode '" + s + "'");
}

std::string to_string(MetaMode mode) {
    return mode == MetaMode::first_order ? "first_order" : "exact_hvp";
}

void validate_train_config(const TrainConfig& cfg) {
    validate_hyper(cfg.hyper);
    if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (cfg.init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
    // Zero learning rates are allowed; the degenerate configurations (e.g.
    // lr_inner = 0) are meaningful and exercised by tests.
    if (cfg.lr_shared < 0.0 || cfg.lr_inner < 0.0 || cfg.lr_outer < 0.0 || cfg.lr_env < 0.0) {
        throw ConfigError("learning rates must be >= 0");
    }
    if (cfg.batch_per_env < 1) throw ConfigError("batch_per_env must be >= 1");
    if (cfg.max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (cfg.patience < 1) throw ConfigError("patience must be >= 1");

    const bool dil_model = cfg.model_kind == ModelKind::dil || cfg.model_kind == ModelKind::lightdil;
    if (cfg.objective_kind == ObjectiveKind::dil && !dil_model) {
        throw ConfigError("objective 'dil' requires model_kind dil or lightdil");
    }
    if (cfg.objective_kind != ObjectiveKind::dil && dil_model) {
        throw ConfigError("model_kind '" + to_string(cfg.model_kind) +
                          "' requires the dil objective");
    }
}

namespace {

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "model_kind", "objective_kind", "embed_dim", "init_scale", "lambda",  "eta",
        "tau",        "l2_embed",       "lr_shared", "lr_inner",   "lr_outer", "lr_env",
        "batch_per_env", "max_steps",   "eval_every", "patience",  "meta_mode", "seed",
        "deterministic"};
    return keys;
}

double get_number(const json& doc, const char* key) {
    const auto& v = doc.at(key);
    if (!v.is_number()) throw ConfigError(std::string("config key \"") + key + "\" must be a number");
    return v.get<double>();
}

int get_int(const json& doc, const char* key) {
    const auto& v = doc.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(std::string("config key \"") + key + "\" must be an integer");
    }
    return v.get<int>();
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (!known_config_keys().count(key)) {
            throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
    for (const auto& key : known_config_keys()) {
        if (!doc.contains(key)) {
            throw ConfigError("missing config key \"" + key + "\"");
        }
    }

    TrainConfig cfg;
    cfg.model_kind = model_kind_from_string(doc.at("model_kind").get<std::string>());
    cfg.objective_kind = objective_kind_from_string(doc.at("objective_kind").get<std::string>());
    cfg.embed_dim = get_int(doc, "embed_dim");
    cfg.init_scale = get_number(doc, "init_scale");
    cfg.hyper.lambda = get_number(doc, "lambda");
    cfg.hyper.eta = get_number(doc, "eta");
    cfg.hyper.tau = get_number(doc, "tau");
    cfg.hyper.l2_embed = get_number(doc, "l2_embed");
    cfg.lr_shared = get_number(doc, "lr_shared");
    cfg.lr_inner = get_number(doc, "lr_inner");
    cfg.lr_outer = get_number(doc, "lr_outer");
    cfg.lr_env = get_number(doc, "lr_env");
    cfg.batch_per_env = get_int(doc, "batch_per_env");
    cfg.max_steps = get_int(doc, "max_steps");
    cfg.eval_every = get_int(doc, "eval_every");
    cfg.patience = get_int(doc, "patience");
    cfg.meta_mode = meta_mode_from_string(doc.at("meta_mode").get<std::string>());
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer()) {
        throw ConfigError("config key \"seed\" must be an unsigned integer");
    }
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (!doc.at("deterministic").is_boolean()) {
        throw ConfigError("config key \"deterministic\" must be a boolean");
    }
    cfg.deterministic = doc.at("deterministic").get<bool>();
    validate_train_config(cfg);
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json doc;
    doc["model_kind"] = to_string(cfg.model_kind);
    doc["objective_kind"] = to_string(cfg.objective_kind);
    doc["embed_dim"] = cfg.embed_dim;
    doc["init_scale"] = cfg.init_scale;
    doc["lambda"] = cfg.hyper.lambda;
    doc["eta"] = cfg.hyper.eta;
    doc["tau"] = cfg.hyper.tau;
    doc["l2_embed"] = cfg.hyper.l2_embed;
    doc["lr_shared"] = cfg.lr_shared;
    doc["lr_inner"] = cfg.lr_inner;
    doc["lr_outer"] = cfg.lr_outer;
    doc["lr_env"] = cfg.lr_env;
    doc["batch_per_env"] = cfg.batch_per_env;
    doc["max_steps"] = cfg.max_steps;
    doc["eval_every"] = cfg.eval_every;
    doc["patience"] = cfg.patience;
    doc["meta_mode"] = to_string(cfg.meta_mode);
    doc["seed"] = cfg.seed;
    doc["deterministic"] = cfg.deterministic;
    return doc.dump(2);
}

void adam_step(ModelState& model, const ParamSelector& sel, const GradientSet& grad,
               AdamState& state, double lr) {
    ParamRef ref = resolve_params(model, sel);
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    if (!grad.rows.empty()) {
        if (!ref.table) throw ConfigError("adam_step: row gradient against a non-table group");
        for (const auto& [key, grow] : grad.rows) {
            if (key < 0 || key >= ref.table->rows() ||
                static_cast<int>(grow.size()) != ref.table->dim) {
                throw ConfigError("adam_step: gradient row shape mismatch");
            }
            auto& m = state.m_rows[key];
            auto& v = state.v_rows[key];
            if (m.empty()) m.assign(grow.size(), 0.0);
            if (v.empty()) v.assign(grow.size(), 0.0);
            auto prow = ref.table->row(key);
            for (std::size_t d = 0; d < grow.size(); ++d) {
                const double g = grow[d];
                m[d] = state.beta1 * m[d] + (1.0 - state.beta1) * g;
                v[d] = state.beta2 * v[d] + (1.0 - state.beta2) * g * g;
                prow[d] -= lr * (m[d] / bc1) / (std::sqrt(v[d] / bc2) + state.epsilon);
            }
        }
    }
    if (!grad.cells.empty()) {
        if (!ref.cells) throw ConfigError("adam_step: cell gradient against a table group");
        for (const auto& [key, g] : grad.cells) {
            if (key < 0 || key >= static_cast<int>(ref.cells->size())) {
                throw ConfigError("adam_step: gradient cell index out of range");
            }
            double& m = state.m_cells[key];
            double& v = state.v_cells[key];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            (*ref.cells)[key] -= lr * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
        }
    }
}

namespace {

std::vector<Instance> concat_batch(const Batch& batch) {
    std::vector<Instance> all;
    all.reserve(batch.total_instances());
    for (const auto& [_, slice] : batch.per_env) {
        all.insert(all.end(), slice.begin(), slice.end());
    }
    return all;
}

// L2 decay on the embedding rows already touched by the gradient; alpha
// weights are exempt.
void add_l2_on_rows(GradientSet& grad, const ModelState& model, const ParamSelector& sel,
                    double l2) {
    if (l2 == 0.0 || grad.rows.empty()) return;
    ParamRef ref = resolve_params(const_cast<ModelState&>(model), sel);
    if (!ref.table) return;
    for (auto& [key, row] : grad.rows) {
        auto prow = ref.table->row(key);
        for (std::size_t d = 0; d < row.size(); ++d) row[d] += l2 * prow[d];
    }
}

RiskVector batch_risks(const ModelState& model, const Batch& batch, bool per_env_mode) {
    RiskVector risks;
    for (const auto& [t, slice] : batch.per_env) {
        risks.per_env[t] =
            logloss_risk(slice, model, per_env_mode ? std::optional<int>(t) : std::nullopt);
    }
    return risks;
}

// Shared training-loop scaffold: evaluation cadence, best-model snapshot on
// validation AUC, and patience-based early stopping.
class TrainLoop {
public:
    TrainLoop(const EnvRefs& train_envs, const EnvRefs& valid_envs, const TrainConfig& cfg,
              ModelState initial)
        : train_envs_(train_envs),
          valid_envs_(valid_envs),
          cfg_(cfg),
          model_(std::move(initial)),
          best_model_(model_) {}

    ModelState& model() { return model_; }

    // Returns true when training should stop.
    bool evaluate(int step) {
        EvalRecord record;
        record.step = step;
        MetricsReport report = evaluate_split(model_, valid_envs_);
        record.val_auc = report.auc_mean;
        record.val_logloss = report.logloss_mean;

        const bool per_env_mode = model_.has_env_params();
        RiskVector risks;
        for (const auto* env : train_envs_) {
            risks.per_env[env->env_id] = logloss_risk(
                env->instances, model_, per_env_mode ? std::optional<int>(env->env_id) : std::nullopt);
        }
        record.train_risks = risks.per_env;
        record.v_r = risk_variance(risks);
        record.env_weights_snapshot = env_weights(risks, cfg_.hyper.tau);
        history_.records.push_back(std::move(record));

        const double score = report.auc_mean.value_or(-std::numeric_limits<double>::infinity());
        if (history_.best_step < 0 || score > best_score_) {
            best_score_ = score;
            best_model_ = model_;
            history_.best_step = step;
            non_improving_ = 0;
        } else {
            ++non_improving_;
            if (non_improving_ >= cfg_.patience) return true;
        }
        return false;
    }

    TrainResult finish(bool early_stopped) {
        history_.stop_reason = early_stopped ? "early_stop" : "max_steps";
        return {std::move(best_model_), std::move(history_)};
    }

private:
    const EnvRefs& train_envs_;
    const EnvRefs& valid_envs_;
    const TrainConfig& cfg_;
    ModelState model_;
    ModelState best_model_;
    TrainHistory history_;
    double best_score_ = -std::numeric_limits<double>::infinity();
    int non_improving_ = 0;
};

void check_splits(const EnvRefs& train_envs, const EnvRefs& valid_envs, int min_train) {
    if (static_cast<int>(train_envs.size()) < min_train) {
        throw ConfigError("need at least " + std::to_string(min_train) +
                          " training environments, got " + std::to_string(train_envs.size()));
    }
    if (valid_envs.empty()) {
        throw ConfigError("need at least one validation environment");
    }
}

std::vector<int> sorted_env_ids(const EnvRefs& envs) {
    std::vector<int> ids;
    ids.reserve(envs.size());
    for (const auto* env : envs) ids.push_back(env->env_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

InvariantParams meta_train_step(const ModelState& model, std::span<const Instance> slice_t,
                                int t, double lr_inner) {
    InvariantParams phi = get_invariant(model);
    if (lr_inner != 0.0) {
        GradientSet grad = backward(slice_t, model, t, ParamSelector::phi_s());
        sgd_axpy(phi, -lr_inner, grad);
    }
    return phi;
}

GradientSet dil_outer_gradient(const ModelState& model, const InvariantParams& phi_tilde,
                               const Batch& batch, const HyperParams& hyper) {
    ModelState tilde_model = model;
    set_invariant(tilde_model, phi_tilde);

    RiskVector risks = batch_risks(tilde_model, batch, /*per_env_mode=*/true);
    const auto coefs = dil_outer_risk_coefficients(risks, hyper.tau, hyper.lambda);

    GradientSet total;
    for (const auto& [t, slice] : batch.per_env) {
        GradientSet g = backward(slice, tilde_model, t, ParamSelector::phi_s());
        total.axpy(coefs.at(t), g);
    }
    return total;
}

GradientSet inner_hvp(const ModelState& model, int t, std::span<const Instance> slice_t,
                      const GradientSet& direction) {
    InvariantParams phi = get_invariant(model);
    double scale = 0.0;
    for (double x : phi.table.data) scale = std::max(scale, std::abs(x));
    for (double x : phi.cells) scale = std::max(scale, std::abs(x));
    const double h = 1e-4 * (1.0 + scale);

    ModelState work = model;
    InvariantParams plus = phi;
    sgd_axpy(plus, h, direction);
    set_invariant(work, plus);
    GradientSet g_plus = backward(slice_t, work, t, ParamSelector::phi_s());

    InvariantParams minus = phi;
    sgd_axpy(minus, -h, direction);
    set_invariant(work, minus);
    GradientSet g_minus = backward(slice_t, work, t, ParamSelector::phi_s());

    GradientSet hvp;
    hvp.axpy(1.0 / (2.0 * h), g_plus);
    hvp.axpy(-1.0 / (2.0 * h), g_minus);
    return hvp;
}

GradientSet meta_test_step(ModelState& model, const InvariantParams& phi_tilde, int inner_env,
                           const Batch& batch, const HyperParams& hyper, double lr_outer,
                           MetaMode mode, double lr_inner, AdamState& state) {
    GradientSet total = dil_outer_gradient(model, phi_tilde, batch, hyper);
    if (mode == MetaMode::exact_hvp && lr_inner != 0.0) {
        GradientSet hvp = inner_hvp(model, inner_env, batch.per_env.at(inner_env), total);
        total.axpy(-lr_inner, hvp);
    }
    adam_step(model, ParamSelector::phi_s(), total, state, lr_outer);
    return total;
}

GradientSet env_update_step(ModelState& model, int t, const Batch& batch, double eta,
                            double lr_env, AdamState& state) {
    const auto sel = ParamSelector::phi_t(t);
    GradientSet grad = backward(batch.per_env.at(t), model, t, sel);
    if (eta != 0.0) {
        for (const auto& [other, slice] : batch.per_env) {
            if (other == t) continue;
            GradientSet g = backward(slice, model, t, sel);
            grad.axpy(-eta, g);
        }
    }
    adam_step(model, sel, grad, state, lr_env);
    return grad;
}

TrainResult train_erm(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                      const FeatureSchema& schema, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (cfg.model_kind != ModelKind::fm && cfg.model_kind != ModelKind::fieldfm) {
        throw ConfigError("train_erm supports model kinds fm and fieldfm");
    }
    check_splits(train_envs, valid_envs, 1);

    TrainLoop loop(train_envs, valid_envs, cfg,
                   init_model(cfg.model_kind, schema, cfg.embed_dim, cfg.init_scale, cfg.seed));
    Rng rng(derive_seed(cfg.seed, 1));
    AdamState adam_table;
    AdamState adam_alpha;

    bool stopped = loop.evaluate(0);
    for (int step = 1; step <= cfg.max_steps && !stopped; ++step) {
        Batch batch = stratified_batch(train_envs, cfg.batch_per_env, rng);
        std::vector<Instance> all = concat_batch(batch);
        ModelState& model = loop.model();

        GradientSet g_table = backward(all, model, std::nullopt, ParamSelector::shared());
        GradientSet g_alpha;
        if (cfg.model_kind == ModelKind::fieldfm) {
            g_alpha = backward(all, model, std::nullopt, ParamSelector::phi_s());
        }
        add_l2_on_rows(g_table, model, ParamSelector::shared(), cfg.hyper.l2_embed);
        adam_step(model, ParamSelector::shared(), g_table, adam_table, cfg.lr_shared);
        if (cfg.model_kind == ModelKind::fieldfm) {
            adam_step(model, ParamSelector::phi_s(), g_alpha, adam_alpha, cfg.lr_shared);
        }
        if (step % cfg.eval_every == 0) stopped = loop.evaluate(step);
    }
    return loop.finish(stopped);
}

TrainResult train_robust(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                         const FeatureSchema& schema, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (cfg.objective_kind != ObjectiveKind::vrex && cfg.objective_kind != ObjectiveKind::groupdro) {
        throw ConfigError("train_robust supports objectives vrex and groupdro");
    }
    if (cfg.model_kind != ModelKind::fm && cfg.model_kind != ModelKind::fieldfm) {
        throw ConfigError("train_robust supports model kinds fm and fieldfm");
    }
    check_splits(train_envs, valid_envs, 2);

    TrainLoop loop(train_envs, valid_envs, cfg,
                   init_model(cfg.model_kind, schema, cfg.embed_dim, cfg.init_scale, cfg.seed));
    Rng rng(derive_seed(cfg.seed, 1));
    AdamState adam_table;
    AdamState adam_alpha;
    const bool has_alpha = cfg.model_kind == ModelKind::fieldfm;

    bool stopped = loop.evaluate(0);
    for (int step = 1; step <= cfg.max_steps && !stopped; ++step) {
        Batch batch = stratified_batch(train_envs, cfg.batch_per_env, rng);
        ModelState& model = loop.model();
        RiskVector risks = batch_risks(model, batch, /*per_env_mode=*/false);

        GradientSet g_table;
        GradientSet g_alpha;
        if (cfg.objective_kind == ObjectiveKind::vrex) {
            // d/dR of (mean + lambda * V_R): 1/T + 2 lambda (R_t - mean)/(T-1)
            const int t_count = risks.size();
            double mean = 0.0;
            for (const auto& [_, r] : risks.per_env) mean += r;
            mean /= t_count;
            for (const auto& [t, slice] : batch.per_env) {
                double coef = 1.0 / t_count;
                if (t_count > 1) {
                    coef += cfg.hyper.lambda * 2.0 * (risks.per_env.at(t) - mean) / (t_count - 1);
                }
                g_table.axpy(coef, backward(slice, model, std::nullopt, ParamSelector::shared()));
                if (has_alpha) {
                    g_alpha.axpy(coef, backward(slice, model, std::nullopt, ParamSelector::phi_s()));
                }
            }
        } else {
            const auto [_, worst_env] = groupdro_objective(risks);
            const auto& slice = batch.per_env.at(worst_env);
            g_table = backward(slice, model, std::nullopt, ParamSelector::shared());
            if (has_alpha) {
                g_alpha = backward(slice, model, std::nullopt, ParamSelector::phi_s());
            }
        }
        add_l2_on_rows(g_table, model, ParamSelector::shared(), cfg.hyper.l2_embed);
        adam_step(model, ParamSelector::shared(), g_table, adam_table, cfg.lr_shared);
        if (has_alpha) {
            adam_step(model, ParamSelector::phi_s(), g_alpha, adam_alpha, cfg.lr_shared);
        }
        if (step % cfg.eval_every == 0) stopped = loop.evaluate(step);
    }
    return loop.finish(stopped);
}

TrainResult dil_train(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                      const FeatureSchema& schema, const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (cfg.objective_kind != ObjectiveKind::dil) {
        throw ConfigError("dil_train requires the dil objective");
    }
    check_splits(train_envs, valid_envs, 2);

    const std::vector<int> train_ids = sorted_env_ids(train_envs);
    TrainLoop loop(train_envs, valid_envs, cfg,
                   init_model(cfg.model_kind, schema, cfg.embed_dim, cfg.init_scale, cfg.seed,
                              train_ids));
    Rng rng(derive_seed(cfg.seed, 1));
    AdamState adam_shared;
    AdamState adam_outer;
    std::map<int, AdamState> adam_env;
    for (int t : train_ids) adam_env[t];

    const bool has_shared_table = cfg.model_kind == ModelKind::lightdil;

    bool stopped = loop.evaluate(0);
    for (int step = 1; step <= cfg.max_steps && !stopped; ++step) {
        Batch batch = stratified_batch(train_envs, cfg.batch_per_env, rng);
        ModelState& model = loop.model();

        // Algorithm line 4: update parameters outside phi_s / {phi_t}. For
        // embedding-level disentanglement every interaction parameter is
        // phi_s or phi_t, so this is a no-op; for lightdil it trains the
        // shared embedding table with each sample's own alpha^s + alpha^t
        // frozen.
        if (has_shared_table) {
            GradientSet g_shared;
            const double total = static_cast<double>(batch.total_instances());
            for (const auto& [t, slice] : batch.per_env) {
                GradientSet g = backward(slice, model, t, ParamSelector::shared());
                g_shared.axpy(static_cast<double>(slice.size()) / total, g);
            }
            add_l2_on_rows(g_shared, model, ParamSelector::shared(), cfg.hyper.l2_embed);
            adam_step(model, ParamSelector::shared(), g_shared, adam_shared, cfg.lr_shared);
        }

        // Line 5: sample one environment.
        const int t = train_ids[rng.uniform_index(train_ids.size())];

        // Lines 7-8: temporary inner step, then the outer phi_s update.
        InvariantParams phi_tilde = meta_train_step(model, batch.per_env.at(t), t, cfg.lr_inner);
        meta_test_step(model, phi_tilde, t, batch, cfg.hyper, cfg.lr_outer, cfg.meta_mode,
                       cfg.lr_inner, adam_outer);

        // Line 10: environment-specific update for the sampled environment.
        env_update_step(model, t, batch, cfg.hyper.eta, cfg.lr_env, adam_env.at(t));

        if (step % cfg.eval_every == 0) stopped = loop.evaluate(step);
    }
    return loop.finish(stopped);
}

TrainResult train(const EnvRefs& train_envs, const EnvRefs& valid_envs,
                  const FeatureSchema& schema, const TrainConfig& cfg) {
    switch (cfg.objective_kind) {
        case ObjectiveKind::erm: return train_erm(train_envs, valid_envs, schema, cfg);
        case ObjectiveKind::vrex:
        case ObjectiveKind::groupdro: return train_robust(train_envs, valid_envs, schema, cfg);
        case ObjectiveKind::dil: return dil_train(train_envs, valid_envs, schema, cfg);
    }
    throw std::logic_error("unreachable objective kind");
}

std::string history_to_json(const TrainHistory& history, const TrainConfig& cfg) {
    json records = json::array();
    for (const auto& record : history.records) {
        json entry;
        entry["step"] = record.step;
        entry["val_auc"] = record.val_auc ? json(*record.val_auc) : json(nullptr);
        entry["val_logloss"] = record.val_logloss;
        json risks = json::object();
        for (const auto& [t, r] : record.train_risks) risks[std::to_string(t)] = r;
        entry["train_risks"] = std::move(risks);
        entry["v_r"] = record.v_r;
        json weights = json::object();
        for (const auto& [t, w] : record.env_weights_snapshot) weights[std::to_string(t)] = w;
        entry["w"] = std::move(weights);
        records.push_back(std::move(entry));
    }
    json doc;
    doc["config"] = json::parse(train_config_to_json(cfg));
    doc["records"] = std::move(records);
    doc["best_step"] = history.best_step;
    doc["stop_reason"] = history.stop_reason;
    return doc.dump(2) + "\n";
}

}  // namespace stablefi
