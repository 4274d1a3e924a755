#include "stablefi/model.hpp"

#include <algorithm>
#include <cmath>

#include "stablefi/errors.hpp"
#include "stablefi/rng.hpp"

namespace stablefi {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "fm") return ModelKind::fm;
    if (s == "fieldfm") return ModelKind::fieldfm;
    if (s == "dil") return ModelKind::dil;
    if (s == "lightdil") return ModelKind::lightdil;
    throw ConfigError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::fm: return "fm";
        case ModelKind::fieldfm: return "fieldfm";
        case ModelKind::dil: return "dil";
        case ModelKind::lightdil: return "lightdil";
    }
    throw std::logic_error("unreachable model kind");
}

EmbeddingTable EmbeddingTable::zeros(int rows, int dim) {
    EmbeddingTable t;
    t.dim = dim;
    t.data.assign(static_cast<std::size_t>(rows) * dim, 0.0);
    return t;
}

std::vector<int> ModelState::env_ids() const {
    std::vector<int> ids;
    if (kind == ModelKind::dil) {
        for (const auto& [t, _] : dis.per_env) ids.push_back(t);
    } else if (kind == ModelKind::lightdil) {
        for (const auto& [t, _] : field_weights.per_env) ids.push_back(t);
    }
    return ids;
}

ParamRef resolve_params(ModelState& model, const ParamSelector& sel) {
    using Group = ParamSelector::Group;
    switch (model.kind) {
        case ModelKind::fm:
            if (sel.group == Group::shared_table) return {&model.embeddings, nullptr};
            break;
        case ModelKind::fieldfm:
            if (sel.group == Group::shared_table) return {&model.embeddings, nullptr};
            if (sel.group == Group::invariant) return {nullptr, &model.field_weights.invariant};
            break;
        case ModelKind::dil:
            if (sel.group == Group::invariant) return {&model.dis.shared_invariant, nullptr};
            if (sel.group == Group::env_specific) {
                auto it = model.dis.per_env.find(sel.env_id);
                if (it == model.dis.per_env.end()) break;
                return {&it->second, nullptr};
            }
            break;
        case ModelKind::lightdil:
            if (sel.group == Group::shared_table) return {&model.embeddings, nullptr};
            if (sel.group == Group::invariant) return {nullptr, &model.field_weights.invariant};
            if (sel.group == Group::env_specific) {
                auto it = model.field_weights.per_env.find(sel.env_id);
                if (it == model.field_weights.per_env.end()) break;
                return {nullptr, &it->second};
            }
            break;
    }
    throw ConfigError("parameter group not present in model kind '" + to_string(model.kind) +
                      "' (env_id " + std::to_string(sel.env_id) + ")");
}

void GradientSet::scale(double s) {
    for (auto& [_, row] : rows) {
        for (double& x : row) x *= s;
    }
    for (auto& [_, cell] : cells) cell *= s;
}

void GradientSet::axpy(double s, const GradientSet& other) {
    if (dim == 0) dim = other.dim;
    for (const auto& [key, row] : other.rows) {
        auto& dst = rows[key];
        if (dst.empty()) dst.assign(row.size(), 0.0);
        for (std::size_t d = 0; d < row.size(); ++d) dst[d] += s * row[d];
    }
    for (const auto& [key, cell] : other.cells) {
        cells[key] += s * cell;
    }
}

double GradientSet::max_abs() const {
    double m = 0.0;
    for (const auto& [_, row] : rows) {
        for (double x : row) m = std::max(m, std::abs(x));
    }
    for (const auto& [_, cell] : cells) m = std::max(m, std::abs(cell));
    return m;
}

double sigmoid(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double predict_proba(double logit) {
    return std::clamp(sigmoid(logit), kProbClip, 1.0 - kProbClip);
}

namespace {

// Sum-of-squares FM logit over a materialized list of d-vectors:
// 1/2 * sum_d [S_d^2 - Q_d], equal to pairwise <v_i, v_j> enumeration.
double fm_logit(const std::vector<std::span<const double>>& vecs, int dim) {
    double logit = 0.0;
    for (int d = 0; d < dim; ++d) {
        double s = 0.0;
        double q = 0.0;
        for (const auto& v : vecs) {
            s += v[d];
            q += v[d] * v[d];
        }
        logit += 0.5 * (s * s - q);
    }
    return logit;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
    return s;
}

const std::vector<double>& env_weight_cells(const FieldWeightSet& weights, int env) {
    auto it = weights.per_env.find(env);
    if (it == weights.per_env.end()) {
        throw ConfigError("unknown environment " + std::to_string(env));
    }
    return it->second;
}

const EmbeddingTable& env_table(const DisentangledEmbeddings& dis, int env) {
    auto it = dis.per_env.find(env);
    if (it == dis.per_env.end()) {
        throw ConfigError("unknown environment " + std::to_string(env));
    }
    return it->second;
}

// Field representations plus active counts, shared by the field-level
// forward and backward passes.
struct FieldReps {
    std::vector<double> u;   // num_fields x dim
    std::vector<int> count;  // actives per field

    std::span<const double> field(int i, int dim) const {
        return {u.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
};

FieldReps compute_field_reps(const Instance& instance, const EmbeddingTable& table,
                             const FeatureSchema& schema) {
    const int m = schema.num_fields();
    const int dim = table.dim;
    FieldReps reps;
    reps.u.assign(static_cast<std::size_t>(m) * dim, 0.0);
    reps.count.assign(m, 0);
    for (const auto& af : instance.active) {
        auto row = table.row(schema.global_index(af.field, af.feature));
        double* u = reps.u.data() + static_cast<std::size_t>(af.field) * dim;
        for (int d = 0; d < dim; ++d) u[d] += row[d];
        ++reps.count[af.field];
    }
    for (int i = 0; i < m; ++i) {
        if (reps.count[i] > 1) {
            double inv = 1.0 / reps.count[i];
            double* u = reps.u.data() + static_cast<std::size_t>(i) * dim;
            for (int d = 0; d < dim; ++d) u[d] *= inv;
        }
    }
    return reps;
}

double field_logit(const FieldReps& reps, std::span<const double> pair_weights, int m, int dim) {
    double logit = 0.0;
    for (int i = 0; i < m; ++i) {
        if (reps.count[i] == 0) continue;
        for (int j = i + 1; j < m; ++j) {
            if (reps.count[j] == 0) continue;
            double w = pair_weights[FieldWeightSet::pair_index(i, j, m)];
            if (w == 0.0) continue;
            logit += w * dot(reps.field(i, dim), reps.field(j, dim));
        }
    }
    return logit;
}

std::vector<double> combined_pair_weights(const FieldWeightSet& weights, std::optional<int> env) {
    std::vector<double> combined = weights.invariant;
    if (env) {
        const auto& alpha_t = env_weight_cells(weights, *env);
        for (std::size_t p = 0; p < combined.size(); ++p) combined[p] += alpha_t[p];
    }
    return combined;
}

}  // namespace

double fm_forward(const Instance& instance, const EmbeddingTable& table,
                  const FeatureSchema& schema) {
    std::vector<std::span<const double>> vecs;
    vecs.reserve(instance.active.size());
    for (const auto& af : instance.active) {
        vecs.push_back(table.row(schema.global_index(af.field, af.feature)));
    }
    return fm_logit(vecs, table.dim);
}

std::vector<double> field_reps(const Instance& instance, const EmbeddingTable& table,
                               const FeatureSchema& schema) {
    return compute_field_reps(instance, table, schema).u;
}

double fieldfm_forward(const Instance& instance, const EmbeddingTable& table,
                       std::span<const double> pair_weights, const FeatureSchema& schema) {
    FieldReps reps = compute_field_reps(instance, table, schema);
    return field_logit(reps, pair_weights, schema.num_fields(), table.dim);
}

double dil_forward(const Instance& instance, const DisentangledEmbeddings& dis,
                   std::optional<int> env, const FeatureSchema& schema) {
    const EmbeddingTable& vs = dis.shared_invariant;
    const int dim = vs.dim;
    if (!env) {
        return fm_forward(instance, vs, schema);
    }
    const EmbeddingTable& vt = env_table(dis, *env);
    std::vector<double> effective(instance.active.size() * static_cast<std::size_t>(dim));
    std::vector<std::span<const double>> vecs;
    vecs.reserve(instance.active.size());
    for (std::size_t k = 0; k < instance.active.size(); ++k) {
        const int g = schema.global_index(instance.active[k].field, instance.active[k].feature);
        double* w = effective.data() + k * dim;
        auto rs = vs.row(g);
        auto rt = vt.row(g);
        for (int d = 0; d < dim; ++d) w[d] = rs[d] + rt[d];
        vecs.emplace_back(w, static_cast<std::size_t>(dim));
    }
    return fm_logit(vecs, dim);
}

double lightdil_forward(const Instance& instance, const EmbeddingTable& table,
                        const FieldWeightSet& weights, std::optional<int> env,
                        const FeatureSchema& schema) {
    FieldReps reps = compute_field_reps(instance, table, schema);
    std::vector<double> combined = combined_pair_weights(weights, env);
    return field_logit(reps, combined, schema.num_fields(), table.dim);
}

double model_forward(const ModelState& model, const Instance& instance, std::optional<int> env) {
    switch (model.kind) {
        case ModelKind::fm:
            return fm_forward(instance, model.embeddings, model.schema);
        case ModelKind::fieldfm:
            return fieldfm_forward(instance, model.embeddings, model.field_weights.invariant,
                                   model.schema);
        case ModelKind::dil:
            return dil_forward(instance, model.dis, env, model.schema);
        case ModelKind::lightdil:
            return lightdil_forward(instance, model.embeddings, model.field_weights, env,
                                    model.schema);
    }
    throw std::logic_error("unreachable model kind");
}

namespace {

void accumulate_fm_rows(GradientSet& grad, const Instance& instance, const FeatureSchema& schema,
                        const std::vector<std::span<const double>>& vecs, double coef, int dim) {
    std::vector<double> sum(dim, 0.0);
    for (const auto& v : vecs) {
        for (int d = 0; d < dim; ++d) sum[d] += v[d];
    }
    for (std::size_t k = 0; k < instance.active.size(); ++k) {
        const auto& af = instance.active[k];
        auto& row = grad.rows[schema.global_index(af.field, af.feature)];
        if (row.empty()) row.assign(dim, 0.0);
        for (int d = 0; d < dim; ++d) row[d] += coef * (sum[d] - vecs[k][d]);
    }
}

void accumulate_field_grads(GradientSet& grad, const Instance& instance,
                            const FeatureSchema& schema, const FieldReps& reps,
                            std::span<const double> pair_weights, double coef, int dim,
                            bool want_cells, bool want_rows) {
    const int m = schema.num_fields();
    if (want_cells) {
        for (int i = 0; i < m; ++i) {
            if (reps.count[i] == 0) continue;
            for (int j = i + 1; j < m; ++j) {
                if (reps.count[j] == 0) continue;
                grad.cells[FieldWeightSet::pair_index(i, j, m)] +=
                    coef * dot(reps.field(i, dim), reps.field(j, dim));
            }
        }
    }
    if (want_rows) {
        // h_i = sum_{j != i} a_ij u_j; each active feature in field i gets
        // coef * h_i / count_i.
        std::vector<double> h(static_cast<std::size_t>(m) * dim, 0.0);
        for (int i = 0; i < m; ++i) {
            if (reps.count[i] == 0) continue;
            double* hi = h.data() + static_cast<std::size_t>(i) * dim;
            for (int j = 0; j < m; ++j) {
                if (j == i || reps.count[j] == 0) continue;
                const int lo = std::min(i, j);
                const int hi_idx = std::max(i, j);
                double a = pair_weights[FieldWeightSet::pair_index(lo, hi_idx, m)];
                if (a == 0.0) continue;
                auto uj = reps.field(j, dim);
                for (int d = 0; d < dim; ++d) hi[d] += a * uj[d];
            }
        }
        for (const auto& af : instance.active) {
            auto& row = grad.rows[schema.global_index(af.field, af.feature)];
            if (row.empty()) row.assign(dim, 0.0);
            const double* hi = h.data() + static_cast<std::size_t>(af.field) * dim;
            const double s = coef / reps.count[af.field];
            for (int d = 0; d < dim; ++d) row[d] += s * hi[d];
        }
    }
}

}  // namespace

GradientSet backward(std::span<const Instance> slice, const ModelState& model,
                     std::optional<int> env, const ParamSelector& sel) {
    using Group = ParamSelector::Group;
    if (slice.empty()) {
        throw ConfigError("backward over an empty slice");
    }
    // Selector sanity: resolve against the model kind (also checks env_id).
    resolve_params(const_cast<ModelState&>(model), sel);
    if (sel.group == Group::env_specific && (!env || *env != sel.env_id)) {
        throw ConfigError("gradient for phi_t of environment " + std::to_string(sel.env_id) +
                          " requires forward in that environment's mode");
    }

    const bool field_level = model.kind == ModelKind::fieldfm || model.kind == ModelKind::lightdil;
    const int dim = field_level                   ? model.embeddings.dim
                    : model.kind == ModelKind::fm ? model.embeddings.dim
                                                  : model.dis.shared_invariant.dim;
    GradientSet grad;
    grad.dim = dim;
    const double inv_n = 1.0 / static_cast<double>(slice.size());

    for (const Instance& instance : slice) {
        const double logit = model_forward(model, instance, env);
        const double coef = (sigmoid(logit) - instance.label) * inv_n;

        if (model.kind == ModelKind::fm) {
            std::vector<std::span<const double>> vecs;
            vecs.reserve(instance.active.size());
            for (const auto& af : instance.active) {
                vecs.push_back(model.embeddings.row(model.schema.global_index(af.field, af.feature)));
            }
            accumulate_fm_rows(grad, instance, model.schema, vecs, coef, dim);
        } else if (model.kind == ModelKind::dil) {
            // d logit / d v^s_i == d logit / d v^t_i == S - w_i on the
            // effective embeddings w = v^s (+ v^t), so one accumulation
            // serves both selectors.
            const EmbeddingTable& vs = model.dis.shared_invariant;
            std::vector<double> effective(instance.active.size() * static_cast<std::size_t>(dim));
            std::vector<std::span<const double>> vecs;
            vecs.reserve(instance.active.size());
            const EmbeddingTable* vt = env ? &env_table(model.dis, *env) : nullptr;
            for (std::size_t k = 0; k < instance.active.size(); ++k) {
                const auto& af = instance.active[k];
                const int g = model.schema.global_index(af.field, af.feature);
                double* w = effective.data() + k * dim;
                auto rs = vs.row(g);
                for (int d = 0; d < dim; ++d) w[d] = rs[d];
                if (vt) {
                    auto rt = vt->row(g);
                    for (int d = 0; d < dim; ++d) w[d] += rt[d];
                }
                vecs.emplace_back(w, static_cast<std::size_t>(dim));
            }
            accumulate_fm_rows(grad, instance, model.schema, vecs, coef, dim);
        } else {
            FieldReps reps = compute_field_reps(instance, model.embeddings, model.schema);
            std::vector<double> combined =
                model.kind == ModelKind::lightdil
                    ? combined_pair_weights(model.field_weights, env)
                    : model.field_weights.invariant;
            const bool want_cells = sel.group != Group::shared_table;
            const bool want_rows = sel.group == Group::shared_table;
            accumulate_field_grads(grad, instance, model.schema, reps, combined, coef, dim,
                                   want_cells, want_rows);
        }
    }
    return grad;
}

ModelState init_model(ModelKind kind, const FeatureSchema& schema, int dim, double init_scale,
                      std::uint64_t seed, const std::vector<int>& train_env_ids) {
    if (dim < 1) {
        throw ConfigError("embedding dim must be >= 1");
    }
    ModelState model;
    model.kind = kind;
    model.schema = schema;
    model.schema_hash = schema_hash(schema);
    model.seed = seed;

    Rng rng(seed);
    EmbeddingTable table;
    table.dim = dim;
    table.data.resize(static_cast<std::size_t>(schema.num_features) * dim);
    for (double& x : table.data) x = rng.normal(0.0, init_scale);

    const int m = schema.num_fields();
    const int pairs = m * (m - 1) / 2;

    switch (kind) {
        case ModelKind::fm:
            model.embeddings = std::move(table);
            break;
        case ModelKind::fieldfm:
            model.embeddings = std::move(table);
            model.field_weights.num_fields = m;
            model.field_weights.invariant.assign(pairs, 1.0);
            break;
        case ModelKind::dil:
            model.dis.shared_invariant = std::move(table);
            for (int t : train_env_ids) {
                model.dis.per_env[t] = EmbeddingTable::zeros(schema.num_features, dim);
            }
            break;
        case ModelKind::lightdil:
            model.embeddings = std::move(table);
            model.field_weights.num_fields = m;
            model.field_weights.invariant.assign(pairs, 1.0);
            for (int t : train_env_ids) {
                model.field_weights.per_env[t].assign(pairs, 0.0);
            }
            break;
    }
    return model;
}

InvariantParams get_invariant(const ModelState& model) {
    InvariantParams params;
    switch (model.kind) {
        case ModelKind::dil:
            params.table = model.dis.shared_invariant;
            break;
        case ModelKind::fieldfm:
        case ModelKind::lightdil:
            params.cells = model.field_weights.invariant;
            break;
        case ModelKind::fm:
            throw ConfigError("fm has no phi_s group");
    }
    return params;
}

void set_invariant(ModelState& model, const InvariantParams& params) {
    switch (model.kind) {
        case ModelKind::dil:
            model.dis.shared_invariant = params.table;
            break;
        case ModelKind::fieldfm:
        case ModelKind::lightdil:
            model.field_weights.invariant = params.cells;
            break;
        case ModelKind::fm:
            throw ConfigError("fm has no phi_s group");
    }
}

void sgd_axpy(InvariantParams& params, double scale, const GradientSet& grad) {
    for (const auto& [key, row] : grad.rows) {
        auto dst = params.table.row(key);
        for (std::size_t d = 0; d < row.size(); ++d) dst[d] += scale * row[d];
    }
    for (const auto& [key, cell] : grad.cells) {
        params.cells[key] += scale * cell;
    }
}

}  // namespace stablefi
