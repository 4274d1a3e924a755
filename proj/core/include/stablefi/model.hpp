#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablefi/data.hpp"
#include "stablefi/schema.hpp"

namespace stablefi {

enum class ModelKind { fm, fieldfm, dil, lightdil };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

/// Dense embedding matrix, one row per global feature index.
struct EmbeddingTable {
    int dim = 0;
    std::vector<double> data;  // rows() x dim, row-major

    int rows() const { return dim == 0 ? 0 : static_cast<int>(data.size()) / dim; }

    std::span<double> row(int i) {
        return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> row(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }

    static EmbeddingTable zeros(int rows, int dim);

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

/// Embedding-level disentanglement: an environment-invariant table plus one
/// environment-specific table per training environment.
struct DisentangledEmbeddings {
    EmbeddingTable shared_invariant;
    std::map<int, EmbeddingTable> per_env;

    friend bool operator==(const DisentangledEmbeddings&, const DisentangledEmbeddings&) = default;
};

/// Field-level disentanglement: strictly-upper-triangular field-pair weights,
/// stored packed (i < j only).
struct FieldWeightSet {
    int num_fields = 0;
    std::vector<double> invariant;               // alpha^s
    std::map<int, std::vector<double>> per_env;  // alpha^t

    /// Packed index of pair (i, j), i < j.
    static int pair_index(int i, int j, int num_fields) {
        return i * (2 * num_fields - i - 1) / 2 + (j - i - 1);
    }
    int pair_count() const { return num_fields * (num_fields - 1) / 2; }

    friend bool operator==(const FieldWeightSet&, const FieldWeightSet&) = default;
};

struct ModelState {
    ModelKind kind = ModelKind::fm;
    FeatureSchema schema;
    std::uint64_t schema_hash = 0;
    std::uint64_t seed = 0;

    EmbeddingTable embeddings;      // fm / fieldfm / lightdil
    DisentangledEmbeddings dis;     // dil
    FieldWeightSet field_weights;   // fieldfm (invariant only) / lightdil

    bool has_env_params() const { return kind == ModelKind::dil || kind == ModelKind::lightdil; }
    std::vector<int> env_ids() const;
};

/// Addresses one parameter group: shared_table is "parameters outside phi_s
/// and {phi_t}" (the plain embedding table), invariant is phi_s, env_specific
/// is phi_t for one environment.
struct ParamSelector {
    enum class Group { shared_table, invariant, env_specific };
    Group group = Group::shared_table;
    int env_id = -1;

    static ParamSelector shared() { return {Group::shared_table, -1}; }
    static ParamSelector phi_s() { return {Group::invariant, -1}; }
    static ParamSelector phi_t(int env_id) { return {Group::env_specific, env_id}; }

    friend bool operator==(const ParamSelector&, const ParamSelector&) = default;
};

/// View of the storage behind a selector; exactly one member is non-null.
struct ParamRef {
    EmbeddingTable* table = nullptr;
    std::vector<double>* cells = nullptr;
};

ParamRef resolve_params(ModelState& model, const ParamSelector& sel);

/// Sparse gradients keyed like the parameters they address: embedding rows by
/// global feature index, field-pair weights by packed pair index. Only slots
/// touched by the batch are materialized.
struct GradientSet {
    int dim = 0;
    std::map<int, std::vector<double>> rows;
    std::map<int, double> cells;

    bool empty() const { return rows.empty() && cells.empty(); }
    void scale(double s);
    void axpy(double s, const GradientSet& other);  // this += s * other
    double max_abs() const;
};

double sigmoid(double logit);

/// Sigmoid clipped to [1e-7, 1 - 1e-7] so logloss stays finite.
double predict_proba(double logit);

inline constexpr double kProbClip = 1e-7;

/// Sum of <v_i, v_j> over all pairs of active features, computed with the
/// sum-of-squares identity: 1/2 * sum_d [(sum_i v_id)^2 - sum_i v_id^2].
double fm_forward(const Instance& instance, const EmbeddingTable& table,
                  const FeatureSchema& schema);

/// Mean of the active feature embeddings per field (zero vector for fields
/// with no active feature). Returned flattened, M x dim.
std::vector<double> field_reps(const Instance& instance, const EmbeddingTable& table,
                               const FeatureSchema& schema);

/// Sum of w_ij * <u_i, u_j> over field pairs i < j; `pair_weights` is packed.
double fieldfm_forward(const Instance& instance, const EmbeddingTable& table,
                       std::span<const double> pair_weights, const FeatureSchema& schema);

/// FM forward on v^s + v^t when env is given, on v^s alone in inference mode.
double dil_forward(const Instance& instance, const DisentangledEmbeddings& dis,
                   std::optional<int> env, const FeatureSchema& schema);

/// Field-level forward with weights alpha^s + alpha^t (env given) or alpha^s
/// alone (inference mode).
double lightdil_forward(const Instance& instance, const EmbeddingTable& table,
                        const FieldWeightSet& weights, std::optional<int> env,
                        const FeatureSchema& schema);

/// Dispatches on model.kind. `env` must be a known environment for dil and
/// lightdil, and is ignored by fm and fieldfm.
double model_forward(const ModelState& model, const Instance& instance, std::optional<int> env);

/// Analytic gradient of the mean logloss over `slice` with respect to the
/// selected parameter group, under the given environment mode.
GradientSet backward(std::span<const Instance> slice, const ModelState& model,
                     std::optional<int> env, const ParamSelector& sel);

/// Embeddings ~ N(0, init_scale^2); alpha^s starts at 1 and alpha^t at 0, v^t
/// starts at 0, so disentangled models begin exactly at their ERM counterpart.
ModelState init_model(ModelKind kind, const FeatureSchema& schema, int dim, double init_scale,
                      std::uint64_t seed, const std::vector<int>& train_env_ids = {});

/// Snapshot of phi_s (an embedding table for dil, packed pair weights for
/// fieldfm/lightdil); used by the meta-learning steps.
struct InvariantParams {
    EmbeddingTable table;
    std::vector<double> cells;
};

InvariantParams get_invariant(const ModelState& model);
void set_invariant(ModelState& model, const InvariantParams& params);

/// params += scale * grad, keyed sparsely.
void sgd_axpy(InvariantParams& params, double scale, const GradientSet& grad);

// Model (de)serialization. The JSON layout is
//   {"kind", "dim", "schema_hash", "embeddings", "env_embeddings",
//    "alpha_s", "alpha_t", "seed"}
// with absent sections omitted; schema_hash is 16 lowercase hex digits.
std::string model_to_json(const ModelState& model);
ModelState model_from_json(const std::string& text, const FeatureSchema& schema);
void save_model(const ModelState& model, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path, const FeatureSchema& schema);

}  // namespace stablefi
