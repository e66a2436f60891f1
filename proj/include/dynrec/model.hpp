#pragma once

#include <array>
#include <optional>
#include <string>

#include "dynrec/augment.hpp"
#include "dynrec/distill.hpp"
#include "dynrec/memory.hpp"
#include "dynrec/tgan.hpp"

namespace dynrec {

enum class Variant { Full, NoLlm, NoDistill, NoCrd, NoInt, NoCtg, NoBrd };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
    std::size_t user_dim = 128;
    std::size_t item_static_dim = 64;
    std::size_t item_dynamic_dim = 64;
    std::size_t time_frequencies = 64;  // encoding output is twice this
    std::size_t facet_dim = 128;
    std::size_t hidden_dim = 256;
    std::size_t provider_dim = 1536;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t fusion_layers = 2;
    std::size_t fusion_heads = 2;
    std::size_t n_user_neighbors = 5;
    std::size_t n_item_neighbors = 2;
    std::size_t distill_r = 112;
    double dropout = 0.1;
    Variant variant = Variant::Full;

    void validate() const;
    std::size_t fusion_token_dim() const {
        return variant == Variant::NoDistill ? facet_dim : distill_r;
    }
};

// Optional static node features added to the layer-0 states; defaults to
// all-zero (the datasets carry none).
struct NodeFeatures {
    std::vector<Array> user;  // may be empty
    std::vector<Array> item;
};

struct ForwardContext {
    const TemporalAdjacency* adj = nullptr;
    NodeMemories* memory = nullptr;
    const ProfileIndex* profiles = nullptr;         // unused for NoLlm
    const std::vector<Array>* title_raw = nullptr;  // unused for NoLlm
    const NodeFeatures* features = nullptr;
    bool train = false;
    Rng* dropout_rng = nullptr;
    NodeStateCache state_cache;
    std::vector<Value>* static_cache = nullptr;  // per-item, evaluation only
};

struct ItemForward {
    Value stat;     // 1 x item_static_dim
    Value dynamic;  // 1 x item_dynamic_dim, the freshly computed graph embedding
    Value full;     // 1 x (static + dynamic)
};

class DynModel {
  public:
    DynModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& params() { return ps_; }
    const ParameterStore& params() const { return ps_; }
    const TimeEncoder& encoder() const { return encoder_; }
    const TganStack& tgan() const { return tgan_; }

    // h_u(t): memory, neighbor aggregation, staleness projection, graph MLP,
    // then profile fusion (or the bypass for NoLlm / profile-less users).
    // fusion_weights, when given, receives the last fusion layer's per-head
    // distribution over the facet tokens (empty when the bypass ran).
    Value user_embedding(ForwardContext& ctx, std::size_t u, double t,
                         Array* fusion_weights = nullptr) const;

    ItemForward item_embedding(ForwardContext& ctx, std::size_t i, double t) const;

    Value user_graph_embedding(ForwardContext& ctx, std::size_t u, double t) const;
    Value item_graph_embedding(ForwardContext& ctx, std::size_t i, double t) const;

    // staleness projection h^p = (1 + elapsed * w) o h_prev
    Value project_user(const Value& h_prev, double elapsed) const;

    static Value score(const Value& h_u, const Value& h_i);

    // Post-interaction GRU updates; applies both user and item memories and
    // advances their timestamps to t.
    void apply_event_update(ForwardContext& ctx, std::size_t u, std::size_t i, double t,
                            const Value& h_u_t, const ItemForward& h_i_t) const;

    Value facet_transform(ForwardContext& ctx, const Array& raw, std::size_t facet) const;
    Value item_static_embedding(ForwardContext& ctx, std::size_t i) const;

  private:
    Value user_state0(ForwardContext& ctx, std::size_t u) const;
    Value item_state0(ForwardContext& ctx, std::size_t i) const;
    std::optional<std::vector<Value>> profile_tokens(ForwardContext& ctx, std::size_t u,
                                                     double t) const;

    ModelConfig cfg_;
    ParameterStore ps_;
    TimeEncoder encoder_;
    TganStack tgan_;
    AffineBlock user_mlp_hidden_, user_mlp_out_;
    AffineBlock item_mlp_hidden_, item_mlp_out_;
    Value project_w_;
    std::array<AffineBlock, 4> facet_mlp_;
    std::array<Value, 4> distill_q_;
    AffineBlock item_static_mlp_;
    FusionBlock fusion_;
    AffineBlock bypass_;
    GruCell gru_user_, gru_item_;
};

}  // namespace dynrec
