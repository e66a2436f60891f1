#include "dynrec/model.hpp"

namespace dynrec {

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "no_llm") return Variant::NoLlm;
    if (name == "no_distill") return Variant::NoDistill;
    if (name == "no_crd") return Variant::NoCrd;
    if (name == "no_int") return Variant::NoInt;
    if (name == "no_ctg") return Variant::NoCtg;
    if (name == "no_brd") return Variant::NoBrd;
    throw ConfigError("unknown variant '" + name +
                      "' (expected full|no_llm|no_distill|no_crd|no_int|no_ctg|no_brd)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoLlm: return "no_llm";
        case Variant::NoDistill: return "no_distill";
        case Variant::NoCrd: return "no_crd";
        case Variant::NoInt: return "no_int";
        case Variant::NoCtg: return "no_ctg";
        default: return "no_brd";
    }
}

void ModelConfig::validate() const {
    if (user_dim == 0 || item_static_dim == 0 || item_dynamic_dim == 0 || facet_dim == 0 ||
        hidden_dim == 0 || provider_dim == 0 || time_frequencies == 0)
        throw ConfigError("all model dimensions must be positive");
    if (user_dim != item_static_dim + item_dynamic_dim)
        throw ConfigError("user_dim must equal item_static_dim + item_dynamic_dim for the inner-product score");
    if (layers == 0 || fusion_layers == 0) throw ConfigError("layer counts must be >= 1");
    if (heads == 0 || user_dim % heads != 0 || item_dynamic_dim % heads != 0)
        throw ConfigError("heads must divide the user and item dynamic dimensions");
    if (fusion_heads == 0 || user_dim % fusion_heads != 0)
        throw ConfigError("fusion heads must divide user_dim");
    if (n_user_neighbors == 0 || n_item_neighbors == 0)
        throw ConfigError("neighbor counts must be >= 1");
    if (distill_r < 1 || distill_r > facet_dim)
        throw ConfigError("distill_r must lie in [1, facet_dim]");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

DynModel::DynModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng(seed).fork("params");

    encoder_.init(ps_, cfg_.time_frequencies);
    TganConfig tc;
    tc.layers = cfg_.layers;
    tc.heads = cfg_.heads;
    tc.n_user_neighbors = cfg_.n_user_neighbors;
    tc.n_item_neighbors = cfg_.n_item_neighbors;
    tc.user_dim = cfg_.user_dim;
    tc.item_dim = cfg_.item_dynamic_dim;
    tgan_.init(ps_, tc, &encoder_, rng);

    user_mlp_hidden_.init(ps_, "tgan.user_mlp.hidden", 3 * cfg_.user_dim, cfg_.hidden_dim, rng);
    user_mlp_out_.init(ps_, "tgan.user_mlp.out", cfg_.hidden_dim, cfg_.user_dim, rng);
    item_mlp_hidden_.init(ps_, "tgan.item_mlp.hidden", 2 * cfg_.item_dynamic_dim, cfg_.hidden_dim, rng);
    item_mlp_out_.init(ps_, "tgan.item_mlp.out", cfg_.hidden_dim, cfg_.item_dynamic_dim, rng);
    project_w_ = ps_.add("tgan.project.w", uniform_init(rng, {cfg_.user_dim}, cfg_.user_dim));

    for (std::size_t f = 0; f < 4; ++f) {
        facet_mlp_[f].init(ps_, std::string("facet.") + kFacetKeys[f], cfg_.provider_dim,
                           cfg_.facet_dim, rng);
        Array q = uniform_init(rng, {cfg_.facet_dim}, cfg_.facet_dim);
        // keep the norm guard comfortable at init
        q[0] += q[0] >= 0 ? 0.5 : -0.5;
        distill_q_[f] = ps_.add(std::string("distill.") + kFacetKeys[f] + ".q", std::move(q));
    }
    item_static_mlp_.init(ps_, "item_static", cfg_.provider_dim, cfg_.item_static_dim, rng);
    fusion_.init(ps_, "fuse", cfg_.user_dim, cfg_.fusion_token_dim(), cfg_.fusion_layers,
                 cfg_.fusion_heads, rng);
    bypass_.init(ps_, "fuse.bypass", cfg_.user_dim, cfg_.user_dim, rng);
    gru_user_.init(ps_, "gru.user", cfg_.user_dim, cfg_.user_dim + encoder_.out_dim(), rng);
    gru_item_.init(ps_, "gru.item", cfg_.item_dynamic_dim, cfg_.user_dim + encoder_.out_dim(), rng);
}

Value DynModel::user_state0(ForwardContext& ctx, std::size_t u) const {
    Value mem = ctx.memory->user_value(u);
    if (ctx.features && u < ctx.features->user.size() && ctx.features->user[u].numel() != 0)
        return add(mem, constant(ctx.features->user[u]));
    return mem;
}

Value DynModel::item_state0(ForwardContext& ctx, std::size_t i) const {
    Value mem = ctx.memory->item_value(i);
    if (ctx.features && i < ctx.features->item.size() && ctx.features->item[i].numel() != 0)
        return add(mem, constant(ctx.features->item[i]));
    return mem;
}

Value DynModel::project_user(const Value& h_prev, double elapsed) const {
    if (elapsed < 0) throw ContractViolation("projection requires a non-negative elapsed time");
    return add(h_prev, scale(mul(h_prev, project_w_), elapsed));
}

Value DynModel::user_graph_embedding(ForwardContext& ctx, std::size_t u, double t) const {
    Value mem = ctx.memory->user_value(u);
    Value hn = tgan_.neighbor_embedding(
        Side::User, u, t, *ctx.adj, [&](std::size_t n) { return user_state0(ctx, n); },
        [&](std::size_t n) { return item_state0(ctx, n); }, ctx.state_cache);
    Value hp = project_user(mem, t - ctx.memory->user_time(u));
    const Value parts[3] = {mem, hn, hp};
    return user_mlp_out_.apply(vtanh(user_mlp_hidden_.apply(concat_cols(parts))));
}

Value DynModel::item_graph_embedding(ForwardContext& ctx, std::size_t i, double t) const {
    Value mem = ctx.memory->item_value(i);
    Value hn = tgan_.neighbor_embedding(
        Side::Item, i, t, *ctx.adj, [&](std::size_t n) { return user_state0(ctx, n); },
        [&](std::size_t n) { return item_state0(ctx, n); }, ctx.state_cache);
    const Value parts[2] = {mem, hn};
    return item_mlp_out_.apply(vtanh(item_mlp_hidden_.apply(concat_cols(parts))));
}

Value DynModel::facet_transform(ForwardContext& ctx, const Array& raw, std::size_t facet) const {
    if (raw.numel() != cfg_.provider_dim)
        throw DimensionError("facet raw embedding " + raw.shape_str() + " != provider dim " +
                             std::to_string(cfg_.provider_dim));
    // raw LLM embeddings are frozen: enter the graph as constants
    Value out = vtanh(facet_mlp_[facet].apply(constant(raw)));
    if (ctx.train && ctx.dropout_rng)
        out = dropout(out, cfg_.dropout, *ctx.dropout_rng, true);
    return out;
}

Value DynModel::item_static_embedding(ForwardContext& ctx, std::size_t i) const {
    if (cfg_.variant == Variant::NoLlm)
        return constant(Array::zeros({cfg_.item_static_dim}));
    if (ctx.static_cache && i < ctx.static_cache->size() && (*ctx.static_cache)[i])
        return (*ctx.static_cache)[i];
    const Array& raw = ctx.title_raw->at(i);
    Value out = vtanh(item_static_mlp_.apply(constant(raw)));
    if (ctx.train && ctx.dropout_rng) out = dropout(out, cfg_.dropout, *ctx.dropout_rng, true);
    if (ctx.static_cache && i < ctx.static_cache->size()) (*ctx.static_cache)[i] = out;
    return out;
}

std::optional<std::vector<Value>> DynModel::profile_tokens(ForwardContext& ctx, std::size_t u,
                                                           double t) const {
    if (cfg_.variant == Variant::NoLlm || !ctx.profiles) return std::nullopt;
    const ProfileBundle* bundle = ctx.profiles->latest_before(u, t);
    if (!bundle) return std::nullopt;  // no profile window yet: bypass path

    std::vector<Value> tokens;
    for (std::size_t f = 0; f < 4; ++f) {
        if ((cfg_.variant == Variant::NoCrd && f == 0) || (cfg_.variant == Variant::NoInt && f == 1) ||
            (cfg_.variant == Variant::NoCtg && f == 2) || (cfg_.variant == Variant::NoBrd && f == 3))
            continue;
        Value tf = facet_transform(ctx, bundle->raw[f], f);
        if (cfg_.variant == Variant::NoDistill) tokens.push_back(tf);
        else
            tokens.push_back(distill(tf, distill_q_[f], cfg_.distill_r).output);
    }
    return tokens;
}

Value DynModel::user_embedding(ForwardContext& ctx, std::size_t u, double t,
                               Array* fusion_weights) const {
    Value hg = user_graph_embedding(ctx, u, t);
    auto tokens = profile_tokens(ctx, u, t);
    if (!tokens) {
        if (fusion_weights) *fusion_weights = Array();
        return bypass_.apply(hg);
    }
    const std::size_t expected = cfg_.variant == Variant::Full || cfg_.variant == Variant::NoDistill
                                     ? 4
                                     : 3;
    if (tokens->size() != expected)
        throw ContractViolation("fusion expected " + std::to_string(expected) + " tokens, got " +
                                std::to_string(tokens->size()));
    return fusion_.apply(hg, stack_rows(*tokens), fusion_weights);
}

ItemForward DynModel::item_embedding(ForwardContext& ctx, std::size_t i, double t) const {
    ItemForward out;
    out.dynamic = item_graph_embedding(ctx, i, t);
    out.stat = item_static_embedding(ctx, i);
    out.full = compose_item(out.stat, out.dynamic);
    return out;
}

Value DynModel::score(const Value& h_u, const Value& h_i) { return dot(h_u, h_i); }

void DynModel::apply_event_update(ForwardContext& ctx, std::size_t u, std::size_t i, double t,
                                  const Value& h_u_t, const ItemForward& h_i_t) const {
    const double tu = ctx.memory->user_time(u);
    const double ti = ctx.memory->item_time(i);
    if (t < tu || t < ti)
        throw ContractViolation("event at t=" + std::to_string(t) +
                                " precedes a memory timestamp (causality violation)");
    const Value uparts[2] = {h_i_t.full, encoder_.encode(t - tu)};
    Value new_user = gru_user_.apply(h_u_t, concat_cols(uparts));
    const Value iparts[2] = {h_u_t, encoder_.encode(t - ti)};
    Value new_item = gru_item_.apply(h_i_t.dynamic, concat_cols(iparts));
    ctx.memory->set_user(u, std::move(new_user), t);
    ctx.memory->set_item(i, std::move(new_item), t);
}

}  // namespace dynrec
