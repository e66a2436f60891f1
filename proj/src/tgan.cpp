#include "dynrec/tgan.hpp"

#include <cstring>

namespace dynrec {

NodeStateCache::Key NodeStateCache::make_key(Side side, std::size_t node, std::size_t layer, double t) {
    std::uint64_t tb;
    std::memcpy(&tb, &t, 8);
    Key k;
    k.a = (static_cast<std::uint64_t>(node) << 10) | (static_cast<std::uint64_t>(layer) << 1) |
          (side == Side::User ? 0u : 1u);
    k.b = tb;
    return k;
}

Value* NodeStateCache::find(Side side, std::size_t node, std::size_t layer, double t) {
    auto it = map_.find(make_key(side, node, layer, t));
    return it == map_.end() ? nullptr : &it->second;
}

void NodeStateCache::store(Side side, std::size_t node, std::size_t layer, double t, Value v) {
    map_[make_key(side, node, layer, t)] = std::move(v);
}

void TganStack::init(ParameterStore& ps, const TganConfig& cfg, const TimeEncoder* encoder, Rng& rng) {
    if (cfg.layers == 0) throw ConfigError("tgan: needs at least one layer");
    if (cfg.n_user_neighbors == 0 || cfg.n_item_neighbors == 0)
        throw ConfigError("tgan: neighbor counts must be >= 1");
    cfg_ = cfg;
    encoder_ = encoder;
    const std::size_t dt = encoder->out_dim();
    user_layers_.resize(cfg.layers);
    item_layers_.resize(cfg.layers);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        // aggregating into a user: tokens are item states, and vice versa
        user_layers_[l].init(ps, "tgan.user.l" + std::to_string(l), cfg.user_dim + dt,
                             cfg.item_dim + dt, cfg.user_dim, cfg.user_dim, cfg.heads, rng);
        item_layers_[l].init(ps, "tgan.item.l" + std::to_string(l), cfg.item_dim + dt,
                             cfg.user_dim + dt, cfg.item_dim, cfg.item_dim, cfg.heads, rng);
    }
}

Value TganStack::layer_forward(Side side, const Value& query_state,
                               const std::vector<std::pair<Value, double>>& neighbors, double t,
                               std::size_t layer, Array* weights) const {
    if (layer >= cfg_.layers) throw ContractViolation("tgan: layer index out of range");
    if (neighbors.empty()) return constant(Array::zeros({side_dim(side)}));

    std::vector<Value> tokens;
    tokens.reserve(neighbors.size());
    for (const auto& [state, tk] : neighbors) {
        if (!(tk < t))
            throw ContractViolation("tgan: neighbor timestamp " + std::to_string(tk) +
                                    " is not strictly before " + std::to_string(t));
        const Value parts[2] = {state, encoder_->encode(t - tk)};
        tokens.push_back(concat_cols(parts));
    }
    const Value qparts[2] = {query_state, encoder_->encode(0.0)};
    Value query = concat_cols(qparts);
    Value stack = stack_rows(tokens);
    const MhaBlock& mha = side == Side::User ? user_layers_[layer] : item_layers_[layer];
    return mha.apply(query, stack, weights);
}

Value TganStack::node_state(Side side, std::size_t node, double t, std::size_t layer,
                            const TemporalAdjacency& adj, const StateFn& user_state0,
                            const StateFn& item_state0, NodeStateCache& cache) const {
    if (layer == 0) return side == Side::User ? user_state0(node) : item_state0(node);
    if (Value* hit = cache.find(side, node, layer, t)) return *hit;

    auto nbrs = side == Side::User ? adj.user_neighbors(node, t, cfg_.n_user_neighbors)
                                   : adj.item_neighbors(node, t, cfg_.n_item_neighbors);
    Value result;
    if (nbrs.empty()) {
        result = constant(Array::zeros({side_dim(side)}));
    } else {
        const Side other = side == Side::User ? Side::Item : Side::User;
        std::vector<std::pair<Value, double>> tokens;
        tokens.reserve(nbrs.size());
        for (const auto& nb : nbrs)
            tokens.emplace_back(
                node_state(other, nb.node, nb.timestamp, layer - 1, adj, user_state0, item_state0, cache),
                nb.timestamp);
        Value query = node_state(side, node, t, layer - 1, adj, user_state0, item_state0, cache);
        result = layer_forward(side, query, tokens, t, layer - 1);
    }
    cache.store(side, node, layer, t, result);
    return result;
}

Value TganStack::neighbor_embedding(Side side, std::size_t node, double t, const TemporalAdjacency& adj,
                                    const StateFn& user_state0, const StateFn& item_state0,
                                    NodeStateCache& cache) const {
    return node_state(side, node, t, cfg_.layers, adj, user_state0, item_state0, cache);
}

}  // namespace dynrec
