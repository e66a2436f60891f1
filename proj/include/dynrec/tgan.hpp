#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "dynrec/events.hpp"
#include "dynrec/nn.hpp"
#include "dynrec/time_encoding.hpp"

namespace dynrec {

enum class Side { User, Item };

struct TganConfig {
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t n_user_neighbors = 5;
    std::size_t n_item_neighbors = 2;
    std::size_t user_dim = 128;
    std::size_t item_dim = 64;  // dynamic half
};

// Memoizes node states within one forward computation, keyed by
// (side, node, layer, evaluation time).
class NodeStateCache {
  public:
    Value* find(Side side, std::size_t node, std::size_t layer, double t);
    void store(Side side, std::size_t node, std::size_t layer, double t, Value v);
    void clear() { map_.clear(); }

  private:
    struct Key {
        std::uint64_t a, b;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const { return k.a * 0x9e3779b97f4a7c15ULL ^ k.b; }
    };
    static Key make_key(Side side, std::size_t node, std::size_t layer, double t);
    std::unordered_map<Key, Value, KeyHash> map_;
};

// Stacked temporal graph attention. Layer-0 states come from the supplied
// callbacks (memory plus node features); layer l attends over a node's
// temporal neighbors' layer-(l-1) states, each evaluated at its own
// interaction time. Zero history yields the zero vector.
class TganStack {
  public:
    using StateFn = std::function<Value(std::size_t node)>;

    void init(ParameterStore& ps, const TganConfig& cfg, const TimeEncoder* encoder, Rng& rng);

    // One attention layer over pre-assembled neighbor states. neighbor times
    // must be strictly before t.
    Value layer_forward(Side side, const Value& query_state,
                        const std::vector<std::pair<Value, double>>& neighbors, double t,
                        std::size_t layer, Array* weights = nullptr) const;

    // Full L-layer recursion for one node at time t.
    Value neighbor_embedding(Side side, std::size_t node, double t, const TemporalAdjacency& adj,
                             const StateFn& user_state0, const StateFn& item_state0,
                             NodeStateCache& cache) const;

    const TganConfig& config() const { return cfg_; }

  private:
    Value node_state(Side side, std::size_t node, double t, std::size_t layer,
                     const TemporalAdjacency& adj, const StateFn& user_state0,
                     const StateFn& item_state0, NodeStateCache& cache) const;

    std::size_t side_dim(Side s) const { return s == Side::User ? cfg_.user_dim : cfg_.item_dim; }
    std::size_t neighbor_count(Side s) const {
        return s == Side::User ? cfg_.n_user_neighbors : cfg_.n_item_neighbors;
    }

    TganConfig cfg_;
    const TimeEncoder* encoder_ = nullptr;
    std::vector<MhaBlock> user_layers_;  // one per layer, aggregating into a user
    std::vector<MhaBlock> item_layers_;
};

}  // namespace dynrec
