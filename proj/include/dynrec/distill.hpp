#pragma once

#include <vector>

#include "dynrec/nn.hpp"

namespace dynrec {

// Top-r refinement of a facet embedding: per-dimension scores
// s_j = h_j q_j / ||q||, keep the r highest-scoring dimensions (ties favor
// the lower index) of the gated vector h * tanh(s), emitted in ascending
// original-index order. Gradients flow through the kept coordinates only;
// the selection itself is piecewise constant.
struct DistillResult {
    std::vector<std::size_t> indices;  // ascending original indices
    Value output;                      // 1 x r
};

DistillResult distill(const Value& h, const Value& q, std::size_t r);

// Stacked multi-head attention fusing distilled facet tokens into the
// temporal graph embedding: the query starts as h_G and each layer's output
// (re-projected to the query dimension) queries the next.
struct FusionBlock {
    std::vector<MhaBlock> layers;
    void init(ParameterStore& ps, const std::string& prefix, std::size_t query_dim,
              std::size_t token_dim, std::size_t n_layers, std::size_t heads, Rng& rng);
    // tokens: k x token_dim; weights (optional) receives the last layer's
    // per-head distribution over the k tokens
    Value apply(const Value& query, const Value& tokens, Array* weights = nullptr) const;
};

// h_i(t) = static half followed by the dynamic half
Value compose_item(const Value& item_static, const Value& item_dynamic);

}  // namespace dynrec
