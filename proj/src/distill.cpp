#include "dynrec/distill.hpp"

#include <algorithm>
#include <cmath>

namespace dynrec {

DistillResult distill(const Value& h, const Value& q, std::size_t r) {
    const std::size_t m = h->val.numel();
    if (q->val.numel() != m)
        throw DimensionError("distill: h " + h->val.shape_str() + " vs q " + q->val.shape_str());
    if (r < 1 || r > m)
        throw ContractViolation("distill: r must lie in [1, " + std::to_string(m) + "], got " +
                                std::to_string(r));
    double norm2 = 0;
    for (double x : q->val.v) norm2 += x * x;
    if (std::sqrt(norm2) <= 1e-12)
        throw ContractViolation("distill: ||q|| below the 1e-12 numerical guard");

    // s = (h * q) / ||q||, differentiable through the norm as well
    Value inv_norm = reciprocal(vsqrt(sum_sq(q)));
    Value s = mul_by_scalar(mul(h, q), inv_norm);

    // select top-r scores on values; ties keep the lower index
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (s->val[a] != s->val[b]) return s->val[a] > s->val[b];
        return a < b;
    });
    idx.resize(r);
    std::sort(idx.begin(), idx.end());

    DistillResult out;
    out.output = gather_cols(mul(h, vtanh(s)), idx);
    out.indices = std::move(idx);
    return out;
}

void FusionBlock::init(ParameterStore& ps, const std::string& prefix, std::size_t query_dim,
                       std::size_t token_dim, std::size_t n_layers, std::size_t heads, Rng& rng) {
    if (n_layers == 0) throw ConfigError(prefix + ": needs at least one layer");
    layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l)
        layers[l].init(ps, prefix + ".l" + std::to_string(l), query_dim, token_dim, query_dim,
                       query_dim, heads, rng);
}

Value FusionBlock::apply(const Value& query, const Value& tokens, Array* weights) const {
    Value cur = query;
    for (std::size_t l = 0; l < layers.size(); ++l)
        cur = layers[l].apply(cur, tokens, l + 1 == layers.size() ? weights : nullptr);
    return cur;
}

Value compose_item(const Value& item_static, const Value& item_dynamic) {
    const Value parts[2] = {item_static, item_dynamic};
    return concat_cols(parts);
}

}  // namespace dynrec
