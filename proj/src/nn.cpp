#include "dynrec/nn.hpp"

#include <cmath>

namespace dynrec {

Value ParameterStore::add(const std::string& name, Array init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Value v = leaf(std::move(init), name);
    by_name_[name] = ordered_.size();
    ordered_.push_back(v);
    return v;
}

const Value& ParameterStore::get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return ordered_[it->second];
}

void ParameterStore::zero_grads() {
    for (auto& p : ordered_) {
        if (p->grad.numel() != p->val.numel()) p->grad = Array::zeros(p->val.shape);
        else
            std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
    }
}

std::map<std::string, Array> ParameterStore::state_dict() const {
    std::map<std::string, Array> out;
    for (const auto& p : ordered_) out[p->name] = p->val;
    return out;
}

void ParameterStore::load_state_dict(const std::map<std::string, Array>& state) {
    for (auto& p : ordered_) {
        auto it = state.find(p->name);
        if (it == state.end()) throw CheckpointError("checkpoint missing parameter: " + p->name);
        if (it->second.numel() != p->val.numel())
            throw CheckpointError("checkpoint shape mismatch for " + p->name + ": " +
                                  it->second.shape_str() + " vs " + p->val.shape_str());
        p->val.v = it->second.v;
    }
}

Array uniform_init(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
    Array a = Array::zeros(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    for (auto& x : a.v) x = rng.uniform(-bound, bound);
    return a;
}

Value affine(const Value& x, const Value& W, const Value& b) { return add_row(matmul(x, W), b); }

void AffineBlock::init(ParameterStore& ps, const std::string& prefix, std::size_t in, std::size_t out,
                       Rng& rng) {
    W = ps.add(prefix + ".w", uniform_init(rng, {in, out}, in));
    b = ps.add(prefix + ".b", uniform_init(rng, {out}, in));
}

void MhaBlock::init(ParameterStore& ps, const std::string& prefix, std::size_t query_dim,
                    std::size_t key_dim, std::size_t proj_dim, std::size_t out_dim, std::size_t n_heads,
                    Rng& rng) {
    if (n_heads == 0 || proj_dim % n_heads != 0)
        throw ConfigError(prefix + ": heads must divide the projection dimension");
    heads = n_heads;
    Wq = ps.add(prefix + ".wq", uniform_init(rng, {query_dim, proj_dim}, query_dim));
    bq = ps.add(prefix + ".bq", uniform_init(rng, {proj_dim}, query_dim));
    Wk = ps.add(prefix + ".wk", uniform_init(rng, {key_dim, proj_dim}, key_dim));
    bk = ps.add(prefix + ".bk", uniform_init(rng, {proj_dim}, key_dim));
    Wv = ps.add(prefix + ".wv", uniform_init(rng, {key_dim, proj_dim}, key_dim));
    bv = ps.add(prefix + ".bv", uniform_init(rng, {proj_dim}, key_dim));
    Wo = ps.add(prefix + ".wo", uniform_init(rng, {proj_dim, out_dim}, proj_dim));
    bo = ps.add(prefix + ".bo", uniform_init(rng, {out_dim}, proj_dim));
}

Value MhaBlock::apply(const Value& query, const Value& tokens, Array* weights) const {
    Value q = affine(query, Wq, bq);
    Value K = affine(tokens, Wk, bk);
    Value V = affine(tokens, Wv, bv);
    Value att = attention(q, K, V, heads, weights);
    return affine(att, Wo, bo);
}

void GruCell::init(ParameterStore& ps, const std::string& prefix, std::size_t hidden, std::size_t input,
                   Rng& rng) {
    hidden_dim = hidden;
    input_dim = input;
    Wz = ps.add(prefix + ".wz", uniform_init(rng, {input, hidden}, input));
    Uz = ps.add(prefix + ".uz", uniform_init(rng, {hidden, hidden}, hidden));
    bz = ps.add(prefix + ".bz", uniform_init(rng, {hidden}, hidden));
    Wr = ps.add(prefix + ".wr", uniform_init(rng, {input, hidden}, input));
    Ur = ps.add(prefix + ".ur", uniform_init(rng, {hidden, hidden}, hidden));
    br = ps.add(prefix + ".br", uniform_init(rng, {hidden}, hidden));
    Wn = ps.add(prefix + ".wn", uniform_init(rng, {input, hidden}, input));
    Un = ps.add(prefix + ".un", uniform_init(rng, {hidden, hidden}, hidden));
    bn = ps.add(prefix + ".bn", uniform_init(rng, {hidden}, hidden));
}

Value GruCell::apply(const Value& hidden, const Value& input) const {
    if (hidden->val.numel() != hidden_dim || input->val.numel() != input_dim)
        throw DimensionError("gru: got hidden " + hidden->val.shape_str() + " input " +
                             input->val.shape_str() + ", configured " + std::to_string(hidden_dim) + "/" +
                             std::to_string(input_dim));
    Value z = vsigmoid(add_row(add(matmul(input, Wz), matmul(hidden, Uz)), bz));
    Value r = vsigmoid(add_row(add(matmul(input, Wr), matmul(hidden, Ur)), br));
    Value n = vtanh(add_row(add(matmul(input, Wn), matmul(mul(r, hidden), Un)), bn));
    // (1-z)*n + z*h  ==  n - z*n + z*h
    return add(sub(n, mul(z, n)), mul(z, hidden));
}

void Adam::step(ParameterStore& ps) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& p : ps.ordered()) {
        auto& m = m_[p.get()];
        auto& v = v_[p.get()];
        if (m.empty()) {
            m.assign(p->val.numel(), 0.0);
            v.assign(p->val.numel(), 0.0);
        }
        if (p->grad.numel() != p->val.numel()) continue;  // never touched by backward
        for (std::size_t i = 0; i < p->val.numel(); ++i) {
            const double g = p->grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace dynrec
