#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynrec/rng.hpp"
#include "dynrec/tape.hpp"

namespace dynrec {

// All trainable arrays live in one store; names are unique and stable so the
// checkpoint container round-trips exactly.
class ParameterStore {
  public:
    Value add(const std::string& name, Array init);
    const Value& get(const std::string& name) const;
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }
    const std::vector<Value>& ordered() const { return ordered_; }
    std::size_t size() const { return ordered_.size(); }

    void zero_grads();
    std::map<std::string, Array> state_dict() const;
    void load_state_dict(const std::map<std::string, Array>& state);

  private:
    std::vector<Value> ordered_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

Array uniform_init(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in);

// y = x W + b
Value affine(const Value& x, const Value& W, const Value& b);

struct AffineBlock {
    Value W, b;
    void init(ParameterStore& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
    Value apply(const Value& x) const { return affine(x, W, b); }
};

// Multi-head attention with learned query/key/value/output projections.
struct MhaBlock {
    Value Wq, bq, Wk, bk, Wv, bv, Wo, bo;
    std::size_t heads = 1;

    void init(ParameterStore& ps, const std::string& prefix, std::size_t query_dim, std::size_t key_dim,
              std::size_t proj_dim, std::size_t out_dim, std::size_t n_heads, Rng& rng);
    // query: 1 x query_dim, tokens: n x key_dim -> 1 x out_dim
    Value apply(const Value& query, const Value& tokens, Array* weights = nullptr) const;
};

// Gated recurrent unit, gate convention:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r*h) Un + bn)
//   h' = (1-z)*n + z*h
struct GruCell {
    Value Wz, Uz, bz, Wr, Ur, br, Wn, Un, bn;
    std::size_t hidden_dim = 0, input_dim = 0;

    void init(ParameterStore& ps, const std::string& prefix, std::size_t hidden, std::size_t input, Rng& rng);
    Value apply(const Value& hidden, const Value& input) const;
};

class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(ParameterStore& ps);
    void reset() {
        m_.clear();
        v_.clear();
        t_ = 0;
    }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::unordered_map<const TapeNode*, std::vector<double>> m_, v_;
};

}  // namespace dynrec
