#pragma once

#include <cmath>

#include "dynrec/nn.hpp"

namespace dynrec {

// Learnable trigonometric time encoding: d frequencies, output 2d entries
// interleaved [cos(w_k t), sin(w_k t)] scaled by sqrt(1/d), so the output is
// unit-norm for every t.
class TimeEncoder {
  public:
    TimeEncoder() = default;

    void init(ParameterStore& ps, std::size_t d) {
        if (d == 0) throw ConfigError("time encoding needs at least one frequency");
        Array w = Array::zeros({d});
        // geometric ladder from 1 down toward 1e-4, covers seconds-to-months
        for (std::size_t k = 0; k < d; ++k)
            w[k] = std::pow(10.0, -4.0 * static_cast<double>(k) / static_cast<double>(d));
        omega_ = ps.add("time.omega", std::move(w));
    }

    Value encode(double delta_t) const { return time_encode_op(omega_, delta_t); }

    std::size_t frequencies() const { return omega_->val.numel(); }
    std::size_t out_dim() const { return 2 * frequencies(); }
    const Value& omega() const { return omega_; }

  private:
    Value omega_;
};

}  // namespace dynrec
