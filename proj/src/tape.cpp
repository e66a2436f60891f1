#include "dynrec/tape.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace dynrec {

namespace {

thread_local bool g_grad_enabled = true;

Value make_node(Array val) {
    auto n = std::make_shared<TapeNode>();
    n->val = std::move(val);
    return n;
}

bool track(std::initializer_list<const Value*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Value* v : inputs)
        if (*v && (*v)->tracked) return true;
    return false;
}

void attach(Value& out, std::initializer_list<Value> parents, std::function<void(TapeNode&)> fn) {
    out->tracked = true;
    out->parents.assign(parents);
    out->backfn = std::move(fn);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Value constant(Array v) { return make_node(std::move(v)); }

Value leaf(Array v, std::string name) {
    auto n = make_node(std::move(v));
    n->tracked = true;
    n->name = std::move(name);
    return n;
}

Value add(const Value& a, const Value& b) {
    require_same_shape(a->val, b->val, "add");
    Array out = a->val;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->val[i];
    Value r = make_node(std::move(out));
    if (track({&a, &b}))
        attach(r, {a, b}, [a, b](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
            }
            if (b->tracked) {
                Array& gb = b->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) gb[i] += n.grad[i];
            }
        });
    return r;
}

Value sub(const Value& a, const Value& b) {
    require_same_shape(a->val, b->val, "sub");
    Array out = a->val;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->val[i];
    Value r = make_node(std::move(out));
    if (track({&a, &b}))
        attach(r, {a, b}, [a, b](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
            }
            if (b->tracked) {
                Array& gb = b->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) gb[i] -= n.grad[i];
            }
        });
    return r;
}

Value mul(const Value& a, const Value& b) {
    require_same_shape(a->val, b->val, "mul");
    Array out = a->val;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
    Value r = make_node(std::move(out));
    if (track({&a, &b}))
        attach(r, {a, b}, [a, b](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * b->val[i];
            }
            if (b->tracked) {
                Array& gb = b->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) gb[i] += n.grad[i] * a->val[i];
            }
        });
    return r;
}

Value scale(const Value& a, double c) {
    Array out = a->val;
    for (auto& x : out.v) x *= c;
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a, c](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += c * n.grad[i];
        });
    return r;
}

Value matmul(const Value& a, const Value& b) {
    const std::size_t r = a->val.rows(), m = a->val.cols();
    const std::size_t m2 = b->val.rows(), c = b->val.cols();
    if (m != m2)
        throw DimensionError("matmul: inner dimensions differ " + a->val.shape_str() + " vs " +
                             b->val.shape_str());
    Array out = Array::zeros(r == 1 ? std::vector<std::size_t>{c} : std::vector<std::size_t>{r, c});
    for (std::size_t i = 0; i < r; ++i) {
        const double* arow = a->val.v.data() + i * m;
        double* orow = out.v.data() + i * c;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b->val.v.data() + k * c;
            for (std::size_t j = 0; j < c; ++j) orow[j] += aik * brow[j];
        }
    }
    Value res = make_node(std::move(out));
    if (track({&a, &b}))
        attach(res, {a, b}, [a, b, r, m, c](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t k = 0; k < m; ++k) {
                        double s = 0;
                        const double* grow = n.grad.v.data() + i * c;
                        const double* brow = b->val.v.data() + k * c;
                        for (std::size_t j = 0; j < c; ++j) s += grow[j] * brow[j];
                        ga[i * m + k] += s;
                    }
            }
            if (b->tracked) {
                Array& gb = b->g();
                for (std::size_t i = 0; i < r; ++i) {
                    const double* arow = a->val.v.data() + i * m;
                    const double* grow = n.grad.v.data() + i * c;
                    for (std::size_t k = 0; k < m; ++k) {
                        const double aik = arow[k];
                        if (aik == 0.0) continue;
                        double* gbrow = gb.v.data() + k * c;
                        for (std::size_t j = 0; j < c; ++j) gbrow[j] += aik * grow[j];
                    }
                }
            }
        });
    return res;
}

Value add_row(const Value& a, const Value& bias) {
    const std::size_t r = a->val.rows(), c = a->val.cols();
    if (bias->val.numel() != c)
        throw DimensionError("add_row: bias " + bias->val.shape_str() + " does not match columns of " +
                             a->val.shape_str());
    Array out = a->val;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.v[i * c + j] += bias->val[j];
    Value res = make_node(std::move(out));
    if (track({&a, &bias}))
        attach(res, {a, bias}, [a, bias, r, c](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
            }
            if (bias->tracked) {
                Array& gb = bias->g();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += n.grad.v[i * c + j];
            }
        });
    return res;
}

Value vtanh(const Value& a) {
    Array out = a->val;
    for (auto& x : out.v) x = std::tanh(x);
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                ga[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
        });
    return r;
}

Value vsigmoid(const Value& a) {
    Array out = a->val;
    for (auto& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                ga[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
        });
    return r;
}

Value softmax_rows(const Value& a) {
    const std::size_t r = a->val.rows(), c = a->val.cols();
    Array out = a->val;
    for (std::size_t i = 0; i < r; ++i) {
        double* row = out.v.data() + i * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (std::size_t j = 0; j < c; ++j) row[j] /= s;
    }
    Value res = make_node(std::move(out));
    if (track({&a}))
        attach(res, {a}, [a, r, c](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < r; ++i) {
                const double* y = n.val.v.data() + i * c;
                const double* g = n.grad.v.data() + i * c;
                double gy = 0;
                for (std::size_t j = 0; j < c; ++j) gy += g[j] * y[j];
                for (std::size_t j = 0; j < c; ++j) ga.v[i * c + j] += (g[j] - gy) * y[j];
            }
        });
    return res;
}

Value concat_cols(std::span<const Value> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: empty input");
    const std::size_t r = parts[0]->val.rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->val.rows() != r) throw DimensionError("concat_cols: row counts differ");
        total += p->val.cols();
    }
    Array out = Array::zeros(r == 1 ? std::vector<std::size_t>{total} : std::vector<std::size_t>{r, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t c = p->val.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.v[i * total + off + j] = p->val.v[i * c + j];
        off += c;
    }
    Value res = make_node(std::move(out));
    bool want = false;
    if (g_grad_enabled)
        for (const auto& p : parts)
            if (p->tracked) want = true;
    if (want) {
        std::vector<Value> ps(parts.begin(), parts.end());
        res->tracked = true;
        res->parents = ps;
        res->backfn = [ps, r, total](TapeNode& n) {
            std::size_t off = 0;
            for (const auto& p : ps) {
                const std::size_t c = p->val.cols();
                if (p->tracked) {
                    Array& gp = p->g();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) gp.v[i * c + j] += n.grad.v[i * total + off + j];
                }
                off += c;
            }
        };
    }
    return res;
}

Value stack_rows(std::span<const Value> rows) {
    if (rows.empty()) throw DimensionError("stack_rows: empty input");
    const std::size_t c = rows[0]->val.numel();
    for (const auto& p : rows)
        if (p->val.numel() != c) throw DimensionError("stack_rows: row lengths differ");
    Array out = Array::zeros({rows.size(), c});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.v[i * c + j] = rows[i]->val[j];
    Value res = make_node(std::move(out));
    bool want = false;
    if (g_grad_enabled)
        for (const auto& p : rows)
            if (p->tracked) want = true;
    if (want) {
        std::vector<Value> ps(rows.begin(), rows.end());
        res->tracked = true;
        res->parents = ps;
        res->backfn = [ps, c](TapeNode& n) {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (!ps[i]->tracked) continue;
                Array& gp = ps[i]->g();
                for (std::size_t j = 0; j < c; ++j) gp[j] += n.grad.v[i * c + j];
            }
        };
    }
    return res;
}

Value gather_cols(const Value& a, std::vector<std::size_t> idx) {
    if (a->val.rows() != 1) throw DimensionError("gather_cols: expects a row vector");
    Array out = Array::zeros({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a->val.numel()) throw DimensionError("gather_cols: index out of range");
        out[i] = a->val[idx[i]];
    }
    Value res = make_node(std::move(out));
    if (track({&a}))
        attach(res, {a}, [a, idx = std::move(idx)](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += n.grad[i];
        });
    return res;
}

Value sum_all(const Value& a) {
    double s = 0;
    for (double x : a->val.v) s += x;
    Value r = make_node(Array::scalar(s));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (auto& g : ga.v) g += n.grad[0];
        });
    return r;
}

Value mean_all(const Value& a) {
    const double inv = 1.0 / static_cast<double>(a->val.numel());
    double s = 0;
    for (double x : a->val.v) s += x;
    Value r = make_node(Array::scalar(s * inv));
    if (track({&a}))
        attach(r, {a}, [a, inv](TapeNode& n) {
            Array& ga = a->g();
            for (auto& g : ga.v) g += n.grad[0] * inv;
        });
    return r;
}

Value sum_sq(const Value& a) {
    double s = 0;
    for (double x : a->val.v) s += x * x;
    Value r = make_node(Array::scalar(s));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += 2.0 * a->val[i] * n.grad[0];
        });
    return r;
}

Value dot(const Value& a, const Value& b) {
    require_same_shape(a->val, b->val, "dot");
    double s = 0;
    for (std::size_t i = 0; i < a->val.numel(); ++i) s += a->val[i] * b->val[i];
    Value r = make_node(Array::scalar(s));
    if (track({&a, &b}))
        attach(r, {a, b}, [a, b](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[0] * b->val[i];
            }
            if (b->tracked) {
                Array& gb = b->g();
                for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += n.grad[0] * a->val[i];
            }
        });
    return r;
}

Value vsqrt(const Value& a) {
    Array out = a->val;
    for (auto& x : out.v) x = std::sqrt(x);
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * 0.5 / n.val[i];
        });
    return r;
}

Value reciprocal(const Value& a) {
    Array out = a->val;
    for (auto& x : out.v) x = 1.0 / x;
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += -n.grad[i] * n.val[i] * n.val[i];
        });
    return r;
}

Value mul_by_scalar(const Value& a, const Value& s) {
    if (s->val.numel() != 1) throw DimensionError("mul_by_scalar: scalar operand must have one entry");
    Array out = a->val;
    for (auto& x : out.v) x *= s->val[0];
    Value r = make_node(std::move(out));
    if (track({&a, &s}))
        attach(r, {a, s}, [a, s](TapeNode& n) {
            if (a->tracked) {
                Array& ga = a->g();
                for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * s->val[0];
            }
            if (s->tracked) {
                double acc = 0;
                for (std::size_t i = 0; i < n.grad.numel(); ++i) acc += n.grad[i] * a->val[i];
                s->g()[0] += acc;
            }
        });
    return r;
}

Value neg_log_sigmoid(const Value& a) {
    // -log(sigmoid(x)) = softplus(-x), computed stably
    Array out = a->val;
    for (auto& x : out.v) {
        const double z = -x;
        x = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    }
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < ga.numel(); ++i) {
                const double sig = 1.0 / (1.0 + std::exp(-a->val[i]));
                ga[i] += n.grad[i] * (sig - 1.0);
            }
        });
    return r;
}

Value dropout(const Value& a, double rate, Rng& rng, bool train) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
    if (!train || rate == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(a->val.numel());
    for (auto& m : mask) m = rng.uniform01() < rate ? 0.0 : keep_scale;
    Array out = a->val;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
    Value r = make_node(std::move(out));
    if (track({&a}))
        attach(r, {a}, [a, mask = std::move(mask)](TapeNode& n) {
            Array& ga = a->g();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * mask[i];
        });
    return r;
}

Value attention(const Value& q, const Value& K, const Value& V, std::size_t heads, Array* weights) {
    const std::size_t p = q->val.numel();
    const std::size_t n = K->val.rows();
    if (K->val.cols() != p || V->val.cols() != p || V->val.rows() != n)
        throw DimensionError("attention: q/K/V dims disagree: q " + q->val.shape_str() + " K " +
                             K->val.shape_str() + " V " + V->val.shape_str());
    if (heads == 0 || p % heads != 0)
        throw DimensionError("attention: heads must divide projected dimension");
    if (n == 0) throw ContractViolation("attention: zero tokens; caller must use the zero-history fallback");
    const std::size_t ph = p / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(ph));

    Array attn = Array::zeros({heads, n});
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * ph;
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double z = 0;
            const double* krow = K->val.v.data() + j * p + off;
            const double* qh = q->val.v.data() + off;
            for (std::size_t d = 0; d < ph; ++d) z += qh[d] * krow[d];
            z *= inv_scale;
            attn.at(h, j) = z;
            mx = std::max(mx, z);
        }
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = std::exp(attn.at(h, j) - mx);
            attn.at(h, j) = e;
            s += e;
        }
        for (std::size_t j = 0; j < n; ++j) attn.at(h, j) /= s;
    }
    if (weights) *weights = attn;

    Array out = Array::zeros({p});
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * ph;
        for (std::size_t j = 0; j < n; ++j) {
            const double a = attn.at(h, j);
            const double* vrow = V->val.v.data() + j * p + off;
            for (std::size_t d = 0; d < ph; ++d) out[off + d] += a * vrow[d];
        }
    }
    Value res = make_node(std::move(out));
    if (track({&q, &K, &V}))
        attach(res, {q, K, V}, [q, K, V, heads, ph, p, n, inv_scale, attn](TapeNode& node) {
            Array gq = Array::zeros({p});
            Array gK = Array::zeros({n, p});
            Array gV = Array::zeros({n, p});
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * ph;
                const double* gh = node.grad.v.data() + off;
                // da_j = g_h . V_h[j]; dV_h[j] = a_j g_h
                std::vector<double> da(n, 0.0);
                for (std::size_t j = 0; j < n; ++j) {
                    const double* vrow = V->val.v.data() + j * p + off;
                    double s = 0;
                    for (std::size_t d = 0; d < ph; ++d) {
                        s += gh[d] * vrow[d];
                        gV.v[j * p + off + d] += attn.at(h, j) * gh[d];
                    }
                    da[j] = s;
                }
                // softmax backward
                double dga = 0;
                for (std::size_t j = 0; j < n; ++j) dga += da[j] * attn.at(h, j);
                for (std::size_t j = 0; j < n; ++j) {
                    const double dz = (da[j] - dga) * attn.at(h, j) * inv_scale;
                    const double* krow = K->val.v.data() + j * p + off;
                    const double* qh = q->val.v.data() + off;
                    for (std::size_t d = 0; d < ph; ++d) {
                        gq[off + d] += dz * krow[d];
                        gK.v[j * p + off + d] += dz * qh[d];
                    }
                }
            }
            if (q->tracked) {
                Array& g = q->g();
                for (std::size_t i = 0; i < p; ++i) g[i] += gq[i];
            }
            if (K->tracked) {
                Array& g = K->g();
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gK[i];
            }
            if (V->tracked) {
                Array& g = V->g();
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gV[i];
            }
        });
    return res;
}

Value time_encode_op(const Value& omega, double delta_t) {
    if (delta_t < 0.0)
        throw ContractViolation("time encoding requires a non-negative elapsed time, got " +
                                std::to_string(delta_t));
    const std::size_t d = omega->val.numel();
    const double s = std::sqrt(1.0 / static_cast<double>(d));
    Array out = Array::zeros({2 * d});
    for (std::size_t k = 0; k < d; ++k) {
        const double a = omega->val[k] * delta_t;
        out[2 * k] = s * std::cos(a);
        out[2 * k + 1] = s * std::sin(a);
    }
    Value r = make_node(std::move(out));
    if (track({&omega}))
        attach(r, {omega}, [omega, delta_t, d, s](TapeNode& n) {
            Array& go = omega->g();
            for (std::size_t k = 0; k < d; ++k) {
                const double a = omega->val[k] * delta_t;
                go[k] += n.grad[2 * k] * (-s * delta_t * std::sin(a)) +
                         n.grad[2 * k + 1] * (s * delta_t * std::cos(a));
            }
        });
    return r;
}

void backward(const Value& root) {
    if (root->val.numel() != 1) throw DimensionError("backward: root must be scalar");
    // iterative post-order topological sort
    std::vector<TapeNode*> order;
    std::unordered_set<TapeNode*> visited;
    std::vector<std::pair<TapeNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            TapeNode* next = node->parents[child].get();
            ++child;
            if (visited.insert(next).second) stack.emplace_back(next, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->g()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn(**it);
}

void release_graph(const Value& root) {
    std::vector<Value> pending;
    pending.push_back(root);
    std::unordered_set<TapeNode*> seen{root.get()};
    while (!pending.empty()) {
        Value cur = std::move(pending.back());
        pending.pop_back();
        for (auto& p : cur->parents)
            if (seen.insert(p.get()).second) pending.push_back(p);
        cur->parents.clear();
        cur->backfn = nullptr;
    }
}

}  // namespace dynrec
