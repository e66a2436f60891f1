#include "dynrec/memory.hpp"

#include <algorithm>

#include "dynrec/errors.hpp"

namespace dynrec {

std::map<std::string, Array> MemorySnapshot::to_arrays() const {
    std::map<std::string, Array> out;
    out["memory.user.h"] = user_h;
    out["memory.item.h"] = item_h;
    out["memory.user.t"] = Array::row(user_t);
    out["memory.item.t"] = Array::row(item_t);
    return out;
}

MemorySnapshot MemorySnapshot::from_arrays(const std::map<std::string, Array>& arrays) {
    MemorySnapshot s;
    auto need = [&](const char* key) -> const Array& {
        auto it = arrays.find(key);
        if (it == arrays.end()) throw CheckpointError(std::string("snapshot missing ") + key);
        return it->second;
    };
    s.user_h = need("memory.user.h");
    s.item_h = need("memory.item.h");
    s.user_t = need("memory.user.t").v;
    s.item_t = need("memory.item.t").v;
    return s;
}

void NodeMemories::reset(std::size_t n_users, std::size_t n_items, std::size_t user_dim,
                         std::size_t item_dyn_dim) {
    user_dim_ = user_dim;
    item_dim_ = item_dyn_dim;
    user_h_.assign(n_users, nullptr);
    item_h_.assign(n_items, nullptr);
    for (auto& v : user_h_) v = constant(Array::zeros({user_dim}));
    for (auto& v : item_h_) v = constant(Array::zeros({item_dyn_dim}));
    user_t_.assign(n_users, 0.0);
    item_t_.assign(n_items, 0.0);
}

double NodeMemories::max_timestamp() const {
    double m = 0.0;
    for (double t : user_t_) m = std::max(m, t);
    for (double t : item_t_) m = std::max(m, t);
    return m;
}

void NodeMemories::set_user(std::size_t u, Value h, double t) {
    if (t < user_t_.at(u))
        throw ContractViolation("user memory update at t=" + std::to_string(t) +
                                " precedes stored t'=" + std::to_string(user_t_[u]));
    if (h->val.numel() != user_dim_) throw DimensionError("user memory dim mismatch");
    user_h_[u] = std::move(h);
    user_t_[u] = t;
}

void NodeMemories::set_item(std::size_t i, Value h, double t) {
    if (t < item_t_.at(i))
        throw ContractViolation("item memory update at t=" + std::to_string(t) +
                                " precedes stored t'=" + std::to_string(item_t_[i]));
    if (h->val.numel() != item_dim_) throw DimensionError("item memory dim mismatch");
    item_h_[i] = std::move(h);
    item_t_[i] = t;
}

void NodeMemories::detach_all() {
    for (auto& v : user_h_)
        if (v->tracked) v = detach(v);
    for (auto& v : item_h_)
        if (v->tracked) v = detach(v);
}

MemorySnapshot NodeMemories::snapshot() const {
    MemorySnapshot s;
    s.user_h = Array::zeros({user_h_.size(), user_dim_});
    for (std::size_t u = 0; u < user_h_.size(); ++u)
        for (std::size_t d = 0; d < user_dim_; ++d) s.user_h.at(u, d) = user_h_[u]->val[d];
    s.item_h = Array::zeros({item_h_.size(), item_dim_});
    for (std::size_t i = 0; i < item_h_.size(); ++i)
        for (std::size_t d = 0; d < item_dim_; ++d) s.item_h.at(i, d) = item_h_[i]->val[d];
    s.user_t = user_t_;
    s.item_t = item_t_;
    return s;
}

void NodeMemories::restore(const MemorySnapshot& snap) {
    if (snap.user_h.rows() != user_h_.size() || snap.item_h.rows() != item_h_.size())
        throw CheckpointError("memory snapshot node counts do not match this dataset");
    for (std::size_t u = 0; u < user_h_.size(); ++u) {
        Array row = Array::zeros({user_dim_});
        for (std::size_t d = 0; d < user_dim_; ++d) row[d] = snap.user_h.at(u, d);
        user_h_[u] = constant(std::move(row));
    }
    for (std::size_t i = 0; i < item_h_.size(); ++i) {
        Array row = Array::zeros({item_dim_});
        for (std::size_t d = 0; d < item_dim_; ++d) row[d] = snap.item_h.at(i, d);
        item_h_[i] = constant(std::move(row));
    }
    user_t_ = snap.user_t;
    item_t_ = snap.item_t;
}

}  // namespace dynrec
