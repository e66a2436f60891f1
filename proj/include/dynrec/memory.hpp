#pragma once

#include <map>
#include <vector>

#include "dynrec/tape.hpp"

namespace dynrec {

struct MemorySnapshot {
    Array user_h;  // n_users x user_dim
    Array item_h;  // n_items x item_dyn_dim
    std::vector<double> user_t, item_t;

    std::map<std::string, Array> to_arrays() const;  // "memory." prefixed
    static MemorySnapshot from_arrays(const std::map<std::string, Array>& arrays);
};

// Evolving user embeddings h_u(t-), item dynamic embeddings, and
// last-interaction timestamps. Single-writer: events are applied strictly in
// timestamp order; readers work against the held values.
class NodeMemories {
  public:
    void reset(std::size_t n_users, std::size_t n_items, std::size_t user_dim,
               std::size_t item_dyn_dim);

    const Value& user_value(std::size_t u) const { return user_h_.at(u); }
    const Value& item_value(std::size_t i) const { return item_h_.at(i); }
    double user_time(std::size_t u) const { return user_t_.at(u); }
    double item_time(std::size_t i) const { return item_t_.at(i); }
    double max_timestamp() const;

    void set_user(std::size_t u, Value h, double t);
    void set_item(std::size_t i, Value h, double t);

    // Replaces every stored value with a gradient-free constant; used at
    // optimizer-step boundaries to truncate backpropagation through time.
    void detach_all();

    MemorySnapshot snapshot() const;
    void restore(const MemorySnapshot& snap);

    std::size_t n_users() const { return user_h_.size(); }
    std::size_t n_items() const { return item_h_.size(); }

  private:
    std::vector<Value> user_h_, item_h_;
    std::vector<double> user_t_, item_t_;
    std::size_t user_dim_ = 0, item_dim_ = 0;
};

}  // namespace dynrec
