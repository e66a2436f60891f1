#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynrec/errors.hpp"

namespace dynrec {

struct InteractionEvent {
    std::string user_id;
    std::string item_id;
    double timestamp = 0.0;
    std::string title;
};

// Immutable after ingestion. Events are totally ordered by
// (timestamp, user_id, item_id, input order); integer ids are assigned by
// first appearance in that order.
struct EventLog {
    std::vector<InteractionEvent> events;
    std::unordered_map<std::string, std::size_t> user_index;
    std::unordered_map<std::string, std::size_t> item_index;
    std::vector<std::string> user_ids;  // index -> id
    std::vector<std::string> item_ids;
    std::vector<std::size_t> event_user;  // per event, reindexed
    std::vector<std::size_t> event_item;

    std::size_t n_users() const { return user_ids.size(); }
    std::size_t n_items() const { return item_ids.size(); }
    std::size_t size() const { return events.size(); }

    // title of the item's first occurrence
    std::vector<std::string> item_titles() const;
    std::uint64_t digest() const;
};

EventLog ingest_events(std::istream& in);
EventLog ingest_events_file(const std::string& path);

struct LogSlice {
    const EventLog* log = nullptr;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    const InteractionEvent& operator[](std::size_t i) const { return log->events[begin + i]; }
};

struct SplitResult {
    LogSlice train, val, test;
};

SplitResult chronological_split(const EventLog& log, double train_ratio = 0.7, double val_ratio = 0.15,
                                double test_ratio = 0.15);

struct NeighborRef {
    std::size_t node;  // integer id of the neighbor (opposite side)
    double timestamp;
    std::size_t event_idx;  // position in the sorted log, tie-break key
};

// Counts temporal-neighbor lookups and any returned timestamp that is not
// strictly before the query time (which would be a causality violation).
struct CausalityProbe {
    std::atomic<long> queries{0};
    std::atomic<long> violations{0};
};

// Per-node time-sorted neighbor index over the bipartite interaction graph.
class TemporalAdjacency {
  public:
    explicit TemporalAdjacency(const EventLog& log);

    // The n most recent neighbors strictly before t, most-recent-first;
    // timestamp ties broken by descending event index. Unknown/new nodes
    // yield an empty result.
    std::vector<NeighborRef> user_neighbors(std::size_t user, double t, std::size_t n) const;
    std::vector<NeighborRef> item_neighbors(std::size_t item, double t, std::size_t n) const;

    void set_probe(CausalityProbe* probe) { probe_ = probe; }

  private:
    std::vector<NeighborRef> lookup(const std::vector<std::vector<NeighborRef>>& adj, std::size_t node,
                                    double t, std::size_t n) const;

    std::vector<std::vector<NeighborRef>> by_user_;  // ascending (timestamp, event_idx)
    std::vector<std::vector<NeighborRef>> by_item_;
    CausalityProbe* probe_ = nullptr;
};

}  // namespace dynrec
