#include "dynrec/events.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dynrec/rng.hpp"

namespace dynrec {

namespace {

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size() && std::isfinite(out);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace

EventLog ingest_events(std::istream& in) {
    EventLog log;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 4)
            throw IngestError(lineno, "expected 4 tab-separated fields, got " +
                                          std::to_string(fields.size()));
        double ts;
        if (!parse_double(fields[2], ts)) {
            // optional header line, detected by a non-numeric timestamp field
            if (first) {
                first = false;
                continue;
            }
            throw IngestError(lineno, "timestamp is not a number: '" + fields[2] + "'");
        }
        first = false;
        if (ts < 0) throw ValidationError(lineno, "negative timestamp");
        if (fields[0].empty()) throw IngestError(lineno, "empty user id");
        if (fields[1].empty()) throw IngestError(lineno, "empty item id");
        log.events.push_back({fields[0], fields[1], ts, fields[3]});
    }

    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         if (a.user_id != b.user_id) return a.user_id < b.user_id;
                         return a.item_id < b.item_id;
                     });

    log.event_user.reserve(log.events.size());
    log.event_item.reserve(log.events.size());
    for (const auto& e : log.events) {
        auto [uit, unew] = log.user_index.try_emplace(e.user_id, log.user_ids.size());
        if (unew) log.user_ids.push_back(e.user_id);
        auto [iit, inew] = log.item_index.try_emplace(e.item_id, log.item_ids.size());
        if (inew) log.item_ids.push_back(e.item_id);
        log.event_user.push_back(uit->second);
        log.event_item.push_back(iit->second);
    }
    return log;
}

EventLog ingest_events_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError(0, "cannot open event file: " + path);
    return ingest_events(in);
}

std::vector<std::string> EventLog::item_titles() const {
    std::vector<std::string> titles(item_ids.size());
    std::vector<bool> seen(item_ids.size(), false);
    for (std::size_t k = 0; k < events.size(); ++k) {
        const std::size_t i = event_item[k];
        if (!seen[i]) {
            seen[i] = true;
            titles[i] = events[k].title;
        }
    }
    return titles;
}

std::uint64_t EventLog::digest() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& e : events) {
        h = fnv1a64(e.user_id.data(), e.user_id.size(), h);
        h = fnv1a64(e.item_id.data(), e.item_id.size(), h);
        h = fnv1a64(&e.timestamp, sizeof(e.timestamp), h);
        h = fnv1a64(e.title.data(), e.title.size(), h);
    }
    return h;
}

SplitResult chronological_split(const EventLog& log, double train_ratio, double val_ratio,
                                double test_ratio) {
    if (train_ratio <= 0 || val_ratio <= 0 || test_ratio <= 0 ||
        std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw SplitError("split ratios must be positive and sum to 1");
    const std::size_t n = log.size();
    if (n < 3) throw SplitError("need at least 3 events to split, got " + std::to_string(n));
    const std::size_t n_train = static_cast<std::size_t>(std::floor(train_ratio * n));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * n));
    SplitResult r;
    r.train = {&log, 0, n_train};
    r.val = {&log, n_train, n_train + n_val};
    r.test = {&log, n_train + n_val, n};
    return r;
}

TemporalAdjacency::TemporalAdjacency(const EventLog& log) {
    by_user_.resize(log.n_users());
    by_item_.resize(log.n_items());
    // events are already sorted, so per-node lists come out ascending by
    // (timestamp, event_idx)
    for (std::size_t k = 0; k < log.size(); ++k) {
        const double t = log.events[k].timestamp;
        by_user_[log.event_user[k]].push_back({log.event_item[k], t, k});
        by_item_[log.event_item[k]].push_back({log.event_user[k], t, k});
    }
}

std::vector<NeighborRef> TemporalAdjacency::lookup(const std::vector<std::vector<NeighborRef>>& adj,
                                                   std::size_t node, double t, std::size_t n) const {
    if (probe_) probe_->queries.fetch_add(1, std::memory_order_relaxed);
    std::vector<NeighborRef> out;
    if (node >= adj.size() || n == 0) return out;
    const auto& list = adj[node];
    // first element with timestamp >= t
    auto it = std::lower_bound(list.begin(), list.end(), t,
                               [](const NeighborRef& a, double tt) { return a.timestamp < tt; });
    std::size_t avail = static_cast<std::size_t>(it - list.begin());
    std::size_t take = std::min(n, avail);
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const NeighborRef& r = list[avail - 1 - i];
        if (probe_ && r.timestamp >= t) probe_->violations.fetch_add(1, std::memory_order_relaxed);
        out.push_back(r);
    }
    return out;
}

std::vector<NeighborRef> TemporalAdjacency::user_neighbors(std::size_t user, double t,
                                                           std::size_t n) const {
    return lookup(by_user_, user, t, n);
}

std::vector<NeighborRef> TemporalAdjacency::item_neighbors(std::size_t item, double t,
                                                           std::size_t n) const {
    return lookup(by_item_, item, t, n);
}

}  // namespace dynrec
