#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dynrec/array.hpp"
#include "dynrec/cache.hpp"
#include "dynrec/events.hpp"
#include "dynrec/provider.hpp"

namespace dynrec {

// Deterministic prompt over a user's recent purchase titles, most recent
// last, instructing a labeled four-field reply.
std::string build_prompt(const std::string& user_id, const std::vector<std::string>& titles);

// A user's profile refresh point: triggered after their k-th event for
// k = 1, 1+B, 1+2B, ... using the most recent min(B, history) titles. The
// bundle only becomes effective strictly after window_end, so a prediction
// never sees a profile built from its own event.
struct RefreshPoint {
    std::size_t user;        // integer user id
    std::string user_id;     // external id (cache key component)
    double window_end;       // timestamp of the refresh event
    std::size_t event_idx;   // index of the refresh event in the log
    std::vector<std::string> titles;
};

std::vector<RefreshPoint> refresh_schedule(const EventLog& log, std::size_t refresh_every);

struct AugmentStats {
    std::size_t refresh_points = 0;
    std::size_t gen_calls = 0;
    std::size_t embed_calls = 0;
    std::size_t cache_hits = 0;
    std::vector<std::string> failed_keys;
};

struct AugmentOptions {
    std::size_t refresh_every = 20;
    int retries = 2;
    double rate_per_sec = 0.0;  // 0 = unthrottled
    std::size_t concurrency = 1;
};

// Populates the cache with 4 facet entries per refresh point plus one entry
// per distinct item title. Resumable: cache hits are never refetched; per-key
// provider failures are recorded and the rest proceeds.
AugmentStats run_augment(const EventLog& log, LlmProvider& provider, const ProfileCache& cache,
                         const AugmentOptions& opts);

// One generated profile window: four facet texts and their frozen raw
// embeddings.
struct ProfileBundle {
    double window_end = 0.0;
    std::array<std::string, 4> texts;
    std::array<Array, 4> raw;
};

// Per-user bundles in window_end order, rebuilt deterministically from the
// log and cache. Lookup is strictly-before so profiles cannot leak the event
// being predicted.
class ProfileIndex {
  public:
    static ProfileIndex load(const EventLog& log, const ProfileCache& cache, std::size_t refresh_every);

    const ProfileBundle* latest_before(std::size_t user, double t) const;
    std::size_t bundle_count() const;

  private:
    std::vector<std::vector<ProfileBundle>> by_user_;
};

// Raw title embeddings, one per item (title of first occurrence). Throws
// naming the missing cache key when augmentation has not covered an item.
std::vector<Array> load_title_embeddings(const EventLog& log, const ProfileCache& cache);

}  // namespace dynrec
