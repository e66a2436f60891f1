#include "dynrec/augment.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

namespace dynrec {

std::string build_prompt(const std::string& user_id, const std::vector<std::string>& titles) {
    if (titles.empty())
        throw ContractViolation("cannot build a profile prompt for user '" + user_id +
                                "' with no purchase titles");
    std::ostringstream out;
    out << "You are profiling shopper " << user_id << " from their recent purchases.\n";
    out << "Purchased item titles, oldest first:\n";
    for (const auto& t : titles) out << "- " << t << "\n";
    out << "Reply with exactly four lines, one per field, formatted '<key>: <text>'.\n";
    out << "Fields: crd (crowd segments), int (personal interests), "
           "ctg (preferred categories), brd (favored brands).\n";
    return out.str();
}

std::vector<RefreshPoint> refresh_schedule(const EventLog& log, std::size_t refresh_every) {
    if (refresh_every == 0) throw ConfigError("refresh interval must be >= 1");
    std::vector<std::vector<std::size_t>> history(log.n_users());  // event indices per user
    std::vector<RefreshPoint> out;
    for (std::size_t k = 0; k < log.size(); ++k) {
        const std::size_t u = log.event_user[k];
        auto& h = history[u];
        h.push_back(k);
        // refresh after the user's 1st, (1+B)-th, (1+2B)-th ... event
        if ((h.size() - 1) % refresh_every != 0) continue;
        RefreshPoint rp;
        rp.user = u;
        rp.user_id = log.events[k].user_id;
        rp.window_end = log.events[k].timestamp;
        rp.event_idx = k;
        const std::size_t take = std::min(h.size(), refresh_every);
        for (std::size_t i = h.size() - take; i < h.size(); ++i)
            rp.titles.push_back(log.events[h[i]].title);
        out.push_back(std::move(rp));
    }
    return out;
}

AugmentStats run_augment(const EventLog& log, LlmProvider& provider, const ProfileCache& cache,
                         const AugmentOptions& opts) {
    AugmentStats stats;
    auto points = refresh_schedule(log, opts.refresh_every);
    stats.refresh_points = points.size();

    TokenBucket bucket(opts.rate_per_sec);
    std::mutex mu;  // guards stats

    auto process_point = [&](const RefreshPoint& rp) {
        // one generation yields all four facets; skip it when every facet is
        // already cached so reruns only fetch the remainder
        std::array<std::string, 4> keys;
        bool all_hit = true;
        for (std::size_t f = 0; f < 4; ++f) {
            keys[f] = ProfileCache::facet_key(rp.user_id, rp.window_end, kFacetKeys[f]);
            if (!cache.has(keys[f])) all_hit = false;
        }
        if (all_hit) {
            std::lock_guard<std::mutex> lock(mu);
            stats.cache_hits += 4;
            return;
        }
        try {
            bucket.acquire();
            auto gen = generate_profiles(provider, build_prompt(rp.user_id, rp.titles), opts.retries);
            {
                std::lock_guard<std::mutex> lock(mu);
                ++stats.gen_calls;
            }
            for (std::size_t f = 0; f < 4; ++f) {
                bucket.acquire();
                auto vec = embed_text(provider, gen.facets.by_index(f), opts.retries);
                cache.put(keys[f], {gen.facets.by_index(f), vec});
                std::lock_guard<std::mutex> lock(mu);
                ++stats.embed_calls;
            }
        } catch (const std::exception&) {
            std::lock_guard<std::mutex> lock(mu);
            for (auto& k : keys) stats.failed_keys.push_back(k);
        }
    };

    auto titles = log.item_titles();
    auto process_title = [&](std::size_t item) {
        const std::string& title = titles[item];
        if (title.empty()) return;  // static embedding must come from elsewhere
        const std::string key = ProfileCache::title_key(title);
        if (cache.has(key)) {
            std::lock_guard<std::mutex> lock(mu);
            ++stats.cache_hits;
            return;
        }
        try {
            bucket.acquire();
            auto vec = embed_text(provider, title, opts.retries);
            cache.put(key, {title, vec});
            std::lock_guard<std::mutex> lock(mu);
            ++stats.embed_calls;
        } catch (const std::exception&) {
            std::lock_guard<std::mutex> lock(mu);
            stats.failed_keys.push_back(key);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, opts.concurrency);
    if (workers == 1) {
        for (const auto& rp : points) process_point(rp);
        for (std::size_t i = 0; i < titles.size(); ++i) process_title(i);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t total = points.size() + titles.size();
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= total) return;
                    if (i < points.size()) process_point(points[i]);
                    else
                        process_title(i - points.size());
                }
            });
        for (auto& t : pool) t.join();
    }
    std::sort(stats.failed_keys.begin(), stats.failed_keys.end());
    return stats;
}

ProfileIndex ProfileIndex::load(const EventLog& log, const ProfileCache& cache,
                                std::size_t refresh_every) {
    ProfileIndex idx;
    idx.by_user_.resize(log.n_users());
    for (const auto& rp : refresh_schedule(log, refresh_every)) {
        ProfileBundle b;
        b.window_end = rp.window_end;
        for (std::size_t f = 0; f < 4; ++f) {
            const std::string key = ProfileCache::facet_key(rp.user_id, rp.window_end, kFacetKeys[f]);
            auto entry = cache.get(key);
            if (!entry)
                throw CacheError("missing cache entry for key '" + key +
                                 "' (run the augment step first)");
            b.texts[f] = entry->text;
            b.raw[f] = Array::row(entry->vec);
        }
        idx.by_user_[rp.user].push_back(std::move(b));
    }
    return idx;
}

const ProfileBundle* ProfileIndex::latest_before(std::size_t user, double t) const {
    if (user >= by_user_.size()) return nullptr;
    const auto& bundles = by_user_[user];
    const ProfileBundle* best = nullptr;
    for (const auto& b : bundles) {
        if (b.window_end < t) best = &b;
        else
            break;  // bundles are in window_end order
    }
    return best;
}

std::size_t ProfileIndex::bundle_count() const {
    std::size_t n = 0;
    for (const auto& v : by_user_) n += v.size();
    return n;
}

std::vector<Array> load_title_embeddings(const EventLog& log, const ProfileCache& cache) {
    auto titles = log.item_titles();
    std::vector<Array> out(titles.size());
    for (std::size_t i = 0; i < titles.size(); ++i) {
        if (titles[i].empty())
            throw CacheError("item '" + log.item_ids[i] +
                             "' has an empty title and no out-of-band static embedding");
        const std::string key = ProfileCache::title_key(titles[i]);
        auto entry = cache.get(key);
        if (!entry)
            throw CacheError("missing cache entry for key '" + key + "' (run the augment step first)");
        out[i] = Array::row(entry->vec);
    }
    return out;
}

}  // namespace dynrec
