#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dynrec {

// Content-addressed on-disk store for provider outputs: one file per key,
// written atomically (temp file + rename) so interrupted augmentation runs
// never leave half entries behind. Corrupt entries are invalidated and the
// caller recomputes them.
class ProfileCache {
  public:
    explicit ProfileCache(std::string dir);

    struct Entry {
        std::string text;
        std::vector<double> vec;
        bool operator==(const Entry&) const = default;
    };

    std::optional<Entry> get(const std::string& key) const;
    void put(const std::string& key, const Entry& entry) const;
    bool has(const std::string& key) const { return get(key).has_value(); }
    std::size_t count_entries() const;

    std::string path_for(const std::string& key) const;

    static std::string facet_key(const std::string& user_id, double window_end, const std::string& facet);
    static std::string title_key(const std::string& title);

  private:
    std::string dir_;
};

}  // namespace dynrec
