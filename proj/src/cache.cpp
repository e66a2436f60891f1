#include "dynrec/cache.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "dynrec/errors.hpp"
#include "dynrec/sha256.hpp"

namespace fs = std::filesystem;

namespace dynrec {

namespace {

std::string format_time(double t) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", t);
    return buf;
}

std::string hex_encode_doubles(const std::vector<double>& v) {
    std::string out;
    out.reserve(16 * v.size());
    for (double d : v) {
        std::uint64_t u;
        std::memcpy(&u, &d, 8);
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(u));
        out += buf;
    }
    return out;
}

bool hex_decode_doubles(const std::string& hex, std::vector<double>& out) {
    if (hex.size() % 16 != 0) return false;
    out.resize(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t u = 0;
        for (std::size_t j = 0; j < 16; ++j) {
            const char c = hex[16 * i + j];
            std::uint64_t nibble;
            if (c >= '0' && c <= '9') nibble = c - '0';
            else if (c >= 'a' && c <= 'f')
                nibble = 10 + (c - 'a');
            else
                return false;
            u = (u << 4) | nibble;
        }
        std::memcpy(&out[i], &u, 8);
    }
    return true;
}

}  // namespace

ProfileCache::ProfileCache(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw CacheError("cannot create cache directory " + dir_ + ": " + ec.message());
}

std::string ProfileCache::path_for(const std::string& key) const {
    const std::string h = Sha256::hex(key);
    return dir_ + "/" + h.substr(0, 2) + "/" + h + ".txt";
}

std::string ProfileCache::facet_key(const std::string& user_id, double window_end,
                                    const std::string& facet) {
    return "facet\x1f" + user_id + "\x1f" + format_time(window_end) + "\x1f" + facet;
}

std::string ProfileCache::title_key(const std::string& title) { return "title\x1f" + title; }

std::optional<ProfileCache::Entry> ProfileCache::get(const std::string& key) const {
    const std::string path = path_for(key);
    std::ifstream in(path);
    if (!in) return std::nullopt;

    auto corrupt = [&](const char* why) -> std::optional<Entry> {
        std::cerr << "warning: invalidating corrupt cache entry " << path << " (" << why << ")\n";
        in.close();
        std::error_code ec;
        fs::remove(path, ec);
        return std::nullopt;
    };

    std::string line;
    if (!std::getline(in, line) || line != "DYNREC-CACHE 1") return corrupt("bad header");
    std::string text, hex;
    bool have_text = false, have_vec = false;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        if (line.rfind("dim ", 0) == 0) dim = std::stoul(line.substr(4));
        else if (line.rfind("text ", 0) == 0) {
            text = line.substr(5);
            have_text = true;
        } else if (line.rfind("vec ", 0) == 0) {
            hex = line.substr(4);
            have_vec = true;
        }
    }
    if (!have_text || !have_vec) return corrupt("missing fields");
    Entry e;
    e.text = text;
    if (!hex_decode_doubles(hex, e.vec) || e.vec.size() != dim) return corrupt("bad vector");
    return e;
}

void ProfileCache::put(const std::string& key, const Entry& entry) const {
    const std::string path = path_for(key);
    std::error_code ec;
    fs::create_directories(fs::path(path).parent_path(), ec);
    if (ec) throw CacheError("cannot create cache shard for " + path);

    std::ostringstream tid;
    tid << std::this_thread::get_id();
    const std::string tmp = path + ".tmp." + tid.str();
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw CacheError("cannot write cache entry " + tmp);
        out << "DYNREC-CACHE 1\n";
        out << "key " << key << "\n";
        out << "dim " << entry.vec.size() << "\n";
        out << "text " << entry.text << "\n";
        out << "vec " << hex_encode_doubles(entry.vec) << "\n";
        if (!out) throw CacheError("short write for cache entry " + tmp);
    }
    fs::rename(tmp, path, ec);
    if (ec) throw CacheError("cannot publish cache entry " + path + ": " + ec.message());
}

std::size_t ProfileCache::count_entries() const {
    std::size_t n = 0;
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(dir_, ec);
         it != fs::recursive_directory_iterator(); ++it)
        if (it->is_regular_file() && it->path().extension() == ".txt") ++n;
    return n;
}

}  // namespace dynrec
