#include "dynrec/provider.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dynrec/rng.hpp"
#include "dynrec/sha256.hpp"

namespace dynrec {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

std::string MockProvider::generate(const std::string& prompt) {
    // collect title lines ("- <title>") and count their tokens
    std::map<std::string, long> counts;
    std::istringstream in(prompt);
    std::string line;
    long n_titles = 0;
    while (std::getline(in, line)) {
        if (line.rfind("- ", 0) != 0) continue;
        ++n_titles;
        for (const auto& tok : tokenize(line.substr(2))) counts[lower(tok)]++;
    }
    std::string top = "misc", second = "misc";
    long best = -1, best2 = -1;
    for (const auto& [tok, c] : counts) {
        if (c > best) {
            second = top;
            best2 = best;
            top = tok;
            best = c;
        } else if (c > best2) {
            second = tok;
            best2 = c;
        }
    }
    std::ostringstream out;
    out << "crd: shoppers drawn to " << top << "\n";
    out << "int: recurring interest in " << top << " and " << second << "\n";
    out << "ctg: " << top << " category purchases\n";
    out << "brd: brands around " << second << "\n";
    return out.str();
}

std::vector<double> MockProvider::embed(const std::string& text) {
    auto digest = Sha256::hash(text);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[i];
    Rng rng(seed);
    std::vector<double> v(dim_);
    double norm2 = 0;
    for (auto& x : v) {
        x = rng.normal();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return v;
}

LiveProvider::LiveProvider(LiveProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("live provider requires provider.base_url");
    if (cfg_.embedding_dim == 0) throw ConfigError("live provider requires a positive embedding dim");
}

std::string LiveProvider::post_json(const std::string& path, const std::string& body) {
    httplib::Client client(cfg_.base_url);
    client.set_read_timeout(cfg_.timeout_sec, 0);
    client.set_connection_timeout(cfg_.timeout_sec, 0);
    httplib::Headers headers;
    if (!cfg_.auth_header.empty() && !cfg_.api_key.empty())
        headers.emplace(cfg_.auth_header, cfg_.auth_prefix + cfg_.api_key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw ProviderError("transport failure calling " + cfg_.base_url + path);
    if (res->status == 429 || res->status >= 500)
        throw ProviderError("provider returned status " + std::to_string(res->status));
    if (res->status != 200)
        throw ProviderError("provider rejected request with status " + std::to_string(res->status), true);
    return res->body;
}

std::string LiveProvider::generate(const std::string& prompt) {
    nlohmann::json req = {
        {"model", cfg_.gen_model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
        {"temperature", 0.0},
    };
    auto body = post_json(cfg_.gen_path, req.dump());
    try {
        auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected completion payload: ") + e.what());
    }
}

std::vector<double> LiveProvider::embed(const std::string& text) {
    nlohmann::json req = {{"model", cfg_.embed_model}, {"input", text}};
    auto body = post_json(cfg_.embed_path, req.dump());
    try {
        auto j = nlohmann::json::parse(body);
        auto vec = j.at("data").at(0).at("embedding").get<std::vector<double>>();
        if (vec.size() != cfg_.embedding_dim)
            throw ProviderError("embedding dim " + std::to_string(vec.size()) + " != configured " +
                                std::to_string(cfg_.embedding_dim));
        return vec;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected embedding payload: ") + e.what());
    }
}

TokenBucket::TokenBucket(double rate_per_sec, double burst)
    : rate_(rate_per_sec), burst_(burst), tokens_(burst), last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0) return;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_s = (1.0 - tokens_) / rate_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

FacetTexts parse_facets(const std::string& completion) {
    FacetTexts out;
    bool seen[4] = {false, false, false, false};
    std::istringstream in(completion);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t start = line.find_first_not_of(" \t-*");
        if (start == std::string::npos) continue;
        std::size_t colon = line.find(':', start);
        if (colon == std::string::npos) continue;
        std::string key = lower(line.substr(start, colon - start));
        key.erase(key.find_last_not_of(" \t") + 1);
        std::string value = line.substr(colon + 1);
        const std::size_t vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) value.pop_back();
        for (std::size_t i = 0; i < 4; ++i) {
            if (key == kFacetKeys[i] && !value.empty()) {
                seen[i] = true;
                switch (i) {
                    case 0: out.crd = value; break;
                    case 1: out.intr = value; break;
                    case 2: out.ctg = value; break;
                    case 3: out.brd = value; break;
                }
            }
        }
    }
    for (std::size_t i = 0; i < 4; ++i)
        if (!seen[i])
            throw FacetParseError(std::string("completion is missing the '") + kFacetKeys[i] + "' field");
    return out;
}

GenerateResult generate_profiles(LlmProvider& provider, const std::string& prompt, int retries) {
    GenerateResult result;
    for (int attempt = 0; ; ++attempt) {
        try {
            result.facets = parse_facets(provider.generate(prompt));
            result.retries_used = attempt;
            return result;
        } catch (const FacetParseError&) {
            if (attempt >= retries) throw;
        } catch (const ProviderError& e) {
            if (attempt >= retries) throw ProviderError(e.what(), true);
        }
    }
}

std::vector<double> embed_text(LlmProvider& provider, const std::string& text, int retries) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    for (int attempt = 0; ; ++attempt) {
        try {
            return provider.embed(text);
        } catch (const ProviderError& e) {
            if (attempt >= retries) throw ProviderError(e.what(), true);
        }
    }
}

}  // namespace dynrec
