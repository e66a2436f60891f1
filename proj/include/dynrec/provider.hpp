#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include "dynrec/errors.hpp"

namespace dynrec {

inline constexpr std::array<const char*, 4> kFacetKeys = {"crd", "int", "ctg", "brd"};

struct FacetTexts {
    std::string crd, intr, ctg, brd;
    const std::string& by_index(std::size_t i) const {
        switch (i) {
            case 0: return crd;
            case 1: return intr;
            case 2: return ctg;
            default: return brd;
        }
    }
};

// Text generation + embedding backend. Implementations must be safe to call
// from multiple augmentation workers.
class LlmProvider {
  public:
    virtual ~LlmProvider() = default;
    virtual std::string generate(const std::string& prompt) = 0;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::size_t embedding_dim() const = 0;
};

// Deterministic offline provider. Completions summarize the dominant tokens
// of the prompt's title lines; embeddings are unit-norm pseudo-random vectors
// seeded by a SHA-256 of the text.
class MockProvider : public LlmProvider {
  public:
    explicit MockProvider(std::size_t dim) : dim_(dim) {}
    std::string generate(const std::string& prompt) override;
    std::vector<double> embed(const std::string& text) override;
    std::size_t embedding_dim() const override { return dim_; }

  private:
    std::size_t dim_;
};

struct LiveProviderConfig {
    std::string base_url;     // scheme://host[:port]
    std::string gen_path;     // e.g. /v1/chat/completions
    std::string embed_path;   // e.g. /v1/embeddings
    std::string auth_header;  // e.g. Authorization
    std::string auth_prefix;  // e.g. "Bearer "
    std::string api_key;
    std::string gen_model;
    std::string embed_model;
    std::size_t embedding_dim = 1536;
    int timeout_sec = 60;
};

class LiveProvider : public LlmProvider {
  public:
    explicit LiveProvider(LiveProviderConfig cfg);
    std::string generate(const std::string& prompt) override;
    std::vector<double> embed(const std::string& text) override;
    std::size_t embedding_dim() const override { return cfg_.embedding_dim; }

  private:
    std::string post_json(const std::string& path, const std::string& body);
    LiveProviderConfig cfg_;
};

// Simple token bucket; rate_per_sec <= 0 disables throttling.
class TokenBucket {
  public:
    explicit TokenBucket(double rate_per_sec, double burst = 1.0);
    void acquire();

  private:
    double rate_, burst_, tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

// Parses a labeled four-field completion block. Accepts reordered fields,
// case-insensitive keys, and leading list markers; all four must be present
// and non-empty or a FacetParseError is thrown.
FacetTexts parse_facets(const std::string& completion);

struct GenerateResult {
    FacetTexts facets;
    int retries_used = 0;
};

// Calls the provider up to 1+retries times; malformed completions surface as
// FacetParseError, transport failures as ProviderError with the exhausted
// flag set once retries run out.
GenerateResult generate_profiles(LlmProvider& provider, const std::string& prompt, int retries = 2);

std::vector<double> embed_text(LlmProvider& provider, const std::string& text, int retries = 2);

}  // namespace dynrec
