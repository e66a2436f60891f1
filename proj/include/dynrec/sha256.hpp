#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace dynrec {

// Minimal SHA-256 (FIPS 180-4). Used to key the augmentation cache and to
// seed the deterministic mock embedding provider.
class Sha256 {
  public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    std::array<std::uint8_t, 32> digest();

    static std::array<std::uint8_t, 32> hash(const std::string& s);
    static std::string hex(const std::string& s);

  private:
    void process_block(const std::uint8_t* block);

    std::uint32_t h_[8];
    std::uint8_t buf_[64];
    std::size_t buf_len_ = 0;
    std::uint64_t total_ = 0;
};

std::string to_hex(const std::uint8_t* data, std::size_t len);

}  // namespace dynrec
