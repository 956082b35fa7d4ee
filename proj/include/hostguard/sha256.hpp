#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace hostguard {

// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(std::string_view data);
    std::array<std::uint8_t, 32> digest();   // finalizes; call reset() to reuse

    static std::string hex(std::string_view data);   // one-shot, lowercase hex

private:
    void process_block(const std::uint8_t* block);

    std::array<std::uint32_t, 8> state_{};
    std::uint64_t total_len_ = 0;
    std::array<std::uint8_t, 64> buffer_{};
    std::size_t buffer_len_ = 0;
};

} // namespace hostguard
