#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace s2vr {

/// 64-bit FNV-1a, used for file checksums and pipeline digests.
class Fnv1a {
public:
    void update(std::span<const std::uint8_t> bytes) {
        for (std::uint8_t b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) {
        update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    [[nodiscard]] std::uint64_t digest() const { return state_; }
    [[nodiscard]] std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    Fnv1a h;
    h.update(bytes);
    return h.digest();
}

std::string to_hex(std::uint64_t value);

}  // namespace s2vr
