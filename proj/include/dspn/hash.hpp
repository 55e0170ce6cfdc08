#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace dspn {

// 64-bit FNV-1a.
class Fnv1a {
public:
    void update(std::span<const unsigned char> bytes) {
        for (unsigned char b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) {
        update({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace dspn
