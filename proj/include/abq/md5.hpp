#pragma once

// Compact MD5 (RFC 1321). Used only as the bucketing hash of the traffic
// simulator; collision resistance is irrelevant here, cross-platform
// stability is what matters. Verified against the RFC test vectors and the
// golden assignment file in data/.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace abq::md5 {

namespace detail {

struct Context {
    std::uint32_t state[4] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u};
    std::uint64_t bit_count = 0;
    std::uint8_t buffer[64] = {};
};

inline std::uint32_t rotl(std::uint32_t x, int c) { return (x << c) | (x >> (32 - c)); }

inline void transform(std::uint32_t state[4], const std::uint8_t block[64]) {
    static constexpr std::uint32_t k[64] = {
        0xd76aa478u, 0xe8c7b756u, 0x242070dbu, 0xc1bdceeeu, 0xf57c0fafu, 0x4787c62au,
        0xa8304613u, 0xfd469501u, 0x698098d8u, 0x8b44f7afu, 0xffff5bb1u, 0x895cd7beu,
        0x6b901122u, 0xfd987193u, 0xa679438eu, 0x49b40821u, 0xf61e2562u, 0xc040b340u,
        0x265e5a51u, 0xe9b6c7aau, 0xd62f105du, 0x02441453u, 0xd8a1e681u, 0xe7d3fbc8u,
        0x21e1cde6u, 0xc33707d6u, 0xf4d50d87u, 0x455a14edu, 0xa9e3e905u, 0xfcefa3f8u,
        0x676f02d9u, 0x8d2a4c8au, 0xfffa3942u, 0x8771f681u, 0x6d9d6122u, 0xfde5380cu,
        0xa4beea44u, 0x4bdecfa9u, 0xf6bb4b60u, 0xbebfbc70u, 0x289b7ec6u, 0xeaa127fau,
        0xd4ef3085u, 0x04881d05u, 0xd9d4d039u, 0xe6db99e5u, 0x1fa27cf8u, 0xc4ac5665u,
        0xf4292244u, 0x432aff97u, 0xab9423a7u, 0xfc93a039u, 0x655b59c3u, 0x8f0ccc92u,
        0xffeff47du, 0x85845dd1u, 0x6fa87e4fu, 0xfe2ce6e0u, 0xa3014314u, 0x4e0811a1u,
        0xf7537e82u, 0xbd3af235u, 0x2ad7d2bbu, 0xeb86d391u};
    static constexpr int s[64] = {7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
                                  5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20,
                                  4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
                                  6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21};

    std::uint32_t m[16];
    for (int i = 0; i < 16; ++i) {
        m[i] = static_cast<std::uint32_t>(block[i * 4]) |
               (static_cast<std::uint32_t>(block[i * 4 + 1]) << 8) |
               (static_cast<std::uint32_t>(block[i * 4 + 2]) << 16) |
               (static_cast<std::uint32_t>(block[i * 4 + 3]) << 24);
    }

    std::uint32_t a = state[0], b = state[1], c = state[2], d = state[3];
    for (int i = 0; i < 64; ++i) {
        std::uint32_t f;
        int g;
        if (i < 16) {
            f = (b & c) | (~b & d);
            g = i;
        } else if (i < 32) {
            f = (d & b) | (~d & c);
            g = (5 * i + 1) % 16;
        } else if (i < 48) {
            f = b ^ c ^ d;
            g = (3 * i + 5) % 16;
        } else {
            f = c ^ (b | ~d);
            g = (7 * i) % 16;
        }
        const std::uint32_t tmp = d;
        d = c;
        c = b;
        b = b + rotl(a + f + k[i] + m[g], s[i]);
        a = tmp;
    }
    state[0] += a;
    state[1] += b;
    state[2] += c;
    state[3] += d;
}

inline void update(Context& ctx, const std::uint8_t* data, std::size_t len) {
    std::size_t buffered = static_cast<std::size_t>((ctx.bit_count >> 3) & 0x3f);
    ctx.bit_count += static_cast<std::uint64_t>(len) << 3;
    if (buffered > 0) {
        const std::size_t fill = 64 - buffered;
        if (len < fill) {
            std::memcpy(ctx.buffer + buffered, data, len);
            return;
        }
        std::memcpy(ctx.buffer + buffered, data, fill);
        transform(ctx.state, ctx.buffer);
        data += fill;
        len -= fill;
    }
    while (len >= 64) {
        transform(ctx.state, data);
        data += 64;
        len -= 64;
    }
    if (len > 0) std::memcpy(ctx.buffer, data, len);
}

inline std::array<std::uint8_t, 16> finish(Context& ctx) {
    static constexpr std::uint8_t padding[64] = {0x80};
    std::uint8_t length_le[8];
    const std::uint64_t bits = ctx.bit_count;
    for (int i = 0; i < 8; ++i) length_le[i] = static_cast<std::uint8_t>(bits >> (8 * i));
    const std::size_t buffered = static_cast<std::size_t>((bits >> 3) & 0x3f);
    const std::size_t pad = buffered < 56 ? 56 - buffered : 120 - buffered;
    update(ctx, padding, pad);
    update(ctx, length_le, 8);
    std::array<std::uint8_t, 16> out{};
    for (int i = 0; i < 4; ++i) {
        out[i * 4] = static_cast<std::uint8_t>(ctx.state[i]);
        out[i * 4 + 1] = static_cast<std::uint8_t>(ctx.state[i] >> 8);
        out[i * 4 + 2] = static_cast<std::uint8_t>(ctx.state[i] >> 16);
        out[i * 4 + 3] = static_cast<std::uint8_t>(ctx.state[i] >> 24);
    }
    return out;
}

}  // namespace detail

inline std::array<std::uint8_t, 16> digest(std::string_view data) {
    detail::Context ctx;
    detail::update(ctx, reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
    return detail::finish(ctx);
}

inline std::string hex_digest(std::string_view data) {
    static constexpr char hex[] = "0123456789abcdef";
    const auto d = digest(data);
    std::string out(32, '0');
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i * 2] = hex[d[i] >> 4];
        out[i * 2 + 1] = hex[d[i] & 0xf];
    }
    return out;
}

}  // namespace abq::md5
