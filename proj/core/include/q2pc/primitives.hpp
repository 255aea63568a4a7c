/**
 * @file
 * Hashing, commitments, stream encryption, one-time MAC and seeded coin
 * streams. SHA-256 and ChaCha20 come from OpenSSL's libcrypto.
 */
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace q2pc {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Seed = std::array<std::uint8_t, 32>;
using SessionId = std::array<std::uint8_t, 16>;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()};
}

namespace crypto {

Digest sha256(ByteView data);

/// Incremental SHA-256.
class Sha256 {
  public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256 &) = delete;
    Sha256 &operator=(const Sha256 &) = delete;

    Sha256 &update(ByteView data);
    Sha256 &update(std::string_view s) { return update(as_bytes(s)); }
    Sha256 &update_u64(std::uint64_t v);
    Digest finish();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Digest hmac_sha256(ByteView key, ByteView msg);

/// Seed derived from a user-facing integer seed.
Seed seed_from_u64(std::uint64_t seed);

/**
 * Deterministic random stream: ChaCha20 keystream keyed by
 * SHA-256(seed || domain_tag). Same seed and tag give the same stream.
 */
class CoinSource {
  public:
    CoinSource(const Seed &seed, std::string_view domain_tag);
    ~CoinSource();
    CoinSource(CoinSource &&) noexcept;
    CoinSource &operator=(CoinSource &&) noexcept;

    std::uint8_t next_byte();
    std::uint64_t next_u64();
    int bit() { return next_byte() & 1; }
    /// Uniform in [0, bound); bound must be positive.
    std::uint64_t uniform_below(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform01();
    Bytes bytes(std::size_t n);
    template <std::size_t N> std::array<std::uint8_t, N> array() {
        std::array<std::uint8_t, N> out{};
        fill(out);
        return out;
    }
    void fill(std::span<std::uint8_t> out);

    /// Independent child stream.
    CoinSource fork(std::string_view tag) const;

  private:
    void refill();

    Digest key_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::array<std::uint8_t, 4096> buffer_{};
    std::size_t pos_ = 4096;
};

using Opening = std::array<std::uint8_t, 32>;

struct Commitment {
    Digest com{};
    bool operator==(const Commitment &) const = default;
};

struct CommitResult {
    Commitment commitment;
    Opening dec{};
};

/// com = SHA-256(msg || dec) with fresh 32-byte dec.
CommitResult commit(ByteView msg, CoinSource &coins);
Commitment commit_with(ByteView msg, const Opening &dec);
bool verify_commitment(const Commitment &com, const Opening &dec, ByteView msg);

struct SymKey {
    std::array<std::uint8_t, 32> sk{};
    static SymKey generate(CoinSource &coins);
    bool operator==(const SymKey &) const = default;
};

/// Keystream for (key, session, nonce). Stateless.
Bytes prg_stream(const SymKey &key, const SessionId &session, std::uint64_t nonce, std::size_t length);

/// ciphertext = msg XOR prg_stream(key, session, nonce).
Bytes otp_decrypt(const SymKey &key, const SessionId &session, std::uint64_t nonce, ByteView ciphertext);

/// Encrypting side; refuses to reuse a nonce under its key.
class OtpEncryptor {
  public:
    OtpEncryptor(SymKey key, SessionId session) : key_(key), session_(session) {}

    Bytes encrypt(ByteView msg, std::uint64_t nonce);
    const SymKey &key() const { return key_; }

  private:
    SymKey key_;
    SessionId session_;
    std::set<std::uint64_t> used_;
};

struct MacKey {
    std::array<std::uint8_t, 64> k1{};
    static MacKey generate(CoinSource &coins);
};

using MacTag = std::array<std::uint8_t, 16>;

/**
 * One-time polynomial MAC over GF(2^127 - 1). The key supplies the
 * evaluation point r (first 32 bytes) and the additive mask s (last 32
 * bytes), each reduced mod p. Messages are split into 15-byte blocks, each
 * terminated by 0x01.
 */
MacTag mac_tag(const MacKey &key, ByteView msg);
bool mac_verify(const MacKey &key, ByteView msg, const MacTag &tag);

} // namespace crypto
} // namespace q2pc
