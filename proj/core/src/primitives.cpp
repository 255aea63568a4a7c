#include "q2pc/primitives.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace q2pc {

std::string to_hex(ByteView bytes) {
    static const char *digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw std::invalid_argument("odd-length hex string");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("bad hex digit");
    };
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return out;
}

namespace crypto {

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX *ctx) const { EVP_MD_CTX_free(ctx); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX *ctx) const { EVP_CIPHER_CTX_free(ctx); }
};

void check(int rc, const char *what) {
    if (rc != 1) {
        throw std::runtime_error(std::string("libcrypto failure: ") + what);
    }
}

std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> chacha_ctx(ByteView key32, const std::array<std::uint8_t, 16> &iv) {
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (!ctx) throw std::bad_alloc();
    check(EVP_EncryptInit_ex(ctx.get(), EVP_chacha20(), nullptr, key32.data(), iv.data()), "chacha20 init");
    return ctx;
}

void keystream(EVP_CIPHER_CTX *ctx, std::span<std::uint8_t> out) {
    std::fill(out.begin(), out.end(), 0);
    int produced = 0;
    check(EVP_EncryptUpdate(ctx, out.data(), &produced, out.data(), static_cast<int>(out.size())), "chacha20 update");
}

} // namespace

Digest sha256(ByteView data) {
    Sha256 h;
    h.update(data);
    return h.finish();
}

struct Sha256::Impl {
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx{EVP_MD_CTX_new()};
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
    if (!impl_->ctx) throw std::bad_alloc();
    check(EVP_DigestInit_ex(impl_->ctx.get(), EVP_sha256(), nullptr), "sha256 init");
}

Sha256::~Sha256() = default;

Sha256 &Sha256::update(ByteView data) {
    check(EVP_DigestUpdate(impl_->ctx.get(), data.data(), data.size()), "sha256 update");
    return *this;
}

Sha256 &Sha256::update_u64(std::uint64_t v) {
    std::array<std::uint8_t, 8> le{};
    for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return update(le);
}

Digest Sha256::finish() {
    Digest out{};
    unsigned int len = 0;
    check(EVP_DigestFinal_ex(impl_->ctx.get(), out.data(), &len), "sha256 final");
    return out;
}

Digest hmac_sha256(ByteView key, ByteView msg) {
    Digest out{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(), out.data(), &len)) {
        throw std::runtime_error("libcrypto failure: hmac");
    }
    return out;
}

Seed seed_from_u64(std::uint64_t seed) {
    Sha256 h;
    h.update("q2pc.seed").update_u64(seed);
    return h.finish();
}

struct CoinSource::Impl {
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx;
};

CoinSource::CoinSource(const Seed &seed, std::string_view domain_tag) : impl_(std::make_unique<Impl>()) {
    Sha256 h;
    h.update(seed).update(domain_tag);
    key_ = h.finish();
    impl_->ctx = chacha_ctx(key_, std::array<std::uint8_t, 16>{});
}

CoinSource::~CoinSource() = default;
CoinSource::CoinSource(CoinSource &&) noexcept = default;
CoinSource &CoinSource::operator=(CoinSource &&) noexcept = default;

void CoinSource::refill() {
    keystream(impl_->ctx.get(), buffer_);
    pos_ = 0;
}

std::uint8_t CoinSource::next_byte() {
    if (pos_ == buffer_.size()) refill();
    return buffer_[pos_++];
}

void CoinSource::fill(std::span<std::uint8_t> out) {
    for (auto &b : out) b = next_byte();
}

std::uint64_t CoinSource::next_u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(next_byte()) << (8 * i);
    return v;
}

std::uint64_t CoinSource::uniform_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
        std::uint64_t v = next_u64();
        if (v < limit) return v % bound;
    }
}

double CoinSource::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

Bytes CoinSource::bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

CoinSource CoinSource::fork(std::string_view tag) const {
    Seed child{};
    Sha256 h;
    h.update(key_).update("fork").update(tag);
    child = h.finish();
    return CoinSource(child, tag);
}

Commitment commit_with(ByteView msg, const Opening &dec) {
    Sha256 h;
    h.update(msg).update(dec);
    return Commitment{h.finish()};
}

CommitResult commit(ByteView msg, CoinSource &coins) {
    CommitResult out;
    coins.fill(out.dec);
    out.commitment = commit_with(msg, out.dec);
    return out;
}

bool verify_commitment(const Commitment &com, const Opening &dec, ByteView msg) {
    return commit_with(msg, dec) == com;
}

SymKey SymKey::generate(CoinSource &coins) {
    SymKey k;
    coins.fill(k.sk);
    return k;
}

Bytes prg_stream(const SymKey &key, const SessionId &session, std::uint64_t nonce, std::size_t length) {
    Sha256 h;
    h.update(session).update_u64(nonce);
    Digest d = h.finish();
    std::array<std::uint8_t, 16> iv{};
    std::copy_n(d.begin(), 12, iv.begin() + 4);
    auto ctx = chacha_ctx(key.sk, iv);
    Bytes out(length);
    if (length > 0) keystream(ctx.get(), out);
    return out;
}

Bytes otp_decrypt(const SymKey &key, const SessionId &session, std::uint64_t nonce, ByteView ciphertext) {
    Bytes out = prg_stream(key, session, nonce, ciphertext.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= ciphertext[i];
    return out;
}

Bytes OtpEncryptor::encrypt(ByteView msg, std::uint64_t nonce) {
    if (!used_.insert(nonce).second) {
        throw std::logic_error("nonce reuse under one key");
    }
    return otp_decrypt(key_, session_, nonce, msg);
}

MacKey MacKey::generate(CoinSource &coins) {
    MacKey k;
    coins.fill(k.k1);
    return k;
}

namespace {

__extension__ typedef unsigned __int128 u128;
constexpr u128 kP = (static_cast<u128>(1) << 127) - 1;

u128 fold(u128 lo, u128 hi) {
    // value = hi * 2^128 + lo, hi < 2^126.
    u128 s = (lo & kP) + (lo >> 127) + (hi << 1);
    s = (s & kP) + (s >> 127);
    if (s >= kP) s -= kP;
    return s;
}

u128 mulmod(u128 a, u128 b) {
    const std::uint64_t a0 = static_cast<std::uint64_t>(a), a1 = static_cast<std::uint64_t>(a >> 64);
    const std::uint64_t b0 = static_cast<std::uint64_t>(b), b1 = static_cast<std::uint64_t>(b >> 64);
    u128 lo = static_cast<u128>(a0) * b0;
    u128 mid1 = static_cast<u128>(a0) * b1;
    u128 mid2 = static_cast<u128>(a1) * b0;
    u128 hi = static_cast<u128>(a1) * b1;
    u128 mid = mid1 + mid2;
    if (mid < mid1) hi += static_cast<u128>(1) << 64;
    u128 lo2 = lo + (mid << 64);
    if (lo2 < lo) hi += 1;
    hi += mid >> 64;
    return fold(lo2, hi);
}

u128 load_le(const std::uint8_t *p, std::size_t n) {
    u128 v = 0;
    for (std::size_t i = n; i-- > 0;) v = (v << 8) | p[i];
    return v;
}

u128 reduce_once(u128 v) {
    v = (v & kP) + (v >> 127);
    return v >= kP ? v - kP : v;
}

u128 reduce32(const std::uint8_t *p) {
    // hi * 2^128 + lo, with 2^128 = 2 mod p.
    const u128 lo = reduce_once(load_le(p, 16));
    const u128 hi = reduce_once(load_le(p + 16, 16));
    u128 s = lo + reduce_once(hi << 1);
    return s >= kP ? s - kP : s;
}

} // namespace

MacTag mac_tag(const MacKey &key, ByteView msg) {
    const u128 r = reduce32(key.k1.data());
    const u128 s = reduce32(key.k1.data() + 32);
    u128 acc = 0;
    for (std::size_t off = 0; off < msg.size(); off += 15) {
        const std::size_t n = std::min<std::size_t>(15, msg.size() - off);
        u128 block = load_le(msg.data() + off, n) | (static_cast<u128>(1) << (8 * n));
        acc += block;
        if (acc >= kP) acc -= kP;
        acc = mulmod(acc, r);
    }
    acc += s;
    if (acc >= kP) acc -= kP;
    MacTag tag{};
    for (int i = 0; i < 16; ++i) tag[i] = static_cast<std::uint8_t>(acc >> (8 * i));
    return tag;
}

bool mac_verify(const MacKey &key, ByteView msg, const MacTag &tag) {
    MacTag expected = mac_tag(key, msg);
    unsigned diff = 0;
    for (int i = 0; i < 16; ++i) diff |= expected[i] ^ tag[i];
    return diff == 0;
}

} // namespace crypto
} // namespace q2pc
