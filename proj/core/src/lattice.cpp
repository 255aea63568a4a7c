#include "q2pc/lattice.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "q2pc/wire.hpp"

namespace q2pc::lattice {

namespace {

std::uint32_t mod_q(std::int64_t v, std::uint32_t q) {
    const std::int64_t r = v % static_cast<std::int64_t>(q);
    return static_cast<std::uint32_t>(r < 0 ? r + q : r);
}

std::int32_t centered(std::uint32_t v, std::uint32_t q) {
    return v >= q / 2 ? static_cast<std::int32_t>(v) - static_cast<std::int32_t>(q) : static_cast<std::int32_t>(v);
}

} // namespace

std::size_t LatticeParams::log2q() const {
    std::size_t l = 0;
    while ((std::uint64_t{1} << l) < q) ++l;
    return l;
}

std::size_t LatticeParams::error_bits() const {
    const std::uint64_t span = 2 * static_cast<std::uint64_t>(sigma) + 1;
    std::size_t b = 0;
    while ((std::uint64_t{1} << b) < span) ++b;
    return b;
}

std::uint64_t LatticeParams::domain_size() const {
    const std::uint64_t cap = UINT64_MAX;
    std::uint64_t total = 4;
    auto mul = [&](std::uint64_t f) { total = total > cap / f ? cap : total * f; };
    for (std::size_t i = 0; i < n; ++i) mul(q);
    for (std::size_t i = 0; i < m; ++i) mul(2 * static_cast<std::uint64_t>(sigma) + 1);
    return total;
}

void LatticeParams::validate() const {
    if (n == 0 || m == 0 || q == 0 || sigma0 <= 0 || sigma <= 0) {
        throw std::invalid_argument("lattice params: all fields must be positive");
    }
    if (q < 8 || (q & (q - 1)) != 0) throw std::invalid_argument("lattice params: q must be a power of two >= 8");
    if (q > (1u << 30)) throw std::invalid_argument("lattice params: q too large");
    if (m <= gadget_rows()) throw std::invalid_argument("lattice params: m must exceed n*log2(q)");
    if (sigma0 >= sigma) throw std::invalid_argument("lattice params: need sigma0 < sigma");
    if (static_cast<std::uint64_t>(1 + trapdoor_row_weight) * static_cast<std::uint64_t>(sigma) * 4 >= q) {
        throw std::invalid_argument("lattice params: need (1 + row weight) * sigma < q/4");
    }
    if (trapdoor_row_weight > random_rows()) {
        throw std::invalid_argument("lattice params: row weight exceeds random block height");
    }
}

LatticeParams profile_params(std::string_view name) {
    if (name == "tiny") return {1, 5, 16, 1, 3, 0};
    if (name == "small") return {2, 18, 256, 1, 12, 1};
    if (name == "demo") return {4, 64, 4096, 2, 150, 2};
    throw std::invalid_argument("unknown profile '" + std::string(name) + "'");
}

bool in_domain(const LatticeParams &params, const Preimage &z) {
    if (z.s.size() != params.n || z.e.size() != params.m || z.c > 1 || z.d > 1) return false;
    for (auto s : z.s) {
        if (s >= params.q) return false;
    }
    for (auto e : z.e) {
        if (e < -params.sigma || e > params.sigma) return false;
    }
    return true;
}

qsim::Bits encode(const LatticeParams &params, const Preimage &z) {
    if (!in_domain(params, z)) throw std::invalid_argument("encode: preimage outside the domain");
    qsim::Bits bits;
    bits.reserve(params.preimage_width());
    const std::size_t lq = params.log2q();
    for (auto s : z.s) {
        for (std::size_t b = 0; b < lq; ++b) bits.push_back(static_cast<std::uint8_t>((s >> b) & 1));
    }
    const std::size_t eb = params.error_bits();
    for (auto e : z.e) {
        const std::uint32_t off = static_cast<std::uint32_t>(e + params.sigma);
        for (std::size_t b = 0; b < eb; ++b) bits.push_back(static_cast<std::uint8_t>((off >> b) & 1));
    }
    bits.push_back(z.c);
    bits.push_back(z.d);
    return bits;
}

Preimage decode(const LatticeParams &params, const qsim::Bits &bits) {
    if (bits.size() != params.preimage_width()) throw std::invalid_argument("decode: wrong encoding width");
    Preimage z;
    std::size_t pos = 0;
    auto take = [&](std::size_t width) {
        std::uint32_t v = 0;
        for (std::size_t b = 0; b < width; ++b) v |= static_cast<std::uint32_t>(bits[pos++] & 1) << b;
        return v;
    };
    for (std::size_t i = 0; i < params.n; ++i) z.s.push_back(take(params.log2q()));
    for (std::size_t i = 0; i < params.m; ++i) {
        z.e.push_back(static_cast<std::int32_t>(take(params.error_bits())) - params.sigma);
    }
    z.c = static_cast<std::uint8_t>(take(1));
    z.d = static_cast<std::uint8_t>(take(1));
    if (!in_domain(params, z)) throw std::invalid_argument("decode: encoding outside the domain");
    return z;
}

ZqVector eval_f(const PublicKey &pk, const Preimage &z) {
    const auto &p = pk.params;
    if (z.s.size() != p.n || z.e.size() != p.m || pk.k_prime.rows != p.m || pk.k_prime.cols != p.n ||
        pk.y0.size() != p.m) {
        throw std::invalid_argument("eval_f: dimension mismatch");
    }
    ZqVector y(p.m);
    const std::uint64_t mask = p.q - 1;
    for (std::size_t i = 0; i < p.m; ++i) {
        std::uint64_t acc = 0;
        for (std::size_t j = 0; j < p.n; ++j) acc += static_cast<std::uint64_t>(pk.k_prime.at(i, j)) * z.s[j];
        acc += static_cast<std::uint64_t>(static_cast<std::int64_t>(z.e[i]) + p.q);
        if (z.c) acc += pk.y0[i];
        if (i == 0 && z.d) acc += p.q / 2;
        y[i] = static_cast<std::uint32_t>(acc & mask);
    }
    return y;
}

TrapdoorKeypair gen(const LatticeParams &params, crypto::CoinSource &coins) {
    params.validate();
    const std::size_t rr = params.random_rows(), gr = params.gadget_rows(), lq = params.log2q();
    TrapdoorKeypair kp;
    kp.pk.params = params;

    ZqMatrix a{rr, params.n, {}};
    a.data.resize(rr * params.n);
    for (auto &v : a.data) v = static_cast<std::uint32_t>(coins.uniform_below(params.q));

    kp.td.r.assign(gr * rr, 0);
    for (std::size_t row = 0; row < gr; ++row) {
        std::vector<std::size_t> cols(rr);
        for (std::size_t c = 0; c < rr; ++c) cols[c] = c;
        for (std::size_t k = 0; k < params.trapdoor_row_weight; ++k) {
            const std::size_t pick = k + coins.uniform_below(rr - k);
            std::swap(cols[k], cols[pick]);
            kp.td.r[row * rr + cols[k]] = coins.bit() ? 1 : -1;
        }
    }

    ZqMatrix &k = kp.pk.k_prime;
    k.rows = params.m;
    k.cols = params.n;
    k.data.assign(params.m * params.n, 0);
    for (std::size_t i = 0; i < rr; ++i) {
        for (std::size_t j = 0; j < params.n; ++j) k.data[i * params.n + j] = a.at(i, j);
    }
    for (std::size_t g = 0; g < gr; ++g) {
        for (std::size_t j = 0; j < params.n; ++j) {
            std::int64_t acc = 0;
            for (std::size_t t = 0; t < rr; ++t) acc += static_cast<std::int64_t>(kp.td.r[g * rr + t]) * a.at(t, j);
            const std::size_t coord = g / lq, bit = g % lq;
            if (coord == j) acc += std::int64_t{1} << bit;
            k.data[(rr + g) * params.n + j] = mod_q(acc, params.q);
        }
    }

    Preimage &z0 = kp.td.z0;
    z0.s.resize(params.n);
    for (auto &s : z0.s) s = static_cast<std::uint32_t>(coins.uniform_below(params.q));
    z0.e.resize(params.m);
    for (auto &e : z0.e) {
        e = static_cast<std::int32_t>(coins.uniform_below(2 * params.sigma0 + 1)) - params.sigma0;
    }
    z0.c = 0;
    z0.d = static_cast<std::uint8_t>(coins.bit());
    kp.hp = z0.d;
    kp.pk.y0.assign(params.m, 0);
    kp.pk.y0 = eval_f(kp.pk, z0);
    return kp;
}

TrapdoorKeypair gen_from_seed(const LatticeParams &params, const Seed &coins) {
    crypto::CoinSource source(coins, "lattice.gen");
    return gen(params, source);
}

std::vector<Preimage> invert_all(const TrapdoorKeypair &kp, const ZqVector &y) {
    const auto &p = kp.pk.params;
    if (y.size() != p.m) throw std::invalid_argument("invert: dimension mismatch");
    const std::size_t rr = p.random_rows(), gr = p.gadget_rows(), lq = p.log2q();
    std::vector<Preimage> out;
    for (std::uint8_t c = 0; c < 2; ++c) {
        for (std::uint8_t d = 0; d < 2; ++d) {
            std::vector<std::int64_t> yy(p.m);
            for (std::size_t i = 0; i < p.m; ++i) {
                std::int64_t v = y[i];
                if (c) v -= kp.pk.y0[i];
                if (i == 0 && d) v -= p.q / 2;
                yy[i] = mod_q(v, p.q);
            }
            // v = y_bottom - R y_top = G^T s + small error.
            std::vector<std::uint32_t> v(gr);
            for (std::size_t g = 0; g < gr; ++g) {
                std::int64_t acc = yy[rr + g];
                for (std::size_t t = 0; t < rr; ++t) acc -= static_cast<std::int64_t>(kp.td.r[g * rr + t]) * yy[t];
                v[g] = mod_q(acc, p.q);
            }
            Preimage z;
            z.c = c;
            z.d = d;
            z.s.assign(p.n, 0);
            for (std::size_t j = 0; j < p.n; ++j) {
                std::uint64_t known = 0;
                for (std::size_t k = 0; k < lq; ++k) {
                    const std::size_t row = j * lq + (lq - 1 - k);
                    const std::uint64_t shift = std::uint64_t{1} << (lq - 1 - k);
                    const std::uint32_t w = mod_q(static_cast<std::int64_t>(v[row]) -
                                                      static_cast<std::int64_t>((shift * known) % p.q),
                                                  p.q);
                    const std::uint32_t bit = ((w + p.q / 4) % p.q) >= p.q / 2 ? 1 : 0;
                    known |= static_cast<std::uint64_t>(bit) << k;
                }
                z.s[j] = static_cast<std::uint32_t>(known);
            }
            z.e.resize(p.m);
            bool ok = true;
            for (std::size_t i = 0; i < p.m && ok; ++i) {
                std::uint64_t acc = 0;
                for (std::size_t j = 0; j < p.n; ++j) acc += static_cast<std::uint64_t>(kp.pk.k_prime.at(i, j)) * z.s[j];
                const std::int32_t e = centered(mod_q(yy[i] - static_cast<std::int64_t>(acc % p.q), p.q), p.q);
                if (e < -p.sigma || e > p.sigma) ok = false;
                z.e[i] = e;
            }
            if (ok) out.push_back(std::move(z));
        }
    }
    return out;
}

std::optional<PreimagePair> invert(const TrapdoorKeypair &kp, const ZqVector &y) {
    auto all = invert_all(kp, y);
    if (all.size() != 2 || all[0].c != 0 || all[1].c != 1) return std::nullopt;
    return PreimagePair{std::move(all[0]), std::move(all[1])};
}

Preimage domain_point(const LatticeParams &params, std::uint64_t index) {
    Preimage z;
    z.d = static_cast<std::uint8_t>(index & 1);
    index >>= 1;
    z.c = static_cast<std::uint8_t>(index & 1);
    index >>= 1;
    const std::uint64_t span = 2 * static_cast<std::uint64_t>(params.sigma) + 1;
    z.e.resize(params.m);
    for (auto &e : z.e) {
        e = static_cast<std::int32_t>(index % span) - params.sigma;
        index /= span;
    }
    z.s.resize(params.n);
    for (auto &s : z.s) {
        s = static_cast<std::uint32_t>(index % params.q);
        index /= params.q;
    }
    return z;
}

Preimage sample_domain_point(const LatticeParams &params, crypto::CoinSource &coins) {
    Preimage z;
    z.s.resize(params.n);
    for (auto &s : z.s) s = static_cast<std::uint32_t>(coins.uniform_below(params.q));
    z.e.resize(params.m);
    for (auto &e : z.e) e = static_cast<std::int32_t>(coins.uniform_below(2 * params.sigma + 1)) - params.sigma;
    z.c = static_cast<std::uint8_t>(coins.bit());
    z.d = static_cast<std::uint8_t>(coins.bit());
    return z;
}

std::vector<Preimage> brute_force_preimages(const PublicKey &pk, const ZqVector &y) {
    const std::uint64_t total = pk.params.domain_size();
    if (total > (std::uint64_t{1} << 26)) throw std::invalid_argument("brute_force_preimages: domain too large");
    std::vector<Preimage> out;
    for (std::uint64_t i = 0; i < total; ++i) {
        Preimage z = domain_point(pk.params, i);
        if (eval_f(pk, z) == y) out.push_back(std::move(z));
    }
    std::sort(out.begin(), out.end(), [](const Preimage &a, const Preimage &b) {
        return std::tie(a.c, a.d) < std::tie(b.c, b.d);
    });
    return out;
}

bool public_search_feasible(const LatticeParams &params) {
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < params.n; ++i) {
        total *= params.q;
        if (total > (std::uint64_t{1} << 20)) return false;
    }
    return true;
}

std::vector<Preimage> search_preimages(const PublicKey &pk, const ZqVector &y) {
    const auto &p = pk.params;
    if (!public_search_feasible(p)) throw std::invalid_argument("search_preimages: q^n too large");
    if (y.size() != p.m) throw std::invalid_argument("search_preimages: dimension mismatch");
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < p.n; ++i) total *= p.q;
    std::vector<Preimage> out;
    for (std::uint8_t c = 0; c < 2; ++c) {
        for (std::uint8_t d = 0; d < 2; ++d) {
            for (std::uint64_t idx = 0; idx < total; ++idx) {
                Preimage z;
                z.c = c;
                z.d = d;
                z.s.resize(p.n);
                std::uint64_t rest = idx;
                for (auto &s : z.s) {
                    s = static_cast<std::uint32_t>(rest % p.q);
                    rest /= p.q;
                }
                z.e.resize(p.m);
                bool ok = true;
                for (std::size_t i = 0; i < p.m && ok; ++i) {
                    std::int64_t v = y[i];
                    for (std::size_t j = 0; j < p.n; ++j) v -= static_cast<std::int64_t>(pk.k_prime.at(i, j)) * z.s[j];
                    if (c) v -= pk.y0[i];
                    if (i == 0 && d) v -= p.q / 2;
                    const std::int32_t e = centered(mod_q(v, p.q), p.q);
                    ok = e >= -p.sigma && e <= p.sigma;
                    z.e[i] = e;
                }
                if (ok) out.push_back(std::move(z));
            }
        }
    }
    return out;
}

Bytes serialize(const PublicKey &pk) {
    ByteWriter w;
    const auto &p = pk.params;
    w.u32(static_cast<std::uint32_t>(p.n)).u32(static_cast<std::uint32_t>(p.m)).u32(p.q);
    w.i32(p.sigma0).i32(p.sigma).u32(static_cast<std::uint32_t>(p.trapdoor_row_weight));
    for (auto v : pk.k_prime.data) w.u32(v);
    for (auto v : pk.y0) w.u32(v);
    return std::move(w).data();
}

PublicKey deserialize_public_key(ByteView bytes) {
    ByteReader r(bytes);
    PublicKey pk;
    auto &p = pk.params;
    p.n = r.u32();
    p.m = r.u32();
    p.q = r.u32();
    p.sigma0 = r.i32();
    p.sigma = r.i32();
    p.trapdoor_row_weight = r.u32();
    try {
        p.validate();
    } catch (const std::invalid_argument &e) {
        throw WireError(std::string("public key: ") + e.what());
    }
    pk.k_prime.rows = p.m;
    pk.k_prime.cols = p.n;
    pk.k_prime.data.resize(p.m * p.n);
    for (auto &v : pk.k_prime.data) {
        v = r.u32();
        if (v >= p.q) throw WireError("public key: entry out of range");
    }
    pk.y0.resize(p.m);
    for (auto &v : pk.y0) {
        v = r.u32();
        if (v >= p.q) throw WireError("public key: entry out of range");
    }
    r.expect_end();
    return pk;
}

RegularityReport measure_regularity(const PublicKey &pk) {
    const auto &p = pk.params;
    if (p.m * p.log2q() > 64) throw std::invalid_argument("measure_regularity: image does not pack into 64 bits");
    const std::uint64_t total = p.domain_size();
    if (total > (std::uint64_t{1} << 28)) throw std::invalid_argument("measure_regularity: domain too large");
    std::unordered_map<std::uint64_t, std::uint32_t> counts;
    counts.reserve(total);
    const std::size_t lq = p.log2q();
    for (std::uint64_t i = 0; i < total; ++i) {
        const ZqVector y = eval_f(pk, domain_point(p, i));
        std::uint64_t key = 0;
        for (std::size_t k = 0; k < y.size(); ++k) key |= static_cast<std::uint64_t>(y[k]) << (k * lq);
        ++counts[key];
    }
    RegularityReport rep;
    rep.domain_points = total;
    rep.image_points = counts.size();
    for (const auto &[y, c] : counts) {
        if (c == 2) {
            ++rep.two_preimage_points;
        } else {
            ++rep.other_points;
        }
    }
    rep.irregular_fraction = static_cast<double>(rep.other_points) / static_cast<double>(rep.image_points);
    return rep;
}

} // namespace q2pc::lattice
