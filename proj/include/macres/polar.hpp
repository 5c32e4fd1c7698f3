#pragma once

// Polar source-resolvability codec.
//
// Conventions (0-based internally; documentation and CSV exports use the
// 1-based indices 1..N):
//   * A = T(X) with T(x)[j] = XOR of x[i] over all i whose binary index is a
//     superset of j's. This is the row-vector product x * G_n with
//     G_n = [1 0; 1 1]^{(x)n}, index 1 the slowest-varying Kronecker axis.
//     T is an involution, so the encoder maps A~ back with the same T.
//   * Packed integers put position 0 in the most significant bit, so prefix
//     marginals of A are contiguous blocks of the packed table.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "macres/probcore.hpp"
#include "macres/rng.hpp"

namespace macres::polar {

inline constexpr std::size_t kExactCapN = 20;
inline constexpr double kDefaultBeta = 0.25;

inline std::size_t log2_exact(std::size_t n_len) {
    if (n_len == 0 || !std::has_single_bit(n_len)) throw std::invalid_argument("block length must be a power of two");
    return static_cast<std::size_t>(std::countr_zero(n_len));
}

inline void polar_transform_in_place(std::span<std::uint8_t> x) {
    log2_exact(x.size());
    for (std::size_t h = 1; h < x.size(); h <<= 1)
        for (std::size_t j = 0; j < x.size(); ++j)
            if ((j & h) == 0) x[j] ^= x[j | h];
}

/// x * G_n over GF(2); self-inverse.
inline Bits polar_transform(std::span<const std::uint8_t> bits) {
    Bits out(bits.begin(), bits.end());
    polar_transform_in_place(out);
    return out;
}

inline std::uint64_t pack(std::span<const std::uint8_t> bits) {
    std::uint64_t v = 0;
    for (auto b : bits) v = (v << 1) | (b & 1u);
    return v;
}

inline Bits unpack(std::uint64_t v, std::size_t len) {
    Bits out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = static_cast<std::uint8_t>((v >> (len - 1 - i)) & 1u);
    return out;
}

// ---------------------------------------------------------------------------
// Successive-cancellation posteriors

struct Pair {
    double p0 = 0.5;
    double p1 = 0.5;
};

namespace detail {

inline Pair normalized(double a, double b) {
    const double s = a + b;
    if (!(s > 0.0)) return {0.5, 0.5};
    return {a / s, b / s};
}

/// Walks A = T(x) in index order for independent per-position posteriors
/// `leaf` on x. At each index j calls decide(offset + j, P(A_j = 1 | A_<j))
/// and writes the returned bit to a_out[j].
template <class Decide>
void sc_walk(std::span<const Pair> leaf, std::size_t offset, Decide& decide, std::span<std::uint8_t> a_out) {
    const std::size_t m = leaf.size();
    if (m == 1) {
        const Pair p = normalized(leaf[0].p0, leaf[0].p1);
        a_out[0] = decide(offset, p.p1) ? 1 : 0;
        return;
    }
    const std::size_t h = m / 2;
    std::vector<Pair> next(h);
    // Top half of A is T(w) with w = x_top ^ x_bot.
    for (std::size_t i = 0; i < h; ++i) {
        const Pair& a = leaf[i];
        const Pair& b = leaf[h + i];
        next[i] = normalized(a.p0 * b.p0 + a.p1 * b.p1, a.p0 * b.p1 + a.p1 * b.p0);
    }
    sc_walk(std::span<const Pair>(next), offset, decide, a_out.subspan(0, h));

    Bits w(a_out.begin(), a_out.begin() + static_cast<std::ptrdiff_t>(h));
    polar_transform_in_place(w);
    // Bottom half of A is T(x_bot); given w, x_bot[i] has posterior
    // proportional to P(x_top = b ^ w_i) P(x_bot = b).
    for (std::size_t i = 0; i < h; ++i) {
        const Pair& a = leaf[i];
        const Pair& b = leaf[h + i];
        const double t0 = w[i] ? a.p1 : a.p0;
        const double t1 = w[i] ? a.p0 : a.p1;
        next[i] = normalized(t0 * b.p0, t1 * b.p1);
    }
    sc_walk(std::span<const Pair>(next), offset + h, decide, a_out.subspan(h, h));
}

}  // namespace detail

/// Runs SC over an i.i.d. source. `decide(j, p1)` returns the bit taken for A_j.
/// Returns A.
template <class Decide>
Bits sc_decide(const Dist& source, std::size_t n_len, Decide&& decide) {
    log2_exact(n_len);
    std::vector<Pair> leaf(n_len, Pair{source[0], source[1]});
    Bits a(n_len);
    detail::sc_walk(std::span<const Pair>(leaf), 0, decide, std::span<std::uint8_t>(a));
    return a;
}

/// Exact P(A_j = 1 | A_<j = a_<j) for every j, along the given A.
inline std::vector<double> sc_posteriors(const Dist& source, std::span<const std::uint8_t> a) {
    std::vector<double> post(a.size());
    sc_decide(source, a.size(), [&](std::size_t j, double p1) {
        post[j] = p1;
        return a[j] != 0;
    });
    return post;
}

// ---------------------------------------------------------------------------
// Exact tables

/// Prefix marginals of q_A for A = T(X), X ~ source^{(x)N}: level[i] has
/// 2^i entries, the law of A_{0..i-1}.
class PrefixTables {
public:
    PrefixTables(const Dist& source, std::size_t n_len) : n_len_(n_len) {
        log2_exact(n_len);
        if (source.size() != 2) throw std::invalid_argument("polar codec needs a binary source");
        if (n_len > kExactCapN) throw BudgetExceeded("exact polar tables capped at N = " + std::to_string(kExactCapN));
        const std::size_t total = std::size_t{1} << n_len;
        std::vector<double> qa(total, 0.0);
        Bits x(n_len);
        const double p0 = source[0];
        const double p1 = source[1];
        for (std::size_t v = 0; v < total; ++v) {
            const auto ones = static_cast<int>(std::popcount(v));
            const double px = std::pow(p1, ones) * std::pow(p0, static_cast<int>(n_len) - ones);
            for (std::size_t i = 0; i < n_len; ++i) x[i] = static_cast<std::uint8_t>((v >> (n_len - 1 - i)) & 1u);
            polar_transform_in_place(x);
            qa[pack(x)] += px;
        }
        levels_.resize(n_len + 1);
        levels_[n_len] = std::move(qa);
        for (std::size_t i = n_len; i-- > 0;) {
            const auto& fine = levels_[i + 1];
            auto& coarse = levels_[i];
            coarse.resize(fine.size() / 2);
            for (std::size_t p = 0; p < coarse.size(); ++p) coarse[p] = fine[2 * p] + fine[2 * p + 1];
        }
    }

    [[nodiscard]] std::size_t length() const noexcept { return n_len_; }
    [[nodiscard]] const std::vector<double>& level(std::size_t i) const { return levels_.at(i); }
    [[nodiscard]] const std::vector<double>& full() const { return levels_.back(); }

    /// q(A_j = 1 | A_<j = prefix), prefix packed with j bits; 0.5 if the prefix is impossible.
    [[nodiscard]] double cond_one(std::size_t j, std::uint64_t prefix) const {
        const double den = levels_[j][prefix];
        if (!(den > 0.0)) return 0.5;
        return levels_[j + 1][2 * prefix + 1] / den;
    }

private:
    std::size_t n_len_;
    std::vector<std::vector<double>> levels_;
};

// ---------------------------------------------------------------------------
// Profile

struct ProfileOptions {
    /// Permit Monte-Carlo estimation of the profile above the exact cap.
    bool allow_approximate = false;
    std::size_t mc_samples = 20000;
    std::uint64_t mc_seed = 0x5eed;
};

struct PolarProfile {
    std::size_t n = 0;
    std::size_t length = 1;  // N = 2^n
    Dist source;
    std::vector<double> cond_entropies;  // H(A_j | A_<j), bits
    double beta = kDefaultBeta;
    double delta_n = 0.0;                // 2^{-N^beta}
    std::vector<std::size_t> v_set;      // H > 1 - delta_n
    std::vector<std::size_t> h_set;      // H > delta_n
    bool exact = true;
    std::size_t mc_samples = 0;

    [[nodiscard]] double entropy_sum() const {
        double s = 0.0;
        for (double h : cond_entropies) s += h;
        return s;
    }
};

inline double delta_for(std::size_t n_len, double beta) {
    return std::exp2(-std::pow(static_cast<double>(n_len), beta));
}

inline void assign_sets(PolarProfile& prof) {
    prof.v_set.clear();
    prof.h_set.clear();
    for (std::size_t j = 0; j < prof.cond_entropies.size(); ++j) {
        if (prof.cond_entropies[j] > 1.0 - prof.delta_n) prof.v_set.push_back(j);
        if (prof.cond_entropies[j] > prof.delta_n) prof.h_set.push_back(j);
    }
}

/// Monte-Carlo estimate of H(A_j | A_<j): mean binary entropy of the SC
/// posterior along sampled source sequences.
inline std::vector<double> sampled_cond_entropies(const Dist& source, std::size_t n_len, const ProfileOptions& opts) {
    if (opts.mc_samples == 0) throw std::invalid_argument("approximate profiling needs samples");
    std::vector<double> out(n_len, 0.0);
    Rng rng(opts.mc_seed);
    Bits x(n_len);
    for (std::size_t s = 0; s < opts.mc_samples; ++s) {
        for (auto& b : x) b = rng.bernoulli(source[1]);
        const Bits a = polar_transform(x);
        const auto post = sc_posteriors(source, a);
        for (std::size_t j = 0; j < n_len; ++j) out[j] += h2(post[j]);
    }
    for (auto& h : out) h = std::clamp(h / static_cast<double>(opts.mc_samples), 0.0, 1.0);
    return out;
}

inline PolarProfile compute_profile(const Dist& source, std::size_t n, double beta = kDefaultBeta,
                                    const ProfileOptions& opts = {}) {
    if (source.size() != 2) throw std::invalid_argument("polar profile needs a binary source");
    if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in (0, 1/2)");
    if (n > 30) throw std::invalid_argument("block length exponent too large");
    const std::size_t n_len = std::size_t{1} << n;

    PolarProfile prof;
    prof.n = n;
    prof.length = n_len;
    prof.source = source;
    prof.beta = beta;
    prof.delta_n = delta_for(n_len, beta);
    prof.cond_entropies.assign(n_len, 0.0);

    if (n_len <= kExactCapN) {
        const PrefixTables tables(source, n_len);
        double prev = 0.0;
        for (std::size_t i = 1; i <= n_len; ++i) {
            const double hi = entropy(Dist(tables.level(i), true));
            prof.cond_entropies[i - 1] = std::clamp(hi - prev, 0.0, 1.0);
            prev = hi;
        }
        prof.exact = true;
    } else {
        if (!opts.allow_approximate)
            throw BudgetExceeded("N = " + std::to_string(n_len) + " exceeds the exact profiling cap " +
                                 std::to_string(kExactCapN) + "; enable approximate profiling");
        prof.cond_entropies = sampled_cond_entropies(source, n_len, opts);
        prof.exact = false;
        prof.mc_samples = opts.mc_samples;
    }
    assign_sets(prof);
    return prof;
}

inline void write_profile_csv(std::ostream& os, const PolarProfile& prof) {
    os << "index,cond_entropy,in_v_set,in_h_set\n";
    std::vector<bool> in_v(prof.length, false), in_h(prof.length, false);
    for (auto j : prof.v_set) in_v[j] = true;
    for (auto j : prof.h_set) in_h[j] = true;
    char buf[64];
    for (std::size_t j = 0; j < prof.length; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", prof.cond_entropies[j]);
        os << (j + 1) << ',' << buf << ',' << (in_v[j] ? 1 : 0) << ',' << (in_h[j] ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Codec

enum class IndexRole : std::uint8_t { Seed, Sampled, Argmax };

struct ResolvabilityCode {
    PolarProfile profile;
    std::vector<std::size_t> v_set;       // seed positions, ascending
    std::vector<IndexRole> roles;         // per index
    std::size_t seed_len = 0;             // |v_set|
    std::size_t input_width = 0;          // bits accepted per encode; extra bits beyond seed_len are ignored

    [[nodiscard]] std::size_t length() const noexcept { return profile.length; }
    [[nodiscard]] std::size_t sampled_count() const {
        return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), IndexRole::Sampled));
    }
    [[nodiscard]] std::size_t unused_input_bits() const noexcept { return input_width - seed_len; }
};

namespace detail {

inline ResolvabilityCode code_from_seed_set(const PolarProfile& prof, std::vector<std::size_t> v, std::size_t width) {
    ResolvabilityCode code;
    code.profile = prof;
    std::sort(v.begin(), v.end());
    code.roles.assign(prof.length, IndexRole::Argmax);
    for (auto j : prof.h_set) code.roles[j] = IndexRole::Sampled;
    for (auto j : v) code.roles[j] = IndexRole::Seed;
    code.seed_len = v.size();
    code.v_set = std::move(v);
    code.input_width = width;
    return code;
}

}  // namespace detail

/// Codec with the threshold seed set V = {j : H(A_j|A_<j) > 1 - delta_N}.
inline ResolvabilityCode make_code(const PolarProfile& prof) {
    return detail::code_from_seed_set(prof, prof.v_set, prof.v_set.size());
}

/// Codec accepting exactly `width` input bits. The seed set is the threshold
/// set V, cut down to its `width` highest-entropy indices (ties to the lower
/// index) when `width` < |V|; the cut indices fall back to sampling. When
/// `width` exceeds |V| the trailing input bits are not used.
inline ResolvabilityCode make_code_with_width(const PolarProfile& prof, std::size_t width) {
    std::vector<std::size_t> order = prof.v_set;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return prof.cond_entropies[a] > prof.cond_entropies[b];
    });
    order.resize(std::min(width, order.size()));
    return detail::code_from_seed_set(prof, std::move(order), width);
}

/// Rebuilds a codec from a stored seed set (descriptor replay).
inline ResolvabilityCode make_code_from_seed_set(const PolarProfile& prof, std::vector<std::size_t> v, std::size_t width) {
    for (auto j : v) {
        if (j >= prof.length) throw std::invalid_argument("seed index outside block");
        if (std::find(prof.h_set.begin(), prof.h_set.end(), j) == prof.h_set.end() &&
            std::find(prof.v_set.begin(), prof.v_set.end(), j) == prof.v_set.end())
            throw std::invalid_argument("seed index outside the high-entropy set");
    }
    if (v.size() > width) throw std::invalid_argument("seed set larger than input width");
    return detail::code_from_seed_set(prof, std::move(v), width);
}

/// Encoder with an injected sampler: `sample(j, p1)` returns the bit for
/// sampled index j with P(A_j = 1 | prefix) = p1.
template <class Sampler>
Bits encode_with(const ResolvabilityCode& code, std::span<const std::uint8_t> seed, Sampler&& sample) {
    if (seed.size() != code.input_width)
        throw std::invalid_argument("seed length " + std::to_string(seed.size()) + " does not match codec input width " +
                                    std::to_string(code.input_width));
    std::vector<std::size_t> rank(code.length(), 0);
    for (std::size_t r = 0; r < code.v_set.size(); ++r) rank[code.v_set[r]] = r;
    Bits a = sc_decide(code.profile.source, code.length(), [&](std::size_t j, double p1) -> bool {
        switch (code.roles[j]) {
            case IndexRole::Seed: return seed[rank[j]] != 0;
            case IndexRole::Sampled: return sample(j, p1) != 0;
            case IndexRole::Argmax: return p1 > 0.5;
        }
        return false;
    });
    polar_transform_in_place(a);
    return a;
}

inline Bits encode(const ResolvabilityCode& code, std::span<const std::uint8_t> seed, Rng& rng) {
    return encode_with(code, seed, [&](std::size_t, double p1) { return rng.bernoulli(p1); });
}

/// Exact law of the encoder output over X^N (N binary axes) when the first
/// `fixed_seed.size()` seed bits are fixed and the rest are uniform.
inline JointDist output_dist_exact(const ResolvabilityCode& code, std::span<const std::uint8_t> fixed_seed = {}) {
    const std::size_t n_len = code.length();
    if (n_len > kExactCapN) throw BudgetExceeded("exact output distribution capped at N = " + std::to_string(kExactCapN));
    if (fixed_seed.size() > code.seed_len) throw std::invalid_argument("more fixed seed bits than seed positions");
    const PrefixTables tables(code.profile.source, n_len);
    std::vector<std::size_t> rank(n_len, 0);
    for (std::size_t r = 0; r < code.v_set.size(); ++r) rank[code.v_set[r]] = r;

    std::vector<double> pa(std::size_t{1} << n_len, 0.0);
    // Depth-first over prefixes of A~, carrying the prefix probability.
    std::function<void(std::size_t, std::uint64_t, double)> walk = [&](std::size_t j, std::uint64_t prefix, double prob) {
        if (prob == 0.0) return;
        if (j == n_len) {
            pa[prefix] += prob;
            return;
        }
        double p1 = 0.0;
        switch (code.roles[j]) {
            case IndexRole::Seed:
                p1 = rank[j] < fixed_seed.size() ? static_cast<double>(fixed_seed[rank[j]] & 1u) : 0.5;
                break;
            case IndexRole::Sampled: p1 = tables.cond_one(j, prefix); break;
            case IndexRole::Argmax: p1 = tables.cond_one(j, prefix) > 0.5 ? 1.0 : 0.0; break;
        }
        walk(j + 1, prefix << 1, prob * (1.0 - p1));
        walk(j + 1, (prefix << 1) | 1u, prob * p1);
    };
    walk(0, 0, 1.0);

    std::vector<double> px(pa.size(), 0.0);
    for (std::size_t v = 0; v < pa.size(); ++v) {
        if (pa[v] == 0.0) continue;
        Bits a = unpack(v, n_len);
        polar_transform_in_place(a);
        px[pack(a)] += pa[v];
    }
    return JointDist(std::vector<std::size_t>(n_len, 2), std::move(px), true);
}

/// q_X^{(x)N} as a JointDist over N binary axes.
inline JointDist iid_source_dist(const Dist& source, std::size_t n_len) {
    if (n_len > kExactCapN) throw BudgetExceeded("i.i.d. table capped at N = " + std::to_string(kExactCapN));
    return JointDist(std::vector<std::size_t>(n_len, 2), iid_power(source, n_len), true);
}

}  // namespace macres::polar
