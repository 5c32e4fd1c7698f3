#pragma once

// Block-Markov MAC resolvability encoders.
//
// Every transmitter is described as a set of independent binary "streams",
// each driven by its own polar codec and Toeplitz hash. A channel input is
// the OR of its streams: transmitter 2 in the rate-split case is
// Y = max(U, V), everything else is a single stream. The stream in position
// s recycles r_s = ceil(N(H(S|C_s Z) - eps/2)) hashed bits of its previous
// block, where C_s are the streams it is decoded after, and takes
// ceil(N(I(S; C_s Z) + eps)) fresh bits per block after the first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "macres/hashing.hpp"
#include "macres/polar.hpp"
#include "macres/probcore.hpp"
#include "macres/ratesplit.hpp"
#include "macres/rng.hpp"

namespace macres::encoder {

inline constexpr double kCaseTol = 1e-9;
inline constexpr double kCeilSlack = 1e-9;  // absorbs float noise in N*H before ceil

enum class Mode { Case1, Case2, Multi };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Case1: return "case1";
        case Mode::Case2: return "case2";
        case Mode::Multi: return "multi";
    }
    return "?";
}

inline Mode mode_from_name(std::string_view s) {
    if (s == "case1") return Mode::Case1;
    if (s == "case2") return Mode::Case2;
    if (s == "multi") return Mode::Multi;
    throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Stream layout

struct StreamLayout {
    std::vector<std::string> names;
    std::vector<Dist> sources;                      // binary law of each stream
    std::vector<std::vector<std::size_t>> users;    // channel input l = OR of these streams
    std::vector<std::vector<std::size_t>> cond;     // streams conditioned on (besides Z)

    [[nodiscard]] std::size_t size() const noexcept { return sources.size(); }
};

/// X, U, V with Y = max(U, V); X after U, V after (U, X).
inline StreamLayout layout_case1(const Dist& p_x, const ratesplit::SplitPoint& sp) {
    return {{"X", "U", "V"}, {p_x, sp.p_u, sp.p_v}, {{0}, {1, 2}}, {{1}, {}, {1, 0}}};
}

/// U empty, V = Y: X against Z alone, Y after X.
inline StreamLayout layout_case2(const Dist& p_x, const Dist& p_y) {
    return {{"X", "Y"}, {p_x, p_y}, {{0}, {1}}, {{}, {0}}};
}

/// One stream per user; user order[l] is conditioned on order[0..l-1].
inline StreamLayout layout_multi(std::span<const Dist> inputs, std::span<const std::size_t> order) {
    const std::size_t users = inputs.size();
    if (order.size() != users) throw std::invalid_argument("user order must list every user once");
    std::vector<bool> seen(users, false);
    for (auto u : order) {
        if (u >= users || seen[u]) throw std::invalid_argument("user order is not a permutation");
        seen[u] = true;
    }
    StreamLayout lay;
    lay.cond.resize(users);
    for (std::size_t l = 0; l < users; ++l) {
        lay.names.push_back("X" + std::to_string(l + 1));
        lay.sources.push_back(inputs[l]);
        lay.users.push_back({l});
    }
    for (std::size_t pos = 0; pos < users; ++pos) lay.cond[order[pos]].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pos));
    return lay;
}

/// Exact pmf over (stream_0, ..., stream_{S-1}, Z).
inline JointDist stream_joint(const MacChannel& ch, const StreamLayout& lay) {
    const std::size_t ns = lay.size();
    if (lay.users.size() != ch.num_inputs()) throw std::invalid_argument("layout does not match channel arity");
    for (std::size_t l = 0; l < ch.num_inputs(); ++l)
        if (ch.input_sizes()[l] != 2) throw std::invalid_argument("channel inputs must be binary");
    for (const auto& s : lay.sources)
        if (s.size() != 2) throw std::invalid_argument("stream sources must be binary");
    const std::size_t nz = ch.output_size();
    std::vector<std::size_t> shape(ns, 2);
    shape.push_back(nz);
    std::vector<double> pmf((std::size_t{1} << ns) * nz, 0.0);
    std::vector<std::size_t> xs(ch.num_inputs());
    for (std::size_t v = 0; v < (std::size_t{1} << ns); ++v) {
        double w = 1.0;
        for (std::size_t s = 0; s < ns; ++s) w *= lay.sources[s][(v >> (ns - 1 - s)) & 1u];
        for (std::size_t l = 0; l < xs.size(); ++l) {
            xs[l] = 0;
            for (auto s : lay.users[l]) xs[l] |= (v >> (ns - 1 - s)) & 1u;
        }
        const std::size_t t = ch.tuple_index(xs);
        for (std::size_t z = 0; z < nz; ++z) pmf[v * nz + z] = w * ch.prob(z, t);
    }
    return JointDist(std::move(shape), std::move(pmf), true);
}

/// Case 1 iff I(XY;Z) > I(X;Z) + I(Y;Z) beyond 1e-9; otherwise Case 2.
inline Mode classify_case(const MacChannel& ch, std::span<const Dist> inputs) {
    if (ch.num_inputs() != 2) throw std::invalid_argument("case classification is defined for two users");
    const JointDist j = channel_joint(ch, inputs);
    const double gap = mutual_information(j, Axes{0, 1}, Axes{2}) - mutual_information(j, Axes{0}, Axes{2}) -
                       mutual_information(j, Axes{1}, Axes{2});
    return gap > kCaseTol ? Mode::Case1 : Mode::Case2;
}

// ---------------------------------------------------------------------------
// Length plan

struct PlanOptions {
    bool idealized = false;      // use xi/delta overrides instead of the finite-N formula
    double delta_override = 0.0;
    bool recycling = true;       // false: every block draws its full codec width fresh
};

struct StreamPlan {
    std::string name;
    double h = 0.0;        // H(S)
    double h_cond = 0.0;   // H(S | C_s Z)
    double mi = 0.0;       // I(S; C_s Z)
    std::size_t hash_len = 0;     // r_s
    std::size_t fresh_first = 0;  // |E_1|
    std::size_t fresh_rest = 0;   // |E_i|, i >= 2
    std::size_t width = 0;        // codec input width = r_s + |E_i|
    bool clamped = false;         // N(H(S|C_s Z) - eps/2) < 0
};

struct LengthPlan {
    std::size_t n = 0;
    std::size_t length = 1;  // N
    std::size_t k = 1;
    double xi = 0.0;
    double delta = 0.0;  // delta_A(N) (two users) or delta*_L(N)
    double eps = 0.0;    // eps1 or eps2
    bool idealized = false;
    bool recycling = true;
    bool asymptotic_only = false;
    std::vector<StreamPlan> streams;
    std::vector<std::vector<std::size_t>> users;
};

inline double delta_two_user(std::size_t n_len, std::size_t x_size = 2, std::size_t y_size = 2) {
    const double nn = static_cast<double>(n_len);
    return std::log2(static_cast<double>(y_size * y_size * x_size) + 3.0) * std::sqrt((2.0 / nn) * (3.0 + std::log2(nn)));
}

inline double delta_multi(std::size_t n_len, std::size_t users, std::size_t joint_input_size) {
    const double nn = static_cast<double>(n_len);
    return std::log2(static_cast<double>(joint_input_size) + 3.0) *
           std::sqrt((2.0 / nn) * (static_cast<double>(users) + std::log2(nn)));
}

inline std::size_t ceil_bits(double x) {
    const double c = std::ceil(x - kCeilSlack);
    return c <= 0.0 ? 0 : static_cast<std::size_t>(c);
}

inline LengthPlan make_plan(const MacChannel& ch, const StreamLayout& lay, Mode mode, std::size_t n_len, std::size_t k,
                            double xi, const PlanOptions& opts = {}) {
    const std::size_t n = polar::log2_exact(n_len);
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (opts.idealized) {
        if (!(xi >= 0.0) || !(opts.delta_override >= 0.0)) throw std::invalid_argument("idealized overrides must be >= 0");
    } else if (!(xi > 0.0)) {
        throw std::invalid_argument("xi must be > 0");
    }
    LengthPlan plan;
    plan.n = n;
    plan.length = n_len;
    plan.k = k;
    plan.xi = xi;
    plan.idealized = opts.idealized;
    plan.recycling = opts.recycling;
    plan.users = lay.users;
    if (opts.idealized) {
        plan.delta = opts.delta_override;
    } else if (mode == Mode::Multi) {
        std::size_t joint = 1;
        for (auto s : ch.input_sizes()) joint *= s;
        plan.delta = delta_multi(n_len, ch.num_inputs(), joint);
    } else {
        plan.delta = delta_two_user(n_len, ch.input_sizes()[0], ch.input_sizes()[1]);
    }
    plan.eps = 2.0 * (plan.delta + xi);

    const JointDist j = stream_joint(ch, lay);
    const std::size_t z_axis = lay.size();
    const double nn = static_cast<double>(n_len);
    for (std::size_t s = 0; s < lay.size(); ++s) {
        StreamPlan sp;
        sp.name = lay.names[s];
        Axes given = lay.cond[s];
        given.push_back(z_axis);
        sp.h = entropy(j, Axes{s});
        sp.h_cond = conditional_entropy(j, Axes{s}, given);
        sp.mi = mutual_information(j, Axes{s}, given);
        const double r_real = nn * (sp.h_cond - plan.eps / 2.0);
        sp.clamped = r_real < -kCeilSlack;
        sp.hash_len = std::min(ceil_bits(r_real), n_len);
        sp.fresh_rest = ceil_bits(nn * (sp.mi + plan.eps));
        sp.width = sp.hash_len + sp.fresh_rest;
        if (!opts.recycling) {
            sp.hash_len = 0;
            sp.fresh_rest = sp.width;
        }
        sp.fresh_first = std::max(ceil_bits(nn * (sp.h + plan.eps)), sp.width);
        plan.asymptotic_only = plan.asymptotic_only || sp.clamped;
        plan.streams.push_back(std::move(sp));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Rates

struct Rate {
    std::uint64_t bits = 0;   // numerator
    std::uint64_t denom = 1;  // kN
    [[nodiscard]] double value() const { return static_cast<double>(bits) / static_cast<double>(denom); }
};

struct RateTuple {
    std::vector<Rate> per_stream;
    std::vector<Rate> per_user;
};

/// R_s = (|E_1| + (k-1)|E_i|) / (kN); a user's rate sums its streams.
inline RateTuple achieved_rates(const LengthPlan& plan) {
    RateTuple out;
    const std::uint64_t denom = static_cast<std::uint64_t>(plan.k) * plan.length;
    for (const auto& s : plan.streams)
        out.per_stream.push_back({s.fresh_first + (plan.k - 1) * s.fresh_rest, denom});
    for (const auto& u : plan.users) {
        Rate r{0, denom};
        for (auto s : u) r.bits += out.per_stream[s].bits;
        out.per_user.push_back(r);
    }
    return out;
}

struct RateLimits {
    std::vector<double> per_stream;  // I(S; C_s Z) + eps
    std::vector<double> per_user;
};

/// k -> infinity limits of achieved_rates evaluated from the formula, I + eps.
inline RateLimits rate_limits(const LengthPlan& plan) {
    RateLimits out;
    for (const auto& s : plan.streams) out.per_stream.push_back(plan.recycling ? s.mi + plan.eps : s.h_cond + s.mi + plan.eps);
    for (const auto& u : plan.users) {
        double r = 0.0;
        for (auto s : u) r += out.per_stream[s];
        out.per_user.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Code

struct StreamCodec {
    polar::ResolvabilityCode code;
    hashing::ToeplitzHash hash;  // N -> r_s
};

struct MacCode {
    Mode mode = Mode::Case1;
    MacChannel channel;
    std::vector<Dist> inputs;
    std::optional<ratesplit::SplitPoint> split;
    std::vector<std::size_t> order;  // user order (multi); identity otherwise
    StreamLayout layout;
    LengthPlan plan;
    std::vector<StreamCodec> streams;

    [[nodiscard]] std::size_t length() const noexcept { return plan.length; }
    [[nodiscard]] std::size_t blocks() const noexcept { return plan.k; }
};

struct BuildOptions {
    double beta = polar::kDefaultBeta;
    PlanOptions plan;
    polar::ProfileOptions profile;
};

inline StreamLayout layout_for(Mode mode, std::span<const Dist> inputs, const std::optional<ratesplit::SplitPoint>& split,
                               std::span<const std::size_t> order) {
    switch (mode) {
        case Mode::Case1:
            if (!split) throw std::invalid_argument("case 1 needs a split point");
            return layout_case1(inputs[0], *split);
        case Mode::Case2:
            if (split) throw std::invalid_argument("case 2 takes no split point");
            return layout_case2(inputs[0], inputs[1]);
        case Mode::Multi: return layout_multi(inputs, order);
    }
    throw std::logic_error("unreachable");
}

/// Assemble a code from already chosen hashes (descriptor replay) or, when
/// `hashes` is empty, sample them from `rng`.
inline MacCode assemble_code(const MacChannel& ch, std::vector<Dist> inputs, Mode mode,
                             std::optional<ratesplit::SplitPoint> split, std::vector<std::size_t> order, std::size_t n_len,
                             std::size_t k, double xi, const BuildOptions& opts, Rng& rng,
                             std::vector<hashing::ToeplitzHash> hashes = {}) {
    if (inputs.size() != ch.num_inputs()) throw std::invalid_argument("one input distribution per user required");
    if (order.empty())
        for (std::size_t l = 0; l < inputs.size(); ++l) order.push_back(l);
    if (mode != Mode::Multi) {
        if (ch.num_inputs() != 2) throw std::invalid_argument("case 1 and case 2 codes need exactly two users");
        const Mode actual = classify_case(ch, inputs);
        if (actual != mode)
            throw std::invalid_argument(std::string("channel is ") + mode_name(actual) + ", refusing to build a " +
                                        mode_name(mode) + " code");
    }
    if (mode == Mode::Case1 && split) {
        const ratesplit::SplitPoint check = ratesplit::split_rates(ch, inputs[0], inputs[1][1], split->eps);
        if (std::abs(check.a() - split->a()) > 1e-12 || std::abs(check.b() - split->b()) > 1e-12)
            throw std::invalid_argument("split point does not match p_Y");
    }
    MacCode code;
    code.mode = mode;
    code.channel = ch;
    code.inputs = std::move(inputs);
    code.split = std::move(split);
    code.order = std::move(order);
    code.layout = layout_for(mode, code.inputs, code.split, code.order);
    code.plan = make_plan(ch, code.layout, mode, n_len, k, xi, opts.plan);
    if (!hashes.empty() && hashes.size() != code.layout.size())
        throw std::invalid_argument("one hash per stream required");
    for (std::size_t s = 0; s < code.layout.size(); ++s) {
        const auto& sp = code.plan.streams[s];
        auto prof = polar::compute_profile(code.layout.sources[s], code.plan.n, opts.beta, opts.profile);
        StreamCodec sc{polar::make_code_with_width(prof, sp.width), {}};
        if (hashes.empty()) {
            sc.hash = hashing::sample_hash(rng, n_len, sp.hash_len);
        } else {
            if (hashes[s].in_len() != n_len || hashes[s].out_len() != sp.hash_len)
                throw std::invalid_argument("hash " + std::to_string(s) + " dimensions do not match the plan");
            sc.hash = hashes[s];
        }
        code.streams.push_back(std::move(sc));
    }
    return code;
}

/// Two-user code; the case follows from the channel and inputs. For Case 1,
/// `split` selects the dominant-face point.
inline MacCode build_two_user(const MacChannel& ch, const Dist& p_x, const Dist& p_y,
                              std::optional<ratesplit::SplitPoint> split, std::size_t n_len, std::size_t k, double xi,
                              const BuildOptions& opts, Rng& rng) {
    std::vector<Dist> in{p_x, p_y};
    const Mode mode = classify_case(ch, in);
    if (mode == Mode::Case2) split.reset();
    else if (!split) throw std::invalid_argument("case 1 channel needs a split point");
    return assemble_code(ch, std::move(in), mode, std::move(split), {}, n_len, k, xi, opts, rng);
}

inline MacCode build_multi(const MacChannel& ch, std::vector<Dist> inputs, std::vector<std::size_t> order,
                           std::size_t n_len, std::size_t k, double xi, const BuildOptions& opts, Rng& rng) {
    return assemble_code(ch, std::move(inputs), Mode::Multi, std::nullopt, std::move(order), n_len, k, xi, opts, rng);
}

// ---------------------------------------------------------------------------
// Encoding

struct StreamBlock {
    Bits recycled;     // hash of the previous block's sequence (empty in block 1)
    Bits fresh;        // fresh uniform bits consumed this block
    Bits codec_input;  // recycled || fresh (block 1: first `width` fresh bits)
    Bits sampled;      // local randomness drawn at sampled indices, in index order
    Bits seq;          // codec output, length N
};

struct Block {
    std::vector<StreamBlock> streams;
    std::vector<Bits> inputs;  // channel input per user
    Symbols z;
};

struct Transcript {
    std::vector<Block> blocks;
};

/// One block of one stream. `prev_seq` is null in block 1.
template <class Sampler>
StreamBlock encode_stream_block(const MacCode& code, std::size_t s, const Bits* prev_seq, std::span<const std::uint8_t> fresh,
                                Sampler&& sample) {
    const auto& sp = code.plan.streams[s];
    const auto& sc = code.streams[s];
    StreamBlock out;
    out.fresh.assign(fresh.begin(), fresh.end());
    if (prev_seq == nullptr) {
        if (fresh.size() != sp.fresh_first)
            throw std::invalid_argument("block-1 seed for stream " + sp.name + " must have " + std::to_string(sp.fresh_first) + " bits");
        out.codec_input.assign(fresh.begin(), fresh.begin() + static_cast<std::ptrdiff_t>(sp.width));
    } else {
        if (fresh.size() != sp.fresh_rest)
            throw std::invalid_argument("seed for stream " + sp.name + " must have " + std::to_string(sp.fresh_rest) + " bits");
        out.recycled = sc.hash.apply(*prev_seq);
        out.codec_input = out.recycled;
        out.codec_input.insert(out.codec_input.end(), fresh.begin(), fresh.end());
    }
    out.seq = polar::encode_with(sc.code, out.codec_input, [&](std::size_t j, double p1) {
        const std::uint8_t b = sample(j, p1);
        out.sampled.push_back(b);
        return b;
    });
    return out;
}

/// Channel input of user l: componentwise OR of its streams.
inline Bits combine_inputs(const MacCode& code, std::size_t user, std::span<const StreamBlock> streams) {
    Bits x(code.length(), 0);
    for (auto s : code.layout.users[user])
        for (std::size_t i = 0; i < x.size(); ++i) x[i] |= streams[s].seq[i];
    return x;
}

/// seeds[s][i] are the fresh bits of stream s in block i. Local randomness of
/// stream s comes from rng.split(s), so each stream is reproducible alone.
inline std::vector<std::vector<StreamBlock>> encode_streams(const MacCode& code, std::span<const std::size_t> which,
                                                            const std::vector<std::vector<Bits>>& seeds, const Rng& rng) {
    if (seeds.size() != which.size()) throw std::invalid_argument("one seed list per stream required");
    std::vector<std::vector<StreamBlock>> out(which.size());
    for (std::size_t w = 0; w < which.size(); ++w) {
        const std::size_t s = which[w];
        if (seeds[w].size() != code.blocks()) throw std::invalid_argument("one seed per block required");
        Rng local = rng.split(s);
        for (std::size_t i = 0; i < code.blocks(); ++i) {
            const Bits* prev = i == 0 ? nullptr : &out[w][i - 1].seq;
            out[w].push_back(encode_stream_block(code, s, prev, seeds[w][i],
                                                 [&](std::size_t, double p1) { return local.bernoulli(p1); }));
        }
    }
    return out;
}

namespace detail {

inline std::vector<Bits> seqs_of(const std::vector<StreamBlock>& blocks) {
    std::vector<Bits> out;
    for (const auto& b : blocks) out.push_back(b.seq);
    return out;
}

}  // namespace detail

/// Transmitter 1 (stream X): per-block sequences.
inline std::vector<Bits> encode_tx1(const MacCode& code, const std::vector<Bits>& seeds, const Rng& rng) {
    if (code.mode == Mode::Multi) throw std::invalid_argument("encode_tx1 applies to two-user codes");
    const std::size_t which[] = {0};
    return detail::seqs_of(encode_streams(code, which, {seeds}, rng)[0]);
}

struct Tx2Output {
    std::vector<Bits> u, v, y;
};

/// Transmitter 2 in Case 1: virtual streams U, V and Y = max(U, V).
inline Tx2Output encode_tx2(const MacCode& code, const std::vector<Bits>& seeds_d, const std::vector<Bits>& seeds_f,
                            const Rng& rng) {
    if (code.mode != Mode::Case1) throw std::invalid_argument("encode_tx2 requires a case 1 code");
    const std::size_t which[] = {1, 2};
    auto st = encode_streams(code, which, {seeds_d, seeds_f}, rng);
    Tx2Output out{detail::seqs_of(st[0]), detail::seqs_of(st[1]), {}};
    for (std::size_t i = 0; i < code.blocks(); ++i) {
        Bits y(code.length());
        for (std::size_t t = 0; t < y.size(); ++t) y[t] = std::max(out.u[i][t], out.v[i][t]);
        out.y.push_back(std::move(y));
    }
    return out;
}

/// Case 2: seeds[0] for X, seeds[1] for Y; returns per-stream per-block sequences.
inline std::vector<std::vector<Bits>> encode_case2(const MacCode& code, const std::vector<std::vector<Bits>>& seeds,
                                                   const Rng& rng) {
    if (code.mode != Mode::Case2) throw std::invalid_argument("encode_case2 requires a case 2 code");
    const std::size_t which[] = {0, 1};
    auto st = encode_streams(code, which, seeds, rng);
    return {detail::seqs_of(st[0]), detail::seqs_of(st[1])};
}

/// L users: seeds[l][i]; returns per-user per-block sequences.
inline std::vector<std::vector<Bits>> encode_multi(const MacCode& code, const std::vector<std::vector<Bits>>& seeds,
                                                   const Rng& rng) {
    if (code.mode != Mode::Multi) throw std::invalid_argument("encode_multi requires a multi-user code");
    std::vector<std::size_t> which(code.layout.size());
    for (std::size_t s = 0; s < which.size(); ++s) which[s] = s;
    auto st = encode_streams(code, which, seeds, rng);
    std::vector<std::vector<Bits>> out;
    for (auto& s : st) out.push_back(detail::seqs_of(s));
    return out;
}

/// Fresh seeds for every stream and block, drawn from rng.split(1000 + s).
inline std::vector<std::vector<Bits>> draw_seeds(const MacCode& code, const Rng& rng) {
    std::vector<std::vector<Bits>> seeds(code.layout.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        Rng r = rng.split(1000 + s);
        for (std::size_t i = 0; i < code.blocks(); ++i) {
            Bits b(i == 0 ? code.plan.streams[s].fresh_first : code.plan.streams[s].fresh_rest);
            for (auto& x : b) x = r.bit();
            seeds[s].push_back(std::move(b));
        }
    }
    return seeds;
}

/// One full trial: seeds, all streams, channel. Deterministic in `rng`'s key.
inline Transcript simulate_trial(const MacCode& code, const Rng& rng) {
    const auto seeds = draw_seeds(code, rng);
    std::vector<std::size_t> which(code.layout.size());
    for (std::size_t s = 0; s < which.size(); ++s) which[s] = s;
    auto st = encode_streams(code, which, seeds, rng);
    Rng chan = rng.split(2000);
    Transcript tr;
    for (std::size_t i = 0; i < code.blocks(); ++i) {
        Block b;
        for (auto& s : st) b.streams.push_back(std::move(s[i]));
        for (std::size_t l = 0; l < code.layout.users.size(); ++l) b.inputs.push_back(combine_inputs(code, l, b.streams));
        b.z = transmit(code.channel, b.inputs, chan);
        tr.blocks.push_back(std::move(b));
    }
    return tr;
}

/// Re-encodes every stream from the recorded fresh and sampled bits; the
/// recycled bits are recomputed from the replayed previous block.
inline std::vector<std::vector<Bits>> replay_sequences(const MacCode& code, const Transcript& tr) {
    std::vector<std::vector<Bits>> out(code.layout.size());
    for (std::size_t s = 0; s < code.layout.size(); ++s) {
        for (std::size_t i = 0; i < tr.blocks.size(); ++i) {
            const auto& rec = tr.blocks[i].streams[s];
            std::size_t next = 0;
            const Bits* prev = i == 0 ? nullptr : &out[s][i - 1];
            auto blk = encode_stream_block(code, s, prev, rec.fresh, [&](std::size_t, double) {
                if (next >= rec.sampled.size()) throw std::runtime_error("replay ran out of recorded samples");
                return rec.sampled[next++];
            });
            out[s].push_back(std::move(blk.seq));
        }
    }
    return out;
}

/// Total local randomness (sampled-index draws) per block, summed over streams.
inline std::size_t local_randomness_per_block(const MacCode& code) {
    std::size_t n = 0;
    for (const auto& sc : code.streams) n += sc.code.sampled_count();
    return n;
}

// ---------------------------------------------------------------------------
// Time sharing between user orders

struct Segment {
    std::vector<std::size_t> order;
    std::size_t blocks = 1;
};

struct TimeSharing {
    std::vector<MacCode> codes;     // one chain per segment
    std::vector<double> user_rates; // block-weighted average of the segment rates
    std::size_t total_blocks = 0;
};

inline TimeSharing build_time_sharing(const MacChannel& ch, const std::vector<Dist>& inputs,
                                      const std::vector<Segment>& segments, std::size_t n_len, double xi,
                                      const BuildOptions& opts, Rng& rng) {
    if (segments.empty()) throw std::invalid_argument("time sharing needs at least one segment");
    TimeSharing ts;
    ts.user_rates.assign(inputs.size(), 0.0);
    for (const auto& seg : segments) ts.total_blocks += seg.blocks;
    for (const auto& seg : segments) {
        ts.codes.push_back(build_multi(ch, inputs, seg.order, n_len, seg.blocks, xi, opts, rng));
        const auto r = achieved_rates(ts.codes.back().plan);
        const double w = static_cast<double>(seg.blocks) / static_cast<double>(ts.total_blocks);
        for (std::size_t l = 0; l < inputs.size(); ++l) ts.user_rates[l] += w * r.per_user[l].value();
    }
    return ts;
}

}  // namespace macres::encoder
