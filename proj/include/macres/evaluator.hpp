#pragma once

// Region geometry, exact and Monte-Carlo variational distances, independence
// diagnostics, leftover-hash checks and the reference bound curves.
//
// All distances use the unnormalized convention sum |p - q| in [0, 2].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "macres/encoder.hpp"
#include "macres/hashing.hpp"
#include "macres/parallel.hpp"
#include "macres/polar.hpp"
#include "macres/probcore.hpp"
#include "macres/rng.hpp"

namespace macres::evaluator {

inline constexpr double kRegionTol = 1e-9;
inline constexpr std::size_t kPathBudget = std::size_t{1} << 28;
inline constexpr std::size_t kTableBudget = std::size_t{1} << 26;
inline constexpr std::size_t kMinDiagnosticTrials = 1000;

// ---------------------------------------------------------------------------
// Region

struct Constraint {
    std::uint32_t mask = 0;  // bit l set <=> user l in S
    double bound = 0.0;      // I(X_S; Z)
};

struct Corner {
    std::vector<std::size_t> order;
    std::vector<double> rates;  // indexed by user
};

struct RegionSpec {
    std::size_t users = 0;
    std::vector<Constraint> constraints;  // all non-empty S, by mask
    std::vector<Corner> corners;          // all L! orders, lexicographic
    std::optional<encoder::Mode> case_tag;
    double face_lo = 0.0;  // two users: I(X;Z)
    double face_hi = 0.0;  // two users: I(X;Z|Y)

    [[nodiscard]] double bound(std::uint32_t mask) const { return mask == 0 ? 0.0 : constraints.at(mask - 1).bound; }
};

inline Axes axes_of(std::uint32_t mask, std::size_t users) {
    Axes out;
    for (std::size_t l = 0; l < users; ++l)
        if (mask & (1u << l)) out.push_back(l);
    return out;
}

/// Region for a joint over (X_1, ..., X_L, Z).
inline RegionSpec region_from_joint(const JointDist& j, std::size_t users) {
    if (j.rank() != users + 1) throw std::invalid_argument("joint must have one axis per user plus the output");
    RegionSpec reg;
    reg.users = users;
    const Axes z{users};
    for (std::uint32_t m = 1; m < (1u << users); ++m) reg.constraints.push_back({m, mutual_information(j, axes_of(m, users), z)});
    std::vector<std::size_t> order(users);
    std::iota(order.begin(), order.end(), 0);
    do {
        Corner c{order, std::vector<double>(users, 0.0)};
        Axes before;
        for (auto l : order) {
            c.rates[l] = mutual_information(j, Axes{l}, z, before);
            before.push_back(l);
        }
        reg.corners.push_back(std::move(c));
    } while (std::next_permutation(order.begin(), order.end()));
    return reg;
}

inline RegionSpec region_2user(const MacChannel& ch, const Dist& p_x, const Dist& p_y) {
    if (ch.num_inputs() != 2) throw std::invalid_argument("region_2user needs a two-user channel");
    const std::vector<Dist> in{p_x, p_y};
    const JointDist j = channel_joint(ch, in);
    RegionSpec reg = region_from_joint(j, 2);
    reg.case_tag = encoder::classify_case(ch, in);
    reg.face_lo = mutual_information(j, Axes{0}, Axes{2});
    reg.face_hi = mutual_information(j, Axes{0}, Axes{2}, Axes{1});
    return reg;
}

inline RegionSpec region_multi(const MacChannel& ch, const std::vector<Dist>& inputs) {
    if (ch.num_inputs() > 4) throw std::invalid_argument("region_multi supports at most 4 users");
    return region_from_joint(channel_joint(ch, inputs), ch.num_inputs());
}

struct ModularityCheck {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // most negative slack seen
};

/// S -> I(X_S; Z) must satisfy f(S u T) + f(S n T) >= f(S) + f(T).
inline ModularityCheck check_supermodular(const RegionSpec& reg, double tol = kRegionTol) {
    ModularityCheck out;
    const std::uint32_t full = 1u << reg.users;
    for (std::uint32_t s = 0; s < full; ++s)
        for (std::uint32_t t = 0; t < full; ++t) {
            const double slack = reg.bound(s | t) + reg.bound(s & t) - reg.bound(s) - reg.bound(t);
            ++out.pairs;
            out.worst = std::min(out.worst, slack);
            if (slack < -tol) ++out.violations;
        }
    return out;
}

/// Every corner meets every constraint, and the full-set constraint is tight.
inline bool corners_valid(const RegionSpec& reg, double tol = kRegionTol) {
    const std::uint32_t full = (1u << reg.users) - 1;
    for (const auto& c : reg.corners) {
        for (const auto& con : reg.constraints) {
            double sum = 0.0;
            for (std::size_t l = 0; l < reg.users; ++l)
                if (con.mask & (1u << l)) sum += c.rates[l];
            if (sum < con.bound - tol) return false;
            if (con.mask == full && std::abs(sum - con.bound) > tol) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Reference bound curves

struct BoundCurves {
    bool starred = false;
    std::size_t users = 2;
    double delta_n = 0.0;  // codec approximation error delta(N)
    double delta0 = 0.0;
    std::vector<double> delta_i;   // i = 1..k
    std::vector<double> delta1_i;  // i = 2..k (index 0 is block 2)
    std::vector<double> delta2_i;  // i = 2..k
    double joint = 0.0;
    bool vacuous = false;  // joint > 2
};

/// `users` = 0 selects the two-user curves; otherwise the L-user ones.
inline BoundCurves bound_curves(double delta_n, std::size_t n_len, double xi, std::size_t k, std::size_t users = 0) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    BoundCurves b;
    b.starred = users != 0;
    b.users = users == 0 ? 2 : users;
    b.delta_n = delta_n;
    const double nn = static_cast<double>(n_len);
    const double tail = std::exp2(-nn * xi / 2.0);
    b.delta0 = 2.0 / nn + (b.starred ? std::exp2(static_cast<double>(users) / 2.0) : std::sqrt(7.0)) * tail;
    for (std::size_t i = 1; i <= k; ++i) {
        const double di = static_cast<double>(i);
        double v;
        if (!b.starred) {
            v = 1.5 * (delta_n + b.delta0) * (std::pow(3.0, di) - 1.0) + std::pow(3.0, di + 1.0) * delta_n;
        } else {
            const double lu = static_cast<double>(users);
            const double geo = users == 1 ? di : (std::pow(lu, di) - 1.0) / (lu - 1.0);
            v = lu * (delta_n + b.delta0) * geo + std::pow(lu, di + 1.0) * delta_n;
        }
        b.delta_i.push_back(v);
    }
    for (std::size_t i = 2; i <= k; ++i) {
        const double d1 = 4.0 * b.delta_i[i - 2] + 2.0 * b.delta0;
        b.delta1_i.push_back(d1);
        b.delta2_i.push_back((std::exp2(static_cast<double>(i - 1)) - 1.0) * d1);
    }
    b.joint = (k == 1 ? 0.0 : static_cast<double>(k - 1) * b.delta2_i.back()) + static_cast<double>(k) * b.delta_i.back();
    b.vacuous = b.joint > 2.0;
    return b;
}

/// max over streams of V(codec output law, q^N); nullopt above the exact cap.
inline std::optional<double> codec_delta(const encoder::MacCode& code) {
    if (code.length() > polar::kExactCapN) return std::nullopt;
    double worst = 0.0;
    for (std::size_t s = 0; s < code.streams.size(); ++s) {
        const JointDist p = polar::output_dist_exact(code.streams[s].code);
        const JointDist q = polar::iid_source_dist(code.layout.sources[s], code.length());
        worst = std::max(worst, variational_distance(p, q));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Exhaustive evaluation: forward recursion over the block-Markov chain.

struct ExhaustiveResult {
    double joint_tv = 0.0;                        // V(p~_{Z_{1:k}}, q_Z^{kN})
    std::vector<double> block_tv;                 // V(p~_{Z_i}, q_Z^N), i = 1..k
    std::vector<double> inter_block_tv;           // V(p~_{Z_{i-1} Z_i}, p~_{Z_{i-1}} p~_{Z_i}), i = 2..k
    std::vector<double> recycled_dependence_tv;   // V(p~_{Z_{i-1} E_i}, p~_{Z_{i-1}} p~_{E_i}), i = 2..k
    std::vector<double> history_dependence_tv;    // V(p~_{Z_{1:i-1} E_i}, p~_{Z_{1:i-1}} p~_{E_i}), i = 2..k
    std::vector<double> recycled_uniformity_tv;   // V(p~_{Z_{i-1} E_i}, q_Z^N x uniform), i = 2..k
    std::vector<double> pmf;                      // exact law of Z^{kN}, position 0 most significant
    std::size_t paths = 0;                        // encoder runs enumerated
};

namespace detail {

inline std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < e; ++i) {
        if (b != 0 && r > std::numeric_limits<std::size_t>::max() / b) throw BudgetExceeded("state space overflow");
        r *= b;
    }
    return r;
}

inline Bits bits_of(std::uint64_t v, std::size_t len) { return len == 0 ? Bits{} : polar::unpack(v, len); }

/// Law of one stream's block sequence (packed, 2^N) when its codec input is
/// `prefix` followed by `free_bits` uniform bits, enumerating every local
/// sampling path through the real encoder.
inline std::vector<double> stream_law(const polar::ResolvabilityCode& code, const Bits& prefix, std::size_t free_bits,
                                      std::size_t& paths) {
    const std::size_t c = code.sampled_count();
    const std::size_t n_len = code.length();
    std::vector<double> law(std::size_t{1} << n_len, 0.0);
    const double w_free = std::exp2(-static_cast<double>(free_bits));
    Bits input = prefix;
    input.resize(prefix.size() + free_bits);
    for (std::uint64_t f = 0; f < (std::uint64_t{1} << free_bits); ++f) {
        for (std::size_t b = 0; b < free_bits; ++b) input[prefix.size() + b] = static_cast<std::uint8_t>((f >> (free_bits - 1 - b)) & 1u);
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << c); ++m) {
            double prob = w_free;
            std::size_t idx = 0;
            const Bits seq = polar::encode_with(code, input, [&](std::size_t, double p1) {
                const std::uint8_t bit = static_cast<std::uint8_t>((m >> (c - 1 - idx)) & 1u);
                ++idx;
                prob *= bit ? p1 : 1.0 - p1;
                return bit;
            });
            ++paths;
            if (prob > 0.0) law[polar::pack(seq)] += prob;
        }
    }
    return law;
}

struct InputKeyHash {
    std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        for (auto x : v) h = (h ^ x) * 1099511628211ULL;
        return h;
    }
};

/// Z-block law (|Z|^N, position 0 most significant) for fixed per-user inputs.
inline std::vector<double> z_block_law(const MacChannel& ch, std::span<const std::uint64_t> inputs, std::size_t n_len) {
    const std::size_t nz = ch.output_size();
    std::vector<double> law{1.0};
    std::vector<std::size_t> xs(inputs.size());
    for (std::size_t i = 0; i < n_len; ++i) {
        for (std::size_t l = 0; l < inputs.size(); ++l) xs[l] = (inputs[l] >> (n_len - 1 - i)) & 1u;
        const std::size_t t = ch.tuple_index(xs);
        std::vector<double> next(law.size() * nz, 0.0);
        for (std::size_t a = 0; a < law.size(); ++a)
            if (law[a] != 0.0)
                for (std::size_t z = 0; z < nz; ++z) next[a * nz + z] = law[a] * ch.prob(z, t);
        law = std::move(next);
    }
    return law;
}

/// TV between a 2-D table p[a][b] (row-major) and the product of its marginals.
inline double dependence_tv(std::span<const double> p, std::size_t rows, std::size_t cols) {
    std::vector<double> pa(rows, 0.0), pb(cols, 0.0);
    for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t b = 0; b < cols; ++b) {
            pa[a] += p[a * cols + b];
            pb[b] += p[a * cols + b];
        }
    double tv = 0.0;
    for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t b = 0; b < cols; ++b) tv += std::abs(p[a * cols + b] - pa[a] * pb[b]);
    return tv;
}

}  // namespace detail

inline ExhaustiveResult tv_exhaustive(const encoder::MacCode& code, std::size_t path_budget = kPathBudget,
                                      std::size_t table_budget = kTableBudget) {
    const auto& plan = code.plan;
    const std::size_t n_len = plan.length;
    const std::size_t k = plan.k;
    const std::size_t ns = code.streams.size();
    const std::size_t nz = code.channel.output_size();
    const std::size_t users = code.layout.users.size();
    if (n_len > 16) throw BudgetExceeded("exhaustive evaluation limited to N <= 16");

    // Budget estimate before any work.
    std::size_t est_paths = 0;
    std::size_t total_r = 0;
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = plan.streams[s];
        const std::size_t c = code.streams[s].code.sampled_count();
        if (sp.width + c >= 60 || sp.hash_len + sp.fresh_rest + c >= 60) throw BudgetExceeded("too many randomness bits to enumerate");
        est_paths += std::size_t{1} << (sp.width + c);
        if (k > 1) est_paths += std::size_t{1} << (sp.hash_len + sp.fresh_rest + c);
        total_r += sp.hash_len;
    }
    if (est_paths > path_budget) throw BudgetExceeded("exhaustive evaluation needs " + std::to_string(est_paths) + " encoder paths");
    if (total_r >= 40) throw BudgetExceeded("recycled state space too large");
    const std::size_t zb = detail::ipow(nz, n_len);
    const std::size_t states = std::size_t{1} << total_r;
    const std::size_t zfull = detail::ipow(zb, k);
    if (zfull > table_budget || (k > 1 && detail::ipow(zb, k - 1) * states > table_budget))
        throw BudgetExceeded("exhaustive output table exceeds budget");
    // per-block work: every stream-sequence tuple for each recycled state, and one Z-law per input tuple
    const std::size_t seqs = std::size_t{1} << n_len;
    if (detail::ipow(seqs, ns) * (k > 1 ? states + 1 : 1) > path_budget)
        throw BudgetExceeded("exhaustive evaluation needs too many stream-sequence tuples");
    if (detail::ipow(seqs, users) * zb > table_budget) throw BudgetExceeded("per-input output laws exceed budget");

    ExhaustiveResult res;

    // Per-stream sequence laws: block 1 and, for i >= 2, per recycled value.
    std::vector<std::vector<double>> first(ns);
    std::vector<std::vector<std::vector<double>>> later(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& sp = plan.streams[s];
        first[s] = detail::stream_law(code.streams[s].code, {}, sp.width, res.paths);
        if (k > 1)
            for (std::uint64_t e = 0; e < (std::uint64_t{1} << sp.hash_len); ++e)
                later[s].push_back(detail::stream_law(code.streams[s].code, detail::bits_of(e, sp.hash_len), sp.fresh_rest, res.paths));
    }

    std::vector<std::size_t> r_of(ns);
    for (std::size_t s = 0; s < ns; ++s) r_of[s] = plan.streams[s].hash_len;

    std::unordered_map<std::vector<std::uint64_t>, std::vector<double>, detail::InputKeyHash> zcache;
    auto zlaw = [&](const std::vector<std::uint64_t>& inputs) -> const std::vector<double>& {
        auto it = zcache.find(inputs);
        if (it == zcache.end()) it = zcache.emplace(inputs, detail::z_block_law(code.channel, inputs, n_len)).first;
        return it->second;
    };

    // Block transition for a given set of per-stream laws:
    // list of (next_state, user inputs, probability).
    struct Edge {
        std::uint64_t next;
        std::vector<std::uint64_t> inputs;
        double prob;
    };
    auto transitions = [&](const std::vector<const std::vector<double>*>& laws) {
        std::map<std::pair<std::uint64_t, std::vector<std::uint64_t>>, double> acc;
        std::vector<std::uint64_t> seq(ns, 0);
        std::vector<std::vector<std::uint64_t>> support(ns);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::uint64_t v = 0; v < laws[s]->size(); ++v)
                if ((*laws[s])[v] > 0.0) support[s].push_back(v);
        std::vector<std::size_t> pos(ns, 0);
        for (std::size_t s = 0; s < ns; ++s)
            if (support[s].empty()) return std::vector<Edge>{};
        while (true) {
            double p = 1.0;
            std::uint64_t next = 0;
            for (std::size_t s = 0; s < ns; ++s) {
                seq[s] = support[s][pos[s]];
                p *= (*laws[s])[seq[s]];
                next = (next << r_of[s]) | code.streams[s].hash.apply_packed(seq[s]);
            }
            std::vector<std::uint64_t> in(users, 0);
            for (std::size_t l = 0; l < users; ++l)
                for (auto s : code.layout.users[l]) in[l] |= seq[s];
            acc[{next, in}] += p;
            std::size_t s = ns;
            while (s-- > 0) {
                if (++pos[s] < support[s].size()) break;
                pos[s] = 0;
            }
            if (s == static_cast<std::size_t>(-1)) break;
        }
        std::vector<Edge> out;
        for (auto& [key, p] : acc) out.push_back({key.first, key.second, p});
        return out;
    };

    auto state_laws = [&](std::uint64_t state) {
        std::vector<const std::vector<double>*> laws(ns);
        std::size_t shift = total_r;
        for (std::size_t s = 0; s < ns; ++s) {
            shift -= r_of[s];
            const std::uint64_t e = r_of[s] == 0 ? 0 : (state >> shift) & ((std::uint64_t{1} << r_of[s]) - 1);
            laws[s] = &later[s][e];
        }
        return laws;
    };

    // table[h * states + e]: P(Z_{1:i} = h, E_{i+1} = e).
    std::vector<double> table;
    std::size_t hist = 1;
    {
        std::vector<const std::vector<double>*> laws(ns);
        for (std::size_t s = 0; s < ns; ++s) laws[s] = &first[s];
        const auto edges = transitions(laws);
        const std::size_t st_out = k == 1 ? 1 : states;
        table.assign(zb * st_out, 0.0);
        for (const auto& e : edges) {
            const auto& zl = zlaw(e.inputs);
            const std::uint64_t nxt = k == 1 ? 0 : e.next;
            for (std::size_t z = 0; z < zb; ++z) table[z * st_out + nxt] += e.prob * zl[z];
        }
        hist = zb;
    }

    const std::vector<double> qz_block = iid_power(target_output_dist(code.channel, code.inputs), n_len);

    auto record_state_diagnostics = [&](std::size_t hist_size) {
        // P(Z_{1:i}, E_{i+1}) -> history dependence; P(Z_i, E_{i+1}) -> block dependence / uniformity.
        res.history_dependence_tv.push_back(detail::dependence_tv(table, hist_size, states));
        std::vector<double> last(zb * states, 0.0);
        for (std::size_t h = 0; h < hist_size; ++h)
            for (std::size_t e = 0; e < states; ++e) last[(h % zb) * states + e] += table[h * states + e];
        res.recycled_dependence_tv.push_back(detail::dependence_tv(last, zb, states));
        double u = 0.0;
        const double pe = 1.0 / static_cast<double>(states);
        for (std::size_t z = 0; z < zb; ++z)
            for (std::size_t e = 0; e < states; ++e) u += std::abs(last[z * states + e] - qz_block[z] * pe);
        res.recycled_uniformity_tv.push_back(u);
    };

    std::vector<std::vector<Edge>> edge_cache(k > 1 ? states : 0);
    std::vector<bool> edge_ready(edge_cache.size(), false);
    for (std::size_t i = 2; i <= k; ++i) {
        record_state_diagnostics(hist);
        const bool last_block = i == k;
        const std::size_t st_out = last_block ? 1 : states;
        std::vector<double> next(hist * zb * st_out, 0.0);
        for (std::uint64_t e = 0; e < states; ++e) {
            double mass = 0.0;
            for (std::size_t h = 0; h < hist; ++h) mass += table[h * states + e];
            if (mass == 0.0) continue;
            if (!edge_ready[e]) {
                edge_cache[e] = transitions(state_laws(e));
                edge_ready[e] = true;
            }
            for (const auto& ed : edge_cache[e]) {
                const auto& zl = zlaw(ed.inputs);
                const std::uint64_t nxt = last_block ? 0 : ed.next;
                for (std::size_t h = 0; h < hist; ++h) {
                    const double ph = table[h * states + e] * ed.prob;
                    if (ph == 0.0) continue;
                    double* row = &next[(h * zb) * st_out];
                    for (std::size_t z = 0; z < zb; ++z) row[z * st_out + nxt] += ph * zl[z];
                }
            }
        }
        table = std::move(next);
        hist *= zb;
    }

    res.pmf = std::move(table);
    const std::vector<double> qfull = iid_power(target_output_dist(code.channel, code.inputs), n_len * k);
    res.joint_tv = variational_distance(res.pmf, qfull);

    // Block marginals and consecutive-pair dependence.
    std::vector<std::vector<double>> blocks(k, std::vector<double>(zb, 0.0));
    std::vector<std::vector<double>> pairs(k > 1 ? k - 1 : 0, std::vector<double>(zb * zb, 0.0));
    for (std::size_t flat = 0; flat < res.pmf.size(); ++flat) {
        const double p = res.pmf[flat];
        if (p == 0.0) continue;
        std::vector<std::size_t> zi(k);
        std::size_t rem = flat;
        for (std::size_t i = k; i-- > 0;) {
            zi[i] = rem % zb;
            rem /= zb;
        }
        for (std::size_t i = 0; i < k; ++i) blocks[i][zi[i]] += p;
        for (std::size_t i = 1; i < k; ++i) pairs[i - 1][zi[i - 1] * zb + zi[i]] += p;
    }
    for (std::size_t i = 0; i < k; ++i) res.block_tv.push_back(variational_distance(blocks[i], qz_block));
    for (std::size_t i = 1; i < k; ++i) res.inter_block_tv.push_back(detail::dependence_tv(pairs[i - 1], zb, zb));
    return res;
}

// ---------------------------------------------------------------------------
// Independent oracle: polar exact laws + exact hash pushforward + channel.

struct ComposedResult {
    double joint_tv = 0.0;
    std::vector<double> pmf;
};

namespace detail {

/// Z-block law for independent per-stream sequence laws (each over 2^N).
inline std::vector<double> push_streams(const encoder::MacCode& code, const std::vector<std::vector<double>>& laws) {
    const std::size_t n_len = code.length();
    const std::size_t nz = code.channel.output_size();
    const std::size_t ns = laws.size();
    std::vector<double> out(ipow(nz, n_len), 0.0);
    const std::size_t seqs = std::size_t{1} << n_len;
    const std::size_t combos = ipow(seqs, ns);
    std::vector<std::size_t> xs(code.channel.num_inputs());
    for (std::size_t c = 0; c < combos; ++c) {
        double p = 1.0;
        std::vector<std::uint64_t> seq(ns);
        std::size_t rem = c;
        for (std::size_t s = ns; s-- > 0;) {
            seq[s] = rem % seqs;
            rem /= seqs;
            p *= laws[s][seq[s]];
        }
        if (p == 0.0) continue;
        // Output law is a product over positions; expand it directly.
        std::vector<double> zl{p};
        for (std::size_t i = 0; i < n_len; ++i) {
            for (std::size_t l = 0; l < xs.size(); ++l) {
                std::uint64_t x = 0;
                for (auto s : code.layout.users[l]) x |= (seq[s] >> (n_len - 1 - i)) & 1u;
                xs[l] = x;
            }
            const auto& row = code.channel.rows()[code.channel.tuple_index(xs)];
            std::vector<double> nx;
            nx.reserve(zl.size() * nz);
            for (double a : zl)
                for (double q : row) nx.push_back(a * q);
            zl = std::move(nx);
        }
        for (std::size_t z = 0; z < out.size(); ++z) out[z] += zl[z];
    }
    return out;
}

inline std::vector<double> polar_law(const encoder::MacCode& code, std::size_t s, const Bits& recycled) {
    const auto& c = code.streams[s].code;
    Bits fixed(recycled.begin(), recycled.begin() + static_cast<std::ptrdiff_t>(std::min(recycled.size(), c.seed_len)));
    return polar::output_dist_exact(c, fixed).pmf();
}

}  // namespace detail

inline ComposedResult tv_composed(const encoder::MacCode& code) {
    const std::size_t k = code.blocks();
    if (k > 2) throw std::invalid_argument("composed oracle covers k <= 2");
    const std::size_t n_len = code.length();
    const std::size_t ns = code.streams.size();
    const std::size_t nz = code.channel.output_size();
    const std::size_t zb = detail::ipow(nz, n_len);

    std::vector<std::vector<double>> laws1(ns);
    for (std::size_t s = 0; s < ns; ++s) laws1[s] = polar::output_dist_exact(code.streams[s].code).pmf();

    ComposedResult out;
    if (k == 1) {
        out.pmf = detail::push_streams(code, laws1);
    } else {
        // Joint over (seq_0, ..., seq_{S-1}, Z_1).
        const std::size_t seqs = std::size_t{1} << n_len;
        std::vector<std::size_t> shape(ns, seqs);
        shape.push_back(zb);
        const std::size_t combos = detail::ipow(seqs, ns);
        if (combos * zb > hashing::kExactStateBudget) throw BudgetExceeded("composed oracle exceeds hash budget");
        std::vector<double> joint(combos * zb, 0.0);
        for (std::size_t c = 0; c < combos; ++c) {
            std::vector<std::vector<double>> point(ns, std::vector<double>(seqs, 0.0));
            double p = 1.0;
            std::size_t rem = c;
            for (std::size_t s = ns; s-- > 0;) {
                const std::size_t v = rem % seqs;
                rem /= seqs;
                p *= laws1[s][v];
                point[s][v] = 1.0;
            }
            if (p == 0.0) continue;
            const auto zl = detail::push_streams(code, point);
            for (std::size_t z = 0; z < zb; ++z) joint[c * zb + z] = p * zl[z];
        }
        std::vector<hashing::ToeplitzHash> hashes;
        for (const auto& sc : code.streams) hashes.push_back(sc.hash);
        const JointDist hashed = hashing::hashed_joint_dist_exact(hashes, JointDist(shape, std::move(joint), true));

        out.pmf.assign(zb * zb, 0.0);
        const std::size_t heads = hashed.size() / zb;
        std::vector<std::size_t> rsize(ns);
        for (std::size_t s = 0; s < ns; ++s) rsize[s] = std::size_t{1} << code.streams[s].hash.out_len();
        std::map<std::pair<std::size_t, std::uint64_t>, std::vector<double>> cache;
        for (std::size_t h = 0; h < heads; ++h) {
            double mass = 0.0;
            for (std::size_t z = 0; z < zb; ++z) mass += hashed.pmf()[h * zb + z];
            if (mass == 0.0) continue;
            std::vector<std::vector<double>> laws2(ns);
            std::size_t rem = h;
            for (std::size_t s = ns; s-- > 0;) {
                const std::uint64_t e = rem % rsize[s];
                rem /= rsize[s];
                auto key = std::make_pair(s, e);
                auto it = cache.find(key);
                if (it == cache.end())
                    it = cache.emplace(key, detail::polar_law(code, s, detail::bits_of(e, code.streams[s].hash.out_len()))).first;
                laws2[s] = it->second;
            }
            const auto z2 = detail::push_streams(code, laws2);
            for (std::size_t z1 = 0; z1 < zb; ++z1) {
                const double p1 = hashed.pmf()[h * zb + z1];
                if (p1 == 0.0) continue;
                for (std::size_t z = 0; z < zb; ++z) out.pmf[z1 * zb + z] += p1 * z2[z];
            }
        }
    }
    const auto qfull = iid_power(target_output_dist(code.channel, code.inputs), n_len * k);
    out.joint_tv = variational_distance(out.pmf, qfull);
    return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation

struct Estimate {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double null_mean = 0.0;  // same statistic under the null (bias of the plug-in)
    double null_q99 = 0.0;
    std::size_t samples = 0;
};

struct McOptions {
    std::size_t trials = 1000;
    std::size_t window = 2;           // symbols per window for the output-law statistic
    std::size_t indep_window = 2;     // symbols per window for the dependence statistics
    std::size_t recycled_bits = 4;    // leading recycled bits used in the dependence check
    std::size_t bootstrap = 1000;     // resamples
    std::size_t bootstrap_units = 200;  // trials are pooled into at most this many i.i.d. batches
    std::size_t null_reps = 200;
    std::size_t workers = 1;
};

/// Per-trial channel outputs and leading recycled bits.
struct TrialSamples {
    std::size_t trials = 0;
    std::size_t k = 1;
    std::size_t n_len = 1;
    std::size_t nz = 1;
    std::size_t rec_bits = 0;          // recycled bits kept per block (0: none)
    std::vector<std::uint8_t> z;       // trials x k x N
    std::vector<std::uint8_t> rec;     // trials x k, leading recycled bits of block i packed (block 0 unused)
    std::vector<double> qz;

    [[nodiscard]] std::uint8_t zat(std::size_t t, std::size_t i, std::size_t pos) const { return z[(t * k + i) * n_len + pos]; }
};

inline TrialSamples collect_samples(const encoder::MacCode& code, std::size_t trials, const Rng& rng, std::size_t workers = 1,
                                    std::size_t rec_bits = 4) {
    if (trials == 0) throw std::invalid_argument("at least one trial is required");
    if (code.channel.output_size() > 255) throw std::invalid_argument("output alphabet too large for sample storage");
    TrialSamples ts;
    ts.trials = trials;
    ts.k = code.blocks();
    ts.n_len = code.length();
    ts.nz = code.channel.output_size();
    std::size_t total_r = 0;
    for (const auto& s : code.plan.streams) total_r += s.hash_len;
    ts.rec_bits = std::min({rec_bits, total_r, std::size_t{8}});
    ts.qz = target_output_dist(code.channel, code.inputs).pmf();
    ts.z.assign(trials * ts.k * ts.n_len, 0);
    ts.rec.assign(trials * ts.k, 0);
    parallel_for(trials, workers, [&](std::size_t t) {
        const encoder::Transcript tr = encoder::simulate_trial(code, rng.split(t));
        for (std::size_t i = 0; i < ts.k; ++i) {
            const auto& b = tr.blocks[i];
            std::copy(b.z.begin(), b.z.end(), ts.z.begin() + static_cast<std::ptrdiff_t>((t * ts.k + i) * ts.n_len));
            std::uint8_t code_bits = 0;
            std::size_t got = 0;
            for (const auto& sb : b.streams)
                for (auto bit : sb.recycled)
                    if (got < ts.rec_bits) {
                        code_bits = static_cast<std::uint8_t>((code_bits << 1) | bit);
                        ++got;
                    }
            ts.rec[t * ts.k + i] = i == 0 ? 0 : code_bits;
        }
    });
    return ts;
}

/// Channel driven by genuinely i.i.d. inputs q_{X_l}: the null instance.
inline TrialSamples collect_iid_samples(const MacChannel& ch, const std::vector<Dist>& inputs, std::size_t n_len,
                                        std::size_t k, std::size_t trials, const Rng& rng, std::size_t workers = 1) {
    if (trials == 0) throw std::invalid_argument("at least one trial is required");
    TrialSamples ts;
    ts.trials = trials;
    ts.k = k;
    ts.n_len = n_len;
    ts.nz = ch.output_size();
    ts.qz = target_output_dist(ch, inputs).pmf();
    ts.z.assign(trials * k * n_len, 0);
    ts.rec.assign(trials * k, 0);
    parallel_for(trials, workers, [&](std::size_t t) {
        Rng r = rng.split(t);
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<Bits> cw(inputs.size(), Bits(n_len));
            for (std::size_t l = 0; l < inputs.size(); ++l)
                for (auto& b : cw[l]) b = r.bernoulli(inputs[l][1]);
            const Symbols z = transmit(ch, cw, r);
            std::copy(z.begin(), z.end(), ts.z.begin() + static_cast<std::ptrdiff_t>((t * k + i) * n_len));
        }
    });
    return ts;
}

namespace detail {

/// 95% interval from the bootstrap spread, re-centred on the estimate.
/// Resampling adds the plug-in bias a second time, so raw percentiles sit
/// above the estimate; shifting by (bootstrap mean - estimate) removes that.
inline std::pair<double, double> centred_ci(double theta, std::vector<double> v) {
    if (v.empty()) return {theta, theta};
    std::sort(v.begin(), v.end());
    const double n1 = static_cast<double>(v.size() - 1);
    const double shift = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()) - theta;
    const double lo = v[static_cast<std::size_t>(std::floor(0.025 * n1))] - shift;
    const double hi = v[static_cast<std::size_t>(std::ceil(0.975 * n1))] - shift;
    return {std::max(0.0, lo), hi};
}

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size() - 1)))];
}

/// Multinomial(n, p) via sequential binomials.
inline std::vector<std::uint64_t> multinomial(std::uint64_t n, std::span<const double> p, Rng& rng) {
    std::vector<std::uint64_t> out(p.size(), 0);
    double rest = 1.0;
    for (std::size_t c = 0; c + 1 < p.size() && n > 0; ++c) {
        const double pc = rest > 0.0 ? std::clamp(p[c] / rest, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> bin(n, pc);
        out[c] = bin(rng);
        n -= out[c];
        rest -= p[c];
    }
    if (!p.empty()) out.back() += n;
    return out;
}

/// Cell counts per (unit, slot, cell). A "slot" is one window position or
/// one pair of windows; units are i.i.d. batches of trials.
struct Histograms {
    std::size_t units = 0;
    std::size_t slots = 0;
    std::size_t cells = 0;
    std::vector<std::uint32_t> unit_trials;
    std::vector<std::uint32_t> counts;  // units x slots x cells

    Histograms(std::size_t u, std::size_t s, std::size_t c) : units(u), slots(s), cells(c), unit_trials(u, 0), counts(u * s * c, 0) {}

    void pool(std::span<const std::size_t> pick, std::vector<double>& out, double& total) const {
        out.assign(slots * cells, 0.0);
        total = 0.0;
        for (auto u : pick) {
            total += unit_trials[u];
            const std::uint32_t* src = &counts[u * slots * cells];
            for (std::size_t x = 0; x < slots * cells; ++x) out[x] += src[x];
        }
    }
};

inline std::size_t unit_of(std::size_t t, std::size_t trials, std::size_t units) { return t * units / trials; }

template <class Stat>
Estimate bootstrap_estimate(const Histograms& h, std::size_t trials, const McOptions& opt, const Rng& boot, Stat&& stat,
                            std::vector<std::vector<double>>* replicates = nullptr) {
    std::vector<std::size_t> all(h.units);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> pooled;
    double total = 0.0;
    h.pool(all, pooled, total);
    Estimate est;
    est.samples = trials;
    est.value = stat(pooled, total);
    std::vector<double> reps(opt.bootstrap, 0.0);
    if (replicates) replicates->assign(opt.bootstrap, {});
    parallel_for(opt.bootstrap, opt.workers, [&](std::size_t b) {
        Rng r = boot.split(b);
        std::vector<std::size_t> pick(h.units);
        for (auto& p : pick) p = r.below(h.units);
        std::vector<double> pl;
        double tot = 0.0;
        h.pool(pick, pl, tot);
        reps[b] = stat(pl, tot);
        if (replicates) {
            pl.push_back(tot);  // total rides along at the end
            (*replicates)[b] = std::move(pl);
        }
    });
    std::tie(est.ci_lo, est.ci_hi) = centred_ci(est.value, reps);
    return est;
}

}  // namespace detail

struct WindowedResult {
    Estimate overall;                // mean over (block, window) of V(empirical window law, q_Z^w)
    std::vector<Estimate> per_block;
    std::size_t window = 0;
    std::size_t windows_per_block = 0;
};

/// Plug-in windowed distance with bootstrap CI and a parametric null
/// calibrated from q_Z^w. A lower-bound proxy for the full-block distance.
inline WindowedResult windowed_tv(const TrialSamples& ts, const McOptions& opt, const Rng& rng) {
    if (ts.trials == 0) throw std::invalid_argument("windowed estimate needs trials");
    if (opt.window == 0 || opt.window > 3) throw std::invalid_argument("window must be 1..3 symbols");
    if (opt.window > ts.n_len) throw std::invalid_argument("window longer than the block");
    const std::size_t w = opt.window;
    const std::size_t wpb = ts.n_len / w;
    const std::size_t slots = ts.k * wpb;
    const std::size_t cells = detail::ipow(ts.nz, w);
    const std::vector<double> qw = iid_power(Dist(ts.qz, true), w);
    const std::size_t units = std::min(ts.trials, std::max<std::size_t>(1, opt.bootstrap_units));

    detail::Histograms h(units, slots, cells);
    for (std::size_t t = 0; t < ts.trials; ++t) {
        const std::size_t u = detail::unit_of(t, ts.trials, units);
        ++h.unit_trials[u];
        std::uint32_t* dst = &h.counts[u * slots * cells];
        for (std::size_t i = 0; i < ts.k; ++i)
            for (std::size_t j = 0; j < wpb; ++j) {
                std::size_t c = 0;
                for (std::size_t p = 0; p < w; ++p) c = c * ts.nz + ts.zat(t, i, j * w + p);
                ++dst[(i * wpb + j) * cells + c];
            }
    }
    auto slot_tv = [&](const std::vector<double>& pooled, double total, std::size_t slot) {
        double tv = 0.0;
        for (std::size_t c = 0; c < cells; ++c) tv += std::abs(pooled[slot * cells + c] / total - qw[c]);
        return tv;
    };
    auto overall = [&](const std::vector<double>& pooled, double total) {
        double s = 0.0;
        for (std::size_t x = 0; x < slots; ++x) s += slot_tv(pooled, total, x);
        return s / static_cast<double>(slots);
    };

    WindowedResult res;
    res.window = w;
    res.windows_per_block = wpb;
    std::vector<std::vector<double>> reps;
    res.overall = detail::bootstrap_estimate(h, ts.trials, opt, rng.split(1), overall, &reps);

    // Null: every slot multinomial(T, q^w).
    std::vector<double> null_overall(opt.null_reps, 0.0);
    std::vector<std::vector<double>> null_block(ts.k, std::vector<double>(opt.null_reps, 0.0));
    const Rng null_rng = rng.split(2);
    parallel_for(opt.null_reps, opt.workers, [&](std::size_t r) {
        Rng nr = null_rng.split(r);
        double sum = 0.0;
        for (std::size_t i = 0; i < ts.k; ++i) {
            double bsum = 0.0;
            for (std::size_t j = 0; j < wpb; ++j) {
                const auto cnt = detail::multinomial(ts.trials, qw, nr);
                double tv = 0.0;
                for (std::size_t c = 0; c < cells; ++c) tv += std::abs(static_cast<double>(cnt[c]) / static_cast<double>(ts.trials) - qw[c]);
                bsum += tv;
            }
            null_block[i][r] = bsum / static_cast<double>(wpb);
            sum += bsum;
        }
        null_overall[r] = sum / static_cast<double>(slots);
    });
    auto mean = [](const std::vector<double>& v) { return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    res.overall.null_mean = mean(null_overall);
    res.overall.null_q99 = detail::quantile(null_overall, 0.99);

    std::vector<std::size_t> all(units);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> pooled;
    double total = 0.0;
    h.pool(all, pooled, total);
    for (std::size_t i = 0; i < ts.k; ++i) {
        auto block_stat = [&](const std::vector<double>& pl, double tot) {
            double s = 0.0;
            for (std::size_t j = 0; j < wpb; ++j) s += slot_tv(pl, tot, i * wpb + j);
            return s / static_cast<double>(wpb);
        };
        Estimate e;
        e.samples = ts.trials;
        e.value = block_stat(pooled, total);
        std::vector<double> br;
        br.reserve(reps.size());
        for (const auto& rp : reps) br.push_back(block_stat(rp, rp.back()));
        std::tie(e.ci_lo, e.ci_hi) = detail::centred_ci(e.value, br);
        e.null_mean = mean(null_block[i]);
        e.null_q99 = detail::quantile(null_block[i], 0.99);
        res.per_block.push_back(e);
    }
    return res;
}

struct IndependenceResult {
    Estimate recycled_vs_previous;  // leading recycled bits of block i vs Z windows of block i-1
    Estimate inter_block;           // Z window j of block i-1 vs the same window of block i
    bool vacuous = false;           // k = 1
};

namespace detail {

/// Mean over slots of V(joint, product of its marginals); cells = ra x cb.
inline double mean_dependence(const std::vector<double>& pooled, double total, std::size_t slots, std::size_t ra, std::size_t cb) {
    double s = 0.0;
    std::vector<double> p(ra * cb);
    for (std::size_t x = 0; x < slots; ++x) {
        for (std::size_t c = 0; c < ra * cb; ++c) p[c] = pooled[x * ra * cb + c] / total;
        s += dependence_tv(p, ra, cb);
    }
    return slots == 0 ? 0.0 : s / static_cast<double>(slots);
}

inline Estimate dependence_estimate(const Histograms& h, std::size_t trials, std::size_t ra, std::size_t cb,
                                    const McOptions& opt, const Rng& rng) {
    auto stat = [&](const std::vector<double>& pl, double tot) { return mean_dependence(pl, tot, h.slots, ra, cb); };
    Estimate e = bootstrap_estimate(h, trials, opt, rng.split(1), stat);
    // Null: per slot, counts ~ multinomial(T, empirical row marginal x column marginal).
    std::vector<std::size_t> all(h.units);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> pooled;
    double total = 0.0;
    h.pool(all, pooled, total);
    std::vector<std::vector<double>> prod(h.slots, std::vector<double>(ra * cb, 0.0));
    for (std::size_t x = 0; x < h.slots; ++x) {
        std::vector<double> pa(ra, 0.0), pb(cb, 0.0);
        for (std::size_t a = 0; a < ra; ++a)
            for (std::size_t b = 0; b < cb; ++b) {
                pa[a] += pooled[x * ra * cb + a * cb + b] / total;
                pb[b] += pooled[x * ra * cb + a * cb + b] / total;
            }
        for (std::size_t a = 0; a < ra; ++a)
            for (std::size_t b = 0; b < cb; ++b) prod[x][a * cb + b] = pa[a] * pb[b];
    }
    std::vector<double> nulls(opt.null_reps, 0.0);
    const Rng nrng = rng.split(2);
    parallel_for(opt.null_reps, opt.workers, [&](std::size_t r) {
        Rng nr = nrng.split(r);
        double s = 0.0;
        std::vector<double> p(ra * cb);
        for (std::size_t x = 0; x < h.slots; ++x) {
            const auto cnt = multinomial(trials, prod[x], nr);
            for (std::size_t c = 0; c < ra * cb; ++c) p[c] = static_cast<double>(cnt[c]) / static_cast<double>(trials);
            s += dependence_tv(p, ra, cb);
        }
        nulls[r] = h.slots == 0 ? 0.0 : s / static_cast<double>(h.slots);
    });
    e.null_mean = nulls.empty() ? 0.0 : std::accumulate(nulls.begin(), nulls.end(), 0.0) / static_cast<double>(nulls.size());
    e.null_q99 = quantile(nulls, 0.99);
    return e;
}

}  // namespace detail

inline IndependenceResult independence_diagnostics(const TrialSamples& ts, const McOptions& opt, const Rng& rng) {
    IndependenceResult res;
    if (ts.k == 1) {
        res.vacuous = true;
        res.recycled_vs_previous.samples = res.inter_block.samples = ts.trials;
        return res;
    }
    if (ts.trials < kMinDiagnosticTrials)
        throw std::invalid_argument("independence diagnostics need at least " + std::to_string(kMinDiagnosticTrials) +
                                    " transcripts, got " + std::to_string(ts.trials) + "; raise --trials");
    const std::size_t w = opt.indep_window;
    if (w == 0 || w > 3 || w > ts.n_len) throw std::invalid_argument("dependence window must be 1..3 symbols within the block");
    const std::size_t wpb = ts.n_len / w;
    const std::size_t zc = detail::ipow(ts.nz, w);
    const std::size_t units = std::min(ts.trials, std::max<std::size_t>(1, opt.bootstrap_units));
    auto win = [&](std::size_t t, std::size_t i, std::size_t j) {
        std::size_t c = 0;
        for (std::size_t p = 0; p < w; ++p) c = c * ts.nz + ts.zat(t, i, j * w + p);
        return c;
    };

    {
        const std::size_t slots = (ts.k - 1) * wpb;
        detail::Histograms h(units, slots, zc * zc);
        for (std::size_t t = 0; t < ts.trials; ++t) {
            const std::size_t u = detail::unit_of(t, ts.trials, units);
            ++h.unit_trials[u];
            for (std::size_t i = 1; i < ts.k; ++i)
                for (std::size_t j = 0; j < wpb; ++j)
                    ++h.counts[(u * slots + (i - 1) * wpb + j) * zc * zc + win(t, i - 1, j) * zc + win(t, i, j)];
        }
        res.inter_block = detail::dependence_estimate(h, ts.trials, zc, zc, opt, rng.split(10));
    }
    if (ts.rec_bits == 0) {
        res.recycled_vs_previous.samples = ts.trials;  // nothing recycled: trivially independent
    } else {
        const std::size_t rc = std::size_t{1} << ts.rec_bits;
        const std::size_t slots = (ts.k - 1) * wpb;
        detail::Histograms h(units, slots, rc * zc);
        for (std::size_t t = 0; t < ts.trials; ++t) {
            const std::size_t u = detail::unit_of(t, ts.trials, units);
            ++h.unit_trials[u];
            for (std::size_t i = 1; i < ts.k; ++i)
                for (std::size_t j = 0; j < wpb; ++j)
                    ++h.counts[(u * slots + (i - 1) * wpb + j) * rc * zc + ts.rec[t * ts.k + i] * zc + win(t, i - 1, j)];
        }
        res.recycled_vs_previous = detail::dependence_estimate(h, ts.trials, rc, zc, opt, rng.split(20));
    }
    return res;
}

/// Exact windowed statistic from an exact law of Z^{kN} (for checking the estimator).
inline double windowed_tv_exact(std::span<const double> pmf, std::size_t k, std::size_t n_len, std::size_t nz,
                                std::span<const double> qz, std::size_t w) {
    const std::size_t wpb = n_len / w;
    const std::size_t cells = detail::ipow(nz, w);
    const std::vector<double> qw = iid_power(Dist(std::vector<double>(qz.begin(), qz.end()), true), w);
    std::vector<double> marg(k * wpb * cells, 0.0);
    const std::size_t len = k * n_len;
    std::vector<std::size_t> sym(len);
    for (std::size_t flat = 0; flat < pmf.size(); ++flat) {
        if (pmf[flat] == 0.0) continue;
        std::size_t rem = flat;
        for (std::size_t p = len; p-- > 0;) {
            sym[p] = rem % nz;
            rem /= nz;
        }
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < wpb; ++j) {
                std::size_t c = 0;
                for (std::size_t p = 0; p < w; ++p) c = c * nz + sym[i * n_len + j * w + p];
                marg[(i * wpb + j) * cells + c] += pmf[flat];
            }
    }
    double s = 0.0;
    for (std::size_t x = 0; x < k * wpb; ++x)
        for (std::size_t c = 0; c < cells; ++c) s += std::abs(marg[x * cells + c] - qw[c]);
    return s / static_cast<double>(k * wpb);
}

// ---------------------------------------------------------------------------
// Distributed leftover-hash check

struct LhlResult {
    double mean_tv = 0.0;  // averaged over sampled hash tuples
    double max_tv = 0.0;
    double bound = 0.0;    // sqrt(sum_S 2^{r_S - H_inf(p_{X_S Z} | q_Z)})
    std::size_t hashes = 0;
    std::size_t per_hash_exceed = 0;  // hash tuples whose own distance exceeds the bound
    bool pass = false;                // mean_tv <= bound
};

/// Bound for a joint over (X_1, ..., X_L, Z...), with q_Z the joint's Z marginal.
inline double lhl_bound(const JointDist& joint, std::span<const std::size_t> hash_lens) {
    const std::size_t users = hash_lens.size();
    if (users == 0 || users >= 31 || joint.rank() <= users) throw std::invalid_argument("need 1..30 hashed axes plus side information");
    Axes zax;
    for (std::size_t a = users; a < joint.rank(); ++a) zax.push_back(a);
    const JointDist qz = joint.marginal(zax);
    double sum = 0.0;
    for (std::uint32_t m = 1; m < (1u << users); ++m) {
        Axes keep;
        double r = 0.0;
        for (std::size_t l = 0; l < users; ++l)
            if (m & (1u << l)) {
                keep.push_back(l);
                r += static_cast<double>(hash_lens[l]);
            }
        Axes given;
        for (std::size_t a = 0; a < zax.size(); ++a) given.push_back(keep.size() + a);
        keep.insert(keep.end(), zax.begin(), zax.end());
        const double hmin = min_entropy_conditional(joint.marginal(keep), given, qz);
        sum += std::exp2(r - hmin);
    }
    return std::sqrt(sum);
}

inline LhlResult lhl_bound_check(const JointDist& joint, std::span<const std::size_t> hash_lens, std::size_t num_hashes, Rng& rng) {
    const std::size_t users = hash_lens.size();
    LhlResult res;
    res.bound = lhl_bound(joint, hash_lens);
    std::vector<std::size_t> in_lens(users);
    std::size_t r_total = 0;
    for (std::size_t l = 0; l < users; ++l) {
        in_lens[l] = polar::log2_exact(joint.shape()[l]);
        r_total += hash_lens[l];
    }
    Axes zax;
    for (std::size_t a = users; a < joint.rank(); ++a) zax.push_back(a);
    const JointDist qz = joint.marginal(zax);
    std::vector<std::size_t> ideal_shape;
    for (std::size_t l = 0; l < users; ++l) ideal_shape.push_back(std::size_t{1} << hash_lens[l]);
    ideal_shape.insert(ideal_shape.end(), qz.shape().begin(), qz.shape().end());
    std::vector<double> ideal;
    ideal.reserve(qz.size() << r_total);
    const double pu = std::exp2(-static_cast<double>(r_total));
    for (std::size_t e = 0; e < (std::size_t{1} << r_total); ++e)
        for (double q : qz.pmf()) ideal.push_back(pu * q);
    const JointDist ideal_j(ideal_shape, std::move(ideal), true);

    double sum = 0.0;
    for (std::size_t hsample = 0; hsample < num_hashes; ++hsample) {
        std::vector<hashing::ToeplitzHash> hs;
        for (std::size_t l = 0; l < users; ++l) hs.push_back(hashing::sample_hash(rng, in_lens[l], hash_lens[l]));
        const double tv = variational_distance(hashing::hashed_joint_dist_exact(hs, joint), ideal_j);
        sum += tv;
        res.max_tv = std::max(res.max_tv, tv);
        if (tv > res.bound) ++res.per_hash_exceed;
    }
    res.hashes = num_hashes;
    res.mean_tv = num_hashes == 0 ? 0.0 : sum / static_cast<double>(num_hashes);
    res.pass = res.mean_tv <= res.bound;
    return res;
}

}  // namespace macres::evaluator
