#pragma once

// Exact finite-alphabet probability kernel: pmfs over (product) alphabets,
// entropies in bits, mutual information, the unnormalized variational
// distance sum |p - q|, conditional min-entropy, and the discrete memoryless
// multiple-access channel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "macres/rng.hpp"

namespace macres {

inline constexpr double kNormTol = 1e-12;

/// Enumeration or exhaustive computation would exceed its configured budget.
class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Bits = std::vector<std::uint8_t>;
using Symbols = std::vector<std::uint32_t>;
using Axes = std::vector<std::size_t>;

struct Alphabet {
    std::size_t size = 1;
    std::vector<std::string> labels;

    static Alphabet of(std::size_t size, std::vector<std::string> labels = {}) {
        if (size < 1) throw std::invalid_argument("alphabet size must be >= 1");
        if (!labels.empty()) {
            if (labels.size() != size) throw std::invalid_argument("alphabet label count must equal size");
            std::set<std::string> uniq(labels.begin(), labels.end());
            if (uniq.size() != labels.size()) throw std::invalid_argument("alphabet labels must be distinct");
        }
        return Alphabet{size, std::move(labels)};
    }

    friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.size == b.size; }
};

namespace detail {

inline void check_pmf(std::span<const double> pmf) {
    double total = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("probabilities must be finite and >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > kNormTol) {
        throw std::invalid_argument("probabilities sum to " + std::to_string(total) + ", expected 1");
    }
}

inline void renormalize_in_place(std::vector<double>& pmf) {
    double total = 0.0;
    for (double& p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("probabilities must be finite and >= 0");
        total += p;
    }
    if (total <= 0.0) throw std::invalid_argument("cannot renormalize a zero measure");
    for (double& p : pmf) p /= total;
}

inline double plogp_sum(std::span<const double> pmf) {
    double h = 0.0;
    for (double p : pmf)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

}  // namespace detail

/// Binary entropy function in bits.
inline double h2(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

class Dist {
public:
    Dist() : alphabet_(Alphabet::of(1)), pmf_{1.0} {}

    explicit Dist(std::vector<double> pmf, bool renormalize = false) : alphabet_(Alphabet::of(pmf.size())), pmf_(std::move(pmf)) {
        if (renormalize)
            detail::renormalize_in_place(pmf_);
        else
            detail::check_pmf(pmf_);
    }

    Dist(Alphabet alphabet, std::vector<double> pmf, bool renormalize = false)
        : alphabet_(std::move(alphabet)), pmf_(std::move(pmf)) {
        if (pmf_.size() != alphabet_.size) throw std::invalid_argument("pmf length must equal alphabet size");
        if (renormalize)
            detail::renormalize_in_place(pmf_);
        else
            detail::check_pmf(pmf_);
    }

    static Dist bernoulli(double p1) {
        if (!(p1 >= 0.0 && p1 <= 1.0)) throw std::invalid_argument("Bernoulli parameter outside [0,1]");
        return Dist({1.0 - p1, p1});
    }
    static Dist uniform(std::size_t n) { return Dist(std::vector<double>(n, 1.0 / static_cast<double>(n))); }
    static Dist point(std::size_t n, std::size_t at) {
        if (at >= n) throw std::out_of_range("point mass outside alphabet");
        std::vector<double> v(n, 0.0);
        v[at] = 1.0;
        return Dist(std::move(v));
    }

    [[nodiscard]] const Alphabet& alphabet() const noexcept { return alphabet_; }
    [[nodiscard]] std::size_t size() const noexcept { return pmf_.size(); }
    [[nodiscard]] const std::vector<double>& pmf() const noexcept { return pmf_; }
    double operator[](std::size_t i) const { return pmf_.at(i); }

private:
    Alphabet alphabet_;
    std::vector<double> pmf_;
};

/// Dense pmf over a product of finite alphabets. Row-major: axis 0 is the
/// most significant coordinate of the flat index.
class JointDist {
public:
    JointDist() : shape_{1}, pmf_{1.0} {}

    JointDist(std::vector<std::size_t> shape, std::vector<double> pmf, bool renormalize = false)
        : shape_(std::move(shape)), pmf_(std::move(pmf)) {
        if (shape_.empty()) throw std::invalid_argument("joint distribution needs at least one axis");
        std::size_t total = 1;
        for (auto s : shape_) {
            if (s < 1) throw std::invalid_argument("axis size must be >= 1");
            total *= s;
        }
        if (pmf_.size() != total) throw std::invalid_argument("pmf tensor size does not match axes");
        if (renormalize)
            detail::renormalize_in_place(pmf_);
        else
            detail::check_pmf(pmf_);
    }

    JointDist(const Dist& d) : shape_{d.size()}, pmf_(d.pmf()) {}  // NOLINT(google-explicit-constructor)

    /// Product p_0 x p_1 x ... of independent marginals.
    static JointDist product(std::span<const JointDist> parts) {
        std::vector<std::size_t> shape;
        std::vector<double> pmf{1.0};
        for (const auto& part : parts) {
            shape.insert(shape.end(), part.shape_.begin(), part.shape_.end());
            std::vector<double> next;
            next.reserve(pmf.size() * part.pmf_.size());
            for (double a : pmf)
                for (double b : part.pmf_) next.push_back(a * b);
            pmf = std::move(next);
        }
        if (shape.empty()) shape.push_back(1);
        return JointDist(std::move(shape), std::move(pmf), true);
    }
    static JointDist product(const JointDist& a, const JointDist& b) {
        std::vector<JointDist> parts{a, b};
        return product(parts);
    }

    [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] const std::vector<double>& pmf() const noexcept { return pmf_; }
    [[nodiscard]] std::size_t size() const noexcept { return pmf_.size(); }

    [[nodiscard]] std::vector<std::size_t> strides() const {
        std::vector<std::size_t> st(shape_.size(), 1);
        for (std::size_t a = shape_.size(); a-- > 1;) st[a - 1] = st[a] * shape_[a];
        return st;
    }

    /// Marginal on `axes`, in the given order.
    [[nodiscard]] JointDist marginal(std::span<const std::size_t> axes) const {
        check_axes(axes);
        if (axes.empty()) return JointDist();
        std::vector<std::size_t> out_shape;
        for (auto a : axes) out_shape.push_back(shape_[a]);
        std::vector<std::size_t> out_strides(axes.size(), 1);
        for (std::size_t i = axes.size(); i-- > 1;) out_strides[i - 1] = out_strides[i] * out_shape[i];
        std::size_t out_total = 1;
        for (auto s : out_shape) out_total *= s;
        std::vector<double> out(out_total, 0.0);

        std::vector<std::size_t> coord(shape_.size(), 0);
        for (std::size_t flat = 0; flat < pmf_.size(); ++flat) {
            std::size_t o = 0;
            for (std::size_t i = 0; i < axes.size(); ++i) o += coord[axes[i]] * out_strides[i];
            out[o] += pmf_[flat];
            for (std::size_t a = shape_.size(); a-- > 0;) {
                if (++coord[a] < shape_[a]) break;
                coord[a] = 0;
            }
        }
        return JointDist(std::move(out_shape), std::move(out), true);
    }
    [[nodiscard]] JointDist marginal(std::initializer_list<std::size_t> axes) const {
        std::vector<std::size_t> v(axes);
        return marginal(std::span<const std::size_t>(v));
    }

    /// Same flat pmf viewed with a different axis decomposition.
    [[nodiscard]] JointDist reshaped(std::vector<std::size_t> shape) const { return JointDist(std::move(shape), pmf_, true); }

    /// Collapse to a single-axis Dist over the flattened product alphabet.
    [[nodiscard]] Dist flatten() const { return Dist(pmf_, true); }

    void check_axes(std::span<const std::size_t> axes) const {
        std::set<std::size_t> seen;
        for (auto a : axes) {
            if (a >= shape_.size()) throw std::out_of_range("axis index out of range");
            if (!seen.insert(a).second) throw std::invalid_argument("repeated axis");
        }
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> pmf_;
};

// ---------------------------------------------------------------------------
// Information measures (bits)

inline double entropy(const Dist& d) { return std::max(0.0, detail::plogp_sum(d.pmf())); }
inline double entropy(const JointDist& j) { return std::max(0.0, detail::plogp_sum(j.pmf())); }

/// Joint entropy of the axes subset.
inline double entropy(const JointDist& j, std::span<const std::size_t> axes) {
    if (axes.empty()) return 0.0;
    return entropy(j.marginal(axes));
}

namespace detail {

inline void require_disjoint(std::initializer_list<std::span<const std::size_t>> sets) {
    std::set<std::size_t> seen;
    for (auto s : sets)
        for (auto a : s)
            if (!seen.insert(a).second) throw std::invalid_argument("axis sets overlap");
}

inline Axes concat(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    Axes out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace detail

/// H(T | G) = H(T, G) - H(G), floored at zero.
inline double conditional_entropy(const JointDist& j, std::span<const std::size_t> target, std::span<const std::size_t> given) {
    detail::require_disjoint({target, given});
    j.check_axes(target);
    j.check_axes(given);
    const Axes tg = detail::concat(target, given);
    return std::max(0.0, entropy(j, tg) - entropy(j, given));
}
inline double conditional_entropy(const JointDist& j, const Axes& target, const Axes& given) {
    return conditional_entropy(j, std::span<const std::size_t>(target), std::span<const std::size_t>(given));
}

/// I(A; B | G) = H(A|G) - H(A|B,G), clipped at zero.
inline double mutual_information(const JointDist& j, std::span<const std::size_t> a, std::span<const std::size_t> b,
                                 std::span<const std::size_t> given = {}) {
    detail::require_disjoint({a, b, given});
    j.check_axes(a);
    j.check_axes(b);
    j.check_axes(given);
    const Axes ag = detail::concat(a, given);
    const Axes bg = detail::concat(b, given);
    const Axes abg = detail::concat(a, bg);
    const double i = entropy(j, ag) + entropy(j, bg) - entropy(j, abg) - entropy(j, given);
    if (i < -1e-12) throw std::logic_error("negative mutual information beyond tolerance");
    return std::max(0.0, i);
}
inline double mutual_information(const JointDist& j, const Axes& a, const Axes& b, const Axes& given = {}) {
    return mutual_information(j, std::span<const std::size_t>(a), std::span<const std::size_t>(b),
                              std::span<const std::size_t>(given));
}

/// Sum |p - q| over the common alphabet. Range [0, 2]; halve for total variation.
inline double variational_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("variational distance: shape mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) v += std::abs(p[i] - q[i]);
    return v;
}
inline double variational_distance(const Dist& p, const Dist& q) { return variational_distance(p.pmf(), q.pmf()); }
inline double variational_distance(const JointDist& p, const JointDist& q) {
    if (p.shape() != q.shape()) throw std::invalid_argument("variational distance: shape mismatch");
    return variational_distance(p.pmf(), q.pmf());
}

/// -log2 max_{t, z in supp(ref)} w(t, z) / ref(z), where `given` are the
/// axes of w that ref is defined over (in order) and t ranges over the rest.
inline double min_entropy_conditional(const JointDist& w, std::span<const std::size_t> given, const JointDist& ref) {
    w.check_axes(given);
    std::vector<std::size_t> gshape;
    for (auto a : given) gshape.push_back(w.shape()[a]);
    if (gshape.empty()) {
        if (ref.size() != 1) throw std::invalid_argument("reference must be trivial when nothing is conditioned on");
    } else if (gshape != ref.shape() && !(ref.rank() == 1 && ref.size() == std::accumulate(gshape.begin(), gshape.end(), std::size_t{1}, std::multiplies<>()))) {
        throw std::invalid_argument("reference distribution shape does not match conditioning axes");
    }

    const auto gm = gshape.empty() ? JointDist() : w.marginal(given);
    for (std::size_t z = 0; z < gm.size(); ++z)
        if (gm.pmf()[z] > 0.0 && ref.pmf()[z] <= 0.0)
            throw std::domain_error("min-entropy: conditioning marginal not supported by reference");

    std::vector<std::size_t> gstr(given.size(), 1);
    for (std::size_t i = given.size(); i-- > 1;) gstr[i - 1] = gstr[i] * gshape[i];

    const auto& shape = w.shape();
    std::vector<std::size_t> coord(shape.size(), 0);
    double best = 0.0;
    for (std::size_t flat = 0; flat < w.size(); ++flat) {
        std::size_t z = 0;
        for (std::size_t i = 0; i < given.size(); ++i) z += coord[given[i]] * gstr[i];
        const double r = ref.pmf()[z];
        if (r > 0.0) best = std::max(best, w.pmf()[flat] / r);
        for (std::size_t a = shape.size(); a-- > 0;) {
            if (++coord[a] < shape[a]) break;
            coord[a] = 0;
        }
    }
    if (best <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log2(best);
}

// ---------------------------------------------------------------------------
// Discrete memoryless MAC

class MacChannel {
public:
    MacChannel() = default;

    /// `rows[t]` is q_{Z|X_1..X_L}(. | t) with t the lexicographic index of
    /// the input tuple, X_1 most significant.
    MacChannel(std::vector<std::size_t> input_sizes, std::size_t output_size, std::vector<std::vector<double>> rows)
        : input_sizes_(std::move(input_sizes)), output_size_(output_size), rows_(std::move(rows)) {
        if (input_sizes_.empty()) throw std::invalid_argument("channel needs at least one input");
        for (auto s : input_sizes_)
            if (s < 1) throw std::invalid_argument("input alphabet size must be >= 1");
        if (output_size_ < 1) throw std::invalid_argument("output alphabet size must be >= 1");
        std::size_t tuples = 1;
        for (auto s : input_sizes_) tuples *= s;
        if (rows_.size() != tuples)
            throw std::invalid_argument("channel has " + std::to_string(rows_.size()) + " transition rows, expected " +
                                        std::to_string(tuples));
        cdf_.resize(tuples);
        for (std::size_t t = 0; t < tuples; ++t) {
            if (rows_[t].size() != output_size_)
                throw std::invalid_argument("transition row " + std::to_string(t) + " has wrong length");
            try {
                detail::check_pmf(rows_[t]);
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("transition row " + std::to_string(t) + ": " + e.what());
            }
            cdf_[t].resize(output_size_);
            std::partial_sum(rows_[t].begin(), rows_[t].end(), cdf_[t].begin());
        }
    }

    [[nodiscard]] std::size_t num_inputs() const noexcept { return input_sizes_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& input_sizes() const noexcept { return input_sizes_; }
    [[nodiscard]] std::size_t output_size() const noexcept { return output_size_; }
    [[nodiscard]] const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t num_tuples() const noexcept { return rows_.size(); }

    [[nodiscard]] std::size_t tuple_index(std::span<const std::size_t> xs) const {
        std::size_t t = 0;
        for (std::size_t l = 0; l < input_sizes_.size(); ++l) t = t * input_sizes_[l] + xs[l];
        return t;
    }

    [[nodiscard]] double prob(std::size_t z, std::size_t tuple) const { return rows_[tuple][z]; }

    std::uint32_t sample(std::size_t tuple, Rng& rng) const {
        const auto& c = cdf_[tuple];
        const double u = rng.uniform01();
        for (std::size_t z = 0; z + 1 < c.size(); ++z)
            if (u < c[z]) return static_cast<std::uint32_t>(z);
        // Last symbol, skipping trailing zero-probability entries.
        std::size_t z = c.size() - 1;
        while (z > 0 && rows_[tuple][z] <= 0.0) --z;
        return static_cast<std::uint32_t>(z);
    }

private:
    std::vector<std::size_t> input_sizes_;
    std::size_t output_size_ = 1;
    std::vector<std::vector<double>> rows_;
    std::vector<std::vector<double>> cdf_;
};

namespace detail {

inline void check_inputs(const MacChannel& ch, std::span<const Dist> inputs) {
    if (inputs.size() != ch.num_inputs()) throw std::invalid_argument("one input distribution per channel input required");
    for (std::size_t l = 0; l < inputs.size(); ++l)
        if (inputs[l].size() != ch.input_sizes()[l])
            throw std::invalid_argument("input distribution " + std::to_string(l) + " alphabet mismatch");
}

}  // namespace detail

/// Joint pmf over (X_1, ..., X_L, Z) for independent inputs.
inline JointDist channel_joint(const MacChannel& ch, std::span<const Dist> inputs) {
    detail::check_inputs(ch, inputs);
    std::vector<std::size_t> shape(ch.input_sizes());
    shape.push_back(ch.output_size());
    std::vector<double> pmf;
    pmf.reserve(ch.num_tuples() * ch.output_size());
    std::vector<std::size_t> xs(ch.num_inputs(), 0);
    for (std::size_t t = 0; t < ch.num_tuples(); ++t) {
        double px = 1.0;
        for (std::size_t l = 0; l < xs.size(); ++l) px *= inputs[l][xs[l]];
        for (std::size_t z = 0; z < ch.output_size(); ++z) pmf.push_back(px * ch.prob(z, t));
        for (std::size_t l = xs.size(); l-- > 0;) {
            if (++xs[l] < ch.input_sizes()[l]) break;
            xs[l] = 0;
        }
    }
    return JointDist(std::move(shape), std::move(pmf), true);
}

/// q_Z(z) = sum over input tuples of q_{Z|X}(z|x) prod_l q_{X_l}(x_l).
inline Dist target_output_dist(const MacChannel& ch, std::span<const Dist> inputs) {
    detail::check_inputs(ch, inputs);
    std::vector<double> qz(ch.output_size(), 0.0);
    std::vector<std::size_t> xs(ch.num_inputs(), 0);
    for (std::size_t t = 0; t < ch.num_tuples(); ++t) {
        double px = 1.0;
        for (std::size_t l = 0; l < xs.size(); ++l) px *= inputs[l][xs[l]];
        for (std::size_t z = 0; z < ch.output_size(); ++z) qz[z] += px * ch.prob(z, t);
        for (std::size_t l = xs.size(); l-- > 0;) {
            if (++xs[l] < ch.input_sizes()[l]) break;
            xs[l] = 0;
        }
    }
    return Dist(std::move(qz), true);
}
inline Dist target_output_dist(const MacChannel& ch, const std::vector<Dist>& inputs) {
    return target_output_dist(ch, std::span<const Dist>(inputs));
}

/// Memoryless transmission: position i of the output depends only on
/// position i of each codeword.
inline Symbols transmit(const MacChannel& ch, std::span<const Bits> codewords, Rng& rng) {
    if (codewords.size() != ch.num_inputs()) throw std::invalid_argument("one codeword per channel input required");
    const std::size_t n = codewords.empty() ? 0 : codewords.front().size();
    for (const auto& cw : codewords)
        if (cw.size() != n) throw std::invalid_argument("codeword lengths differ");
    Symbols out(n);
    std::vector<std::size_t> xs(ch.num_inputs());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < xs.size(); ++l) {
            xs[l] = codewords[l][i];
            if (xs[l] >= ch.input_sizes()[l]) throw std::invalid_argument("codeword symbol outside input alphabet");
        }
        out[i] = ch.sample(ch.tuple_index(xs), rng);
    }
    return out;
}
inline Symbols transmit(const MacChannel& ch, const std::vector<Bits>& codewords, Rng& rng) {
    return transmit(ch, std::span<const Bits>(codewords), rng);
}

/// q_Z^{(x)w}: i.i.d. product over `w` positions, flattened, position 0 most significant.
inline std::vector<double> iid_power(const Dist& q, std::size_t w) {
    std::vector<double> out{1.0};
    for (std::size_t i = 0; i < w; ++i) {
        std::vector<double> next;
        next.reserve(out.size() * q.size());
        for (double a : out)
            for (double b : q.pmf()) next.push_back(a * b);
        out = std::move(next);
    }
    return out;
}

}  // namespace macres
