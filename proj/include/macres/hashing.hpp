#pragma once

// Toeplitz two-universal hash family over GF(2).

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "macres/probcore.hpp"
#include "macres/rng.hpp"

namespace macres::hashing {

inline constexpr std::size_t kExactStateBudget = std::size_t{1} << 24;

/// r x N Toeplitz matrix; entry (i, j) = diagonal[i - j + N - 1].
class ToeplitzHash {
public:
    ToeplitzHash() = default;

    ToeplitzHash(std::size_t in_len, std::size_t out_len, Bits diagonal)
        : in_len_(in_len), out_len_(out_len), diagonal_(std::move(diagonal)) {
        if (out_len_ > in_len_) throw std::invalid_argument("hash output longer than input");
        const std::size_t expect = out_len_ == 0 ? 0 : in_len_ + out_len_ - 1;
        if (diagonal_.size() != expect)
            throw std::invalid_argument("Toeplitz diagonal needs " + std::to_string(expect) + " bits");
        for (auto& b : diagonal_) b &= 1u;
        build_columns();
    }

    [[nodiscard]] std::size_t in_len() const noexcept { return in_len_; }
    [[nodiscard]] std::size_t out_len() const noexcept { return out_len_; }
    [[nodiscard]] const Bits& diagonal() const noexcept { return diagonal_; }

    [[nodiscard]] std::uint8_t entry(std::size_t i, std::size_t j) const { return diagonal_[i + in_len_ - 1 - j]; }

    [[nodiscard]] Bits apply(std::span<const std::uint8_t> x) const {
        if (x.size() != in_len_) throw std::invalid_argument("hash input length mismatch");
        Bits out(out_len_, 0);
        for (std::size_t i = 0; i < out_len_; ++i) {
            std::uint8_t acc = 0;
            for (std::size_t j = 0; j < in_len_; ++j) acc ^= static_cast<std::uint8_t>(entry(i, j) & x[j]);
            out[i] = acc;
        }
        return out;
    }

    /// Packed form (position 0 most significant) for inputs of at most 64 bits.
    [[nodiscard]] std::uint64_t apply_packed(std::uint64_t x) const {
        std::uint64_t out = 0;
        for (std::size_t j = 0; j < in_len_; ++j)
            if ((x >> (in_len_ - 1 - j)) & 1u) out ^= columns_[j];
        return out;
    }

    [[nodiscard]] std::string to_hex() const {
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string out;
        for (std::size_t i = 0; i < diagonal_.size(); i += 4) {
            unsigned nib = 0;
            for (std::size_t k = 0; k < 4; ++k) nib = (nib << 1) | (i + k < diagonal_.size() ? diagonal_[i + k] : 0u);
            out.push_back(kDigits[nib]);
        }
        return out;
    }

    static ToeplitzHash from_hex(std::string_view hex, std::size_t in_len, std::size_t out_len) {
        const std::size_t bits = out_len == 0 ? 0 : in_len + out_len - 1;
        if (hex.size() != (bits + 3) / 4)
            throw std::invalid_argument("hash hex string has " + std::to_string(hex.size()) + " digits, expected " +
                                        std::to_string((bits + 3) / 4));
        Bits diag;
        diag.reserve(hex.size() * 4);
        for (char c : hex) {
            unsigned v = 0;
            if (c >= '0' && c <= '9')
                v = static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f')
                v = static_cast<unsigned>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F')
                v = static_cast<unsigned>(c - 'A' + 10);
            else
                throw std::invalid_argument("invalid hex digit in hash descriptor");
            for (int k = 3; k >= 0; --k) diag.push_back(static_cast<std::uint8_t>((v >> k) & 1u));
        }
        for (std::size_t i = bits; i < diag.size(); ++i)
            if (diag[i]) throw std::invalid_argument("hash hex string has nonzero padding");
        diag.resize(bits);
        return ToeplitzHash(in_len, out_len, std::move(diag));
    }

    friend bool operator==(const ToeplitzHash& a, const ToeplitzHash& b) {
        return a.in_len_ == b.in_len_ && a.out_len_ == b.out_len_ && a.diagonal_ == b.diagonal_;
    }

private:
    void build_columns() {
        columns_.assign(in_len_, 0);
        if (out_len_ > 64) return;
        for (std::size_t j = 0; j < in_len_; ++j) {
            std::uint64_t col = 0;
            for (std::size_t i = 0; i < out_len_; ++i) col = (col << 1) | entry(i, j);
            columns_[j] = col;
        }
    }

    std::size_t in_len_ = 0;
    std::size_t out_len_ = 0;
    Bits diagonal_;
    std::vector<std::uint64_t> columns_;
};

/// Uniform member of the Toeplitz family {0,1}^in_len -> {0,1}^out_len.
inline ToeplitzHash sample_hash(Rng& rng, std::size_t in_len, std::size_t out_len) {
    if (out_len > in_len) throw std::invalid_argument("hash output length exceeds input length");
    Bits diag(out_len == 0 ? 0 : in_len + out_len - 1);
    for (auto& b : diag) b = rng.bit();
    return ToeplitzHash(in_len, out_len, std::move(diag));
}

/// Exact pushforward of p over (X_1, ..., X_L, Z...) through (h_1, ..., h_L).
/// Axis l < L must have size 2^{in_len(h_l)} (packed, position 0 most
/// significant); all later axes are carried through unchanged.
inline JointDist hashed_joint_dist_exact(std::span<const ToeplitzHash> hashes, const JointDist& joint,
                                         std::size_t budget = kExactStateBudget) {
    const std::size_t num = hashes.size();
    if (joint.rank() <= num) throw std::invalid_argument("joint must carry at least one axis beyond the hashed ones");
    if (joint.size() > budget) throw BudgetExceeded("hashed pushforward over " + std::to_string(joint.size()) + " states exceeds budget");
    const auto& shape = joint.shape();
    for (std::size_t l = 0; l < num; ++l) {
        if (hashes[l].in_len() >= 63 || hashes[l].out_len() >= 63) throw BudgetExceeded("hash too wide for exact pushforward");
        if (shape[l] != (std::size_t{1} << hashes[l].in_len()))
            throw std::invalid_argument("axis " + std::to_string(l) + " does not match hash input length");
    }
    std::vector<std::size_t> out_shape;
    for (std::size_t l = 0; l < num; ++l) out_shape.push_back(std::size_t{1} << hashes[l].out_len());
    std::size_t tail = 1;
    for (std::size_t a = num; a < shape.size(); ++a) {
        out_shape.push_back(shape[a]);
        tail *= shape[a];
    }
    std::size_t out_total = tail;
    for (std::size_t l = 0; l < num; ++l) out_total *= out_shape[l];
    std::vector<double> out(out_total, 0.0);

    std::vector<std::size_t> coord(num, 0);
    const std::size_t heads = joint.size() / tail;
    for (std::size_t head = 0; head < heads; ++head) {
        std::size_t o = 0;
        for (std::size_t l = 0; l < num; ++l) o = o * out_shape[l] + hashes[l].apply_packed(coord[l]);
        const std::size_t base_in = head * tail;
        const std::size_t base_out = o * tail;
        for (std::size_t t = 0; t < tail; ++t) out[base_out + t] += joint.pmf()[base_in + t];
        for (std::size_t l = num; l-- > 0;) {
            if (++coord[l] < shape[l]) break;
            coord[l] = 0;
        }
    }
    return JointDist(std::move(out_shape), std::move(out), true);
}

inline JointDist hashed_joint_dist_exact(const std::vector<ToeplitzHash>& hashes, const JointDist& joint,
                                         std::size_t budget = kExactStateBudget) {
    return hashed_joint_dist_exact(std::span<const ToeplitzHash>(hashes), joint, budget);
}

}  // namespace macres::hashing
