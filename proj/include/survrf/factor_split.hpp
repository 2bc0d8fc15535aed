#pragma once

#include <compare>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "survrf/rng.hpp"
#include "survrf/util.hpp"

namespace survrf {

enum class Side : std::uint8_t { Left, Right };

/// A split of a factor's labels into two complementary daughter subsets,
/// encoded as a bit vector over ceil(L/32) 32-bit words. Bit b set means
/// label b goes to the left daughter.
///
/// Canonical form: bit 0 is always clear (label 0 goes right), so a pair and
/// its complement collapse to one stored value and the number of distinct
/// pairs for L labels is exactly 2^(L-1) - 1.
class ComplementaryPair {
public:
    static constexpr std::uint32_t kWordBits = 32;

    ComplementaryPair() = default;

    /// Takes a left-daughter bit mask; complements it if label 0 is set so
    /// the stored value is canonical. Neither daughter may be empty.
    static ComplementaryPair from_left_mask(std::vector<std::uint32_t> words,
                                            std::uint32_t label_count) {
        require(label_count >= 2, "factor split needs at least two labels");
        require(words.size() == word_count(label_count), "mask has wrong word count");
        ComplementaryPair p;
        p.label_count_ = label_count;
        p.words_ = std::move(words);
        // clear bits at and above label_count
        std::uint32_t tail = label_count % kWordBits;
        if (tail != 0) p.words_.back() &= (std::uint32_t{1} << tail) - 1;
        if (p.words_[0] & 1u) p.complement_in_place();
        require(!p.all_clear(), "split leaves a daughter empty");
        require(!p.all_set_except_canonical(), "split leaves a daughter empty");
        return p;
    }

    std::uint32_t label_count() const { return label_count_; }
    std::span<const std::uint32_t> words() const { return words_; }

    bool left(std::uint32_t label) const {
        if (label >= label_count_) return false;  // labels beyond training go right
        return (words_[label / kWordBits] >> (label % kWordBits)) & 1u;
    }

    static std::size_t word_count(std::uint32_t label_count) {
        return (static_cast<std::size_t>(label_count) + kWordBits - 1) / kWordBits;
    }

    /// Byte layout: label_count, then each 32-bit word, all little-endian.
    std::vector<std::uint8_t> to_bytes() const {
        std::vector<std::uint8_t> out;
        out.reserve(4 + 4 * words_.size());
        append_u32(out, label_count_);
        for (std::uint32_t w : words_) append_u32(out, w);
        return out;
    }

    static ComplementaryPair from_bytes(std::span<const std::uint8_t> bytes) {
        require(bytes.size() >= 8 && bytes.size() % 4 == 0, "truncated split encoding");
        std::uint32_t label_count = read_u32(bytes.data());
        std::size_t nw = bytes.size() / 4 - 1;
        require(nw == word_count(label_count), "split encoding has wrong word count");
        std::vector<std::uint32_t> words(nw);
        for (std::size_t i = 0; i < nw; ++i) words[i] = read_u32(bytes.data() + 4 + 4 * i);
        return from_left_mask(std::move(words), label_count);
    }

    bool operator==(const ComplementaryPair&) const = default;

    /// Orders by word value, most significant word first; used for the
    /// deterministic enumeration order and for de-duplicating sampled pairs.
    std::strong_ordering operator<=>(const ComplementaryPair& other) const {
        if (auto c = label_count_ <=> other.label_count_; c != 0) return c;
        for (std::size_t i = words_.size(); i-- > 0;) {
            if (auto c = words_[i] <=> other.words_[i]; c != 0) return c;
        }
        return std::strong_ordering::equal;
    }

private:
    void complement_in_place() {
        for (auto& w : words_) w = ~w;
        std::uint32_t tail = label_count_ % kWordBits;
        if (tail != 0) words_.back() &= (std::uint32_t{1} << tail) - 1;
    }

    bool all_clear() const {
        for (std::uint32_t w : words_)
            if (w != 0) return false;
        return true;
    }

    // canonical value with every bit except bit 0 set = right daughter empty
    bool all_set_except_canonical() const {
        std::vector<std::uint32_t> full(words_.size(), ~std::uint32_t{0});
        full[0] &= ~std::uint32_t{1};
        std::uint32_t tail = label_count_ % kWordBits;
        if (tail != 0) full.back() &= (std::uint32_t{1} << tail) - 1;
        return words_ == full;
    }

    static void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        out.push_back(static_cast<std::uint8_t>(v >> 24));
    }

    static std::uint32_t read_u32(const std::uint8_t* p) {
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }

    std::vector<std::uint32_t> words_;
    std::uint32_t label_count_ = 0;
};

inline Side assign_daughter(const ComplementaryPair& pair, std::uint32_t label) {
    require(label < pair.label_count(), "label out of range for split");
    return pair.left(label) ? Side::Left : Side::Right;
}

/// Sentinel for factors whose pair count exceeds the 63-bit exact range.
inline constexpr std::uint64_t kUnboundedPairs = std::numeric_limits<std::uint64_t>::max();

/// Number of distinct complementary label pairs of an L-label factor:
/// 2^(L-1) - 1, saturating for L > 63.
inline std::uint64_t num_complementary_pairs(std::uint32_t label_count) {
    require(label_count >= 2, "pair count needs at least two labels");
    if (label_count > 63) return kUnboundedPairs;
    return (std::uint64_t{1} << (label_count - 1)) - 1;
}

/// Total candidate splits at a root node over d factors: sum of per-factor
/// pair counts, i.e. sum_j 2^(L_j - 1) minus d. Saturates on overflow.
inline std::uint64_t max_root_splits(std::span<const std::uint32_t> label_counts) {
    require(!label_counts.empty(), "empty schema");
    std::uint64_t total = 0;
    for (std::uint32_t L : label_counts) {
        std::uint64_t pairs = num_complementary_pairs(L);
        if (pairs == kUnboundedPairs || total > kUnboundedPairs - pairs) return kUnboundedPairs;
        total += pairs;
    }
    return total;
}

/// All canonical pairs of an L-label factor in increasing word-value order.
/// Restricted to single-word factors; wider factors use sample_pair.
inline std::vector<ComplementaryPair> enumerate_pairs(std::uint32_t label_count) {
    require(label_count >= 2 && label_count <= 32,
            "deterministic enumeration is limited to factors with 2..32 labels");
    std::uint64_t count = num_complementary_pairs(label_count);
    std::vector<ComplementaryPair> out;
    out.reserve(static_cast<std::size_t>(count));
    // canonical masks are exactly {2k : 1 <= k <= 2^(L-1) - 1}
    for (std::uint64_t k = 1; k <= count; ++k) {
        std::uint32_t mask = static_cast<std::uint32_t>(k << 1);
        out.push_back(ComplementaryPair::from_left_mask({mask}, label_count));
    }
    return out;
}

/// Uniform draw over all 2^(L-1) - 1 canonical pairs, for any L >= 2. Each
/// of the L bits is a fair coin; all-set and all-clear patterns are rejected
/// and the result canonicalized. Every unordered pair covers exactly two of
/// the 2^L - 2 admitted patterns, so the draw is uniform. No enumeration is
/// ever materialized, so L is unlimited.
inline ComplementaryPair sample_pair(std::uint32_t label_count, Rng& rng) {
    require(label_count >= 2, "factor split needs at least two labels");
    if (label_count == 2) {
        // only one pair exists
        return ComplementaryPair::from_left_mask({2u}, 2);
    }
    const std::size_t nw = ComplementaryPair::word_count(label_count);
    const std::uint32_t tail = label_count % ComplementaryPair::kWordBits;
    std::vector<std::uint32_t> words(nw);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        bool any_set = false;
        bool any_clear = false;
        for (std::size_t i = 0; i < nw; ++i) {
            std::uint32_t w = rng.next_u32();
            if (i + 1 == nw && tail != 0) w &= (std::uint32_t{1} << tail) - 1;
            words[i] = w;
        }
        std::uint32_t bits_checked = 0;
        for (std::size_t i = 0; i < nw && (!any_set || !any_clear); ++i) {
            std::uint32_t in_word =
                std::min<std::uint32_t>(ComplementaryPair::kWordBits, label_count - bits_checked);
            std::uint32_t full = in_word == 32 ? ~std::uint32_t{0}
                                               : (std::uint32_t{1} << in_word) - 1;
            if ((words[i] & full) != 0) any_set = true;
            if ((words[i] & full) != full) any_clear = true;
            bits_checked += in_word;
        }
        if (any_set && any_clear) return ComplementaryPair::from_left_mask(std::move(words), label_count);
    }
    fail("pair sampling exceeded the rejection cap");
}

}  // namespace survrf
