#ifndef SAGE_REARRANGE_HPP
#define SAGE_REARRANGE_HPP

// Zero-padded translation, the saliency-ratio mixing mask, total saliency of a
// candidate offset, and the sampled argmax over offsets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include "sage/core.hpp"
#include "sage/rng.hpp"

namespace sage {

namespace detail {

inline void check_offset(Offset tau, std::size_t d) {
    if (!offset_in_range(tau, d)) {
        throw ArgumentError("offset (" + std::to_string(tau.di) + "," + std::to_string(tau.dj) +
                            ") out of range for size " + std::to_string(d));
    }
}

/// Half-open range of destination indices whose source index (dst - shift) lies in [0, d).
inline std::pair<std::size_t, std::size_t> valid_range(int shift, std::size_t d) {
    const long lo = std::max(0L, static_cast<long>(shift));
    const long hi = std::min(static_cast<long>(d), static_cast<long>(d) + shift);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

}  // namespace detail

/// out[i,j] = z[i - di, j - dj] where the source is inside the grid, else 0.
template <typename T>
Plane<T> translate(const Plane<T>& z, Offset tau) {
    const std::size_t d = z.size();
    detail::check_offset(tau, d);
    Plane<T> out(d);
    const auto [i0, i1] = detail::valid_range(tau.di, d);
    const auto [j0, j1] = detail::valid_range(tau.dj, d);
    for (std::size_t i = i0; i < i1; ++i) {
        const std::size_t si = i - tau.di;
        for (std::size_t j = j0; j < j1; ++j) out(i, j) = z(si, j - tau.dj);
    }
    return out;
}

inline ImageTensor translate(const ImageTensor& z, Offset tau) {
    const std::size_t d = z.size();
    detail::check_offset(tau, d);
    ImageTensor out(d);
    const auto [i0, i1] = detail::valid_range(tau.di, d);
    const auto [j0, j1] = detail::valid_range(tau.dj, d);
    for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) {
            for (std::size_t c = 0; c < kChannels; ++c) out(i, j, c) = z(i - tau.di, j - tau.dj, c);
        }
    }
    return out;
}

inline PreparedSaliency translate(const PreparedSaliency& s, Offset tau) {
    auto shifted = translate(s.plane(), tau);
    const double mass = shifted.sum();
    return PreparedSaliency(std::move(shifted), std::min(mass, 1.0));
}

inline MixingMask mixing_mask_at(const PreparedSaliency& s0, const PreparedSaliency& s1_shifted, double zeta) {
    if (s0.size() != s1_shifted.size()) throw ArgumentError("mixing_mask_at: maps differ in size");
    if (!(zeta > 0.0)) throw ArgumentError("mixing_mask_at: zeta must be > 0");
    const std::size_t d = s0.size();
    Plane<double> mask(d);
    const auto a = s0.plane().values();
    const auto b = s1_shifted.plane().values();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double ak = a[k];
        mask.values()[k] = ak / (ak + static_cast<double>(b[k]) + zeta);
    }
    return MixingMask(std::move(mask));
}

/// Sum over the grid of M*s0 + (1-M)*T(s1), where M is the mask of s0 against T(s1).
/// Pixels whose translated source lies outside the grid see T(s1) = 0. Accumulated in
/// row-major order so results are reproducible bit for bit.
inline double total_saliency(const PreparedSaliency& s0, const PreparedSaliency& s1, Offset tau, double zeta) {
    const std::size_t d = s0.size();
    if (s1.size() != d) throw ArgumentError("total_saliency: maps differ in size");
    detail::check_offset(tau, d);
    const auto a = s0.plane().values();
    const auto b = s1.plane().values();
    const auto [i0, i1] = detail::valid_range(tau.di, d);
    const auto [j0, j1] = detail::valid_range(tau.dj, d);

    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const bool row_inside = i >= i0 && i < i1;
        for (std::size_t j = 0; j < d; ++j) {
            const double ak = a[i * d + j];
            double bk = 0.0;
            if (row_inside && j >= j0 && j < j1) bk = b[(i - tau.di) * d + (j - tau.dj)];
            const double m = ak / (ak + bk + zeta);
            total += m * ak + (1.0 - m) * bk;
        }
    }
    return total;
}

/// Every offset with components in [-(d-1), d-1], row-major in (di, dj).
inline std::vector<Offset> offset_space(std::size_t d) {
    if (d < 2) throw ArgumentError("offset_space: size must be at least 2");
    const int r = static_cast<int>(d) - 1;
    std::vector<Offset> offsets;
    offsets.reserve((2 * d - 1) * (2 * d - 1));
    for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) offsets.push_back({di, dj});
    }
    return offsets;
}

/// ceil(fraction * n) clamped to [1, n]; fraction must lie in (0, 1].
inline std::size_t sample_count(double fraction, std::size_t n) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("search: fraction must lie in (0,1]");
    // The small bias keeps products like 0.01 * 100 from rounding up to 2.
    const double want = std::ceil(fraction * static_cast<double>(n) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(want, 1.0)), 1, n);
}

/// Candidate offsets drawn uniformly without replacement, kept in row-major order.
inline std::vector<Offset> sample_offsets(std::size_t d, double fraction, SeededRng& rng) {
    auto all = offset_space(d);
    const std::size_t k = sample_count(fraction, all.size());
    if (k == all.size()) return all;
    std::vector<Offset> picked;
    picked.reserve(k);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), k, rng.engine());
    return picked;
}

struct SearchResult {
    Offset offset;
    double value = 0.0;
    std::size_t candidates = 0;

    friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

namespace detail {

/// Best of candidates[begin, end): strictly larger value wins, so ties keep the earliest
/// (lexicographically smallest, since candidates are sorted).
inline SearchResult best_in(const PreparedSaliency& s0, const PreparedSaliency& s1,
                            const std::vector<Offset>& candidates, std::size_t begin, std::size_t end,
                            double zeta) {
    SearchResult best{candidates[begin], total_saliency(s0, s1, candidates[begin], zeta), end - begin};
    for (std::size_t k = begin + 1; k < end; ++k) {
        const double v = total_saliency(s0, s1, candidates[k], zeta);
        if (v > best.value) best = {candidates[k], v, best.candidates};
    }
    return best;
}

inline void check_search_inputs(const PreparedSaliency& s0, const PreparedSaliency& s1, double fraction,
                                double zeta) {
    if (s0.size() != s1.size()) throw ArgumentError("search_offset: maps differ in size");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("search_offset: fraction must lie in (0,1]");
    if (!(zeta > 0.0)) throw ArgumentError("search_offset: zeta must be > 0");
}

}  // namespace detail

/// Argmax of total saliency over a random ceil(fraction * (2d-1)^2) subset of offsets.
inline SearchResult search_offset(const PreparedSaliency& s0, const PreparedSaliency& s1, double fraction,
                                  SeededRng& rng, double zeta) {
    detail::check_search_inputs(s0, s1, fraction, zeta);
    const auto candidates = sample_offsets(s0.size(), fraction, rng);
    return detail::best_in(s0, s1, candidates, 0, candidates.size(), zeta);
}

/// Same contract and result as search_offset; candidates are split into contiguous
/// chunks evaluated on up to `threads` workers and reduced in chunk order.
inline SearchResult search_offset_parallel(const PreparedSaliency& s0, const PreparedSaliency& s1,
                                           double fraction, SeededRng& rng, double zeta,
                                           unsigned threads = std::thread::hardware_concurrency()) {
    detail::check_search_inputs(s0, s1, fraction, zeta);
    const auto candidates = sample_offsets(s0.size(), fraction, rng);
    const std::size_t n = candidates.size();
    const std::size_t workers = std::clamp<std::size_t>(threads == 0 ? 1 : threads, 1, n);
    if (workers == 1) return detail::best_in(s0, s1, candidates, 0, n, zeta);

    std::vector<SearchResult> partial(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        auto run = [&](std::size_t w) {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            partial[w] = detail::best_in(s0, s1, candidates, begin, end, zeta);
        };
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
        run(0);
    }
    SearchResult best = partial[0];
    for (std::size_t w = 1; w < workers; ++w) {
        if (partial[w].value > best.value) best = partial[w];
    }
    best.candidates = n;
    return best;
}

}  // namespace sage

#endif  // SAGE_REARRANGE_HPP
