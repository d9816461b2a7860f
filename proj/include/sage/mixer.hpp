#ifndef SAGE_MIXER_HPP
#define SAGE_MIXER_HPP

// Augmenters: the saliency-guided pipeline with optimal rearrangement, plus the
// Input Mixup and CutMix baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "sage/core.hpp"
#include "sage/rearrange.hpp"
#include "sage/rng.hpp"
#include "sage/saliency.hpp"

namespace sage {

/// x' = M * x0 + (1 - M) * x1_shifted, per pixel and channel.
inline ImageTensor mix_images(const ImageTensor& x0, const ImageTensor& x1_shifted, const MixingMask& mask) {
    const std::size_t d = x0.size();
    if (x1_shifted.size() != d || mask.size() != d) throw ArgumentError("mix_images: dimension mismatch");
    std::vector<float> out(d * d * kChannels);
    const auto a = x0.values();
    const auto b = x1_shifted.values();
    const auto m = mask.plane().values();
    for (std::size_t p = 0; p < d * d; ++p) {
        const double w = m[p];
        for (std::size_t c = 0; c < kChannels; ++c) {
            const std::size_t k = p * kChannels + c;
            const double v = w * a[k] + (1.0 - w) * b[k];
            out[k] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
        }
    }
    return ImageTensor::from_values(d, std::move(out));
}

/// y' = gamma * y0 + (1 - gamma) * y1.
inline SoftLabel mix_labels(const SoftLabel& y0, const SoftLabel& y1, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("mix_labels: gamma must lie in [0,1]");
    if (y0.classes() != y1.classes()) throw ArgumentError("mix_labels: class counts differ");
    std::vector<float> out(y0.classes());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = static_cast<float>(gamma * y0[k] + (1.0 - gamma) * y1[k]);
    }
    return SoftLabel(std::move(out));
}

namespace detail {

inline void check_pair(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1, const SoftLabel& y1) {
    if (x0.size() != x1.size()) throw ArgumentError("augment: images differ in size");
    if (y0.classes() != y1.classes()) throw ArgumentError("augment: labels differ in class count");
}

}  // namespace detail

/// Saliency-guided mixup with optimal rearrangement of the second image.
///
/// Draws lambda ~ U(0, u), prepares the saliency pair, searches the offset
/// maximizing total saliency, then blends x0 with the shifted x1 under the
/// saliency-ratio mask. The label weight is the mean of that mask over the full
/// grid, including positions covered only by zero padding.
inline AugmentedSample sage_augment(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1,
                                    const SoftLabel& y1, const SaliencyMap& s0, const SaliencyMap& s1,
                                    const SageConfig& config, SeededRng& rng, unsigned threads = 1) {
    config.validate();
    detail::check_pair(x0, y0, x1, y1);
    if (s0.size() != x0.size() || s1.size() != x1.size()) {
        throw ArgumentError("sage_augment: saliency size does not match image size");
    }

    const double lambda = sample_lambda(rng, config.u).lambda;
    const auto [p0, p1] = prepare_pair(s0, s1, lambda, config.sigma2);
    const SearchResult best = threads > 1
                                  ? search_offset_parallel(p0, p1, config.search_fraction, rng, config.zeta, threads)
                                  : search_offset(p0, p1, config.search_fraction, rng, config.zeta);

    auto mask = mixing_mask_at(p0, translate(p1, best.offset), config.zeta);
    const double gamma = mask_mean(mask);
    auto image = mix_images(x0, translate(x1, best.offset), mask);
    auto label = mix_labels(y0, y1, gamma);
    return AugmentedSample(std::move(image), std::move(label), std::move(mask), best.offset, gamma, lambda,
                           best.value);
}

/// Constant-ratio blend: lambda * (x0, y0) + (1 - lambda) * (x1, y1).
inline AugmentedSample input_mixup(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1,
                                   const SoftLabel& y1, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("input_mixup: lambda must lie in [0,1]");
    detail::check_pair(x0, y0, x1, y1);
    auto mask = MixingMask::constant(x0.size(), lambda);
    auto image = mix_images(x0, x1, mask);
    auto label = mix_labels(y0, y1, lambda);
    return AugmentedSample(std::move(image), std::move(label), std::move(mask), {0, 0}, lambda, lambda, 0.0);
}

/// Half-open pixel box [i0, i1) x [j0, j1).
struct Box {
    std::size_t i0 = 0, i1 = 0, j0 = 0, j1 = 0;

    std::size_t area() const { return (i1 - i0) * (j1 - j0); }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Standard CutMix box: side floor(d * sqrt(1 - lambda)) centred at (ci, cj), clipped to the grid.
inline Box cutmix_box(std::size_t d, double lambda, std::size_t ci, std::size_t cj) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("cutmix: lambda must lie in [0,1]");
    const long side = static_cast<long>(std::floor(static_cast<double>(d) * std::sqrt(1.0 - lambda)));
    const long half = side / 2;
    auto clip = [d](long v) { return static_cast<std::size_t>(std::clamp(v, 0L, static_cast<long>(d))); };
    return {clip(static_cast<long>(ci) - half), clip(static_cast<long>(ci) - half + side),
            clip(static_cast<long>(cj) - half), clip(static_cast<long>(cj) - half + side)};
}

/// Pastes `box` from x1 into x0; label weight is the fraction of x0 left visible.
inline AugmentedSample cutmix_with_box(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1,
                                       const SoftLabel& y1, double lambda, const Box& box) {
    detail::check_pair(x0, y0, x1, y1);
    const std::size_t d = x0.size();
    Plane<double> keep(d, 1.0);
    for (std::size_t i = box.i0; i < box.i1; ++i) {
        for (std::size_t j = box.j0; j < box.j1; ++j) keep(i, j) = 0.0;
    }
    MixingMask mask(std::move(keep));
    const double gamma = 1.0 - static_cast<double>(box.area()) / static_cast<double>(d * d);
    auto image = mix_images(x0, x1, mask);
    auto label = mix_labels(y0, y1, gamma);
    return AugmentedSample(std::move(image), std::move(label), std::move(mask), {0, 0}, gamma, lambda, 0.0);
}

inline AugmentedSample cutmix(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1,
                              const SoftLabel& y1, double lambda, SeededRng& rng) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("cutmix: lambda must lie in [0,1]");
    detail::check_pair(x0, y0, x1, y1);
    const std::size_t d = x0.size();
    const std::size_t ci = rng.index(d);
    const std::size_t cj = rng.index(d);
    return cutmix_with_box(x0, y0, x1, y1, lambda, cutmix_box(d, lambda, ci, cj));
}

}  // namespace sage

#endif  // SAGE_MIXER_HPP
