#ifndef SAGE_DATASET_HPP
#define SAGE_DATASET_HPP

// Synthetic image classification set: a coloured blob on a textured background.
// Quadrant and colour of the blob both encode the class.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sage/core.hpp"
#include "sage/rng.hpp"

namespace sage {

struct ToyDatasetParams {
    std::size_t d = 16;
    std::size_t classes = 4;
    std::size_t count = 2000;
    double blob_radius = 2.5;
    double noise = 0.08;
    std::uint64_t seed = 0;
};

struct ToyDataset {
    ToyDatasetParams params;
    std::vector<ImageTensor> images;
    std::vector<std::size_t> labels;

    std::size_t size() const { return images.size(); }
    std::size_t classes() const { return params.classes; }
    std::size_t image_size() const { return params.d; }
};

namespace detail {

inline std::array<float, 3> class_colour(std::size_t c) {
    static constexpr std::array<std::array<float, 3>, 8> palette{{{0.95f, 0.15f, 0.15f},
                                                                  {0.15f, 0.85f, 0.2f},
                                                                  {0.2f, 0.3f, 0.95f},
                                                                  {0.95f, 0.85f, 0.1f},
                                                                  {0.9f, 0.2f, 0.9f},
                                                                  {0.1f, 0.9f, 0.9f},
                                                                  {1.0f, 0.55f, 0.0f},
                                                                  {0.55f, 0.3f, 0.1f}}};
    return palette[c % palette.size()];
}

/// Quadrant index 0..3 (TL, TR, BL, BR); classes beyond 4 wrap around.
inline std::pair<std::size_t, std::size_t> quadrant_origin(std::size_t c, std::size_t d) {
    const std::size_t q = c % 4;
    const std::size_t half = d / 2;
    return {(q / 2) * half, (q % 2) * half};
}

inline ImageTensor render_sample(std::size_t cls, const ToyDatasetParams& p, SeededRng& rng) {
    const std::size_t d = p.d;
    ImageTensor image(d);

    // Background: a random-phase oriented sinusoid over a random grey level.
    const double base = rng.uniform(0.3, 0.6);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.05, 0.12);

    const auto [qi, qj] = quadrant_origin(cls, d);
    const double half = static_cast<double>(d / 2);
    const double ci = static_cast<double>(qi) + rng.uniform(0.25, 0.75) * half;
    const double cj = static_cast<double>(qj) + rng.uniform(0.25, 0.75) * half;
    const auto colour = class_colour(cls);

    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double t = std::cos(angle) * static_cast<double>(i) + std::sin(angle) * static_cast<double>(j);
            const double bg = base + amp * std::sin(freq * t + phase);
            const double di = static_cast<double>(i) - ci;
            const double dj = static_cast<double>(j) - cj;
            const double r = std::sqrt(di * di + dj * dj);
            // Soft-edged disk.
            const double alpha = std::clamp(p.blob_radius + 0.5 - r, 0.0, 1.0);
            for (std::size_t c = 0; c < kChannels; ++c) {
                const double v = (1.0 - alpha) * bg + alpha * colour[c] + rng.normal(0.0, p.noise);
                image(i, j, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return image;
}

}  // namespace detail

/// Balanced set: sample k has class k mod C before a seeded shuffle.
inline ToyDataset make_toy_dataset(const ToyDatasetParams& params) {
    if (params.d < 4) throw ArgumentError("toy dataset: image side must be at least 4");
    if (params.classes == 0) throw ArgumentError("toy dataset: need at least one class");
    SeededRng rng(params.seed);
    std::vector<std::size_t> order(params.count);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k % params.classes;
    std::shuffle(order.begin(), order.end(), rng.engine());

    ToyDataset out{params, {}, {}};
    out.images.reserve(params.count);
    out.labels.reserve(params.count);
    for (std::size_t k = 0; k < params.count; ++k) {
        auto item_rng = rng.split(k);
        out.images.push_back(detail::render_sample(order[k], params, item_rng));
        out.labels.push_back(order[k]);
    }
    return out;
}

}  // namespace sage

#endif  // SAGE_DATASET_HPP
