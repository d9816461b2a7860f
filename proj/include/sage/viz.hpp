#ifndef SAGE_VIZ_HPP
#define SAGE_VIZ_HPP

// Panel grid for inspecting one augmentation.
//
// Layout, with panel side p = d * scale and padding `pad` around every panel:
//   width  = cols * p + (cols + 1) * pad
//   height = rows * p + (rows + 1) * pad,  rows = 2, cols = max(6, candidates)
// Row 0: x0 | x1 | prepared s0 | prepared s1 | mask | mixed result.
// Row 1: one mixed image per candidate offset; the argmax panel gets a green frame.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sage/core.hpp"
#include "sage/mixer.hpp"
#include "sage/rearrange.hpp"
#include "sage/rng.hpp"
#include "sage/saliency.hpp"

namespace sage::viz {

struct Layout {
    std::size_t d = 0;
    std::size_t scale = 1;
    std::size_t pad = 2;
    std::size_t rows = 2;
    std::size_t cols = 6;

    std::size_t panel() const { return d * scale; }
    std::size_t width() const { return cols * panel() + (cols + 1) * pad; }
    std::size_t height() const { return rows * panel() + (rows + 1) * pad; }
};

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
public:
    Canvas(std::size_t width, std::size_t height, Rgb fill = {32, 32, 32})
        : width_(width), height_(height), rgb_(width * height * 3) {
        for (std::size_t p = 0; p < width * height; ++p) std::copy(fill.begin(), fill.end(), rgb_.begin() + 3 * p);
    }

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    const std::vector<std::uint8_t>& rgb() const { return rgb_; }

    void set(std::size_t x, std::size_t y, Rgb c) {
        if (x < width_ && y < height_) std::copy(c.begin(), c.end(), rgb_.begin() + 3 * (y * width_ + x));
    }
    Rgb get(std::size_t x, std::size_t y) const {
        const std::size_t k = 3 * (y * width_ + x);
        return {rgb_[k], rgb_[k + 1], rgb_[k + 2]};
    }

private:
    std::size_t width_, height_;
    std::vector<std::uint8_t> rgb_;
};

inline std::uint8_t byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

/// Black -> red -> yellow -> white.
inline Rgb heat(double t) { return {byte(3.0 * t), byte(3.0 * t - 1.0), byte(3.0 * t - 2.0)}; }

/// Mask colours: 1 (first image dominates) blue, 0 red, 0.5 white.
inline Rgb diverging(double m) {
    if (m >= 0.5) {
        const double t = (m - 0.5) * 2.0;
        return {byte(1.0 - t), byte(1.0 - t), 255};
    }
    const double t = (0.5 - m) * 2.0;
    return {255, byte(1.0 - t), byte(1.0 - t)};
}

template <typename PixelFn>
void draw_panel(Canvas& canvas, const Layout& layout, std::size_t row, std::size_t col, PixelFn&& pixel) {
    const std::size_t x0 = layout.pad + col * (layout.panel() + layout.pad);
    const std::size_t y0 = layout.pad + row * (layout.panel() + layout.pad);
    for (std::size_t y = 0; y < layout.panel(); ++y) {
        for (std::size_t x = 0; x < layout.panel(); ++x) {
            canvas.set(x0 + x, y0 + y, pixel(y / layout.scale, x / layout.scale));
        }
    }
}

inline void frame_panel(Canvas& canvas, const Layout& layout, std::size_t row, std::size_t col, Rgb colour) {
    if (layout.pad == 0) return;
    const std::size_t x0 = layout.pad + col * (layout.panel() + layout.pad) - 1;
    const std::size_t y0 = layout.pad + row * (layout.panel() + layout.pad) - 1;
    const std::size_t side = layout.panel() + 2;
    for (std::size_t t = 0; t < side; ++t) {
        canvas.set(x0 + t, y0, colour);
        canvas.set(x0 + t, y0 + side - 1, colour);
        canvas.set(x0, y0 + t, colour);
        canvas.set(x0 + side - 1, y0 + t, colour);
    }
}

inline void draw_image(Canvas& c, const Layout& l, std::size_t row, std::size_t col, const ImageTensor& img) {
    draw_panel(c, l, row, col, [&](std::size_t i, std::size_t j) {
        return Rgb{byte(img(i, j, 0)), byte(img(i, j, 1)), byte(img(i, j, 2))};
    });
}

inline void draw_heat(Canvas& c, const Layout& l, std::size_t row, std::size_t col, const Plane<float>& s) {
    const float peak = *std::max_element(s.values().begin(), s.values().end());
    draw_panel(c, l, row, col, [&](std::size_t i, std::size_t j) { return heat(peak > 0 ? s(i, j) / peak : 0.0); });
}

struct Candidate {
    Offset offset;
    double value = 0.0;
    bool is_argmax = false;
};

struct Options {
    std::size_t candidates = 6;
    std::size_t scale = 4;
    std::size_t pad = 2;
    bool sort = false;
};

struct Result {
    Canvas canvas;
    Layout layout;
    std::vector<Candidate> candidates;
    AugmentedSample sample;
};

/// Runs the augmentation with `config`, then renders the grid. Candidate offsets are the
/// chosen one, (0,0), and random others; in descending v order when `options.sort` is set.
inline Result render(const ImageTensor& x0, const SoftLabel& y0, const ImageTensor& x1, const SoftLabel& y1,
                     const SaliencyMap& s0, const SaliencyMap& s1, const SageConfig& config, SeededRng& rng,
                     const Options& options) {
    if (options.scale == 0) throw ArgumentError("viz: scale must be positive");
    auto sample = sage_augment(x0, y0, x1, y1, s0, s1, config, rng);
    const auto [p0, p1] = prepare_pair(s0, s1, sample.lambda(), config.sigma2);

    const std::size_t d = x0.size();
    auto space = offset_space(d);
    std::vector<Offset> picks{sample.offset()};
    if (sample.offset() != Offset{0, 0}) picks.push_back({0, 0});
    std::shuffle(space.begin(), space.end(), rng.engine());
    for (const auto& tau : space) {
        if (picks.size() >= std::max<std::size_t>(options.candidates, 1)) break;
        if (std::find(picks.begin(), picks.end(), tau) == picks.end()) picks.push_back(tau);
    }
    picks.resize(std::min(picks.size(), std::max<std::size_t>(options.candidates, 1)));

    std::vector<Candidate> cands;
    for (const auto& tau : picks) {
        cands.push_back({tau, total_saliency(p0, p1, tau, config.zeta), tau == sample.offset()});
    }
    if (options.sort) {
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.value != b.value) return a.value > b.value;
            return a.offset < b.offset;
        });
    }

    Layout layout{d, options.scale, options.pad, 2, std::max<std::size_t>(6, cands.size())};
    Canvas canvas(layout.width(), layout.height());
    draw_image(canvas, layout, 0, 0, x0);
    draw_image(canvas, layout, 0, 1, x1);
    draw_heat(canvas, layout, 0, 2, p0.plane());
    draw_heat(canvas, layout, 0, 3, p1.plane());
    draw_panel(canvas, layout, 0, 4, [&](std::size_t i, std::size_t j) { return diverging(sample.mask()(i, j)); });
    draw_image(canvas, layout, 0, 5, sample.image());
    for (std::size_t k = 0; k < cands.size(); ++k) {
        const auto mask = mixing_mask_at(p0, translate(p1, cands[k].offset), config.zeta);
        draw_image(canvas, layout, 1, k, mix_images(x0, translate(x1, cands[k].offset), mask));
        if (cands[k].is_argmax) frame_panel(canvas, layout, 1, k, {0, 220, 0});
    }
    return {std::move(canvas), layout, std::move(cands), std::move(sample)};
}

}  // namespace sage::viz

#endif  // SAGE_VIZ_HPP
