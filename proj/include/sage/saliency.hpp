#ifndef SAGE_SALIENCY_HPP
#define SAGE_SALIENCY_HPP

// Gradient saliency and the smoothing / normalization / rescaling that turns a
// pair of raw maps into the prepared pair consumed by the mask and the search.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "sage/core.hpp"
#include "sage/model.hpp"
#include "sage/rng.hpp"

namespace sage {

/// Rescaling factor drawn from U(0, u).
struct LambdaDraw {
    double lambda = 0.0;
};

/// Pixel saliency from a per-entry input gradient laid out as [i][j][c].
template <typename T>
SaliencyMap saliency_from_gradient(std::size_t d, std::span<const T> input_grad) {
    if (input_grad.size() != d * d * kChannels) throw ArgumentError("saliency: gradient size mismatch");
    Plane<float> plane(d);
    for (std::size_t p = 0; p < d * d; ++p) {
        double sq = 0.0;
        for (std::size_t c = 0; c < kChannels; ++c) {
            const double g = static_cast<double>(input_grad[p * kChannels + c]);
            sq += g * g;
        }
        plane.values()[p] = static_cast<float>(std::sqrt(sq));
    }
    return SaliencyMap(std::move(plane));
}

template <std::floating_point T>
struct SaliencyResult {
    SaliencyMap saliency;
    ParamGradient<T> param_grad;
    T loss;
};

/// Saliency of the full cross-entropy loss plus the parameter gradient from the same backward pass.
template <std::floating_point T>
SaliencyResult<T> compute_saliency(const Mlp<T>& model, const ImageTensor& image, const SoftLabel& label) {
    const std::size_t d = image.size();
    if (model.shape().inputs != d * d * kChannels) {
        throw ArgumentError("compute_saliency: model expects " + std::to_string(model.shape().inputs) +
                            " inputs, image has " + std::to_string(d * d * kChannels));
    }
    auto grads = loss_and_grads(model, image, label);
    return {saliency_from_gradient<T>(d, grads.input_grad), std::move(grads.param_grad), grads.loss};
}

/// Normalized 1D Gaussian taps of variance sigma2 on [-r, r], r = ceil(3 * sigma).
inline std::vector<double> gaussian_kernel(double sigma2) {
    if (!(sigma2 > 0.0)) return {1.0};
    const int radius = static_cast<int>(std::ceil(3.0 * std::sqrt(sigma2)));
    std::vector<double> taps(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        taps[k + radius] = std::exp(-static_cast<double>(k * k) / (2.0 * sigma2));
        total += taps[k + radius];
    }
    for (double& t : taps) t /= total;
    return taps;
}

/// Half-sample symmetric border index (d c b a | a b c d | d c b a), valid for any overshoot.
inline std::size_t reflect_index(long x, std::size_t d) {
    const long period = 2 * static_cast<long>(d);
    long m = x % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<long>(d) ? m : period - 1 - m);
}

/// Separable Gaussian blur with reflected borders; sigma2 == 0 is the identity.
inline SaliencyMap gaussian_smooth(const SaliencyMap& s, double sigma2) {
    if (!(sigma2 >= 0.0)) throw ArgumentError("gaussian_smooth: sigma2 must be >= 0");
    if (sigma2 == 0.0) return s;
    const std::size_t d = s.size();
    const auto taps = gaussian_kernel(sigma2);
    const long radius = static_cast<long>(taps.size() / 2);

    std::vector<double> rows(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k) {
                acc += taps[k + radius] * s(i, reflect_index(static_cast<long>(j) + k, d));
            }
            rows[i * d + j] = acc;
        }
    }
    Plane<float> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k) {
                acc += taps[k + radius] * rows[reflect_index(static_cast<long>(i) + k, d) * d + j];
            }
            out(i, j) = static_cast<float>(acc);
        }
    }
    return SaliencyMap(std::move(out));
}

/// Rescale to unit mass; a map with (near) zero mass becomes uniform.
inline SaliencyMap l1_normalize(const SaliencyMap& s) {
    const std::size_t d = s.size();
    const double total = s.sum();
    Plane<float> out(d);
    if (total < 1e-12) {
        const float uniform = static_cast<float>(1.0 / static_cast<double>(d * d));
        for (float& v : out.values()) v = uniform;
        return SaliencyMap(std::move(out));
    }
    const auto src = s.plane().values();
    for (std::size_t k = 0; k < src.size(); ++k) {
        out.values()[k] = static_cast<float>(static_cast<double>(src[k]) / total);
    }
    return SaliencyMap(std::move(out));
}

inline LambdaDraw sample_lambda(SeededRng& rng, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw ArgumentError("sample_lambda: u must lie in [0,1]");
    if (u == 0.0) return {0.0};
    return {std::min(rng.uniform(0.0, u), u)};
}

/// Smoothed, unit-normalized map scaled to carry `mass`.
inline PreparedSaliency prepare_one(const SaliencyMap& s, double mass, double sigma2) {
    const auto unit = l1_normalize(gaussian_smooth(s, sigma2));
    Plane<float> out(unit.size());
    const auto src = unit.plane().values();
    for (std::size_t k = 0; k < src.size(); ++k) {
        out.values()[k] = static_cast<float>(static_cast<double>(src[k]) * mass);
    }
    return PreparedSaliency(std::move(out), mass);
}

/// First map carries mass lambda, second carries 1 - lambda.
inline std::pair<PreparedSaliency, PreparedSaliency> prepare_pair(const SaliencyMap& s0, const SaliencyMap& s1,
                                                                  double lambda, double sigma2) {
    if (s0.size() != s1.size()) throw ArgumentError("prepare_pair: saliency maps differ in size");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("prepare_pair: lambda must lie in [0,1]");
    return {prepare_one(s0, lambda, sigma2), prepare_one(s1, 1.0 - lambda, sigma2)};
}

}  // namespace sage

#endif  // SAGE_SALIENCY_HPP
