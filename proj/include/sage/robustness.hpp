#ifndef SAGE_ROBUSTNESS_HPP
#define SAGE_ROBUSTNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sage/core.hpp"
#include "sage/dataset.hpp"
#include "sage/model.hpp"
#include "sage/rng.hpp"

namespace sage {

/// Perturbation strengths used for robustness reports.
struct RobustnessSettings {
    double gaussian_variance = 0.01;
    double fgsm_epsilon = 8.0 / 255.0;
    double fgm_epsilon = 0.5;
};

namespace detail {

inline ImageTensor clamped(std::size_t d, std::vector<double> values) {
    std::vector<float> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        out[k] = static_cast<float>(std::clamp(values[k], 0.0, 1.0));
    }
    return ImageTensor::from_values(d, std::move(out));
}

}  // namespace detail

/// Zero-mean Gaussian noise of the given variance, clamped to [0,1].
inline ImageTensor perturb_gaussian(const ImageTensor& image, double variance, SeededRng& rng) {
    if (!(variance >= 0.0)) throw ArgumentError("perturb_gaussian: variance must be >= 0");
    if (variance == 0.0) return image;
    const double stddev = std::sqrt(variance);
    std::vector<double> v(image.values().begin(), image.values().end());
    for (double& x : v) x += rng.normal(0.0, stddev);
    return detail::clamped(image.size(), std::move(v));
}

/// x + eps * sign(grad), clamped (l-infinity step).
template <std::floating_point T>
ImageTensor perturb_fgsm(const Mlp<T>& model, const ImageTensor& image, const SoftLabel& label, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("perturb_fgsm: epsilon must be >= 0");
    if (epsilon == 0.0) return image;
    const auto grads = loss_and_grads(model, image, label);
    std::vector<double> v(image.values().begin(), image.values().end());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const T g = grads.input_grad[k];
        v[k] += epsilon * static_cast<double>((g > T{0}) - (g < T{0}));
    }
    return detail::clamped(image.size(), std::move(v));
}

/// x + eps * grad / ||grad||_2, clamped (l2 step). A zero gradient leaves the image unchanged.
template <std::floating_point T>
ImageTensor perturb_fgm(const Mlp<T>& model, const ImageTensor& image, const SoftLabel& label, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("perturb_fgm: epsilon must be >= 0");
    const auto grads = loss_and_grads(model, image, label);
    double norm = 0.0;
    for (T g : grads.input_grad) norm += static_cast<double>(g) * static_cast<double>(g);
    norm = std::sqrt(norm);
    if (epsilon == 0.0 || norm == 0.0) return image;
    std::vector<double> v(image.values().begin(), image.values().end());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += epsilon * static_cast<double>(grads.input_grad[k]) / norm;
    return detail::clamped(image.size(), std::move(v));
}

struct RobustnessReport {
    double clean = 0.0;
    double gaussian = 0.0;
    double fgsm = 0.0;
    double fgm = 0.0;
    double mean = 0.0;  // mean of gaussian, fgsm and fgm
};

template <std::floating_point T>
double accuracy(const Mlp<T>& model, const ToyDataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < data.size(); ++k) hits += predict(model, data.images[k]) == data.labels[k];
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

template <std::floating_point T>
RobustnessReport evaluate_robustness(const Mlp<T>& model, const ToyDataset& data, std::uint64_t seed,
                                     const RobustnessSettings& settings = {}) {
    if (model.shape().inputs != data.image_size() * data.image_size() * kChannels ||
        model.shape().classes != data.classes()) {
        throw ArgumentError("evaluate_robustness: model does not match dataset dimensions");
    }
    RobustnessReport r;
    const SeededRng base(seed);
    std::size_t clean = 0, gaussian = 0, fgsm = 0, fgm = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& x = data.images[k];
        const std::size_t y = data.labels[k];
        const auto label = one_hot(y, data.classes());
        auto rng = base.split(k);
        clean += predict(model, x) == y;
        gaussian += predict(model, perturb_gaussian(x, settings.gaussian_variance, rng)) == y;
        fgsm += predict(model, perturb_fgsm(model, x, label, settings.fgsm_epsilon)) == y;
        fgm += predict(model, perturb_fgm(model, x, label, settings.fgm_epsilon)) == y;
    }
    const double n = data.size() == 0 ? 1.0 : static_cast<double>(data.size());
    r.clean = static_cast<double>(clean) / n;
    r.gaussian = static_cast<double>(gaussian) / n;
    r.fgsm = static_cast<double>(fgsm) / n;
    r.fgm = static_cast<double>(fgm) / n;
    r.mean = (r.gaussian + r.fgsm + r.fgm) / 3.0;
    return r;
}

}  // namespace sage

#endif  // SAGE_ROBUSTNESS_HPP
