#ifndef SAGE_CORE_HPP
#define SAGE_CORE_HPP

// Domain types shared by every part of the augmentation engine.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sage {

/// Raised when a caller passes arguments that violate an operation's precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when raw data cannot be turned into a valid domain value.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for unreadable, truncated or malformed files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kChannels = 3;

/// Square d x d grid of scalars, row-major.
template <typename T>
class Plane {
public:
    using value_type = T;

    Plane() = default;
    explicit Plane(std::size_t d, T fill = T{0}) : d_(d), values_(d * d, fill) {}
    Plane(std::size_t d, std::vector<T> values) : d_(d), values_(std::move(values)) {
        if (values_.size() != d_ * d_) {
            throw ArgumentError("plane: expected " + std::to_string(d_ * d_) + " values, got " +
                                std::to_string(values_.size()));
        }
    }

    std::size_t size() const noexcept { return d_; }
    std::size_t count() const noexcept { return values_.size(); }

    T& operator()(std::size_t i, std::size_t j) { return values_[i * d_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return values_[i * d_ + j]; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    double sum() const {
        double total = 0.0;
        for (T v : values_) total += static_cast<double>(v);
        return total;
    }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t d_ = 0;
    std::vector<T> values_;
};

/// d x d x 3 RGB image with values in [0,1], stored row-major as [i][j][c].
class ImageTensor {
public:
    ImageTensor() = default;

    /// Black image of side d.
    explicit ImageTensor(std::size_t d) : d_(d), values_(d * d * kChannels, 0.0f) {
        if (d < 2) throw ValidationError("image: side must be at least 2");
    }

    /// Takes ownership of already-checked values; use validate_image for untrusted data.
    static ImageTensor from_values(std::size_t d, std::vector<float> values);

    std::size_t size() const noexcept { return d_; }

    float& operator()(std::size_t i, std::size_t j, std::size_t c) {
        return values_[(i * d_ + j) * kChannels + c];
    }
    float operator()(std::size_t i, std::size_t j, std::size_t c) const {
        return values_[(i * d_ + j) * kChannels + c];
    }

    std::span<float> values() noexcept { return values_; }
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t d_ = 0;
    std::vector<float> values_;
};

/// Channel-wise l2 norm of the loss gradient; non-negative.
class SaliencyMap {
public:
    SaliencyMap() = default;
    explicit SaliencyMap(std::size_t d) : plane_(d) {}
    explicit SaliencyMap(Plane<float> plane) : plane_(std::move(plane)) {
        for (float v : plane_.values()) {
            if (!(v >= 0.0f) || !std::isfinite(v)) {
                throw ValidationError("saliency map: entries must be finite and non-negative");
            }
        }
    }

    std::size_t size() const noexcept { return plane_.size(); }
    float operator()(std::size_t i, std::size_t j) const { return plane_(i, j); }
    const Plane<float>& plane() const noexcept { return plane_; }
    double sum() const { return plane_.sum(); }

    friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

private:
    Plane<float> plane_;
};

/// Smoothed, unit-normalized saliency rescaled to carry total `mass`.
class PreparedSaliency {
public:
    static constexpr double kMassTolerance = 1e-6;

    PreparedSaliency() = default;
    PreparedSaliency(Plane<float> plane, double mass) : plane_(std::move(plane)), mass_(mass) {
        if (!(mass >= 0.0 && mass <= 1.0)) throw ValidationError("prepared saliency: mass outside [0,1]");
        for (float v : plane_.values()) {
            if (!(v >= 0.0f)) throw ValidationError("prepared saliency: negative entry");
        }
        if (std::abs(plane_.sum() - mass) > kMassTolerance) {
            throw ValidationError("prepared saliency: entries do not sum to the stated mass");
        }
    }

    std::size_t size() const noexcept { return plane_.size(); }
    float operator()(std::size_t i, std::size_t j) const { return plane_(i, j); }
    const Plane<float>& plane() const noexcept { return plane_; }
    double mass() const noexcept { return mass_; }

private:
    Plane<float> plane_;
    double mass_ = 0.0;
};

/// Per-pixel blend ratio; entries in [0,1]. Kept in double so ratios just below 1 stay below 1.
class MixingMask {
public:
    MixingMask() = default;
    explicit MixingMask(Plane<double> plane) : plane_(std::move(plane)) {
        for (double v : plane_.values()) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("mixing mask: entry outside [0,1]");
        }
    }
    static MixingMask constant(std::size_t d, double value) { return MixingMask(Plane<double>(d, value)); }

    std::size_t size() const noexcept { return plane_.size(); }
    double operator()(std::size_t i, std::size_t j) const { return plane_(i, j); }
    const Plane<double>& plane() const noexcept { return plane_; }

private:
    Plane<double> plane_;
};

/// Probability vector over classes.
class SoftLabel {
public:
    static constexpr double kSumTolerance = 1e-6;

    SoftLabel() = default;
    explicit SoftLabel(std::vector<float> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw ValidationError("soft label: no classes");
        double total = 0.0;
        for (float p : probs_) {
            if (!(p >= 0.0f)) throw ValidationError("soft label: negative entry");
            total += p;
        }
        if (std::abs(total - 1.0) > kSumTolerance) throw ValidationError("soft label: entries do not sum to 1");
    }

    std::size_t classes() const noexcept { return probs_.size(); }
    float operator[](std::size_t k) const { return probs_[k]; }
    std::span<const float> values() const noexcept { return probs_; }

    friend bool operator==(const SoftLabel&, const SoftLabel&) = default;

private:
    std::vector<float> probs_;
};

/// Integer translation (row, column).
struct Offset {
    int di = 0;
    int dj = 0;

    Offset operator-() const { return {-di, -dj}; }
    friend bool operator==(const Offset&, const Offset&) = default;
    friend auto operator<=>(const Offset&, const Offset&) = default;
};

inline bool offset_in_range(Offset tau, std::size_t d) {
    const long limit = static_cast<long>(d) - 1;
    return std::abs(static_cast<long>(tau.di)) <= limit && std::abs(static_cast<long>(tau.dj)) <= limit;
}

inline double mask_mean(const MixingMask& mask) {
    double total = 0.0;
    for (double v : mask.plane().values()) total += v;
    return mask.plane().count() == 0 ? 0.0 : total / static_cast<double>(mask.plane().count());
}

/// Mixed image and label together with the choices that produced them.
class AugmentedSample {
public:
    static constexpr double kGammaTolerance = 1e-6;

    AugmentedSample(ImageTensor image, SoftLabel label, MixingMask mask, Offset offset, double gamma,
                    double lambda, double total_saliency)
        : image_(std::move(image)),
          label_(std::move(label)),
          mask_(std::move(mask)),
          offset_(offset),
          gamma_(gamma),
          lambda_(lambda),
          total_saliency_(total_saliency) {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("augmented sample: gamma outside [0,1]");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("augmented sample: lambda outside [0,1]");
        if (!(total_saliency >= 0.0)) throw ValidationError("augmented sample: negative total saliency");
        if (std::abs(gamma - mask_mean(mask_)) > kGammaTolerance) {
            throw ValidationError("augmented sample: gamma differs from the mask mean");
        }
    }

    const ImageTensor& image() const noexcept { return image_; }
    const SoftLabel& label() const noexcept { return label_; }
    const MixingMask& mask() const noexcept { return mask_; }
    Offset offset() const noexcept { return offset_; }
    double gamma() const noexcept { return gamma_; }
    double lambda() const noexcept { return lambda_; }
    double total_saliency() const noexcept { return total_saliency_; }

private:
    ImageTensor image_;
    SoftLabel label_;
    MixingMask mask_;
    Offset offset_;
    double gamma_;
    double lambda_;
    double total_saliency_;
};

/// Augmentation hyperparameters. Field names match the JSON config keys.
struct SageConfig {
    double sigma2 = 1.0;
    double zeta = 1e-8;
    double u = 0.6;
    double eta = 0.7;
    double search_fraction = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ArgumentError("config: sigma2 must be >= 0");
        if (!(zeta > 0.0)) throw ArgumentError("config: zeta must be > 0");
        if (!(u >= 0.0 && u <= 1.0)) throw ArgumentError("config: u must lie in [0,1]");
        if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("config: eta must lie in [0,1]");
        if (!(search_fraction > 0.0 && search_fraction <= 1.0)) {
            throw ArgumentError("config: search_fraction must lie in (0,1]");
        }
    }
};

inline SoftLabel one_hot(std::size_t class_index, std::size_t num_classes) {
    if (num_classes == 0) throw ArgumentError("one_hot: need at least one class");
    if (class_index >= num_classes) {
        throw ArgumentError("one_hot: class " + std::to_string(class_index) + " out of range for " +
                            std::to_string(num_classes) + " classes");
    }
    std::vector<float> probs(num_classes, 0.0f);
    probs[class_index] = 1.0f;
    return SoftLabel(std::move(probs));
}

/// Checks shape and range of raw height x width x channels data (row-major [i][j][c]).
inline ImageTensor validate_image(std::size_t height, std::size_t width, std::size_t channels,
                                  std::span<const float> raw) {
    if (height != width) {
        throw ValidationError("image: non-square " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (channels != kChannels) throw ValidationError("image: expected 3 channels, got " + std::to_string(channels));
    if (height < 2) throw ValidationError("image: side must be at least 2");
    if (raw.size() != height * width * channels) {
        throw ValidationError("image: expected " + std::to_string(height * width * channels) + " values, got " +
                              std::to_string(raw.size()));
    }
    for (std::size_t idx = 0; idx < raw.size(); ++idx) {
        const float v = raw[idx];
        if (!(v >= 0.0f && v <= 1.0f)) {
            const std::size_t c = idx % channels;
            const std::size_t j = (idx / channels) % width;
            const std::size_t i = idx / (channels * width);
            throw ValidationError("image: value out of [0,1] at (" + std::to_string(i) + "," + std::to_string(j) +
                                  "," + std::to_string(c) + ")");
        }
    }
    return ImageTensor::from_values(height, std::vector<float>(raw.begin(), raw.end()));
}

inline ImageTensor ImageTensor::from_values(std::size_t d, std::vector<float> values) {
    if (d < 2) throw ValidationError("image: side must be at least 2");
    if (values.size() != d * d * kChannels) throw ValidationError("image: wrong value count");
    ImageTensor image;
    image.d_ = d;
    image.values_ = std::move(values);
    return image;
}

}  // namespace sage

#endif  // SAGE_CORE_HPP
