#ifndef SAGE_MODEL_HPP
#define SAGE_MODEL_HPP

// Two-layer perceptron (tanh hidden layer, softmax output) with hand-written
// backpropagation. Templated on the scalar so gradient checks can run in double
// while training runs in float.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sage/core.hpp"
#include "sage/rng.hpp"

namespace sage {

struct MlpShape {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;

    std::size_t parameter_count() const { return hidden * inputs + hidden + classes * hidden + classes; }
    friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Weights and biases. w1 is hidden x inputs, w2 is classes x hidden, both row-major.
template <std::floating_point T>
struct MlpTensors {
    std::vector<T> w1, b1, w2, b2;

    static MlpTensors zeros(const MlpShape& shape) {
        return {std::vector<T>(shape.hidden * shape.inputs, T{0}), std::vector<T>(shape.hidden, T{0}),
                std::vector<T>(shape.classes * shape.hidden, T{0}), std::vector<T>(shape.classes, T{0})};
    }

    /// Visits the four tensors in checkpoint order.
    template <typename F>
    void for_each(F&& f) {
        f(w1);
        f(b1);
        f(w2);
        f(b2);
    }
    template <typename F>
    void for_each(F&& f) const {
        f(w1);
        f(b1);
        f(w2);
        f(b2);
    }

    friend bool operator==(const MlpTensors&, const MlpTensors&) = default;
};

/// Gradient of the loss with respect to every parameter; same layout as the model.
template <std::floating_point T>
struct ParamGradient {
    MlpTensors<T> tensors;

    static ParamGradient zeros(const MlpShape& shape) { return {MlpTensors<T>::zeros(shape)}; }

    ParamGradient& operator+=(const ParamGradient& other) {
        auto add = [](std::vector<T>& dst, const std::vector<T>& src) {
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        };
        add(tensors.w1, other.tensors.w1);
        add(tensors.b1, other.tensors.b1);
        add(tensors.w2, other.tensors.w2);
        add(tensors.b2, other.tensors.b2);
        return *this;
    }

    ParamGradient& operator*=(T factor) {
        tensors.for_each([factor](std::vector<T>& v) {
            for (T& x : v) x *= factor;
        });
        return *this;
    }
};

template <std::floating_point T>
class Mlp {
public:
    Mlp() = default;
    Mlp(MlpShape shape, MlpTensors<T> params) : shape_(shape), params_(std::move(params)) { check(); }

    /// All parameters zero: uniform predictions.
    static Mlp zeros(MlpShape shape) { return Mlp(shape, MlpTensors<T>::zeros(shape)); }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    static Mlp random(MlpShape shape, SeededRng& rng) {
        auto params = MlpTensors<T>::zeros(shape);
        const double a1 = 1.0 / std::sqrt(static_cast<double>(shape.inputs));
        const double a2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
        for (T& w : params.w1) w = static_cast<T>(rng.uniform(-a1, a1));
        for (T& w : params.w2) w = static_cast<T>(rng.uniform(-a2, a2));
        return Mlp(shape, std::move(params));
    }

    /// Model that reads d x d x 3 images.
    static MlpShape image_shape(std::size_t d, std::size_t hidden, std::size_t classes) {
        return {d * d * kChannels, hidden, classes};
    }

    const MlpShape& shape() const noexcept { return shape_; }
    const MlpTensors<T>& params() const noexcept { return params_; }
    MlpTensors<T>& params() noexcept { return params_; }

    template <std::floating_point U>
    Mlp<U> cast() const {
        MlpTensors<U> out;
        auto conv = [](const std::vector<T>& src) { return std::vector<U>(src.begin(), src.end()); };
        out.w1 = conv(params_.w1);
        out.b1 = conv(params_.b1);
        out.w2 = conv(params_.w2);
        out.b2 = conv(params_.b2);
        return Mlp<U>(shape_, std::move(out));
    }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    void check() const {
        if (shape_.inputs == 0 || shape_.hidden == 0 || shape_.classes == 0) {
            throw ArgumentError("mlp: dimensions must be positive");
        }
        if (params_.w1.size() != shape_.hidden * shape_.inputs || params_.b1.size() != shape_.hidden ||
            params_.w2.size() != shape_.classes * shape_.hidden || params_.b2.size() != shape_.classes) {
            throw ArgumentError("mlp: parameter sizes do not match shape");
        }
    }

    MlpShape shape_;
    MlpTensors<T> params_;
};

using ClassifierState = Mlp<float>;

template <std::floating_point T>
struct LossAndGrads {
    T loss;
    std::vector<T> input_grad;
    ParamGradient<T> param_grad;
};

namespace detail {

template <std::floating_point T, typename In>
void hidden_activations(const Mlp<T>& model, std::span<const In> input, std::vector<T>& hidden) {
    const auto& shape = model.shape();
    const auto& p = model.params();
    hidden.assign(shape.hidden, T{0});
    for (std::size_t h = 0; h < shape.hidden; ++h) {
        const T* row = p.w1.data() + h * shape.inputs;
        T acc = p.b1[h];
        for (std::size_t k = 0; k < shape.inputs; ++k) acc += row[k] * static_cast<T>(input[k]);
        hidden[h] = std::tanh(acc);
    }
}

template <std::floating_point T>
void output_probabilities(const Mlp<T>& model, const std::vector<T>& hidden, std::vector<T>& probs) {
    const auto& shape = model.shape();
    const auto& p = model.params();
    probs.assign(shape.classes, T{0});
    for (std::size_t c = 0; c < shape.classes; ++c) {
        const T* row = p.w2.data() + c * shape.hidden;
        T acc = p.b2[c];
        for (std::size_t h = 0; h < shape.hidden; ++h) acc += row[h] * hidden[h];
        probs[c] = acc;
    }
    const T peak = *std::max_element(probs.begin(), probs.end());
    T total{0};
    for (T& z : probs) {
        z = std::exp(z - peak);
        total += z;
    }
    for (T& z : probs) z /= total;
}

template <typename In>
void check_input(const MlpShape& shape, std::span<const In> input) {
    if (input.size() != shape.inputs) {
        throw ArgumentError("mlp: input has " + std::to_string(input.size()) + " entries, model expects " +
                            std::to_string(shape.inputs));
    }
}

}  // namespace detail

/// Softmax class probabilities.
template <std::floating_point T, typename In>
std::vector<T> forward(const Mlp<T>& model, std::span<const In> input) {
    detail::check_input(model.shape(), input);
    std::vector<T> hidden, probs;
    detail::hidden_activations(model, input, hidden);
    detail::output_probabilities(model, hidden, probs);
    return probs;
}

template <std::floating_point T>
std::vector<T> forward(const Mlp<T>& model, const ImageTensor& image) {
    return forward(model, image.values());
}

template <std::floating_point T>
std::size_t predict(const Mlp<T>& model, const ImageTensor& image) {
    const auto probs = forward(model, image);
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

/// Cross-entropy against a (possibly soft) label plus one backward pass giving
/// both the input gradient and the parameter gradient.
template <std::floating_point T, typename In>
LossAndGrads<T> loss_and_grads(const Mlp<T>& model, std::span<const In> input, std::span<const float> label) {
    const auto& shape = model.shape();
    const auto& p = model.params();
    detail::check_input(shape, input);
    if (label.size() != shape.classes) {
        throw ArgumentError("mlp: label has " + std::to_string(label.size()) + " classes, model has " +
                            std::to_string(shape.classes));
    }

    std::vector<T> hidden, probs;
    detail::hidden_activations(model, input, hidden);
    detail::output_probabilities(model, hidden, probs);

    LossAndGrads<T> out{T{0}, std::vector<T>(shape.inputs, T{0}), ParamGradient<T>::zeros(shape)};
    auto& g = out.param_grad.tensors;

    // dL/dlogits = p - y for softmax + cross-entropy with a normalized target.
    std::vector<T> dlogits(shape.classes);
    for (std::size_t c = 0; c < shape.classes; ++c) {
        const T y = static_cast<T>(label[c]);
        if (y > T{0}) out.loss -= y * std::log(std::max(probs[c], std::numeric_limits<T>::min()));
        dlogits[c] = probs[c] - y;
    }

    std::vector<T> dhidden(shape.hidden, T{0});
    for (std::size_t c = 0; c < shape.classes; ++c) {
        g.b2[c] = dlogits[c];
        const T* wrow = p.w2.data() + c * shape.hidden;
        T* grow = g.w2.data() + c * shape.hidden;
        for (std::size_t h = 0; h < shape.hidden; ++h) {
            grow[h] = dlogits[c] * hidden[h];
            dhidden[h] += dlogits[c] * wrow[h];
        }
    }

    for (std::size_t h = 0; h < shape.hidden; ++h) {
        const T dpre = dhidden[h] * (T{1} - hidden[h] * hidden[h]);
        g.b1[h] = dpre;
        if (dpre == T{0}) continue;
        const T* wrow = p.w1.data() + h * shape.inputs;
        T* grow = g.w1.data() + h * shape.inputs;
        for (std::size_t k = 0; k < shape.inputs; ++k) {
            grow[k] = dpre * static_cast<T>(input[k]);
            out.input_grad[k] += dpre * wrow[k];
        }
    }
    return out;
}

template <std::floating_point T>
LossAndGrads<T> loss_and_grads(const Mlp<T>& model, const ImageTensor& image, const SoftLabel& label) {
    return loss_and_grads(model, image.values(), label.values());
}

/// In place: params -= lr * (eta * g_s + (1 - eta) * g_a).
template <std::floating_point T>
void apply_combined_update(Mlp<T>& model, const ParamGradient<T>& g_s, const ParamGradient<T>& g_a, double eta,
                           double learning_rate) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("combined_update: eta must lie in [0,1]");
    if (!(learning_rate > 0.0)) throw ArgumentError("combined_update: learning rate must be > 0");
    const T ws = static_cast<T>(learning_rate * eta);
    const T wa = static_cast<T>(learning_rate * (1.0 - eta));
    auto step = [&](std::vector<T>& dst, const std::vector<T>& gs, const std::vector<T>& ga) {
        if (gs.size() != dst.size() || ga.size() != dst.size()) {
            throw ArgumentError("combined_update: gradient shape does not match model");
        }
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= ws * gs[k] + wa * ga[k];
    };
    auto& p = model.params();
    step(p.w1, g_s.tensors.w1, g_a.tensors.w1);
    step(p.b1, g_s.tensors.b1, g_a.tensors.b1);
    step(p.w2, g_s.tensors.w2, g_a.tensors.w2);
    step(p.b2, g_s.tensors.b2, g_a.tensors.b2);
}

template <std::floating_point T>
Mlp<T> combined_update(Mlp<T> model, const ParamGradient<T>& g_s, const ParamGradient<T>& g_a, double eta,
                       double learning_rate) {
    apply_combined_update(model, g_s, g_a, eta, learning_rate);
    return model;
}

}  // namespace sage

#endif  // SAGE_MODEL_HPP
