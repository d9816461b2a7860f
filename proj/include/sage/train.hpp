#ifndef SAGE_TRAIN_HPP
#define SAGE_TRAIN_HPP

// Minibatch SGD on the toy classifier with a choice of augmenter. The SAGE path
// reuses the parameter gradients from the saliency backward passes:
// g = eta * g_clean + (1 - eta) * g_augmented.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sage/core.hpp"
#include "sage/dataset.hpp"
#include "sage/mixer.hpp"
#include "sage/model.hpp"
#include "sage/robustness.hpp"
#include "sage/rng.hpp"
#include "sage/saliency.hpp"

namespace sage {

enum class Augmenter { none, mixup, cutmix, sage };

inline std::string_view to_string(Augmenter a) {
    switch (a) {
        case Augmenter::none: return "none";
        case Augmenter::mixup: return "mixup";
        case Augmenter::cutmix: return "cutmix";
        case Augmenter::sage: return "sage";
    }
    return "none";
}

inline std::optional<Augmenter> parse_augmenter(std::string_view name) {
    for (auto a : {Augmenter::none, Augmenter::mixup, Augmenter::cutmix, Augmenter::sage}) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

struct TrainConfig {
    Augmenter augmenter = Augmenter::none;
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    std::size_t hidden = 64;
    SageConfig sage;
    unsigned threads = 1;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_acc = 0.0;
};

struct TrainResult {
    ClassifierState initial;
    ClassifierState model;
    std::vector<EpochRecord> history;
};

namespace detail {

struct BatchOutcome {
    ParamGradient<float> g_clean;
    ParamGradient<float> g_aug;
    double loss = 0.0;
    bool has_clean = false;
    bool has_aug = false;
};

inline BatchOutcome run_batch(const ClassifierState& model, const ToyDataset& data,
                              std::span<const std::size_t> batch, const TrainConfig& cfg, SeededRng& rng) {
    const auto shape = model.shape();
    const std::size_t n = batch.size();
    const std::size_t classes = data.classes();
    BatchOutcome out{ParamGradient<float>::zeros(shape), ParamGradient<float>::zeros(shape)};

    std::vector<SoftLabel> labels;
    labels.reserve(n);
    for (std::size_t idx : batch) labels.push_back(one_hot(data.labels[idx], classes));

    if (cfg.augmenter == Augmenter::none) {
        for (std::size_t k = 0; k < n; ++k) {
            auto g = loss_and_grads(model, data.images[batch[k]], labels[k]);
            out.g_clean += g.param_grad;
            out.loss += g.loss;
        }
        out.has_clean = true;
        out.g_clean *= 1.0f / static_cast<float>(n);
        out.loss /= static_cast<double>(n);
        return out;
    }

    std::vector<std::size_t> partner(n);
    std::iota(partner.begin(), partner.end(), 0);
    std::shuffle(partner.begin(), partner.end(), rng.engine());

    std::vector<SaliencyMap> saliency;
    double clean_loss = 0.0;
    if (cfg.augmenter == Augmenter::sage) {
        saliency.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            auto s = compute_saliency(model, data.images[batch[k]], labels[k]);
            out.g_clean += s.param_grad;
            clean_loss += s.loss;
            saliency.push_back(std::move(s.saliency));
        }
        out.has_clean = true;
        out.g_clean *= 1.0f / static_cast<float>(n);
        clean_loss /= static_cast<double>(n);
    }

    double aug_loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t p = partner[k];
        const auto& x0 = data.images[batch[k]];
        const auto& x1 = data.images[batch[p]];
        auto item_rng = rng.split(k);
        AugmentedSample sample = [&] {
            switch (cfg.augmenter) {
                case Augmenter::mixup:
                    return input_mixup(x0, labels[k], x1, labels[p], item_rng.uniform(0.0, 1.0));
                case Augmenter::cutmix:
                    return cutmix(x0, labels[k], x1, labels[p], item_rng.uniform(0.0, 1.0), item_rng);
                default:
                    return sage_augment(x0, labels[k], x1, labels[p], saliency[k], saliency[p], cfg.sage, item_rng,
                                        cfg.threads);
            }
        }();
        auto g = loss_and_grads(model, sample.image(), sample.label());
        out.g_aug += g.param_grad;
        aug_loss += g.loss;
    }
    out.has_aug = true;
    out.g_aug *= 1.0f / static_cast<float>(n);
    aug_loss /= static_cast<double>(n);

    out.loss = cfg.augmenter == Augmenter::sage ? cfg.sage.eta * clean_loss + (1.0 - cfg.sage.eta) * aug_loss
                                                : aug_loss;
    return out;
}

}  // namespace detail

/// Trains from a seeded random init; deterministic for a fixed seed.
inline TrainResult train(const ToyDataset& train_set, const ToyDataset& test_set, const TrainConfig& cfg,
                         std::uint64_t seed) {
    if (train_set.size() == 0) throw ArgumentError("train: empty dataset");
    if (cfg.batch_size == 0) throw ArgumentError("train: batch size must be positive");
    if (!(cfg.learning_rate > 0.0)) throw ArgumentError("train: learning rate must be > 0");
    if (test_set.size() != 0 &&
        (test_set.image_size() != train_set.image_size() || test_set.classes() != train_set.classes())) {
        throw ArgumentError("train: train and test sets differ in shape");
    }
    cfg.sage.validate();

    const SeededRng root(seed);
    auto init_rng = root.split(0);
    const auto shape = ClassifierState::image_shape(train_set.image_size(), cfg.hidden, train_set.classes());
    TrainResult result{ClassifierState::random(shape, init_rng), {}, {}};
    result.model = result.initial;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto epoch_rng = root.split(epoch);
        std::shuffle(order.begin(), order.end(), epoch_rng.engine());
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            auto batch_rng = epoch_rng.split(batches);
            auto outcome = detail::run_batch(result.model, train_set,
                                             std::span<const std::size_t>(order).subspan(start, end - start), cfg,
                                             batch_rng);
            if (outcome.has_clean && outcome.has_aug) {
                apply_combined_update(result.model, outcome.g_clean, outcome.g_aug, cfg.sage.eta, cfg.learning_rate);
            } else if (outcome.has_clean) {
                apply_combined_update(result.model, outcome.g_clean, outcome.g_clean, 1.0, cfg.learning_rate);
            } else {
                apply_combined_update(result.model, outcome.g_aug, outcome.g_aug, 0.0, cfg.learning_rate);
            }
            loss_sum += outcome.loss;
            ++batches;
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(batches), accuracy(result.model, test_set)});
    }
    return result;
}

}  // namespace sage

#endif  // SAGE_TRAIN_HPP
