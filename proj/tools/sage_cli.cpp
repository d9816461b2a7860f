// Command-line front end: augment, train, eval-robustness, bench, viz.
//
// Exit codes: 0 success, 2 I/O or input-data error, 64 usage error.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sage/sage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

/// Failure that maps to the usage exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json offset_json(sage::Offset tau) { return json::array({tau.di, tau.dj}); }

std::uint64_t env_seed() {
    if (const char* env = std::getenv("SAGE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("SAGE_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

/// Flag wins, then the config file's "seed" key, then SAGE_SEED.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const std::string& config_path) {
    if (flag) return *flag;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (in) {
            try {
                const auto j = json::parse(in);
                if (j.is_object() && j.contains("seed")) return j["seed"].get<std::uint64_t>();
            } catch (const json::exception&) {
                // read_config reports malformed files.
            }
        }
    }
    return env_seed();
}

void write_json(const fs::path& path, const json& j) { sage::io::write_text(path, j.dump(2) + "\n"); }

// ---- shared input handling for augment and viz ----

struct PairInputs {
    std::string image_a, image_b, saliency_a, saliency_b, saliency_source, config_path;
    std::optional<std::size_t> label_a, label_b;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

void add_pair_options(CLI::App* cmd, PairInputs& in) {
    cmd->add_option("--image-a", in.image_a, "first image (PNG)")->required();
    cmd->add_option("--image-b", in.image_b, "second image (PNG), the one that gets shifted")->required();
    cmd->add_option("--saliency-a", in.saliency_a, "saliency of the first image (SALM)");
    cmd->add_option("--saliency-b", in.saliency_b, "saliency of the second image (SALM)");
    cmd->add_option("--saliency-source", in.saliency_source,
                    "'files' (default) or model:PATH to compute gradient saliency from a checkpoint");
    cmd->add_option("--label-a", in.label_a, "class index of the first image (model saliency)");
    cmd->add_option("--label-b", in.label_b, "class index of the second image (model saliency)");
    cmd->add_option("--config", in.config_path, "JSON config with SageConfig keys");
    cmd->add_option("--seed", in.seed, "random seed (default: config seed, then SAGE_SEED)");
    cmd->add_option("--threads", in.threads, "worker threads for the offset search")->check(CLI::PositiveNumber);
}

struct LoadedPair {
    sage::ImageTensor x0, x1;
    sage::SoftLabel y0, y1;
    sage::SaliencyMap s0, s1;
    sage::SageConfig config;
};

LoadedPair load_pair(const PairInputs& in) {
    LoadedPair p;
    p.config = in.config_path.empty() ? sage::SageConfig{} : sage::io::read_config(in.config_path);
    p.config.seed = resolve_seed(in.seed, in.config_path);
    p.x0 = sage::io::read_png(in.image_a);
    p.x1 = sage::io::read_png(in.image_b);
    if (p.x0.size() != p.x1.size()) {
        throw sage::IoError("image size mismatch: " + in.image_a + " is " + std::to_string(p.x0.size()) + ", " +
                            in.image_b + " is " + std::to_string(p.x1.size()));
    }
    const std::size_t d = p.x0.size();

    const std::string model_prefix = "model:";
    if (in.saliency_source.rfind(model_prefix, 0) == 0) {
        const auto model = sage::io::read_checkpoint(in.saliency_source.substr(model_prefix.size()));
        if (model.shape().inputs != d * d * sage::kChannels) {
            throw sage::IoError("checkpoint expects a different image size than " + in.image_a);
        }
        if (!in.label_a || !in.label_b) throw UsageError("--saliency-source model:PATH needs --label-a and --label-b");
        const std::size_t classes = model.shape().classes;
        if (*in.label_a >= classes || *in.label_b >= classes) throw UsageError("label index out of range for model");
        p.y0 = sage::one_hot(*in.label_a, classes);
        p.y1 = sage::one_hot(*in.label_b, classes);
        p.s0 = sage::compute_saliency(model, p.x0, p.y0).saliency;
        p.s1 = sage::compute_saliency(model, p.x1, p.y1).saliency;
    } else {
        if (!in.saliency_source.empty() && in.saliency_source != "files") {
            throw UsageError("unknown --saliency-source '" + in.saliency_source + "'");
        }
        if (in.saliency_a.empty() || in.saliency_b.empty()) {
            throw UsageError("--saliency-a and --saliency-b are required unless --saliency-source model:PATH");
        }
        p.s0 = sage::io::read_salm(in.saliency_a);
        p.s1 = sage::io::read_salm(in.saliency_b);
        if (p.s0.size() != d) throw sage::IoError(in.saliency_a + ": saliency size does not match image size");
        if (p.s1.size() != d) throw sage::IoError(in.saliency_b + ": saliency size does not match image size");
        const std::size_t classes = std::max<std::size_t>({2, in.label_a.value_or(0) + 1, in.label_b.value_or(1) + 1});
        p.y0 = sage::one_hot(in.label_a.value_or(0), classes);
        p.y1 = sage::one_hot(in.label_b.value_or(1), classes);
    }
    return p;
}

json sample_json(const sage::AugmentedSample& s) {
    return {{"tau", offset_json(s.offset())},
            {"gamma", s.gamma()},
            {"lambda", s.lambda()},
            {"total_saliency", s.total_saliency()}};
}

// ---- augment ----

struct AugmentArgs {
    PairInputs pair;
    std::string out_dir;
};

int run_augment(const AugmentArgs& args) {
    auto p = load_pair(args.pair);
    sage::SeededRng rng(p.config.seed);
    const auto sample = sage::sage_augment(p.x0, p.y0, p.x1, p.y1, p.s0, p.s1, p.config, rng, args.pair.threads);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    sage::io::write_png(out / "mixed.png", sample.image());
    sage::io::write_salm(out / "mask.salm", sample.mask().plane());
    write_json(out / "augment.json", sample_json(sample));
    return kExitOk;
}

// ---- train ----

struct TrainArgs {
    std::string augmenter = "none";
    std::size_t epochs = 60;
    std::optional<std::uint64_t> seed;
    double eta = 0.7, u = 0.6, fraction = 0.01, sigma2 = 1.0, zeta = 1e-8, lr = 0.1;
    std::size_t hidden = 64, batch = 32, train_size = 2000, test_size = 500, d = 16, classes = 4;
    std::uint64_t data_seed = 1234;
    unsigned threads = 1;
    std::string csv = "history.csv", checkpoint = "model.sgmd";
};

sage::ToyDataset make_split(std::size_t d, std::size_t classes, std::size_t count, std::uint64_t seed) {
    sage::ToyDatasetParams params;
    params.d = d;
    params.classes = classes;
    params.count = count;
    params.seed = seed;
    return sage::make_toy_dataset(params);
}

int run_train(const TrainArgs& a) {
    const auto augmenter = sage::parse_augmenter(a.augmenter);
    if (!augmenter) throw UsageError("unknown augmenter '" + a.augmenter + "' (none|mixup|cutmix|sage)");
    sage::TrainConfig cfg;
    cfg.augmenter = *augmenter;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.hidden = a.hidden;
    cfg.threads = a.threads;
    cfg.sage.eta = a.eta;
    cfg.sage.u = a.u;
    cfg.sage.search_fraction = a.fraction;
    cfg.sage.sigma2 = a.sigma2;
    cfg.sage.zeta = a.zeta;
    const std::uint64_t seed = a.seed ? *a.seed : env_seed();
    cfg.sage.seed = seed;
    try {
        cfg.sage.validate();
    } catch (const sage::ArgumentError& e) {
        throw UsageError(e.what());
    }

    const auto train_set = make_split(a.d, a.classes, a.train_size, a.data_seed);
    const auto test_set = make_split(a.d, a.classes, a.test_size, a.data_seed + 1);
    const auto result = sage::train(train_set, test_set, cfg, seed);

    std::ostringstream csv;
    csv << "epoch,train_loss,test_acc\n";
    csv.precision(9);
    for (const auto& r : result.history) csv << r.epoch << ',' << r.train_loss << ',' << r.test_acc << '\n';
    sage::io::write_text(a.csv, csv.str());
    sage::io::write_checkpoint(a.checkpoint, result.model);
    return kExitOk;
}

// ---- eval-robustness ----

struct EvalArgs {
    std::string checkpoint;
    std::optional<std::size_t> d, classes;
    std::size_t test_size = 500;
    std::uint64_t data_seed = 1235;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int run_eval(const EvalArgs& a) {
    const auto model = sage::io::read_checkpoint(a.checkpoint);
    const std::size_t classes = a.classes.value_or(model.shape().classes);
    const std::size_t d = a.d.value_or(static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(model.shape().inputs / sage::kChannels)))));
    if (d * d * sage::kChannels != model.shape().inputs || classes != model.shape().classes) {
        throw sage::IoError(a.checkpoint + ": checkpoint does not match dataset (d=" + std::to_string(d) +
                            ", classes=" + std::to_string(classes) + ")");
    }
    const auto test_set = make_split(d, classes, a.test_size, a.data_seed);
    const auto r = sage::evaluate_robustness(model, test_set, a.seed ? *a.seed : env_seed());
    const json report = {{"clean", r.clean}, {"gaussian", r.gaussian}, {"fgsm", r.fgsm}, {"fgm", r.fgm},
                         {"mean", r.mean}};
    if (a.out.empty()) {
        std::cout << report.dump(2) << '\n';
    } else {
        write_json(a.out, report);
    }
    return kExitOk;
}

// ---- bench ----

struct BenchArgs {
    std::size_t d = 32;
    std::size_t reps = 5;
    std::vector<double> fractions{0.01, 0.1, 0.5, 1.0};
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
    std::string out, results;
};

/// Smooth random saliency with a few bumps, deterministic in the rng.
sage::SaliencyMap bench_saliency(std::size_t d, sage::SeededRng& rng) {
    sage::Plane<float> plane(d);
    for (int bump = 0; bump < 3; ++bump) {
        const double ci = rng.uniform(0.0, static_cast<double>(d));
        const double cj = rng.uniform(0.0, static_cast<double>(d));
        const double width = rng.uniform(1.0, static_cast<double>(d) / 4.0 + 1.0);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
                plane(i, j) += static_cast<float>(std::exp(-(di * di + dj * dj) / (2.0 * width * width)));
            }
        }
    }
    return sage::SaliencyMap(std::move(plane));
}

template <typename F>
double median_seconds(std::size_t reps, F&& f) {
    std::vector<double> times;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

int run_bench(const BenchArgs& a) {
    if (a.d < 2) throw UsageError("--d must be at least 2");
    if (a.reps == 0) throw UsageError("--reps must be positive");
    for (double f : a.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw UsageError("fractions must lie in (0,1]");
    }
    const std::uint64_t seed = a.seed ? *a.seed : env_seed();
    sage::SeededRng data_rng(seed);
    const auto s0 = bench_saliency(a.d, data_rng);
    const auto s1 = bench_saliency(a.d, data_rng);
    const auto [p0, p1] = sage::prepare_pair(s0, s1, 0.5, 1.0);
    const double zeta = 1e-8;

    json timing_rows = json::array(), result_rows = json::array();
    for (double f : a.fractions) {
        sage::SearchResult found;
        const double seq = median_seconds(a.reps, [&] {
            sage::SeededRng rng(seed);
            found = sage::search_offset(p0, p1, f, rng, zeta);
        });
        json row = {{"fraction", f}, {"candidates", found.candidates}, {"median_seconds", seq}};
        if (a.threads > 1) {
            row["parallel_median_seconds"] = median_seconds(a.reps, [&] {
                sage::SeededRng rng(seed);
                sage::search_offset_parallel(p0, p1, f, rng, zeta, a.threads);
            });
        }
        timing_rows.push_back(row);
        result_rows.push_back({{"fraction", f},
                               {"candidates", found.candidates},
                               {"tau", offset_json(found.offset)},
                               {"value", found.value}});
    }

    sage::ImageTensor x0(a.d), x1(a.d);
    for (std::size_t k = 0; k < x0.values().size(); ++k) {
        x0.values()[k] = static_cast<float>(data_rng.uniform(0.0, 1.0));
        x1.values()[k] = static_cast<float>(data_rng.uniform(0.0, 1.0));
    }
    const auto y0 = sage::one_hot(0, 2), y1 = sage::one_hot(1, 2);
    sage::SageConfig cfg;
    std::optional<sage::AugmentedSample> sample;
    const double pipeline = median_seconds(a.reps, [&] {
        sage::SeededRng rng(seed);
        sample.emplace(sage::sage_augment(x0, y0, x1, y1, s0, s1, cfg, rng, a.threads));
    });

    const json report = {{"d", a.d},
                         {"reps", a.reps},
                         {"threads", a.threads},
                         {"search", timing_rows},
                         {"sage_augment", {{"median_seconds", pipeline}}}};
    const json results = {{"d", a.d}, {"seed", seed}, {"search", result_rows}, {"sage_augment", sample_json(*sample)}};
    if (a.out.empty()) {
        std::cout << report.dump(2) << '\n';
    } else {
        write_json(a.out, report);
    }
    if (!a.results.empty()) write_json(a.results, results);
    return kExitOk;
}

// ---- viz ----

struct VizArgs {
    PairInputs pair;
    std::string out;
    std::string annotations;
    std::size_t candidates = 6, scale = 4, pad = 2;
    bool sort = false;
};

int run_viz(const VizArgs& a) {
    auto p = load_pair(a.pair);
    sage::SeededRng rng(p.config.seed);
    sage::viz::Options opts{a.candidates, a.scale, a.pad, a.sort};
    const auto result = sage::viz::render(p.x0, p.y0, p.x1, p.y1, p.s0, p.s1, p.config, rng, opts);
    sage::io::write_png_rgb(a.out, result.canvas.width(), result.canvas.height(), result.canvas.rgb());

    json cands = json::array();
    for (std::size_t k = 0; k < result.candidates.size(); ++k) {
        const auto& c = result.candidates[k];
        cands.push_back({{"column", k}, {"tau", offset_json(c.offset)}, {"v", c.value}, {"argmax", c.is_argmax}});
    }
    const json annotations = {{"layout",
                               {{"d", result.layout.d},
                                {"scale", result.layout.scale},
                                {"pad", result.layout.pad},
                                {"rows", result.layout.rows},
                                {"cols", result.layout.cols},
                                {"width", result.layout.width()},
                                {"height", result.layout.height()}}},
                              {"sample", sample_json(result.sample)},
                              {"candidates", cands}};
    write_json(a.annotations.empty() ? a.out + ".json" : a.annotations, annotations);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saliency-guided mixup with optimal rearrangements"};
    app.require_subcommand(1);

    AugmentArgs augment;
    auto* aug_cmd = app.add_subcommand("augment", "mix two images with the saliency-guided rearrangement");
    add_pair_options(aug_cmd, augment.pair);
    aug_cmd->add_option("--out", augment.out_dir, "output directory")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train the toy classifier");
    train_cmd->add_option("--augmenter", train.augmenter, "none|mixup|cutmix|sage");
    train_cmd->add_option("--epochs", train.epochs);
    train_cmd->add_option("--seed", train.seed);
    train_cmd->add_option("--eta", train.eta, "clean-gradient reuse ratio");
    train_cmd->add_option("--u", train.u, "lambda truncation bound");
    train_cmd->add_option("--fraction", train.fraction, "share of offsets searched");
    train_cmd->add_option("--sigma2", train.sigma2, "saliency smoothing variance");
    train_cmd->add_option("--zeta", train.zeta);
    train_cmd->add_option("--lr", train.lr);
    train_cmd->add_option("--hidden", train.hidden)->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", train.batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--train-size", train.train_size)->check(CLI::PositiveNumber);
    train_cmd->add_option("--test-size", train.test_size);
    train_cmd->add_option("--d", train.d, "toy image side");
    train_cmd->add_option("--classes", train.classes)->check(CLI::PositiveNumber);
    train_cmd->add_option("--data-seed", train.data_seed, "train split seed; the test split uses data-seed + 1");
    train_cmd->add_option("--threads", train.threads)->check(CLI::PositiveNumber);
    train_cmd->add_option("--csv", train.csv, "per-epoch history output");
    train_cmd->add_option("--checkpoint", train.checkpoint, "final model output");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval-robustness", "clean, noise and adversarial accuracy of a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--d", eval.d, "dataset image side (default: from checkpoint)");
    eval_cmd->add_option("--classes", eval.classes, "dataset classes (default: from checkpoint)");
    eval_cmd->add_option("--test-size", eval.test_size);
    eval_cmd->add_option("--data-seed", eval.data_seed);
    eval_cmd->add_option("--seed", eval.seed, "noise seed");
    eval_cmd->add_option("--out", eval.out, "report path (default: stdout)");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "time the offset search and the full pipeline");
    bench_cmd->add_option("--d", bench.d);
    bench_cmd->add_option("--reps", bench.reps);
    bench_cmd->add_option("--fractions", bench.fractions)->delimiter(',');
    bench_cmd->add_option("--threads", bench.threads)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", bench.seed);
    bench_cmd->add_option("--out", bench.out, "timing report (default: stdout)");
    bench_cmd->add_option("--results", bench.results, "deterministic search results");

    VizArgs viz;
    auto* viz_cmd = app.add_subcommand("viz", "render the augmentation panel grid");
    add_pair_options(viz_cmd, viz.pair);
    viz_cmd->add_option("--out", viz.out, "output PNG")->required();
    viz_cmd->add_option("--annotations", viz.annotations, "candidate annotations JSON (default: OUT.json)");
    viz_cmd->add_option("--candidates", viz.candidates)->check(CLI::PositiveNumber);
    viz_cmd->add_option("--scale", viz.scale)->check(CLI::PositiveNumber);
    viz_cmd->add_option("--pad", viz.pad);
    viz_cmd->add_flag("--sort", viz.sort, "order candidates by descending total saliency");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (aug_cmd->parsed()) return run_augment(augment);
        if (train_cmd->parsed()) return run_train(train);
        if (eval_cmd->parsed()) return run_eval(eval);
        if (bench_cmd->parsed()) return run_bench(bench);
        if (viz_cmd->parsed()) return run_viz(viz);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const sage::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const sage::ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const sage::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}
