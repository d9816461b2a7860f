// Acceptance harness. Each criterion prints one line:
//   [PASS] <id> <name>: <measurements>
//   [FAIL] <id> <name>: <measurements>
// Usage: sage_acceptance [id ...]   (no ids runs everything; ids are 1..8, 9a, 9b, 10)
// Exit status is non-zero when any selected criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sage/sage.hpp"

using namespace sage;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SaliencyMap random_saliency(std::size_t d, SeededRng& rng) {
    return SaliencyMap(Plane<float>(d, oracle::random_values(d * d, rng)));
}

ImageTensor random_image(std::size_t d, SeededRng& rng) {
    return ImageTensor::from_values(d, oracle::random_values(d * d * 3, rng));
}

Offset random_offset(std::size_t d, SeededRng& rng) {
    const int r = static_cast<int>(d) - 1;
    return {static_cast<int>(rng.index(2 * r + 1)) - r, static_cast<int>(rng.index(2 * r + 1)) - r};
}

std::vector<float> to_vec(const Plane<float>& p) { return {p.values().begin(), p.values().end()}; }

// ---------------------------------------------------------------------------

Verdict translation_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    SeededRng rng(101);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 2 + rng.index(15);
        const auto tau = random_offset(d, rng);
        if (trial % 2 == 0) {
            const auto values = oracle::random_values(d * d * kChannels, rng);
            const auto got = translate(ImageTensor::from_values(d, values), tau);
            const auto want = oracle::translate(values, d, kChannels, tau.di, tau.dj);
            mismatches += !std::equal(want.begin(), want.end(), got.values().begin());
        } else {
            const Plane<float> p(d, oracle::random_values(d * d, rng));
            const auto got = translate(p, tau);
            mismatches += to_vec(got) != oracle::translate(to_vec(p), d, 1, tau.di, tau.dj);
        }
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 5.0, fmt("%zu/1000 mismatches, %.3f s (limit 5 s)", mismatches, elapsed)};
}

Verdict mask_range_and_gamma() {
    SeededRng rng(202);
    double max_entry = 0.0, max_gap = 0.0;
    bool in_range = true;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 2 + rng.index(15);
        SageConfig cfg;
        cfg.search_fraction = rng.uniform(0.01, 1.0);
        cfg.u = rng.uniform(0.0, 1.0);
        SeededRng aug_rng(trial);
        const auto out = sage_augment(random_image(d, rng), one_hot(0, 2), random_image(d, rng), one_hot(1, 2),
                                      random_saliency(d, rng), random_saliency(d, rng), cfg, aug_rng);
        for (double m : out.mask().plane().values()) {
            in_range = in_range && m >= 0.0 && m < 1.0;
            max_entry = std::max(max_entry, m);
        }
        max_gap = std::max(max_gap, std::abs(out.gamma() - mask_mean(out.mask())));
    }
    return {in_range && max_gap <= 1e-6,
            fmt("max mask entry %.17g (< 1 required), max |gamma - mean(M)| %.3g (limit 1e-6)", max_entry, max_gap)};
}

Verdict argmax_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    SeededRng rng(303);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 2 + rng.index(7);
        // Every fourth case uses uniform maps, which are full of exact ties.
        const bool ties = trial % 4 == 0;
        const auto s0 = ties ? SaliencyMap(d) : random_saliency(d, rng);
        const auto s1 = ties ? SaliencyMap(d) : random_saliency(d, rng);
        const auto [p0, p1] = prepare_pair(s0, s1, rng.uniform(0.0, 1.0), rng.uniform(0.0, 2.0));
        SeededRng search_rng(trial);
        const auto found = search_offset(p0, p1, 1.0, search_rng, 1e-8);
        const auto best = oracle::brute_force_argmax(to_vec(p0.plane()), to_vec(p1.plane()), d, 1e-8);
        mismatches += !(found.value == best.value && found.offset == Offset{best.di, best.dj});
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 30.0, fmt("%zu/200 mismatches, %.3f s (limit 30 s)", mismatches, elapsed)};
}

Verdict rearrangement_gain() {
    // Overlapping fixture: both 8x8 maps are salient in the same 3x3 top-left block.
    const std::size_t d = 8;
    Plane<float> block(d);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) block(i, j) = 1.0f;
    }
    const SaliencyMap s(block);
    const auto [p0, p1] = prepare_pair(s, s, 0.5, 1.0);
    SeededRng rng(404);
    const auto over = search_offset(p0, p1, 1.0, rng, 1e-8);
    const double over_origin = total_saliency(p0, p1, {0, 0}, 1e-8);

    // Two-corner fixture: 2x2 maps with all mass in the top-left pixel, lambda = 0.5, no smoothing.
    const SaliencyMap corner(Plane<float>(2, {1, 0, 0, 0}));
    const auto [c0, c1] = prepare_pair(corner, corner, 0.5, 0.0);
    const auto two = search_offset(c0, c1, 1.0, rng, 1e-8);
    const double two_origin = total_saliency(c0, c1, {0, 0}, 1e-8);

    const bool pass = over.value > over_origin && two.value >= 0.95 && two_origin <= 0.55;
    return {pass, fmt("overlap v*=%.6f at (%d,%d) vs v(0,0)=%.6f; two-corner v*=%.6f at (%d,%d), v(0,0)=%.6f",
                      over.value, over.offset.di, over.offset.dj, over_origin, two.value, two.offset.di,
                      two.offset.dj, two_origin)};
}

Verdict mass_bookkeeping() {
    SeededRng rng(505);
    double pair_err = 0.0, smooth_err = 0.0, v_min = 1.0, v_max = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 2 + rng.index(20);
        const double lambda = rng.uniform(0.0, 1.0), sigma2 = rng.uniform(0.0, 3.0);
        // Mix in the all-zero case so the uniform fallback is covered too.
        const auto s0 = trial % 10 == 0 ? SaliencyMap(d) : random_saliency(d, rng);
        const auto s1 = random_saliency(d, rng);
        const auto [p0, p1] = prepare_pair(s0, s1, lambda, sigma2);
        pair_err = std::max({pair_err, std::abs(p0.plane().sum() - lambda), std::abs(p1.plane().sum() - (1 - lambda))});

        const auto unit = l1_normalize(s1);
        smooth_err = std::max(smooth_err, std::abs(gaussian_smooth(unit, sigma2).plane().sum() - unit.plane().sum()));

        for (int k = 0; k < 5; ++k) {
            const double v = total_saliency(p0, p1, random_offset(d, rng), 1e-8);
            v_min = std::min(v_min, v);
            v_max = std::max(v_max, v);
        }
    }
    const bool pass = pair_err <= 1e-6 && smooth_err <= 1e-6 && v_min >= 0.0 && v_max <= 1.0 + 1e-6;
    return {pass, fmt("prepared mass err %.3g, smoothing mass err %.3g (limits 1e-6), v in [%.6f, %.9f]", pair_err,
                      smooth_err, v_min, v_max)};
}

std::vector<double> flatten(const MlpTensors<double>& t) {
    std::vector<double> out;
    t.for_each([&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); });
    return out;
}

MlpTensors<double> unflatten(const MlpShape& shape, const std::vector<double>& flat) {
    auto t = MlpTensors<double>::zeros(shape);
    std::size_t k = 0;
    t.for_each([&](std::vector<double>& v) {
        for (double& x : v) x = flat[k++];
    });
    return t;
}

Verdict gradient_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    SeededRng rng(606);
    const auto shape = Mlp<double>::image_shape(4, 8, 3);
    double worst_input = 0.0, worst_param = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto model = oracle::random_mlp(shape, rng);
        const auto xf = oracle::random_values(shape.inputs, rng);
        const std::vector<double> x(xf.begin(), xf.end());
        const auto label = one_hot(rng.index(3), 3);
        const std::vector<float> y(label.values().begin(), label.values().end());
        const auto r = loss_and_grads(model, std::span<const double>(x), label.values());
        const auto& p = model.params();
        const auto fd_x = oracle::central_differences(
            [&](const std::vector<double>& xi) { return oracle::mlp_loss(p.w1, p.b1, p.w2, p.b2, xi, y); }, x, 1e-3);
        const auto fd_p = oracle::central_differences(
            [&](const std::vector<double>& flat) {
                const auto t = unflatten(shape, flat);
                return oracle::mlp_loss(t.w1, t.b1, t.w2, t.b2, x, y);
            },
            flatten(p), 1e-3);
        worst_input = std::max(worst_input, oracle::max_relative_error(r.input_grad, fd_x));
        worst_param = std::max(worst_param, oracle::max_relative_error(flatten(r.param_grad.tensors), fd_p));
    }
    const double elapsed = seconds_since(t0);
    return {worst_input <= 1e-3 && worst_param <= 1e-3 && elapsed < 10.0,
            fmt("max rel err input %.3g, params %.3g (limit 1e-3), %.3f s (limit 10 s)", worst_input, worst_param,
                elapsed)};
}

Verdict mixup_reduction() {
    // Full search with lambda <= 0.5: for uniform maps the full-overlap offset is then the maximizer,
    // so the mask is flat and the output matches Input Mixup.
    SeededRng rng(707);
    double mask_err = 0.0, image_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 2 + rng.index(15);
        SageConfig cfg;
        cfg.u = 0.5;
        cfg.search_fraction = 1.0;
        const auto x0 = random_image(d, rng), x1 = random_image(d, rng);
        const auto y0 = one_hot(0, 2), y1 = one_hot(1, 2);
        SeededRng aug_rng(trial);
        const auto out = sage_augment(x0, y0, x1, y1, SaliencyMap(d), SaliencyMap(d), cfg, aug_rng);
        for (double m : out.mask().plane().values()) mask_err = std::max(mask_err, std::abs(m - out.lambda()));
        const auto mix = input_mixup(x0, y0, x1, y1, out.lambda());
        for (std::size_t k = 0; k < mix.image().values().size(); ++k) {
            image_err = std::max(image_err,
                                 std::abs(static_cast<double>(out.image().values()[k]) - mix.image().values()[k]));
        }
    }
    return {mask_err <= 1e-4 && image_err <= 1e-4,
            fmt("max |M - lambda| %.3g, max image diff %.3g (limits 1e-4), u = 0.5, fraction = 1", mask_err,
                image_err)};
}

Verdict toy_training() {
    ToyDatasetParams train_params;
    train_params.count = 2000;
    train_params.seed = 1234;
    ToyDatasetParams test_params = train_params;
    test_params.count = 500;
    test_params.seed = 1235;
    const auto train_set = make_toy_dataset(train_params);
    const auto test_set = make_toy_dataset(test_params);

    struct Outcome {
        double accuracy = 0.0, robust_mean = 0.0;
    };
    const std::vector<Augmenter> methods{Augmenter::none, Augmenter::sage, Augmenter::cutmix};
    std::map<Augmenter, std::vector<Outcome>> outcomes;
    std::vector<std::pair<Augmenter, std::future<Outcome>>> jobs;
    const auto workers = std::max(1u, std::thread::hardware_concurrency());
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (auto method : methods) {
            auto job = [&, method, seed] {
                TrainConfig cfg;
                cfg.augmenter = method;
                cfg.epochs = 60;
                const auto r = train(train_set, test_set, cfg, seed);
                const auto report = evaluate_robustness(r.model, test_set, seed);
                return Outcome{report.clean, report.mean};
            };
            jobs.emplace_back(method, std::async(workers > 1 ? std::launch::async : std::launch::deferred, job));
        }
    }
    for (auto& [method, fut] : jobs) outcomes[method].push_back(fut.get());

    auto med = [&](Augmenter m, double Outcome::*field) {
        std::vector<double> v;
        for (const auto& o : outcomes[m]) v.push_back(o.*field);
        return median(v);
    };
    const double acc_none = med(Augmenter::none, &Outcome::accuracy);
    const double acc_sage = med(Augmenter::sage, &Outcome::accuracy);
    const double acc_cut = med(Augmenter::cutmix, &Outcome::accuracy);
    const double rob_none = med(Augmenter::none, &Outcome::robust_mean);
    const double rob_sage = med(Augmenter::sage, &Outcome::robust_mean);
    const double rob_cut = med(Augmenter::cutmix, &Outcome::robust_mean);
    const bool pass = acc_sage >= acc_none - 0.01 && rob_sage >= rob_cut;
    return {pass, fmt("median acc none %.4f sage %.4f cutmix %.4f; median robust mean none %.4f sage %.4f cutmix %.4f",
                      acc_none, acc_sage, acc_cut, rob_none, rob_sage, rob_cut)};
}

struct BenchMaps {
    PreparedSaliency p0, p1;
};

BenchMaps bench_maps() {
    SeededRng rng(909);
    auto [p0, p1] = prepare_pair(random_saliency(32, rng), random_saliency(32, rng), 0.5, 1.0);
    return {std::move(p0), std::move(p1)};
}

template <typename F>
double median_time(int reps, F&& f) {
    std::vector<double> t;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        t.push_back(seconds_since(t0));
    }
    return median(t);
}

Verdict search_speed() {
    const auto maps = bench_maps();
    SearchResult small, full;
    const double t_small = median_time(21, [&] {
        SeededRng rng(1);
        small = search_offset(maps.p0, maps.p1, 0.01, rng, 1e-8);
    });
    const double t_full = median_time(7, [&] {
        SeededRng rng(1);
        full = search_offset(maps.p0, maps.p1, 1.0, rng, 1e-8);
    });
    const bool pass = small.candidates == 40 && full.candidates == 3969 && t_small <= t_full / 20.0;
    return {pass, fmt("candidates %zu vs %zu; median %.3g s vs %.3g s (ratio 1/%.1f, need <= 1/20)", small.candidates,
                      full.candidates, t_small, t_full, t_full / std::max(t_small, 1e-12))};
}

Verdict parallel_speed() {
    const auto maps = bench_maps();
    SearchResult seq, par;
    const double t_seq = median_time(7, [&] {
        SeededRng rng(1);
        seq = search_offset(maps.p0, maps.p1, 1.0, rng, 1e-8);
    });
    const double t_par = median_time(7, [&] {
        SeededRng rng(1);
        par = search_offset_parallel(maps.p0, maps.p1, 1.0, rng, 1e-8, 4);
    });
    const bool identical = seq == par;
    const double speedup = t_seq / std::max(t_par, 1e-12);
    return {identical && speedup >= 2.0,
            fmt("4 threads: speedup %.2fx (need >= 2x), identical results: %s, hardware threads: %u", speedup,
                identical ? "yes" : "no", std::thread::hardware_concurrency())};
}

// ---- criterion 10: CLI determinism ----

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SAGE_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict cli_determinism() {
    const auto dir = fs::temp_directory_path() / "sage_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SeededRng rng(1010);
    for (const char* name : {"a", "b"}) {
        io::write_png(dir / (std::string(name) + ".png"), random_image(16, rng));
        io::write_salm(dir / (std::string(name) + ".salm"), random_saliency(16, rng).plane());
    }
    const std::string pair = "--image-a " + (dir / "a.png").string() + " --image-b " + (dir / "b.png").string() +
                             " --saliency-a " + (dir / "a.salm").string() + " --saliency-b " +
                             (dir / "b.salm").string();

    std::vector<std::string> differing;
    int failures = 0;
    for (const char* run : {"r1", "r2"}) {
        const auto out = dir / run;
        fs::create_directories(out);
        failures += run_cli("augment " + pair + " --seed 17 --threads 1 --out " + (out / "aug").string()) != 0;
        failures += run_cli("train --augmenter sage --epochs 3 --train-size 256 --test-size 64 --seed 17 --threads 1 "
                            "--csv " +
                            (out / "history.csv").string() + " --checkpoint " + (out / "model.sgmd").string()) != 0;
        failures += run_cli("bench --d 16 --reps 1 --seed 17 --threads 1 --out " + (out / "timing.json").string() +
                            " --results " + (out / "results.json").string()) != 0;
    }
    for (const char* f : {"aug/mixed.png", "aug/mask.salm", "aug/augment.json", "history.csv", "model.sgmd",
                          "results.json"}) {
        const auto a = slurp(dir / "r1" / f), b = slurp(dir / "r2" / f);
        if (a.empty() || a != b) differing.push_back(f);
    }
    std::string list;
    for (const auto& f : differing) list += " " + f;
    return {failures == 0 && differing.empty(),
            fmt("%d failed invocations, %zu/6 artifacts differ%s", failures, differing.size(), list.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::pair<std::string, std::function<Verdict()>>>> criteria{
        {"1", {"translation oracle", translation_oracle}},
        {"2", {"mask range and gamma", mask_range_and_gamma}},
        {"3", {"argmax equivalence", argmax_equivalence}},
        {"4", {"rearrangement gain", rearrangement_gain}},
        {"5", {"mass bookkeeping", mass_bookkeeping}},
        {"6", {"gradient checks", gradient_checks}},
        {"7", {"mixup reduction", mixup_reduction}},
        {"8", {"toy training", toy_training}},
        {"9a", {"sampled search speed", search_speed}},
        {"9b", {"parallel search speed", parallel_speed}},
        {"10", {"cli determinism", cli_determinism}},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [id, entry] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
        Verdict v;
        try {
            v = entry.second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %s %s: %s\n", v.pass ? "PASS" : "FAIL", id.c_str(), entry.first.c_str(), v.detail.c_str());
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
