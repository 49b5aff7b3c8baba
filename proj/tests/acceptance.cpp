// Acceptance suite: runs every analytic oracle and engine property at its
// stated tolerance and prints one PASS/FAIL line per criterion. Exit code is
// the number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracle.hpp"
#include "tpd/analysis.hpp"
#include "tpd/dataset.hpp"
#include "tpd/engine.hpp"
#include "tpd/memplan.hpp"
#include "tpd/model.hpp"
#include "tpd/model_json.hpp"
#include "tpd/train.hpp"
#include "tpd/weights.hpp"

using namespace tpd;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%d] %s: %s (%s)\n", n, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

Model baseline() { return build_dronet(FamilyConfig{1.0, true}); }
Model tiny() { return build_dronet(FamilyConfig{0.125, false}); }

fs::path work_dir() {
    fs::path p = fs::temp_directory_path() / "tpd_acceptance";
    fs::create_directories(p);
    return p;
}

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path out_file = work_dir() / ("out_" + std::to_string(counter++) + ".txt");
    std::string cmd = std::string(TPD_CLI_PATH) + " " + args + " > " + out_file.string() +
                      " 2> /dev/null";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out_file, std::ios::binary);
    r.out.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

char detail_buf[512];

void criterion_1_macs() {
    MacReport base = count_macs(baseline());
    MacReport tn = count_macs(tiny());
    bool pass = in_range(base.total / 1e6, 40.3, 41.9) && in_range(tn.total / 1e6, 1.45, 1.55) &&
                tn.per_layer.at("conv1") == 1000000;
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "baseline %.3f MMAC, tiny %.4f MMAC, tiny conv1 %lld MAC", base.total / 1e6,
                  tn.total / 1e6, tn.per_layer.at("conv1"));
    report(1, "MAC oracle", pass, detail_buf);
}

void criterion_2_size() {
    SizeReport base = count_params(baseline(), 1);
    SizeReport tn = count_params(tiny(), 1);
    ModelComparison cmp = compare_models(baseline(), tiny());
    bool pass = in_range(base.total_bytes / 1000.0, 314, 326) &&
                in_range(tn.total_bytes / 1000.0, 6.2, 6.6) && cmp.size_ratio >= 49.0 &&
                in_range(cmp.mac_ratio, 26.0, 28.5);
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "baseline %.1f kB, tiny %.3f kB, size ratio %.2f, mac ratio %.2f",
                  base.total_bytes / 1000.0, tn.total_bytes / 1000.0, cmp.size_ratio,
                  cmp.mac_ratio);
    report(2, "size oracle", pass, detail_buf);
}

void criterion_3_allocators() {
    MemoryPlan inc_b = plan_incremental(baseline());
    MemoryPlan inc_t = plan_incremental(tiny());
    MemoryPlan dyn_b = plan_dynamic(baseline());
    MemoryPlan dyn_t = plan_dynamic(tiny());
    auto overlap = bypass_overlap_report(build_dronet(FamilyConfig{0.125, true}));
    long long max_overlap = 0;
    for (const auto& [block, bytes] : overlap) max_overlap = std::max(max_overlap, bytes);

    bool pass = in_range(inc_b.peak_bytes / 1000.0, 850, 890) &&
                in_range(inc_t.peak_bytes / 1000.0, 103, 107) &&
                in_range(dyn_b.peak_bytes / 1000.0, 392, 408) &&
                dyn_b.schedule[static_cast<size_t>(dyn_b.peak_step)] == "pool" &&
                in_range(dyn_t.peak_bytes / 1000.0, 79.5, 80.7) &&
                dyn_t.schedule[static_cast<size_t>(dyn_t.peak_step)] == "conv1" &&
                max_overlap == 10000;
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "incremental %.1f/%.1f kB, dynamic %.1f@%s / %.3f@%s kB, overlap %lld B",
                  inc_b.peak_bytes / 1000.0, inc_t.peak_bytes / 1000.0, dyn_b.peak_bytes / 1000.0,
                  dyn_b.schedule[static_cast<size_t>(dyn_b.peak_step)].c_str(),
                  dyn_t.peak_bytes / 1000.0,
                  dyn_t.schedule[static_cast<size_t>(dyn_t.peak_step)].c_str(), max_overlap);
    report(3, "allocator oracles", pass, detail_buf);
}

void criterion_4_per_gamma_deltas() {
    Model base = baseline();
    bool pass = true;
    std::ostringstream detail;
    for (double g : {0.125, 0.25, 0.5}) {
        ModelComparison c = compare_models(base, build_dronet(FamilyConfig{g, true}));
        const double kb = c.size_delta_bytes / 1000.0;
        const double mmac = c.mac_delta / 1e6;
        pass = pass && in_range(kb, 230, 320) && in_range(mmac, 28, 40);
        char seg[96];
        std::snprintf(seg, sizeof(seg), "g=%.3f: %.1f kB %.1f MMAC; ", g, kb, mmac);
        detail << seg;
    }
    report(4, "per-gamma channel-scaling savings", pass, detail.str());
}

void criterion_5_runtime_estimator() {
    const double macs = static_cast<double>(count_macs(tiny()).total);
    RuntimeCalibration eff{0.733, 100e6, 0.034};
    RuntimeEstimate e1 = estimate_runtime(macs, eff);
    // max-performance configuration: the measured 0.63 mJ over 6.3 ms implies
    // 100 mW average power at 175 MHz
    RuntimeCalibration maxperf{0.733, 175e6, 0.100};
    RuntimeEstimate e2 = estimate_runtime(macs, maxperf);

    bool pass = in_range(e1.latency_s * 1e3, 11.3 * 0.95, 11.3 * 1.05) &&
                in_range(e1.energy_j * 1e3, 0.38 * 0.90, 0.38 * 1.10) &&
                in_range(e2.latency_s * 1e3, 6.3 * 0.95, 6.3 * 1.05) &&
                in_range(e2.energy_j * 1e3, 0.63 * 0.90, 0.63 * 1.10);
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "100MHz: %.2f ms %.3f mJ; 175MHz: %.2f ms %.3f mJ", e1.latency_s * 1e3,
                  e1.energy_j * 1e3, e2.latency_s * 1e3, e2.energy_j * 1e3);
    report(5, "runtime estimator", pass, detail_buf);
}

void criterion_6_engine_properties() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::ostringstream why;

    // forward vs double-precision naive-convolution oracle, 50 random models
    Rng rng(1001);
    double worst_fwd = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Model m = oracle::random_small_model(rng);
        WeightSet ws = oracle::healthy_weights(m, rng.bits());
        Executor exec(m, ws);
        Tensor img = oracle::random_image(m.input_shape, rng);
        Prediction p = exec.forward(img);
        auto wd = oracle::to_double(ws);
        oracle::DoubleForward fwd(m, wd);
        oracle::Outputs o = fwd.run(oracle::to_double_image(img));
        for (auto [a, b] : {std::pair<double, double>{p.steering, o.steering},
                            {p.collision_logit, o.logit}}) {
            const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
            worst_fwd = std::max(worst_fwd, std::fabs(a - b) / denom);
        }
    }
    if (worst_fwd >= 1e-5) {
        pass = false;
        why << "forward oracle deviation " << worst_fwd << "; ";
    }

    // analytic vs central finite differences on 10 scaled-down models
    double worst_fd = 0;
    int fd_models = 0;
    Rng frng(1002);
    while (fd_models < 10) {
        Model m = oracle::random_small_model(frng);
        WeightSet ws = init_weights(m, frng.bits());
        Executor exec(m, ws);
        LossConfig cfg;
        cfg.total_epochs = 20;
        cfg.hard_mining.start_fraction = 1.0;
        cfg.hard_mining.end_fraction = 1.0;
        const int epoch = 16;
        const int bn = 2;
        std::vector<Tensor> images;
        std::vector<TargetLabel> targets;
        std::vector<Prediction> preds;
        std::vector<Executor::Cache> caches(bn);
        for (int i = 0; i < bn; ++i) {
            images.push_back(oracle::random_image(m.input_shape, frng));
            targets.push_back({static_cast<float>(frng.uniform(-1.0, 1.0)),
                               frng.bernoulli(0.5) ? 1 : 0});
            preds.push_back(exec.forward(images.back(), &caches[static_cast<size_t>(i)]));
        }
        LossBreakdown lb = loss(preds, targets, epoch, cfg);
        LossGradients lg = loss_gradients(preds, targets, epoch, cfg, lb);
        Gradients grads;
        for (int i = 0; i < bn; ++i)
            exec.backward(caches[static_cast<size_t>(i)], lg.d_steering[static_cast<size_t>(i)],
                          lg.d_logit[static_cast<size_t>(i)], grads);
        auto wd = oracle::to_double(ws);
        int probes = 0;
        for (const auto& [name, g] : grads.acc) {
            for (int p = 0; p < 3; ++p) {
                const size_t j = static_cast<size_t>(frng.below(static_cast<int>(g.size())));
                const auto fd = oracle::central_diff(m, wd, name, j, 1e-3, images, targets,
                                                     lb.beta, lb.selected_mse, lb.selected_bce);
                if (!fd.smooth) continue;
                if (std::max(std::fabs(fd.value), std::fabs(g[j])) < 1e-6) continue;
                worst_fd = std::max(worst_fd, std::fabs(g[j] - fd.value) /
                                                  std::max(std::fabs(fd.value), std::fabs(g[j])));
                ++probes;
            }
        }
        if (probes > 0) ++fd_models;
    }
    if (worst_fd >= 1e-3) {
        pass = false;
        why << "gradient FD deviation " << worst_fd << "; ";
    }

    // beta schedule: zero for the first 10 epochs, monotone, capped at beta_max
    LossConfig bcfg;
    bcfg.total_epochs = 100;
    double prev = -1;
    for (int e = 1; e <= 100; ++e) {
        const double b = beta_schedule(e, bcfg);
        if (e <= 10 && b != 0.0) pass = false;
        if (b < prev) pass = false;
        prev = b;
    }
    if (std::fabs(beta_schedule(100, bcfg) - bcfg.beta_max) > 1e-12) pass = false;

    // top-k mining subset property on 1000 random loss vectors
    Rng mrng(1003);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + mrng.below(50);
        std::vector<double> losses(static_cast<size_t>(n));
        for (auto& l : losses) l = mrng.uniform();
        const int k = 1 + mrng.below(n);
        auto sel = hard_mine_topk(losses, k);
        if (static_cast<int>(sel.size()) != k) pass = false;
        std::vector<bool> in(losses.size(), false);
        for (int i : sel) in[static_cast<size_t>(i)] = true;
        double min_sel = 1e18, max_out = -1e18;
        for (size_t i = 0; i < losses.size(); ++i)
            if (in[i])
                min_sel = std::min(min_sel, losses[i]);
            else
                max_out = std::max(max_out, losses[i]);
        if (k < n && min_sel < max_out) pass = false;
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "fwd dev %.2e, fd dev %.2e, beta+mining properties, %.1f s", worst_fwd,
                  worst_fd, secs);
    report(6, "engine correctness", pass && secs < 120, detail_buf);
}

void criterion_7_sparsity() {
    bool pass = true;

    ActivationTrace fix;
    fix.entries.push_back({"all_fire", 4, 5, {1, 9, 3, 7}});
    fix.entries.push_back({"quarter", 4, 5, {5, 0, 2, 9}});
    fix.entries.push_back({"dead", 3, 5, {0, 0, 0}});
    auto pct = structural_sparsity(fix);
    pass = pass && pct.at("all_fire") == 0.0 && pct.at("quarter") == 25.0 &&
           pct.at("dead") == 100.0;

    // capture vs post-hoc counting over dumped activations, 10 samples
    FamilyConfig cfg;
    cfg.gamma = 0.25;
    cfg.with_bypass = true;
    cfg.input_shape = {1, 32, 32};
    cfg.base_channels = 8;
    Model m = build_dronet(cfg);
    WeightSet ws = init_weights(m, 55);
    Executor exec(m, ws);
    TraceAccumulator acc(m);
    auto ids = traced_layer_ids(m);
    std::map<std::string, std::vector<uint64_t>> posthoc;
    for (const auto& id : ids)
        posthoc[id].assign(static_cast<size_t>(m.shapes.at(id).channels), 0);
    Rng rng(56);
    for (int s = 0; s < 10; ++s) {
        Tensor img = oracle::random_image(m.input_shape, rng);
        Executor::Cache cache;
        exec.forward(img, &cache, &acc);
        for (const auto& id : ids) {
            const Tensor& t = cache.outs[static_cast<size_t>(m.index_of(id))];
            const size_t hw = static_cast<size_t>(t.h) * t.w;
            for (int c = 0; c < t.c; ++c)
                for (size_t i = 0; i < hw; ++i)
                    if (t.v[static_cast<size_t>(c) * hw + i] > 0.0f)
                        ++posthoc[id][static_cast<size_t>(c)];
        }
    }
    ActivationTrace trace = acc.finish();
    for (const auto& e : trace.entries) {
        if (e.samples_seen != 10) pass = false;
        if (e.positive_counts != posthoc.at(e.id)) pass = false;
    }
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "fixtures 0/25/100%%, capture==post-hoc on %zu traced layers", ids.size());
    report(7, "sparsity analyzer exactness", pass, detail_buf);
}

void criterion_8_overfitting_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    auto data = synth_dataset(200, 7, 64);

    TrainOptions opt;
    opt.epochs = 30;
    opt.lr = 1e-2;
    opt.batch_size = 32;
    opt.seed = 1;

    FamilyConfig big_cfg;
    big_cfg.gamma = 1.0;
    big_cfg.with_bypass = true;
    big_cfg.input_shape = {1, 64, 64};
    Model big = build_dronet(big_cfg);
    TrainResult rb = train_toy(big, init_weights(big, 1), data, opt);

    FamilyConfig tiny_cfg;
    tiny_cfg.gamma = 0.125;
    tiny_cfg.with_bypass = false;
    tiny_cfg.input_shape = {1, 64, 64};
    Model tn = build_dronet(tiny_cfg);
    TrainResult rt = train_toy(tn, init_weights(tn, 1), data, opt);

    const auto& lb = rb.curves.epochs.back();
    const auto& lt = rt.curves.epochs.back();
    const double gap_big = lb.val_bce - lb.train_bce;
    const double gap_tiny = lt.val_bce - lt.train_bce;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool pass = gap_big >= gap_tiny && secs < 300;
    std::snprintf(detail_buf, sizeof(detail_buf),
                  "BCE gap gamma=1: %.4f (val %.4f/train %.4f) >= gamma=0.125: %.4f "
                  "(val %.4f/train %.4f), %.0f s",
                  gap_big, lb.val_bce, lb.train_bce, gap_tiny, lt.val_bce, lt.train_bce, secs);
    report(8, "qualitative overfitting replication", pass, detail_buf);
}

void criterion_9_determinism() {
    bool pass = true;
    std::ostringstream why;
    fs::path dir = work_dir();

    // serialization round-trips bit-exactly
    Model m = baseline();
    fs::path m1 = dir / "m1.json", m2 = dir / "m2.json";
    save_model(m, m1.string());
    save_model(load_model(m1.string()), m2.string());
    if (slurp(m1) != slurp(m2)) {
        pass = false;
        why << "model round-trip differs; ";
    }
    WeightSet ws = init_weights(tiny(), 77);
    fs::path w1 = dir / "w1.tpdw", w2 = dir / "w2.tpdw";
    save_weights(ws, w1.string());
    save_weights(load_weights(w1.string()), w2.string());
    if (slurp(w1) != slurp(w2)) {
        pass = false;
        why << "weight round-trip differs; ";
    }

    // CLI byte-identity across two runs with the same seed
    fs::path cfg_file = dir / "train_det.json";
    fs::path curves_a = dir / "ca.csv", weights_a = dir / "wa.tpdw";
    {
        nlohmann::json cfg;
        cfg["model"] = {{"gamma", 0.125}, {"bypass", false}, {"input_size", 32}};
        cfg["dataset"] = {{"synth", {{"n", 30}, {"seed", 5}, {"image_size", 32}}}};
        cfg["epochs"] = 3;
        cfg["lr"] = 0.01;
        cfg["batch_size"] = 8;
        cfg["seed"] = 42;
        cfg["loss"] = {{"beta_start_epoch", 1}};
        cfg["outputs"] = {{"curves", curves_a.string()}, {"weights", weights_a.string()}};
        std::ofstream f(cfg_file);
        f << cfg.dump(2);
    }

    std::vector<std::string> cmds = {
        "describe --gamma 1",
        "macs --gamma 0.125 --no-bypass",
        "size --gamma 0.5",
        "memplan --gamma 1 --allocator dynamic --weights streamed",
        "memplan --gamma 0.125 --no-bypass --allocator incremental",
        "estimate --macs 1.5e6 --cycles-per-mac 0.733 --clock 100e6 --power 0.034",
        "scale --gamma 1 --to 0.25",
        "prune --gamma 0.25",
        "train " + cfg_file.string(),
    };
    for (const auto& c : cmds) {
        RunResult a = run_cli(c);
        std::string curves_first, weights_first;
        if (c.rfind("train", 0) == 0) {
            curves_first = slurp(curves_a);
            weights_first = slurp(weights_a);
        }
        RunResult b = run_cli(c);
        if (a.code != 0 || b.code != 0 || a.out != b.out) {
            pass = false;
            why << "non-deterministic or failing: " << c << "; ";
        }
        if (c.rfind("train", 0) == 0) {
            if (curves_first != slurp(curves_a) || weights_first != slurp(weights_a)) {
                pass = false;
                why << "train artifacts differ across runs; ";
            }
        }
    }
    report(9, "determinism", pass, pass ? "serialization + 9 commands byte-identical" : why.str());
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1_macs();
    criterion_2_size();
    criterion_3_allocators();
    criterion_4_per_gamma_deltas();
    criterion_5_runtime_estimator();
    criterion_6_engine_properties();
    criterion_7_sparsity();
    criterion_8_overfitting_direction();
    criterion_9_determinism();
    if (g_failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures;
}
