// tpd: model family construction, squeezing transforms, MAC/size/memory
// analysis, sparsity reports and a reference train/infer engine, exposed as
// scriptable subcommands. Reports go to stdout (JSON by default); all
// diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 data/format,
// 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpd/analysis.hpp"
#include "tpd/dataset.hpp"
#include "tpd/engine.hpp"
#include "tpd/errors.hpp"
#include "tpd/memplan.hpp"
#include "tpd/model.hpp"
#include "tpd/model_json.hpp"
#include "tpd/train.hpp"
#include "tpd/trace.hpp"
#include "tpd/weights.hpp"

using nlohmann::json;
using namespace tpd;

namespace {

double round_kb(long long bytes) {
    return std::round(static_cast<double>(bytes) / 1000.0 * 10.0) / 10.0;
}

// Model source shared by most subcommands: either an explicit file or the
// family shorthand (--gamma/--bypass cover every model in the study).
struct ModelSource {
    std::string file;
    double gamma = 1.0;
    bool bypass = true;
    int input_size = 200;
    int base_channels = 32;
    bool gamma_set = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", file, "model JSON file");
        cmd->add_option("--gamma", gamma, "family width multiplier (0.125, 0.25, 0.5, 1)")
            ->each([this](const std::string&) { gamma_set = true; });
        cmd->add_flag("--bypass,!--no-bypass", bypass, "keep/remove bypass branches");
        cmd->add_option("--input-size", input_size, "square input side in pixels");
        cmd->add_option("--base-channels", base_channels, "channels of the gamma=1 first conv");
    }

    Model resolve() const {
        if (!file.empty()) return load_model(file);
        FamilyConfig cfg;
        cfg.gamma = gamma;
        cfg.with_bypass = bypass;
        cfg.input_shape = {1, input_size, input_size};
        cfg.base_channels = base_channels;
        return build_dronet(cfg);
    }
};

long long parse_bytes(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty byte count");
    char suffix = s.back();
    double mult = 1;
    std::string digits = s;
    if (suffix == 'k' || suffix == 'K') {
        mult = 1e3;
        digits.pop_back();
    } else if (suffix == 'M') {
        mult = 1e6;
        digits.pop_back();
    }
    return static_cast<long long>(std::llround(std::stod(digits) * mult));
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

json shape_json(const TensorShape& s) { return json::array({s.channels, s.height, s.width}); }

void cmd_describe(const ModelSource& src, const std::string& format) {
    Model m = src.resolve();
    MacReport macs = count_macs(m);
    SizeReport size = count_params(m, 1);

    if (format == "json") {
        json layers = json::array();
        for (const auto& l : m.layers) {
            json jl;
            jl["id"] = l.id;
            jl["kind"] = to_string(l.kind);
            jl["out_shape"] = shape_json(m.shapes.at(l.id));
            jl["params"] = size.per_layer_params.count(l.id) ? size.per_layer_params.at(l.id) : 0;
            jl["macs"] = macs.per_layer.count(l.id) ? macs.per_layer.at(l.id) : 0;
            layers.push_back(jl);
        }
        json out;
        out["layers"] = layers;
        out["total_params"] = size.total_params;
        out["total_bytes"] = size.total_bytes;
        out["total_kb"] = round_kb(size.total_bytes);
        out["total_macs"] = macs.total;
        out["total_mmac"] = std::round(static_cast<double>(macs.total) / 1e6 * 100.0) / 100.0;
        emit(out);
        return;
    }

    char row[160];
    std::printf("%-12s %-16s %-14s %10s %12s\n", "id", "kind", "out-shape", "params", "MACs");
    for (const auto& l : m.layers) {
        const TensorShape& s = m.shapes.at(l.id);
        std::snprintf(row, sizeof(row), "%dx%dx%d", s.channels, s.height, s.width);
        long long p = size.per_layer_params.count(l.id) ? size.per_layer_params.at(l.id) : 0;
        long long mc = macs.per_layer.count(l.id) ? macs.per_layer.at(l.id) : 0;
        std::printf("%-12s %-16s %-14s %10lld %12lld\n", l.id.c_str(), to_string(l.kind), row, p,
                    mc);
    }
    std::printf("%-12s %-16s %-14s %10lld %12lld  (%.1f kB, %.2f MMAC)\n", "TOTAL", "", "",
                size.total_params, macs.total, round_kb(size.total_bytes),
                static_cast<double>(macs.total) / 1e6);
}

void cmd_macs(const ModelSource& src, const std::string& format) {
    Model m = src.resolve();
    MacReport r = count_macs(m);
    if (format == "table") {
        for (const auto& [id, v] : r.per_layer)
            std::printf("%-12s %12lld  %6.3f\n", id.c_str(), v, r.shares.at(id));
        std::printf("%-12s %12lld  (%.2f MMAC)\n", "total", r.total,
                    static_cast<double>(r.total) / 1e6);
        return;
    }
    json out;
    out["per_layer"] = r.per_layer;
    out["total"] = r.total;
    out["shares"] = r.shares;
    emit(out);
}

void cmd_size(const ModelSource& src, int bytes_per_param, const std::string& format) {
    Model m = src.resolve();
    SizeReport r = count_params(m, bytes_per_param);
    if (format == "table") {
        for (const auto& [id, v] : r.per_layer_params) std::printf("%-12s %10lld\n", id.c_str(), v);
        std::printf("%-12s %10lld params, %lld bytes (%.1f kB)\n", "total", r.total_params,
                    r.total_bytes, round_kb(r.total_bytes));
        return;
    }
    json out;
    out["per_layer"] = r.per_layer_params;
    out["total_params"] = r.total_params;
    out["bytes_per_param"] = r.bytes_per_param;
    out["total_bytes"] = r.total_bytes;
    out["total_kb"] = round_kb(r.total_bytes);
    emit(out);
}

void cmd_compare(const std::string& file_a, const std::string& file_b) {
    Model a = load_model(file_a), b = load_model(file_b);
    ModelComparison c = compare_models(a, b);
    json out;
    out["size_ratio"] = c.size_ratio;
    out["mac_ratio"] = c.mac_ratio;
    out["size_delta_bytes"] = c.size_delta_bytes;
    out["size_delta_kb"] = round_kb(c.size_delta_bytes);
    out["mac_delta"] = c.mac_delta;
    emit(out);
}

void cmd_memplan(const ModelSource& src, const std::string& allocator,
                 const std::string& weights_mode, int element_bytes,
                 const std::string& headroom) {
    Model m = src.resolve();
    WeightsMode wm = weights_mode == "resident" ? WeightsMode::Resident : WeightsMode::Streamed;
    MemoryPlan plan = allocator == "incremental" ? plan_incremental(m, element_bytes)
                                                 : plan_dynamic(m, wm, element_bytes);
    json steps = json::array();
    for (size_t s = 0; s < plan.schedule.size(); ++s) {
        json js;
        js["id"] = plan.schedule[s];
        js["live_bytes"] = plan.per_step_live_bytes[s];
        json bufs = json::array();
        for (const auto& iv : plan.intervals)
            if (iv.first_step <= static_cast<int>(s) && static_cast<int>(s) <= iv.last_step)
                bufs.push_back(iv.buffer);
        js["live_buffers"] = bufs;
        steps.push_back(js);
    }
    json out;
    out["allocator"] = plan.allocator;
    out["weights_mode"] = to_string(plan.weights_mode);
    out["element_bytes"] = plan.element_bytes;
    out["peak_bytes"] = plan.peak_bytes;
    out["peak_kb"] = round_kb(plan.peak_bytes);
    out["peak_step"] = plan.peak_step;
    out["peak_layer"] = plan.schedule[static_cast<size_t>(plan.peak_step)];
    out["first_fit_bytes"] = plan.first_fit_bytes;
    out["steps"] = steps;
    out["offsets"] = plan.offsets;
    if (!headroom.empty()) {
        long long budget = parse_bytes(headroom);
        out["budget_bytes"] = budget;
        out["headroom_bytes"] = budget - plan.peak_bytes;
        out["headroom_kb"] = round_kb(budget - plan.peak_bytes);
    }
    emit(out);
}

void cmd_sparsity(const std::string& trace_file, const std::string& format) {
    ActivationTrace trace = load_trace(trace_file);
    auto pct = structural_sparsity(trace);
    if (format == "table") {
        // mirror the Act0..Byp3 column layout when those ids are present
        std::vector<std::string> preferred = {"Act0", "Act1", "Act2", "Byp1", "Act3",
                                              "Act4", "Byp2", "Act5", "Act6", "Byp3"};
        std::vector<std::string> cols;
        for (const auto& id : preferred)
            if (pct.count(id)) cols.push_back(id);
        for (const auto& e : trace.entries)
            if (std::find(cols.begin(), cols.end(), e.id) == cols.end()) cols.push_back(e.id);
        std::printf("%-10s", "layer");
        for (const auto& c : cols) std::printf(" %8s", c.c_str());
        std::printf("\n%-10s", "dead[%]");
        for (const auto& c : cols) std::printf(" %8.2f", pct.at(c));
        std::printf("\n");
        return;
    }
    json out;
    out["per_layer"] = pct;
    out["samples_seen"] = trace.entries.front().samples_seen;
    emit(out);
}

void cmd_scale(const ModelSource& src, double gamma, const std::string& out_file) {
    Model m = scale_channels(src.resolve(), gamma);
    if (out_file.empty())
        std::cout << model_to_json(m) << "\n";
    else
        save_model(m, out_file);
}

void cmd_prune(const ModelSource& src, const std::string& out_file) {
    Model m = remove_bypass(src.resolve());
    if (out_file.empty())
        std::cout << model_to_json(m) << "\n";
    else
        save_model(m, out_file);
}

void cmd_infer(const ModelSource& src, const std::string& weights_file,
               const std::string& image_file, const std::string& capture_file) {
    Model m = src.resolve();
    WeightSet ws = load_weights(weights_file);
    Executor exec(m, ws);

    std::ifstream f(image_file, std::ios::binary);
    if (!f) throw DataError("cannot open image file: " + image_file);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    const TensorShape& in = m.input_shape;
    if (bytes.size() != static_cast<size_t>(in.elements()))
        throw DataError("image file size does not match model input");
    Tensor img(in.channels, in.height, in.width);
    for (size_t i = 0; i < bytes.size(); ++i) img.v[i] = static_cast<float>(bytes[i]) / 255.0f;

    TraceAccumulator capture(m);
    Prediction p = exec.forward(img, nullptr, capture_file.empty() ? nullptr : &capture);
    if (!capture_file.empty()) save_trace(capture.finish(), capture_file);

    json out;
    out["steering"] = p.steering;
    out["collision_prob"] = p.collision_prob;
    emit(out);
}

void cmd_estimate(double macs, bool macs_set, const ModelSource& src, RuntimeCalibration calib,
                  bool cpm_user) {
    double mac_count = macs;
    if (!macs_set) mac_count = static_cast<double>(count_macs(src.resolve()).total);
    RuntimeEstimate e = estimate_runtime(mac_count, calib);
    json out;
    out["macs"] = mac_count;
    out["cycles"] = e.cycles;
    out["latency_s"] = e.latency_s;
    out["latency_ms"] = e.latency_s * 1e3;
    if (std::isinf(e.fps))
        out["fps"] = "inf";
    else
        out["fps"] = e.fps;
    out["energy_j"] = e.energy_j;
    out["energy_mj"] = e.energy_j * 1e3;
    out["calibration"] = {
        {"cycles_per_mac", calib.cycles_per_mac},
        {"clock_hz", calib.clock_hz},
        {"avg_power_w", calib.avg_power_w},
        {"provenance", cpm_user ? "user-supplied"
                                : "default: 1.1 Mcycles / 1.5 MMAC measured on one model; does "
                                  "not extrapolate across architectures"}};
    emit(out);
}

void cmd_train(const std::string& config_file) {
    std::ifstream f(config_file);
    if (!f) throw DataError("cannot open config: " + config_file);
    json cfg;
    try {
        cfg = json::parse(f);
    } catch (const json::exception& e) {
        throw DataError(std::string("config parse error: ") + e.what());
    }

    Model model;
    try {
        const json& jm = cfg.at("model");
        if (jm.contains("file")) {
            model = load_model(jm.at("file").get<std::string>());
        } else {
            FamilyConfig fc;
            fc.gamma = jm.value("gamma", 1.0);
            fc.with_bypass = jm.value("bypass", true);
            int side = jm.value("input_size", 200);
            fc.input_shape = {1, side, side};
            fc.base_channels = jm.value("base_channels", 32);
            model = build_dronet(fc);
        }

        std::vector<Sample> data;
        const json& jd = cfg.at("dataset");
        if (jd.contains("dir")) {
            data = load_dataset(jd.at("dir").get<std::string>());
        } else {
            const json& js = jd.at("synth");
            data = synth_dataset(js.at("n").get<int>(), js.value("seed", 7),
                                 js.value("image_size", model.input_shape.height));
        }

        TrainOptions opt;
        opt.epochs = cfg.value("epochs", 30);
        opt.lr = cfg.value("lr", 1e-2);
        opt.batch_size = cfg.value("batch_size", 32);
        opt.seed = cfg.value("seed", 1);
        if (cfg.contains("loss")) {
            const json& jl = cfg.at("loss");
            opt.loss.beta_max = jl.value("beta_max", 1.0);
            opt.loss.beta_start_epoch = jl.value("beta_start_epoch", 10);
            if (jl.contains("hard_mining")) {
                const json& jh = jl.at("hard_mining");
                opt.loss.hard_mining.start_fraction = jh.value("start_fraction", 1.0);
                opt.loss.hard_mining.end_fraction = jh.value("end_fraction", 0.25);
                opt.loss.hard_mining.min_k = jh.value("min_k", 8);
            }
        }

        WeightSet init = init_weights(model, opt.seed);
        TrainResult result = train_toy(model, init, data, opt);

        json outputs = cfg.value("outputs", json::object());
        json written = json::object();
        if (outputs.contains("curves")) {
            std::ofstream c(outputs.at("curves").get<std::string>(), std::ios::binary);
            write_curves_csv(result.curves, c);
            written["curves"] = outputs.at("curves");
        }
        if (outputs.contains("weights")) {
            save_weights(result.weights, outputs.at("weights").get<std::string>());
            written["weights"] = outputs.at("weights");
        }
        if (outputs.contains("trace")) {
            save_trace(result.val_trace, outputs.at("trace").get<std::string>());
            written["trace"] = outputs.at("trace");
        }

        const EpochStats& last = result.curves.epochs.back();
        json out;
        out["epochs"] = opt.epochs;
        out["final"] = {{"train_mse", last.train_mse}, {"val_mse", last.val_mse},
                        {"train_bce", last.train_bce}, {"val_bce", last.val_bce},
                        {"beta", last.beta},           {"k", last.k}};
        out["outputs"] = written;
        emit(out);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed config: ") + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiny CNN squeezing and footprint analysis toolkit"};
    app.require_subcommand(1);

    std::string format = "json";

    // describe
    auto* describe = app.add_subcommand("describe", "layer table with shapes, params and MACs");
    ModelSource describe_src;
    describe_src.attach(describe);
    std::string describe_format = "table";
    describe->add_option("--format", describe_format, "table|json");

    // scale
    auto* scale = app.add_subcommand("scale", "rescale conv widths to a new gamma");
    ModelSource scale_src;
    scale_src.attach(scale);
    double scale_gamma = 1.0;
    std::string scale_out;
    scale->add_option("--to", scale_gamma, "target gamma")->required();
    scale->add_option("-o,--output", scale_out, "output model file (stdout if omitted)");

    // prune
    auto* prune = app.add_subcommand("prune", "remove bypass branches");
    ModelSource prune_src;
    prune_src.attach(prune);
    std::string prune_out;
    prune->add_option("-o,--output", prune_out, "output model file (stdout if omitted)");

    // macs
    auto* macs = app.add_subcommand("macs", "multiply-accumulate counts per layer");
    ModelSource macs_src;
    macs_src.attach(macs);
    macs->add_option("--format", format, "json|table");

    // size
    auto* size = app.add_subcommand("size", "parameter and byte counts per layer");
    ModelSource size_src;
    size_src.attach(size);
    int bytes_per_param = 1;
    size->add_option("--bytes-per-param", bytes_per_param, "stored bytes per parameter");
    size->add_option("--format", format, "json|table");

    // compare
    auto* compare = app.add_subcommand("compare", "size/MAC ratios of two models");
    std::string cmp_a, cmp_b;
    compare->add_option("model_a", cmp_a, "first model JSON file")->required();
    compare->add_option("model_b", cmp_b, "second model JSON file")->required();

    // memplan
    auto* memplan = app.add_subcommand("memplan", "peak memory under an allocator model");
    ModelSource memplan_src;
    memplan_src.attach(memplan);
    std::string allocator = "dynamic", weights_mode = "streamed", headroom;
    int element_bytes = 1;
    memplan->add_option("--allocator", allocator, "incremental|dynamic")
        ->check(CLI::IsMember({"incremental", "dynamic"}));
    memplan->add_option("--weights", weights_mode, "resident|streamed")
        ->check(CLI::IsMember({"resident", "streamed"}));
    memplan->add_option("--element-bytes", element_bytes, "activation element width (1 or 4)")
        ->check(CLI::IsMember({1, 4}));
    memplan->add_option("--headroom", headroom, "budget (e.g. 512k) to report remaining bytes");

    // sparsity
    auto* sparsity = app.add_subcommand("sparsity", "structural sparsity report from a trace");
    std::string trace_file;
    sparsity->add_option("trace", trace_file, "TPDT trace file")->required();
    sparsity->add_option("--format", format, "json|table");

    // infer
    auto* infer = app.add_subcommand("infer", "run one image through a model");
    ModelSource infer_src;
    infer_src.attach(infer);
    std::string weights_file, image_file, capture_file;
    infer->add_option("--weights", weights_file, "TPDW weight file")->required();
    infer->add_option("--image", image_file, "raw 8-bit grayscale image file")->required();
    infer->add_option("--capture", capture_file, "write activation trace here");

    // train
    auto* train = app.add_subcommand("train", "toy trainer driven by a JSON config");
    std::string config_file;
    train->add_option("config", config_file, "train config JSON")->required();

    // estimate
    auto* estimate = app.add_subcommand("estimate", "latency/fps/energy from a linear cycle model");
    ModelSource est_src;
    est_src.attach(estimate);
    double est_macs = 0;
    bool macs_set = false;
    RuntimeCalibration calib;
    bool cpm_user = false;
    estimate->add_option("--macs", est_macs, "MAC count (otherwise derived from the model)")
        ->each([&](const std::string&) { macs_set = true; });
    estimate->add_option("--cycles-per-mac", calib.cycles_per_mac, "effective cycles per MAC")
        ->each([&](const std::string&) { cpm_user = true; });
    estimate->add_option("--clock", calib.clock_hz, "core clock in Hz");
    estimate->add_option("--power", calib.avg_power_w, "average power in W");

    try {
        app.parse(argc, argv);

        if (*describe) cmd_describe(describe_src, describe_format);
        if (*scale) cmd_scale(scale_src, scale_gamma, scale_out);
        if (*prune) cmd_prune(prune_src, prune_out);
        if (*macs) cmd_macs(macs_src, format);
        if (*size) cmd_size(size_src, bytes_per_param, format);
        if (*compare) cmd_compare(cmp_a, cmp_b);
        if (*memplan) cmd_memplan(memplan_src, allocator, weights_mode, element_bytes, headroom);
        if (*sparsity) cmd_sparsity(trace_file, format);
        if (*infer) cmd_infer(infer_src, weights_file, image_file, capture_file);
        if (*train) cmd_train(config_file);
        if (*estimate) cmd_estimate(est_macs, macs_set, est_src, calib, cpm_user);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
