// Times the OpenMP layer kernels against the serial reference implementation
// on the convolution layers of the family models. Usage:
//   tpd_bench [reps] [gamma]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "tpd/kernels.hpp"
#include "tpd/model.hpp"
#include "tpd/ref_kernels.hpp"
#include "tpd/rng.hpp"
#include "tpd/tensor.hpp"

using namespace tpd;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(int c, int h, int w, Rng& rng) {
    Tensor t(c, h, w);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    const double gamma = argc > 2 ? std::atof(argv[2]) : 1.0;

    FamilyConfig cfg;
    cfg.gamma = gamma;
    Model m = build_dronet(cfg);
    Rng rng(42);

    std::printf("conv kernels, gamma=%.3f, %d reps (serial reference vs OpenMP)\n", gamma, reps);
    std::printf("%-12s %10s %12s %12s %8s\n", "layer", "MMAC", "serial ms", "omp ms", "speedup");

    double checksum = 0;
    for (const auto& l : m.layers) {
        if (l.kind != LayerKind::Conv2d) continue;
        const TensorShape in_s = m.shapes.at(l.inputs[0]);
        const TensorShape out_s = m.shapes.at(l.id);

        Tensor in = random_tensor(in_s.channels, in_s.height, in_s.width, rng);
        std::vector<float> w(static_cast<size_t>(l.out_channels) * in_s.channels * l.kernel *
                             l.kernel);
        std::vector<float> b(static_cast<size_t>(l.out_channels));
        for (auto& v : w) v = static_cast<float>(rng.uniform(-0.2, 0.2));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-0.2, 0.2));

        std::vector<float> ref_out(static_cast<size_t>(out_s.elements()));
        Tensor omp_out;

        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            ref::conv2d(in.v.data(), in_s.channels, in_s.height, in_s.width, w.data(), b.data(),
                        l.out_channels, l.kernel, l.stride, l.padding, ref_out.data(),
                        out_s.height, out_s.width);
        const double t_ref = seconds_since(t0) / reps;

        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            conv2d_forward(in, w, b, l.out_channels, l.kernel, l.stride, l.padding, omp_out);
        const double t_omp = seconds_since(t0) / reps;

        checksum += ref_out[0] + omp_out.v[0];
        const double mmac = static_cast<double>(out_s.elements()) * l.kernel * l.kernel *
                            in_s.channels / 1e6;
        std::printf("%-12s %10.3f %12.3f %12.3f %8.2f\n", l.id.c_str(), mmac, t_ref * 1e3,
                    t_omp * 1e3, t_ref / t_omp);
    }
    std::printf("(checksum %.6f)\n", checksum);
    return 0;
}
