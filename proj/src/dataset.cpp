#include "tpd/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tpd/errors.hpp"
#include "tpd/rng.hpp"

namespace tpd {

namespace fs = std::filesystem;

static constexpr double kMaxAngleDeg = 45.0;

static float quantize8(double v) {
    v = std::min(1.0, std::max(0.0, v));
    return static_cast<float>(std::lround(v * 255.0)) / 255.0f;
}

std::vector<Sample> synth_dataset(int n, uint64_t seed, int image_size) {
    if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
    if (image_size < 8) throw std::invalid_argument("image size must be >= 8");
    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(n));
    const int S = image_size;

    for (int s = 0; s < n; ++s) {
        Sample smp;
        smp.image = Tensor(1, S, S);

        // low-level per-image noise floor
        for (auto& v : smp.image.v) v = quantize8(rng.uniform(0.0, 0.15));

        const double angle_deg = rng.uniform(-kMaxAngleDeg, kMaxAngleDeg);
        smp.steering = static_cast<float>(angle_deg / kMaxAngleDeg);
        const double slope = std::tan(angle_deg * M_PI / 180.0);
        const double intensity = rng.uniform(0.75, 1.0);

        // lane line from the bottom center towards the top
        const double cx = (S - 1) / 2.0;
        for (int y = S - 1; y >= 0; --y) {
            const double x = cx + slope * (S - 1 - y);
            const int xi = static_cast<int>(std::lround(x));
            for (int dx = -1; dx <= 1; ++dx) {
                const int px = xi + dx;
                if (px < 0 || px >= S) continue;
                smp.image.at(0, y, px) = quantize8(intensity - 0.1 * std::abs(dx));
            }
        }

        smp.collision = rng.bernoulli(0.5) ? 1 : 0;
        if (smp.collision) {
            // obstacle rectangle occluding whatever lies beneath it
            const int min_side = std::max(2, S / 10);
            const int max_side = std::max(min_side + 1, S / 3);
            const int rw = min_side + rng.below(max_side - min_side);
            const int rh = min_side + rng.below(max_side - min_side);
            const int rx = rng.below(S - rw);
            const int ry = rng.below(S - rh);
            const double fill = rng.uniform(0.3, 0.9);
            for (int y = ry; y < ry + rh; ++y)
                for (int x = rx; x < rx + rw; ++x) smp.image.at(0, y, x) = quantize8(fill);
        }
        out.push_back(std::move(smp));
    }
    return out;
}

void save_dataset(const std::vector<Sample>& data, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw DataError("cannot write manifest in " + dir);
    manifest << "path,steering,collision\n";
    char name[32];
    for (size_t i = 0; i < data.size(); ++i) {
        std::snprintf(name, sizeof(name), "img_%05zu.raw", i);
        std::ofstream img(fs::path(dir) / name, std::ios::binary);
        if (!img) throw DataError("cannot write image file in " + dir);
        for (float v : data[i].image.v) {
            const unsigned char b =
                static_cast<unsigned char>(std::lround(std::min(1.0f, std::max(0.0f, v)) * 255.0f));
            img.put(static_cast<char>(b));
        }
        char row[96];
        std::snprintf(row, sizeof(row), "%s,%.9g,%d\n", name,
                      static_cast<double>(data[i].steering), data[i].collision);
        manifest << row;
    }
}

std::vector<Sample> load_dataset(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw DataError("cannot open manifest in " + dir);
    std::string line;
    if (!std::getline(manifest, line) || line != "path,steering,collision")
        throw DataError("malformed manifest header in " + dir);

    std::vector<Sample> out;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string path, steer, coll;
        if (!std::getline(ss, path, ',') || !std::getline(ss, steer, ',') ||
            !std::getline(ss, coll))
            throw DataError("malformed manifest row: " + line);
        Sample s;
        s.steering = std::stof(steer);
        s.collision = std::stoi(coll);

        std::ifstream img(fs::path(dir) / path, std::ios::binary);
        if (!img) throw DataError("missing image file: " + path);
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(img)),
                                         std::istreambuf_iterator<char>());
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(bytes.size()))));
        if (static_cast<size_t>(side) * side != bytes.size())
            throw DataError("image file is not square: " + path);
        s.image = Tensor(1, side, side);
        for (size_t i = 0; i < bytes.size(); ++i)
            s.image.v[i] = static_cast<float>(bytes[i]) / 255.0f;
        out.push_back(std::move(s));
    }
    if (out.empty()) throw DataError("empty dataset in " + dir);
    return out;
}

}  // namespace tpd
