#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpd/tensor.hpp"

namespace tpd {

struct Sample {
    Tensor image;        // 1 x S x S, values in [0,1] on a 1/255 grid
    float steering = 0;  // normalized angle in [-1, 1]
    int collision = 0;
};

// Deterministic per seed. Each image carries a lane line drawn from the
// bottom center whose angle (within +/-45 degrees) defines the steering
// label exactly; with probability 1/2 a filled obstacle rectangle is drawn
// on top and the collision label set. Pixel values are quantized to the
// 8-bit grid so disk round-trips are exact.
std::vector<Sample> synth_dataset(int n, uint64_t seed, int image_size = 200);

// On-disk layout: <dir>/manifest.csv with header "path,steering,collision"
// plus one raw 8-bit grayscale file per sample (square images; the side is
// recovered from the file size).
void save_dataset(const std::vector<Sample>& data, const std::string& dir);
std::vector<Sample> load_dataset(const std::string& dir);

}  // namespace tpd
