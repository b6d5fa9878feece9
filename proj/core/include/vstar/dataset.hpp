#pragma once

#include <map>
#include <string>
#include <vector>

#include "vstar/video.hpp"

namespace vstar {

/// Recipe for one procedural dynamic video. Every motif is deterministic
/// given (spec, seed) and exhibits monotone temporal change.
struct SyntheticVideoSpec {
    std::string motif;  // color_transition | growing_disk | moving_gradient | two_phase_scene
    std::map<std::string, double> params;
    std::string caption;
};

struct DatasetItem {
    ToyLatentVideo video;
    std::string caption;
};

std::vector<DatasetItem> generate_dataset(const std::vector<SyntheticVideoSpec>& specs,
                                          std::size_t n_frames, std::uint64_t seed,
                                          std::size_t height = 16, std::size_t width = 16);

/// The stock 16-video dataset: four motifs, four parameter variants each.
std::vector<SyntheticVideoSpec> default_dataset_specs();

/// Every word appearing in the stock captions plus <unk> at index 0.
std::vector<std::string> default_vocab();

}  // namespace vstar
