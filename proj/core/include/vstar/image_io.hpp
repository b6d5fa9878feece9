#pragma once

#include <filesystem>

#include "vstar/tensor.hpp"
#include "vstar/video.hpp"

namespace vstar {

/// 8-bit binary PGM (P5) heatmap with linear min-max scaling. A constant
/// matrix renders all-white for positive values and all-black otherwise.
void write_pgm_heatmap(const Matrix& m, const std::filesystem::path& path);

/// One binary PPM (P6) per frame, named frame_000.ppm ... in dir. Values are
/// mapped affinely from [-1, 1] to [0, 255] and clamped. Videos with C != 3
/// are replicated / truncated to three channels.
void write_video_ppm(const ToyLatentVideo& video, const std::filesystem::path& dir);

}  // namespace vstar
