#pragma once

#include <cstdint>
#include <vector>

#include "vstar/attention.hpp"
#include "vstar/video.hpp"

namespace vstar {

enum class FeatureMode { pixel_cosine, random_projection_cosine };

/// Inter-frame cosine similarity. Symmetric, unit diagonal, entries in [-1,1].
struct SimilarityMatrix {
    Matrix values;
    FeatureMode feature_mode = FeatureMode::pixel_cosine;
};

/// Mean attention mass per |i-j| frame offset.
struct BandProfile {
    std::vector<double> mass;  // index = offset 0..N-1
};

/// Fraction of total attention mass within offset |i-j| <= k.
double band_energy_ratio(const TemporalAttentionMap& a, std::size_t k);

/// pixel_cosine uses flattened frames; random_projection_cosine projects each
/// frame through a fixed seeded 64-dim projection first. A zero-norm frame
/// gets 0 off-diagonal and 1 on the diagonal, with a warning.
SimilarityMatrix similarity_matrix(const ToyLatentVideo& video, FeatureMode mode);

struct IntervalHistogram {
    int interval = 0;
    std::vector<double> bin_left;
    std::vector<double> bin_right;
    std::vector<std::size_t> counts;
    double mean_similarity = 0.0;
};

/// For each frame offset, histograms the similarity of all (t, t+offset)
/// pairs over all videos. Bin edges are uniform on [-1, 1].
std::vector<IntervalHistogram> interval_similarity_histogram(
    const std::vector<ToyLatentVideo>& videos, const std::vector<int>& intervals,
    std::size_t bins, FeatureMode mode = FeatureMode::pixel_cosine);

/// Mean over transitions of the RMS frame difference; 0 for a static video.
double dynamics_score(const ToyLatentVideo& video);

BandProfile band_profile(const TemporalAttentionMap& a);

}  // namespace vstar
