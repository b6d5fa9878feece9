#include "vstar/video.hpp"

#include <stdexcept>

namespace vstar {

ToyLatentVideo::ToyLatentVideo(Tensor t) : data(std::move(t)) {
    if (data.rank() != 4) throw std::invalid_argument("ToyLatentVideo: tensor must be (N,C,H,W)");
    if (!data.all_finite()) throw std::invalid_argument("ToyLatentVideo: non-finite entry");
}

}  // namespace vstar
