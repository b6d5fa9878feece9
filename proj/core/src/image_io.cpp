#include "vstar/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace vstar {

namespace {

unsigned char to_byte(double v01) {
    double v = std::lround(v01 * 255.0);
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    return static_cast<unsigned char>(v);
}

}  // namespace

void write_pgm_heatmap(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_pgm_heatmap: cannot open " + path.string());
    out << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
    double lo = m.min_entry(), hi = m.max_entry();
    for (std::size_t i = 0; i < m.numel(); ++i) {
        double v = m.data()[i];
        double scaled = (hi > lo) ? (v - lo) / (hi - lo) : (v > 0.0 ? 1.0 : 0.0);
        out.put(static_cast<char>(to_byte(scaled)));
    }
}

void write_video_ppm(const ToyLatentVideo& video, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t c = video.channels(), h = video.height(), w = video.width();
    for (std::size_t t = 0; t < video.frames(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.ppm", t);
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("write_video_ppm: cannot open " + (dir / name).string());
        out << "P6\n" << w << " " << h << "\n255\n";
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    std::size_t src = ch < c ? ch : c - 1;
                    double v = video.data.at4(t, src, y, x);
                    out.put(static_cast<char>(to_byte((v + 1.0) / 2.0)));
                }
    }
}

}  // namespace vstar
