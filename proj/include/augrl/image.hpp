#pragma once

#include <string>
#include <vector>

namespace augrl {

// Stack of consecutive grayscale frames, values in [0, 1]. Transformations
// act on whole stacks with one parameter shared by every frame.
struct FrameStack {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<double> pix;  // [frames][height][width], row-major

    FrameStack() = default;
    FrameStack(int c, int h, int w) : frames(c), height(h), width(w),
                                      pix(static_cast<size_t>(c) * h * w, 0.0) {}

    double& at(int f, int y, int x) {
        return pix[(static_cast<size_t>(f) * height + y) * width + x];
    }
    double at(int f, int y, int x) const {
        return pix[(static_cast<size_t>(f) * height + y) * width + x];
    }
    long long size() const { return static_cast<long long>(pix.size()); }
    bool same_shape(const FrameStack& o) const {
        return frames == o.frames && height == o.height && width == o.width;
    }
    void clamp01();
};

// Single-frame 8-bit PGM (P5) round trip. Values are mapped with
// round(v * 255) on write and b / 255 on read, so write(read(f)) is
// byte-exact.
FrameStack read_pgm(const std::string& path);                 // 1-frame stack
void write_pgm(const std::string& path, const FrameStack& s, int frame = 0);

}  // namespace augrl
