#include "augrl/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace augrl {

void FrameStack::clamp01() {
    for (double& p : pix) p = std::min(1.0, std::max(0.0, p));
}

namespace {
int next_pgm_token(std::istream& in) {
    // skips whitespace and '#' comment lines
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw std::runtime_error("pgm: malformed header");
    return value;
}
}  // namespace

FrameStack read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("pgm: not a P5 file: " + path);
    int w = next_pgm_token(in);
    int h = next_pgm_token(in);
    int maxval = next_pgm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("pgm: unsupported header in " + path);
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw std::runtime_error("pgm: truncated pixel data in " + path);
    FrameStack s(1, h, w);
    for (size_t i = 0; i < buf.size(); ++i) s.pix[i] = buf[i] / 255.0;
    return s;
}

void write_pgm(const std::string& path, const FrameStack& s, int frame) {
    if (frame < 0 || frame >= s.frames) throw std::runtime_error("pgm: frame index out of range");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot write " + path);
    out << "P5\n" << s.width << " " << s.height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<size_t>(s.width) * s.height);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            double v = std::min(1.0, std::max(0.0, s.at(frame, y, x)));
            buf[static_cast<size_t>(y) * s.width + x] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("pgm: write failed for " + path);
}

}  // namespace augrl
