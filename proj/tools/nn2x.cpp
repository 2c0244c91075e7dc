// Reference x2 upscaler for the external backend protocol: nearest-neighbour
// pixel doubling of an 8-bit PGM.
//
//   iris_sr_nn2x IN OUT [--bad-dims]
//
// --bad-dims emits a (2w+1)x(2h) image, for exercising contract checks.

#include <cstdio>
#include <cstring>
#include <exception>

#include "irissr/image_io.hpp"

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s IN OUT [--bad-dims]\n", argv[0]);
        return 2;
    }
    const bool bad_dims = argc > 3 && std::strcmp(argv[3], "--bad-dims") == 0;
    try {
        const irissr::Image in = irissr::read_image(argv[1]);
        const int w = 2 * in.width() + (bad_dims ? 1 : 0);
        const int h = 2 * in.height();
        irissr::Image out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out(x, y) = in.clamped(x / 2, y / 2);
        irissr::write_pgm(argv[2], out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "nn2x: %s\n", e.what());
        return 1;
    }
    return 0;
}
