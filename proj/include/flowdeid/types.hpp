#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowdeid {

// 8-bit sRGB, row-major interleaved triples.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("RgbImage: width and height must be >= 1");
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    std::uint8_t* pixel(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

// CIE 1976 L*a*b* planes. L in [0,100] for in-gamut sources.
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<float> L, a, b;

    LabImage() = default;
    LabImage(int w, int h)
        : width(w), height(h),
          L(static_cast<std::size_t>(w) * h, 0.f),
          a(static_cast<std::size_t>(w) * h, 0.f),
          b(static_cast<std::size_t>(w) * h, 0.f) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// a* + 128 rounded half away from zero, clamped to [0,255].
struct AStarPlane {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    AStarPlane() = default;
    AStarPlane(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Non-negative |delta a*| plane on the unoffset float scale.
struct DiffMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    DiffMap() = default;
    DiffMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.f) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// One byte per pixel, 0 or 1.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    std::size_t count_set() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    bool same_shape(const BinaryMask& o) const { return width == o.width && height == o.height; }
};

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const std::string& what) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(what + ": dimension mismatch (" + std::to_string(a.width) + "x" +
                                    std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                    std::to_string(b.height) + ")");
}

}  // namespace flowdeid
