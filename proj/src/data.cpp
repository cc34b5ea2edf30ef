#include "forma/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "forma/image_io.hpp"

namespace forma {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
    double r, g, b;
};

Rgb random_color(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.15, 0.85);
    return {u(rng), u(rng), u(rng)};
}

double bilinear_at(const std::vector<double>& grid, std::int64_t gh, std::int64_t gw,
                   double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(gh - 1));
    x = std::clamp(x, 0.0, static_cast<double>(gw - 1));
    const std::int64_t y0 = static_cast<std::int64_t>(y), x0 = static_cast<std::int64_t>(x);
    const std::int64_t y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * grid[static_cast<std::size_t>(y0 * gw + x0)] +
                       fx * grid[static_cast<std::size_t>(y0 * gw + x1)]) +
           fy * ((1 - fx) * grid[static_cast<std::size_t>(y1 * gw + x0)] +
                 fx * grid[static_cast<std::size_t>(y1 * gw + x1)]);
}

// Gradient backdrop with low-frequency shading and a few flat shapes, no
// grain yet: grain is layered last so authentic content shares one noise
// field.
void paint_scene(std::mt19937_64& rng, Tensor& img) {
    const std::int64_t h = img.dim(1), w = img.dim(2);
    const Rgb c0 = random_color(rng), c1 = random_color(rng);
    std::uniform_real_distribution<double> uang(0.0, kPi);
    const double ang = uang(rng);
    const double dx = std::cos(ang), dy = std::sin(ang);

    const std::int64_t gh = std::max<std::int64_t>(2, h / 8 + 1);
    const std::int64_t gw = std::max<std::int64_t>(2, w / 8 + 1);
    std::uniform_real_distribution<double> uamp(0.03, 0.10);
    const double amp = uamp(rng);
    std::normal_distribution<double> gn(0.0, amp);
    std::vector<double> low(static_cast<std::size_t>(gh * gw));
    for (auto& v : low) v = gn(rng);

    const double diag = dx * static_cast<double>(w) + dy * static_cast<double>(h);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const double t =
                (dx * static_cast<double>(x) + dy * static_cast<double>(y)) / diag;
            const double shade = bilinear_at(low, gh, gw, static_cast<double>(y) / 8.0,
                                             static_cast<double>(x) / 8.0);
            img.data()[(0 * h + y) * w + x] = c0.r + (c1.r - c0.r) * t + shade;
            img.data()[(1 * h + y) * w + x] = c0.g + (c1.g - c0.g) * t + shade;
            img.data()[(2 * h + y) * w + x] = c0.b + (c1.b - c0.b) * t + shade;
        }

    // A few authentic flat ellipses so shapes alone never signal tampering.
    std::uniform_int_distribution<int> nshapes(1, 3);
    std::uniform_real_distribution<double> ucx(0.1, 0.9), urad(0.06, 0.22), u01(0.0, 1.0);
    const int count = nshapes(rng);
    for (int s = 0; s < count; ++s) {
        const Rgb col = random_color(rng);
        const double cx = ucx(rng) * static_cast<double>(w);
        const double cy = ucx(rng) * static_cast<double>(h);
        const double ra = urad(rng) * static_cast<double>(std::min(h, w));
        const double rb = urad(rng) * static_cast<double>(std::min(h, w));
        const double th = uang(rng);
        const double ct = std::cos(th), st = std::sin(th);
        const double mix = 0.55 + 0.45 * u01(rng);
        const std::int64_t rmax = static_cast<std::int64_t>(std::max(ra, rb)) + 2;
        for (std::int64_t y = std::max<std::int64_t>(0, static_cast<std::int64_t>(cy) - rmax);
             y < std::min(h, static_cast<std::int64_t>(cy) + rmax); ++y)
            for (std::int64_t x = std::max<std::int64_t>(0, static_cast<std::int64_t>(cx) - rmax);
                 x < std::min(w, static_cast<std::int64_t>(cx) + rmax); ++x) {
                const double ox = static_cast<double>(x) - cx, oy = static_cast<double>(y) - cy;
                const double u = (ct * ox + st * oy) / ra, v = (-st * ox + ct * oy) / rb;
                if (u * u + v * v > 1.0) continue;
                double* r = &img.data()[(0 * h + y) * w + x];
                double* g = &img.data()[(1 * h + y) * w + x];
                double* b = &img.data()[(2 * h + y) * w + x];
                *r += mix * (col.r - *r);
                *g += mix * (col.g - *g);
                *b += mix * (col.b - *b);
            }
    }
}

void add_grain(std::mt19937_64& rng, Tensor& img, double sigma) {
    std::normal_distribution<double> gn(0.0, sigma);
    for (std::int64_t i = 0; i < img.size(); ++i) img.data()[i] += gn(rng);
}

void clamp01(Tensor& img) {
    for (std::int64_t i = 0; i < img.size(); ++i)
        img.data()[i] = std::clamp(img.data()[i], 0.0, 1.0);
}

// Rotated ellipse with a wavy rim. Returns pixel count; the caller
// rejects out-of-budget regions and redraws.
std::int64_t draw_region(std::mt19937_64& rng, std::int64_t h, std::int64_t w,
                         double area_frac, std::vector<std::uint8_t>& region) {
    std::uniform_real_distribution<double> ucenter(0.22, 0.78), uaspect(0.45, 2.2),
        uang(0.0, kPi), umod(0.0, 0.35), u2pi(0.0, 2.0 * kPi);
    std::uniform_int_distribution<int> uk(2, 5);
    region.assign(static_cast<std::size_t>(h * w), 0);
    const double cx = ucenter(rng) * static_cast<double>(w);
    const double cy = ucenter(rng) * static_cast<double>(h);
    const double area = area_frac * static_cast<double>(h * w);
    const double aspect = uaspect(rng);
    const double a = std::sqrt(area * aspect / kPi);
    const double b = area / (kPi * a);
    const double th = uang(rng), ct = std::cos(th), st = std::sin(th);
    const double mod = umod(rng), ph = u2pi(rng);
    const int k = uk(rng);
    const std::int64_t rmax =
        static_cast<std::int64_t>(std::ceil(std::max(a, b) * (1.0 + mod))) + 2;
    std::int64_t count = 0;
    for (std::int64_t y = std::max<std::int64_t>(0, static_cast<std::int64_t>(cy) - rmax);
         y < std::min(h, static_cast<std::int64_t>(cy) + rmax); ++y)
        for (std::int64_t x = std::max<std::int64_t>(0, static_cast<std::int64_t>(cx) - rmax);
             x < std::min(w, static_cast<std::int64_t>(cx) + rmax); ++x) {
            const double ox = static_cast<double>(x) - cx, oy = static_cast<double>(y) - cy;
            const double u = (ct * ox + st * oy) / a, v = (-st * ox + ct * oy) / b;
            const double r = std::sqrt(u * u + v * v);
            const double rim = 1.0 + mod * std::sin(k * std::atan2(v, u) + ph);
            if (r <= rim) {
                region[static_cast<std::size_t>(y * w + x)] = 1;
                ++count;
            }
        }
    return count;
}

std::int64_t make_region(std::mt19937_64& rng, std::int64_t h, std::int64_t w,
                         double lo_frac, double hi_frac, std::vector<std::uint8_t>& region) {
    std::uniform_real_distribution<double> uarea(lo_frac, hi_frac);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const std::int64_t count = draw_region(rng, h, w, uarea(rng), region);
        const double frac = static_cast<double>(count) / static_cast<double>(h * w);
        if (count >= 16 && frac >= 0.01 && frac <= 0.30) return count;
    }
    throw DomainError("synth_tamper: could not place a region inside the area budget");
}

double sample_channel(const Tensor& img, int c, double y, double x) {
    const std::int64_t h = img.dim(1), w = img.dim(2);
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const std::int64_t y0 = static_cast<std::int64_t>(y), x0 = static_cast<std::int64_t>(x);
    const std::int64_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    const double* p = img.data() + static_cast<std::int64_t>(c) * h * w;
    return (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
           fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
}

}  // namespace

Sample synth_tamper(std::uint64_t seed, std::int64_t h, std::int64_t w, TamperKind kind) {
    if (h < 16 || w < 16)
        throw DomainError("synth_tamper: image must be at least 16x16, got " +
                          std::to_string(h) + "x" + std::to_string(w));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    Sample s;
    s.kind = kind;
    s.image = Tensor({3, h, w});
    s.mask = Tensor({h, w});
    paint_scene(rng, s.image);

    std::uniform_real_distribution<double> ubase(0.004, 0.012);
    const double base_grain = ubase(rng);

    if (kind == TamperKind::authentic) {
        add_grain(rng, s.image, base_grain);
        clamp01(s.image);
        return s;
    }

    std::vector<std::uint8_t> region;
    if (kind == TamperKind::splice) {
        add_grain(rng, s.image, base_grain);
        // Donor scene: new palette, much heavier grain.
        Tensor donor({3, h, w});
        paint_scene(rng, donor);
        std::uniform_real_distribution<double> udonor(0.022, 0.045);
        add_grain(rng, donor, udonor(rng));
        make_region(rng, h, w, 0.02, 0.22, region);
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                if (region[static_cast<std::size_t>(y * w + x)]) {
                    for (int c = 0; c < 3; ++c)
                        s.image.data()[(c * h + y) * w + x] =
                            donor.data()[(c * h + y) * w + x];
                    s.mask.data()[y * w + x] = 1.0;
                }
    } else {  // copy_move
        add_grain(rng, s.image, base_grain);
        Tensor source = s.image.clone();
        const std::int64_t count = make_region(rng, h, w, 0.02, 0.18, region);
        (void)count;
        // Rotation forces resampling, whose interpolation flattens the
        // grain inside the moved patch.
        std::uniform_real_distribution<double> umag(5.0 * kPi / 180.0, 25.0 * kPi / 180.0);
        const double th = (u01(rng) < 0.5 ? -1.0 : 1.0) * umag(rng);
        const double ct = std::cos(th), st = std::sin(th);
        std::uniform_real_distribution<double> ushift(0.15, 0.35);
        const double sx = (u01(rng) < 0.5 ? -1.0 : 1.0) * ushift(rng) * static_cast<double>(w);
        const double sy = (u01(rng) < 0.5 ? -1.0 : 1.0) * ushift(rng) * static_cast<double>(h);
        double mx = 0, my = 0;
        std::int64_t n = 0;
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                if (region[static_cast<std::size_t>(y * w + x)]) {
                    mx += static_cast<double>(x);
                    my += static_cast<double>(y);
                    ++n;
                }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                if (region[static_cast<std::size_t>(y * w + x)]) {
                    const double ox = static_cast<double>(x) - mx;
                    const double oy = static_cast<double>(y) - my;
                    const double srcx = mx + sx + ct * ox - st * oy;
                    const double srcy = my + sy + st * ox + ct * oy;
                    for (int c = 0; c < 3; ++c)
                        s.image.data()[(c * h + y) * w + x] =
                            sample_channel(source, c, srcy, srcx);
                    s.mask.data()[y * w + x] = 1.0;
                }
    }
    clamp01(s.image);
    return s;
}

Sample synth_tamper(std::uint64_t seed, std::int64_t h, std::int64_t w) {
    std::mt19937_64 pick(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(pick);
    TamperKind kind = u < 0.2 ? TamperKind::authentic
                    : u < 0.7 ? TamperKind::splice
                              : TamperKind::copy_move;
    return synth_tamper(seed, h, w, kind);
}

namespace {

void flip_h(Tensor& img) {
    const std::int64_t c = img.ndim() == 3 ? img.dim(0) : 1;
    const std::int64_t h = img.dim(img.ndim() == 3 ? 1 : 0);
    const std::int64_t w = img.dim(img.ndim() == 3 ? 2 : 1);
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w / 2; ++x)
                std::swap(img.data()[(ci * h + y) * w + x],
                          img.data()[(ci * h + y) * w + (w - 1 - x)]);
}

void flip_v(Tensor& img) {
    const std::int64_t c = img.ndim() == 3 ? img.dim(0) : 1;
    const std::int64_t h = img.dim(img.ndim() == 3 ? 1 : 0);
    const std::int64_t w = img.dim(img.ndim() == 3 ? 2 : 1);
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h / 2; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                std::swap(img.data()[(ci * h + y) * w + x],
                          img.data()[(ci * h + (h - 1 - y)) * w + x]);
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
    if (sigma <= 0.0) return img.clone();
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] =
            std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;

    const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor mid({c, h, w}), out({c, h, w});
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const std::int64_t xx = std::clamp<std::int64_t>(x + i, 0, w - 1);
                    acc += img.data()[(ci * h + y) * w + xx] *
                           k[static_cast<std::size_t>(i + radius)];
                }
                mid.data()[(ci * h + y) * w + x] = acc;
            }
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const std::int64_t yy = std::clamp<std::int64_t>(y + i, 0, h - 1);
                    acc += mid.data()[(ci * h + yy) * w + x] *
                           k[static_cast<std::size_t>(i + radius)];
                }
                out.data()[(ci * h + y) * w + x] = acc;
            }
    return out;
}

// Standard luminance quantization table.
constexpr int kLumaQ[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

// Luma-only JPEG approximation: the Y plane is run through the 8x8 DCT
// and quantized with the quality-scaled table, chroma is left alone.
// Real JPEG also subsamples and quantizes chroma; for grayscale-ish
// forensic cues the luma path carries nearly all of the artifact.
Tensor jpeg_like(const Tensor& img, double quality) {
    const std::int64_t h = img.dim(1), w = img.dim(2);
    const int q = static_cast<int>(std::lround(quality));
    const int scale = q < 50 ? 5000 / q : 200 - 2 * q;
    double tbl[64];
    for (int i = 0; i < 64; ++i)
        tbl[i] = std::clamp((kLumaQ[i] * scale + 50) / 100, 1, 255);

    // cosine basis, orthonormal
    double m[8][8];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x)
            m[u][x] = (u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                      std::cos((2.0 * x + 1.0) * u * kPi / 16.0);

    const std::int64_t ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
    std::vector<double> ych(static_cast<std::size_t>(ph * pw));
    std::vector<double> cb(static_cast<std::size_t>(h * w)), cr(static_cast<std::size_t>(h * w));
    for (std::int64_t y = 0; y < ph; ++y)
        for (std::int64_t x = 0; x < pw; ++x) {
            const std::int64_t sy = std::min(y, h - 1), sx = std::min(x, w - 1);
            const double r = img.data()[(0 * h + sy) * w + sx] * 255.0;
            const double g = img.data()[(1 * h + sy) * w + sx] * 255.0;
            const double b = img.data()[(2 * h + sy) * w + sx] * 255.0;
            ych[static_cast<std::size_t>(y * pw + x)] = 0.299 * r + 0.587 * g + 0.114 * b;
            if (y < h && x < w) {
                cb[static_cast<std::size_t>(y * w + x)] =
                    -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
                cr[static_cast<std::size_t>(y * w + x)] =
                    0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
            }
        }

    double blk[64], tmp[64];
    for (std::int64_t by = 0; by < ph; by += 8)
        for (std::int64_t bx = 0; bx < pw; bx += 8) {
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    blk[i * 8 + j] = ych[static_cast<std::size_t>((by + i) * pw + bx + j)] - 128.0;
            // F = M blk M^T, quantize, back
            for (int u = 0; u < 8; ++u)
                for (int j = 0; j < 8; ++j) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += m[u][x] * blk[x * 8 + j];
                    tmp[u * 8 + j] = acc;
                }
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * m[v][x];
                    blk[u * 8 + v] = std::round(acc / tbl[u * 8 + v]) * tbl[u * 8 + v];
                }
            for (int i = 0; i < 8; ++i)
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int u = 0; u < 8; ++u) acc += m[u][i] * blk[u * 8 + v];
                    tmp[i * 8 + v] = acc;
                }
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) {
                    double acc = 0.0;
                    for (int v = 0; v < 8; ++v) acc += tmp[i * 8 + v] * m[v][j];
                    ych[static_cast<std::size_t>((by + i) * pw + bx + j)] = acc + 128.0;
                }
        }

    Tensor out({3, h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const double yy = ych[static_cast<std::size_t>(y * pw + x)];
            const double cbb = cb[static_cast<std::size_t>(y * w + x)] - 128.0;
            const double crr = cr[static_cast<std::size_t>(y * w + x)] - 128.0;
            out.data()[(0 * h + y) * w + x] = std::clamp((yy + 1.402 * crr) / 255.0, 0.0, 1.0);
            out.data()[(1 * h + y) * w + x] =
                std::clamp((yy - 0.344136 * cbb - 0.714136 * crr) / 255.0, 0.0, 1.0);
            out.data()[(2 * h + y) * w + x] = std::clamp((yy + 1.772 * cbb) / 255.0, 0.0, 1.0);
        }
    return out;
}

Tensor resize_bilinear_plain(const Tensor& img, std::int64_t oh, std::int64_t ow) {
    const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor out({c, oh, ow});
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t x = 0; x < ow; ++x) {
                const double sy = std::clamp(
                    (static_cast<double>(y) + 0.5) * static_cast<double>(h) /
                            static_cast<double>(oh) - 0.5,
                    0.0, static_cast<double>(h - 1));
                const double sx = std::clamp(
                    (static_cast<double>(x) + 0.5) * static_cast<double>(w) /
                            static_cast<double>(ow) - 0.5,
                    0.0, static_cast<double>(w - 1));
                out.data()[(ci * oh + y) * ow + x] =
                    sample_channel(img, static_cast<int>(ci), sy, sx);
            }
    return out;
}

}  // namespace

Sample augment(const Sample& s, std::uint64_t seed, const AugmentConfig& cfg) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Sample out;
    out.kind = s.kind;
    out.image = s.image.clone();
    out.mask = s.mask.clone();
    if (u01(rng) < cfg.p_flip) {
        flip_h(out.image);
        flip_h(out.mask);
    }
    if (u01(rng) < cfg.p_flip) {
        flip_v(out.image);
        flip_v(out.mask);
    }
    if (u01(rng) < cfg.p_blur) {
        std::uniform_real_distribution<double> us(0.5, 1.5);
        out.image = gaussian_blur(out.image, us(rng));
    }
    if (u01(rng) < cfg.p_jpeg) {
        std::uniform_real_distribution<double> uq(60.0, 95.0);
        out.image = jpeg_like(out.image, uq(rng));
    }
    if (u01(rng) < cfg.p_noise) {
        std::uniform_real_distribution<double> us(0.01, 0.05);
        add_grain(rng, out.image, us(rng));
        clamp01(out.image);
    }
    return out;
}

Tensor perturb(const Tensor& image, const Perturbation& p, std::uint64_t seed) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw DimensionError("perturb: want [3,H,W], got " + shape_str(image.shape()));
    switch (p.kind) {
        case PerturbKind::jpeg:
            if (p.strength < 30.0 || p.strength > 100.0)
                throw DomainError("perturb: jpeg quality " + std::to_string(p.strength) +
                                  " outside [30,100]");
            return jpeg_like(image, p.strength);
        case PerturbKind::blur:
            if (p.strength < 0.0 || p.strength > 5.0)
                throw DomainError("perturb: blur sigma " + std::to_string(p.strength) +
                                  " outside [0,5]");
            return gaussian_blur(image, p.strength);
        case PerturbKind::noise: {
            if (p.strength < 0.0 || p.strength > 0.1)
                throw DomainError("perturb: noise sigma " + std::to_string(p.strength) +
                                  " outside [0,0.1]");
            Tensor out = image.clone();
            std::mt19937_64 rng(seed);
            if (p.strength > 0.0) add_grain(rng, out, p.strength);
            clamp01(out);
            return out;
        }
        case PerturbKind::resize: {
            if (p.strength < 0.25 || p.strength > 2.0)
                throw DomainError("perturb: resize factor " + std::to_string(p.strength) +
                                  " outside [0.25,2]");
            const std::int64_t h = image.dim(1), w = image.dim(2);
            const std::int64_t rh = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::lround(static_cast<double>(h) * p.strength)));
            const std::int64_t rw = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::lround(static_cast<double>(w) * p.strength)));
            return resize_bilinear_plain(resize_bilinear_plain(image, rh, rw), h, w);
        }
    }
    throw DomainError("perturb: unknown kind");
}

PerturbKind perturb_kind_from_string(const std::string& s) {
    if (s == "jpeg") return PerturbKind::jpeg;
    if (s == "blur") return PerturbKind::blur;
    if (s == "noise") return PerturbKind::noise;
    if (s == "resize") return PerturbKind::resize;
    throw UsageError("unknown perturbation '" + s + "'");
}

std::string perturb_kind_name(PerturbKind k) {
    switch (k) {
        case PerturbKind::jpeg: return "jpeg";
        case PerturbKind::blur: return "blur";
        case PerturbKind::noise: return "noise";
        case PerturbKind::resize: return "resize";
    }
    return "?";
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest '" + path + "'");
    const auto dir = std::filesystem::path(path).parent_path();
    std::vector<ManifestEntry> out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("manifest '" + path + "' line " + std::to_string(lineno) +
                          ": " + e.what());
        }
        if (!j.contains("image") || !j.contains("mask"))
            throw IoError("manifest '" + path + "' line " + std::to_string(lineno) +
                          ": needs image and mask fields");
        ManifestEntry e;
        e.image = j.at("image").get<std::string>();
        e.mask = j.at("mask").get<std::string>();
        e.dataset = j.value("dataset", "default");
        auto resolve = [&dir](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (dir / fp).string();
        };
        e.image = resolve(e.image);
        e.mask = resolve(e.mask);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw IoError("manifest '" + path + "' lists no images");
    return out;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest '" + path + "'");
    for (const auto& e : entries) {
        nlohmann::json j{{"image", e.image}, {"mask", e.mask}, {"dataset", e.dataset}};
        f << j.dump() << '\n';
    }
    if (!f) throw IoError("short write on '" + path + "'");
}

std::string write_synth_dataset(const std::string& dir, std::int64_t count,
                                std::uint64_t seed, std::int64_t h, std::int64_t w) {
    if (count < 1) throw DomainError("write_synth_dataset: count must be positive");
    std::filesystem::create_directories(dir);
    std::vector<ManifestEntry> entries;
    for (std::int64_t i = 0; i < count; ++i) {
        const Sample s = synth_tamper(seed + static_cast<std::uint64_t>(i), h, w);
        char img[32], msk[32];
        std::snprintf(img, sizeof(img), "img_%05lld.png", static_cast<long long>(i));
        std::snprintf(msk, sizeof(msk), "mask_%05lld.png", static_cast<long long>(i));
        save_image((std::filesystem::path(dir) / img).string(), s.image);
        save_mask((std::filesystem::path(dir) / msk).string(), s.mask);
        entries.push_back({img, msk, "synth"});
    }
    const std::string mpath = (std::filesystem::path(dir) / "manifest.jsonl").string();
    save_manifest(mpath, entries);
    return mpath;
}

}  // namespace forma
