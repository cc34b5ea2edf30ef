#include "forma/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace forma {

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

std::uint8_t to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// ---- PNM (P5 gray / P6 rgb) ----

int pnm_token(std::istream& in) {
    // skips whitespace and '#' comments, returns a non-negative integer
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw IoError("unexpected end of PNM header");
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int v = 0;
    if (!(in >> v) || v < 0) throw IoError("malformed PNM header");
    return v;
}

struct PnmData {
    int channels = 0;  // 1 or 3
    int maxval = 0;
    std::int64_t h = 0, w = 0;
    std::vector<std::uint16_t> px;  // interleaved
};

PnmData load_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image '" + path + "'");
    char m0 = 0, m1 = 0;
    f.get(m0).get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw IoError("'" + path + "' is not a binary PGM/PPM file");
    PnmData d;
    d.channels = m1 == '6' ? 3 : 1;
    d.w = pnm_token(f);
    d.h = pnm_token(f);
    d.maxval = pnm_token(f);
    if (d.w <= 0 || d.h <= 0 || d.maxval <= 0 || d.maxval > 65535)
        throw IoError("'" + path + "' has a bad PNM header");
    f.get();  // single whitespace after maxval
    const std::int64_t count = d.w * d.h * d.channels;
    d.px.resize(static_cast<std::size_t>(count));
    if (d.maxval < 256) {
        std::vector<std::uint8_t> raw(static_cast<std::size_t>(count));
        f.read(reinterpret_cast<char*>(raw.data()), count);
        if (!f) throw IoError("truncated pixel data in '" + path + "'");
        for (std::int64_t i = 0; i < count; ++i)
            d.px[static_cast<std::size_t>(i)] = raw[static_cast<std::size_t>(i)];
    } else {
        std::vector<std::uint8_t> raw(static_cast<std::size_t>(count) * 2);
        f.read(reinterpret_cast<char*>(raw.data()), count * 2);
        if (!f) throw IoError("truncated pixel data in '" + path + "'");
        for (std::int64_t i = 0; i < count; ++i)  // PNM 16-bit is big-endian
            d.px[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(
                (raw[static_cast<std::size_t>(2 * i)] << 8) |
                raw[static_cast<std::size_t>(2 * i + 1)]);
    }
    return d;
}

// ---- PNG via libpng ----

struct PngReadCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngPixels {
    std::int64_t h = 0, w = 0;
    int channels = 0;
    std::vector<std::uint8_t> px;  // 8-bit interleaved
};

PngPixels load_png(const std::string& path) {
    PngReadCtx c;
    c.fp = std::fopen(path.c_str(), "rb");
    if (!c.fp) throw IoError("cannot open image '" + path + "'");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, c.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError("'" + path + "' is not a PNG file");
    c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    c.info = c.png ? png_create_info_struct(c.png) : nullptr;
    if (!c.png || !c.info) throw IoError("libpng setup failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("libpng failed reading '" + path + "'");
    png_init_io(c.png, c.fp);
    png_set_sig_bytes(c.png, 8);
    png_read_info(c.png, c.info);

    png_set_expand(c.png);          // palettes and low bit depths to 8-bit
    png_set_strip_16(c.png);        // 16-bit down to 8
    png_set_strip_alpha(c.png);
    png_read_update_info(c.png, c.info);

    PngPixels out;
    out.w = png_get_image_width(c.png, c.info);
    out.h = png_get_image_height(c.png, c.info);
    out.channels = png_get_channels(c.png, c.info);
    if (out.channels != 1 && out.channels != 3)
        throw IoError("'" + path + "' has unsupported channel count " +
                      std::to_string(out.channels));
    const std::size_t rowbytes = png_get_rowbytes(c.png, c.info);
    out.px.resize(static_cast<std::size_t>(out.h) * rowbytes);
    std::vector<png_bytep> rows(static_cast<std::size_t>(out.h));
    for (std::int64_t y = 0; y < out.h; ++y)
        rows[static_cast<std::size_t>(y)] = out.px.data() + static_cast<std::size_t>(y) * rowbytes;
    png_read_image(c.png, rows.data());
    png_read_end(c.png, nullptr);
    return out;
}

void save_png(const std::string& path, const std::uint8_t* px, std::int64_t h,
              std::int64_t w, int channels) {
    PngWriteCtx c;
    c.fp = std::fopen(path.c_str(), "wb");
    if (!c.fp) throw IoError("cannot write image '" + path + "'");
    c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    c.info = c.png ? png_create_info_struct(c.png) : nullptr;
    if (!c.png || !c.info) throw IoError("libpng setup failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("libpng failed writing '" + path + "'");
    png_init_io(c.png, c.fp);
    png_set_IHDR(c.png, c.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(c.png, c.info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (std::int64_t y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(px + y * w * channels);
    png_write_image(c.png, rows.data());
    png_write_end(c.png, nullptr);
}

bool is_png_path(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image '" + path + "'");
    unsigned char sig[8] = {};
    f.read(reinterpret_cast<char*>(sig), 8);
    return f && !png_sig_cmp(sig, 0, 8);
}

}  // namespace

Tensor load_image(const std::string& path) {
    if (is_png_path(path)) {
        const PngPixels p = load_png(path);
        Tensor t({3, p.h, p.w});
        for (std::int64_t y = 0; y < p.h; ++y)
            for (std::int64_t x = 0; x < p.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const int src = p.channels == 3 ? c : 0;
                    t.data()[(c * p.h + y) * p.w + x] =
                        p.px[static_cast<std::size_t>((y * p.w + x) * p.channels + src)] /
                        255.0;
                }
        return t;
    }
    const PnmData d = load_pnm(path);
    Tensor t({3, d.h, d.w});
    const double inv = 1.0 / static_cast<double>(d.maxval);
    for (std::int64_t y = 0; y < d.h; ++y)
        for (std::int64_t x = 0; x < d.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const int src = d.channels == 3 ? c : 0;
                t.data()[(c * d.h + y) * d.w + x] =
                    d.px[static_cast<std::size_t>((y * d.w + x) * d.channels + src)] * inv;
            }
    return t;
}

void save_image(const std::string& path, const Tensor& rgb) {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3)
        throw DimensionError("save_image: want [3,H,W], got " + shape_str(rgb.shape()));
    const std::int64_t h = rgb.dim(1), w = rgb.dim(2);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(3 * h * w));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                px[static_cast<std::size_t>((y * w + x) * 3 + c)] =
                    to_byte(rgb.data()[(c * h + y) * w + x]);
    if (has_suffix(path, ".png")) {
        save_png(path, px.data(), h, w, 3);
        return;
    }
    if (!has_suffix(path, ".ppm"))
        throw IoError("save_image: unsupported extension on '" + path +
                         "' (use .png or .ppm)");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write image '" + path + "'");
    f << "P6\n" << w << ' ' << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()),
            static_cast<std::streamsize>(px.size()));
    if (!f) throw IoError("short write on '" + path + "'");
}

Tensor load_mask(const std::string& path) {
    std::vector<std::uint16_t> gray;
    std::int64_t h = 0, w = 0;
    int maxval = 255;
    if (is_png_path(path)) {
        const PngPixels p = load_png(path);
        h = p.h;
        w = p.w;
        gray.resize(static_cast<std::size_t>(h * w));
        for (std::int64_t i = 0; i < h * w; ++i) {
            if (p.channels == 3) {
                const std::uint8_t r = p.px[static_cast<std::size_t>(3 * i)];
                const std::uint8_t gch = p.px[static_cast<std::size_t>(3 * i + 1)];
                const std::uint8_t b = p.px[static_cast<std::size_t>(3 * i + 2)];
                if (r != gch || gch != b)
                    throw DomainError("mask '" + path + "' has a non-gray pixel");
                gray[static_cast<std::size_t>(i)] = r;
            } else {
                gray[static_cast<std::size_t>(i)] = p.px[static_cast<std::size_t>(i)];
            }
        }
    } else {
        const PnmData d = load_pnm(path);
        if (d.channels != 1)
            throw DomainError("mask '" + path + "' must be single-channel");
        h = d.h;
        w = d.w;
        maxval = d.maxval;
        gray = d.px;
    }
    Tensor t({h, w});
    for (std::int64_t i = 0; i < h * w; ++i) {
        const int v = gray[static_cast<std::size_t>(i)];
        if (v != 0 && v != maxval)
            throw IoError("mask '" + path + "' is not bilevel: found value " +
                              std::to_string(v) + " (expected 0 or " +
                              std::to_string(maxval) + ")");
        t.data()[i] = v == 0 ? 0.0 : 1.0;
    }
    return t;
}

void save_mask(const std::string& path, const Tensor& mask) {
    if (mask.ndim() != 2)
        throw DimensionError("save_mask: want [H,W], got " + shape_str(mask.shape()));
    const std::int64_t h = mask.dim(0), w = mask.dim(1);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double v = mask.data()[i];
        if (v != 0.0 && v != 1.0)
            throw DomainError("save_mask: mask must be 0/1, found " + std::to_string(v));
        px[static_cast<std::size_t>(i)] = v == 0.0 ? 0 : 255;
    }
    if (has_suffix(path, ".png")) {
        save_png(path, px.data(), h, w, 1);
        return;
    }
    if (!has_suffix(path, ".pgm"))
        throw IoError("save_mask: unsupported extension on '" + path +
                         "' (use .png or .pgm)");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write mask '" + path + "'");
    f << "P5\n" << w << ' ' << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()),
            static_cast<std::streamsize>(px.size()));
    if (!f) throw IoError("short write on '" + path + "'");
}

void save_prob_map(const std::string& path, const Tensor& prob) {
    if (prob.ndim() != 2)
        throw DimensionError("save_prob_map: want [H,W], got " + shape_str(prob.shape()));
    const std::int64_t h = prob.dim(0), w = prob.dim(1);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write probability map '" + path + "'");
    f << "P5\n" << w << ' ' << h << "\n65535\n";
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h * w) * 2);
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double v = std::clamp(prob.data()[i], 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        raw[static_cast<std::size_t>(2 * i)] = static_cast<std::uint8_t>(q >> 8);
        raw[static_cast<std::size_t>(2 * i + 1)] = static_cast<std::uint8_t>(q & 0xff);
    }
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (!f) throw IoError("short write on '" + path + "'");
}

Tensor load_prob_map(const std::string& path) {
    const PnmData d = load_pnm(path);
    if (d.channels != 1 || d.maxval != 65535)
        throw IoError("'" + path + "' is not a 16-bit probability map");
    Tensor t({d.h, d.w});
    for (std::int64_t i = 0; i < d.h * d.w; ++i)
        t.data()[i] = d.px[static_cast<std::size_t>(i)] / 65535.0;
    return t;
}

}  // namespace forma
