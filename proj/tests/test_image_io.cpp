#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "forma/image_io.hpp"
#include "gradcheck.hpp"

using namespace forma;

namespace {
Tensor quantized_image(std::mt19937_64& rng, std::int64_t h, std::int64_t w) {
    // Values on the 8-bit grid so a save/load round trip is exact.
    Tensor t({3, h, w});
    for (std::int64_t i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<double>(rng() % 256) / 255.0;
    return t;
}
}  // namespace

TEST_CASE("png image round-trip is exact on the 8-bit grid") {
    std::mt19937_64 rng(211);
    const Tensor img = quantized_image(rng, 13, 9);
    const std::string path = "/tmp/forma_io_test.png";
    save_image(path, img);
    const Tensor back = load_image(path);
    REQUIRE(back.shape() == img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("ppm image round-trip is exact on the 8-bit grid") {
    std::mt19937_64 rng(223);
    const Tensor img = quantized_image(rng, 7, 11);
    const std::string path = "/tmp/forma_io_test.ppm";
    save_image(path, img);
    const Tensor back = load_image(path);
    REQUIRE(back.shape() == img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("mask round-trip through png and pgm") {
    std::mt19937_64 rng(227);
    Tensor mask({6, 10});
    for (std::int64_t i = 0; i < mask.size(); ++i)
        mask.data()[i] = (rng() & 1) ? 1.0 : 0.0;
    for (const char* ext : {".png", ".pgm"}) {
        const std::string path = std::string("/tmp/forma_io_mask") + ext;
        save_mask(path, mask);
        const Tensor back = load_mask(path);
        REQUIRE(back.shape() == mask.shape());
        for (std::int64_t i = 0; i < mask.size(); ++i)
            CHECK(back.data()[i] == mask.data()[i]);
        std::remove(path.c_str());
    }
}

TEST_CASE("gray masks are rejected, not silently thresholded") {
    const std::string path = "/tmp/forma_io_gray.pgm";
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n2 1\n255\n";
        const unsigned char px[2] = {0, 128};
        f.write(reinterpret_cast<const char*>(px), 2);
    }
    CHECK_THROWS_AS(load_mask(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("probability maps survive the 16-bit round trip") {
    std::mt19937_64 rng(229);
    Tensor prob({5, 8});
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (std::int64_t i = 0; i < prob.size(); ++i) prob.data()[i] = d(rng);
    const std::string path = "/tmp/forma_io_prob.pgm";
    save_prob_map(path, prob);
    const Tensor back = load_prob_map(path);
    REQUIRE(back.shape() == prob.shape());
    for (std::int64_t i = 0; i < prob.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(prob.data()[i]).epsilon(1.0 / 65535.0));
    std::remove(path.c_str());
}

TEST_CASE("pnm parser handles comments and rejects truncation") {
    const std::string path = "/tmp/forma_io_comment.ppm";
    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n# a comment\n2 1\n# another\n255\n";
        const unsigned char px[6] = {255, 0, 0, 0, 255, 0};
        f.write(reinterpret_cast<const char*>(px), 6);
    }
    const Tensor img = load_image(path);
    CHECK(img.shape() == Shape{3, 1, 2});
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(img.at(1, 0, 1) == doctest::Approx(1.0));
    std::remove(path.c_str());

    const std::string bad = "/tmp/forma_io_trunc.ppm";
    {
        std::ofstream f(bad, std::ios::binary);
        f << "P6\n4 4\n255\n";
        f << "xy";  // far too short
    }
    CHECK_THROWS_AS(load_image(bad), IoError);
    std::remove(bad.c_str());
}

TEST_CASE("loader errors: missing files and unsupported extensions") {
    CHECK_THROWS_AS(load_image("/tmp/forma_io_missing.png"), IoError);
    std::mt19937_64 rng(233);
    CHECK_THROWS_AS(save_image("/tmp/forma_io.bmp", quantized_image(rng, 2, 2)), IoError);
}
