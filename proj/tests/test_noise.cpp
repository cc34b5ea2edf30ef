#include <doctest.h>

#include <cstdio>
#include <random>

#include "forma/noise.hpp"
#include "gradcheck.hpp"

using namespace forma;
using gradcheck::random_tensor;

namespace {
Graph nograd() {
    Graph g;
    g.set_recording(false);
    return g;
}
}  // namespace

TEST_CASE("srm bank: frozen shape, zero-sum taps, per-channel wiring") {
    Tensor srm = srm_kernel_bank();
    REQUIRE(srm.shape() == Shape{9, 3, 5, 5});
    // Residual filters remove the DC component: every 5x5 tap grid sums to 0.
    for (std::int64_t k = 0; k < 9; ++k) {
        double sum = 0.0, mag = 0.0;
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < 25; ++i) {
                const double v = srm.data()[(k * 3 + c) * 25 + i];
                sum += v;
                mag += std::fabs(v);
            }
        CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(mag > 0.0);
        // Filter k reads only color channel k%3.
        for (std::int64_t c = 0; c < 3; ++c) {
            double cmag = 0.0;
            for (std::int64_t i = 0; i < 25; ++i)
                cmag += std::fabs(srm.data()[(k * 3 + c) * 25 + i]);
            if (c == k % 3)
                CHECK(cmag > 0.0);
            else
                CHECK(cmag == 0.0);
        }
    }
    // A flat image produces a zero residual away from the zero-padded
    // border (the 5x5 support reaches 2 pixels in).
    Graph g = nograd();
    std::mt19937_64 rng(131);
    ModelConfig cfg = ModelConfig::toy_scale();
    NoiseExtractor ne = NoiseExtractor::init(rng, cfg);
    Tensor flat({3, 8, 8}, 0.5);
    Tensor resid = ne.srm_apply(g, flat);
    REQUIRE(resid.shape() == Shape{9, 8, 8});
    for (std::int64_t k = 0; k < 9; ++k)
        for (std::int64_t y = 2; y < 6; ++y)
            for (std::int64_t x = 2; x < 6; ++x)
                CHECK(resid.at(k, y, x) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bayar projection enforces center -1 and off-center sum 1") {
    std::mt19937_64 rng(137);
    Tensor k = random_tensor({4, 5, 5}, rng);
    bayar_project(k, &rng);
    for (std::int64_t f = 0; f < 4; ++f) {
        double off = 0.0;
        for (std::int64_t i = 0; i < 25; ++i) {
            const double v = k.data()[f * 25 + i];
            if (i == 12)
                CHECK(v == doctest::Approx(-1.0));
            else
                off += v;
        }
        CHECK(off == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Degenerate all-zero stack is re-randomized instead of dividing by 0.
    Tensor z = Tensor::zeros({1, 5, 5});
    bayar_project(z, &rng);
    double off = 0.0;
    for (std::int64_t i = 0; i < 25; ++i)
        if (i != 12) off += z.data()[i];
    CHECK(off == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(z.data()[12] == doctest::Approx(-1.0));
}

TEST_CASE("noise extractor output grid and collected parameters") {
    Graph g = nograd();
    std::mt19937_64 rng(139);
    ModelConfig cfg = ModelConfig::toy_scale();
    NoiseExtractor ne = NoiseExtractor::init(rng, cfg);
    Tensor img = random_tensor({3, 32, 24}, rng, 0.0, 1.0);
    Tensor t = ne.forward(g, img);
    CHECK(t.shape() == Shape{8, 6, cfg.fmod_channels});

    std::vector<NamedParam> params;
    ne.collect("noise", params);
    for (const auto& p : params) {
        CHECK(p.name.find("srm") == std::string::npos);  // frozen bank is not trained
        CHECK(p.name.rfind("noise.", 0) == 0);
    }
}

TEST_CASE("noise map file round-trips through the NMAP format") {
    std::mt19937_64 rng(149);
    Tensor before = random_tensor({4, 6, 5}, rng);
    const std::string path = "/tmp/forma_test_noise.nmap";
    save_noise_map(path, before);
    Tensor after = load_noise_map(path);
    REQUIRE(after.shape() == before.shape());
    // Values pass through float32, so compare at single precision.
    for (std::int64_t i = 0; i < before.size(); ++i)
        CHECK(after.data()[i] ==
              doctest::Approx(static_cast<float>(before.data()[i])).epsilon(1e-7));
    std::remove(path.c_str());
}

TEST_CASE("noise map loader rejects garbage") {
    const std::string path = "/tmp/forma_test_noise_bad.nmap";
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("JUNKJUNKJUNK", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_noise_map(path), IoError);
    CHECK_THROWS_AS(load_noise_map("/tmp/forma_no_such_file.nmap"), IoError);
    std::remove(path.c_str());
}
