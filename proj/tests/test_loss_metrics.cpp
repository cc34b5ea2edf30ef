#include <doctest.h>

#include <cmath>
#include <random>

#include "forma/loss.hpp"
#include "forma/metrics.hpp"
#include "gradcheck.hpp"

using namespace forma;
using gradcheck::max_rel_error;

namespace {
Graph nograd() {
    Graph g;
    g.set_recording(false);
    return g;
}

Tensor random_prob(forma::Shape shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(0.02, 0.98);
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
    return t;
}

Tensor random_mask(forma::Shape shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = (rng() & 1) ? 1.0 : 0.0;
    return t;
}
}  // namespace

TEST_CASE("dice loss: hand-computed oracle") {
    // p = (1, 0.5), g = (1, 0), eps = 1:
    // 1 - (2*1 + 1) / (1.5 + 1 + 1) = 1 - 3/3.5 = 1/7.
    Graph g = nograd();
    Tensor p = Tensor::from_data({2}, {1.0, 0.5});
    Tensor t = Tensor::from_data({2}, {1.0, 0.0});
    CHECK(dice_loss(g, p, t).item() == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    // Perfect prediction with eps=1 is not exactly 0 but close for large masks.
    Tensor ones = Tensor::ones({100});
    CHECK(dice_loss(g, ones, ones).item() ==
          doctest::Approx(1.0 - 201.0 / 201.0).epsilon(1e-12));
}

TEST_CASE("dice loss gradcheck") {
    std::mt19937_64 rng(191);
    Tensor p = random_prob({3, 4}, rng);
    Tensor t = random_mask({3, 4}, rng);
    auto fn = [t](Graph& g, const std::vector<Tensor>& in) {
        return dice_loss(g, in[0], t);
    };
    CHECK(max_rel_error(fn, {p}) < 1e-4);
}

TEST_CASE("focal loss: single-pixel oracle") {
    // p = 0.5 on a tampered pixel: -0.5 * (0.5)^2 * log(0.5) = 0.125*ln2/... :
    // alpha_t = 0.5, (1-p_t)^2 = 0.25, -log(0.5) = ln 2 -> 0.5*0.25*ln2.
    Graph g = nograd();
    Tensor p = Tensor::from_data({1}, {0.5});
    Tensor t = Tensor::from_data({1}, {1.0});
    CHECK(focal_loss(g, p, t).item() ==
          doctest::Approx(0.5 * 0.25 * std::log(2.0)).epsilon(1e-12));
    // Same value by symmetry for an authentic pixel at p = 0.5.
    Tensor t0 = Tensor::from_data({1}, {0.0});
    CHECK(focal_loss(g, p, t0).item() ==
          doctest::Approx(0.5 * 0.25 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("focal loss is finite at saturated predictions") {
    Graph g = nograd();
    Tensor p = Tensor::from_data({2}, {1.0, 0.0});
    Tensor t = Tensor::from_data({2}, {1.0, 0.0});
    const double v = focal_loss(g, p, t).item();
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
}

TEST_CASE("focal loss gradcheck") {
    std::mt19937_64 rng(193);
    Tensor p = random_prob({4, 3}, rng);
    Tensor t = random_mask({4, 3}, rng);
    auto fn = [t](Graph& g, const std::vector<Tensor>& in) {
        return focal_loss(g, in[0], t);
    };
    CHECK(max_rel_error(fn, {p}) < 1e-4);
}

TEST_CASE("combined loss honors the ablation switches") {
    Graph g = nograd();
    std::mt19937_64 rng(197);
    Tensor p = random_prob({5, 5}, rng);
    Tensor t = random_mask({5, 5}, rng);
    const double dice = dice_loss(g, p, t).item();
    const double focal = focal_loss(g, p, t).item();

    CHECK(combined_loss(g, p, t, LossConfig::for_variant(Variant::full)).item() ==
          doctest::Approx(dice + focal).epsilon(1e-12));
    CHECK(combined_loss(g, p, t, LossConfig::for_variant(Variant::no_dice)).item() ==
          doctest::Approx(focal).epsilon(1e-12));
    CHECK(combined_loss(g, p, t, LossConfig::for_variant(Variant::no_focal)).item() ==
          doctest::Approx(dice).epsilon(1e-12));
}

TEST_CASE("loss shape mismatches are rejected") {
    Graph g = nograd();
    Tensor p = Tensor::ones({2, 2});
    Tensor t = Tensor::ones({2, 3});
    CHECK_THROWS_AS(dice_loss(g, p, t), DimensionError);
    CHECK_THROWS_AS(focal_loss(g, p, t), DimensionError);
}

TEST_CASE("f1/iou: hand-computed confusion example") {
    // pred (1,1,1,0), truth (1,1,0,1): tp=2, fp=1, fn=1,
    // so F1 = 4/6 = 2/3 and IoU = 2/(2+1+1) = 1/2.
    Tensor pred = Tensor::from_data({4}, {1, 1, 1, 0});
    Tensor truth = Tensor::from_data({4}, {1, 1, 0, 1});
    const PairScore s = f1_iou(pred, truth);
    CHECK(s.counts.tp == 2);
    CHECK(s.counts.fp == 1);
    CHECK(s.counts.fn == 1);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.iou == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("f1/iou empty-mask conventions") {
    Tensor z = Tensor::zeros({4});
    Tensor o = Tensor::from_data({4}, {0, 1, 0, 0});
    const PairScore both = f1_iou(z, z);
    CHECK(both.f1 == 1.0);
    CHECK(both.iou == 1.0);
    const PairScore miss = f1_iou(z, o);
    CHECK(miss.f1 == 0.0);
    CHECK(miss.iou == 0.0);
    const PairScore ghost = f1_iou(o, z);
    CHECK(ghost.f1 == 0.0);
    CHECK(ghost.iou == 0.0);
}

TEST_CASE("f1 equals 2*iou/(1+iou) on random masks") {
    std::mt19937_64 rng(199);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor pred = random_mask({8, 8}, rng);
        Tensor truth = random_mask({8, 8}, rng);
        const PairScore s = f1_iou(pred, truth);
        CHECK(std::fabs(s.f1 - 2.0 * s.iou / (1.0 + s.iou)) < 1e-12);
    }
}

TEST_CASE("f1_iou validates inputs") {
    CHECK_THROWS_AS(f1_iou(Tensor::ones({2}), Tensor::ones({3})), DimensionError);
    Tensor soft = Tensor::from_data({2}, {0.5, 1.0});
    CHECK_THROWS_AS(f1_iou(soft, Tensor::ones({2})), DomainError);
}

TEST_CASE("dataset_average: image-count-weighted mean oracle") {
    // 3 images at F1 0.9 and 1 image at F1 0.1 -> (3*0.9 + 0.1)/4 = 0.7.
    std::vector<DatasetScore> sets{{"a", 3, 0.9, 0.8}, {"b", 1, 0.1, 0.1}};
    const AverageScore avg = dataset_average(sets);
    CHECK(avg.f1 == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(avg.images == 4);
    CHECK(avg.iou == doctest::Approx((3 * 0.8 + 0.1) / 4.0).epsilon(1e-15));
}

TEST_CASE("summarize averages per-image scores") {
    std::vector<ImageResult> rs{{"x", {1.0, 1.0, {}}}, {"y", {0.5, 1.0 / 3.0, {}}}};
    const DatasetScore s = summarize("set", rs);
    CHECK(s.images == 2);
    CHECK(s.mean_f1 == doctest::Approx(0.75));
}
