#include <doctest.h>

#include <thread>

#include "rmpd/background.hpp"
#include "rmpd/classifier.hpp"
#include "rmpd/errors.hpp"
#include "rmpd/segmentation.hpp"
#include "rmpd/synthetic.hpp"
#include "test_util.hpp"

using namespace rmpd;

TEST_CASE("constant oracle") {
    auto f = make_constant_oracle({0.3, 0.7});
    CHECK(f.call_count() == 0);
    CHECK(f.predict(testutil::random_image(3, 3, 1)) == Probabilities{0.3, 0.7});
    CHECK(f.predict(RasterImage(1, 1)) == Probabilities{0.3, 0.7});
    CHECK(f.call_count() == 2);
    CHECK(f.kind() == BackendKind::synthetic);
    CHECK(f.num_classes() == 2);
    CHECK_THROWS_AS(make_constant_oracle({0.3, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(make_constant_oracle({}), InvalidArgument);
}

TEST_CASE("area-fraction oracle") {
    auto f = make_area_fraction_oracle({synthetic::kRed, 30.0, 0.25});
    CHECK(f.predict(RasterImage(10, 10, 255.0f))[1] == 0.0);

    // 10 of 100 pixels red -> 0.1 / 0.25 = 0.4
    RasterImage img(10, 10, 255.0f);
    for (std::size_t i = 0; i < 10; ++i) img.set_pixel(i, {250.0f, 10.0f, 5.0f});
    const auto p = f.predict(img);
    CHECK(p[1] == doctest::Approx(0.4));
    CHECK(p[0] == doctest::Approx(0.6));

    // Outside the tolerance does not count; saturation at 1.
    img.set_pixel(50, {200.0f, 40.0f, 0.0f});
    CHECK(f.predict(img)[1] == doctest::Approx(0.4));
    for (std::size_t i = 0; i < 40; ++i) img.set_pixel(i, {255.0f, 0.0f, 0.0f});
    CHECK(f.predict(img)[1] == 1.0);
    CHECK_THROWS_AS(make_area_fraction_oracle({synthetic::kRed, 30.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(make_area_fraction_oracle({synthetic::kRed, -1.0, 0.5}), InvalidArgument);
}

TEST_CASE("two-blob oracle separates the evidence for each blob") {
    const auto scene = synthetic::two_blob_scene();
    auto f = make_two_blob_oracle(scene.target_a, scene.target_b);
    const auto base = f.predict(scene.image);
    CHECK(base[1] == doctest::Approx(0.5));
    CHECK(base[2] == doctest::Approx(0.5));

    std::vector<RegionId> labels(scene.image.pixel_count());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = scene.blob_a.data[i] ? 1 : 0;
    const SegmentationMap seg(scene.image.width(), scene.image.height(), labels);
    const auto out = f.predict(sample_exclusion(scene.image, seg, 1, {{245.0, 245.0, 245.0}, 10.0}, 1));
    CHECK(out[1] < 0.05 * base[1]);
    CHECK(std::abs(out[2] - base[2]) <= 0.02);
}

TEST_CASE("oracles are pure") {
    const auto img = synthetic::corpus_scene(4).image;
    auto f = make_area_fraction_oracle(synthetic::corpus_target());
    CHECK(f.predict(img) == f.predict(img));
}

TEST_CASE("invalid outputs are rejected and still counted") {
    int mode = 0;
    auto f = make_callback_classifier(2, [&](const RasterImage&) -> Probabilities {
        switch (mode) {
            case 0: return {0.25, 0.75};
            case 1: return {0.5};
            case 2: return {0.6, 0.6};
            case 3: return {1.5, -0.5};
            default: throw std::runtime_error("model exploded");
        }
    });
    CHECK(f.predict(RasterImage(1, 1)).size() == 2);
    for (mode = 1; mode <= 3; ++mode) CHECK_THROWS_AS(f.predict(RasterImage(1, 1)), BackendError);
    mode = 4;
    CHECK_THROWS(f.predict(RasterImage(1, 1)));
    CHECK(f.call_count() == 5);
    f.reset_call_count();
    CHECK(f.call_count() == 0);
}

TEST_CASE("probability validation tolerance") {
    CHECK_NOTHROW(validate_probabilities({0.5, 0.50009}, 2));
    CHECK_THROWS_AS(validate_probabilities({0.5, 0.5002}, 2), BackendError);
    CHECK_THROWS_AS(validate_probabilities({1.0}, 2), BackendError);
    CHECK(argmax({0.3, 0.3, 0.4}) == 2);
    CHECK(argmax({0.5, 0.5}) == 0);
}

TEST_CASE("counter is exact under concurrent predicts") {
    auto f = make_area_fraction_oracle({});
    const auto img = testutil::random_image(8, 8, 3);
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 4; ++t) {
            threads.emplace_back([&] {
                for (int i = 0; i < 250; ++i) f.predict(img);
            });
        }
    }
    CHECK(f.call_count() == 1000);
}

TEST_CASE("handles move with their counter") {
    auto f = make_constant_oracle({1.0});
    f.predict(RasterImage(1, 1));
    ClassifierHandle g = std::move(f);
    CHECK(g.call_count() == 1);
    CHECK(g.describe() == "oracle:constant");
}
