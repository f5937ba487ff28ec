#include <doctest.h>

#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rmpd/errors.hpp"
#include "rmpd/interchange.hpp"
#include "test_util.hpp"

using namespace rmpd;

namespace {

const std::filesystem::path kModels = testutil::kData / "models";

nlohmann::json expected() {
    std::ifstream in(kModels / "expected.json");
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

RasterImage image_from(const nlohmann::json& ints, std::size_t side) {
    std::vector<float> data;
    for (const auto& v : ints) data.push_back(v.get<float>());
    return RasterImage(side, side, std::move(data));
}

}  // namespace

TEST_CASE("interchange models reproduce the reference runtime") {
    if (!interchange_available()) {
        CHECK_THROWS_AS(open_interchange(kModels / "linear2.onnx"), BackendError);
        return;
    }
    const auto ref = expected();
    const std::size_t side = ref["side"].get<std::size_t>();
    for (const auto& c : ref["cases"]) {
        const std::string model = c["model"].get<std::string>();
        CAPTURE(model);
        auto f = open_interchange(kModels / model);
        CHECK(f.kind() == BackendKind::interchange);
        const auto img = image_from(ref["images"][c["image"].get<std::size_t>()], side);
        const auto got = f.predict(img);
        const auto want = c["probs"].get<std::vector<double>>();
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-4));
        CHECK(std::accumulate(got.begin(), got.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("interchange models discriminate between inputs") {
    if (!interchange_available()) return;
    const auto ref = expected();
    auto f = open_interchange(kModels / "conv2.onnx");
    const std::size_t side = ref["side"].get<std::size_t>();
    const auto a = f.predict(image_from(ref["images"][3], side));
    const auto b = f.predict(image_from(ref["images"][4], side));
    CHECK(std::abs(a[0] - b[0]) > 1e-2);
}

TEST_CASE("interchange load and shape errors") {
    if (!interchange_available()) return;
    CHECK_THROWS_AS(open_interchange(kModels / "unsupported.onnx"), BackendError);
    CHECK_THROWS(open_interchange(kModels / "missing.onnx"));
    auto big = open_interchange(kModels / "large224.onnx");
    CHECK_THROWS_AS(big.predict(RasterImage(8, 8)), BackendError);

    testutil::TempDir tmp;
    testutil::write_bytes(tmp / "junk.onnx", "this is not a model");
    CHECK_THROWS(open_interchange(tmp / "junk.onnx"));
}
