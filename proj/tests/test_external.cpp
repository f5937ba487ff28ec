#include <doctest.h>

#include <signal.h>

#include <chrono>
#include <thread>

#include "rmpd/errors.hpp"
#include "rmpd/external.hpp"
#include "rmpd/synthetic.hpp"
#include "test_util.hpp"

using namespace rmpd;

namespace {

const std::string kStub = PDX_STUB_PATH;

std::uint32_t u32_at(const std::string& b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

TEST_CASE("request frames are bit-exact") {
    const RasterImage img(2, 1, std::vector<float>{1, 2, 3, 255, 0, 0.5f});
    const std::string frame = wire::encode_request(img);
    REQUIRE(frame.size() == 4 + 8 + 24);
    CHECK(u32_at(frame, 0) == 32);
    CHECK(u32_at(frame, 4) == 2);
    CHECK(u32_at(frame, 8) == 1);
    CHECK(u32_at(frame, 12) == 0x3F800000u);  // 1.0f
    CHECK(u32_at(frame, 24) == 0x437F0000u);  // 255.0f
    CHECK(u32_at(frame, 32) == 0x3F000000u);  // 0.5f
    CHECK(wire::decode_request_payload(frame.substr(4)) == img);
    CHECK_THROWS_AS(wire::decode_request_payload(frame.substr(4, 20)), ProtocolError);
}

TEST_CASE("handshake and response frames") {
    const std::string hello = wire::encode_handshake(7);
    CHECK(hello.substr(0, 4) == "PDX1");
    CHECK(u32_at(hello, 4) == 7);
    const std::vector<float> p{0.25f, 0.75f};
    const std::string resp = wire::encode_response(p);
    CHECK(u32_at(resp, 0) == 8);
    CHECK(wire::decode_response_payload(resp.substr(4), 2) == Probabilities{0.25, 0.75});
    CHECK_THROWS_AS(wire::decode_response_payload(resp.substr(4), 3), ProtocolError);
    const std::string bad = wire::encode_response(std::vector<float>{0.9f, 0.9f});
    CHECK_THROWS_AS(wire::decode_response_payload(bad.substr(4), 2), ProtocolError);
}

TEST_CASE("loopback with the reference stub") {
    auto f = open_external({kStub, "--probs", "0.3,0.7"}, 2);
    CHECK(f.kind() == BackendKind::external);
    CHECK(f.num_classes() == 2);
    const auto p = f.predict(testutil::random_image(5, 4, 1));
    CHECK(p[0] == doctest::Approx(0.3));
    CHECK(p[1] == doctest::Approx(0.7));
    CHECK(f.call_count() == 1);
    CHECK(f.describe() == "external:" + kStub + " --probs 0.3,0.7");
}

TEST_CASE("images arrive intact at the server") {
    // The stub scores red area on its own; agreement with the in-process
    // oracle shows the pixels crossed the wire unchanged.
    auto remote = open_external({kStub, "--area-fraction"}, 0);
    auto local = make_area_fraction_oracle({});
    for (double r : {0.0, 4.0, 9.0, 13.0, 30.0}) {
        const auto scene = synthetic::disk_scene(48, 40, 20.0, 20.0, r);
        CHECK(remote.predict(scene.image)[1] == doctest::Approx(local.predict(scene.image)[1]).epsilon(1e-6));
    }
}

TEST_CASE("wrong vector length is a protocol error on the first predict") {
    auto f = open_external({kStub, "--wrong-length"}, 2);
    CHECK_THROWS_AS(f.predict(RasterImage(2, 2)), ProtocolError);
    CHECK(f.call_count() == 1);
    auto& backend = dynamic_cast<ExternalBackend&>(f.backend());
    CHECK(backend.poisoned());
    CHECK_THROWS_AS(f.predict(RasterImage(2, 2)), BackendError);
    CHECK(f.call_count() == 2);
}

TEST_CASE("handshake failures") {
    CHECK_THROWS_AS(open_external({kStub, "--bad-magic"}, 0), ProtocolError);
    CHECK_THROWS_AS(open_external({kStub, "--probs", "0.5,0.5"}, 3), ProtocolError);
    CHECK_THROWS_AS(open_external({kStub, "--classes", "0"}, 0), ProtocolError);
    CHECK_THROWS_AS(open_external({"/nonexistent/pdx-server"}, 0), BackendError);
    CHECK_THROWS_AS(open_external({}, 0), InvalidArgument);
}

TEST_CASE("server that never answers times out") {
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(open_external({"sleep", "5"}, 0, ExternalOptions{std::chrono::milliseconds(200)}), BackendError);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));
}

TEST_CASE("crashing child poisons the handle") {
    auto f = open_external({kStub, "--crash-after", "2"}, 2);
    CHECK_NOTHROW(f.predict(RasterImage(3, 3)));
    CHECK_NOTHROW(f.predict(RasterImage(3, 3)));
    CHECK_THROWS_AS(f.predict(RasterImage(3, 3)), BackendError);
    CHECK(dynamic_cast<ExternalBackend&>(f.backend()).poisoned());
    CHECK_THROWS_AS(f.predict(RasterImage(3, 3)), BackendError);
    CHECK(f.call_count() == 4);
}

TEST_CASE("killed child gives a backend error") {
    auto f = open_external({kStub}, 2);
    CHECK_NOTHROW(f.predict(RasterImage(3, 3)));
    auto& backend = dynamic_cast<ExternalBackend&>(f.backend());
    REQUIRE(backend.pid() > 0);
    ::kill(backend.pid(), SIGKILL);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    CHECK_THROWS_AS(f.predict(testutil::random_image(64, 64, 1)), BackendError);
    CHECK(backend.poisoned());
    CHECK(f.call_count() == 2);
}

TEST_CASE("concurrent predicts are serialized") {
    auto f = open_external({kStub, "--probs", "0.1,0.2,0.7"}, 3);
    const auto img = testutil::random_image(16, 16, 2);
    std::atomic<int> good{0};
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 4; ++t) {
            threads.emplace_back([&] {
                for (int i = 0; i < 25; ++i) {
                    if (f.predict(img)[2] == doctest::Approx(0.7)) ++good;
                }
            });
        }
    }
    CHECK(good == 100);
    CHECK(f.call_count() == 100);
}
