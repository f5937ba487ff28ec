#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "rmpd/classifier.hpp"

namespace rmpd {

// PDX1 wire protocol. All integers are u32 little-endian, all samples f32
// little-endian.
//   handshake (server -> client): "PDX1" u32 num_classes
//   request   (client -> server): u32 len, then len bytes =
//                                 u32 width, u32 height, width*height*3 f32 (row-major RGB)
//   response  (server -> client): u32 len, then len bytes = num_classes f32
namespace wire {

inline constexpr std::string_view kMagic = "PDX1";
inline constexpr std::uint32_t kMaxResponseBytes = 1u << 20;

void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(std::string_view bytes, std::size_t offset);
float get_f32(std::string_view bytes, std::size_t offset);

std::string encode_handshake(std::uint32_t num_classes);
std::string encode_request(const RasterImage& image);
std::string encode_response(std::span<const float> probabilities);

/// Decodes a request payload (without the length prefix).
RasterImage decode_request_payload(std::string_view payload);
/// Decodes a response payload (without the length prefix); throws
/// ProtocolError on a length mismatch or an invalid probability vector.
Probabilities decode_response_payload(std::string_view payload, std::size_t num_classes);

}  // namespace wire

struct ExternalOptions {
    std::chrono::milliseconds timeout{30000};
};

/// Child process speaking PDX1 over a socket bound to its stdin/stdout.
/// predict() is serialized internally; after any I/O or protocol failure the
/// backend is poisoned and every later predict throws.
class ExternalBackend final : public ClassifierBackend {
public:
    ExternalBackend(const std::vector<std::string>& argv, std::size_t expected_classes,
                    ExternalOptions options);
    ~ExternalBackend() override;
    ExternalBackend(const ExternalBackend&) = delete;
    ExternalBackend& operator=(const ExternalBackend&) = delete;

    BackendKind kind() const noexcept override { return BackendKind::external; }
    std::size_t num_classes() const noexcept override { return num_classes_; }
    Probabilities predict(const RasterImage& image) override;
    std::string describe() const override;

    pid_t pid() const noexcept { return pid_; }
    bool poisoned() const noexcept { return poisoned_; }

private:
    void send_all(std::string_view bytes);
    std::string recv_exact(std::size_t n);
    [[noreturn]] void fail(const std::string& what, bool protocol);
    void shutdown_child() noexcept;

    std::vector<std::string> argv_;
    ExternalOptions options_;
    int fd_ = -1;
    pid_t pid_ = -1;
    std::size_t num_classes_ = 0;
    bool poisoned_ = false;
    std::mutex mutex_;
};

/// Spawns `argv` and completes the handshake. `num_classes` = 0 accepts
/// whatever the server announces; otherwise a mismatch is a ProtocolError.
ClassifierHandle open_external(const std::vector<std::string>& argv, std::size_t num_classes,
                               ExternalOptions options = {});

}  // namespace rmpd
