#include "rmpd/external.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>

#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "rmpd/errors.hpp"

extern char** environ;

namespace rmpd {

namespace wire {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return v;
}

float get_f32(std::string_view bytes, std::size_t offset) {
    return std::bit_cast<float>(get_u32(bytes, offset));
}

std::string encode_handshake(std::uint32_t num_classes) {
    std::string out(kMagic);
    put_u32(out, num_classes);
    return out;
}

std::string encode_request(const RasterImage& image) {
    const auto samples = image.data();
    const std::size_t payload = 8 + samples.size() * 4;
    if (payload > 0xffffffffu) throw InvalidArgument("image too large for a PDX1 frame");
    std::string out;
    out.reserve(4 + payload);
    put_u32(out, static_cast<std::uint32_t>(payload));
    put_u32(out, static_cast<std::uint32_t>(image.width()));
    put_u32(out, static_cast<std::uint32_t>(image.height()));
    for (float s : samples) put_f32(out, s);
    return out;
}

std::string encode_response(std::span<const float> probabilities) {
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(probabilities.size() * 4));
    for (float p : probabilities) put_f32(out, p);
    return out;
}

RasterImage decode_request_payload(std::string_view payload) {
    if (payload.size() < 8) throw ProtocolError("request payload shorter than its header");
    const std::size_t w = get_u32(payload, 0), h = get_u32(payload, 4);
    if (payload.size() != 8 + w * h * 12) throw ProtocolError("request payload size does not match dimensions");
    std::vector<float> samples(w * h * 3);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = get_f32(payload, 8 + 4 * i);
    return RasterImage(w, h, std::move(samples));
}

Probabilities decode_response_payload(std::string_view payload, std::size_t num_classes) {
    if (payload.size() != num_classes * 4) {
        throw ProtocolError("response carries " + std::to_string(payload.size() / 4) +
                            " probabilities, expected " + std::to_string(num_classes));
    }
    Probabilities p(num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) p[i] = get_f32(payload, 4 * i);
    try {
        validate_probabilities(p, num_classes);
    } catch (const BackendError& e) {
        throw ProtocolError(e.what());
    }
    return p;
}

}  // namespace wire

ExternalBackend::ExternalBackend(const std::vector<std::string>& argv, std::size_t expected_classes,
                                 ExternalOptions options)
    : argv_(argv), options_(options) {
    if (argv_.empty()) throw InvalidArgument("external classifier command is empty");
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        throw BackendError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    std::vector<char*> cargv;
    for (auto& a : argv_) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    const int rc = ::posix_spawnp(&pid_, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    fd_ = fds[0];
    if (rc != 0) {
        ::close(fd_);
        fd_ = -1;
        pid_ = -1;
        throw BackendError("cannot spawn '" + argv_[0] + "': " + std::strerror(rc));
    }
    try {
        const std::string hello = recv_exact(8);
        if (std::string_view(hello).substr(0, 4) != wire::kMagic) fail("handshake magic mismatch", true);
        num_classes_ = wire::get_u32(hello, 4);
        if (num_classes_ == 0) fail("server announced zero classes", true);
        if (expected_classes != 0 && num_classes_ != expected_classes) {
            fail("server announced " + std::to_string(num_classes_) + " classes, expected " +
                     std::to_string(expected_classes),
                 true);
        }
    } catch (...) {
        shutdown_child();
        throw;
    }
}

ExternalBackend::~ExternalBackend() { shutdown_child(); }

void ExternalBackend::shutdown_child() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    if (pid_ <= 0) return;
    // Closing the socket is the shutdown signal; escalate if the child lingers.
    for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) != 0) {
            pid_ = -1;
            return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
}

void ExternalBackend::fail(const std::string& what, bool protocol) {
    poisoned_ = true;
    const std::string msg = "external classifier '" + argv_[0] + "': " + what;
    if (protocol) throw ProtocolError(msg);
    throw BackendError(msg);
}

void ExternalBackend::send_all(std::string_view bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(std::string("send failed: ") + std::strerror(errno), false);
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::string ExternalBackend::recv_exact(std::size_t n) {
    std::string out(n, '\0');
    std::size_t got = 0;
    while (got < n) {
        pollfd pfd{fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(options_.timeout.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            fail(std::string("poll failed: ") + std::strerror(errno), false);
        }
        if (ready == 0) fail("timed out waiting for the server", false);
        const ssize_t r = ::recv(fd_, out.data() + got, n - got, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            fail(std::string("recv failed: ") + std::strerror(errno), false);
        }
        if (r == 0) fail("server closed the connection", false);
        got += static_cast<std::size_t>(r);
    }
    return out;
}

Probabilities ExternalBackend::predict(const RasterImage& image) {
    std::lock_guard lock(mutex_);
    if (poisoned_) throw BackendError("external classifier '" + argv_[0] + "' is unusable after an earlier failure");
    send_all(wire::encode_request(image));
    const std::uint32_t len = wire::get_u32(recv_exact(4), 0);
    if (len > wire::kMaxResponseBytes) fail("response frame of " + std::to_string(len) + " bytes", true);
    const std::string payload = recv_exact(len);
    try {
        return wire::decode_response_payload(payload, num_classes_);
    } catch (const ProtocolError& e) {
        fail(e.what(), true);
    }
}

std::string ExternalBackend::describe() const {
    std::string out = "external:";
    for (std::size_t i = 0; i < argv_.size(); ++i) out += (i ? " " : "") + argv_[i];
    return out;
}

ClassifierHandle open_external(const std::vector<std::string>& argv, std::size_t num_classes,
                               ExternalOptions options) {
    return ClassifierHandle(std::make_unique<ExternalBackend>(argv, num_classes, options));
}

}  // namespace rmpd
