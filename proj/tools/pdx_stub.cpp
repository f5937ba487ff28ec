// Reference PDX1 server speaking on stdin/stdout. Answers every request with
// a fixed probability vector, or with a red-area score, and can be told to
// misbehave for protocol tests.
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

bool read_exact(void* buf, std::size_t n) {
    auto* p = static_cast<unsigned char*>(buf);
    while (n > 0) {
        const ssize_t got = ::read(STDIN_FILENO, p, n);
        if (got <= 0) return false;
        p += got;
        n -= static_cast<std::size_t>(got);
    }
    return true;
}

bool write_all(const void* buf, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(buf);
    while (n > 0) {
        const ssize_t put = ::write(STDOUT_FILENO, p, n);
        if (put <= 0) return false;
        p += put;
        n -= static_cast<std::size_t>(put);
    }
    return true;
}

std::uint32_t le_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

float le_f32(const unsigned char* p) {
    const std::uint32_t v = le_u32(p);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

std::vector<float> parse_probs(const std::string& s) {
    std::vector<float> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stof(item));
    return out;
}

int usage() {
    std::cerr << "usage: pdx_stub [--probs p0,p1,...] [--classes N] [--area-fraction]\n"
                 "                [--wrong-length] [--bad-magic] [--crash-after N]\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<float> probs{0.5f, 0.5f};
    long classes = -1;
    long crash_after = -1;
    bool wrong_length = false, bad_magic = false, area = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--probs" && i + 1 < argc) probs = parse_probs(argv[++i]);
        else if (a == "--classes" && i + 1 < argc) classes = std::atol(argv[++i]);
        else if (a == "--crash-after" && i + 1 < argc) crash_after = std::atol(argv[++i]);
        else if (a == "--wrong-length") wrong_length = true;
        else if (a == "--bad-magic") bad_magic = true;
        else if (a == "--area-fraction") area = true;
        else return usage();
    }
    if (area) probs = {1.0f, 0.0f};
    const auto announced = static_cast<std::uint32_t>(classes >= 0 ? classes : static_cast<long>(probs.size()));

    std::string hello = bad_magic ? "PDX0" : "PDX1";
    put_u32(hello, announced);
    if (!write_all(hello.data(), hello.size())) return 1;

    for (long served = 0;; ++served) {
        if (crash_after >= 0 && served >= crash_after) std::_Exit(3);
        unsigned char len_buf[4];
        if (!read_exact(len_buf, 4)) return 0;
        const std::uint32_t len = le_u32(len_buf);
        std::vector<unsigned char> payload(len);
        if (!read_exact(payload.data(), len)) return 1;
        if (len < 8) return 1;
        const std::uint32_t w = le_u32(payload.data()), h = le_u32(payload.data() + 4);
        if (std::uint64_t(len) != 8 + std::uint64_t(w) * h * 12) return 1;

        std::vector<float> out = probs;
        if (area) {
            // Fraction of pixels within 30 of pure red, relative to a quarter of the image.
            std::size_t match = 0;
            for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
                const unsigned char* px = payload.data() + 8 + 12 * i;
                const double dr = le_f32(px) - 255.0, dg = le_f32(px + 4), db = le_f32(px + 8);
                if (dr * dr + dg * dg + db * db <= 30.0 * 30.0) ++match;
            }
            const double frac = w * h ? double(match) / double(std::size_t(w) * h) : 0.0;
            const float s = static_cast<float>(std::fmin(1.0, frac / 0.25));
            out = {1.0f - s, s};
        }
        if (wrong_length) out.push_back(0.0f);

        std::string resp;
        put_u32(resp, static_cast<std::uint32_t>(out.size() * 4));
        for (float p : out) put_f32(resp, p);
        if (!write_all(resp.data(), resp.size())) return 1;
    }
}
