#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rmpd::cli {

/// Ordered key-value record written next to every run's outputs, one
/// `key=value` pair per line. Keys that name a subcommand option are replayed
/// by `--manifest`; the rest (outputs, calls, timing) are informational.
class RunManifest {
public:
    void set(const std::string& key, std::string value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, unsigned long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, std::size_t value) { set(key, static_cast<unsigned long long>(value)); }

    std::optional<std::string> get(const std::string& key) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    std::string str() const;
    void write(const std::filesystem::path& path) const;

    /// Parses `key=value` lines; blank lines and lines starting with '#' are
    /// skipped. Throws IoError on unreadable files or malformed lines.
    static RunManifest read(const std::filesystem::path& path);
    static RunManifest parse(const std::string& text);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace rmpd::cli
