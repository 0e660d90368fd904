#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace litmeta {

// Base class for all pipeline errors. Subclasses carry the error class name
// so CLI exit codes and logs can dispatch on it.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

// 64-bit FNV-1a. Used for content hashes, cache keys and stage stamps.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ULL) {
    uint64_t hash = seed;
    for (unsigned char byte : data) {
        hash ^= byte;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && is_ascii_space(s[begin])) ++begin;
    while (end > begin && is_ascii_space(s[end - 1])) --end;
    return std::string(s.substr(begin, end - begin));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Collapse every run of whitespace to a single space and trim the ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // leading spaces dropped
    for (char c : s) {
        if (is_ascii_space(c)) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_space = false;
        }
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (start <= s.size()) {
        size_t pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

// Split on a delimiter, trim each piece, drop empties. The usual treatment
// for semicolon-delimited cells in bibliographic exports.
inline std::vector<std::string> split_trimmed(std::string_view s, char delim) {
    std::vector<std::string> out;
    for (const auto& part : split(s, delim)) {
        std::string t = trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Case-insensitive search for `needle` in `haystack` with word boundaries on
// both sides. Returns the match position or npos. `needle` must already be
// lowercase; `haystack_lower` must be the lowercased text.
inline size_t find_word_bounded(std::string_view haystack_lower, std::string_view needle,
                                size_t start = 0) {
    if (needle.empty()) return std::string_view::npos;
    size_t pos = start;
    while ((pos = haystack_lower.find(needle, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_word_char(haystack_lower[pos - 1]);
        size_t end = pos + needle.size();
        bool right_ok = end >= haystack_lower.size() || !is_word_char(haystack_lower[end]);
        if (left_ok && right_ok) return pos;
        ++pos;
    }
    return std::string_view::npos;
}

inline bool contains_word_bounded(std::string_view haystack_lower, std::string_view needle) {
    return find_word_bounded(haystack_lower, needle) != std::string_view::npos;
}

// Word-bounded on the left only; the right side may continue with word
// characters. Used for stem matching (overestimat* families).
inline size_t find_word_prefix(std::string_view haystack_lower, std::string_view stem,
                               size_t start = 0) {
    if (stem.empty()) return std::string_view::npos;
    size_t pos = start;
    while ((pos = haystack_lower.find(stem, pos)) != std::string_view::npos) {
        if (pos == 0 || !is_word_char(haystack_lower[pos - 1])) return pos;
        ++pos;
    }
    return std::string_view::npos;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::optional<std::string> read_file_if_exists(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Write-temp-then-rename so readers never observe a partial file.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("IoError", "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("IoError", "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// Run fn(0..n-1) across `workers` threads. Callers keep determinism by
// writing results into index-addressed slots. The first exception thrown by
// any worker is rethrown after all threads join.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    size_t thread_count = std::max<size_t>(1, std::min<size_t>(workers, n));
    if (thread_count <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (size_t t = 0; t < thread_count; ++t) {
        threads.emplace_back([&] {
            size_t i;
            while ((i = next.fetch_add(1)) < n) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Format a double with `decimals` places, trimming a trailing ".0" run so
// whole numbers render bare (58.0 -> "58", 2.19 stays "2.19").
inline std::string format_trimmed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
    }
    return s;
}

inline std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

}  // namespace litmeta
