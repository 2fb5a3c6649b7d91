#pragma once

// Shared plumbing: error base class, byte/string helpers, Base64 and hex
// codecs, asctime-style date formatting, seedable randomness and temp dirs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace plcforge {

namespace fs = std::filesystem;

using Bytes = std::vector<uint8_t>;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoFailure : public Error {
public:
    explicit IoFailure(const std::string& what) : Error("io failure: " + what) {}
};

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
    return std::string(b.begin(), b.end());
}

inline std::string hex_encode(const uint8_t* data, size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

inline std::string hex_encode(const Bytes& b) { return hex_encode(b.data(), b.size()); }

inline Bytes hex_decode(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw Error("hex: odd length");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw Error("hex: bad digit");
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

inline const std::string& base64_alphabet() {
    static const std::string tbl =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    return tbl;
}

inline std::string base64_encode(const uint8_t* data, size_t len) {
    const std::string& tbl = base64_alphabet();
    std::string out;
    out.reserve(((len + 2) / 3) * 4);
    size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    if (i + 1 == len) {
        uint32_t v = data[i] << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == len) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::string base64_encode(const Bytes& b) { return base64_encode(b.data(), b.size()); }
inline std::string base64_encode(std::string_view s) {
    return base64_encode(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

// Strict decoder: full alphabet check, correct '=' placement, no whitespace.
inline std::optional<Bytes> base64_decode(std::string_view in) {
    if (in.size() % 4 != 0) return std::nullopt;
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    Bytes out;
    out.reserve(in.size() / 4 * 3);
    for (size_t i = 0; i < in.size(); i += 4) {
        int pad = 0;
        int v[4];
        for (int k = 0; k < 4; ++k) {
            char c = in[i + k];
            if (c == '=') {
                if (i + 4 != in.size() || k < 2) return std::nullopt;
                ++pad;
                v[k] = 0;
            } else {
                if (pad > 0) return std::nullopt;
                v[k] = val(c);
                if (v[k] < 0) return std::nullopt;
            }
        }
        uint32_t q = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out.push_back(static_cast<uint8_t>(q >> 16));
        if (pad < 2) out.push_back(static_cast<uint8_t>((q >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<uint8_t>(q & 0xff));
    }
    return out;
}

// True iff s is nonempty and drawn from the Base64 alphabet (padding allowed).
inline bool is_base64_text(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                  (c >= '0' && c <= '9') || c == '+' || c == '/' || c == '=';
        if (!ok) return false;
    }
    return true;
}

// Classic asctime layout without the trailing newline: "Wed Feb 15 11:35:57 2023".
inline std::string format_asctime(std::time_t t) {
    std::tm tmv{};
    localtime_r(&t, &tmv);
    char buf[64];
    static const char* days[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
    static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    std::snprintf(buf, sizeof(buf), "%s %s %2d %02d:%02d:%02d %d", days[tmv.tm_wday],
                  months[tmv.tm_mon], tmv.tm_mday, tmv.tm_hour, tmv.tm_min, tmv.tm_sec,
                  1900 + tmv.tm_year);
    return buf;
}

inline int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Clock used for session ages and log timestamps; swap in a fake for tests.
using MsClock = std::function<int64_t()>;

inline MsClock system_ms_clock() {
    return [] { return steady_ms(); };
}

// /dev/urandom-backed fill, used for session tokens and key material.
inline void csprng_fill(uint8_t* out, size_t n) {
    static thread_local std::random_device rd;
    size_t i = 0;
    while (i < n) {
        unsigned int v = rd();
        for (size_t k = 0; k < sizeof(v) && i < n; ++k, ++i) out[i] = static_cast<uint8_t>(v >> (8 * k));
    }
}

inline Bytes csprng_bytes(size_t n) {
    Bytes b(n);
    csprng_fill(b.data(), n);
    return b;
}

// Deterministic byte stream for seeded harness runs.
class SeededBytes {
public:
    explicit SeededBytes(uint64_t seed) : eng_(seed) {}
    Bytes take(size_t n) {
        Bytes b(n);
        for (auto& c : b) c = static_cast<uint8_t>(eng_());
        return b;
    }
    uint32_t next_u32() { return static_cast<uint32_t>(eng_()); }

private:
    std::mt19937_64 eng_;
};

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

inline bool replace_first(std::string& s, std::string_view from, std::string_view to) {
    size_t pos = s.find(from);
    if (pos == std::string::npos) return false;
    s.replace(pos, from.size(), to);
    return true;
}

// Creates a unique directory under the system temp root.
inline fs::path make_temp_dir(const std::string& prefix) {
    for (int i = 0; i < 64; ++i) {
        fs::path p = fs::temp_directory_path() /
                     (prefix + "-" + hex_encode(csprng_bytes(6)));
        std::error_code ec;
        if (fs::create_directories(p, ec) && !ec) return p;
    }
    throw IoFailure("cannot create temp dir");
}

class TempDir {
public:
    explicit TempDir(const std::string& prefix = "plcforge") : path_(make_temp_dir(prefix)) {}
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline Bytes read_file_bytes(const fs::path& p) {
    std::error_code ec;
    auto size = fs::file_size(p, ec);
    if (ec) throw IoFailure("read " + p.string());
    Bytes data(size);
    FILE* f = std::fopen(p.c_str(), "rb");
    if (!f) throw IoFailure("open " + p.string());
    size_t got = size ? std::fread(data.data(), 1, size, f) : 0;
    std::fclose(f);
    data.resize(got);
    return data;
}

inline void write_file_bytes(const fs::path& p, const uint8_t* data, size_t len) {
    FILE* f = std::fopen(p.c_str(), "wb");
    if (!f) throw IoFailure("open for write " + p.string());
    size_t put = len ? std::fwrite(data, 1, len, f) : 0;
    std::fclose(f);
    if (put != len) throw IoFailure("short write " + p.string());
}

inline void write_file_bytes(const fs::path& p, const Bytes& b) {
    write_file_bytes(p, b.data(), b.size());
}

inline void write_file_text(const fs::path& p, std::string_view text) {
    write_file_bytes(p, reinterpret_cast<const uint8_t*>(text.data()), text.size());
}

inline std::string read_file_text(const fs::path& p) { return to_string(read_file_bytes(p)); }

}  // namespace plcforge
