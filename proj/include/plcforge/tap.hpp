#pragma once

// Recording and rewriting TCP relay. Stands in for wire sniffing, packet
// replay and in-path MitM without raw sockets: clients are simply pointed
// at the tap address, modeling an attacker who is already interposed.
//
// The transcript is byte-faithful from the client's point of view: c2s
// entries hold exactly what the client sent (before any rewriting), s2c
// entries exactly what the client received (after any rewriting).

#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include <json.hpp>

#include "plcforge/common.hpp"
#include "plcforge/netutil.hpp"

namespace plcforge::tap {

class UpstreamRefused : public Error {
public:
    UpstreamRefused(const std::string& host, int port)
        : Error("upstream refused: " + host + ":" + std::to_string(port)) {}
};

enum class Dir { C2S, S2C };

struct TranscriptEntry {
    Dir dir;
    Bytes data;
    int64_t t_ms;
};

struct Transcript {
    std::vector<TranscriptEntry> entries;

    std::string direction_bytes(Dir d) const {
        std::string out;
        for (const auto& e : entries)
            if (e.dir == d) out.append(e.data.begin(), e.data.end());
        return out;
    }

    std::string c2s_bytes() const { return direction_bytes(Dir::C2S); }
    std::string s2c_bytes() const { return direction_bytes(Dir::S2C); }

    bool contains(std::string_view needle) const {
        return c2s_bytes().find(needle) != std::string::npos ||
               s2c_bytes().find(needle) != std::string::npos;
    }

    bool empty() const { return entries.empty(); }

    // Line-delimited records: {dir, t_ms, data_b64}.
    void save(const fs::path& p) const {
        std::string out;
        for (const auto& e : entries) {
            nlohmann::json j{{"dir", e.dir == Dir::C2S ? "c2s" : "s2c"},
                             {"t_ms", e.t_ms},
                             {"data_b64", base64_encode(e.data)}};
            out += j.dump() + "\n";
        }
        write_file_text(p, out);
    }

    static Transcript load(const fs::path& p) {
        Transcript t;
        for (const auto& line : split_lines(read_file_text(p))) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            TranscriptEntry e;
            e.dir = j.at("dir").get<std::string>() == "c2s" ? Dir::C2S : Dir::S2C;
            e.t_ms = j.at("t_ms").get<int64_t>();
            auto data = base64_decode(j.at("data_b64").get<std::string>());
            if (!data) throw Error("transcript: bad base64");
            e.data = *data;
            t.entries.push_back(std::move(e));
        }
        return t;
    }
};

// ---------------------------------------------------------------------------
// Rewrite rules

struct RewriteRule {
    enum class Kind { None, Pattern, CoilFlip, TlsTamper };
    Kind kind = Kind::None;
    Bytes pattern;      // Pattern: match in the c2s stream
    Bytes replacement;  // Pattern: spliced in (length may differ)
    uint16_t coil_addr = 0;

    static RewriteRule none() { return {}; }

    static RewriteRule pattern_c2s(std::string_view pat, std::string_view repl) {
        RewriteRule r;
        r.kind = Kind::Pattern;
        r.pattern = to_bytes(pat);
        r.replacement = to_bytes(repl);
        return r;
    }

    // Flips the value of 0x05 write-coil requests addressed at coil_addr,
    // and flips the echoed value back in the paired response so the client
    // sees its own intent confirmed.
    static RewriteRule coil_flip(uint16_t coil_addr) {
        RewriteRule r;
        r.kind = Kind::CoilFlip;
        r.coil_addr = coil_addr;
        return r;
    }

    // Blind in-path tamper against an opaque TLS stream: flips one byte in
    // the first client record carrying application-data framing.
    static RewriteRule tls_tamper() {
        RewriteRule r;
        r.kind = Kind::TlsTamper;
        return r;
    }
};

// ---------------------------------------------------------------------------
// Tap

class Tap {
public:
    Tap(std::string upstream_host, int upstream_port, RewriteRule rule = RewriteRule::none(),
        std::string listen_host = "127.0.0.1", int listen_port = 0)
        : upstream_host_(std::move(upstream_host)),
          upstream_port_(upstream_port),
          rule_(std::move(rule)),
          listen_host_(std::move(listen_host)),
          listen_port_(listen_port) {}

    ~Tap() { stop(); }

    void start() {
        listener_ = net::tcp_listen(listen_host_, listen_port_);
        listen_port_ = net::local_port(listener_);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (!running_.exchange(false)) return;
        listener_.reset();
        if (accept_thread_.joinable()) accept_thread_.join();
        std::vector<std::shared_ptr<Conn>> conns;
        {
            std::lock_guard lk(conns_mu_);
            conns = conns_;
        }
        for (auto& c : conns) {
            ::shutdown(c->client.fd(), SHUT_RDWR);
            ::shutdown(c->upstream.fd(), SHUT_RDWR);
        }
        for (auto& c : conns) {
            if (c->t_c2s.joinable()) c->t_c2s.join();
            if (c->t_s2c.joinable()) c->t_s2c.join();
        }
        std::lock_guard lk(conns_mu_);
        conns_.clear();
    }

    int port() const { return listen_port_; }
    const std::string& host() const { return listen_host_; }

    Transcript transcript() const {
        std::lock_guard lk(transcript_mu_);
        return transcript_;
    }

    int upstream_refusals() const { return upstream_refusals_.load(); }

private:
    struct Conn {
        net::Socket client;
        net::Socket upstream;
        std::thread t_c2s;
        std::thread t_s2c;
        std::mutex mu;
        std::set<uint16_t> flipped_txns;
        bool tls_tampered = false;
    };

    void accept_loop() {
        while (running_) {
            int fd = net::accept_with_timeout(listener_.fd(), 100);
            if (fd == 0) continue;
            if (fd < 0) {
                if (!running_) break;
                continue;
            }
            auto conn = std::make_shared<Conn>();
            conn->client = net::Socket(fd);
            conn->upstream = net::tcp_connect(upstream_host_, upstream_port_);
            if (!conn->upstream.valid()) {
                ++upstream_refusals_;
                continue;  // drop the client; the relay has nowhere to go
            }
            conn->t_c2s = std::thread([this, conn] {
                pump(*conn, conn->client.fd(), conn->upstream.fd(), Dir::C2S);
            });
            conn->t_s2c = std::thread([this, conn] {
                pump(*conn, conn->upstream.fd(), conn->client.fd(), Dir::S2C);
            });
            std::lock_guard lk(conns_mu_);
            conns_.push_back(std::move(conn));
        }
    }

    void record(Dir dir, const uint8_t* data, size_t len) {
        std::lock_guard lk(transcript_mu_);
        transcript_.entries.push_back({dir, Bytes(data, data + len), steady_ms()});
    }

    void pump(Conn& conn, int src, int dst, Dir dir) {
        Bytes carry;
        uint8_t buf[8192];
        for (;;) {
            ssize_t n = ::recv(src, buf, sizeof(buf), 0);
            if (n <= 0) break;
            if (dir == Dir::C2S) record(dir, buf, static_cast<size_t>(n));
            carry.insert(carry.end(), buf, buf + n);
            Bytes out = drain(conn, carry, dir, false);
            if (!out.empty()) {
                if (dir == Dir::S2C) record(dir, out.data(), out.size());
                if (!net::send_all(dst, out.data(), out.size())) break;
            }
        }
        Bytes out = drain(conn, carry, dir, true);
        if (!out.empty()) {
            if (dir == Dir::S2C) record(dir, out.data(), out.size());
            net::send_all(dst, out.data(), out.size());
        }
        ::shutdown(dst, SHUT_WR);  // propagate half-close
    }

    // Pulls forwardable bytes out of the carry buffer, applying the rule.
    Bytes drain(Conn& conn, Bytes& carry, Dir dir, bool eof) {
        switch (rule_.kind) {
            case RewriteRule::Kind::None: return take_all(carry);
            case RewriteRule::Kind::Pattern: return drain_pattern(carry, dir, eof);
            case RewriteRule::Kind::CoilFlip: return drain_modbus(conn, carry, dir);
            case RewriteRule::Kind::TlsTamper: return drain_tls(conn, carry, dir);
        }
        return take_all(carry);
    }

    static Bytes take_all(Bytes& carry) {
        Bytes out;
        out.swap(carry);
        return out;
    }

    Bytes drain_pattern(Bytes& carry, Dir dir, bool eof) {
        if (dir != Dir::C2S) return take_all(carry);
        std::string s(carry.begin(), carry.end());
        std::string pat(rule_.pattern.begin(), rule_.pattern.end());
        std::string repl(rule_.replacement.begin(), rule_.replacement.end());
        size_t pos = 0;
        while ((pos = s.find(pat, pos)) != std::string::npos) {
            s.replace(pos, pat.size(), repl);
            pos += repl.size();
        }
        // Hold back only a trailing proper prefix of the pattern, so a match
        // straddling chunks is still caught and a stream that pauses (the
        // peer waiting to respond) is not stalled by withheld bytes.
        size_t hold = 0;
        if (!eof && !pat.empty()) {
            size_t max_k = std::min(s.size(), pat.size() - 1);
            for (size_t k = max_k; k >= 1; --k) {
                if (s.compare(s.size() - k, k, pat, 0, k) == 0) {
                    hold = k;
                    break;
                }
            }
        }
        Bytes out(s.begin(), s.end() - hold);
        carry.assign(s.end() - hold, s.end());
        return out;
    }

    Bytes drain_modbus(Conn& conn, Bytes& carry, Dir dir) {
        Bytes out;
        while (carry.size() >= 7) {
            uint16_t length = static_cast<uint16_t>((carry[4] << 8) | carry[5]);
            size_t total = size_t(6) + length;
            if (length < 2 || total > 260) {  // not modbus; give up rewriting
                out.insert(out.end(), carry.begin(), carry.end());
                carry.clear();
                break;
            }
            if (carry.size() < total) break;
            Bytes frame(carry.begin(), carry.begin() + total);
            carry.erase(carry.begin(), carry.begin() + total);
            uint16_t txn = static_cast<uint16_t>((frame[0] << 8) | frame[1]);
            uint8_t function = frame[7];
            if (function == 0x05 && total >= 12) {
                uint16_t addr = static_cast<uint16_t>((frame[8] << 8) | frame[9]);
                std::lock_guard lk(conn.mu);
                bool flip;
                if (dir == Dir::C2S) {
                    flip = addr == rule_.coil_addr;
                    if (flip) conn.flipped_txns.insert(txn);
                } else {
                    // Pair the response by transaction id, restore the
                    // client's intended value, and retire the pairing.
                    flip = conn.flipped_txns.erase(txn) > 0;
                }
                if (flip) {
                    uint16_t value = static_cast<uint16_t>((frame[10] << 8) | frame[11]);
                    uint16_t flipped = value == 0xFF00 ? 0x0000 : 0xFF00;
                    frame[10] = static_cast<uint8_t>(flipped >> 8);
                    frame[11] = static_cast<uint8_t>(flipped & 0xff);
                }
            }
            out.insert(out.end(), frame.begin(), frame.end());
        }
        return out;
    }

    Bytes drain_tls(Conn& conn, Bytes& carry, Dir dir) {
        if (dir != Dir::C2S) return take_all(carry);
        Bytes out;
        while (carry.size() >= 5) {
            uint8_t content_type = carry[0];
            uint16_t length = static_cast<uint16_t>((carry[3] << 8) | carry[4]);
            size_t total = size_t(5) + length;
            if (carry[1] != 0x03 || total > 5 + 18432) {  // not TLS framing
                out.insert(out.end(), carry.begin(), carry.end());
                carry.clear();
                break;
            }
            if (carry.size() < total) break;
            Bytes rec(carry.begin(), carry.begin() + total);
            carry.erase(carry.begin(), carry.begin() + total);
            std::lock_guard lk(conn.mu);
            if (!conn.tls_tampered && content_type == 0x17 && length > 0) {
                rec.back() ^= 0x01;
                conn.tls_tampered = true;
            }
            out.insert(out.end(), rec.begin(), rec.end());
        }
        return out;
    }

    std::string upstream_host_;
    int upstream_port_;
    RewriteRule rule_;
    std::string listen_host_;
    int listen_port_;
    net::Socket listener_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    mutable std::mutex transcript_mu_;
    Transcript transcript_;
    std::mutex conns_mu_;
    std::vector<std::shared_ptr<Conn>> conns_;
    std::atomic<int> upstream_refusals_{0};
};

// ---------------------------------------------------------------------------
// Replay

struct ReplayResult {
    bool transport_error = true;
    std::string response;
};

// Opens a fresh connection and writes the recorded client bytes verbatim,
// then collects whatever comes back until the peer closes. A peer that
// answers with TLS records is a handshake-level rejection: a stale
// transcript can never complete a handshake built on fresh randoms, so no
// application bytes can follow.
inline ReplayResult replay(const Transcript& t, const std::string& host, int port,
                           const std::string& bind_ip = "", int timeout_ms = 5000) {
    if (t.empty()) throw Error("replay: empty transcript");
    ReplayResult out;
    net::Socket s = net::tcp_connect(host, port, bind_ip);
    if (!s.valid()) return out;
    std::string c2s = t.c2s_bytes();
    bool sent = net::send_all(s.fd(), c2s);
    out.response = net::recv_until_closed(s.fd(), timeout_ms);
    bool tls_answer = out.response.size() >= 2 &&
                      (static_cast<uint8_t>(out.response[0]) == 0x15 ||
                       static_cast<uint8_t>(out.response[0]) == 0x16) &&
                      static_cast<uint8_t>(out.response[1]) == 0x03;
    out.transport_error = !sent || out.response.empty() || tls_answer;
    return out;
}

}  // namespace plcforge::tap
