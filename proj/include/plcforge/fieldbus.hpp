#pragma once

// Modbus/TCP subset: frame codec, a register-map server, and a small HMI
// poller client. Four function codes are supported; 0x01/0x03 read the
// output images, 0x05/0x06 write the *input* images, which stands in for
// field sensors so one register map serves both sides. The wire stays
// plaintext in both profiles.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "plcforge/common.hpp"
#include "plcforge/netutil.hpp"
#include "plcforge/stlang.hpp"

namespace plcforge::fieldbus {

class ShortFrame : public Error {
public:
    explicit ShortFrame(const std::string& why) : Error("short/malformed frame: " + why) {}
};

class BadProtocolId : public Error {
public:
    explicit BadProtocolId(uint16_t v) : Error("bad protocol id " + std::to_string(v)) {}
};

class UnsupportedFunction : public Error {
public:
    explicit UnsupportedFunction(uint8_t f) : Error("unsupported function " + std::to_string(f)) {}
};

class Timeout : public Error {
public:
    explicit Timeout(const std::string& why) : Error("modbus timeout: " + why) {}
};

class ExceptionResponse : public Error {
public:
    explicit ExceptionResponse(uint8_t code)
        : Error("modbus exception " + std::to_string(code)), code(code) {}
    uint8_t code;
};

constexpr uint8_t kReadCoils = 0x01;
constexpr uint8_t kReadHoldingWords = 0x03;
constexpr uint8_t kWriteCoil = 0x05;
constexpr uint8_t kWriteWord = 0x06;
constexpr uint8_t kExceptionBit = 0x80;
constexpr uint8_t kExcIllegalFunction = 0x01;
constexpr uint8_t kExcIllegalAddress = 0x02;

struct Frame {
    uint16_t transaction_id = 0;
    uint16_t protocol_id = 0;
    uint8_t unit_id = 0;
    uint8_t function = 0;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

inline bool supported_function(uint8_t f) {
    uint8_t base = f & ~kExceptionBit;
    return base == kReadCoils || base == kReadHoldingWords || base == kWriteCoil ||
           base == kWriteWord;
}

inline void put_u16(Bytes& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v & 0xff));
}

inline uint16_t get_u16(const Bytes& b, size_t off) {
    return static_cast<uint16_t>((b[off] << 8) | b[off + 1]);
}

inline Bytes encode_frame(const Frame& f) {
    if (f.protocol_id != 0) throw BadProtocolId(f.protocol_id);
    if (!supported_function(f.function)) throw UnsupportedFunction(f.function);
    if (f.payload.size() > 252) throw ShortFrame("payload too long");
    Bytes out;
    out.reserve(8 + f.payload.size());
    put_u16(out, f.transaction_id);
    put_u16(out, f.protocol_id);
    put_u16(out, static_cast<uint16_t>(2 + f.payload.size()));  // unit + function + payload
    out.push_back(f.unit_id);
    out.push_back(f.function);
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

inline Frame decode_frame(const Bytes& data) {
    if (data.size() < 8) throw ShortFrame("need at least 8 bytes");
    Frame f;
    f.transaction_id = get_u16(data, 0);
    f.protocol_id = get_u16(data, 2);
    uint16_t length = get_u16(data, 4);
    if (f.protocol_id != 0) throw BadProtocolId(f.protocol_id);
    if (length < 2 || data.size() != size_t(6) + length) throw ShortFrame("length field mismatch");
    f.unit_id = data[6];
    f.function = data[7];
    if (!supported_function(f.function)) throw UnsupportedFunction(f.function);
    f.payload.assign(data.begin() + 8, data.end());
    return f;
}

inline Frame make_read_coils(uint16_t txn, uint8_t unit, uint16_t addr, uint16_t qty) {
    Frame f{txn, 0, unit, kReadCoils, {}};
    put_u16(f.payload, addr);
    put_u16(f.payload, qty);
    return f;
}

inline Frame make_read_words(uint16_t txn, uint8_t unit, uint16_t addr, uint16_t qty) {
    Frame f{txn, 0, unit, kReadHoldingWords, {}};
    put_u16(f.payload, addr);
    put_u16(f.payload, qty);
    return f;
}

inline Frame make_write_coil(uint16_t txn, uint8_t unit, uint16_t addr, bool on) {
    Frame f{txn, 0, unit, kWriteCoil, {}};
    put_u16(f.payload, addr);
    put_u16(f.payload, on ? 0xFF00 : 0x0000);
    return f;
}

inline Frame make_write_word(uint16_t txn, uint8_t unit, uint16_t addr, uint16_t value) {
    Frame f{txn, 0, unit, kWriteWord, {}};
    put_u16(f.payload, addr);
    put_u16(f.payload, value);
    return f;
}

// ---------------------------------------------------------------------------
// Register map shared between the scan loop and the wire

struct SharedRegs {
    std::mutex mu;
    stlang::RegisterMap regs;
};

using SharedRegsPtr = std::shared_ptr<SharedRegs>;

// ---------------------------------------------------------------------------
// Server

class Server {
public:
    Server(SharedRegsPtr regs, std::string host = "127.0.0.1", int port = 0)
        : regs_(std::move(regs)), host_(std::move(host)), port_(port) {}

    ~Server() { stop(); }

    void start() {
        listener_ = net::tcp_listen(host_, port_);
        port_ = net::local_port(listener_);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (!running_.exchange(false)) return;
        listener_.reset();
        if (accept_thread_.joinable()) accept_thread_.join();
        std::lock_guard lk(workers_mu_);
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        workers_.clear();
    }

    int port() const { return port_; }
    const std::string& host() const { return host_; }

private:
    void accept_loop() {
        while (running_) {
            int fd = net::accept_with_timeout(listener_.fd(), 100);
            if (fd == 0) continue;
            if (fd < 0) {
                if (!running_) break;
                continue;
            }
            std::lock_guard lk(workers_mu_);
            workers_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    void serve_connection(int fd) {
        net::Socket sock(fd);
        net::set_recv_timeout(fd, 2000);
        while (running_) {
            uint8_t head[7];
            if (!net::recv_exact(fd, head, 7)) break;
            uint16_t length = static_cast<uint16_t>((head[4] << 8) | head[5]);
            if (length < 2 || length > 254) break;
            Bytes rest(length - 1);
            if (!net::recv_exact(fd, rest.data(), rest.size())) break;
            Bytes raw(head, head + 7);
            raw.insert(raw.end(), rest.begin(), rest.end());
            Frame req;
            try {
                req = decode_frame(raw);
            } catch (const UnsupportedFunction&) {
                uint16_t txn = get_u16(raw, 0);
                Frame exc{txn, 0, raw[6], static_cast<uint8_t>(raw[7] | kExceptionBit),
                          {kExcIllegalFunction}};
                Bytes out;
                put_u16(out, exc.transaction_id);
                put_u16(out, 0);
                put_u16(out, 3);
                out.push_back(exc.unit_id);
                out.push_back(exc.function);
                out.push_back(kExcIllegalFunction);
                net::send_all(fd, out.data(), out.size());
                continue;
            } catch (const Error&) {
                break;  // unframeable input; drop the connection
            }
            Frame resp = handle(req);
            Bytes out = encode_frame(resp);
            if (!net::send_all(fd, out.data(), out.size())) break;
        }
    }

    Frame exception(const Frame& req, uint8_t code) {
        return Frame{req.transaction_id, 0, req.unit_id,
                     static_cast<uint8_t>(req.function | kExceptionBit), {code}};
    }

    Frame handle(const Frame& req) {
        if (req.payload.size() != 4) return exception(req, kExcIllegalAddress);
        uint16_t addr = get_u16(req.payload, 0);
        uint16_t arg = get_u16(req.payload, 2);
        std::lock_guard lk(regs_->mu);
        auto& regs = regs_->regs;
        Frame resp{req.transaction_id, 0, req.unit_id, req.function, {}};
        switch (req.function) {
            case kReadCoils: {
                if (arg == 0 || size_t(addr) + arg > stlang::kCoilCount)
                    return exception(req, kExcIllegalAddress);
                uint8_t count = static_cast<uint8_t>((arg + 7) / 8);
                resp.payload.push_back(count);
                resp.payload.resize(1 + count, 0);
                for (uint16_t i = 0; i < arg; ++i)
                    if (regs.output_coils[addr + i]) resp.payload[1 + i / 8] |= uint8_t(1) << (i % 8);
                return resp;
            }
            case kReadHoldingWords: {
                if (arg == 0 || size_t(addr) + arg > stlang::kWordCount)
                    return exception(req, kExcIllegalAddress);
                resp.payload.push_back(static_cast<uint8_t>(2 * arg));
                for (uint16_t i = 0; i < arg; ++i) put_u16(resp.payload, regs.holding_words[addr + i]);
                return resp;
            }
            case kWriteCoil: {
                if (addr >= stlang::kCoilCount) return exception(req, kExcIllegalAddress);
                regs.input_coils[addr] = arg == 0xFF00;
                resp.payload = req.payload;  // echo
                return resp;
            }
            case kWriteWord: {
                if (addr >= stlang::kWordCount) return exception(req, kExcIllegalAddress);
                regs.input_words[addr] = arg;
                resp.payload = req.payload;  // echo
                return resp;
            }
            default: return exception(req, kExcIllegalFunction);
        }
    }

    SharedRegsPtr regs_;
    std::string host_;
    int port_;
    net::Socket listener_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
};

// ---------------------------------------------------------------------------
// HMI poller client

class Client {
public:
    Client(std::string host, int port, int timeout_ms = 2000)
        : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

    // Issues 0x01 and returns the decoded bits; fresh transaction id each call.
    std::vector<bool> read_coils(uint16_t addr, uint16_t qty) {
        Frame resp = roundtrip(make_read_coils(next_txn(), 1, addr, qty));
        std::vector<bool> bits;
        for (uint16_t i = 0; i < qty; ++i)
            bits.push_back((resp.payload.at(1 + i / 8) >> (i % 8)) & 1);
        return bits;
    }

    std::vector<uint16_t> read_words(uint16_t addr, uint16_t qty) {
        Frame resp = roundtrip(make_read_words(next_txn(), 1, addr, qty));
        std::vector<uint16_t> words;
        for (uint16_t i = 0; i < qty; ++i) words.push_back(get_u16(resp.payload, 1 + 2 * i));
        return words;
    }

    void write_coil(uint16_t addr, bool on) { roundtrip(make_write_coil(next_txn(), 1, addr, on)); }

    void write_word(uint16_t addr, uint16_t value) {
        roundtrip(make_write_word(next_txn(), 1, addr, value));
    }

    uint16_t last_transaction_id() const { return last_txn_; }

    // Full request/response exchange; exposed so the tap scenarios can
    // inspect echoes.
    Frame roundtrip(const Frame& req) {
        ensure_connected();
        Bytes out = encode_frame(req);
        if (!net::send_all(sock_.fd(), out.data(), out.size())) {
            sock_.reset();
            throw Timeout("send failed");
        }
        uint8_t head[7];
        if (!net::recv_exact(sock_.fd(), head, 7)) {
            sock_.reset();
            throw Timeout("no response");
        }
        uint16_t length = static_cast<uint16_t>((head[4] << 8) | head[5]);
        Bytes rest(length - 1);
        if (!net::recv_exact(sock_.fd(), rest.data(), rest.size())) {
            sock_.reset();
            throw Timeout("truncated response");
        }
        Bytes raw(head, head + 7);
        raw.insert(raw.end(), rest.begin(), rest.end());
        Frame resp = decode_frame(raw);
        if (resp.function & kExceptionBit)
            throw ExceptionResponse(resp.payload.empty() ? 0 : resp.payload[0]);
        return resp;
    }

private:
    void ensure_connected() {
        if (sock_.valid()) return;
        sock_ = net::tcp_connect(host_, port_);
        if (!sock_.valid()) throw Timeout("connect to " + host_ + ":" + std::to_string(port_));
        net::set_recv_timeout(sock_.fd(), timeout_ms_);
    }

    uint16_t next_txn() { return last_txn_ = txn_counter_++; }

    std::string host_;
    int port_;
    int timeout_ms_;
    net::Socket sock_;
    uint16_t last_txn_ = 0;
    std::atomic<uint16_t> txn_counter_{1};
};

}  // namespace plcforge::fieldbus
