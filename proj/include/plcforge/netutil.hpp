#pragma once

// Small POSIX socket layer shared by the fieldbus server, the tap and the
// harness clients. The HTTP client here is deliberately byte-oriented:
// attack playbooks need to control source addresses, send verbatim byte
// streams, and look at raw responses, which rules out a comfortable
// high-level client.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <map>
#include <string>

#include <openssl/err.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

#include "plcforge/common.hpp"

namespace plcforge::net {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { reset(); }
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() {
        int f = fd_;
        fd_ = -1;
        return f;
    }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline sockaddr_in make_addr(const std::string& ip, uint16_t port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    if (inet_pton(AF_INET, ip.c_str(), &a.sin_addr) != 1) throw Error("bad IPv4 address " + ip);
    return a;
}

// Connects to host:port; bind_ip, when nonempty, pins the source address
// (any 127.x.y.z works on loopback, which is how the harness models a
// second machine).
inline Socket tcp_connect(const std::string& host, int port, const std::string& bind_ip = "") {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) return {};
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    if (!bind_ip.empty()) {
        sockaddr_in src = make_addr(bind_ip, 0);
        if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&src), sizeof(src)) != 0) return {};
    }
    sockaddr_in dst = make_addr(host, static_cast<uint16_t>(port));
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&dst), sizeof(dst)) != 0) return {};
    return s;
}

inline Socket tcp_listen(const std::string& host, int port) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error("socket() failed");
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in a = make_addr(host, static_cast<uint16_t>(port));
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&a), sizeof(a)) != 0)
        throw Error("bind " + host + ":" + std::to_string(port) + " failed");
    if (::listen(s.fd(), 16) != 0) throw Error("listen failed");
    return s;
}

inline int local_port(const Socket& s) {
    sockaddr_in a{};
    socklen_t len = sizeof(a);
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&a), &len) != 0) return -1;
    return ntohs(a.sin_port);
}

inline std::string peer_ip(int fd) {
    sockaddr_in a{};
    socklen_t len = sizeof(a);
    if (::getpeername(fd, reinterpret_cast<sockaddr*>(&a), &len) != 0) return "";
    char buf[INET_ADDRSTRLEN] = {0};
    inet_ntop(AF_INET, &a.sin_addr, buf, sizeof(buf));
    return buf;
}

// -1 on error/stop, 0 on timeout, otherwise an accepted fd.
inline int accept_with_timeout(int listen_fd, int timeout_ms) {
    pollfd p{listen_fd, POLLIN, 0};
    int r = ::poll(&p, 1, timeout_ms);
    if (r <= 0) return r == 0 ? 0 : -1;
    int fd = ::accept(listen_fd, nullptr, nullptr);
    return fd >= 0 ? fd : -1;
}

inline bool send_all(int fd, const uint8_t* data, size_t len) {
    size_t off = 0;
    while (off < len) {
        ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

inline bool send_all(int fd, const std::string& s) {
    return send_all(fd, reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

inline void set_recv_timeout(int fd, int ms) {
    timeval tv{ms / 1000, (ms % 1000) * 1000};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

// Reads until EOF or timeout; returns whatever arrived.
inline std::string recv_until_closed(int fd, int timeout_ms = 5000) {
    set_recv_timeout(fd, timeout_ms);
    std::string out;
    char buf[8192];
    for (;;) {
        ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        out.append(buf, static_cast<size_t>(n));
    }
    return out;
}

inline bool recv_exact(int fd, uint8_t* out, size_t len) {
    size_t off = 0;
    while (off < len) {
        ssize_t n = ::recv(fd, out + off, len - off, 0);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Minimal HTTP

inline std::string url_encode(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[4];
            std::snprintf(buf, sizeof(buf), "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

inline std::string url_decode(std::string_view s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out.push_back(' ');
        } else if (s[i] == '%' && i + 2 < s.size()) {
            auto hexv = [](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                return -1;
            };
            int hi = hexv(s[i + 1]), lo = hexv(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>((hi << 4) | lo));
                i += 2;
            } else {
                out.push_back(s[i]);
            }
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

struct HttpResponse {
    bool transport_error = true;
    int status = 0;
    std::map<std::string, std::string> headers;  // lowercased names
    std::string body;
    std::string raw;

    std::string header(const std::string& name) const {
        auto it = headers.find(name);
        return it == headers.end() ? "" : it->second;
    }

    // Value of the session cookie, if any Set-Cookie carries one.
    std::string session_cookie() const {
        auto sc = header("set-cookie");
        auto pos = sc.find("session=");
        if (pos == std::string::npos) return "";
        auto end = sc.find(';', pos);
        return sc.substr(pos + 8, end == std::string::npos ? std::string::npos : end - pos - 8);
    }
};

inline HttpResponse parse_http_response(const std::string& raw) {
    HttpResponse r;
    r.raw = raw;
    if (raw.rfind("HTTP/1.", 0) != 0) return r;
    size_t line_end = raw.find("\r\n");
    if (line_end == std::string::npos) return r;
    size_t sp = raw.find(' ');
    if (sp == std::string::npos || sp + 4 > line_end) return r;
    r.status = std::atoi(raw.substr(sp + 1, 3).c_str());
    size_t head_end = raw.find("\r\n\r\n");
    if (head_end == std::string::npos) return r;
    size_t pos = line_end + 2;
    while (pos < head_end) {
        size_t eol = raw.find("\r\n", pos);
        std::string line = raw.substr(pos, eol - pos);
        pos = eol + 2;
        size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = line.substr(0, colon);
        for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        size_t vstart = line.find_first_not_of(' ', colon + 1);
        std::string value = vstart == std::string::npos ? "" : line.substr(vstart);
        if (r.headers.count(name))
            r.headers[name] += "\n" + value;
        else
            r.headers[name] = value;
    }
    r.body = raw.substr(head_end + 4);
    r.transport_error = false;
    return r;
}

inline std::string build_http_request(const std::string& method, const std::string& path,
                                      const std::string& host,
                                      const std::map<std::string, std::string>& headers,
                                      const std::string& body) {
    std::string req = method + " " + path + " HTTP/1.1\r\n";
    req += "Host: " + host + "\r\n";
    for (auto& [k, v] : headers) req += k + ": " + v + "\r\n";
    if (!body.empty() || method == "POST") req += "Content-Length: " + std::to_string(body.size()) + "\r\n";
    req += "Connection: close\r\n\r\n";
    req += body;
    return req;
}

// One-shot plaintext request; returns the parsed response or a transport
// error marker. The request carries Connection: close, so reading to EOF
// yields exactly one response. No half-close: some servers treat an early
// FIN as a dead connection and drop the request.
inline HttpResponse http_request_raw(const std::string& host, int port, const std::string& request,
                                     const std::string& bind_ip = "", int timeout_ms = 5000) {
    Socket s = tcp_connect(host, port, bind_ip);
    HttpResponse err;
    if (!s.valid()) return err;
    if (!send_all(s.fd(), request)) return err;
    std::string raw = recv_until_closed(s.fd(), timeout_ms);
    if (raw.empty()) return err;
    return parse_http_response(raw);
}

// ---------------------------------------------------------------------------
// Minimal TLS client (real handshake; optional certificate pinning)

struct TlsClientResult {
    bool transport_error = true;
    std::string raw;
};

inline TlsClientResult tls_request_raw(const std::string& host, int port, const std::string& request,
                                       const std::string& bind_ip = "",
                                       const std::string& pin_fingerprint_sha256 = "",
                                       int timeout_ms = 5000) {
    TlsClientResult out;
    Socket s = tcp_connect(host, port, bind_ip);
    if (!s.valid()) return out;
    set_recv_timeout(s.fd(), timeout_ms);

    SSL_CTX* ctx = SSL_CTX_new(TLS_client_method());
    if (!ctx) return out;
    SSL_CTX_set_verify(ctx, SSL_VERIFY_NONE, nullptr);  // self-signed peer; pin below instead
    SSL* ssl = SSL_new(ctx);
    if (!ssl) {
        SSL_CTX_free(ctx);
        return out;
    }
    SSL_set_fd(ssl, s.fd());
    bool ok = SSL_connect(ssl) == 1;
    if (ok && !pin_fingerprint_sha256.empty()) {
        X509* peer = SSL_get_peer_certificate(ssl);
        if (!peer) {
            ok = false;
        } else {
            unsigned char md[EVP_MAX_MD_SIZE];
            unsigned int md_len = 0;
            ok = X509_digest(peer, EVP_sha256(), md, &md_len) == 1 &&
                 hex_encode(md, md_len) == pin_fingerprint_sha256;
            X509_free(peer);
        }
    }
    if (ok) ok = SSL_write(ssl, request.data(), static_cast<int>(request.size())) ==
                 static_cast<int>(request.size());
    if (ok) {
        char buf[8192];
        for (;;) {
            int n = SSL_read(ssl, buf, sizeof(buf));
            if (n <= 0) break;
            out.raw.append(buf, static_cast<size_t>(n));
        }
        out.transport_error = out.raw.empty();
    }
    SSL_shutdown(ssl);
    SSL_free(ssl);
    SSL_CTX_free(ctx);
    return out;
}

}  // namespace plcforge::net
