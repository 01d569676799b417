#include "dgp/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

namespace dgp::wire {

namespace {

void put_u32_be(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v >> 24));
    buf.push_back(static_cast<std::uint8_t>(v >> 16));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
    buf.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_u32_le(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64_le(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64_le(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64_le(buf, bits);
}

struct Cursor {
    const std::uint8_t* p;
    std::size_t remaining;

    void need(std::size_t n) const {
        if (remaining < n) throw TransportError("wire: truncated payload");
    }
    std::uint32_t u32_be() {
        need(4);
        std::uint32_t v = get_u32_be(p);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint32_t u32_le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint64_t u64_le() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        return v;
    }
    double f64_le() {
        std::uint64_t bits = u64_le();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
};

}  // namespace

std::vector<std::uint8_t> encode_task(SchemeId scheme, const KernelSpec& spec,
                                      const Shard& shard, double sigma2, int m,
                                      const GridSpec& grid) {
    if (grid.size() < 1) throw ConfigError("encode_task: empty grid forbidden");
    nlohmann::json config{
        {"kernel", spec},
        {"m", m},
        {"scheme", scheme_name(scheme)},
        {"shard_id", shard.worker_id},
        {"sigma2", sigma2},
    };
    const std::string cfg = config.dump();  // sorted keys, no whitespace

    std::vector<std::uint8_t> out;
    out.reserve(cfg.size() + 64 +
                8 * static_cast<std::size_t>(shard.X.size() + shard.Y.size() +
                                             grid.points.size()));
    put_u32_be(out, static_cast<std::uint32_t>(cfg.size()));
    out.insert(out.end(), cfg.begin(), cfg.end());

    // shard block, same layout as the synthetic-dataset binary format
    put_u64_le(out, static_cast<std::uint64_t>(shard.X.rows()));
    put_u32_le(out, static_cast<std::uint32_t>(shard.X.cols()));
    put_f64_le(out, sigma2);
    put_u64_le(out, 0);  // seed slot, unused for shards
    for (Eigen::Index i = 0; i < shard.X.rows(); ++i)
        for (Eigen::Index k = 0; k < shard.X.cols(); ++k) put_f64_le(out, shard.X(i, k));
    for (Eigen::Index i = 0; i < shard.Y.size(); ++i) put_f64_le(out, shard.Y[i]);

    // grid block
    put_u32_le(out, static_cast<std::uint32_t>(grid.size()));
    put_u32_le(out, static_cast<std::uint32_t>(grid.dim()));
    put_f64_le(out, grid.weight);
    for (Eigen::Index i = 0; i < grid.points.rows(); ++i)
        for (Eigen::Index k = 0; k < grid.points.cols(); ++k)
            put_f64_le(out, grid.points(i, k));

    if (out.size() + 1 > kMaxFrame) throw TransportError("encode_task: frame too large");
    return out;
}

TaskRequest decode_task(const std::vector<std::uint8_t>& payload) {
    Cursor c{payload.data(), payload.size()};
    const std::uint32_t cfg_len = c.u32_be();
    if (cfg_len > payload.size()) throw TransportError("decode_task: bad config length");
    nlohmann::json config;
    try {
        config = nlohmann::json::parse(c.bytes(cfg_len));
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("decode_task: bad config json: ") + e.what());
    }

    TaskRequest req;
    try {
        req.scheme = scheme_from_name(config.at("scheme").get<std::string>());
        req.spec = config.at("kernel").get<KernelSpec>();
        req.m = config.at("m").get<int>();
        req.sigma2 = config.at("sigma2").get<double>();
        req.shard.worker_id = config.at("shard_id").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("decode_task: bad config: ") + e.what());
    }

    const auto n = static_cast<Eigen::Index>(c.u64_le());
    const auto d = static_cast<Eigen::Index>(c.u32_le());
    c.f64_le();  // sigma2 copy
    c.u64_le();  // seed slot
    if (n < 0 || d < 1 || d > 16 || static_cast<std::uint64_t>(n) > kMaxFrame / 8)
        throw TransportError("decode_task: implausible shard header");
    c.need(static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * 8);
    req.shard.X.resize(n, d);
    req.shard.Y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) req.shard.X(i, k) = c.f64_le();
    for (Eigen::Index i = 0; i < n; ++i) req.shard.Y[i] = c.f64_le();

    const auto G = static_cast<Eigen::Index>(c.u32_le());
    const auto gd = static_cast<Eigen::Index>(c.u32_le());
    if (G < 1 || gd < 1 || gd > 16 || static_cast<std::uint64_t>(G) > kMaxFrame / 8)
        throw TransportError("decode_task: implausible grid header");
    req.grid.weight = c.f64_le();
    req.grid.points.resize(G, gd);
    for (Eigen::Index i = 0; i < G; ++i)
        for (Eigen::Index k = 0; k < gd; ++k) req.grid.points(i, k) = c.f64_le();
    if (c.remaining != 0) throw TransportError("decode_task: trailing bytes");
    return req;
}

std::vector<std::uint8_t> encode_result(const TaskResult& result) {
    const Eigen::Index G = result.mean.size();
    std::vector<std::uint8_t> out;
    out.reserve(16 + 8 * static_cast<std::size_t>(G + G * (G + 1) / 2));
    put_u32_le(out, static_cast<std::uint32_t>(result.shard_id));
    put_u32_le(out, static_cast<std::uint32_t>(G));
    for (Eigen::Index i = 0; i < G; ++i) put_f64_le(out, result.mean[i]);
    // packed lower triangle, row-major
    for (Eigen::Index i = 0; i < G; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) put_f64_le(out, result.cov(i, j));
    if (out.size() + 1 > kMaxFrame) throw TransportError("encode_result: frame too large");
    return out;
}

TaskResult decode_result(const std::vector<std::uint8_t>& payload) {
    Cursor c{payload.data(), payload.size()};
    TaskResult r;
    r.shard_id = static_cast<int>(c.u32_le());
    const auto G = static_cast<Eigen::Index>(c.u32_le());
    if (G < 1 || static_cast<std::uint64_t>(G) > 65536)
        throw TransportError("decode_result: implausible grid size");
    r.mean.resize(G);
    for (Eigen::Index i = 0; i < G; ++i) r.mean[i] = c.f64_le();
    r.cov.resize(G, G);
    for (Eigen::Index i = 0; i < G; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = c.f64_le();
            r.cov(i, j) = v;
            r.cov(j, i) = v;
        }
    if (c.remaining != 0) throw TransportError("decode_result: trailing bytes");
    return r;
}

namespace {

struct Socket {
    int fd = -1;
    Socket() = default;
    explicit Socket(int f) : fd(f) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& o) noexcept : fd(o.fd) { o.fd = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd = o.fd;
            o.fd = -1;
        }
        return *this;
    }
    ~Socket() { close_fd(); }
    void close_fd() {
        if (fd >= 0) {
            ::close(fd);
            fd = -1;
        }
    }
    bool valid() const { return fd >= 0; }
};

void send_all(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const ssize_t r = ::send(fd, data, len, MSG_NOSIGNAL);
        if (r <= 0) throw TransportError("wire: send failed");
        data += static_cast<std::size_t>(r);
        len -= static_cast<std::size_t>(r);
    }
}

bool recv_all(int fd, std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const ssize_t r = ::recv(fd, data, len, 0);
        if (r == 0) return false;  // clean close
        if (r < 0) throw TransportError("wire: recv failed");
        data += static_cast<std::size_t>(r);
        len -= static_cast<std::size_t>(r);
    }
    return true;
}

void write_frame(int fd, std::uint8_t tag, const std::vector<std::uint8_t>& payload) {
    const std::uint64_t len = payload.size() + 1;
    if (len > kMaxFrame) throw TransportError("wire: frame too large");
    std::vector<std::uint8_t> header;
    put_u32_be(header, static_cast<std::uint32_t>(len));
    header.push_back(tag);
    send_all(fd, header.data(), header.size());
    if (!payload.empty()) send_all(fd, payload.data(), payload.size());
}

// Returns false on clean connection close before a frame starts.
bool read_frame(int fd, std::uint8_t& tag, std::vector<std::uint8_t>& payload) {
    std::uint8_t header[5];
    if (!recv_all(fd, header, 4)) return false;
    const std::uint32_t len = get_u32_be(header);
    if (len < 1 || len > kMaxFrame) throw TransportError("wire: bad frame length");
    if (!recv_all(fd, header + 4, 1)) throw TransportError("wire: truncated frame");
    tag = header[4];
    payload.resize(len - 1);
    if (!payload.empty() && !recv_all(fd, payload.data(), payload.size()))
        throw TransportError("wire: truncated frame");
    return true;
}

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint) {
    const auto pos = endpoint.rfind(':');
    if (pos == std::string::npos)
        throw ConfigError("wire: endpoint must be host:port, got '" + endpoint + "'");
    const std::string host = endpoint.substr(0, pos);
    const int port = std::stoi(endpoint.substr(pos + 1));
    if (port < 1 || port > 65535) throw ConfigError("wire: bad port in '" + endpoint + "'");
    return {host.empty() ? "0.0.0.0" : host, static_cast<std::uint16_t>(port)};
}

Socket tcp_connect(const std::string& endpoint) {
    auto [host, port] = split_endpoint(endpoint);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
        throw TransportError("wire: cannot resolve " + endpoint);
    Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    if (!s.valid() || ::connect(s.fd, res->ai_addr, res->ai_addrlen) != 0) {
        ::freeaddrinfo(res);
        throw TransportError("wire: cannot connect to " + endpoint);
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(s.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return s;
}

std::vector<std::uint8_t> make_error_payload(std::uint32_t code, const std::string& msg) {
    std::vector<std::uint8_t> out;
    put_u32_le(out, code);
    put_u32_le(out, static_cast<std::uint32_t>(msg.size()));
    out.insert(out.end(), msg.begin(), msg.end());
    return out;
}

std::pair<std::uint32_t, std::string> parse_error_payload(
    const std::vector<std::uint8_t>& payload) {
    Cursor c{payload.data(), payload.size()};
    const std::uint32_t code = c.u32_le();
    const std::uint32_t len = c.u32_le();
    return {code, c.bytes(std::min<std::size_t>(len, c.remaining))};
}

// One connection; tasks processed sequentially. Returns the number of
// tasks completed.
long serve_connection(int fd, std::optional<long> remaining_tasks) {
    long done = 0;
    for (;;) {
        std::uint8_t tag = 0;
        std::vector<std::uint8_t> payload;
        try {
            if (!read_frame(fd, tag, payload)) return done;
        } catch (const TransportError&) {
            return done;  // malformed framing: close
        }
        try {
            if (tag == kTagPing) {
                write_frame(fd, kTagPong, {});
                continue;
            }
            if (tag != kTagAssignTask) {
                write_frame(fd, kTagWorkerError,
                            make_error_payload(kErrMalformed, "unexpected tag"));
                return done;
            }
            TaskRequest req;
            try {
                req = decode_task(payload);
            } catch (const std::exception& e) {
                write_frame(fd, kTagWorkerError, make_error_payload(kErrMalformed, e.what()));
                return done;
            }
            TaskResult result;
            result.shard_id = req.shard.worker_id;
            try {
                GridPosterior post =
                    local_posterior(req.scheme, req.spec, req.shard, req.sigma2, req.m, req.grid);
                result.mean = std::move(post.mean);
                result.cov = std::move(post.cov);
            } catch (const NumericalError& e) {
                write_frame(fd, kTagWorkerError, make_error_payload(kErrNumeric, e.what()));
                continue;
            } catch (const std::exception& e) {
                write_frame(fd, kTagWorkerError, make_error_payload(kErrInternal, e.what()));
                continue;
            }
            write_frame(fd, kTagTaskResult, encode_result(result));
            ++done;
            if (remaining_tasks && done >= *remaining_tasks) return done;
        } catch (const TransportError&) {
            return done;  // peer went away mid-reply
        }
    }
}

}  // namespace

int worker_serve(const std::string& endpoint, std::optional<long> max_tasks) {
    auto [host, port] = split_endpoint(endpoint);
    Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener.valid()) throw TransportError("worker: cannot create socket");
    int one = 1;
    ::setsockopt(listener.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        addr.sin_addr.s_addr = INADDR_ANY;
    if (::bind(listener.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw TransportError("worker: cannot bind " + endpoint);
    if (::listen(listener.fd, 16) != 0)
        throw TransportError("worker: cannot listen on " + endpoint);

    // Connections are served one at a time; each runs its tasks
    // sequentially, so the loop can check the remaining budget between
    // connections without racing the accept call.
    long tasks_left = max_tasks.value_or(-1);
    for (;;) {
        int fd = ::accept(listener.fd, nullptr, nullptr);
        if (fd < 0) break;
        Socket conn(fd);
        std::optional<long> budget;
        if (max_tasks) budget = std::max<long>(tasks_left, 0);
        const long done = serve_connection(conn.fd, budget);
        if (max_tasks) {
            tasks_left -= done;
            if (tasks_left <= 0) break;
        }
    }
    return 0;
}

AggregatedPosterior coordinate(const std::vector<std::string>& workers, SchemeId scheme,
                               const KernelSpec& spec, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& Y, double sigma2, int m,
                               const GridSpec& grid, Rng& rng, const RetryPolicy& retry,
                               const BarycenterOptions& opts) {
    if (workers.empty()) throw ConfigError("coordinate: no workers configured");
    std::vector<Shard> shards = shard(X, Y, m, rng);
    std::vector<std::vector<std::uint8_t>> tasks;
    tasks.reserve(shards.size());
    for (const auto& sh : shards)
        tasks.push_back(encode_task(scheme, spec, sh, sigma2, m, grid));

    std::vector<GridPosterior> locals(shards.size());
    std::vector<bool> have(shards.size(), false);

    // round-robin initial assignment; failed shards are rerouted
    std::mutex mu;
    std::vector<std::vector<std::size_t>> assignment(workers.size());
    for (std::size_t k = 0; k < shards.size(); ++k)
        assignment[k % workers.size()].push_back(k);
    std::vector<std::pair<std::size_t, int>> pending;  // shard, attempts used

    auto run_worker = [&](std::size_t w, std::vector<std::size_t> batch,
                          std::vector<std::pair<std::size_t, int>>& failed) {
        Socket conn;
        for (std::size_t idx = 0; idx < batch.size(); ++idx) {
            const std::size_t k = batch[idx];
            try {
                if (!conn.valid()) conn = tcp_connect(workers[w]);
                write_frame(conn.fd, kTagAssignTask, tasks[k]);
                std::uint8_t tag = 0;
                std::vector<std::uint8_t> payload;
                if (!read_frame(conn.fd, tag, payload))
                    throw TransportError("coordinate: connection closed by worker");
                if (tag == kTagWorkerError) {
                    auto [code, msg] = parse_error_payload(payload);
                    throw TransportError("coordinate: worker error " + std::to_string(code) +
                                         ": " + msg);
                }
                if (tag != kTagTaskResult)
                    throw TransportError("coordinate: unexpected reply tag");
                TaskResult r = decode_result(payload);
                if (r.shard_id < 0 || static_cast<std::size_t>(r.shard_id) >= shards.size())
                    throw TransportError("coordinate: bad shard id in result");
                std::lock_guard<std::mutex> lock(mu);
                locals[static_cast<std::size_t>(r.shard_id)].grid = grid;
                locals[static_cast<std::size_t>(r.shard_id)].mean = std::move(r.mean);
                locals[static_cast<std::size_t>(r.shard_id)].cov = std::move(r.cov);
                have[static_cast<std::size_t>(r.shard_id)] = true;
            } catch (const TransportError&) {
                conn.close_fd();
                std::lock_guard<std::mutex> lock(mu);
                failed.emplace_back(k, 1);
            }
        }
    };

    {
        std::vector<std::thread> pool;
        std::vector<std::vector<std::pair<std::size_t, int>>> failures(workers.size());
        for (std::size_t w = 0; w < workers.size(); ++w)
            pool.emplace_back(run_worker, w, assignment[w], std::ref(failures[w]));
        for (auto& t : pool) t.join();
        for (auto& f : failures) pending.insert(pending.end(), f.begin(), f.end());
    }

    // reroute failed shards sequentially across the remaining workers
    std::size_t next_worker = 0;
    while (!pending.empty()) {
        auto [k, attempts] = pending.back();
        pending.pop_back();
        if (attempts >= retry.max_attempts || !retry.route_elsewhere) {
            std::string ids;
            ids += std::to_string(k);
            for (const auto& [pk, pa] : pending) ids += "," + std::to_string(pk);
            throw TransportError("coordinate: shards still pending after retries: " + ids);
        }
        bool ok = false;
        for (std::size_t tries = 0; tries < workers.size() && !ok; ++tries) {
            const std::size_t w = (next_worker + tries) % workers.size();
            std::vector<std::pair<std::size_t, int>> failed;
            run_worker(w, {k}, failed);
            if (failed.empty()) {
                ok = true;
                next_worker = (w + 1) % workers.size();
            }
        }
        if (!ok) pending.emplace_back(k, attempts + 1);
    }

    for (std::size_t k = 0; k < shards.size(); ++k)
        if (!have[k])
            throw TransportError("coordinate: missing result for shard " + std::to_string(k));
    return aggregate(scheme, locals, rng, opts);
}

}  // namespace dgp::wire
