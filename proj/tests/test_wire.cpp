#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "dgp/synth.hpp"
#include "dgp/wire.hpp"

using namespace dgp;
using namespace dgp::wire;

namespace {

// Minimal independent frame client used as a protocol oracle.
struct Client {
    int fd = -1;

    explicit Client(int port) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            REQUIRE(fd >= 0);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons(static_cast<std::uint16_t>(port));
            ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
            if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return;
            ::close(fd);
            fd = -1;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        FAIL("cannot connect to worker");
    }
    ~Client() {
        if (fd >= 0) ::close(fd);
    }

    void send_raw(const std::vector<std::uint8_t>& bytes) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t r = ::send(fd, bytes.data() + off, bytes.size() - off, 0);
            REQUIRE(r > 0);
            off += static_cast<std::size_t>(r);
        }
    }

    void send_frame(std::uint8_t tag, const std::vector<std::uint8_t>& payload) {
        std::vector<std::uint8_t> buf;
        const std::uint32_t len = static_cast<std::uint32_t>(payload.size()) + 1;
        buf.push_back(static_cast<std::uint8_t>(len >> 24));
        buf.push_back(static_cast<std::uint8_t>(len >> 16));
        buf.push_back(static_cast<std::uint8_t>(len >> 8));
        buf.push_back(static_cast<std::uint8_t>(len));
        buf.push_back(tag);
        buf.insert(buf.end(), payload.begin(), payload.end());
        send_raw(buf);
    }

    // Returns false on clean close.
    bool recv_frame(std::uint8_t& tag, std::vector<std::uint8_t>& payload) {
        std::uint8_t header[5];
        std::size_t off = 0;
        while (off < 5) {
            const ssize_t r = ::recv(fd, header + off, 5 - off, 0);
            if (r == 0) return false;
            REQUIRE(r > 0);
            off += static_cast<std::size_t>(r);
        }
        const std::uint32_t len = (std::uint32_t(header[0]) << 24) |
                                  (std::uint32_t(header[1]) << 16) |
                                  (std::uint32_t(header[2]) << 8) | std::uint32_t(header[3]);
        REQUIRE(len >= 1);
        tag = header[4];
        payload.resize(len - 1);
        off = 0;
        while (off < payload.size()) {
            const ssize_t r = ::recv(fd, payload.data() + off, payload.size() - off, 0);
            if (r == 0) return false;
            REQUIRE(r > 0);
            off += static_cast<std::size_t>(r);
        }
        return true;
    }
};

struct WorkerFixture {
    std::thread thread;
    int port;

    explicit WorkerFixture(int port_, long max_tasks) : port(port_) {
        thread = std::thread([port_, max_tasks] {
            worker_serve("127.0.0.1:" + std::to_string(port_), max_tasks);
        });
    }
    ~WorkerFixture() {
        if (thread.joinable()) thread.join();
    }
};

Shard make_shard(int id, long n, std::uint64_t seed) {
    SyntheticDataset ds = generate(n, TruthSpec::paper_f0(), 1.0, seed);
    return Shard{id, ds.X, ds.Y};
}

}  // namespace

TEST_CASE("task payload round trips byte-identically") {
    Shard sh = make_shard(3, 16, 11);
    auto spec = KernelSpec::matern12(0.9);
    GridSpec grid = GridSpec::uniform(12);
    auto bytes = encode_task(SchemeId::MethodII, spec, sh, 1.25, 8, grid);
    TaskRequest req = decode_task(bytes);
    CHECK(req.scheme == SchemeId::MethodII);
    CHECK(req.shard.worker_id == 3);
    CHECK(req.m == 8);
    CHECK(req.sigma2 == 1.25);
    CHECK(req.shard.X == sh.X);
    CHECK(req.shard.Y == sh.Y);
    CHECK(req.grid.points == grid.points);
    CHECK(req.grid.weight == grid.weight);
    auto again = encode_task(req.scheme, req.spec, req.shard, req.sigma2, req.m, req.grid);
    CHECK(again == bytes);
}

TEST_CASE("empty grids are rejected at encode time") {
    Shard sh = make_shard(0, 4, 1);
    GridSpec empty;
    empty.points.resize(0, 1);
    CHECK_THROWS_AS(encode_task(SchemeId::Naive, KernelSpec::matern12(1.0), sh, 1.0, 1, empty),
                    ConfigError);
}

TEST_CASE("result payload round trips") {
    TaskResult r;
    r.shard_id = 7;
    r.mean = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0);
    GridSpec grid = GridSpec::uniform(9);
    r.cov = gram(KernelSpec::squared_exp(4.0), grid.points, grid.points);
    auto bytes = encode_result(r);
    TaskResult back = decode_result(bytes);
    CHECK(back.shard_id == 7);
    CHECK(back.mean == r.mean);
    CHECK(back.cov == r.cov);
    CHECK(encode_result(back) == bytes);
}

TEST_CASE("decoders survive fuzzed payloads") {
    Rng rng = make_rng(77);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 300);
    for (int rep = 0; rep < 2000; ++rep) {
        std::vector<std::uint8_t> junk(static_cast<std::size_t>(len(rng)));
        for (auto& b : junk) b = static_cast<std::uint8_t>(byte(rng));
        CHECK_THROWS_AS(decode_task(junk), std::exception);
        try {
            decode_result(junk);  // may succeed by luck; must not crash
        } catch (const TransportError&) {
        }
    }
    // bit flips in a valid task payload must never crash the decoder
    Shard sh = make_shard(0, 8, 5);
    auto valid = encode_task(SchemeId::MethodI, KernelSpec::matern12(1.0), sh, 1.0, 4,
                             GridSpec::uniform(6));
    std::uniform_int_distribution<std::size_t> pos(0, valid.size() - 1);
    for (int rep = 0; rep < 2000; ++rep) {
        auto mutated = valid;
        mutated[pos(rng)] ^= static_cast<std::uint8_t>(1 << (rep % 8));
        try {
            decode_task(mutated);
        } catch (const std::exception&) {
        }
    }
}

TEST_CASE("worker answers ping with pong") {
    WorkerFixture worker(38431, 0);
    {
        Client client(worker.port);
        client.send_frame(kTagPing, {});
        std::uint8_t tag = 0;
        std::vector<std::uint8_t> payload;
        REQUIRE(client.recv_frame(tag, payload));
        CHECK(tag == kTagPong);
        CHECK(payload.empty());
    }
}

TEST_CASE("worker task result equals the in-process local posterior") {
    WorkerFixture worker(38432, 1);
    Shard sh = make_shard(2, 20, 21);
    auto spec = KernelSpec::matern12(1.0);
    GridSpec grid = GridSpec::uniform(15);
    GridPosterior want = local_posterior(SchemeId::MethodII, spec, sh, 1.0, 4, grid);
    {
        Client client(worker.port);
        client.send_frame(kTagAssignTask, encode_task(SchemeId::MethodII, spec, sh, 1.0, 4, grid));
        std::uint8_t tag = 0;
        std::vector<std::uint8_t> payload;
        REQUIRE(client.recv_frame(tag, payload));
        REQUIRE(tag == kTagTaskResult);
        TaskResult r = decode_result(payload);
        CHECK(r.shard_id == 2);
        // f64 values travel losslessly, so the comparison is exact
        CHECK(r.mean == want.mean);
        CHECK(r.cov == want.cov);
    }
}

TEST_CASE("worker reports malformed tasks and closes the connection") {
    WorkerFixture worker(38433, 0);
    {
        Client client(worker.port);
        client.send_frame(kTagAssignTask, {0xde, 0xad, 0xbe, 0xef});
        std::uint8_t tag = 0;
        std::vector<std::uint8_t> payload;
        REQUIRE(client.recv_frame(tag, payload));
        CHECK(tag == kTagWorkerError);
        REQUIRE(payload.size() >= 4);
        const std::uint32_t code = std::uint32_t(payload[0]) | (std::uint32_t(payload[1]) << 8) |
                                   (std::uint32_t(payload[2]) << 16) |
                                   (std::uint32_t(payload[3]) << 24);
        CHECK(code == kErrMalformed);
        CHECK_FALSE(client.recv_frame(tag, payload));  // connection closed
    }
}

TEST_CASE("worker closes on truncated frames") {
    WorkerFixture worker(38434, 0);
    {
        Client client(worker.port);
        // announce a 100-byte frame, deliver only the tag, then close
        client.send_raw({0x00, 0x00, 0x00, 0x64, kTagPing});
        ::shutdown(client.fd, SHUT_WR);
        std::uint8_t tag = 0;
        std::vector<std::uint8_t> payload;
        CHECK_FALSE(client.recv_frame(tag, payload));
    }
}

TEST_CASE("coordinate equals in-process run_scheme for the same seed") {
    SyntheticDataset ds = generate(40, TruthSpec::paper_f0(), 1.0, 31);
    auto spec = KernelSpec::matern12(1.0);
    GridSpec grid = GridSpec::uniform(12);
    const int m = 4;

    Rng r1 = make_rng(17);
    AggregatedPosterior want = run_scheme(SchemeId::MethodI, spec, ds.X, ds.Y, 1.0, m, grid, r1);

    WorkerFixture worker(38435, m);
    Rng r2 = make_rng(17);
    AggregatedPosterior got = coordinate({"127.0.0.1:38435"}, SchemeId::MethodI, spec, ds.X,
                                         ds.Y, 1.0, m, grid, r2);
    CHECK(got.mean == want.mean);
    CHECK(got.cov == want.cov);
}

TEST_CASE("coordinate without workers is a configuration error") {
    SyntheticDataset ds = generate(8, TruthSpec::zero(), 1.0, 1);
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(coordinate({}, SchemeId::Naive, KernelSpec::matern12(1.0), ds.X, ds.Y,
                               1.0, 2, GridSpec::uniform(4), rng),
                    ConfigError);
}

TEST_CASE("coordinate reports unreachable workers as transport failures") {
    SyntheticDataset ds = generate(8, TruthSpec::zero(), 1.0, 2);
    Rng rng = make_rng(2);
    // nothing listens on this port
    CHECK_THROWS_AS(coordinate({"127.0.0.1:1"}, SchemeId::Naive, KernelSpec::matern12(1.0),
                               ds.X, ds.Y, 1.0, 2, GridSpec::uniform(4), rng),
                    TransportError);
}
