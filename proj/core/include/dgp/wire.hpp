#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dgp/distributed.hpp"

namespace dgp::wire {

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Frame layout: [u32 BE length][u8 tag][payload]; length covers tag+payload.
inline constexpr std::uint8_t kTagAssignTask = 0x01;
inline constexpr std::uint8_t kTagTaskResult = 0x02;
inline constexpr std::uint8_t kTagWorkerError = 0x03;
inline constexpr std::uint8_t kTagPing = 0x04;
inline constexpr std::uint8_t kTagPong = 0x05;
inline constexpr std::uint64_t kMaxFrame = 256ull * 1024 * 1024;

inline constexpr std::uint32_t kErrMalformed = 1;
inline constexpr std::uint32_t kErrNumeric = 2;
inline constexpr std::uint32_t kErrInternal = 3;

struct TaskRequest {
    SchemeId scheme = SchemeId::Naive;
    KernelSpec spec;
    Shard shard;
    double sigma2 = 1.0;
    int m = 1;
    GridSpec grid;
};

struct TaskResult {
    int shard_id = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Canonical AssignTask payload: config as canonical JSON (sorted keys,
// no whitespace), then shard and grid binary blocks. See
// docs/wire-protocol.md for byte offsets.
std::vector<std::uint8_t> encode_task(SchemeId scheme, const KernelSpec& spec,
                                      const Shard& shard, double sigma2, int m,
                                      const GridSpec& grid);
TaskRequest decode_task(const std::vector<std::uint8_t>& payload);

std::vector<std::uint8_t> encode_result(const TaskResult& result);
TaskResult decode_result(const std::vector<std::uint8_t>& payload);

struct RetryPolicy {
    int max_attempts = 3;     // per shard, counting reroutes
    bool route_elsewhere = true;
};

// Blocking worker loop: binds host:port, answers Ping with Pong, runs
// local_posterior for each AssignTask. Stops after max_tasks tasks when
// given. Returns a process exit code.
int worker_serve(const std::string& endpoint, std::optional<long> max_tasks = std::nullopt);

// Distributes shards round-robin over the workers, collects exactly m
// TaskResults, then aggregates. Equals in-process run_scheme for the
// same seed.
AggregatedPosterior coordinate(const std::vector<std::string>& workers, SchemeId scheme,
                               const KernelSpec& spec, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& Y, double sigma2, int m,
                               const GridSpec& grid, Rng& rng,
                               const RetryPolicy& retry = {},
                               const BarycenterOptions& opts = {});

}  // namespace dgp::wire
