#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace edgehr::eval {

struct LatencyStats {
    std::string op;
    std::size_t n_runs = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;

    /// {op, n_runs, mean_ms, p50_ms, p95_ms}
    std::string to_json() const;
};

/// Wall-clock timing on the steady clock after `n_warmup` untimed calls.
/// Percentiles use linear interpolation between closest ranks.
LatencyStats benchmark_latency(const std::string& op, const std::function<void()>& fn, std::size_t n_warmup,
                               std::size_t n_runs);

} // namespace edgehr::eval
