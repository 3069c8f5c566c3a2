#include "edgehr/eval/latency.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

namespace edgehr::eval {

std::string LatencyStats::to_json() const {
    return nlohmann::json{{"op", op}, {"n_runs", n_runs}, {"mean_ms", mean_ms}, {"p50_ms", p50_ms}, {"p95_ms", p95_ms}}
        .dump();
}

LatencyStats benchmark_latency(const std::string& op, const std::function<void()>& fn, std::size_t n_warmup,
                               std::size_t n_runs) {
    if (n_runs < 1) throw Error(errc::invalid_argument, "benchmark needs at least one timed run");
    for (std::size_t i = 0; i < n_warmup; ++i) fn();

    std::vector<double> ms;
    ms.reserve(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    LatencyStats s;
    s.op = op;
    s.n_runs = n_runs;
    s.mean_ms = stats::mean(ms);
    s.p50_ms = stats::percentile_sorted(ms, 0.50);
    s.p95_ms = stats::percentile_sorted(ms, 0.95);
    return s;
}

} // namespace edgehr::eval
