#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/core/error.hpp"

namespace fpp {

struct BenchReport {
  std::string operation;
  int warmup_iterations = 0;
  int measured_iterations = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double throughput_fps = 0.0;
  int threads = 1;
  std::string input_shape;

  nlohmann::json to_json() const {
    return {{"schema_version", 1},       {"operation", operation},     {"warmup_iterations", warmup_iterations},
            {"measured_iterations", measured_iterations}, {"mean_ms", mean_ms}, {"p50_ms", p50_ms},
            {"p95_ms", p95_ms},          {"throughput_fps", throughput_fps}, {"threads", threads},
            {"input_shape", input_shape}};
  }

  std::string table() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-16s %-18s %8s %10s %10s %10s %12s\n%-16s %-18s %8d %10.3f %10.3f %10.3f %12.1f\n",
                  "Operation", "Input", "Threads", "Mean (ms)", "p50 (ms)", "p95 (ms)", "Throughput", operation.c_str(),
                  input_shape.c_str(), threads, mean_ms, p50_ms, p95_ms, throughput_fps);
    return buf;
  }
};

/// Nearest-rank percentile of an ascending sample.
inline double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Runs `body` `warmup` times unmeasured, then `iterations` times timed one
/// call at a time on the steady clock. Input preparation belongs outside.
inline BenchReport run_benchmark(const std::string& name, int warmup, int iterations, const std::function<void()>& body,
                                 std::string input_shape = {}) {
  if (iterations <= 0) throw UsageError("iterations must be > 0");
  if (warmup < 0) throw UsageError("warmup must be >= 0");
  for (int i = 0; i < warmup; ++i) body();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto start = std::chrono::steady_clock::now();
    body();
    samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  BenchReport r;
  r.operation = name;
  r.warmup_iterations = warmup;
  r.measured_iterations = iterations;
  double total = 0.0;
  for (double s : samples) total += s;
  r.mean_ms = total / iterations;
  std::sort(samples.begin(), samples.end());
  r.p50_ms = percentile(samples, 50);
  r.p95_ms = percentile(samples, 95);
  r.throughput_fps = r.mean_ms > 0 ? 1000.0 / r.mean_ms : 0.0;
  r.input_shape = std::move(input_shape);
  return r;
}

}  // namespace fpp
