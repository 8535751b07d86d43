#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "isosim/errors.hpp"
#include "isosim/rng.hpp"
#include "isosim/sim.hpp"
#include "isosim/workload.hpp"

namespace isosim {

/// Behavioral contract the rate search runs against. The shipped executor is
/// model-backed virtual time; a real measurement backend plugs in here.
class InferenceExecutor {
public:
    virtual ~InferenceExecutor() = default;
    /// One inference; returns elapsed seconds (> 0).
    virtual double run_one_inference() = 0;
    /// Clears measurement state between batches (optional for stateless executors).
    virtual void reset() {}
    virtual std::string description() const = 0;
};

/// Fixed-latency executor; handy as an exact oracle.
class ConstantLatencyExecutor final : public InferenceExecutor {
public:
    explicit ConstantLatencyExecutor(double latency_s) : latency_s_(latency_s) {}
    double run_one_inference() override { return latency_s_; }
    std::string description() const override {
        return "constant(" + std::to_string(latency_s_) + "s)";
    }

private:
    double latency_s_;
};

/// Virtual-time executor backed by a calibrated profile at a fixed
/// resource allocation (solo process, no contention).
class LatencyModelExecutor final : public InferenceExecutor {
public:
    LatencyModelExecutor(ModelProfile profile, double sms, double bw, double freq_hz,
                         double jitter, std::uint64_t seed)
        : profile_(std::move(profile)), jitter_(jitter), rng_(seed),
          base_(latency_core(profile_, sms, freq_hz, bw)) {}

    double run_one_inference() override {
        return base_ * (1.0 + jitter_ * rng_.next_unit());
    }
    std::string description() const override { return profile_.name + "@" + profile_.platform; }
    double base_latency() const { return base_; }

private:
    ModelProfile profile_;
    double jitter_;
    RandomStream rng_;
    double base_;
};

struct SearchConfig {
    int batch_size_n = 1000;
    int validation_batches_k = 3;
    int worst_count = 5;
    int step = 1;
    int f_floor = 1;
    int ascend_cap_factor = 10; // ascend stops at this multiple of the estimate

    void validate() const {
        if (batch_size_n < worst_count) throw DomainError("batch_size_n must be >= worst_count");
        if (validation_batches_k < 1) throw DomainError("validation_batches_k must be >= 1");
        if (worst_count < 1) throw DomainError("worst_count must be >= 1");
        if (step < 1) throw DomainError("step must be >= 1");
        if (f_floor < 1) throw DomainError("f_floor must be >= 1");
    }
};

enum class SearchPhase { Estimate, Ascend, Descend, Validate };

inline const char* to_string(SearchPhase p) {
    switch (p) {
        case SearchPhase::Estimate: return "estimate";
        case SearchPhase::Ascend: return "ascend";
        case SearchPhase::Descend: return "descend";
        case SearchPhase::Validate: return "validate";
    }
    return "?";
}

struct SearchTraceEntry {
    SearchPhase phase;
    int f;
    int violations;
};

struct SearchTrace {
    std::vector<SearchTraceEntry> entries;
    int final_f = 0;
    bool cap_reached = false;
};

struct SearchResult {
    int f = 0;
    SearchTrace trace;
    bool cap_reached = false;
};

/// The k largest values (multiset semantics).
inline std::vector<double> select_worst_times(std::vector<double> times, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > times.size())
        throw DomainError("select_worst_times: k out of range");
    std::partial_sort(times.begin(), times.begin() + k, times.end(), std::greater<double>());
    times.resize(k);
    return times;
}

/// Starting rate: inverse mean of the worst sample times, floored and
/// clamped above the search floor.
inline int initial_estimate(const std::vector<double>& times, const SearchConfig& cfg) {
    if (times.empty()) throw DomainError("initial_estimate: empty sample");
    const auto worst = select_worst_times(times, std::min<int>(cfg.worst_count,
                                                              static_cast<int>(times.size())));
    const double mean = std::accumulate(worst.begin(), worst.end(), 0.0) / worst.size();
    const int f = static_cast<int>(std::floor(1.0 / mean));
    return std::max(f, cfg.f_floor);
}

/// Issues n inferences at rate f against the executor and counts deadline
/// violations. The stream is serial: a late inference delays the next start.
/// Completion within the timing-grid tolerance of the deadline is met.
inline int run_timed_batch(InferenceExecutor& executor, int n, int f) {
    if (f < 1) throw DomainError("run_timed_batch: f must be >= 1");
    if (n < 1) throw DomainError("run_timed_batch: n must be >= 1");
    const double period = 1.0 / f;
    int violations = 0;
    double prev_done = 0.0;
    for (int k = 0; k < n; ++k) {
        const double issue = static_cast<double>(k) * period;
        const double start = std::max(issue, prev_done);
        double elapsed;
        try {
            elapsed = executor.run_one_inference();
        } catch (const std::exception& e) {
            throw BatchError(std::string("executor failed: ") + e.what());
        }
        if (!(elapsed > 0.0)) throw BatchError("executor returned non-positive elapsed time");
        const double done = start + elapsed;
        if (done > issue + period + kTimeTolS) ++violations;
        prev_done = done;
    }
    return violations;
}

/// Iterative maximum-rate search: estimate from a first batch, raise the
/// rate until a violation appears, then validate the preceding candidate
/// with K clean batches, stepping down after any failed validation.
inline SearchResult search_max_frequency(InferenceExecutor& executor, const SearchConfig& cfg = {}) {
    cfg.validate();
    SearchResult out;
    SearchTrace& trace = out.trace;

    executor.reset();
    std::vector<double> sample(static_cast<std::size_t>(cfg.batch_size_n));
    for (auto& t : sample) {
        t = executor.run_one_inference();
        if (!(t > 0.0)) throw BatchError("executor returned non-positive elapsed time");
    }
    int f = initial_estimate(sample, cfg);
    trace.entries.push_back({SearchPhase::Estimate, f, 0});

    const long cap = static_cast<long>(f) * cfg.ascend_cap_factor;
    int candidate = -1;
    while (true) {
        executor.reset();
        const int v = run_timed_batch(executor, cfg.batch_size_n, f);
        trace.entries.push_back({SearchPhase::Ascend, f, v});
        if (v == 0) {
            if (f >= cap) {
                out.cap_reached = true;
                candidate = f;
                break;
            }
            f += cfg.step;
        } else {
            candidate = f - cfg.step;
            if (candidate < cfg.f_floor)
                throw SearchFailed(executor.description() + ": violations at the floor rate " +
                                   std::to_string(cfg.f_floor));
            trace.entries.push_back({SearchPhase::Descend, candidate, v});
            break;
        }
    }

    while (true) {
        bool valid = true;
        for (int i = 0; i < cfg.validation_batches_k; ++i) {
            executor.reset();
            const int v = run_timed_batch(executor, cfg.batch_size_n, candidate);
            trace.entries.push_back({SearchPhase::Validate, candidate, v});
            if (v > 0) {
                valid = false;
                break;
            }
        }
        if (valid) break;
        candidate -= cfg.step;
        if (candidate < cfg.f_floor)
            throw SearchFailed(executor.description() + ": no stable rate at or above " +
                               std::to_string(cfg.f_floor));
        trace.entries.push_back({SearchPhase::Descend, candidate, 0});
    }

    out.f = candidate;
    trace.final_f = candidate;
    trace.cap_reached = out.cap_reached;
    return out;
}

/// Trace dump: one line per probe.
inline std::string trace_csv(const SearchTrace& trace) {
    std::string out = "phase,f,violations\n";
    for (const auto& e : trace.entries) {
        out += to_string(e.phase);
        out += ',';
        out += std::to_string(e.f);
        out += ',';
        out += std::to_string(e.violations);
        out += '\n';
    }
    return out;
}

} // namespace isosim
