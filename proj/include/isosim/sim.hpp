#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "isosim/device.hpp"
#include "isosim/errors.hpp"
#include "isosim/partition.hpp"
#include "isosim/rng.hpp"
#include "isosim/workload.hpp"

namespace isosim {

/// Timing-grid resolution: a completion within one nanosecond of its
/// deadline counts as met. Keeps the boundary case stable against
/// floating-point drift across long event chains.
inline constexpr double kTimeTolS = 1e-9;

enum class Role { Fixed, Adjusted };

inline const char* to_string(Role r) { return r == Role::Fixed ? "fixed" : "adjusted"; }

/// One inference process: a model issuing requests at a fixed rate.
struct ProcessSpec {
    std::string id;
    std::string model;
    int target_ims = 1;
    std::string partition_id; // required for MIG/GC, empty otherwise
    Role role = Role::Fixed;
    long issue_limit = 0; // per-process cap on issued inferences; 0 = duration default
};

/// Either a per-process inference count (run drains fully) or a wall-clock
/// horizon (in-flight work is cut off and reported).
struct SimDuration {
    int inferences_per_process = 0;
    double horizon_s = 0.0;

    static SimDuration count(int n) { return {n, 0.0}; }
    static SimDuration horizon(double s) { return {0, s}; }
};

struct SimConfig {
    PartitionPlan plan;
    std::vector<ProcessSpec> processes;
    SimDuration duration = SimDuration::count(1000);
    std::uint64_t seed = 1;
    double mig_residual_eps = 0.005;
    double mps_residual_eps = 0.007;
    std::optional<double> jitter_override;
    std::optional<DvfsParams> dvfs_override;
    std::optional<double> pinned_freq_hz; // disables the governor
    double telemetry_period_s = 0.010;
    bool record_events = false;
};

struct TelemetrySample {
    double t_s;
    double power_w;
    double freq_hz;
    double temp_c;
};

struct FreqEvent {
    double t_s;
    double freq_hz;
    bool throttled; // false = recovery
};

struct InferenceRecord {
    double t_issue;
    double t_start;
    double t_end;
    double deadline;
    std::string process;
    bool timeout;
};

struct ProcessStats {
    std::string id;
    long issued = 0;
    long completed = 0;
    long timeouts = 0;
    long in_flight_end = 0;

    double timeout_pct() const {
        return issued > 0 ? 100.0 * static_cast<double>(timeouts) / static_cast<double>(issued) : 0.0;
    }
    bool operator==(const ProcessStats& o) const {
        return id == o.id && issued == o.issued && completed == o.completed &&
               timeouts == o.timeouts && in_flight_end == o.in_flight_end;
    }
};

struct SimResult {
    std::vector<ProcessStats> processes;
    std::vector<TelemetrySample> telemetry;
    std::vector<FreqEvent> freq_events;
    std::vector<InferenceRecord> events;
    double end_time_s = 0.0;

    const ProcessStats& stats(const std::string& id) const {
        for (const auto& p : processes)
            if (p.id == id) return p;
        throw DomainError("no process '" + id + "' in result");
    }

    int throttle_count() const {
        int n = 0;
        for (const auto& e : freq_events)
            if (e.throttled) ++n;
        return n;
    }

    double mean_power_w() const {
        if (telemetry.empty()) return 0.0;
        double s = 0.0;
        for (const auto& t : telemetry) s += t.power_w;
        return s / telemetry.size();
    }

    double mean_freq_hz() const {
        if (telemetry.empty()) return 0.0;
        double s = 0.0;
        for (const auto& t : telemetry) s += t.freq_hz;
        return s / telemetry.size();
    }

    nlohmann::ordered_json canonical_json() const {
        nlohmann::ordered_json j;
        j["end_time_s"] = end_time_s;
        auto& procs = j["processes"] = nlohmann::ordered_json::array();
        for (const auto& p : processes)
            procs.push_back({{"id", p.id},
                             {"issued", p.issued},
                             {"completed", p.completed},
                             {"timeouts", p.timeouts},
                             {"in_flight_end", p.in_flight_end}});
        auto& tel = j["telemetry"] = nlohmann::ordered_json::array();
        for (const auto& t : telemetry)
            tel.push_back({t.t_s, t.power_w, t.freq_hz, t.temp_c});
        auto& fe = j["freq_events"] = nlohmann::ordered_json::array();
        for (const auto& e : freq_events)
            fe.push_back({e.t_s, e.freq_hz, e.throttled});
        return j;
    }
};

namespace detail {

class Engine {
public:
    Engine(const DeviceEntry& dev, const ProfileSet& profiles, const SimConfig& cfg)
        : dev_(dev), cfg_(cfg), regime_(cfg.plan.regime) {
        auto violations = validate_plan(cfg.plan, dev);
        if (!violations.empty()) throw ConfigError("invalid plan: " + violations.front());

        dvfs_ = cfg.dvfs_override.value_or(dev.dvfs);
        jitter_ = cfg.jitter_override.value_or(dev.jitter);
        per_sm_w_ = dvfs_.per_sm_power_w > 0.0
                        ? dvfs_.per_sm_power_w
                        : (dev.gpu.power_cap_w - dev.gpu.idle_power_w) / dev.gpu.total_sms;
        cap_w_ = dvfs_.cap_w > 0.0 ? dvfs_.cap_w : dev.gpu.power_cap_w;
        pinned_ = cfg.pinned_freq_hz.has_value();
        freq_ = pinned_ ? *cfg.pinned_freq_hz : dev.gpu.f_max_hz;
        fr_pow_ = std::pow(freq_ / dev.gpu.f_max_hz, dvfs_.power_exponent);
        temp_ = dev.thermal.t_amb_c;

        if (cfg.telemetry_period_s <= 0.0) throw ConfigError("telemetry_period_s must be > 0");
        const bool count_mode = cfg.duration.inferences_per_process > 0;
        const bool horizon_mode = cfg.duration.horizon_s > 0.0;
        if (count_mode == horizon_mode)
            throw ConfigError("duration must set exactly one of inference count or horizon");
        horizon_ = horizon_mode ? cfg.duration.horizon_s : -1.0;

        build_domains();
        build_processes(profiles);
    }

    SimResult run() {
        for (std::size_t i = 0; i < procs_.size(); ++i)
            push_event(0.0, kIssue, static_cast<int>(i), 0);
        push_event(cfg_.telemetry_period_s, kTick, 0, 0);

        while (!pq_.empty()) {
            const Event ev = pq_.top();
            pq_.pop();
            if (horizon_ >= 0.0 && ev.t > horizon_ + 1e-12) break;
            now_ = ev.t;
            touch_power();
            switch (ev.kind) {
                case kTick: on_tick(); break;
                case kCompletion: on_completion(ev.key, ev.ver); break;
                case kIssue: on_issue(ev.key); break;
            }
            last_event_t_ = now_;
        }

        SimResult res;
        for (auto& d : domains_) {
            if (d.run) procs_[d.run->proc].stats.in_flight_end++;
            for (const auto& p : d.fifo) procs_[p.proc].stats.in_flight_end++;
        }
        for (auto& p : procs_) res.processes.push_back(p.stats);
        res.telemetry = std::move(telemetry_);
        res.freq_events = std::move(freq_events_);
        res.events = std::move(events_);
        res.end_time_s = horizon_ >= 0.0 ? horizon_ : last_event_t_;
        return res;
    }

private:
    static constexpr int kTick = 0;
    static constexpr int kCompletion = 1;
    static constexpr int kIssue = 2;

    struct Event {
        double t;
        int kind;
        int key;
        std::uint64_t ver;
        std::uint64_t serial;
    };
    struct EventGreater {
        bool operator()(const Event& a, const Event& b) const {
            if (a.t != b.t) return a.t > b.t;
            if (a.kind != b.kind) return a.kind > b.kind;
            if (a.key != b.key) return a.key > b.key;
            return a.serial > b.serial;
        }
    };

    struct Pend {
        double issue_t;
        double deadline;
        int proc;
        long seq;
    };
    struct PendLess {
        const std::vector<std::string>* ids;
        bool operator()(const Pend& a, const Pend& b) const {
            if (a.issue_t != b.issue_t) return a.issue_t < b.issue_t;
            if (a.proc != b.proc) return (*ids)[a.proc] < (*ids)[b.proc];
            return a.seq < b.seq;
        }
    };

    struct Run {
        int proc = -1;
        long seq = 0;
        double issue_t = 0, deadline = 0, start_t = 0;
        double u = 1.0;          // jitter factor for this inference
        double switch_left = 0;  // host-side prefix, unaffected by shares
        double rem = 1.0;        // fraction of work remaining
        double last_t = 0;
        double len = -1.0;       // full-work duration under current shares
        double alloc = -1.0, bw = -1.0, infl = -1.0, freq = -1.0;
        std::uint64_t ver = 0;
    };

    struct Domain {
        std::set<Pend, PendLess> fifo;
        std::optional<Run> run;
        int last_proc = -1;
        const Partition* part = nullptr;
        bool shared = false; // multiple processes may serialize here
        Domain(PendLess less, const Partition* p, bool sh)
            : fifo(less), part(p), shared(sh) {}
    };

    struct Proc {
        const ProcessSpec* spec = nullptr;
        const ModelProfile* prof = nullptr;
        int domain = 0;
        double period = 1.0;
        long next_seq = 0;
        long budget = 0; // issue budget in count mode, otherwise LONG_MAX
        RandomStream rng;
        ProcessStats stats;
    };

    struct EffParams {
        double alloc, bw, infl;
    };

    void build_domains() {
        PendLess less{&proc_ids_};
        switch (regime_) {
            case Regime::StandAlone:
                domains_.emplace_back(less, &cfg_.plan.partitions[0], true);
                break;
            case Regime::Mps:
                for (std::size_t i = 0; i < cfg_.processes.size(); ++i)
                    domains_.emplace_back(less, &cfg_.plan.partitions[0], false);
                break;
            case Regime::Mig:
            case Regime::Gc:
                for (const auto& p : cfg_.plan.partitions)
                    domains_.emplace_back(less, &p, true);
                break;
        }
    }

    void build_processes(const ProfileSet& profiles) {
        for (const auto& ps : cfg_.processes) {
            if (ps.id.empty()) throw ConfigError("process ids must be non-empty");
            for (const auto& seen : proc_ids_)
                if (seen == ps.id) throw ConfigError("duplicate process id '" + ps.id + "'");
            if (ps.target_ims < 1) throw ConfigError("process '" + ps.id + "': target_ims must be >= 1");
            auto it = profiles.find(ps.model);
            if (it == profiles.end())
                throw ConfigError("process '" + ps.id + "': no calibrated profile for model '" +
                                  ps.model + "' on platform '" + dev_.profile_platform + "'");
            if (ps.issue_limit < 0) throw ConfigError("process '" + ps.id + "': negative issue_limit");
            Proc p;
            p.spec = &ps;
            p.prof = &it->second;
            p.period = 1.0 / ps.target_ims;
            p.budget = ps.issue_limit > 0 ? ps.issue_limit
                       : cfg_.duration.inferences_per_process > 0
                           ? cfg_.duration.inferences_per_process
                           : std::numeric_limits<long>::max();
            p.rng = RandomStream(mix_seed(cfg_.seed, hash_str(ps.id)));
            p.stats.id = ps.id;

            if (regime_ == Regime::Mig || regime_ == Regime::Gc) {
                if (ps.partition_id.empty())
                    throw ConfigError("process '" + ps.id + "': partition_id required under " +
                                      std::string(to_string(regime_)));
                int dom = -1;
                for (std::size_t i = 0; i < cfg_.plan.partitions.size(); ++i)
                    if (cfg_.plan.partitions[i].id == ps.partition_id) dom = static_cast<int>(i);
                if (dom < 0)
                    throw ConfigError("process '" + ps.id + "': unknown partition '" + ps.partition_id + "'");
                p.domain = dom;
            } else {
                if (!ps.partition_id.empty())
                    throw ConfigError("process '" + ps.id + "': partition_id not allowed under " +
                                      std::string(to_string(regime_)));
                p.domain = regime_ == Regime::Mps ? static_cast<int>(procs_.size()) : 0;
            }
            proc_ids_.push_back(ps.id);
            procs_.push_back(std::move(p));
        }
    }

    void push_event(double t, int kind, int key, std::uint64_t ver) {
        pq_.push(Event{t, kind, key, ver, ++serial_});
    }

    // Integrate SM-busy weight up to the current time. Call before any
    // state mutation; all mutations happen at event timestamps.
    void touch_power() {
        if (now_ > weight_t_) {
            weight_integral_ += busy_weight_ * fr_pow_ * (now_ - weight_t_);
            weight_t_ = now_;
        }
    }

    EffParams eff_params(int di, const Run& r) const {
        const Proc& p = procs_[r.proc];
        const double rel = dev_.gpu.mem_bandwidth_rel / p.prof->calib_bw_rel;
        switch (regime_) {
            case Regime::StandAlone:
                return {static_cast<double>(dev_.gpu.total_sms), rel, 1.0};
            case Regime::Mps: {
                const double share = static_cast<double>(dev_.gpu.total_sms) / active_;
                const double infl = active_ > 1 ? 1.0 + cfg_.mps_residual_eps : 1.0;
                return {share, rel / active_, infl};
            }
            case Regime::Mig: {
                const Partition* part = domains_[di].part;
                const double infl = active_ > 1 ? 1.0 + cfg_.mig_residual_eps : 1.0;
                return {static_cast<double>(part->sms), part->mem_share * rel, infl};
            }
            case Regime::Gc: {
                const Partition* part = domains_[di].part;
                return {static_cast<double>(part->sms), rel / active_, 1.0};
            }
        }
        return {1.0, 1.0, 1.0};
    }

    void advance(Run& r) {
        double e = now_ - r.last_t;
        if (e > 0.0) {
            const double s = std::min(e, r.switch_left);
            r.switch_left -= s;
            e -= s;
            if (e > 0.0) r.rem = std::max(0.0, r.rem - e / r.len);
        }
        r.last_t = now_;
    }

    // Re-derive every running inference's shares; reschedule only those whose
    // effective parameters actually changed (keeps untouched runs bit-stable).
    void recompute_all() {
        double weight = 0.0;
        for (std::size_t di = 0; di < domains_.size(); ++di) {
            auto& run_opt = domains_[di].run;
            if (!run_opt) continue;
            Run& r = *run_opt;
            const EffParams np = eff_params(static_cast<int>(di), r);
            const bool unchanged = r.len > 0.0 && np.alloc == r.alloc && np.bw == r.bw &&
                                   np.infl == r.infl && freq_ == r.freq;
            if (!unchanged) {
                if (r.len > 0.0) advance(r);
                r.alloc = np.alloc;
                r.bw = np.bw;
                r.infl = np.infl;
                r.freq = freq_;
                r.len = latency_core(*procs_[r.proc].prof, np.alloc, freq_, np.bw) * r.u * np.infl;
                r.ver = ++run_ver_;
                push_event(now_ + r.switch_left + r.rem * r.len, kCompletion, static_cast<int>(di), r.ver);
            }
            weight += std::min(r.alloc, static_cast<double>(procs_[r.proc].prof->sm_saturation));
        }
        busy_weight_ = weight;
    }

    void start_next(int di) {
        Domain& d = domains_[di];
        if (d.run || d.fifo.empty()) return;
        const Pend pend = *d.fifo.begin();
        d.fifo.erase(d.fifo.begin());
        Proc& p = procs_[pend.proc];
        Run r;
        r.proc = pend.proc;
        r.seq = pend.seq;
        r.issue_t = pend.issue_t;
        r.deadline = pend.deadline;
        r.start_t = now_;
        r.last_t = now_;
        r.u = 1.0 + jitter_ * p.rng.next_unit();
        r.switch_left = (d.shared && d.last_proc >= 0 && d.last_proc != pend.proc)
                            ? p.prof->switch_cost_s
                            : 0.0;
        d.last_proc = pend.proc;
        d.run = r;
        ++active_;
        recompute_all();
    }

    void on_issue(int pi) {
        Proc& p = procs_[pi];
        p.stats.issued++;
        Domain& d = domains_[p.domain];
        d.fifo.insert(Pend{now_, now_ + p.period, pi, p.next_seq});
        p.next_seq++;
        if (p.next_seq < p.budget) {
            const double t_next = static_cast<double>(p.next_seq) * p.period;
            if (horizon_ < 0.0 || t_next <= horizon_ + 1e-12)
                push_event(t_next, kIssue, pi, 0);
        }
        start_next(p.domain);
    }

    void on_completion(int di, std::uint64_t ver) {
        Domain& d = domains_[di];
        if (!d.run || d.run->ver != ver) return; // stale reschedule
        const Run r = *d.run;
        Proc& p = procs_[r.proc];
        p.stats.completed++;
        const bool late = now_ > r.deadline + kTimeTolS;
        if (late) p.stats.timeouts++;
        if (cfg_.record_events)
            events_.push_back({r.issue_t, r.start_t, now_, r.deadline, p.spec->id, late});
        d.run.reset();
        --active_;
        recompute_all();
        start_next(di);
    }

    bool work_remains() const {
        for (const auto& p : procs_)
            if (p.next_seq < p.budget) return true;
        for (const auto& d : domains_)
            if (d.run || !d.fifo.empty()) return true;
        return false;
    }

    void on_tick() {
        const double dt = now_ - last_tick_t_;
        const double pavg = dev_.gpu.idle_power_w + per_sm_w_ * (dt > 0.0 ? weight_integral_ / dt : 0.0);
        weight_integral_ = 0.0;

        if (!pinned_ && std::isfinite(cap_w_)) {
            if (pavg >= cap_w_ - 1e-6) {
                above_s_ += dt;
                below_s_ = 0.0;
                if (!throttled_ && above_s_ + 1e-12 >= dvfs_.sustain_window_s) {
                    set_freq(std::max(dev_.gpu.f_max_hz * dvfs_.throttle_factor, dev_.gpu.f_min_hz));
                    throttled_ = true;
                    freq_events_.push_back({now_, freq_, true});
                    above_s_ = 0.0;
                }
            } else {
                below_s_ += dt;
                above_s_ = 0.0;
                if (throttled_ && below_s_ + 1e-12 >= dvfs_.recover_window_s) {
                    set_freq(dev_.gpu.f_max_hz);
                    throttled_ = false;
                    freq_events_.push_back({now_, freq_, false});
                    below_s_ = 0.0;
                }
            }
        }

        temp_ += (dt / dev_.thermal.tau_s) * (dev_.thermal.t_amb_c + dev_.thermal.k_c_per_w * pavg - temp_);
        telemetry_.push_back({now_, pavg, freq_, temp_});
        last_tick_t_ = now_;

        const double t_next = now_ + cfg_.telemetry_period_s;
        const bool keep_ticking =
            horizon_ >= 0.0 ? t_next <= horizon_ + 1e-12 : work_remains();
        if (keep_ticking) push_event(t_next, kTick, 0, 0);
    }

    void set_freq(double f) {
        freq_ = f;
        fr_pow_ = std::pow(freq_ / dev_.gpu.f_max_hz, dvfs_.power_exponent);
        recompute_all();
    }

    const DeviceEntry& dev_;
    const SimConfig& cfg_;
    Regime regime_;
    DvfsParams dvfs_;
    double jitter_ = 0.0;
    double per_sm_w_ = 0.0;
    double cap_w_ = 0.0;
    bool pinned_ = false;
    double horizon_ = -1.0;

    std::vector<std::string> proc_ids_;
    std::vector<Proc> procs_;
    std::vector<Domain> domains_;
    std::priority_queue<Event, std::vector<Event>, EventGreater> pq_;
    std::uint64_t serial_ = 0;
    std::uint64_t run_ver_ = 0;
    int active_ = 0;

    double now_ = 0.0;
    double last_event_t_ = 0.0;
    double freq_ = 0.0;
    double fr_pow_ = 1.0;
    bool throttled_ = false;
    double above_s_ = 0.0, below_s_ = 0.0;
    double busy_weight_ = 0.0;
    double weight_integral_ = 0.0;
    double weight_t_ = 0.0;
    double last_tick_t_ = 0.0;
    double temp_ = 0.0;

    std::vector<TelemetrySample> telemetry_;
    std::vector<FreqEvent> freq_events_;
    std::vector<InferenceRecord> events_;
};

} // namespace detail

/// Runs one deterministic simulation of the configured processes on the
/// device. Inferences are issued strictly periodically; late completions
/// count as timeouts but still run to completion.
inline SimResult run_simulation(const DeviceEntry& dev, const ProfileSet& profiles,
                                const SimConfig& cfg) {
    detail::Engine engine(dev, profiles, cfg);
    return engine.run();
}

} // namespace isosim
