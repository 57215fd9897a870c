#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memloop/detail/format.hpp"
#include "memloop/models.hpp"
#include "memloop/waveform.hpp"

namespace memloop {

/// Thrown when the integrated state leaves the finite range.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceSample {
    double t = 0.0;  ///< seconds
    double v = 0.0;  ///< volts
    double i = 0.0;  ///< amperes
    int step = 0;    ///< voltage level index, 0-based
    int sub = 0;     ///< dwell index within the level, 1-based (0 = unindexed)
};

/// A simulated or ingested current response.  `protocol` is set for traces
/// generated from a staircase spec; ingested traces may carry inferred
/// indices only, or none at all (sub == 0 everywhere).
struct Trace {
    std::vector<TraceSample> samples;
    std::map<std::string, std::string> meta;
    std::optional<WaveformSpec> protocol;

    bool indexed() const { return !samples.empty() && samples.front().sub >= 1; }
};

inline void validate(const Trace& trace) {
    double prev_t = -std::numeric_limits<double>::infinity();
    bool any_indexed = false;
    bool any_unindexed = false;
    for (const auto& s : trace.samples) {
        if (!std::isfinite(s.t) || !std::isfinite(s.v) || !std::isfinite(s.i))
            throw std::invalid_argument("trace: non-finite sample value");
        if (!(s.t > prev_t)) throw std::invalid_argument("trace: times must be strictly increasing");
        prev_t = s.t;
        if (s.step < 0) throw std::invalid_argument("trace: step index must be >= 0");
        if (s.sub < 0) throw std::invalid_argument("trace: substep index must be >= 0");
        (s.sub >= 1 ? any_indexed : any_unindexed) = true;
    }
    if (any_indexed && any_unindexed)
        throw std::invalid_argument("trace: mixed indexed and unindexed samples");
    if (trace.protocol) {
        validate(*trace.protocol);
        if (static_cast<int>(trace.samples.size()) != trace.protocol->n_total)
            throw std::invalid_argument("trace: sample count does not match protocol n_total");
    }
}

namespace detail {

inline int substep_count(double interval, double max_step) {
    const int n = static_cast<int>(std::ceil(interval / max_step - 1e-9));
    return n < 1 ? 1 : n;
}

/// Classical fixed-step 4th-order advance of w over [t0, t1] under constant
/// voltage.  The interval is cut into equal substeps no longer than max_step.
template <StateModel M>
inline double rk4_advance(const M& model, double w, double v, double t0, double t1,
                          double max_step) {
    const double interval = t1 - t0;
    if (!(interval > 0.0)) return w;
    const int n = substep_count(interval, max_step);
    const double h = interval / static_cast<double>(n);
    for (int k = 0; k < n; ++k) {
        const double k1 = model.derivative(w, v);
        const double k2 = model.derivative(w + 0.5 * h * k1, v);
        const double k3 = model.derivative(w + 0.5 * h * k2, v);
        const double k4 = model.derivative(w + h * k3, v);
        w = model.clamp(w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        if (!std::isfinite(w))
            throw NumericFailure("integration diverged: state non-finite at t=" +
                                 std::to_string(t0 + (k + 1) * h));
    }
    return w;
}

inline double min_measurement_spacing(const LevelSequence& drive) {
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < drive.measurements.size(); ++k) {
        const double d = drive.measurements[k].t - drive.measurements[k - 1].t;
        if (d > 0.0 && d < spacing) spacing = d;
    }
    return spacing;
}

}  // namespace detail

/// Integrates `model` under `drive` and samples the current at every
/// measurement instant.  Initial state is the model's 0 V rest state unless
/// overridden.  Deterministic: identical inputs give bit-identical traces.
template <StateModel M>
inline Trace run(const M& model, const LevelSequence& drive, double integrator_step,
                 std::optional<double> initial_state = std::nullopt) {
    if (drive.levels.empty()) throw std::invalid_argument("run: drive has no levels");
    if (!(integrator_step > 0.0) || !std::isfinite(integrator_step))
        throw std::invalid_argument("run: integrator_step must be > 0");
    const double spacing = detail::min_measurement_spacing(drive);
    if (std::isfinite(spacing) && integrator_step > spacing / 10.0 * (1.0 + 1e-9))
        throw std::invalid_argument("run: integrator_step exceeds a tenth of the dwell");

    Trace trace;
    trace.samples.reserve(drive.measurements.size());
    double w = initial_state ? *initial_state : model.initial_state();
    double t = drive.levels.front().start_time;
    std::size_t mi = 0;
    for (std::size_t k = 0; k < drive.levels.size(); ++k) {
        const Level& level = drive.levels[k];
        const double level_end =
            (k + 1 < drive.levels.size()) ? drive.levels[k + 1].start_time : drive.end_time;
        while (mi < drive.measurements.size() &&
               drive.measurements[mi].step_index == level.step_index) {
            const MeasurementInstant& m = drive.measurements[mi];
            if (m.t < t || m.t > level_end * (1.0 + 1e-12) + 1e-300)
                throw std::invalid_argument("run: measurement instant outside its level");
            w = detail::rk4_advance(model, w, level.voltage, t, m.t, integrator_step);
            t = m.t;
            trace.samples.push_back(
                {t, level.voltage, model.current(w, level.voltage), m.step_index, m.substep_index});
            ++mi;
        }
        w = detail::rk4_advance(model, w, level.voltage, t, level_end, integrator_step);
        t = level_end;
    }
    if (mi != drive.measurements.size())
        throw std::invalid_argument("run: measurements not ordered by level");

    model.annotate(trace.meta);
    trace.meta["integrator_step"] = detail::format_double(integrator_step);
    return trace;
}

/// Staircase run that records the generating protocol on the trace.
template <StateModel M>
inline Trace simulate_staircase(const M& model, const WaveformSpec& spec, double integrator_step) {
    Trace trace = run(model, build_staircase(spec), integrator_step);
    trace.protocol = spec;
    return trace;
}

/// Step response: 0 V held for 4 samples, then v_step held for `hold`.
/// The first post-step sample is taken at the step instant itself, so it
/// records the spike current before any relaxation.
template <StateModel M>
inline Trace dc_step_run(const M& model, double v_step, double hold, double sample_dt,
                         double integrator_step = 0.0) {
    if (!std::isfinite(v_step)) throw std::invalid_argument("dc_step_run: non-finite v_step");
    if (!(hold > 0.0)) throw std::invalid_argument("dc_step_run: hold must be > 0");
    if (!(sample_dt > 0.0)) throw std::invalid_argument("dc_step_run: sample_dt must be > 0");
    const int n_hold = static_cast<int>(std::floor(hold / sample_dt + 1e-9));
    if (n_hold < 2) throw std::invalid_argument("dc_step_run: hold must span at least two samples");

    LevelSequence seq;
    seq.levels.push_back({0.0, 0.0, 0});
    seq.levels.push_back({4.0 * sample_dt, v_step, 1});
    for (int j = 0; j < 4; ++j) seq.measurements.push_back({static_cast<double>(j) * sample_dt, 0, j + 1});
    for (int k = 0; k <= n_hold; ++k)
        seq.measurements.push_back({static_cast<double>(4 + k) * sample_dt, 1, k + 1});
    seq.end_time = static_cast<double>(4 + n_hold) * sample_dt;

    double step = integrator_step;
    if (!(step > 0.0)) step = std::min(sample_dt, model.time_scale()) / 100.0;
    Trace trace = run(model, seq, step);
    trace.meta["drive"] = "dc_step";
    trace.meta["v_step"] = detail::format_double(v_step);
    return trace;
}

}  // namespace memloop
