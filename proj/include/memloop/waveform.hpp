#pragma once

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace memloop {

/// Parameters of the staircase triangular voltage protocol.
///
/// One run sweeps 0 -> +v_max -> 0 -> -v_max -> 0 in increments of dv,
/// dwelling on each level for `substeps` readings spaced dt apart.  When
/// `autozero_pad` is nonzero the voltage is additionally held for that long
/// before every reading, with the reading taken at the end of pad + dwell.
struct WaveformSpec {
    int n_total = 0;            ///< total reading count, always 4 * (v_max/dv) * substeps
    int substeps = 0;           ///< readings per voltage level
    double dt = 0.0;            ///< dwell per reading, seconds
    double dv = 0.0;            ///< voltage increment, volts
    double v_max = 0.0;         ///< peak voltage, volts
    double autozero_pad = 0.0;  ///< extra hold before each reading, seconds (0 disables)
};

namespace detail {

/// v_max/dv rounded to the nearest integer, or 0 when it is not close to one.
inline int voltage_step_ratio(double v_max, double dv) {
    if (!(dv > 0.0) || !(v_max > 0.0)) return 0;
    const double ratio = v_max / dv;
    const long long k = std::llround(ratio);
    if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * static_cast<double>(k)) return 0;
    return static_cast<int>(k);
}

}  // namespace detail

inline void validate(const WaveformSpec& spec) {
    if (!(spec.dt > 0.0) || !std::isfinite(spec.dt)) throw std::invalid_argument("waveform: dt must be > 0");
    if (!(spec.dv > 0.0) || !std::isfinite(spec.dv)) throw std::invalid_argument("waveform: dv must be > 0");
    if (!(spec.v_max > 0.0) || !std::isfinite(spec.v_max)) throw std::invalid_argument("waveform: v_max must be > 0");
    if (spec.substeps < 1) throw std::invalid_argument("waveform: substeps must be >= 1");
    if (spec.autozero_pad < 0.0 || !std::isfinite(spec.autozero_pad))
        throw std::invalid_argument("waveform: autozero_pad must be >= 0");
    const int m = detail::voltage_step_ratio(spec.v_max, spec.dv);
    if (m == 0) throw std::invalid_argument("waveform: v_max/dv must be a positive integer");
    if (spec.n_total != 4 * m * spec.substeps)
        throw std::invalid_argument("waveform: n_total must equal 4*(v_max/dv)*substeps");
}

/// Builds a spec with n_total derived from the other parameters.
inline WaveformSpec make_staircase_spec(int substeps, double dt, double dv, double v_max,
                                        double autozero_pad = 0.0) {
    WaveformSpec spec{0, substeps, dt, dv, v_max, autozero_pad};
    const int m = detail::voltage_step_ratio(v_max, dv);
    spec.n_total = 4 * m * substeps;
    validate(spec);
    return spec;
}

/// Number of voltage levels in one full sweep, 4 * (v_max/dv).
inline int level_count(const WaveformSpec& spec) {
    return 4 * detail::voltage_step_ratio(spec.v_max, spec.dv);
}

/// One constant-voltage hold.  The voltage applies from start_time until the
/// start of the next level (or the sequence end for the last level).
struct Level {
    double start_time = 0.0;
    double voltage = 0.0;
    int step_index = 0;
};

struct MeasurementInstant {
    double t = 0.0;
    int step_index = 0;
    int substep_index = 0;  ///< 1-based dwell index within the level
};

/// A piecewise-constant voltage drive plus the instants at which the current
/// is sampled.  Measurement instants are tied to levels by step_index; an
/// instant equal to a level boundary samples the level it is indexed to.
struct LevelSequence {
    std::vector<Level> levels;
    std::vector<MeasurementInstant> measurements;
    double end_time = 0.0;
};

namespace detail {

/// Signed level multipliers for one sweep: 1..m, m-1..0, -1..-m, -(m-1)..0.
/// Zero appears once per crossing, never duplicated at the turnarounds.
inline std::vector<int> level_grid(int m) {
    std::vector<int> grid;
    grid.reserve(4 * static_cast<std::size_t>(m));
    for (int k = 1; k <= m; ++k) grid.push_back(k);
    for (int k = m - 1; k >= 0; --k) grid.push_back(k);
    for (int k = 1; k <= m; ++k) grid.push_back(-k);
    for (int k = m - 1; k >= 0; --k) grid.push_back(-k);
    return grid;
}

}  // namespace detail

/// Discretized staircase triangle.  The envelope starts rising from 0 V, so
/// the first level is +dv.  Level k occupies substeps * (dt + autozero_pad)
/// seconds and its j-th reading falls at the end of the j-th pad + dwell.
inline LevelSequence build_staircase(const WaveformSpec& spec) {
    validate(spec);
    const int m = detail::voltage_step_ratio(spec.v_max, spec.dv);
    const auto grid = detail::level_grid(m);
    const double interval = spec.dt + spec.autozero_pad;
    const int x = spec.substeps;

    LevelSequence seq;
    seq.levels.reserve(grid.size());
    seq.measurements.reserve(static_cast<std::size_t>(spec.n_total));
    for (int k = 0; k < static_cast<int>(grid.size()); ++k) {
        const double voltage = grid[static_cast<std::size_t>(k)] * spec.dv;
        seq.levels.push_back({static_cast<double>(k) * x * interval, voltage, k});
        for (int j = 1; j <= x; ++j) {
            seq.measurements.push_back({static_cast<double>(k * x + j) * interval, k, j});
        }
    }
    seq.end_time = static_cast<double>(static_cast<int>(grid.size()) * x) * interval;
    return seq;
}

/// Ideal triangle value at time t: zero mean, period 1/omega, rising from 0.
inline double triangle_value(double v_max, double omega, double t) {
    const double period = 1.0 / omega;
    double phase = std::fmod(t, period) / period;
    if (phase < 0.0) phase += 1.0;
    if (phase < 0.25) return v_max * (4.0 * phase);
    if (phase < 0.75) return v_max * (2.0 - 4.0 * phase);
    return v_max * (4.0 * phase - 4.0);
}

namespace detail {

inline void check_periodic_args(double v_max, double omega, int samples_per_period,
                                int n_periods, int min_spp, const char* what) {
    if (!(v_max > 0.0) || !std::isfinite(v_max))
        throw std::invalid_argument(std::string(what) + ": v_max must be > 0");
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw std::invalid_argument(std::string(what) + ": omega must be > 0");
    if (samples_per_period < min_spp)
        throw std::invalid_argument(std::string(what) + ": samples_per_period must be >= " +
                                    std::to_string(min_spp));
    if (n_periods < 1) throw std::invalid_argument(std::string(what) + ": n_periods must be >= 1");
}

template <typename ValueAtPhase>
inline LevelSequence build_periodic(double omega, int samples_per_period, int n_periods,
                                    ValueAtPhase value_at_phase) {
    const double period = 1.0 / omega;
    const double h = period / static_cast<double>(samples_per_period);
    const int n = n_periods * samples_per_period;

    LevelSequence seq;
    seq.levels.reserve(static_cast<std::size_t>(n));
    seq.measurements.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        // Phase computed from the sample index, not from t, so values repeat
        // exactly across periods.
        const double phase = static_cast<double>(k % samples_per_period) /
                             static_cast<double>(samples_per_period);
        const double t = static_cast<double>(k) * h;
        seq.levels.push_back({t, value_at_phase(phase), k});
        seq.measurements.push_back({t, k, 1});
    }
    seq.end_time = static_cast<double>(n) * h;
    return seq;
}

}  // namespace detail

/// Sampled triangular wave, held constant between samples.  The sampled
/// values lie exactly on the ideal triangle; the piecewise-constant hold
/// converges to it as samples_per_period grows.
inline LevelSequence build_triangle(double v_max, double omega, int samples_per_period,
                                    int n_periods) {
    detail::check_periodic_args(v_max, omega, samples_per_period, n_periods, 8, "build_triangle");
    return detail::build_periodic(omega, samples_per_period, n_periods, [v_max](double phase) {
        if (phase < 0.25) return v_max * (4.0 * phase);
        if (phase < 0.75) return v_max * (2.0 - 4.0 * phase);
        return v_max * (4.0 * phase - 4.0);
    });
}

/// Sampled sine v(t) = v_max * sin(2*pi*omega*t), held constant between samples.
inline LevelSequence build_sine(double v_max, double omega, int samples_per_period, int n_periods) {
    detail::check_periodic_args(v_max, omega, samples_per_period, n_periods, 4, "build_sine");
    return detail::build_periodic(omega, samples_per_period, n_periods, [v_max](double phase) {
        return v_max * std::sin(2.0 * std::numbers::pi * phase);
    });
}

}  // namespace memloop
