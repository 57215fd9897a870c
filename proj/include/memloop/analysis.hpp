#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memloop/simulate.hpp"

namespace memloop {

struct SlicePoint {
    double v = 0.0;
    double i = 0.0;
};

/// The I-V curve obtained by joining every sample that shares one dwell
/// index.  Slice x carries the frequency omega = 1/(x * N * dt), where N is
/// the total sample count of the trace.
struct FrequencySlice {
    int substep_index = 0;
    double omega = 0.0;
    std::vector<SlicePoint> points;  ///< one per voltage level, in drive order
};

namespace detail {

struct LevelRun {
    int step = 0;
    std::size_t begin = 0;
    std::size_t count = 0;
};

inline std::vector<LevelRun> step_runs(const std::vector<TraceSample>& samples) {
    std::vector<LevelRun> runs;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (runs.empty() || samples[k].step != runs.back().step)
            runs.push_back({samples[k].step, k, 0});
        ++runs.back().count;
    }
    return runs;
}

}  // namespace detail

/// Splits an indexed staircase trace into one slice per dwell index.
/// Every level must carry the dwell indices 1..x exactly once each; traces
/// without that structure (unindexed ingests, step-response runs) are
/// rejected.  dt comes from the recorded protocol when present, otherwise
/// from the mean sample spacing.
inline std::vector<FrequencySlice> extract_slices(const Trace& trace) {
    const auto& samples = trace.samples;
    if (samples.empty()) throw std::invalid_argument("extract_slices: empty trace");
    if (!trace.indexed())
        throw std::invalid_argument(
            "extract_slices: trace has no substep indexing (not a staircase trace)");

    int x = 0;
    for (const auto& s : samples) x = std::max(x, s.sub);
    const auto runs = detail::step_runs(samples);
    for (const auto& run : runs) {
        if (static_cast<int>(run.count) != x)
            throw std::invalid_argument("extract_slices: level " + std::to_string(run.step) +
                                        " has " + std::to_string(run.count) + " substeps, expected " +
                                        std::to_string(x));
        for (std::size_t j = 0; j < run.count; ++j) {
            if (samples[run.begin + j].sub != static_cast<int>(j) + 1)
                throw std::invalid_argument("extract_slices: level " + std::to_string(run.step) +
                                            " is missing substep " + std::to_string(j + 1));
        }
    }

    const auto n_total = static_cast<double>(samples.size());
    double dt = 0.0;
    if (trace.protocol) {
        dt = trace.protocol->dt;
    } else if (samples.size() >= 2) {
        dt = (samples.back().t - samples.front().t) / (n_total - 1.0);
    } else {
        throw std::invalid_argument("extract_slices: cannot infer dt from a single sample");
    }

    std::vector<FrequencySlice> slices;
    slices.reserve(static_cast<std::size_t>(x));
    for (int j = 1; j <= x; ++j) {
        FrequencySlice slice;
        slice.substep_index = j;
        slice.omega = 1.0 / (static_cast<double>(j) * n_total * dt);
        slice.points.reserve(runs.size());
        for (const auto& run : runs) {
            const auto& s = samples[run.begin + static_cast<std::size_t>(j - 1)];
            slice.points.push_back({s.v, s.i});
        }
        slices.push_back(std::move(slice));
    }
    return slices;
}

// ---------------------------------------------------------------------------
// Lobe areas
// ---------------------------------------------------------------------------

struct LobeAreas {
    double area_pos = 0.0;  ///< summed |signed area| over lobes with v > 0, volt*amperes
    double area_neg = 0.0;  ///< same over lobes with v < 0
};

inline double hysteresis_total(const LobeAreas& a) { return a.area_pos + a.area_neg; }

namespace detail {

inline int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

inline double shoelace_signed(const std::vector<SlicePoint>& poly) {
    double twice = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        const SlicePoint& a = poly[k];
        const SlicePoint& b = poly[(k + 1) % n];
        twice += a.v * b.i - b.v * a.i;
    }
    return 0.5 * twice;
}

/// Splits the closed loop into lobes delimited at v = 0 crossings (linear
/// interpolation) and at vertices lying exactly on the axis where the sign
/// flips across them.  Every closing chord lies on the v = 0 line, so the
/// signed lobe areas sum exactly to the signed area of the whole loop.
inline std::vector<std::vector<SlicePoint>> split_lobes(std::span<const SlicePoint> loop) {
    std::size_t start = 0;
    while (start < loop.size() && loop[start].v == 0.0) ++start;
    if (start == loop.size()) return {};  // every vertex sits on the axis

    std::vector<SlicePoint> ring;
    ring.reserve(loop.size() + 1);
    for (std::size_t k = 0; k < loop.size(); ++k) ring.push_back(loop[(start + k) % loop.size()]);
    ring.push_back(ring.front());

    std::vector<std::vector<SlicePoint>> lobes;
    std::vector<SlicePoint> cur{ring.front()};
    int cur_sign = sign_of(ring.front().v);
    for (std::size_t k = 1; k < ring.size(); ++k) {
        const SlicePoint a = ring[k - 1];
        const SlicePoint b = ring[k];
        if (a.v * b.v < 0.0) {
            const double ic = a.i + (b.i - a.i) * (0.0 - a.v) / (b.v - a.v);
            cur.push_back({0.0, ic});
            lobes.push_back(std::move(cur));
            cur = {{0.0, ic}};
            cur_sign = sign_of(b.v);
        } else if (a.v == 0.0 && b.v != 0.0 && sign_of(b.v) != cur_sign) {
            lobes.push_back(std::move(cur));
            cur = {a};
            cur_sign = sign_of(b.v);
        }
        cur.push_back(b);
    }
    if (lobes.empty()) {
        lobes.push_back(std::move(cur));
    } else {
        // The ring wraps inside one lobe: glue the tail onto the head.
        std::vector<SlicePoint> merged = std::move(cur);
        merged.insert(merged.end(), lobes.front().begin() + 1, lobes.front().end());
        lobes.front() = std::move(merged);
    }
    return lobes;
}

}  // namespace detail

/// Per-lobe |signed shoelace area|, bucketed by which side of v = 0 the lobe
/// lies on.  The loop is closed by joining the last point back to the first.
/// Degenerate (collinear) input yields zeros.
inline LobeAreas lobe_areas(std::span<const SlicePoint> loop) {
    if (loop.size() < 3) throw std::invalid_argument("lobe_areas: need at least 3 points");
    LobeAreas out;
    for (const auto& lobe : detail::split_lobes(loop)) {
        int sign = 0;
        for (const auto& p : lobe) {
            sign = detail::sign_of(p.v);
            if (sign != 0) break;
        }
        if (sign == 0) continue;
        const double area = std::abs(detail::shoelace_signed(lobe));
        (sign > 0 ? out.area_pos : out.area_neg) += area;
    }
    return out;
}

/// Largest |i| among the loop's v = 0 crossings (interpolated) and vertices.
/// Absent when the loop never touches or crosses the axis.
inline std::optional<double> pinch_current(std::span<const SlicePoint> loop) {
    std::optional<double> worst;
    auto consider = [&worst](double i) {
        const double mag = std::abs(i);
        if (!worst || mag > *worst) worst = mag;
    };
    const std::size_t n = loop.size();
    for (std::size_t k = 0; k < n; ++k) {
        const SlicePoint& a = loop[k];
        const SlicePoint& b = loop[(k + 1) % n];
        if (a.v == 0.0) consider(a.i);
        else if (a.v * b.v < 0.0) consider(a.i + (b.i - a.i) * (0.0 - a.v) / (b.v - a.v));
    }
    return worst;
}

/// Crossing current per slice, in slice order.
inline std::vector<std::optional<double>> pinch_metrics(std::span<const FrequencySlice> slices) {
    std::vector<std::optional<double>> out;
    out.reserve(slices.size());
    for (const auto& s : slices) out.push_back(pinch_current(s.points));
    return out;
}

// ---------------------------------------------------------------------------
// DC step-response features
// ---------------------------------------------------------------------------

struct DCFeatures {
    double i_max = 0.0;    ///< extremal-|i| sample after the step, amperes (signed)
    double t_peak = 0.0;   ///< time of that sample, seconds since the step
    double i_inf = 0.0;    ///< final sample, amperes
    double tau_inf = 0.0;  ///< epsilon-settling time, seconds since the step
    double epsilon = 0.0;
};

/// Features of a single held voltage step.  t_peak and tau_inf are measured
/// from the first post-step sample; tau_inf is the first time after which
/// |i - i_inf| stays within epsilon * |i_max - i_inf| for good.
inline DCFeatures dc_features(const Trace& trace, double epsilon = 0.01) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("dc_features: epsilon must be > 0");
    const auto& s = trace.samples;
    if (s.size() < 3) throw std::invalid_argument("dc_features: need at least 3 samples");

    std::size_t step_at = 0;
    for (std::size_t k = 1; k < s.size(); ++k) {
        if (s[k].v != s[0].v) { step_at = k; break; }
    }
    for (std::size_t k = step_at; k < s.size(); ++k) {
        if (s[k].v != s[step_at].v)
            throw std::invalid_argument("dc_features: trace is not a single held step");
    }
    const std::size_t n_post = s.size() - step_at;
    if (n_post < 3) throw std::invalid_argument("dc_features: fewer than 3 post-step samples");

    DCFeatures f;
    f.epsilon = epsilon;
    std::size_t peak = step_at;
    for (std::size_t k = step_at; k < s.size(); ++k) {
        if (std::abs(s[k].i) > std::abs(s[peak].i)) peak = k;
    }
    f.i_max = s[peak].i;
    f.t_peak = s[peak].t - s[step_at].t;
    f.i_inf = s.back().i;

    const double threshold = epsilon * std::abs(f.i_max - f.i_inf);
    std::size_t settle = step_at;
    for (std::size_t k = s.size(); k-- > step_at;) {
        if (std::abs(s[k].i - f.i_inf) > threshold) {
            settle = k + 1;
            break;
        }
    }
    f.tau_inf = s[settle].t - s[step_at].t;
    return f;
}

// ---------------------------------------------------------------------------
// I-t slices
// ---------------------------------------------------------------------------

struct TIPoint {
    double t = 0.0;
    double i = 0.0;
};

struct ItVisit {
    int step_index = 0;
    std::vector<TIPoint> points;
};

/// All samples taken at one staircase level, grouped per visit in time
/// order.  A level revisited on the falling leg yields a second group.
/// An absent level yields an empty result.
inline std::vector<ItVisit> it_slice(const Trace& trace, double v_level,
                                     std::optional<double> tolerance = std::nullopt) {
    double tol;
    if (tolerance) {
        tol = *tolerance;
    } else if (trace.protocol) {
        tol = trace.protocol->dv / 2.0;
    } else {
        double v_lo = 0.0, v_hi = 0.0;
        for (const auto& s : trace.samples) {
            v_lo = std::min(v_lo, s.v);
            v_hi = std::max(v_hi, s.v);
        }
        tol = (v_hi - v_lo) * 1e-6;
    }

    std::vector<ItVisit> visits;
    bool in_visit = false;
    for (const auto& s : trace.samples) {
        if (std::abs(s.v - v_level) <= tol) {
            if (!in_visit || visits.back().step_index != s.step) {
                visits.push_back({s.step, {}});
                in_visit = true;
            }
            visits.back().points.push_back({s.t, s.i});
        } else {
            in_visit = false;
        }
    }
    return visits;
}

// ---------------------------------------------------------------------------
// Hysteresis report
// ---------------------------------------------------------------------------

struct SliceRecord {
    int substep_index = 0;
    double omega = 0.0;
    double area_pos = 0.0;
    double area_neg = 0.0;
    double hysteresis = 0.0;        ///< H = area_pos + area_neg
    bool closed_by_segment = false; ///< loop endpoints differed and were joined
};

struct HysteresisReport {
    std::vector<SliceRecord> slices;
    std::optional<double> pinch_current;  ///< worst |i| at a v = 0 crossing, any slice
    bool monotone_in_x = false;           ///< H non-increasing in dwell index
    double fit_resistance = 0.0;          ///< origin-constrained fit of the slowest slice, ohms
    double fit_residual = 0.0;            ///< RMS current deviation of that fit, amperes
};

/// Per-slice lobe areas plus the slowest slice's ohmic fit.  Monotonicity is
/// judged with a slack of 1e-9 of the loop scale so that exactly-retraced
/// loops with only rounding residue count as monotone.
inline HysteresisReport hysteresis_report(std::span<const FrequencySlice> slices) {
    if (slices.size() < 2) throw std::invalid_argument("hysteresis_report: need at least 2 slices");

    HysteresisReport report;
    report.slices.reserve(slices.size());
    double loop_scale = 0.0;
    for (const auto& slice : slices) {
        const LobeAreas areas = lobe_areas(slice.points);
        SliceRecord rec;
        rec.substep_index = slice.substep_index;
        rec.omega = slice.omega;
        rec.area_pos = areas.area_pos;
        rec.area_neg = areas.area_neg;
        rec.hysteresis = hysteresis_total(areas);
        rec.closed_by_segment = slice.points.front().v != slice.points.back().v ||
                                slice.points.front().i != slice.points.back().i;
        report.slices.push_back(rec);

        double v_span = 0.0, i_span = 0.0;
        for (const auto& p : slice.points) {
            v_span = std::max(v_span, std::abs(p.v));
            i_span = std::max(i_span, std::abs(p.i));
        }
        loop_scale = std::max(loop_scale, v_span * i_span);
    }

    for (const auto& pc : pinch_metrics(slices)) {
        if (pc && (!report.pinch_current || *pc > *report.pinch_current)) report.pinch_current = pc;
    }

    const double slack = 1e-9 * loop_scale;
    report.monotone_in_x = true;
    for (std::size_t k = 1; k < report.slices.size(); ++k) {
        if (report.slices[k].hysteresis > report.slices[k - 1].hysteresis + slack) {
            report.monotone_in_x = false;
            break;
        }
    }

    const FrequencySlice* slowest = &slices[0];
    for (const auto& slice : slices) {
        if (slice.substep_index > slowest->substep_index) slowest = &slice;
    }
    double sum_vi = 0.0, sum_vv = 0.0;
    for (const auto& p : slowest->points) {
        sum_vi += p.v * p.i;
        sum_vv += p.v * p.v;
    }
    if (!(sum_vv > 0.0))
        throw std::invalid_argument("hysteresis_report: slice has no voltage excursion");
    const double conductance = sum_vi / sum_vv;
    if (conductance == 0.0)
        throw std::invalid_argument("hysteresis_report: slice currents fit zero conductance");
    report.fit_resistance = 1.0 / conductance;
    double sq = 0.0;
    for (const auto& p : slowest->points) {
        const double r = p.i - conductance * p.v;
        sq += r * r;
    }
    report.fit_residual = std::sqrt(sq / static_cast<double>(slowest->points.size()));
    return report;
}

// ---------------------------------------------------------------------------
// Frequency sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
    double omega = 0.0;       ///< drive frequency, hertz
    double hysteresis = 0.0;  ///< H of the final settled cycle, volt*amperes
    bool settled = false;     ///< cycle-to-cycle H change <= 1% at the last two periods
};

struct SweepReport {
    std::vector<SweepPoint> points;    ///< sorted by omega
    std::optional<double> omega_zero;  ///< argmax H; absent when H is zero everywhere
    std::optional<double> omega_star;  ///< onset of monotone decrease at or above omega_zero
    bool fingerprint_2 = false;        ///< such an omega_star exists
    bool fingerprint_3 = false;        ///< H at the top frequency <= 5% of H(omega_zero)
};

/// Sine sweep: each frequency is driven for settle_periods + 1 periods and H
/// is measured on the final cycle.  Frequencies whose last two cycles still
/// differ by more than 1% in H are flagged unsettled rather than rejected.
template <StateModel M>
inline SweepReport frequency_sweep(const M& model, double v_max, std::span<const double> omegas,
                                   int samples_per_period, int settle_periods) {
    if (omegas.size() < 5) throw std::invalid_argument("frequency_sweep: need at least 5 frequencies");
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        if (!(omegas[k] > 0.0) || !std::isfinite(omegas[k]))
            throw std::invalid_argument("frequency_sweep: frequencies must be positive");
        if (k > 0 && !(omegas[k] > omegas[k - 1]))
            throw std::invalid_argument("frequency_sweep: frequencies must be sorted ascending");
    }
    if (samples_per_period < 8)
        throw std::invalid_argument("frequency_sweep: samples_per_period must be >= 8");
    if (settle_periods < 1)
        throw std::invalid_argument("frequency_sweep: settle_periods must be >= 1");

    SweepReport report;
    report.points.reserve(omegas.size());
    double global_i_scale = 0.0;
    for (const double omega : omegas) {
        const LevelSequence drive = build_sine(v_max, omega, samples_per_period, settle_periods + 1);
        const double interval = 1.0 / omega / static_cast<double>(samples_per_period);
        const double step = std::min(model.time_scale() / 100.0, interval / 10.0);
        const Trace trace = run(model, drive, step);

        auto cycle_loop = [&](int period) {
            std::vector<SlicePoint> pts;
            pts.reserve(static_cast<std::size_t>(samples_per_period));
            const std::size_t begin = static_cast<std::size_t>(period) *
                                      static_cast<std::size_t>(samples_per_period);
            for (std::size_t k = 0; k < static_cast<std::size_t>(samples_per_period); ++k) {
                const auto& s = trace.samples[begin + k];
                pts.push_back({s.v, s.i});
            }
            return pts;
        };
        const auto last = cycle_loop(settle_periods);
        const auto prev = cycle_loop(settle_periods - 1);
        const double h_last = hysteresis_total(lobe_areas(last));
        const double h_prev = hysteresis_total(lobe_areas(prev));

        double i_scale = 0.0;
        for (const auto& p : last) i_scale = std::max(i_scale, std::abs(p.i));
        global_i_scale = std::max(global_i_scale, i_scale);

        const bool settled = std::abs(h_last - h_prev) <= 0.01 * h_last + 1e-12 * v_max * i_scale;
        report.points.push_back({omega, h_last, settled});
    }

    const double floor = 1e-9 * v_max * global_i_scale;
    std::size_t k0 = 0;
    for (std::size_t k = 1; k < report.points.size(); ++k) {
        if (report.points[k].hysteresis > report.points[k0].hysteresis) k0 = k;
    }
    const double h_max = report.points[k0].hysteresis;
    if (h_max <= floor) {
        report.fingerprint_2 = false;
        report.fingerprint_3 = true;  // zero everywhere shrinks to zero vacuously
        return report;
    }
    report.omega_zero = report.points[k0].omega;
    for (std::size_t k = k0; k < report.points.size(); ++k) {
        bool non_increasing = true;
        for (std::size_t j = k + 1; j < report.points.size(); ++j) {
            if (report.points[j].hysteresis > report.points[j - 1].hysteresis + floor) {
                non_increasing = false;
                break;
            }
        }
        if (non_increasing) {
            report.omega_star = report.points[k].omega;
            break;
        }
    }
    report.fingerprint_2 = report.omega_star.has_value();
    report.fingerprint_3 = report.points.back().hysteresis <= 0.05 * h_max;
    return report;
}

}  // namespace memloop
