// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.  Each criterion carries its own tolerance and, where
// stated, a wall-clock budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "memloop/memloop.hpp"

namespace fs = std::filesystem;
using namespace memloop;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

// --- criterion 1: protocol fidelity ---------------------------------------

void protocol_fidelity() {
    const auto peo = preset_waveform("peo-pani");
    require(peo.has_value(), "peo-pani preset missing");
    require(peo->n_total == 432, "peo-pani must produce exactly 432 points");
    require(level_count(*peo) == 36, "peo-pani must span exactly 36 levels");

    const auto seq = build_staircase(*peo);
    require(seq.measurements.size() == 432, "staircase measurement count mismatch");

    const auto trace = simulate_staircase(ResistorModel(1000.0), *peo, peo->dt / 10.0);
    const auto slices = extract_slices(trace);
    require(slices.size() == 12, "peo-pani must yield 12 slices");
    for (const auto& slice : slices) {
        const double unit = slice.omega * slice.substep_index * 432.0 * 20.0;
        require(std::abs(unit - 1.0) <= 1e-12,
                "slice frequency law violated at x=" + std::to_string(slice.substep_index));
        const double ratio = slices[0].omega / slice.omega;
        require(std::abs(ratio - slice.substep_index) <= 1e-12 * slice.substep_index,
                "omega ratios must be {1, 1/2, ..., 1/12}");
    }

    const auto tio2 = preset_waveform("tio2");
    require(tio2.has_value(), "tio2 preset missing");
    require(tio2->n_total == 1600, "tio2 must produce exactly 1600 points");
    require(level_count(*tio2) == 160, "tio2 must span exactly 160 levels");
    const auto trace2 = simulate_staircase(ResistorModel(1000.0), *tio2,
                                           (tio2->dt + tio2->autozero_pad) / 10.0);
    require(trace2.samples.size() == 1600, "tio2 trace must hold 1600 samples");
}

// --- criterion 2: integrator oracle ----------------------------------------

double step_error(double integrator_step) {
    const RelaxationModelParams p{};
    LevelSequence drive;
    drive.levels.push_back({0.0, 0.5, 0});
    for (int k = 1; k <= 100; ++k) drive.measurements.push_back({k * 0.01, 0, k});
    drive.end_time = 1.0;
    const auto trace = run(RelaxationModel(p), drive, integrator_step);
    double worst = 0.0;
    for (const auto& s : trace.samples) {
        const double exact = relax_step_closed_form(p, 0.5, p.g_zero, s.t);
        worst = std::max(worst, std::abs(s.i - exact) / std::abs(exact));
    }
    return worst;
}

void integrator_oracle() {
    const double tau = RelaxationModelParams{}.tau;
    const double err = step_error(tau / 100.0);
    require(err <= 1e-6, "max relative error " + fmt(err) + " exceeds 1e-6 at step tau/100");
    const double err_half = step_error(tau / 200.0);
    require(err_half * 8.0 <= err, "halving the step shrank the error only " +
                                       fmt(err / err_half) + "x, need >= 8x");
}

// --- criterion 3: dwell-monotone hysteresis --------------------------------

void dwell_monotone_hysteresis() {
    const RelaxationModelParams p{};
    const auto spec = make_staircase_spec(12, p.tau / 5.0, 0.1, 0.9);
    const auto trace = simulate_staircase(RelaxationModel(p), spec,
                                          std::min(spec.dt, p.tau) / 100.0);
    const auto report = hysteresis_report(extract_slices(trace));
    require(report.slices.size() == 12, "expected 12 slices");
    const double h1 = report.slices[0].hysteresis;
    const double h6 = report.slices[5].hysteresis;
    const double h12 = report.slices[11].hysteresis;
    require(h1 > h6 && h6 > h12, "H(1) > H(6) > H(12) violated: " + fmt(h1) + ", " + fmt(h6) +
                                     ", " + fmt(h12));
    require(h12 <= 0.5 * h1, "H(12) = " + fmt(h12) + " exceeds 0.5*H(1) = " + fmt(0.5 * h1));
    for (std::size_t k = 1; k < report.slices.size(); ++k)
        require(report.slices[k].hysteresis <= report.slices[k - 1].hysteresis,
                "H not non-increasing at x=" + std::to_string(k + 1));
}

// --- criterion 4: single-valued limit --------------------------------------

void single_valued_limit() {
    // Dwell x*dt = 2.4 s = 24*tau >= 20*tau.  beta is small so the
    // equilibrated device is near-ohmic, as the limit demands.
    const RelaxationModelParams p{2e-6, 0.01, 0.1};
    const auto spec = make_staircase_spec(12, 0.2, 0.1, 0.9);
    const auto trace = simulate_staircase(RelaxationModel(p), spec,
                                          std::min(spec.dt, p.tau) / 100.0);
    const auto slices = extract_slices(trace);
    const auto report = hysteresis_report(slices);

    const auto& slowest = slices.back();
    double i_lo = slowest.points.front().i, i_hi = i_lo;
    for (const auto& q : slowest.points) {
        i_lo = std::min(i_lo, q.i);
        i_hi = std::max(i_hi, q.i);
    }
    const double range = i_hi - i_lo;
    require(report.fit_residual <= 1e-3 * range,
            "fit residual " + fmt(report.fit_residual) + " exceeds 1e-3 of range " + fmt(range));

    // Independent prediction: the same origin-constrained fit applied to the
    // exact equilibrium curve i = w_eq(v) * v.
    double sum_vi = 0.0, sum_vv = 0.0;
    for (const auto& q : slowest.points) {
        sum_vi += q.v * (relax_equilibrium(p, q.v) * q.v);
        sum_vv += q.v * q.v;
    }
    const double g_pred = sum_vi / sum_vv;
    const double g_fit = 1.0 / report.fit_resistance;
    require(std::abs(g_fit - g_pred) <= 0.01 * g_pred,
            "fitted conductance " + fmt(g_fit) + " deviates from prediction " + fmt(g_pred) +
                " by more than 1%");
}

// --- criterion 5: fingerprint sweep ----------------------------------------

void fingerprint_sweep() {
    const RelaxationModel model;
    const double tau = model.params().tau;
    std::vector<double> omegas;
    for (int k = 0; k <= 20; ++k)  // 5 points per decade over omega*tau in [1e-2, 1e2]
        omegas.push_back(std::pow(10.0, -2.0 + 0.2 * k) / tau);
    const auto report = frequency_sweep(model, 1.0, omegas, 128, 800);

    require(report.omega_zero.has_value(), "no lobe-area maximum found");
    require(*report.omega_zero > omegas.front() && *report.omega_zero < omegas.back(),
            "omega_zero is not interior to the sweep");
    require(report.fingerprint_2, "H must be non-increasing for all omega >= omega_zero");
    double h_zero = 0.0, h_top = report.points.back().hysteresis;
    for (const auto& pt : report.points) h_zero = std::max(h_zero, pt.hysteresis);
    require(report.fingerprint_3, "H at the top of the sweep is " + fmt(h_top / h_zero) +
                                      " of H(omega_zero), need <= 0.05");
}

// --- criterion 6: area oracle -----------------------------------------------

void area_oracle() {
    const double b = 2e-3;
    std::vector<SlicePoint> loop;
    for (int k = 0; k < 10000; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / 10000.0;
        loop.push_back({std::cos(theta), b * std::sin(theta)});
    }
    const double area = hysteresis_total(lobe_areas(loop));
    const double expected = std::numbers::pi * b;
    require(std::abs(area - expected) <= 1e-3 * expected,
            "ellipse area " + fmt(area) + " deviates from " + fmt(expected));

    const auto spec = *preset_waveform("peo-pani");
    const auto trace = simulate_staircase(ResistorModel(1000.0), spec, spec.dt / 10.0);
    double v_max = 0.0, i_max = 0.0;
    for (const auto& s : trace.samples) {
        v_max = std::max(v_max, std::abs(s.v));
        i_max = std::max(i_max, std::abs(s.i));
    }
    for (const auto& slice : extract_slices(trace)) {
        const double h = hysteresis_total(lobe_areas(slice.points));
        require(h <= 1e-9 * v_max * i_max,
                "single-valued trace has nonzero lobe area " + fmt(h));
    }
}

// --- criterion 7: dc features -----------------------------------------------

void dc_feature_oracle() {
    const RelaxationModelParams p{};
    const double sample_dt = 0.002;
    const auto trace = dc_step_run(RelaxationModel(p), 0.5, 1.0, sample_dt);
    const double epsilon = 0.01;
    const auto f = dc_features(trace, epsilon);

    const double spike = relax_step_closed_form(p, 0.5, p.g_zero, 0.0);
    require(f.i_max == spike, "i_max " + fmt(f.i_max) + " must equal the closed-form spike " +
                                  fmt(spike) + " exactly");
    const double expected_settle = p.tau * std::log(1.0 / epsilon);
    require(std::abs(f.tau_inf - expected_settle) <= sample_dt,
            "tau_inf " + fmt(f.tau_inf) + " not within one sample of " + fmt(expected_settle));
}

// --- criterion 8: ingestion robustness --------------------------------------

void ingestion_robustness() {
    const fs::path dir = MEMLOOP_FIXTURE_DIR;
    require(fs::is_directory(dir), "fixture directory missing: " + dir.string());
    int bad = 0, odd = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("bad_", 0) == 0) {
            ++bad;
            try {
                read_trace(entry.path());
                throw Failure(name + " parsed without a diagnostic");
            } catch (const FormatError& e) {
                const std::string msg = e.what();
                require(msg.find("line ") != std::string::npos,
                        name + " diagnostic lacks a line number: " + msg);
            }
        } else if (name.rfind("odd_", 0) == 0) {
            ++odd;
            const auto trace = read_trace(entry.path());  // must load
            require(!trace.indexed(), name + " should load unindexed");
            try {
                extract_slices(trace);
                throw Failure(name + " sliced despite uneven run lengths");
            } catch (const std::invalid_argument&) {
                // slice analysis disabled, as required
            }
            dc_features(trace);  // still available
        }
    }
    require(bad + odd >= 10, "fixture corpus must hold at least 10 files, found " +
                                 std::to_string(bad + odd));

    // Bit-identical canonical round trip.
    const auto spec = *preset_waveform("peo-pani");
    auto trace = simulate_staircase(RelaxationModel{}, spec, 0.2);
    trace.meta["fixture"] = "roundtrip";
    std::ostringstream once;
    write_trace(trace, once);
    std::istringstream mid(once.str());
    const Trace back = read_trace(mid);
    std::ostringstream twice;
    write_trace(back, twice);
    require(once.str() == twice.str(), "canonical round trip is not bit-identical");
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;  // 0 = no stated budget
    std::function<void()> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "protocol fidelity (peo-pani 432/36, tio2 1600/160, omega ratios)", 1.0,
         protocol_fidelity},
        {2, "integrator matches the closed form (1e-6 at tau/100, 4th order)", 1.0,
         integrator_oracle},
        {3, "hysteresis shrinks with dwell index (H1 > H6 > H12, monotone)", 5.0,
         dwell_monotone_hysteresis},
        {4, "slow slice fits the equilibrated ohmic line (20*tau dwell)", 0.0,
         single_valued_limit},
        {5, "sine sweep fingerprints (interior max, monotone above, top <= 5%)", 30.0,
         fingerprint_sweep},
        {6, "shoelace area oracle (ellipse 1e-3, zero-area law 1e-9)", 0.0, area_oracle},
        {7, "dc features (exact spike, tau_inf within one sample)", 0.0, dc_feature_oracle},
        {8, "ingestion robustness (line-numbered diagnostics, bit-exact round trip)", 0.0,
         ingestion_robustness},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string failure;
        try {
            c.body();
        } catch (const std::exception& e) {
            failure = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (failure.empty() && c.budget_seconds > 0.0 && elapsed > c.budget_seconds)
            failure = "runtime " + fmt(elapsed) + " s exceeds budget " + fmt(c.budget_seconds) + " s";
        if (failure.empty()) {
            std::printf("[PASS] %d. %s (%.2f s)\n", c.id, c.title, elapsed);
        } else {
            std::printf("[FAIL] %d. %s: %s\n", c.id, c.title, failure.c_str());
            ++failures;
        }
    }
    if (failures > 0) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
