#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "memloop/detail/format.hpp"

namespace memloop {

/// Instantaneous internal state of a one-state-variable device model.
/// For the relaxation model w is a conductance in siemens; for linear drift
/// it is the dimensionless normalized width in [0, 1].
struct ModelState {
    double w = 0.0;
    double t = 0.0;
};

// ---------------------------------------------------------------------------
// Relaxation model
//
// First-order short-term memory: the conductance relaxes toward a
// voltage-dependent equilibrium,
//
//     dw/dt = (w_eq(v) - w) / tau,   w_eq(v) = g_zero / (1 + beta*|v|),
//     i     = w * v.
//
// A step from the 0 V equilibrium spikes to i_max = g_zero * v and then
// decays monotonically to v * w_eq(v).
// ---------------------------------------------------------------------------

struct RelaxationModelParams {
    double g_zero = 2e-6;  ///< conductance at the 0 V equilibrium, siemens
    double beta = 2.0;     ///< equilibrium suppression, 1/volt
    double tau = 0.1;      ///< memory time constant, seconds
};

inline void validate(const RelaxationModelParams& p) {
    if (!(p.g_zero > 0.0) || !std::isfinite(p.g_zero))
        throw std::invalid_argument("relaxation model: g_zero must be > 0");
    if (!(p.beta >= 0.0) || !std::isfinite(p.beta))
        throw std::invalid_argument("relaxation model: beta must be >= 0");
    if (!(p.tau > 0.0) || !std::isfinite(p.tau))
        throw std::invalid_argument("relaxation model: tau must be > 0");
}

/// Equilibrium conductance under a held voltage.
inline double relax_equilibrium(const RelaxationModelParams& p, double v) {
    return p.g_zero / (1.0 + p.beta * std::abs(v));
}

inline double relax_derivative(const RelaxationModelParams& p, const ModelState& state, double v) {
    if (!std::isfinite(v) || !std::isfinite(state.w))
        throw std::invalid_argument("relax_derivative: non-finite input");
    return (relax_equilibrium(p, v) - state.w) / p.tau;
}

inline double relax_current(const ModelState& state, double v) {
    if (!std::isfinite(v) || !std::isfinite(state.w))
        throw std::invalid_argument("relax_current: non-finite input");
    return state.w * v;
}

/// Exact solution of relax_derivative under constant v, starting from w0:
/// i(t) = v * (w_eq + (w0 - w_eq) * exp(-t/tau)).  Serves as the integrator
/// oracle in the test suite.
inline double relax_step_closed_form(const RelaxationModelParams& p, double v, double w0, double t) {
    if (t < 0.0) throw std::invalid_argument("relax_step_closed_form: t must be >= 0");
    const double weq = relax_equilibrium(p, v);
    return v * (weq + (w0 - weq) * std::exp(-t / p.tau));
}

// ---------------------------------------------------------------------------
// Linear drift model
//
// Classic drift memristor with a polynomial window:
//
//     i     = v / (r_on*w + r_off*(1-w)),
//     dw/dt = mobility * r_on * i * f(w),   f(w) = 1 - (2w-1)^(2p).
//
// The window vanishes at w = 0 and w = 1, which keeps the state inside the
// unit interval for any bounded drive.
// ---------------------------------------------------------------------------

struct LinearDriftParams {
    double r_on = 100.0;      ///< fully-ON resistance, ohms
    double r_off = 16000.0;   ///< fully-OFF resistance, ohms
    double mobility = 100.0;  ///< state speed coefficient, 1/(volt*second)
    double width_norm = 0.5;  ///< initial normalized width, in [0, 1]
    int window_power = 1;     ///< p in f(w) = 1 - (2w-1)^(2p)
};

inline void validate(const LinearDriftParams& p) {
    if (!(p.r_on > 0.0) || !std::isfinite(p.r_on))
        throw std::invalid_argument("drift model: r_on must be > 0");
    if (!(p.r_off > p.r_on) || !std::isfinite(p.r_off))
        throw std::invalid_argument("drift model: r_off must be > r_on");
    if (!(p.mobility >= 0.0) || !std::isfinite(p.mobility))
        throw std::invalid_argument("drift model: mobility must be >= 0");
    if (!(p.width_norm >= 0.0 && p.width_norm <= 1.0))
        throw std::invalid_argument("drift model: width_norm must be in [0, 1]");
    if (p.window_power < 1) throw std::invalid_argument("drift model: window_power must be >= 1");
}

inline double drift_window(const LinearDriftParams& p, double w) {
    const double y = 2.0 * w - 1.0;
    double acc = 1.0;
    for (int k = 0; k < 2 * p.window_power; ++k) acc *= y;
    return 1.0 - acc;
}

inline double drift_current(const LinearDriftParams& p, const ModelState& state, double v) {
    if (!std::isfinite(v) || !std::isfinite(state.w))
        throw std::invalid_argument("drift_current: non-finite input");
    return v / (p.r_on * state.w + p.r_off * (1.0 - state.w));
}

inline double drift_derivative(const LinearDriftParams& p, const ModelState& state, double v) {
    return p.mobility * p.r_on * drift_current(p, state, v) * drift_window(p, state.w);
}

/// Ohmic baseline, i = v / r.
inline double resistor_current(double r, double v) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("resistor_current: r must be > 0");
    if (!std::isfinite(v)) throw std::invalid_argument("resistor_current: non-finite voltage");
    return v / r;
}

// ---------------------------------------------------------------------------
// Simulator-facing model interface
// ---------------------------------------------------------------------------

/// A state model the simulator can drive: a scalar state equation, an output
/// current, a rest state at 0 V, a clamp back into the valid state range and
/// a characteristic time used when choosing default integrator steps.
template <typename M>
concept StateModel = requires(const M m, double w, double v, std::map<std::string, std::string>& meta) {
    { m.derivative(w, v) } -> std::convertible_to<double>;
    { m.current(w, v) } -> std::convertible_to<double>;
    { m.initial_state() } -> std::convertible_to<double>;
    { m.clamp(w) } -> std::convertible_to<double>;
    { m.time_scale() } -> std::convertible_to<double>;
    { m.name() } -> std::convertible_to<std::string_view>;
    { m.annotate(meta) };
};

class RelaxationModel {
public:
    explicit RelaxationModel(RelaxationModelParams params = {}) : p_(params) { validate(p_); }

    double derivative(double w, double v) const { return relax_derivative(p_, {w, 0.0}, v); }
    double current(double w, double v) const { return relax_current({w, 0.0}, v); }
    double initial_state() const { return relax_equilibrium(p_, 0.0); }
    double clamp(double w) const { return w; }
    double time_scale() const { return p_.tau; }
    std::string_view name() const { return "relax"; }
    const RelaxationModelParams& params() const { return p_; }

    void annotate(std::map<std::string, std::string>& meta) const {
        meta["model"] = "relax";
        meta["g_zero"] = detail::format_double(p_.g_zero);
        meta["beta"] = detail::format_double(p_.beta);
        meta["tau"] = detail::format_double(p_.tau);
    }

private:
    RelaxationModelParams p_;
};

class LinearDriftModel {
public:
    explicit LinearDriftModel(LinearDriftParams params = {}) : p_(params) { validate(p_); }

    double derivative(double w, double v) const { return drift_derivative(p_, {w, 0.0}, v); }
    double current(double w, double v) const { return drift_current(p_, {w, 0.0}, v); }
    double initial_state() const { return p_.width_norm; }
    double clamp(double w) const { return w < 0.0 ? 0.0 : (w > 1.0 ? 1.0 : w); }
    double time_scale() const {
        if (p_.mobility == 0.0) return std::numeric_limits<double>::infinity();
        // Time to traverse the window at roughly 1 V across the OFF resistance.
        return p_.r_off / (p_.mobility * p_.r_on);
    }
    std::string_view name() const { return "drift"; }
    const LinearDriftParams& params() const { return p_; }

    void annotate(std::map<std::string, std::string>& meta) const {
        meta["model"] = "drift";
        meta["r_on"] = detail::format_double(p_.r_on);
        meta["r_off"] = detail::format_double(p_.r_off);
        meta["mobility"] = detail::format_double(p_.mobility);
        meta["width_norm"] = detail::format_double(p_.width_norm);
        meta["window_power"] = detail::format_int(p_.window_power);
    }

private:
    LinearDriftParams p_;
};

class ResistorModel {
public:
    explicit ResistorModel(double resistance = 1000.0) : r_(resistance) {
        if (!(r_ > 0.0) || !std::isfinite(r_))
            throw std::invalid_argument("resistor model: resistance must be > 0");
    }

    double derivative(double, double) const { return 0.0; }
    double current(double, double v) const { return resistor_current(r_, v); }
    double initial_state() const { return 0.0; }
    double clamp(double w) const { return w; }
    double time_scale() const { return std::numeric_limits<double>::infinity(); }
    std::string_view name() const { return "resistor"; }
    double resistance() const { return r_; }

    void annotate(std::map<std::string, std::string>& meta) const {
        meta["model"] = "resistor";
        meta["resistance"] = detail::format_double(r_);
    }

private:
    double r_;
};

static_assert(StateModel<RelaxationModel>);
static_assert(StateModel<LinearDriftModel>);
static_assert(StateModel<ResistorModel>);

// ---------------------------------------------------------------------------
// Parameter maps (flat name -> number, unknown keys rejected)
// ---------------------------------------------------------------------------

inline RelaxationModelParams relaxation_params_from(const std::map<std::string, double>& kv) {
    RelaxationModelParams p;
    for (const auto& [key, value] : kv) {
        if (key == "g_zero") p.g_zero = value;
        else if (key == "beta") p.beta = value;
        else if (key == "tau") p.tau = value;
        else throw std::invalid_argument("unknown relaxation model parameter: " + key);
    }
    validate(p);
    return p;
}

inline LinearDriftParams drift_params_from(const std::map<std::string, double>& kv) {
    LinearDriftParams p;
    for (const auto& [key, value] : kv) {
        if (key == "r_on") p.r_on = value;
        else if (key == "r_off") p.r_off = value;
        else if (key == "mobility") p.mobility = value;
        else if (key == "width_norm") p.width_norm = value;
        else if (key == "window_power") {
            const double rounded = std::round(value);
            if (!std::isfinite(value) || rounded != value)
                throw std::invalid_argument("drift model: window_power must be an integer");
            p.window_power = static_cast<int>(rounded);
        } else {
            throw std::invalid_argument("unknown drift model parameter: " + key);
        }
    }
    validate(p);
    return p;
}

inline double resistor_params_from(const std::map<std::string, double>& kv) {
    double r = 1000.0;
    for (const auto& [key, value] : kv) {
        if (key == "resistance") r = value;
        else throw std::invalid_argument("unknown resistor parameter: " + key);
    }
    return r;
}

}  // namespace memloop
