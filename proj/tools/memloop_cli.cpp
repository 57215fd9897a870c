// memloop command line tool: simulate / analyze / sweep / dc.
//
// Exit codes: 0 success, 1 invalid arguments or unreadable/unwritable files,
// 2 numerical failure (and unsettled sweep frequencies under --strict).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memloop/memloop.hpp"

namespace fs = std::filesystem;

namespace {

struct WaveformFlags {
    std::string preset;
    int substeps = 0;
    double dt = 0.0;
    double dv = 0.0;
    double v_max = 0.0;
    double pad = 0.0;
    double time_scale = 1.0;
};

memloop::WaveformSpec resolve_waveform(const WaveformFlags& wf) {
    memloop::WaveformSpec spec;
    if (!wf.preset.empty()) {
        const auto preset = memloop::preset_waveform(wf.preset);
        if (!preset) throw std::invalid_argument("unknown preset: " + wf.preset);
        spec = *preset;
    } else {
        if (wf.substeps <= 0 || wf.dt <= 0.0 || wf.dv <= 0.0 || wf.v_max <= 0.0)
            throw std::invalid_argument(
                "waveform requires --preset or all of -x/--substeps, --dt, --dv, --vmax");
        spec = memloop::make_staircase_spec(wf.substeps, wf.dt, wf.dv, wf.v_max, wf.pad);
    }
    if (wf.time_scale != 1.0) {
        if (!(wf.time_scale > 0.0)) throw std::invalid_argument("--time-scale must be > 0");
        spec = memloop::make_staircase_spec(spec.substeps, spec.dt * wf.time_scale, spec.dv,
                                            spec.v_max, spec.autozero_pad * wf.time_scale);
    }
    return spec;
}

std::map<std::string, double> load_params(const std::string& path) {
    if (path.empty()) return {};
    return memloop::read_params_file(path);
}

/// Dispatches on the model name; fn receives the constructed model object.
template <typename Fn>
int with_model(const std::string& name, const std::string& params_path, Fn&& fn) {
    const auto kv = load_params(params_path);
    if (name == "relax") return fn(memloop::RelaxationModel(memloop::relaxation_params_from(kv)));
    if (name == "drift") return fn(memloop::LinearDriftModel(memloop::drift_params_from(kv)));
    if (name == "resistor") return fn(memloop::ResistorModel(memloop::resistor_params_from(kv)));
    throw std::invalid_argument("unknown model: " + name);
}

std::string human(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

fs::path sibling_with_extension(const fs::path& base, const char* ext) {
    fs::path p = base;
    p.replace_extension(ext);
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memristive staircase-response simulator and hysteresis analyzer"};
    app.require_subcommand(1);

    std::string model_name = "relax";
    std::string params_path;
    double integrator_step = 0.0;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--model", model_name, "device model")
            ->check(CLI::IsMember({"relax", "drift", "resistor"}));
        cmd->add_option("--params", params_path, "JSON parameter file (flat name -> number)");
    };

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "run a model under a staircase protocol");
    WaveformFlags wf;
    std::string sim_out;
    sim->add_option("--preset", wf.preset, "protocol preset (peo-pani or tio2)");
    sim->add_option("-x,--substeps", wf.substeps, "measurements per voltage level");
    sim->add_option("--dt", wf.dt, "dwell per measurement, seconds");
    sim->add_option("--dv", wf.dv, "voltage increment, volts");
    sim->add_option("--vmax", wf.v_max, "peak voltage, volts");
    sim->add_option("--pad", wf.pad, "auto-zero hold before each reading, seconds");
    sim->add_option("--time-scale", wf.time_scale, "multiply dt and pad by this factor");
    sim->add_option("--integrator-step", integrator_step, "fixed RK4 step, seconds");
    sim->add_option("--out", sim_out, "output trace CSV")->required();
    add_model_flags(sim);

    // --- analyze ----------------------------------------------------------
    auto* ana = app.add_subcommand("analyze", "slice a staircase trace and report hysteresis");
    std::string ana_in, ana_out, ana_plot;
    ana->add_option("trace", ana_in, "input trace CSV")->required();
    ana->add_option("--out", ana_out, "output report JSON")->required();
    ana->add_option("--plot", ana_plot, "output slice TSV (default: report path with .tsv)");

    // --- sweep ------------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "sine frequency sweep of the hysteresis lobe area");
    std::string swp_out, swp_plot, omega_decades = "1e-2:1e2";
    double swp_vmax = 1.0;
    int points_per_decade = 5, spp = 128, settle_periods = 64;
    bool strict = false;
    swp->add_option("--vmax", swp_vmax, "sine amplitude, volts");
    swp->add_option("--omega-decades", omega_decades, "frequency range in hertz, lo:hi");
    swp->add_option("--points-per-decade", points_per_decade, "log-spaced points per decade");
    swp->add_option("--spp", spp, "samples per period");
    swp->add_option("--settle-periods", settle_periods, "periods discarded before analysis");
    swp->add_flag("--strict", strict, "exit 2 if any frequency fails to settle");
    swp->add_option("--out", swp_out, "output report JSON")->required();
    swp->add_option("--plot", swp_plot, "output (omega, H) TSV (default: report path with .tsv)");
    add_model_flags(swp);

    // --- dc ---------------------------------------------------------------
    auto* dc = app.add_subcommand("dc", "step response and its settling features");
    std::string dc_out, dc_features_out;
    double v_step = 0.5, hold = 1.0, sample_dt = 0.002, epsilon = 0.01;
    dc->add_option("--vstep", v_step, "step target voltage, volts");
    dc->add_option("--hold", hold, "hold duration after the step, seconds");
    dc->add_option("--sample-dt", sample_dt, "sampling interval, seconds");
    dc->add_option("--epsilon", epsilon, "settling threshold for tau_inf");
    dc->add_option("--integrator-step", integrator_step, "fixed RK4 step, seconds");
    dc->add_option("--out", dc_out, "output trace CSV")->required();
    dc->add_option("--features", dc_features_out,
                   "output features JSON (default: trace path with .features.json)");
    add_model_flags(dc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            const auto spec = resolve_waveform(wf);
            return with_model(model_name, params_path, [&](const auto& model) {
                double step = integrator_step;
                if (!(step > 0.0)) step = std::min(spec.dt, model.time_scale()) / 100.0;
                const auto trace = memloop::simulate_staircase(model, spec, step);
                memloop::write_trace(trace, fs::path(sim_out));
                std::cout << "wrote " << sim_out << " (" << trace.samples.size() << " samples, "
                          << memloop::level_count(spec) << " levels)\n";
                return 0;
            });
        }

        if (ana->parsed()) {
            const auto trace = memloop::read_trace(fs::path(ana_in));
            const auto slices = memloop::extract_slices(trace);
            const auto report = memloop::hysteresis_report(slices);
            memloop::write_report(report, fs::path(ana_out));
            const fs::path plot =
                ana_plot.empty() ? sibling_with_extension(ana_out, ".tsv") : fs::path(ana_plot);
            memloop::write_plot_data(std::span<const memloop::FrequencySlice>(slices), plot);
            std::cout << "monotone_in_x=" << (report.monotone_in_x ? "true" : "false")
                      << " pinch_current="
                      << (report.pinch_current ? human(*report.pinch_current) : "none")
                      << " fit_resistance=" << human(report.fit_resistance) << "\n";
            return 0;
        }

        if (swp->parsed()) {
            const auto colon = omega_decades.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("--omega-decades expects lo:hi");
            const double lo = std::stod(omega_decades.substr(0, colon));
            const double hi = std::stod(omega_decades.substr(colon + 1));
            if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("--omega-decades needs 0 < lo < hi");
            if (points_per_decade < 1) throw std::invalid_argument("--points-per-decade must be >= 1");
            std::vector<double> omegas;
            const double decades = std::log10(hi / lo);
            const int n = static_cast<int>(std::floor(decades * points_per_decade + 1e-9)) + 1;
            for (int k = 0; k < n; ++k)
                omegas.push_back(lo * std::pow(10.0, static_cast<double>(k) / points_per_decade));

            return with_model(model_name, params_path, [&](const auto& model) {
                const auto report = memloop::frequency_sweep(model, swp_vmax, omegas, spp, settle_periods);
                memloop::write_report(report, fs::path(swp_out));
                const fs::path plot =
                    swp_plot.empty() ? sibling_with_extension(swp_out, ".tsv") : fs::path(swp_plot);
                memloop::write_plot_data(report, plot);
                int unsettled = 0;
                for (const auto& p : report.points) unsettled += p.settled ? 0 : 1;
                std::cout << "omega_zero="
                          << (report.omega_zero ? human(*report.omega_zero) : "none")
                          << " omega_star="
                          << (report.omega_star ? human(*report.omega_star) : "none")
                          << " fingerprint_2=" << (report.fingerprint_2 ? "true" : "false")
                          << " fingerprint_3=" << (report.fingerprint_3 ? "true" : "false")
                          << " unsettled=" << unsettled << "\n";
                if (strict && unsettled > 0) {
                    std::cerr << "error: " << unsettled << " frequencies failed to settle\n";
                    return 2;
                }
                return 0;
            });
        }

        if (dc->parsed()) {
            return with_model(model_name, params_path, [&](const auto& model) {
                const auto trace =
                    memloop::dc_step_run(model, v_step, hold, sample_dt, integrator_step);
                memloop::write_trace(trace, fs::path(dc_out));
                const auto features = memloop::dc_features(trace, epsilon);
                const fs::path fpath = dc_features_out.empty()
                                           ? sibling_with_extension(dc_out, ".features.json")
                                           : fs::path(dc_features_out);
                memloop::write_report(features, fpath);
                std::cout << "i_max=" << human(features.i_max)
                          << " tau_inf=" << human(features.tau_inf) << "\n";
                return 0;
            });
        }
    } catch (const memloop::NumericFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
