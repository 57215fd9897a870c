#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memloop/analysis.hpp"
#include "memloop/detail/format.hpp"
#include "memloop/simulate.hpp"

namespace memloop {

/// Thrown for malformed trace, report or parameter files.  Messages for
/// row-level trace problems carry the 1-based line number.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTraceHeader = "t,v,i,step,sub";
inline constexpr std::string_view kTraceHeaderBare = "t,v,i";
inline constexpr std::string_view kReportFormatVersion = "1";

namespace detail {

inline bool reserved_meta_key(std::string_view key) {
    return key == "waveform" || key.starts_with("wf_");
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path.string());
    return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trace files
//
//   # key=value          metadata, sorted by key, before the header
//   t,v,i,step,sub       header (step/sub columns optional on ingest)
//   1.00...e+00,...,0,1  one row per sample, 17 significant digits
// ---------------------------------------------------------------------------

inline void write_trace(const Trace& trace, std::ostream& os) {
    validate(trace);
    std::map<std::string, std::string> meta = trace.meta;
    for (const auto& [key, value] : meta) {
        if (key.empty() || detail::reserved_meta_key(key))
            throw std::invalid_argument("write_trace: reserved or empty metadata key: " + key);
        if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
            value.find('\n') != std::string::npos)
            throw std::invalid_argument("write_trace: metadata must be single-line key=value");
    }
    if (trace.protocol) {
        const WaveformSpec& p = *trace.protocol;
        meta["waveform"] = "staircase";
        meta["wf_n_total"] = detail::format_int(p.n_total);
        meta["wf_substeps"] = detail::format_int(p.substeps);
        meta["wf_dt"] = detail::format_double(p.dt);
        meta["wf_dv"] = detail::format_double(p.dv);
        meta["wf_v_max"] = detail::format_double(p.v_max);
        meta["wf_pad"] = detail::format_double(p.autozero_pad);
    }
    for (const auto& [key, value] : meta) os << "# " << key << "=" << value << "\n";
    os << kTraceHeader << "\n";
    for (const auto& s : trace.samples) {
        os << detail::format_double(s.t) << ',' << detail::format_double(s.v) << ','
           << detail::format_double(s.i) << ',' << detail::format_int(s.step) << ','
           << detail::format_int(s.sub) << "\n";
    }
}

inline void write_trace(const Trace& trace, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_trace(trace, out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return fields;
}

inline void infer_substeps(Trace& trace) {
    if (trace.samples.empty()) return;
    std::vector<std::size_t> run_lengths;
    double run_v = trace.samples.front().v;
    std::size_t run_len = 0;
    for (const auto& s : trace.samples) {
        if (run_len > 0 && s.v != run_v) {
            run_lengths.push_back(run_len);
            run_len = 0;
            run_v = s.v;
        }
        ++run_len;
    }
    run_lengths.push_back(run_len);
    for (const auto len : run_lengths) {
        if (len != run_lengths.front()) return;  // uneven dwell, leave unindexed
    }
    const int x = static_cast<int>(run_lengths.front());
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        trace.samples[k].step = static_cast<int>(k) / x;
        trace.samples[k].sub = static_cast<int>(k) % x + 1;
    }
}

inline void attach_protocol(Trace& trace) {
    const auto it = trace.meta.find("waveform");
    if (it == trace.meta.end()) {
        for (const auto& [key, value] : trace.meta) {
            if (key.starts_with("wf_"))
                throw FormatError("trace metadata has wf_ keys but no waveform kind");
        }
        return;
    }
    if (it->second != "staircase") throw FormatError("unsupported waveform kind: " + it->second);
    auto take = [&trace](const char* key) {
        const auto f = trace.meta.find(key);
        if (f == trace.meta.end())
            throw FormatError(std::string("waveform metadata missing ") + key);
        return f->second;
    };
    WaveformSpec spec;
    const auto n_total = detail::parse_int(take("wf_n_total"));
    const auto substeps = detail::parse_int(take("wf_substeps"));
    const auto dt = detail::parse_double(take("wf_dt"));
    const auto dv = detail::parse_double(take("wf_dv"));
    const auto v_max = detail::parse_double(take("wf_v_max"));
    const auto pad = detail::parse_double(take("wf_pad"));
    if (!n_total || !substeps || !dt || !dv || !v_max || !pad)
        throw FormatError("waveform metadata has non-numeric values");
    spec.n_total = static_cast<int>(*n_total);
    spec.substeps = static_cast<int>(*substeps);
    spec.dt = *dt;
    spec.dv = *dv;
    spec.v_max = *v_max;
    spec.autozero_pad = *pad;
    try {
        validate(spec);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid waveform metadata: ") + e.what());
    }
    if (static_cast<int>(trace.samples.size()) != spec.n_total)
        throw FormatError("waveform metadata declares " + std::to_string(spec.n_total) +
                          " samples, file has " + std::to_string(trace.samples.size()));
    for (const auto& s : trace.samples) {
        if (s.sub > spec.substeps)
            throw FormatError("substep index exceeds the declared substeps per level");
    }
    trace.protocol = spec;
    trace.meta.erase("waveform");
    for (auto f = trace.meta.begin(); f != trace.meta.end();) {
        if (f->first.starts_with("wf_")) f = trace.meta.erase(f);
        else ++f;
    }
}

}  // namespace detail

/// Parses a trace file.  When the step/sub columns are absent the dwell
/// indices are inferred from the voltage run lengths, provided every level
/// holds the same number of samples; otherwise the trace loads unindexed and
/// slice extraction is unavailable.  All diagnostics name the offending line.
inline Trace read_trace(std::istream& is, const std::string& origin = "") {
    const std::string where = origin.empty() ? "" : origin + ": ";
    auto fail = [&where](int line_no, const std::string& msg) {
        throw FormatError(where + "line " + std::to_string(line_no) + ": " + msg);
    };

    Trace trace;
    std::string line;
    int line_no = 0;
    int n_cols = 0;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (n_cols == 0) {
            if (!line.empty() && line[0] == '#') {
                std::string_view body = detail::trim(std::string_view(line).substr(1));
                const std::size_t eq = body.find('=');
                if (eq == std::string_view::npos || eq == 0)
                    fail(line_no, "malformed metadata line (expected # key=value)");
                const std::string key{body.substr(0, eq)};
                if (trace.meta.contains(key)) fail(line_no, "duplicate metadata key: " + key);
                trace.meta[key] = std::string(body.substr(eq + 1));
                continue;
            }
            if (line == kTraceHeader) { n_cols = 5; continue; }
            if (line == kTraceHeaderBare) { n_cols = 3; continue; }
            fail(line_no, "unrecognized header (expected \"t,v,i,step,sub\" or \"t,v,i\")");
        }
        if (line.empty()) fail(line_no, "blank line in data section");
        if (line[0] == '#') fail(line_no, "metadata lines are only allowed before the header");
        const auto fields = detail::split_fields(line);
        if (static_cast<int>(fields.size()) != n_cols)
            fail(line_no, "expected " + std::to_string(n_cols) + " fields, found " +
                              std::to_string(fields.size()));
        TraceSample s;
        const auto t = detail::parse_double(detail::trim(fields[0]));
        const auto v = detail::parse_double(detail::trim(fields[1]));
        const auto i = detail::parse_double(detail::trim(fields[2]));
        if (!t || !v || !i) fail(line_no, "non-numeric field");
        if (!std::isfinite(*t) || !std::isfinite(*v) || !std::isfinite(*i))
            fail(line_no, "non-finite value");
        s.t = *t;
        s.v = *v;
        s.i = *i;
        if (n_cols == 5) {
            const auto step = detail::parse_int(detail::trim(fields[3]));
            const auto sub = detail::parse_int(detail::trim(fields[4]));
            if (!step || !sub) fail(line_no, "non-numeric index field");
            if (*step < 0) fail(line_no, "step index must be >= 0");
            if (*sub < 0) fail(line_no, "substep index must be >= 0");
            s.step = static_cast<int>(*step);
            s.sub = static_cast<int>(*sub);
        }
        if (!(s.t > prev_t)) fail(line_no, "time not strictly increasing");
        prev_t = s.t;
        trace.samples.push_back(s);
    }
    if (n_cols == 0) fail(line_no + 1, "missing header");

    bool any_indexed = false, any_unindexed = false;
    for (const auto& s : trace.samples) (s.sub >= 1 ? any_indexed : any_unindexed) = true;
    if (any_indexed && any_unindexed)
        throw FormatError(where + "mixed indexed and unindexed rows");
    if (n_cols == 3) detail::infer_substeps(trace);
    detail::attach_protocol(trace);
    return trace;
}

inline Trace read_trace(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_trace(in, path.string());
}

// ---------------------------------------------------------------------------
// Report files (JSON, format_version "1")
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json json_optional(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

inline std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("report missing field: ") + key);
    if (j[key].is_null()) return std::nullopt;
    if (!j[key].is_number()) throw FormatError(std::string("report field is not a number: ") + key);
    return j[key].get<double>();
}

template <typename T>
inline T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw FormatError(std::string("report missing field: ") + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string("report field has the wrong type: ") + key);
    }
}

inline nlohmann::json parse_report(std::istream& is, const char* kind) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report is not valid JSON: ") + e.what());
    }
    if (field<std::string>(j, "format_version") != kReportFormatVersion)
        throw FormatError("unsupported report format_version");
    if (field<std::string>(j, "kind") != kind)
        throw FormatError(std::string("report kind mismatch, expected ") + kind);
    return j;
}

inline void dump_report(const nlohmann::json& j, std::ostream& os) { os << j.dump(2) << "\n"; }

}  // namespace detail

inline nlohmann::json to_json(const HysteresisReport& report) {
    nlohmann::json slices = nlohmann::json::array();
    for (const auto& s : report.slices) {
        slices.push_back({{"substep_index", s.substep_index},
                          {"omega", s.omega},
                          {"area_pos", s.area_pos},
                          {"area_neg", s.area_neg},
                          {"hysteresis", s.hysteresis},
                          {"closed_by_segment", s.closed_by_segment}});
    }
    return {{"format_version", kReportFormatVersion},
            {"kind", "hysteresis_report"},
            {"slices", slices},
            {"pinch_current", detail::json_optional(report.pinch_current)},
            {"monotone_in_x", report.monotone_in_x},
            {"fit_resistance", report.fit_resistance},
            {"fit_residual", report.fit_residual}};
}

inline nlohmann::json to_json(const SweepReport& report) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : report.points) {
        points.push_back(
            {{"omega", p.omega}, {"hysteresis", p.hysteresis}, {"settled", p.settled}});
    }
    return {{"format_version", kReportFormatVersion},
            {"kind", "sweep_report"},
            {"points", points},
            {"omega_zero", detail::json_optional(report.omega_zero)},
            {"omega_star", detail::json_optional(report.omega_star)},
            {"fingerprint_2", report.fingerprint_2},
            {"fingerprint_3", report.fingerprint_3}};
}

inline nlohmann::json to_json(const DCFeatures& features) {
    return {{"format_version", kReportFormatVersion},
            {"kind", "dc_features"},
            {"i_max", features.i_max},
            {"t_peak", features.t_peak},
            {"i_inf", features.i_inf},
            {"tau_inf", features.tau_inf},
            {"epsilon", features.epsilon}};
}

inline void write_report(const HysteresisReport& r, std::ostream& os) { detail::dump_report(to_json(r), os); }
inline void write_report(const SweepReport& r, std::ostream& os) { detail::dump_report(to_json(r), os); }
inline void write_report(const DCFeatures& r, std::ostream& os) { detail::dump_report(to_json(r), os); }

template <typename Report>
inline void write_report(const Report& report, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_report(report, out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline HysteresisReport read_hysteresis_report(std::istream& is) {
    const auto j = detail::parse_report(is, "hysteresis_report");
    HysteresisReport r;
    for (const auto& js : detail::field<nlohmann::json>(j, "slices")) {
        SliceRecord rec;
        rec.substep_index = detail::field<int>(js, "substep_index");
        rec.omega = detail::field<double>(js, "omega");
        rec.area_pos = detail::field<double>(js, "area_pos");
        rec.area_neg = detail::field<double>(js, "area_neg");
        rec.hysteresis = detail::field<double>(js, "hysteresis");
        rec.closed_by_segment = detail::field<bool>(js, "closed_by_segment");
        r.slices.push_back(rec);
    }
    r.pinch_current = detail::optional_from(j, "pinch_current");
    r.monotone_in_x = detail::field<bool>(j, "monotone_in_x");
    r.fit_resistance = detail::field<double>(j, "fit_resistance");
    r.fit_residual = detail::field<double>(j, "fit_residual");
    return r;
}

inline SweepReport read_sweep_report(std::istream& is) {
    const auto j = detail::parse_report(is, "sweep_report");
    SweepReport r;
    for (const auto& jp : detail::field<nlohmann::json>(j, "points")) {
        SweepPoint p;
        p.omega = detail::field<double>(jp, "omega");
        p.hysteresis = detail::field<double>(jp, "hysteresis");
        p.settled = detail::field<bool>(jp, "settled");
        r.points.push_back(p);
    }
    r.omega_zero = detail::optional_from(j, "omega_zero");
    r.omega_star = detail::optional_from(j, "omega_star");
    r.fingerprint_2 = detail::field<bool>(j, "fingerprint_2");
    r.fingerprint_3 = detail::field<bool>(j, "fingerprint_3");
    return r;
}

inline DCFeatures read_dc_features(std::istream& is) {
    const auto j = detail::parse_report(is, "dc_features");
    DCFeatures f;
    f.i_max = detail::field<double>(j, "i_max");
    f.t_peak = detail::field<double>(j, "t_peak");
    f.i_inf = detail::field<double>(j, "i_inf");
    f.tau_inf = detail::field<double>(j, "tau_inf");
    f.epsilon = detail::field<double>(j, "epsilon");
    return f;
}

inline HysteresisReport read_hysteresis_report(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_hysteresis_report(in);
}

inline SweepReport read_sweep_report(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_sweep_report(in);
}

inline DCFeatures read_dc_features(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_dc_features(in);
}

// ---------------------------------------------------------------------------
// Plot data (TSV, one block per curve, double blank line between blocks)
// ---------------------------------------------------------------------------

inline void write_plot_data(std::span<const FrequencySlice> slices, std::ostream& os) {
    bool first = true;
    for (const auto& slice : slices) {
        if (!first) os << "\n\n";
        first = false;
        os << "# substep=" << slice.substep_index
           << " omega=" << detail::format_double(slice.omega) << "\n";
        for (const auto& p : slice.points)
            os << detail::format_double(p.v) << '\t' << detail::format_double(p.i) << "\n";
    }
}

inline void write_plot_data(const SweepReport& report, std::ostream& os) {
    os << "# omega\thysteresis\n";
    for (const auto& p : report.points)
        os << detail::format_double(p.omega) << '\t' << detail::format_double(p.hysteresis) << "\n";
}

inline void write_plot_data(std::span<const ItVisit> visits, std::ostream& os) {
    bool first = true;
    for (const auto& visit : visits) {
        if (!first) os << "\n\n";
        first = false;
        os << "# visit step=" << visit.step_index << "\n";
        for (const auto& p : visit.points)
            os << detail::format_double(p.t) << '\t' << detail::format_double(p.i) << "\n";
    }
}

template <typename Data>
inline void write_plot_data(const Data& data, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_plot_data(data, out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Parameter files (flat JSON object, name -> number)
// ---------------------------------------------------------------------------

inline std::map<std::string, double> read_params_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw FormatError(path.string() + ": parameter file must be a JSON object");
    std::map<std::string, double> params;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number())
            throw FormatError(path.string() + ": parameter '" + key + "' is not a number");
        params[key] = value.get<double>();
    }
    return params;
}

}  // namespace memloop
