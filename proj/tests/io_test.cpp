#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "memloop/io.hpp"
#include "memloop/presets.hpp"

using namespace memloop;
namespace fs = std::filesystem;

namespace {

Trace reference_trace() {
    const auto spec = *preset_waveform("peo-pani");
    auto trace = simulate_staircase(RelaxationModel{}, spec, 0.2);
    trace.meta["device"] = "synthetic";
    return trace;
}

std::string serialize(const Trace& trace) {
    std::ostringstream os;
    write_trace(trace, os);
    return os.str();
}

Trace parse(const std::string& text) {
    std::istringstream is(text);
    return read_trace(is);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const FormatError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("trace round trip is bit-identical") {
    const auto trace = reference_trace();
    const std::string once = serialize(trace);
    const Trace back = parse(once);
    const std::string twice = serialize(back);
    CHECK(once == twice);

    REQUIRE(back.samples.size() == trace.samples.size());
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        CHECK(back.samples[k].t == trace.samples[k].t);
        CHECK(back.samples[k].v == trace.samples[k].v);
        CHECK(back.samples[k].i == trace.samples[k].i);
        CHECK(back.samples[k].step == trace.samples[k].step);
        CHECK(back.samples[k].sub == trace.samples[k].sub);
    }
    CHECK(back.meta == trace.meta);  // metadata preserved verbatim
    REQUIRE(back.protocol.has_value());
    CHECK(back.protocol->n_total == trace.protocol->n_total);
    CHECK(back.protocol->dt == trace.protocol->dt);
}

TEST_CASE("empty trace serializes to metadata and header only") {
    Trace trace;
    trace.meta["note"] = "nothing yet";
    const std::string text = serialize(trace);
    CHECK(text == "# note=nothing yet\nt,v,i,step,sub\n");
    const Trace back = parse(text);
    CHECK(back.samples.empty());
    CHECK(back.meta.at("note") == "nothing yet");
}

TEST_CASE("write rejects reserved metadata keys") {
    Trace trace = reference_trace();
    trace.meta["wf_dt"] = "1";
    std::ostringstream os;
    CHECK_THROWS_AS(write_trace(trace, os), std::invalid_argument);
}

TEST_CASE("three-column ingestion infers dwell indices from run lengths") {
    std::ostringstream os;
    os << "t,v,i\n";
    int row = 0;
    for (int level = 0; level < 8; ++level) {
        const double v = 0.1 * (level + 1);
        for (int j = 0; j < 10; ++j)
            os << detail::format_double(0.5 * ++row) << ',' << detail::format_double(v) << ','
               << detail::format_double(v / 1000.0) << "\n";
    }
    const Trace trace = parse(os.str());
    REQUIRE(trace.indexed());
    const auto slices = extract_slices(trace);
    CHECK(slices.size() == 10);
    for (const auto& s : slices) CHECK(s.points.size() == 8);
}

TEST_CASE("unequal run lengths load with slices disabled") {
    std::ostringstream os;
    os << "t,v,i\n";
    const double vs[] = {0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5};
    for (int k = 0; k < 8; ++k)
        os << detail::format_double(0.1 * (k + 1)) << ',' << detail::format_double(vs[k]) << ','
           << detail::format_double(vs[k] * 2e-6) << "\n";
    const Trace trace = parse(os.str());
    CHECK_FALSE(trace.indexed());
    CHECK_THROWS_AS(extract_slices(trace), std::invalid_argument);
    // The step-response features remain available.
    const auto f = dc_features(trace);
    CHECK(f.i_max == Approx(1e-6));
}

TEST_CASE("malformed traces fail with the offending line") {
    const std::string head = "# a=1\n# b=2\nt,v,i,step,sub\n";
    auto row = [](double t, double v, double i, int step, int sub) {
        return detail::format_double(t) + "," + detail::format_double(v) + "," +
               detail::format_double(i) + "," + std::to_string(step) + "," + std::to_string(sub) +
               "\n";
    };

    SECTION("decreasing time at line 7") {
        const std::string text = head + row(1, 0.1, 1e-6, 0, 1) + row(2, 0.1, 1e-6, 0, 2) +
                                 row(3, 0.1, 1e-6, 0, 3) + row(2.5, 0.2, 1e-6, 1, 1);
        CHECK(error_of(text).find("line 7") != std::string::npos);
    }
    SECTION("duplicate timestamp") {
        const std::string text = head + row(1, 0.1, 1e-6, 0, 1) + row(1, 0.1, 1e-6, 0, 2);
        const auto msg = error_of(text);
        CHECK(msg.find("line 5") != std::string::npos);
        CHECK(msg.find("strictly increasing") != std::string::npos);
    }
    SECTION("non-numeric field") {
        const std::string text = head + row(1, 0.1, 1e-6, 0, 1) + "2.0,abc,1e-6,0,2\n";
        const auto msg = error_of(text);
        CHECK(msg.find("line 5") != std::string::npos);
        CHECK(msg.find("non-numeric") != std::string::npos);
    }
    SECTION("ragged row") {
        const std::string text = head + "1.0,0.1,1e-6,0\n";
        CHECK(error_of(text).find("line 4") != std::string::npos);
    }
    SECTION("non-finite value") {
        const std::string text = head + "1.0,nan,1e-6,0,1\n";
        CHECK(error_of(text).find("non-finite") != std::string::npos);
    }
    SECTION("bad header") {
        CHECK(error_of("time,volt,amp\n1,2,3\n").find("line 1") != std::string::npos);
    }
    SECTION("missing header entirely") {
        CHECK(error_of("").find("line 1") != std::string::npos);
    }
    SECTION("comment after data started") {
        const std::string text = head + row(1, 0.1, 1e-6, 0, 1) + "# oops=1\n";
        CHECK(error_of(text).find("line 5") != std::string::npos);
    }
    SECTION("negative substep") {
        const std::string text = head + "1.0,0.1,1e-6,0,-1\n";
        CHECK(error_of(text).find("line 4") != std::string::npos);
    }
    SECTION("duplicate metadata key") {
        CHECK(error_of("# a=1\n# a=2\nt,v,i\n").find("line 2") != std::string::npos);
    }
    SECTION("waveform metadata disagreeing with the sample count") {
        Trace trace = reference_trace();
        std::string text = serialize(trace);
        text += "8.6442e+03,0.0,0.0,36,1\n";  // one extra row
        CHECK_FALSE(error_of(text).empty());
    }
}

TEST_CASE("trace file writes are deterministic and path errors surface") {
    const auto trace = reference_trace();
    const auto dir = fs::temp_directory_path() / "memloop-io-test";
    fs::create_directories(dir);
    const auto path = dir / "trace.csv";
    write_trace(trace, path);
    write_trace(trace, path);
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == serialize(trace));
    CHECK_THROWS_AS(write_trace(trace, dir / "missing" / "trace.csv"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("report round trips") {
    const auto spec = make_staircase_spec(6, 0.02, 0.1, 0.9);
    const auto trace = simulate_staircase(RelaxationModel{}, spec, 2e-4);
    const auto report = hysteresis_report(extract_slices(trace));

    SECTION("hysteresis report") {
        std::stringstream ss;
        write_report(report, ss);
        const auto back = read_hysteresis_report(ss);
        REQUIRE(back.slices.size() == report.slices.size());
        for (std::size_t k = 0; k < report.slices.size(); ++k) {
            CHECK(back.slices[k].substep_index == report.slices[k].substep_index);
            CHECK(back.slices[k].omega == report.slices[k].omega);
            CHECK(back.slices[k].hysteresis == report.slices[k].hysteresis);
            CHECK(back.slices[k].closed_by_segment == report.slices[k].closed_by_segment);
        }
        CHECK(back.monotone_in_x == report.monotone_in_x);
        CHECK(back.fit_resistance == report.fit_resistance);
        CHECK(back.fit_residual == report.fit_residual);
        REQUIRE(back.pinch_current.has_value());
        CHECK(*back.pinch_current == *report.pinch_current);
    }
    SECTION("sweep report") {
        SweepReport sweep;
        sweep.points = {{1.0, 2e-7, true}, {2.0, 1e-7, false}};
        sweep.omega_zero = 1.0;
        sweep.fingerprint_3 = true;
        std::stringstream ss;
        write_report(sweep, ss);
        const auto back = read_sweep_report(ss);
        REQUIRE(back.points.size() == 2);
        CHECK(back.points[1].settled == false);
        CHECK(back.omega_zero == sweep.omega_zero);
        CHECK_FALSE(back.omega_star.has_value());
        CHECK(back.fingerprint_2 == false);
        CHECK(back.fingerprint_3 == true);
    }
    SECTION("dc features") {
        const DCFeatures f{1e-6, 0.0, 5e-7, 0.46, 0.01};
        std::stringstream ss;
        write_report(f, ss);
        const auto back = read_dc_features(ss);
        CHECK(back.i_max == f.i_max);
        CHECK(back.tau_inf == f.tau_inf);
        CHECK(back.epsilon == f.epsilon);
    }
    SECTION("unknown version rejected") {
        std::stringstream ss;
        ss << R"({"format_version":"0","kind":"dc_features"})";
        CHECK_THROWS_WITH(read_dc_features(ss), Catch::Contains("format_version"));
    }
    SECTION("kind mismatch rejected") {
        std::stringstream ss;
        write_report(report, ss);
        CHECK_THROWS_WITH(read_sweep_report(ss), Catch::Contains("kind"));
    }
}

TEST_CASE("plot data layout") {
    const auto spec = *preset_waveform("peo-pani");
    const auto trace = simulate_staircase(ResistorModel(1000.0), spec, 2.0);
    const auto slices = extract_slices(trace);

    SECTION("one block per slice") {
        std::ostringstream os;
        write_plot_data(std::span<const FrequencySlice>(slices), os);
        const std::string text = os.str();
        std::size_t blocks = 1, pos = 0;
        while ((pos = text.find("\n\n\n", pos)) != std::string::npos) {
            ++blocks;
            pos += 3;
        }
        CHECK(blocks == 12);
    }
    SECTION("sweep rows ascend in omega") {
        SweepReport sweep;
        for (int k = 0; k < 20; ++k) sweep.points.push_back({std::pow(10.0, 0.1 * k), 1e-8, true});
        std::ostringstream os;
        write_plot_data(sweep, os);
        std::istringstream is(os.str());
        std::string line;
        std::getline(is, line);  // comment
        int rows = 0;
        double prev = 0.0;
        while (std::getline(is, line)) {
            ++rows;
            const double omega = std::stod(line.substr(0, line.find('\t')));
            CHECK(omega > prev);
            prev = omega;
        }
        CHECK(rows == 20);
    }
    SECTION("i-t slice blocks") {
        const auto model_trace =
            simulate_staircase(RelaxationModel{}, make_staircase_spec(12, 0.02, 0.1, 0.9), 2e-4);
        const auto visits = it_slice(model_trace, 0.6);
        std::ostringstream os;
        write_plot_data(std::span<const ItVisit>(visits), os);
        CHECK(os.str().find("# visit step=") != std::string::npos);
    }
}

TEST_CASE("parameter files") {
    const auto dir = fs::temp_directory_path() / "memloop-params-test";
    fs::create_directories(dir);
    const auto good = dir / "good.json";
    const auto bad_value = dir / "bad_value.json";
    const auto not_object = dir / "not_object.json";
    std::ofstream(good) << R"({"tau": 0.25, "beta": 0.5})";
    std::ofstream(bad_value) << R"({"tau": "fast"})";
    std::ofstream(not_object) << R"([1, 2, 3])";

    const auto kv = read_params_file(good);
    CHECK(kv.at("tau") == 0.25);
    CHECK(kv.at("beta") == 0.5);
    CHECK_THROWS_AS(read_params_file(bad_value), FormatError);
    CHECK_THROWS_AS(read_params_file(not_object), FormatError);
    CHECK_THROWS_AS(read_params_file(dir / "absent.json"), FormatError);
    fs::remove_all(dir);
}
