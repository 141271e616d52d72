#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ca50/errors.hpp"
#include "ca50/harness.hpp"
#include "ca50/io.hpp"

using namespace ca50;
namespace fs = std::filesystem;

namespace {

CycleRecord make_record(std::int64_t cycle, int cylinder, double t,
                        double ca50) {
    CycleRecord r;
    r.cycle_index = cycle;
    r.cylinder_index = cylinder;
    r.sim_time_s = t;
    r.status = CycleStatus::ok;
    r.ca50_true_cad = ca50;
    r.ca50_measured_cad = ca50;
    r.p_ivc_bar = 2.0;
    r.t_ivc_k = 52.0;
    return r;
}

fs::path fresh_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("summarize a constant-error stream") {
    std::vector<CycleRecord> records;
    for (int k = 1; k <= 40; ++k) {
        records.push_back(make_record(k, 1, 0.1 * k, 8.4));
    }
    const auto summary = harness::summarize(
        records, {{1, 0.0, 4.1, 8.0, 1}}, 1.0);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].settling_cycle == 1);
    CHECK(summary[0].cycles_to_settle == 0);
    CHECK(summary[0].band_lo == doctest::Approx(0.4));
    CHECK(summary[0].band_hi == doctest::Approx(0.4));
    CHECK(summary[0].band_halfwidth == doctest::Approx(0.4));
    CHECK(summary[0].overshoot == doctest::Approx(0.4));
}

TEST_CASE("summarize a geometric decay with ratio 0.7") {
    // error 0.7^k from 1 CAD enters the +/-0.1 band for good at cycle 7
    std::vector<CycleRecord> records;
    for (int k = 0; k <= 30; ++k) {
        records.push_back(make_record(k, 1, 0.1 * k, 8.0 + std::pow(0.7, k)));
    }
    const auto summary = harness::summarize(
        records, {{1, 0.0, 3.2, 8.0, 0}}, 0.1);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].settling_cycle == 7);
    CHECK(summary[0].cycles_to_settle == 7);
}

TEST_CASE("the steady band is the min/max interval, not a deviation") {
    std::vector<CycleRecord> records;
    for (int k = 1; k <= 100; ++k) {
        const double err = (k % 2 == 0) ? 0.5 : -0.3;
        records.push_back(make_record(k, 1, 0.1 * k, 8.0 + err));
    }
    const auto summary = harness::summarize(
        records, {{1, 0.0, 10.1, 8.0, 1}}, 1.0);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].band_lo == doctest::Approx(-0.3));
    CHECK(summary[0].band_hi == doctest::Approx(0.5));
    CHECK(summary[0].band_halfwidth == doctest::Approx(0.5));
}

TEST_CASE("summarize rejects an empty stream") {
    CHECK_THROWS_AS(harness::summarize({}, {{1, 0, 10, 8, 1}}, 1.0),
                    ModelDomainError);
}

TEST_CASE("segment specs derive from the preset") {
    const auto preset = harness::load_case_preset(
        (fs::path(CA50_CONFIG_DIR) / "case2.cfg").string());
    const auto segs = harness::segments_from_preset(preset, 20.0, 3);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].ca50_ref_cad == 8.0);
    CHECK(segs[1].ca50_ref_cad == 10.0);
    CHECK(segs[1].t_start_s == 10.0);
    const auto one = harness::segments_from_preset(preset, 6.0, 3);
    CHECK(one.size() == 1);
    CHECK(one[0].t_end_s == 6.0);
}

TEST_CASE("case preset files mirror the published settings") {
    for (const char* name : {"case1", "case2", "case3", "case4"}) {
        const auto p = harness::load_case_preset(
            (fs::path(CA50_CONFIG_DIR) / (std::string(name) + ".cfg"))
                .string());
        CHECK(p.name == name);
        CHECK(p.first.charge_temp_k == 300.0);
        CHECK(p.first.speed_rpm == 1200.0);
    }
    const auto c4 = harness::load_case_preset(
        (fs::path(CA50_CONFIG_DIR) / "case4.cfg").string());
    CHECK(c4.second.speed_rpm == 1500.0);
    CHECK(c4.second.egr_target == 0.5);
    CHECK(c4.first.egr_target == 0.0);
}

TEST_CASE("unknown case exits with the config status and writes nothing") {
    harness::RunManifest m;
    m.case_id = "case9";
    m.config_dir = CA50_CONFIG_DIR;
    m.out_dir = fresh_dir("ca50_unknown_case").string();
    CHECK(harness::run(m) == harness::kExitConfigError);
    CHECK_FALSE(fs::exists(m.out_dir));
}

TEST_CASE("a run writes attributable records, summaries and plots") {
    harness::RunManifest m;
    m.case_id = "case1";
    m.controller = "feedforward";
    m.seed = 99;
    m.config_dir = CA50_CONFIG_DIR;
    m.out_dir = fresh_dir("ca50_run_outputs").string();
    m.duration_s = 3.0;
    REQUIRE(harness::run(m) == harness::kExitOk);

    for (const char* f :
         {"records.csv", "summary.txt", "summary.csv", "ca50.svg",
          "soi_cyl1.svg"}) {
        CHECK(fs::exists(fs::path(m.out_dir) / f));
    }

    io::RecordFileHeader header;
    const auto records = io::read_records_csv(
        (fs::path(m.out_dir) / "records.csv").string(), &header);
    CHECK(header.seed == 99);
    CHECK(header.preset == "case1");
    CHECK(header.controller == "feedforward");
    CHECK(header.coefficients_checksum != 0);
    CHECK_FALSE(records.empty());

    // summary files carry the same attribution
    std::ifstream in(fs::path(m.out_dir) / "summary.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "# seed=99");

    // plots are real SVG documents
    std::ifstream svg(fs::path(m.out_dir) / "ca50.svg");
    std::string content((std::istreambuf_iterator<char>(svg)),
                        std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("polyline") != std::string::npos);
}

TEST_CASE("summaries are recomputable offline from the record file alone") {
    harness::RunManifest m;
    m.case_id = "case2";
    m.controller = "adaptive";
    m.seed = 7;
    m.config_dir = CA50_CONFIG_DIR;
    m.out_dir = fresh_dir("ca50_offline_summary").string();
    m.duration_s = 4.0;
    REQUIRE(harness::run(m) == harness::kExitOk);

    const auto cfg = harness::load_plant_config(m.config_dir);
    const auto preset = harness::load_case_preset(
        (fs::path(m.config_dir) / "case2.cfg").string());
    const auto in_memory = harness::execute_case(m, cfg, preset);
    const auto from_csv = io::read_records_csv(
        (fs::path(m.out_dir) / "records.csv").string());

    const auto segs = harness::segments_from_preset(
        preset, m.duration_s, cfg.controller.activation_cycle);
    const auto a = harness::summarize(in_memory.records, segs, 1.0);
    const auto b = harness::summarize(from_csv, segs, 1.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].cylinder_index == b[i].cylinder_index);
        CHECK(a[i].settling_cycle == b[i].settling_cycle);
        CHECK(a[i].band_lo == doctest::Approx(b[i].band_lo).epsilon(1e-9));
        CHECK(a[i].band_hi == doctest::Approx(b[i].band_hi).epsilon(1e-9));
        CHECK(a[i].overshoot == doctest::Approx(b[i].overshoot).epsilon(1e-9));
    }
}

TEST_CASE("a plant abort surfaces as exit status 3") {
    // a config directory whose coefficient table cannot ignite
    const fs::path dir = fresh_dir("ca50_abort_cfg");
    fs::create_directories(dir);
    for (const char* f : {"plant_default.cfg", "case1.cfg"}) {
        fs::copy_file(fs::path(CA50_CONFIG_DIR) / f, dir / f);
    }
    auto set = io::load_coefficients(
        (fs::path(CA50_CONFIG_DIR) / "coefficients_default.txt").string());
    set.combustion.c13 *= 100.0;
    io::save_coefficients((dir / "coefficients_default.txt").string(), set);

    harness::RunManifest m;
    m.case_id = "case1";
    m.config_dir = dir.string();
    m.out_dir = (dir / "out").string();
    m.duration_s = 2.0;
    CHECK(harness::run(m) == harness::kExitPlantAbort);
}

TEST_CASE("noise study produces one row per cylinder") {
    harness::RunManifest m;
    m.controller = "adaptive";
    m.seed = 5;
    m.config_dir = CA50_CONFIG_DIR;
    m.duration_s = 3.0;
    auto cfg = harness::load_plant_config(m.config_dir);
    cfg.plant.ca50_noise_std = 0.25;
    const auto case2 = harness::load_case_preset(
        (fs::path(m.config_dir) / "case2.cfg").string());
    const auto rows = harness::noise_study_rows(m, cfg, case2);
    REQUIRE(rows.size() == kNumCylinders);
    for (const auto& r : rows) {
        CHECK(r.error_std_noise_off >= 0.0);
        CHECK(r.error_std_noise_on >= 0.0);
        CHECK(std::isfinite(r.error_std_noise_on));
    }
    // the study requires the feedback controller
    m.controller = "pid";
    CHECK(harness::noise_study(m) == harness::kExitConfigError);
}

TEST_CASE("coefficient table loading") {
    const auto path =
        (fs::path(CA50_CONFIG_DIR) / "coefficients_published.txt").string();
    const auto set = io::load_coefficients(path);
    CHECK(set.combustion.c13 == 8.22e4);
    CHECK(set.combustion.c14 == -1.15);
    CHECK(set.combustion.k_c == 1.25);
    CHECK(set.intake[0].c1 == -7.35e-4);
    CHECK(set.intake[5].c9 == 0.0582);
    // c15 is derived so both burn-duration routes agree
    CHECK(set.combustion.c15 ==
          doctest::Approx(set.combustion.c18 / WiebeParams{}.midburn_scale()));
}

TEST_CASE("coefficient loader rejects malformed tables") {
    const fs::path dir = fresh_dir("ca50_coeff_errors");
    fs::create_directories(dir);
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name);
        out << body;
        return (dir / name).string();
    };
    const std::string good = [&] {
        std::ifstream in(fs::path(CA50_CONFIG_DIR) /
                         "coefficients_published.txt");
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    }();

    // five columns instead of one per cylinder
    CHECK_THROWS_AS(
        io::load_coefficients(write(
            "five.txt",
            std::string(good).replace(good.find("-7.68e-4"), 8, "        "))),
        ConfigError);
    // unit overrides (or any unknown key) are rejected
    CHECK_THROWS_AS(
        io::load_coefficients(write("units.txt", good + "\npressure_unit kPa\n")),
        ConfigError);
    // missing key
    {
        std::string body = good;
        body.erase(body.find("c10"), body.find("c11") - body.find("c10"));
        CHECK_THROWS_AS(io::load_coefficients(write("missing.txt", body)),
                        ConfigError);
    }
    // sign assertions for the published model form
    {
        std::string body = good;
        body.replace(body.find("-1.15"), 5, "+1.15");
        CHECK_THROWS_AS(io::load_coefficients(write("sign.txt", body)),
                        ConfigError);
    }
    // duplicate keys
    CHECK_THROWS_AS(io::load_coefficients(write("dup.txt", good + "\nc10 1\n")),
                    ConfigError);
}

TEST_CASE("coefficient tables round-trip through save and load") {
    const auto set = io::load_coefficients(
        (fs::path(CA50_CONFIG_DIR) / "coefficients_default.txt").string());
    const auto path =
        (fs::temp_directory_path() / "ca50_coeff_roundtrip.txt").string();
    io::save_coefficients(path, set);
    const auto back = io::load_coefficients(path);
    CHECK(back.combustion.c13 == set.combustion.c13);
    CHECK(back.combustion.c18 == set.combustion.c18);
    for (int i = 0; i < kNumCylinders; ++i) {
        CHECK(back.intake[static_cast<std::size_t>(i)].c5 ==
              set.intake[static_cast<std::size_t>(i)].c5);
    }
}

TEST_CASE("file checksums are stable and discriminating") {
    const auto a = io::fnv1a_file_checksum(
        (fs::path(CA50_CONFIG_DIR) / "coefficients_published.txt").string());
    const auto b = io::fnv1a_file_checksum(
        (fs::path(CA50_CONFIG_DIR) / "coefficients_published.txt").string());
    const auto c = io::fnv1a_file_checksum(
        (fs::path(CA50_CONFIG_DIR) / "coefficients_default.txt").string());
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("key/value parser diagnostics") {
    CHECK_THROWS_AS(io::KeyValueFile::parse_text("key\n"), ConfigError);
    CHECK_THROWS_AS(io::KeyValueFile::parse_text("a 1\na 2\n"), ConfigError);
    const auto kv = io::KeyValueFile::parse_text("a 1 2 3  # trailing\n");
    CHECK(kv.get_doubles("a", 3) == std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(kv.get_double("a"), ConfigError);   // expects one value
    CHECK_THROWS_AS(kv.get_double("b"), ConfigError);   // missing
    CHECK_THROWS_AS(kv.get_doubles("a", 2), ConfigError);
}
