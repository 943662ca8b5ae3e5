#include <sstream>
#include <string>

#include "doctest.h"
#include "iontele.h"

#include "json.hpp"

using nlohmann::json;

namespace {

struct Cfg {
    itp_config* ptr = itp_config_new();
    ~Cfg() { itp_config_free(ptr); }
    void set(const char* k, const char* v) { REQUIRE(itp_config_set(ptr, k, v) == IONTELE_OK); }
};

std::string take(char* s) {
    REQUIRE(s != nullptr);
    std::string out = s;
    itp_string_free(s);
    return out;
}

} // namespace

TEST_CASE("config handle") {
    Cfg cfg;
    cfg.set("bloch_theta", "1.0471975511965976");
    cfg.set("bloch_phi", "0.5");
    cfg.set("theta", "0.3");
    cfg.set("phi0", "0.8");
    cfg.set("canonical_phases", "1");
    cfg.set("seed", "7");
    char* text = nullptr;
    REQUIRE(itp_config_json(cfg.ptr, &text) == IONTELE_OK);
    std::string j = take(text);
    CHECK(j.find("\"seed\":7") != std::string::npos);
    CHECK(j.find("\"enforce_phase_condition\":true") != std::string::npos);

    // print -> parse -> print is the identity
    Cfg again;
    REQUIRE(itp_config_load_json(again.ptr, j.c_str()) == IONTELE_OK);
    char* text2 = nullptr;
    REQUIRE(itp_config_json(again.ptr, &text2) == IONTELE_OK);
    CHECK(take(text2) == j);

    SUBCASE("unknown keys fail with a message") {
        CHECK(itp_config_set(cfg.ptr, "frequency", "1") == IONTELE_ERR_INVALID);
        CHECK(std::string(itp_last_error()).find("frequency") != std::string::npos);
    }
    SUBCASE("bad values fail") {
        CHECK(itp_config_set(cfg.ptr, "theta", "fast") == IONTELE_ERR_INVALID);
        CHECK(itp_config_set(cfg.ptr, "forced_outcome", "xy") == IONTELE_ERR_INVALID);
    }
}

TEST_CASE("running through the C surface") {
    Cfg cfg;
    cfg.set("bloch_theta", "1.0471975511965976");
    cfg.set("bloch_phi", "0.5");
    cfg.set("theta", "0.3");
    cfg.set("phi0", "0.8");
    cfg.set("canonical_phases", "1");
    cfg.set("seed", "7");
    cfg.set("forced_outcome", "gg");

    SUBCASE("json report") {
        char* text = nullptr;
        REQUIRE(itp_run_report_json(cfg.ptr, 0, &text) == IONTELE_OK);
        json rep = json::parse(take(text));
        CHECK(rep.at("outcome") == "gg");
        CHECK(rep.at("fidelity").get<double>() == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(!rep.contains("transcript"));
    }
    SUBCASE("csv report") {
        char* text = nullptr;
        REQUIRE(itp_run_report_csv(cfg.ptr, &text) == IONTELE_OK);
        std::string csv = take(text);
        CHECK(csv.rfind("outcome,probability,fidelity,leakage,seed,config_hash\n", 0) == 0);
        std::string row = csv.substr(csv.find('\n') + 1);
        CHECK(row.rfind("gg,", 0) == 0);
        std::stringstream ss(row.substr(3));
        std::string prob, fid;
        std::getline(ss, prob, ',');
        std::getline(ss, fid, ',');
        CHECK(std::stod(prob) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(std::stod(fid) == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("invalid configs report invalid") {
        Cfg bad;
        bad.set("n_max", "1");
        char* text = nullptr;
        CHECK(itp_run_report_json(bad.ptr, 0, &text) == IONTELE_ERR_INVALID);
        CHECK(std::string(itp_last_error()).find("n_max") != std::string::npos);
    }
}

TEST_CASE("statistics and sweeps through the C surface") {
    Cfg cfg;
    cfg.set("bloch_theta", "1.2");
    cfg.set("phi0", "0.4");
    cfg.set("canonical_phases", "1");
    cfg.set("seed", "11");

    SUBCASE("outcome statistics") {
        uint64_t counts[4] = {0, 0, 0, 0};
        REQUIRE(itp_outcome_statistics(cfg.ptr, 400, counts) == IONTELE_OK);
        CHECK(counts[0] + counts[1] + counts[2] + counts[3] == 400);
        uint64_t again[4];
        REQUIRE(itp_outcome_statistics(cfg.ptr, 400, again) == IONTELE_OK);
        for (int i = 0; i < 4; ++i) CHECK(counts[i] == again[i]);
    }
    SUBCASE("bloch sweep csv") {
        char* text = nullptr;
        REQUIRE(itp_sweep_bloch_csv(cfg.ptr, 2, &text) == IONTELE_OK);
        std::string csv = take(text);
        std::size_t rows = 0;
        for (char c : csv)
            if (c == '\n') ++rows;
        CHECK(rows == 1 + 16);
    }
    SUBCASE("noise sweep csv") {
        const double grid[2] = {0.0, 0.05};
        char* text = nullptr;
        REQUIRE(itp_noise_sweep_csv(cfg.ptr, "pulse_area_sigma", grid, 2, 10, &text) ==
                IONTELE_OK);
        std::string csv = take(text);
        CHECK(csv.rfind("knob,value,trials,mean_fidelity,std_fidelity\n", 0) == 0);
        CHECK(csv.find("pulse_area_sigma,0,10,1,") != std::string::npos);
    }
    SUBCASE("outputs are byte-reproducible for equal configs") {
        char* a = nullptr;
        char* b = nullptr;
        REQUIRE(itp_sweep_bloch_csv(cfg.ptr, 2, &a) == IONTELE_OK);
        REQUIRE(itp_sweep_bloch_csv(cfg.ptr, 2, &b) == IONTELE_OK);
        CHECK(take(a) == take(b));
        REQUIRE(itp_run_report_json(cfg.ptr, 1, &a) == IONTELE_OK);
        REQUIRE(itp_run_report_json(cfg.ptr, 1, &b) == IONTELE_OK);
        CHECK(take(a) == take(b));
    }
}

TEST_CASE("version and error text") {
    CHECK(std::string(itp_version()) == "1.0.0");
    CHECK(itp_last_error() != nullptr);
    CHECK(itp_config_set(nullptr, "x", "y") == IONTELE_ERR_INVALID);
}
