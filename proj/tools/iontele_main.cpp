// iontele: command-line front end for the teleportation simulator.
// Subcommands: run, sweep-bloch, stats, noise-sweep, serve, alice, bob,
// verify. Everything goes through the C API in iontele.h.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iontele.h"

namespace {

struct ConfigFlags {
    std::vector<std::pair<std::string, std::string>> kv; // applied in order
    std::string config_file;

    void add_to(CLI::App* cmd, bool with_state = true) {
        cmd->add_option("--config", config_file, "JSON config file (flags override it)");
        auto opt = [this, cmd](const char* flag, const char* key, const char* help) {
            cmd->add_option_function<std::string>(
                flag,
                [this, key](const std::string& v) { kv.emplace_back(key, v); },
                help);
        };
        if (with_state) {
            opt("--alpha", "alpha", "amplitude on |0>, as re or re,im");
            opt("--beta", "beta", "amplitude on |1>, as re or re,im");
            opt("--bloch-theta", "bloch_theta", "Bloch polar angle (overrides alpha/beta)");
            opt("--bloch-phi", "bloch_phi", "Bloch azimuth");
        }
        opt("--theta", "theta", "mapping laser phase");
        opt("--phiA", "phi_a", "Raman pair phase, trap A");
        opt("--phiB", "phi_b", "Raman pair phase, trap B");
        opt("--phi0", "phi0", "equilibrium-separation phase");
        opt("--varphi", "varphi", "overall Raman drive phase");
        cmd->add_flag_function(
            "--canonical-phases",
            [this](std::int64_t) { kv.emplace_back("canonical_phases", "1"); },
            "set phi_a = phi_b = pi - phi0/2");
        opt("--nmax", "n_max", "Fock truncation (>= 2)");
        opt("--seed", "seed", "rng seed");
        opt("--strategy", "strategy", "conditional_pulse | rotate_then_antijc");
        opt("--force", "forced_outcome", "force a measurement outcome: gg|ge|eg|ee|none");
        opt("--noise-pulse-area-sigma", "noise.pulse_area_sigma", "relative area jitter");
        opt("--noise-phase-jitter-sigma", "noise.phase_jitter_sigma", "phase jitter, rad");
        opt("--noise-transport-dephasing-p", "noise.transport_dephasing_p",
            "z-flip chance during transport");
        opt("--noise-heating-p", "noise.heating_p", "heating jump chance per stage");
    }

    int apply(itp_config* cfg) const {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) {
                std::cerr << "cannot read config file " << config_file << "\n";
                return IONTELE_ERR_INVALID;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            int rc = itp_config_load_json(cfg, ss.str().c_str());
            if (rc != IONTELE_OK) return rc;
        }
        for (const auto& [k, v] : kv) {
            int rc = itp_config_set(cfg, k.c_str(), v.c_str());
            if (rc != IONTELE_OK) return rc;
        }
        return IONTELE_OK;
    }
};

struct ConfigHandle {
    itp_config* ptr = itp_config_new();
    ~ConfigHandle() { itp_config_free(ptr); }
};

int fail(const char* what) {
    std::cerr << what << ": " << itp_last_error() << "\n";
    return 1;
}

int emit(const std::string& text, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return 0;
    }
    std::ofstream out(output_path);
    if (!out) {
        std::cerr << "cannot write " << output_path << "\n";
        return 1;
    }
    out << text;
    return 0;
}

std::string default_endpoint() {
    if (const char* env = std::getenv("IONTELE_ENDPOINT")) return env;
    return "127.0.0.1:7023";
}

bool parse_complex_arg(const std::string& text, double& re, double& im) {
    try {
        auto comma = text.find(',');
        if (comma == std::string::npos) {
            re = std::stod(text);
            im = 0.0;
        } else {
            re = std::stod(text.substr(0, comma));
            im = std::stod(text.substr(comma + 1));
        }
        return true;
    } catch (...) {
        return false;
    }
}

std::string self_path(const char* argv0) {
    char buf[4096];
    ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n > 0) {
        buf[n] = '\0';
        return buf;
    }
    return argv0 ? argv0 : "";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"iontele: motional-state teleportation simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "single teleportation run, report to stdout");
    ConfigFlags run_flags;
    run_flags.add_to(run);
    std::string run_format = "json", run_output;
    bool run_no_transcript = false;
    run->add_option("--format", run_format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    run->add_option("--output", run_output, "write to a file instead of stdout");
    run->add_flag("--no-transcript", run_no_transcript, "omit the transcript from JSON");

    // sweep-bloch
    auto* sweep = app.add_subcommand("sweep-bloch", "fidelity over a Bloch-angle grid (CSV)");
    ConfigFlags sweep_flags;
    sweep_flags.add_to(sweep, /*with_state=*/false);
    std::uint64_t sweep_density = 5;
    std::string sweep_output;
    sweep->add_option("--density", sweep_density, "grid points per axis (>= 2)")
        ->check(CLI::Range(std::uint64_t{2}, std::uint64_t{4096}));
    sweep->add_option("--output", sweep_output, "CSV file (default stdout)");

    // stats
    auto* stats = app.add_subcommand("stats", "outcome counts over repeated runs");
    ConfigFlags stats_flags;
    stats_flags.add_to(stats);
    std::uint64_t stats_trials = 1000;
    std::string stats_output;
    stats->add_option("--trials", stats_trials, "number of trials")->check(CLI::PositiveNumber);
    stats->add_option("--output", stats_output, "CSV file (default stdout)");

    // noise-sweep
    auto* nsweep = app.add_subcommand("noise-sweep", "mean fidelity vs one noise knob (CSV)");
    ConfigFlags nsweep_flags;
    nsweep_flags.add_to(nsweep);
    std::string nsweep_knob = "pulse_area_sigma", nsweep_grid = "0,0.02,0.05,0.1";
    std::uint64_t nsweep_trials = 200;
    std::string nsweep_output;
    nsweep->add_option("--knob", nsweep_knob,
                       "pulse_area_sigma | phase_jitter_sigma | transport_dephasing_p | "
                       "heating_p");
    nsweep->add_option("--grid", nsweep_grid, "comma-separated knob values");
    nsweep->add_option("--trials", nsweep_trials, "trials per grid point")
        ->check(CLI::PositiveNumber);
    nsweep->add_option("--output", nsweep_output, "CSV file (default stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "host one networked session");
    ConfigFlags serve_flags;
    serve_flags.add_to(serve);
    std::string serve_endpoint = default_endpoint(), serve_transcript, serve_portfile,
                serve_report;
    serve->add_option("--endpoint", serve_endpoint, "ip:port (port 0 = kernel-assigned)");
    serve->add_option("--transcript", serve_transcript, "JSONL transcript file");
    serve->add_option("--port-file", serve_portfile, "write the bound port here");
    serve->add_option("--report", serve_report, "write the final report JSON here");

    // alice
    auto* alice = app.add_subcommand("alice", "run Alice's station against a host");
    std::string alice_endpoint = default_endpoint(), alice_alpha = "1", alice_beta = "0";
    std::string alice_bloch_theta, alice_bloch_phi;
    double alice_theta = 0.0;
    alice->add_option("--endpoint", alice_endpoint, "ip:port");
    alice->add_option("--alpha", alice_alpha, "amplitude on |0>, re or re,im");
    alice->add_option("--beta", alice_beta, "amplitude on |1>, re or re,im");
    alice->add_option("--bloch-theta", alice_bloch_theta, "Bloch polar angle");
    alice->add_option("--bloch-phi", alice_bloch_phi, "Bloch azimuth");
    alice->add_option("--theta", alice_theta, "mapping laser phase");

    // bob
    auto* bob = app.add_subcommand("bob", "run Bob's station against a host");
    std::string bob_endpoint = default_endpoint();
    std::string bob_output;
    bob->add_option("--endpoint", bob_endpoint, "ip:port");
    bob->add_option("--output", bob_output, "write Bob's report copy here");

    // verify
    auto* verify = app.add_subcommand("verify", "run the release criteria");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        ConfigHandle cfg;
        if (run_flags.apply(cfg.ptr) != IONTELE_OK) return fail("bad configuration");
        char* text = nullptr;
        int rc = run_format == "csv"
                     ? itp_run_report_csv(cfg.ptr, &text)
                     : itp_run_report_json(cfg.ptr, run_no_transcript ? 0 : 1, &text);
        if (rc != IONTELE_OK) return fail("run failed");
        int erc = emit(text, run_output);
        itp_string_free(text);
        return erc;
    }

    if (sweep->parsed()) {
        ConfigHandle cfg;
        if (sweep_flags.apply(cfg.ptr) != IONTELE_OK) return fail("bad configuration");
        char* text = nullptr;
        if (itp_sweep_bloch_csv(cfg.ptr, sweep_density, &text) != IONTELE_OK)
            return fail("sweep failed");
        int erc = emit(text, sweep_output);
        itp_string_free(text);
        return erc;
    }

    if (stats->parsed()) {
        ConfigHandle cfg;
        if (stats_flags.apply(cfg.ptr) != IONTELE_OK) return fail("bad configuration");
        uint64_t counts[4] = {0, 0, 0, 0};
        if (itp_outcome_statistics(cfg.ptr, stats_trials, counts) != IONTELE_OK)
            return fail("stats failed");
        const char* names[4] = {"gg", "ge", "eg", "ee"};
        std::string csv = "outcome,count\n";
        for (int i = 0; i < 4; ++i)
            csv += std::string(names[i]) + "," + std::to_string(counts[i]) + "\n";
        return emit(csv, stats_output);
    }

    if (nsweep->parsed()) {
        ConfigHandle cfg;
        if (nsweep_flags.apply(cfg.ptr) != IONTELE_OK) return fail("bad configuration");
        std::vector<double> grid;
        std::stringstream ss(nsweep_grid);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                grid.push_back(std::stod(tok));
            } catch (...) {
                std::cerr << "bad grid value '" << tok << "'\n";
                return 1;
            }
        }
        char* text = nullptr;
        if (itp_noise_sweep_csv(cfg.ptr, nsweep_knob.c_str(), grid.data(), grid.size(),
                                nsweep_trials, &text) != IONTELE_OK)
            return fail("noise sweep failed");
        int erc = emit(text, nsweep_output);
        itp_string_free(text);
        return erc;
    }

    if (serve->parsed()) {
        ConfigHandle cfg;
        if (serve_flags.apply(cfg.ptr) != IONTELE_OK) return fail("bad configuration");
        char* report = nullptr;
        int rc = itp_serve(cfg.ptr, serve_endpoint.c_str(),
                           serve_transcript.empty() ? nullptr : serve_transcript.c_str(),
                           serve_portfile.empty() ? nullptr : serve_portfile.c_str(), &report);
        if (rc != IONTELE_OK) return fail("serve failed");
        int erc = emit(report, serve_report);
        itp_string_free(report);
        return erc;
    }

    if (alice->parsed()) {
        double are, aim, bre, bim;
        if (!alice_bloch_theta.empty() || !alice_bloch_phi.empty()) {
            double bt = 0.0, bp = 0.0;
            try {
                if (!alice_bloch_theta.empty()) bt = std::stod(alice_bloch_theta);
                if (!alice_bloch_phi.empty()) bp = std::stod(alice_bloch_phi);
            } catch (...) {
                std::cerr << "bad Bloch angle\n";
                return 1;
            }
            are = std::cos(bt / 2.0);
            aim = 0.0;
            bre = std::sin(bt / 2.0) * std::cos(bp);
            bim = std::sin(bt / 2.0) * std::sin(bp);
        } else if (!parse_complex_arg(alice_alpha, are, aim) ||
                   !parse_complex_arg(alice_beta, bre, bim)) {
            std::cerr << "bad alpha/beta\n";
            return 1;
        }
        if (itp_alice(alice_endpoint.c_str(), are, aim, bre, bim, alice_theta) != IONTELE_OK)
            return fail("alice failed");
        return 0;
    }

    if (bob->parsed()) {
        char* report = nullptr;
        if (itp_bob(bob_endpoint.c_str(), &report) != IONTELE_OK) return fail("bob failed");
        int erc = emit(report, bob_output);
        itp_string_free(report);
        return erc;
    }

    if (verify->parsed()) {
        int failures = 0;
        std::string self = self_path(argv[0]);
        if (itp_verify(self.empty() ? nullptr : self.c_str(), &failures) != IONTELE_OK)
            return fail("verify failed to run");
        if (failures != 0) {
            std::cerr << failures << " criterion(s) failed\n";
            return 1;
        }
        std::cout << "all criteria passed\n";
        return 0;
    }

    return 0;
}
