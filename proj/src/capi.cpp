#include "iontele.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "iontele/netharness.hpp"
#include "iontele/noise.hpp"
#include "iontele/protocol.hpp"
#include "iontele/verify.hpp"

namespace {

thread_local std::string g_last_error = "no error";

char* to_cstring(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return IONTELE_OK;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return IONTELE_ERR_INVALID;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IONTELE_ERR_RUNTIME;
    }
}

double parse_double(const std::string& text) {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size())
        throw std::invalid_argument("not a number: '" + text + "'");
    return v;
}

iontele::cplx parse_complex(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos) return iontele::cplx(parse_double(text), 0.0);
    return iontele::cplx(parse_double(text.substr(0, comma)),
                         parse_double(text.substr(comma + 1)));
}

} // namespace

// Opaque config: the protocol description plus deferred Bloch/canonical
// directives, resolved when the config is used.
struct itp_config {
    iontele::ProtocolConfig cfg;
    bool use_bloch = false;
    double bloch_theta = 0.0;
    double bloch_phi = 0.0;
    bool canonical = false;

    iontele::ProtocolConfig resolved() const {
        iontele::ProtocolConfig out = cfg;
        if (use_bloch) iontele::bloch_to_amplitudes(bloch_theta, bloch_phi, out.alpha, out.beta);
        if (canonical) out.set_canonical_phases();
        out.validate();
        return out;
    }
};

extern "C" {

const char* itp_version(void) { return "1.0.0"; }

const char* itp_last_error(void) { return g_last_error.c_str(); }

void itp_string_free(char* s) { std::free(s); }

itp_config* itp_config_new(void) { return new itp_config(); }

void itp_config_free(itp_config* cfg) { delete cfg; }

int itp_config_set(itp_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        const std::string k = key;
        const std::string v = value;
        auto& c = cfg->cfg;
        if (k == "alpha") {
            c.alpha = parse_complex(v);
            cfg->use_bloch = false;
        } else if (k == "beta") {
            c.beta = parse_complex(v);
            cfg->use_bloch = false;
        } else if (k == "bloch_theta") {
            cfg->bloch_theta = parse_double(v);
            cfg->use_bloch = true;
        } else if (k == "bloch_phi") {
            cfg->bloch_phi = parse_double(v);
            cfg->use_bloch = true;
        } else if (k == "theta") {
            c.theta = parse_double(v);
        } else if (k == "phi_a") {
            c.phi_a = parse_double(v);
        } else if (k == "phi_b") {
            c.phi_b = parse_double(v);
        } else if (k == "phi0") {
            c.phi0 = parse_double(v);
        } else if (k == "varphi") {
            c.varphi = parse_double(v);
        } else if (k == "canonical_phases") {
            cfg->canonical = (v == "1" || v == "true");
        } else if (k == "n_max") {
            long n = std::stol(v);
            if (n < 0) throw std::invalid_argument("n_max must be >= 0");
            c.n_max = static_cast<std::size_t>(n);
        } else if (k == "seed") {
            c.seed = std::stoull(v);
        } else if (k == "strategy") {
            c.strategy = iontele::strategy_from_name(v);
        } else if (k == "forced_outcome") {
            if (v == "none" || v.empty())
                c.forced_outcome.reset();
            else
                c.forced_outcome = iontele::outcome_from_name(v);
        } else if (k.rfind("noise.", 0) == 0) {
            iontele::set_noise_knob(c.noise, k.substr(6), parse_double(v));
        } else {
            throw std::invalid_argument("unknown config key '" + k + "'");
        }
    });
}

int itp_config_load_json(itp_config* cfg, const char* json_text) {
    if (!cfg || !json_text) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        cfg->cfg = iontele::ProtocolConfig::from_json(json_text);
        cfg->use_bloch = false;
        cfg->canonical = false;
    });
}

int itp_config_json(const itp_config* cfg, char** json_out) {
    if (!cfg || !json_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] { *json_out = to_cstring(cfg->resolved().canonical_json()); });
}

int itp_run_report_json(const itp_config* cfg, int with_transcript, char** json_out) {
    if (!cfg || !json_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        iontele::FidelityReport rep = iontele::run_teleportation(cfg->resolved());
        *json_out = to_cstring(rep.to_json(with_transcript != 0));
    });
}

int itp_run_report_csv(const itp_config* cfg, char** csv_out) {
    if (!cfg || !csv_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        iontele::FidelityReport rep = iontele::run_teleportation(cfg->resolved());
        *csv_out = to_cstring(std::string(iontele::FidelityReport::csv_header()) + "\n" +
                              rep.to_csv_row() + "\n");
    });
}

int itp_outcome_statistics(const itp_config* cfg, uint64_t trials, uint64_t counts_out[4]) {
    if (!cfg || !counts_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        auto counts = iontele::outcome_statistics(cfg->resolved(), trials);
        for (int i = 0; i < 4; ++i) counts_out[i] = counts[static_cast<std::size_t>(i)];
    });
}

int itp_sweep_bloch_csv(const itp_config* cfg, uint64_t density, char** csv_out) {
    if (!cfg || !csv_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        *csv_out = to_cstring(
            iontele::sweep_bloch_csv(cfg->resolved(), static_cast<std::size_t>(density)));
    });
}

int itp_noise_sweep_csv(const itp_config* cfg, const char* knob, const double* grid,
                        size_t grid_len, uint64_t trials_per_point, char** csv_out) {
    if (!cfg || !knob || !grid || !csv_out) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        std::vector<double> g(grid, grid + grid_len);
        auto rows = iontele::sweep_fidelity_vs_noise(cfg->resolved(), knob, g,
                                                     static_cast<std::size_t>(trials_per_point));
        *csv_out = to_cstring(iontele::sweep_to_csv(knob, rows));
    });
}

int itp_serve(const itp_config* cfg, const char* endpoint, const char* transcript_path,
              const char* port_file, char** report_json_out) {
    if (!cfg || !endpoint) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        iontele::net::SessionConfig session;
        session.config = cfg->resolved();
        session.endpoint = iontele::net::Endpoint::parse(endpoint);
        if (transcript_path) session.transcript_path = transcript_path;
        if (port_file) session.port_file = port_file;
        iontele::net::ServeResult result = iontele::net::serve(session);
        if (report_json_out) *report_json_out = to_cstring(result.report.to_json(false));
    });
}

int itp_alice(const char* endpoint, double alpha_re, double alpha_im, double beta_re,
              double beta_im, double theta) {
    if (!endpoint) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        iontele::net::alice_client(iontele::net::Endpoint::parse(endpoint),
                                   iontele::cplx(alpha_re, alpha_im),
                                   iontele::cplx(beta_re, beta_im), theta);
    });
}

int itp_bob(const char* endpoint, char** report_json_out) {
    if (!endpoint) {
        g_last_error = "null argument";
        return IONTELE_ERR_INVALID;
    }
    return guarded([&] {
        std::string rep = iontele::net::bob_client(iontele::net::Endpoint::parse(endpoint));
        if (report_json_out) *report_json_out = to_cstring(rep);
    });
}

int itp_verify(const char* cli_path, int* failures_out) {
    return guarded([&] {
        iontele::accept::Options opt;
        if (cli_path) opt.cli_path = cli_path;
        opt.out = &std::cout;
        auto results = iontele::accept::run_all(opt);
        int failures = 0;
        for (const auto& r : results)
            if (!r.pass) ++failures;
        if (failures_out) *failures_out = failures;
    });
}

} // extern "C"
