/* iontele.h
 *
 * C interface of the iontele shared library: a deterministic state-vector
 * simulator of motional-state teleportation between two ion traps, with a
 * networked classical-channel harness.
 *
 * Conventions:
 *   - every function returns an iontele status code unless noted;
 *   - handles are opaque and freed with their matching *_free call;
 *   - strings returned through char** are heap allocated; release them with
 *     itp_string_free;
 *   - on failure, itp_last_error() describes the most recent error in the
 *     calling thread.
 */

#ifndef IONTELE_H
#define IONTELE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    IONTELE_OK = 0,
    IONTELE_ERR_INVALID = 1, /* bad arguments or configuration */
    IONTELE_ERR_RUNTIME = 2  /* I/O, network, or internal failure */
};

typedef struct itp_config itp_config;

const char* itp_version(void);

/* Most recent error message in this thread; never NULL. */
const char* itp_last_error(void);

void itp_string_free(char* s);

/* ---- configuration ---- */

/* Fresh config: alpha=1, beta=0, canonical-trivial phases, n_max=3, seed=0,
 * conditional-pulse strategy, no noise. */
itp_config* itp_config_new(void);
void itp_config_free(itp_config* cfg);

/* Key/value setter; keys mirror the CLI flags and the JSON schema:
 *   alpha, beta                 "re" or "re,im"
 *   bloch_theta, bloch_phi      Bloch angles (override alpha/beta)
 *   theta, phi_a, phi_b, phi0, varphi   radians
 *   canonical_phases            "0"/"1": derive phi_a = phi_b = pi - phi0/2
 *   n_max, seed                 integers
 *   strategy                    conditional_pulse | rotate_then_antijc
 *   forced_outcome              gg | ge | eg | ee | none
 *   noise.pulse_area_sigma, noise.phase_jitter_sigma,
 *   noise.transport_dephasing_p, noise.heating_p   reals
 */
int itp_config_set(itp_config* cfg, const char* key, const char* value);

/* Merges a JSON object in the canonical schema over the current values. */
int itp_config_load_json(itp_config* cfg, const char* json_text);

/* Canonical JSON of the resolved config (round-trips through load_json). */
int itp_config_json(const itp_config* cfg, char** json_out);

/* ---- running ---- */

int itp_run_report_json(const itp_config* cfg, int with_transcript, char** json_out);

/* Header line plus one CSV row. */
int itp_run_report_csv(const itp_config* cfg, char** csv_out);

/* counts_out holds gg, ge, eg, ee. */
int itp_outcome_statistics(const itp_config* cfg, uint64_t trials, uint64_t counts_out[4]);

/* Fidelity over a Bloch-angle grid, every outcome forced; CSV columns
 * theta_bloch,phi_bloch,outcome,fidelity. */
int itp_sweep_bloch_csv(const itp_config* cfg, uint64_t density, char** csv_out);

/* Mean/std fidelity sweep of one noise knob over a grid; CSV columns
 * knob,value,trials,mean_fidelity,std_fidelity. */
int itp_noise_sweep_csv(const itp_config* cfg, const char* knob, const double* grid,
                        size_t grid_len, uint64_t trials_per_point, char** csv_out);

/* ---- networked roles ---- */

/* Hosts one session on `endpoint` ("ip:port"; port 0 = kernel-assigned).
 * Optional: transcript_path (JSONL transcript), port_file (bound port),
 * report_json_out (full final report). Blocks until the session ends. */
int itp_serve(const itp_config* cfg, const char* endpoint, const char* transcript_path,
              const char* port_file, char** report_json_out);

/* Runs Alice's script against a host. */
int itp_alice(const char* endpoint, double alpha_re, double alpha_im, double beta_re,
              double beta_im, double theta);

/* Runs Bob's script; report_json_out receives the report as delivered to
 * Bob (scalars only). */
int itp_bob(const char* endpoint, char** report_json_out);

/* ---- verification ---- */

/* Runs the release criteria, printing one line per criterion to stdout.
 * cli_path (may be NULL) is the binary spawned for the networked criterion.
 * failures_out (may be NULL) receives the number of failed criteria. */
int itp_verify(const char* cli_path, int* failures_out);

#ifdef __cplusplus
}
#endif

#endif /* IONTELE_H */
