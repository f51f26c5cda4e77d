#ifndef FTQKD_H
#define FTQKD_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every call.
 */
typedef enum FtqkdStatus {
  FTQKD_STATUS_OK = 0,
  FTQKD_STATUS_NULL_POINTER = 1,
  /*
   Argument outside the domain of the function.
   */
  FTQKD_STATUS_DOMAIN = 2,
  /*
   Configuration failed to parse or validate.
   */
  FTQKD_STATUS_CONFIG = 3,
  /*
   Unparseable quantity string.
   */
  FTQKD_STATUS_QUANTITY = 4,
  FTQKD_STATUS_MISALIGNED = 5,
  /*
   Nothing to report, e.g. a session without sifted bits.
   */
  FTQKD_STATUS_EMPTY = 6,
  FTQKD_STATUS_INVALID_UTF8 = 7,
  /*
   Index past the end of a table.
   */
  FTQKD_STATUS_OUT_OF_RANGE = 8,
  FTQKD_STATUS_PANIC = 9,
} FtqkdStatus;

/*
 Opaque session configuration.
 */
typedef struct FtqkdConfig FtqkdConfig;

/*
 Opaque QBER-versus-jitter table.
 */
typedef struct FtqkdCurve FtqkdCurve;

/*
 Opaque session report.
 */
typedef struct FtqkdReport FtqkdReport;

/*
 Detector-limited spreads and the resulting Δ².
 */
typedef struct FtqkdVarianceBudget {
  /*
   RMS timing spread (s).
   */
  double delta_t;
  /*
   Position spread (m).
   */
  double delta_x;
  /*
   Wavevector spread (rad/m).
   */
  double delta_k;
  double delta_sq;
} FtqkdVarianceBudget;

/*
 One row of a QBER curve.
 */
typedef struct FtqkdCurveRow {
  /*
   Detector jitter FWHM (s).
   */
  double jitter_fwhm;
  double delta_sq;
  /*
   Upper bound on the QBER.
   */
  double qber;
  /*
   Exact parity-error probability.
   */
  double qber_exact;
  double keyrate;
} FtqkdCurveRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or an empty string.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *ftqkd_last_error(void);

/*
 Release a string returned by this library. Null is ignored.
 */
void ftqkd_string_free(char *s);

/*
 Binary entropy in bits.
 */
enum FtqkdStatus ftqkd_h2(double x, double *out);

/*
 Key rate per pulse `gain * (1 - f h2(e) - h2(e))`; may be negative.
 */
enum FtqkdStatus ftqkd_keyrate(double qber, double gain, double f, double *out);

/*
 Upper bound on the QBER of mod-√π distillation at a given Δ².
 */
enum FtqkdStatus ftqkd_qber_bound(double delta_sq, double *out);

/*
 Exact parity-error probability at a given Δ².
 */
enum FtqkdStatus ftqkd_parity_error_exact(double delta_sq, double *out);

/*
 QBER at which the key rate with reconciliation efficiency `f` reaches zero.
 */
enum FtqkdStatus ftqkd_security_threshold(double f, double *out);

/*
 Δ² and its factors for a detector jitter (FWHM, s) behind dispersion
 `d_lambda` (s/m) at `wavelength` (m) in a medium of index `refractive_index`.
 */
enum FtqkdStatus ftqkd_variance_chain(double jitter_fwhm,
                                      double d_lambda,
                                      double wavelength,
                                      double refractive_index,
                                      struct FtqkdVarianceBudget *out);

/*
 Alice's side of mod-√π distillation: public remainder and key bit.
 */
enum FtqkdStatus ftqkd_gp_encode(double q_a, double *m, uint8_t *bit);

/*
 Bob's side of mod-√π distillation.
 */
enum FtqkdStatus ftqkd_gp_decode(double q_b, double m, uint8_t *bit);

/*
 Tabulate the QBER bound for `steps` evenly spaced jitters.
 */
enum FtqkdStatus ftqkd_curve_new(double jitter_min,
                                 double jitter_max,
                                 uintptr_t steps,
                                 double d_lambda,
                                 double wavelength,
                                 struct FtqkdCurve **out);

/*
 Number of rows; zero for a null handle.
 */
uintptr_t ftqkd_curve_len(const struct FtqkdCurve *curve);

enum FtqkdStatus ftqkd_curve_row(const struct FtqkdCurve *curve,
                                 uintptr_t index,
                                 struct FtqkdCurveRow *out);

void ftqkd_curve_free(struct FtqkdCurve *curve);

/*
 Default configuration of a mode: `"pm"`, `"epr"`, `"epr-source-at-alice"`
 or `"epr-midpoint"`.
 */
enum FtqkdStatus ftqkd_config_default(const char *mode, struct FtqkdConfig **out);

/*
 Parse a JSON configuration; omitted fields take the defaults of its mode.
 */
enum FtqkdStatus ftqkd_config_from_json(const char *json, struct FtqkdConfig **out);

enum FtqkdStatus ftqkd_config_set_pulses(struct FtqkdConfig *cfg, uint64_t pulses);

enum FtqkdStatus ftqkd_config_set_seed(struct FtqkdConfig *cfg, uint64_t seed);

/*
 Full configuration as pretty JSON; release with `ftqkd_string_free`.
 */
enum FtqkdStatus ftqkd_config_to_json(const struct FtqkdConfig *cfg, char **out);

void ftqkd_config_free(struct FtqkdConfig *cfg);

/*
 Run a Monte Carlo session.
 */
enum FtqkdStatus ftqkd_run_session(const struct FtqkdConfig *cfg, struct FtqkdReport **out);

/*
 Pooled QBER of the test sample; `FTQKD_STATUS_EMPTY` when no bits were sifted.
 */
enum FtqkdStatus ftqkd_report_qber(const struct FtqkdReport *report, double *out);

/*
 Gain used for the key rate (coincidences or receiver clicks per pulse).
 */
enum FtqkdStatus ftqkd_report_gain(const struct FtqkdReport *report, double *out);

/*
 Gain-corrected key rate per pulse, clamped at zero.
 */
enum FtqkdStatus ftqkd_report_keyrate(const struct FtqkdReport *report, double *out);

/*
 Full report as pretty JSON; release with `ftqkd_string_free`.
 */
enum FtqkdStatus ftqkd_report_to_json(const struct FtqkdReport *report, char **out);

void ftqkd_report_free(struct FtqkdReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FTQKD_H */
