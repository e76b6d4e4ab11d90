#ifndef SPECPROP_H
#define SPECPROP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Orthogonality conditions on the `𝓛−` even block in 1d.
typedef enum SpecpropConditions {
  SPECPROP_CONDITIONS_NATURAL = 0,
  SPECPROP_CONDITIONS_ALTERNATIVE = 1,
  SPECPROP_CONDITIONS_FMR = 2,
} SpecpropConditions;

// Status code of every call.
typedef enum SpecpropStatus {
  SPECPROP_STATUS_OK = 0,
  SPECPROP_STATUS_NULL_POINTER = 1,
  SPECPROP_STATUS_INVALID_ARGUMENT = 2,
  // An integrator, shooting or iteration failure.
  SPECPROP_STATUS_NUMERICAL_FAILURE = 3,
  // The far boundary condition is not yet satisfied; increase `r_max`.
  SPECPROP_STATUS_DOMAIN_TOO_SMALL = 4,
  // A requested ledger entry, Gram value or index is absent.
  SPECPROP_STATUS_NOT_FOUND = 5,
  SPECPROP_STATUS_INTERNAL = 6,
  SPECPROP_STATUS_PANIC = 7,
} SpecpropStatus;

// Overall outcome of a certification.
typedef enum SpecpropVerdict {
  SPECPROP_VERDICT_HOLDS = 0,
  SPECPROP_VERDICT_INCONCLUSIVE = 1,
  SPECPROP_VERDICT_FAULT = 2,
} SpecpropVerdict;

// Opaque certificate handle.
typedef struct SpecpropCertificate SpecpropCertificate;

// Opaque soliton handle.
typedef struct SpecpropSoliton SpecpropSoliton;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *specprop_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *specprop_version(void);

// Certifies the spectral property. `dimension` is 1 or 3 (3 requires
// `sigma = 1`); non-positive `r_max` or `tol` select the defaults.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SpecpropStatus specprop_certify(uint32_t dimension,
                                     double sigma,
                                     double r_max,
                                     double tol,
                                     enum SpecpropConditions conditions,
                                     struct SpecpropCertificate **out);

// Verdict of a certificate.
//
// # Safety
// `cert` must be a live handle and `out` valid for one write.
enum SpecpropStatus specprop_certificate_verdict(const struct SpecpropCertificate *cert,
                                                 enum SpecpropVerdict *out);

// Ledger value by name, e.g. `"K1^(0)"` or `"J1^(e)"`.
//
// # Safety
// `cert` must be a live handle, `name` NUL-terminated and `out` valid for one write.
enum SpecpropStatus specprop_certificate_ledger_value(const struct SpecpropCertificate *cert,
                                                      const char *name,
                                                      double *out);

// Gram value by name, e.g. `"K^(0)"`, `"J^(e)"` or `"Jhat^(e)"`.
//
// # Safety
// As for [`specprop_certificate_ledger_value`].
enum SpecpropStatus specprop_certificate_gram_value(const struct SpecpropCertificate *cert,
                                                    const char *name,
                                                    double *out);

// Index of a block by operator label, e.g. `"calL+^(0)"`.
//
// # Safety
// As for [`specprop_certificate_ledger_value`].
enum SpecpropStatus specprop_certificate_index(const struct SpecpropCertificate *cert,
                                               const char *operator_,
                                               uint32_t *out);

// Full certificate as JSON. Release with [`specprop_string_free`].
//
// # Safety
// `cert` must be a live handle and `out` valid for one write.
enum SpecpropStatus specprop_certificate_to_json(const struct SpecpropCertificate *cert,
                                                 char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void specprop_string_free(char *s);

// Releases a certificate. Null is ignored.
//
// # Safety
// `cert` must come from [`specprop_certify`] and not have been freed.
void specprop_certificate_free(struct SpecpropCertificate *cert);

// Solves for the ground state. Non-positive `r_max` or `tol` select the defaults.
//
// # Safety
// `out` must be valid for one write.
enum SpecpropStatus specprop_soliton_solve(uint32_t dimension,
                                           double sigma,
                                           double r_max,
                                           double tol,
                                           struct SpecpropSoliton **out);

// `R(r)` and `R'(r)` for `r ≥ 0`; either output pointer may be null.
//
// # Safety
// `sol` must be a live handle; non-null outputs must be valid for one write.
enum SpecpropStatus specprop_soliton_eval(const struct SpecpropSoliton *sol,
                                          double r,
                                          double *value,
                                          double *derivative);

// Substitution residual of an accepted soliton.
//
// # Safety
// `sol` must be a live handle and `out` valid for one write.
enum SpecpropStatus specprop_soliton_residual(const struct SpecpropSoliton *sol, double *out);

// Releases a soliton. Null is ignored.
//
// # Safety
// `sol` must come from [`specprop_soliton_solve`] and not have been freed.
void specprop_soliton_free(struct SpecpropSoliton *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECPROP_H */
