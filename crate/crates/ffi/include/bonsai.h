#ifndef BONSAI_H
#define BONSAI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BonsaiStatus {
  BONSAI_STATUS_OK = 0,
  BONSAI_STATUS_NULL_ARGUMENT = 1,
  BONSAI_STATUS_INVALID_UTF8 = 2,
  BONSAI_STATUS_GRAMMAR = 3,
  BONSAI_STATUS_CONFIG = 4,
  BONSAI_STATUS_TARGET = 5,
  BONSAI_STATUS_RUNTIME = 6,
  BONSAI_STATUS_OUT_OF_RANGE = 7,
  BONSAI_STATUS_PANIC = 8,
} BonsaiStatus;

typedef enum BonsaiMode {
  BONSAI_MODE_RESTRICTED = 0,
  BONSAI_MODE_UNRESTRICTED = 1,
} BonsaiMode;

typedef struct BonsaiCorpus BonsaiCorpus;

typedef struct BonsaiFeedback BonsaiFeedback;

typedef struct BonsaiGrammar BonsaiGrammar;

typedef struct BonsaiTarget BonsaiTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *bonsai_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bonsai_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void bonsai_string_free(char *s);

/**
 * Parses EBNF grammar source.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BonsaiStatus bonsai_grammar_parse(const char *source, struct BonsaiGrammar **out);

/**
 * Loads a bundled grammar: `minilang`, `arith` or `toy`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BonsaiStatus bonsai_grammar_builtin(const char *name, struct BonsaiGrammar **out);

/**
 * # Safety
 * `g` must be null or a live grammar handle, freed once.
 */
void bonsai_grammar_free(struct BonsaiGrammar *g);

/**
 * Samples one input within bounds `(m, n, d)`; free the text with
 * [`bonsai_string_free`].
 *
 * # Safety
 * `g` must be a live grammar handle and `out_text` a valid pointer.
 */
enum BonsaiStatus bonsai_sample(const struct BonsaiGrammar *g,
                                uint32_t m,
                                uint32_t n,
                                uint32_t d,
                                uint64_t seed,
                                char **out_text);

/**
 * Creates a target by name (`minilang`, `arith`, `ext:<command>`). `g` may
 * be null to use the target's bundled grammar; it is copied, not retained.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `g` null or live, `out` valid.
 */
enum BonsaiStatus bonsai_target_new(const char *name,
                                    const struct BonsaiGrammar *g,
                                    struct BonsaiTarget **out);

/**
 * # Safety
 * `t` must be null or a live target handle, freed once.
 */
void bonsai_target_free(struct BonsaiTarget *t);

/**
 * Number of branch identifiers the target can report.
 *
 * # Safety
 * `t` must be a live target handle.
 */
uint32_t bonsai_target_total_branches(const struct BonsaiTarget *t);

/**
 * Runs the target on one input.
 *
 * # Safety
 * `t` must be live, `input` NUL-terminated, `out` valid.
 */
enum BonsaiStatus bonsai_target_execute(const struct BonsaiTarget *t,
                                        const char *input,
                                        struct BonsaiFeedback **out);

/**
 * # Safety
 * `fb` must be a live feedback handle.
 */
bool bonsai_feedback_valid(const struct BonsaiFeedback *fb);

/**
 * # Safety
 * `fb` must be a live feedback handle.
 */
size_t bonsai_feedback_coverage_len(const struct BonsaiFeedback *fb);

/**
 * Copies up to `cap` covered branch identifiers, ascending, into `buf`
 * and returns how many were copied.
 *
 * # Safety
 * `fb` must be live and `buf` must have room for `cap` values.
 */
size_t bonsai_feedback_coverage(const struct BonsaiFeedback *fb, uint32_t *buf, size_t cap);

/**
 * # Safety
 * `fb` must be null or a live feedback handle, freed once.
 */
void bonsai_feedback_free(struct BonsaiFeedback *fb);

/**
 * Runs one coverage-guided bounded fuzzer from a single random seed.
 *
 * # Safety
 * `t` must be live and `out` valid.
 */
enum BonsaiStatus bonsai_fuzz(const struct BonsaiTarget *t,
                              uint32_t m,
                              uint32_t n,
                              uint32_t d,
                              enum BonsaiMode mode,
                              uint64_t budget,
                              uint64_t seed,
                              struct BonsaiCorpus **out);

/**
 * Runs the lattice up to `(m, n, d)` and returns the top node's corpus.
 * On node failure the status is `BONSAI_STATUS_RUNTIME` and `*out` still
 * receives the corpus.
 *
 * # Safety
 * `t` must be live and `out` valid.
 */
enum BonsaiStatus bonsai_run_lattice(const struct BonsaiTarget *t,
                                     uint32_t m,
                                     uint32_t n,
                                     uint32_t d,
                                     bool extended,
                                     uint64_t node_budget,
                                     uint64_t seed,
                                     size_t jobs,
                                     struct BonsaiCorpus **out);

/**
 * # Safety
 * `c` must be a live corpus handle.
 */
size_t bonsai_corpus_len(const struct BonsaiCorpus *c);

/**
 * Target executions the run consumed.
 *
 * # Safety
 * `c` must be a live corpus handle.
 */
uint64_t bonsai_corpus_executions(const struct BonsaiCorpus *c);

/**
 * Copies member `index`'s text; free it with [`bonsai_string_free`].
 *
 * # Safety
 * `c` must be live and `out_text` valid.
 */
enum BonsaiStatus bonsai_corpus_text(const struct BonsaiCorpus *c, size_t index, char **out_text);

/**
 * Writes the corpus as `input_<k>.txt` / `input_<k>.meta.json` into `dir`.
 *
 * # Safety
 * `c` must be live and `dir` NUL-terminated.
 */
enum BonsaiStatus bonsai_corpus_save(const struct BonsaiCorpus *c, const char *dir);

/**
 * # Safety
 * `c` must be null or a live corpus handle, freed once.
 */
void bonsai_corpus_free(struct BonsaiCorpus *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BONSAI_H */
