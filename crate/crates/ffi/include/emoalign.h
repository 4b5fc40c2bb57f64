#ifndef EMOALIGN_H
#define EMOALIGN_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum EaStatus {
  EA_STATUS_OK = 0,
  EA_STATUS_NULL_ARGUMENT = 1,
  EA_STATUS_INVALID_UTF8 = 2,
  EA_STATUS_PARSE = 3,
  EA_STATUS_VALIDATION = 4,
  EA_STATUS_PRECONDITION = 5,
  EA_STATUS_DEGENERATE = 6,
  EA_STATUS_IO = 7,
  EA_STATUS_TRAINING = 8,
  EA_STATUS_OUT_OF_RANGE = 9,
  EA_STATUS_PANIC = 10,
} EaStatus;

/**
 * Opaque fusion model loaded from a checkpoint.
 */
typedef struct EaModel EaModel;

/**
 * Opaque list of aligned turns.
 */
typedef struct EaTurns EaTurns;

typedef struct EaAlignOptions {
  /**
   * Seconds; must be positive.
   */
  double pause_threshold;
  /**
   * Seconds; zero disables the nearest-segment rescue.
   */
  double rescue_window;
  /**
   * Keep words no segment claims, as turns of `<unattributed>`.
   */
  bool keep_unattributed;
} EaAlignOptions;

/**
 * Borrowed view of one turn. The strings belong to the turn list.
 */
typedef struct EaTurnView {
  double start;
  double end;
  const char *speaker;
  const char *text;
  size_t word_count;
} EaTurnView;

typedef struct EaBreakdown {
  double missed;
  double false_alarm;
  double confusion;
  double total;
  double rate;
} EaBreakdown;

typedef struct EaScores {
  struct EaBreakdown teer;
  struct EaBreakdown steer;
  /**
   * Utterance accuracy (WAR).
   */
  double accuracy;
  double weighted_f1;
  double macro_f1;
  /**
   * Per-class F1 in emotion index order.
   */
  double f1[4];
  size_t samples;
} EaScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *ea_last_error_message(void);

/**
 * Release a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void ea_string_free(char *s);

/**
 * Lower-case name of an emotion index (0 happy, 1 sad, 2 angry, 3 neutral),
 * or NULL when out of range. The string is static.
 */
const char *ea_emotion_name(uint32_t index);

struct EaAlignOptions ea_align_options_default(void);

/**
 * Align a words document (JSON) with RTTM text. `options` may be NULL for
 * the defaults. On success `*out` owns a new turn list.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum EaStatus ea_align(const char *words_json,
                       const char *rttm,
                       const struct EaAlignOptions *options,
                       struct EaTurns **out);

/**
 * Number of turns; 0 for NULL.
 *
 * # Safety
 * `turns` must be NULL or a live handle.
 */
size_t ea_turns_len(const struct EaTurns *turns);

/**
 * # Safety
 * `turns` must be a live handle and `out` writable.
 */
enum EaStatus ea_turns_get(const struct EaTurns *turns, size_t index, struct EaTurnView *out);

/**
 * Serialize as a turn document. Free the result with [`ea_string_free`].
 *
 * # Safety
 * `turns` must be a live handle and `out` writable.
 */
enum EaStatus ea_turns_to_json(const struct EaTurns *turns, char **out);

/**
 * # Safety
 * `turns` must be NULL or a handle from [`ea_align`] not yet freed.
 */
void ea_turns_free(struct EaTurns *turns);

/**
 * Score a hypothesis document against a reference document.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum EaStatus ea_score(const char *reference_json,
                       const char *hypothesis_json,
                       struct EaScores *out);

/**
 * Load a checkpoint document.
 *
 * # Safety
 * `checkpoint_json` must be NUL-terminated; `out` must be writable.
 */
enum EaStatus ea_model_load(const char *checkpoint_json, struct EaModel **out);

/**
 * Embedding dimension of the model; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t ea_model_dim(const struct EaModel *model);

/**
 * Classify one utterance. `text` and `audio` are row-major
 * `rows x ea_model_dim(model)` arrays. Writes four class probabilities and
 * the arg-max emotion index.
 *
 * # Safety
 * `model` must be live; the arrays must hold `rows * dim` doubles;
 * `probabilities` must have room for 4 doubles; `label` may be NULL.
 */
enum EaStatus ea_model_forward(const struct EaModel *model,
                               const double *text,
                               size_t text_rows,
                               const double *audio,
                               size_t audio_rows,
                               double *probabilities,
                               uint32_t *label);

/**
 * # Safety
 * `model` must be NULL or a handle from [`ea_model_load`] not yet freed.
 */
void ea_model_free(struct EaModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOALIGN_H */
