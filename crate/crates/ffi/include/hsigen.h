#ifndef HSIGEN_H
#define HSIGEN_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsigenStatus {
  HSIGEN_STATUS_OK = 0,
  HSIGEN_STATUS_NULL_POINTER = 1,
  HSIGEN_STATUS_INVALID_UTF8 = 2,
  HSIGEN_STATUS_PARSE = 3,
  HSIGEN_STATUS_MATCH = 4,
  HSIGEN_STATUS_GENERATE = 5,
  HSIGEN_STATUS_OPTIMIZE = 6,
  HSIGEN_STATUS_SCENE = 7,
  HSIGEN_STATUS_IO = 8,
  HSIGEN_STATUS_CONFIG = 9,
  HSIGEN_STATUS_METRIC = 10,
  HSIGEN_STATUS_OUT_OF_RANGE = 11,
  HSIGEN_STATUS_PANIC = 12,
} HsigenStatus;

/**
 * A generator network with its weights.
 */
typedef struct HsigenGenerator HsigenGenerator;

/**
 * One placed person.
 */
typedef struct HsigenInteraction HsigenInteraction;

/**
 * The people of a multi-person run, accepted or not.
 */
typedef struct HsigenMhsi HsigenMhsi;

/**
 * A validated scene.
 */
typedef struct HsigenScene HsigenScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hsigen_last_error(char *buf, size_t len);

/**
 * Builds a scene from a scene document.
 *
 * # Safety
 * `document` must be a NUL-terminated string; `scene` must be writable.
 */
enum HsigenStatus hsigen_scene_new(const char *document, struct HsigenScene **scene);

/**
 * # Safety
 * `scene` must be null or come from [`hsigen_scene_new`].
 */
void hsigen_scene_free(struct HsigenScene *scene);

/**
 * Creates an untrained generator: the default size, or the small test
 * size when `tiny` is true.
 *
 * # Safety
 * `generator` must be writable.
 */
enum HsigenStatus hsigen_generator_new(uint64_t seed,
                                       bool tiny,
                                       struct HsigenGenerator **generator);

/**
 * Loads a generator checkpoint written by `hsigen train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `generator` must be writable.
 */
enum HsigenStatus hsigen_generator_load(const char *path, struct HsigenGenerator **generator);

/**
 * # Safety
 * `generator` must be null or come from this library.
 */
void hsigen_generator_free(struct HsigenGenerator *generator);

/**
 * Number of people described by `description`.
 *
 * # Safety
 * `description` must be a NUL-terminated string; `count` must be writable.
 */
enum HsigenStatus hsigen_count_people(const char *description, size_t *count);

/**
 * Generates and refines one person with the default pipeline settings.
 *
 * # Safety
 * Handles must be valid; `description` must be a NUL-terminated string;
 * `interaction` must be writable.
 */
enum HsigenStatus hsigen_generate(const struct HsigenGenerator *generator,
                                  const struct HsigenScene *scene,
                                  const char *description,
                                  uint64_t seed,
                                  struct HsigenInteraction **interaction);

/**
 * # Safety
 * `interaction` must be null or come from this library.
 */
void hsigen_interaction_free(struct HsigenInteraction *interaction);

/**
 * Whether the person passed the loss threshold and relation checks.
 *
 * # Safety
 * `interaction` must be valid and `accepted` writable.
 */
enum HsigenStatus hsigen_interaction_accepted(const struct HsigenInteraction *interaction,
                                              bool *accepted);

/**
 * Weighted total loss after refinement.
 *
 * # Safety
 * `interaction` must be valid and `total` writable.
 */
enum HsigenStatus hsigen_interaction_total_loss(const struct HsigenInteraction *interaction,
                                                double *total);

/**
 * Copies the body vertices as xyz triples into `xyz`, which holds `len`
 * doubles. `count` receives the vertex count; pass a null `xyz` to query it.
 *
 * # Safety
 * `xyz` must be null or point to `len` writable doubles; `count` writable.
 */
enum HsigenStatus hsigen_interaction_vertices(const struct HsigenInteraction *interaction,
                                              double *xyz,
                                              size_t len,
                                              size_t *count);

/**
 * Contact and non-collision scores of the refined body in `scene`.
 *
 * # Safety
 * Handles must be valid; outputs writable.
 */
enum HsigenStatus hsigen_interaction_scores(const struct HsigenInteraction *interaction,
                                            const struct HsigenScene *scene,
                                            double contact_eps,
                                            double *contact,
                                            double *non_collision);

/**
 * Writes the body as a Wavefront OBJ file.
 *
 * # Safety
 * `interaction` must be valid; `path` a NUL-terminated string.
 */
enum HsigenStatus hsigen_interaction_write_obj(const struct HsigenInteraction *interaction,
                                               const char *path);

/**
 * Writes the interaction record (binding, losses, flags, parameters) as JSON.
 *
 * # Safety
 * `interaction` must be valid; `path` a NUL-terminated string.
 */
enum HsigenStatus hsigen_interaction_write_json(const struct HsigenInteraction *interaction,
                                                const char *path);

/**
 * Places every person of `description` in turn. People that fail before
 * a body exists are left out; see the log for their errors.
 *
 * # Safety
 * Handles must be valid; `description` a NUL-terminated string; `mhsi` writable.
 */
enum HsigenStatus hsigen_mhsi(const struct HsigenGenerator *generator,
                              const struct HsigenScene *scene,
                              const char *description,
                              uint64_t seed,
                              struct HsigenMhsi **mhsi);

/**
 * Number of placed people.
 *
 * # Safety
 * `mhsi` must be valid and `count` writable.
 */
enum HsigenStatus hsigen_mhsi_len(const struct HsigenMhsi *mhsi, size_t *count);

/**
 * Copies the `index`-th person into a new interaction handle, to be
 * released with [`hsigen_interaction_free`].
 *
 * # Safety
 * `mhsi` must be valid and `interaction` writable.
 */
enum HsigenStatus hsigen_mhsi_get(const struct HsigenMhsi *mhsi,
                                  size_t index,
                                  struct HsigenInteraction **interaction);

/**
 * # Safety
 * `mhsi` must be null or come from [`hsigen_mhsi`].
 */
void hsigen_mhsi_free(struct HsigenMhsi *mhsi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSIGEN_H */
