#ifndef SPECMAT_H
#define SPECMAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Number of material classes; score buffers hold this many values.
 */
#define SPECMAT_CLASS_COUNT 5

typedef enum SpecmatSensor {
  SPECMAT_SENSOR_VISIBLE = 0,
  SPECMAT_SENSOR_NIR = 1,
} SpecmatSensor;

typedef enum SpecmatStatus {
  SPECMAT_STATUS_OK = 0,
  SPECMAT_STATUS_NULL_POINTER = 1,
  SPECMAT_STATUS_INVALID_ARGUMENT = 2,
  SPECMAT_STATUS_IO = 3,
  SPECMAT_STATUS_MALFORMED = 4,
  SPECMAT_STATUS_DIMENSION_MISMATCH = 5,
  SPECMAT_STATUS_INVALID_DATA = 6,
  SPECMAT_STATUS_BUFFER_TOO_SMALL = 7,
  SPECMAT_STATUS_PANIC = 8,
} SpecmatStatus;

typedef enum SpecmatClassifier {
  SPECMAT_CLASSIFIER_MLP = 0,
  SPECMAT_CLASSIFIER_SVM = 1,
} SpecmatClassifier;

/*
 A loaded or generated corpus.
 */
typedef struct SpecmatCorpus SpecmatCorpus;

/*
 A trained classifier of either kind.
 */
typedef struct SpecmatModel SpecmatModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null if there was none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *specmat_last_error(void);

/*
 Lower-case material name for a class code, or null for codes above 4.
 The string is static.
 */
const char *specmat_material_name(uint32_t code);

/*
 Expected sample length for a sensor.
 */
size_t specmat_sensor_dim(enum SpecmatSensor sensor);

/*
 Loads a corpus directory (or one of its CSV files).

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum SpecmatStatus specmat_corpus_load(const char *path, struct SpecmatCorpus **out);

/*
 Generates a synthetic corpus with the default signal scales.

 # Safety
 `out` must be a valid pointer.
 */
enum SpecmatStatus specmat_corpus_synth(size_t objects_per_material,
                                        size_t samples_per_object,
                                        uint64_t seed,
                                        struct SpecmatCorpus **out);

/*
 Releases a corpus. Null is ignored.

 # Safety
 `corpus` must come from this library and not be used afterwards.
 */
void specmat_corpus_free(struct SpecmatCorpus *corpus);

/*
 Number of objects in the corpus.

 # Safety
 `corpus` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_corpus_object_count(const struct SpecmatCorpus *corpus, size_t *out);

/*
 Number of samples recorded with `sensor`.

 # Safety
 `corpus` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_corpus_sample_count(const struct SpecmatCorpus *corpus,
                                               enum SpecmatSensor sensor,
                                               size_t *out);

/*
 Material code (0-4) of the `index`-th `sensor` sample in canonical order.

 # Safety
 `corpus` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_corpus_sample_label(const struct SpecmatCorpus *corpus,
                                               enum SpecmatSensor sensor,
                                               size_t index,
                                               uint32_t *out);

/*
 Writes the feature vector of the `index`-th `sensor` sample into `out`,
 which must hold at least `specmat_sensor_dim(sensor)` values.

 # Safety
 `corpus` must be valid and `out` must point to `out_len` writable doubles.
 */
enum SpecmatStatus specmat_corpus_features(const struct SpecmatCorpus *corpus,
                                           enum SpecmatSensor sensor,
                                           size_t index,
                                           uint32_t filter_order,
                                           double filter_cutoff,
                                           double *out,
                                           size_t out_len);

/*
 Preprocesses one raw reading. `len` must equal the sensor's dimension;
 `out` receives `len` values.

 # Safety
 `wavelengths` and `intensities` must point to `len` readable doubles and
 `out` to `out_len` writable doubles.
 */
enum SpecmatStatus specmat_preprocess(enum SpecmatSensor sensor,
                                      const double *wavelengths,
                                      const double *intensities,
                                      size_t len,
                                      uint32_t filter_order,
                                      double filter_cutoff,
                                      double *out,
                                      size_t out_len);

/*
 Trains a classifier with default hyperparameters on every `sensor`
 sample of the corpus. `epochs` of 0 keeps the default.

 # Safety
 `corpus` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_model_train(const struct SpecmatCorpus *corpus,
                                       enum SpecmatSensor sensor,
                                       enum SpecmatClassifier classifier,
                                       size_t epochs,
                                       uint64_t seed,
                                       struct SpecmatModel **out);

/*
 Reads a model from its JSON form (either kind).

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum SpecmatStatus specmat_model_from_json(const char *json, struct SpecmatModel **out);

/*
 Serialises a model to JSON. Release the string with
 [`specmat_string_free`].

 # Safety
 `model` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_model_to_json(const struct SpecmatModel *model, char **out);

/*
 Input length the model expects.

 # Safety
 `model` and `out` must be valid pointers.
 */
enum SpecmatStatus specmat_model_input_dim(const struct SpecmatModel *model, size_t *out);

/*
 Classifies one feature vector. `class_out` receives the material code;
 `scores_out`, if not null, receives `SPECMAT_CLASS_COUNT` per-class
 scores (probabilities for the network, decision values for the SVM).

 # Safety
 `features` must point to `len` readable doubles, `class_out` must be
 valid, and `scores_out` must be null or point to 5 writable doubles.
 */
enum SpecmatStatus specmat_model_predict(const struct SpecmatModel *model,
                                         const double *features,
                                         size_t len,
                                         uint32_t *class_out,
                                         double *scores_out);

/*
 Releases a model. Null is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void specmat_model_free(struct SpecmatModel *model);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void specmat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECMAT_H */
