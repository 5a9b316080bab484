#ifndef VCDET_H
#define VCDET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a vcdet call. Anything other than `Ok` leaves a description in
 * `vcdet_last_error_message`.
 */
typedef enum VcdetStatus {
  VcdetStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  VcdetStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  VcdetStatus_InvalidUtf8 = 2,
  /**
   * File could not be read or written.
   */
  VcdetStatus_Io = 3,
  /**
   * File contents violated a format or an invariant.
   */
  VcdetStatus_Format = 4,
  /**
   * A configuration value was rejected.
   */
  VcdetStatus_InvalidConfig = 5,
  /**
   * A pipeline stage failed.
   */
  VcdetStatus_Pipeline = 6,
  /**
   * Evaluation rejected its inputs.
   */
  VcdetStatus_Eval = 7,
  /**
   * An index was out of bounds.
   */
  VcdetStatus_OutOfRange = 8,
  /**
   * Internal panic; state may be inconsistent.
   */
  VcdetStatus_Panic = 9,
} VcdetStatus;

/**
 * Corpus role tag used when loading VDSC files.
 */
typedef enum VcdetRole {
  VcdetRole_Query = 0,
  VcdetRole_Reference = 1,
  VcdetRole_Noise = 2,
} VcdetRole;

/**
 * Video-pair score aggregation for the exhaustive search.
 */
typedef enum VcdetAggregation {
  VcdetAggregation_MaxPair = 0,
  VcdetAggregation_SumTopkPairs = 1,
} VcdetAggregation;

/**
 * Segment score reported by the temporal alignment.
 */
typedef enum VcdetScoreMode {
  VcdetScoreMode_PathSum = 0,
  VcdetScoreMode_PathMean = 1,
} VcdetScoreMode;

/**
 * Ranked retrieval candidates.
 */
typedef struct VcdetCandidates VcdetCandidates;

/**
 * Loaded descriptor corpus.
 */
typedef struct VcdetCorpus VcdetCorpus;

/**
 * Localized copied segments.
 */
typedef struct VcdetMatches VcdetMatches;

/**
 * Descriptor-track configuration. `tc_window` must be odd; the window
 * weights default to the triangular profile for that window. A
 * `tc_output_dim` of zero keeps the input descriptor dimension.
 */
typedef struct VcdetDescriptorOptions {
  bool multi_view;
  bool consistency_weight;
  bool weight_references;
  bool temporal_concat;
  bool weight_before_concat;
  bool score_norm;
  uint32_t tc_window;
  uint32_t tc_output_dim;
  uint32_t rank_k;
  double beta;
  uint32_t top_k;
  enum VcdetAggregation aggregation;
  uint32_t agg_k;
} VcdetDescriptorOptions;

/**
 * Temporal-network alignment configuration.
 */
typedef struct VcdetTnOptions {
  float sim_threshold;
  uint32_t max_step;
  uint32_t min_nodes;
  uint32_t max_segments;
  double min_path_score;
  enum VcdetScoreMode score_mode;
} VcdetTnOptions;

/**
 * Synthetic dataset configuration for `vcdet_generate`.
 */
typedef struct VcdetSimOptions {
  uint64_t seed;
  uint32_t refs;
  uint32_t queries;
  uint32_t dim;
  uint32_t frames_min;
  uint32_t frames_max;
  double copy_fraction;
  double noise_sigma;
  /**
   * Nonzero: unedited queries shadow reference content (near duplicates).
   */
  bool near_duplicate_distractors;
  double stack_fraction;
} VcdetSimOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the most recent failure on this thread. Valid until the
 * next failing vcdet call on the same thread.
 */
const char *vcdet_last_error_message(void);

/**
 * Load a VDSC corpus from `path` under the given role.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid location for a
 * handle pointer. The returned handle must be freed with
 * `vcdet_corpus_free`.
 */
enum VcdetStatus vcdet_corpus_read(const char *path, enum VcdetRole role, struct VcdetCorpus **out);

/**
 * Write a corpus back out in the VDSC format.
 *
 * # Safety
 * `corpus` must be a live handle from this library; `path` must be a
 * NUL-terminated string.
 */
enum VcdetStatus vcdet_corpus_write(const struct VcdetCorpus *corpus, const char *path);

/**
 * # Safety
 * `corpus` must be a handle from this library, not yet freed; null is a
 * no-op.
 */
void vcdet_corpus_free(struct VcdetCorpus *corpus);

/**
 * Number of videos in the corpus; 0 for null.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
uintptr_t vcdet_corpus_video_count(const struct VcdetCorpus *corpus);

/**
 * Shared descriptor dimension; -1 for null or empty corpora.
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
int32_t vcdet_corpus_dim(const struct VcdetCorpus *corpus);

/**
 * Defaults mirroring the CLI: search keeps the top 1200 candidates by
 * max-pair aggregation, temporal concat uses a 3-frame triangular window,
 * score normalization subtracts the 10th noise neighbor at strength 1.
 */
struct VcdetDescriptorOptions vcdet_descriptor_options_default(void);

/**
 * Run the descriptor track. `views` and `labels_csv_path` may be null when
 * multi-view is off (or to fall back to full frames and stub labels).
 * On success `out_candidates` receives the ranked candidates and, when
 * non-null, `out_queries`/`out_refs` receive the post-processed corpora.
 *
 * # Safety
 * Handles must be live; paths NUL-terminated; out pointers valid. Returned
 * handles must be freed with their respective free functions.
 */
enum VcdetStatus vcdet_descriptor_run(const struct VcdetCorpus *queries,
                                      const struct VcdetCorpus *views,
                                      const char *labels_csv_path,
                                      const struct VcdetCorpus *refs,
                                      const struct VcdetCorpus *noise,
                                      struct VcdetDescriptorOptions opts,
                                      struct VcdetCandidates **out_candidates,
                                      struct VcdetCorpus **out_queries,
                                      struct VcdetCorpus **out_refs);

/**
 * # Safety
 * `candidates` must be a handle from this library, not yet freed; null is
 * a no-op.
 */
void vcdet_candidates_free(struct VcdetCandidates *candidates);

/**
 * # Safety
 * `candidates` must be null or a live handle.
 */
uintptr_t vcdet_candidates_len(const struct VcdetCandidates *candidates);

/**
 * Query id of candidate `index`; null when out of range. The pointer stays
 * valid until the handle is freed.
 *
 * # Safety
 * `candidates` must be null or a live handle.
 */
const char *vcdet_candidates_query_id(const struct VcdetCandidates *candidates, uintptr_t index);

/**
 * Reference id of candidate `index`; null when out of range.
 *
 * # Safety
 * `candidates` must be null or a live handle.
 */
const char *vcdet_candidates_ref_id(const struct VcdetCandidates *candidates, uintptr_t index);

/**
 * Score of candidate `index`; NaN when out of range.
 *
 * # Safety
 * `candidates` must be null or a live handle.
 */
double vcdet_candidates_score(const struct VcdetCandidates *candidates, uintptr_t index);

/**
 * Write candidates as the `query_id,ref_id,score` CSV.
 *
 * # Safety
 * `candidates` must be a live handle; `path` NUL-terminated.
 */
enum VcdetStatus vcdet_candidates_write_csv(const struct VcdetCandidates *candidates,
                                            const char *path);

/**
 * Load candidates from a `query_id,ref_id,score` CSV.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid location. Free the handle
 * with `vcdet_candidates_free`.
 */
enum VcdetStatus vcdet_candidates_read_csv(const char *path, struct VcdetCandidates **out);

/**
 * Defaults mirroring the CLI alignment flags.
 */
struct VcdetTnOptions vcdet_tn_options_default(void);

/**
 * Localize copied segments for every candidate pair. `queries` and `refs`
 * must be the post-processed corpora from `vcdet_descriptor_run`.
 *
 * # Safety
 * Handles must be live; `out` a valid location. Free the result with
 * `vcdet_matches_free`.
 */
enum VcdetStatus vcdet_match_run(const struct VcdetCandidates *candidates,
                                 const struct VcdetCorpus *queries,
                                 const struct VcdetCorpus *refs,
                                 struct VcdetTnOptions opts,
                                 struct VcdetMatches **out);

/**
 * # Safety
 * `matches` must be a handle from this library, not yet freed; null is a
 * no-op.
 */
void vcdet_matches_free(struct VcdetMatches *matches);

/**
 * # Safety
 * `matches` must be null or a live handle.
 */
uintptr_t vcdet_matches_len(const struct VcdetMatches *matches);

/**
 * Query id of match `index`; null when out of range.
 *
 * # Safety
 * `matches` must be null or a live handle.
 */
const char *vcdet_matches_query_id(const struct VcdetMatches *matches, uintptr_t index);

/**
 * Reference id of match `index`; null when out of range.
 *
 * # Safety
 * `matches` must be null or a live handle.
 */
const char *vcdet_matches_ref_id(const struct VcdetMatches *matches, uintptr_t index);

/**
 * Interval of match `index` in seconds. Out pointers may be null to skip a
 * field.
 *
 * # Safety
 * `matches` must be a live handle; non-null out pointers must be writable.
 */
enum VcdetStatus vcdet_matches_interval(const struct VcdetMatches *matches,
                                        uintptr_t index,
                                        float *q_start,
                                        float *q_end,
                                        float *r_start,
                                        float *r_end);

/**
 * Score of match `index`; NaN when out of range.
 *
 * # Safety
 * `matches` must be null or a live handle.
 */
double vcdet_matches_score(const struct VcdetMatches *matches, uintptr_t index);

/**
 * Write matches as the seven-column matches CSV.
 *
 * # Safety
 * `matches` must be a live handle; `path` NUL-terminated.
 */
enum VcdetStatus vcdet_matches_write_csv(const struct VcdetMatches *matches, const char *path);

/**
 * Descriptor-track micro average precision of `candidates` against the
 * ground-truth CSV at `gt_csv_path`.
 *
 * # Safety
 * `candidates` must be a live handle; `gt_csv_path` NUL-terminated; `out`
 * writable.
 */
enum VcdetStatus vcdet_descriptor_muap(const struct VcdetCandidates *candidates,
                                       const char *gt_csv_path,
                                       double *out);

/**
 * Matching-track micro average precision of `matches` against the
 * ground-truth CSV at `gt_csv_path`.
 *
 * # Safety
 * `matches` must be a live handle; `gt_csv_path` NUL-terminated; `out`
 * writable.
 */
enum VcdetStatus vcdet_matching_muap(const struct VcdetMatches *matches,
                                     const char *gt_csv_path,
                                     double *out);

/**
 * Defaults mirroring the CLI `gen` flags.
 */
struct VcdetSimOptions vcdet_sim_options_default(void);

/**
 * Generate a synthetic dataset into `out_dir`: VDSC corpora, ground-truth
 * and edit-label CSVs, and a run manifest, exactly like `vcdet gen`.
 *
 * # Safety
 * `out_dir` must be a NUL-terminated string.
 */
enum VcdetStatus vcdet_generate(struct VcdetSimOptions opts, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCDET_H */
