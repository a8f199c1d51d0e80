/* Public C API of the VMD library: student-teacher-expert variational
 * multimodal distillation on synthetic multimodal data.
 *
 * Every function returns a vmd_status; 0 is success. On failure a
 * thread-local message is available from vmd_last_error(). Strings returned
 * through char** out-parameters are heap-allocated and must be released with
 * vmd_string_free().
 */
#ifndef VMD_VMD_H
#define VMD_VMD_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define VMD_API __declspec(dllexport)
#else
#define VMD_API __attribute__((visibility("default")))
#endif

typedef enum vmd_status {
    VMD_OK = 0,
    VMD_ERR_USAGE = 1,     /* bad arguments, config or call contract */
    VMD_ERR_IO = 2,        /* missing/malformed files, serialization */
    VMD_ERR_NUMERIC = 3,   /* non-finite loss, failed gradient check */
    VMD_ERR_ASSERTION = 4, /* a requested trend assertion did not hold */
    VMD_ERR_INTERNAL = 5
} vmd_status;

VMD_API const char* vmd_version(void);
VMD_API const char* vmd_last_error(void);
VMD_API void vmd_string_free(char* s);

/* Generates a synthetic multimodal dataset (JSON Lines plus a .meta.json
 * sidecar). overrides: "key=value;key=value" over the generator defaults
 * (n_samples, feature_dim, report_dim, signal_dims, mask_noise_dims,
 * class_balance, noise_scale, seed); NULL keeps all defaults. */
VMD_API vmd_status vmd_synth_run(const char* overrides, const char* out_path,
                                 char** summary_json);

/* Trains a model. config_path may be NULL (defaults); overrides use the same
 * key syntax as the config file. Writes manifest.json, trainlog.jsonl and
 * final.ckpt under out_dir. */
VMD_API vmd_status vmd_train_run(const char* config_path, const char* overrides,
                                 const char* data_path, const char* out_dir,
                                 char** summary_json);

/* Scores a trained checkpoint on one split ("train", "val", "test", "all")
 * through one branch ("student" or "teacher"). out_dir is optional; when
 * given, metrics.json and metrics.txt are written there. */
VMD_API vmd_status vmd_eval_run(const char* checkpoint_path, const char* data_path,
                                const char* split, const char* branch, const char* out_dir,
                                char** report_json);

/* Runs the ablation grid (baseline, w/o teacher, w/o expert, VMD; plus the
 * teacher with/without expert rows) across comma-separated seeds. With
 * assert_trends != 0, returns VMD_ERR_ASSERTION unless full VMD beats each
 * single guidance, each beats the baseline by trend, the VMD-baseline ROC gap
 * clears 0.02, and the expert-constrained teacher wins. */
VMD_API vmd_status vmd_ablate_run(const char* config_path, const char* overrides,
                                  const char* data_path, const char* seeds_csv,
                                  int assert_trends, int jobs, const char* out_dir,
                                  char** table_json);

/* Finite-difference checks for every registered differentiable op and the
 * full training objective. op_name restricts the run to one op; returns
 * VMD_ERR_NUMERIC when any error reaches 1e-4. */
VMD_API vmd_status vmd_gradcheck_run(const char* op_name, char** report_json);

/* ---- dataset handle ---- */
typedef struct vmd_dataset_s vmd_dataset;

VMD_API vmd_status vmd_dataset_open(const char* path, vmd_dataset** out);
VMD_API void vmd_dataset_close(vmd_dataset* d);
VMD_API size_t vmd_dataset_count(const vmd_dataset* d);
VMD_API size_t vmd_dataset_feature_dim(const vmd_dataset* d);
VMD_API size_t vmd_dataset_report_dim(const vmd_dataset* d);
/* Returns 0/1, or -1 on a bad index. */
VMD_API int vmd_dataset_label(const vmd_dataset* d, size_t index);
/* Copies the sample's image-like features into out (len must equal
 * feature_dim). */
VMD_API vmd_status vmd_dataset_features(const vmd_dataset* d, size_t index, double* out,
                                        size_t len);

/* ---- model handle ---- */
typedef struct vmd_model_s vmd_model;

VMD_API vmd_status vmd_model_open(const char* checkpoint_path, vmd_model** out);
VMD_API void vmd_model_close(vmd_model* m);
VMD_API size_t vmd_model_feature_dim(const vmd_model* m);
VMD_API size_t vmd_model_latent_dim(const vmd_model* m);
/* Student-only inference on one feature vector (deterministic latent mean);
 * out_probs receives [p(stable), p(vulnerable)]. */
VMD_API vmd_status vmd_model_infer(vmd_model* m, const double* features, size_t len,
                                   double out_probs[2]);

#ifdef __cplusplus
}
#endif

#endif /* VMD_VMD_H */
