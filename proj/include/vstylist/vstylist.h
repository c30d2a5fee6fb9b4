#ifndef VSTYLIST_H
#define VSTYLIST_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define VS_API __attribute__((visibility("default")))
#else
#define VS_API
#endif

typedef enum vs_status {
  VS_OK = 0,
  VS_ERR_INVALID = 1,   /* bad argument, configuration or input data */
  VS_ERR_IO = 2,
  VS_ERR_PARSE = 3,
  VS_ERR_TRANSPORT = 4, /* backend unreachable */
  VS_ERR_PROTOCOL = 5,  /* backend answered with an error or malformed body */
  VS_ERR_CHECKSUM = 6,  /* corrupted job checkpoint */
  VS_ERR_SEARCH = 7,
  VS_ERR_STAGE = 8,     /* a pipeline stage failed; details in the result JSON */
  VS_ERR_INTERNAL = 9
} vs_status;

/* Message for the last failing call on this thread. Never NULL. */
VS_API const char* vs_last_error(void);
VS_API const char* vs_version(void);
VS_API const char* vs_status_name(vs_status status);

/* Every char** out-parameter is heap-allocated and released with this. */
VS_API void vs_string_free(char* s);

typedef void (*vs_progress_fn)(const char* line, void* user);

typedef struct vs_config vs_config;

/* Defaults, then `path` (may be NULL), then VSTYLIST_* environment variables,
 * then `overrides` given as dotted "key=value" strings. */
VS_API vs_status vs_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                                vs_config** out);
VS_API vs_status vs_config_to_json(const vs_config* config, char** json_out);
VS_API void vs_config_free(vs_config* config);

/* Result JSON: {"job_dir", "stage", "complete", "failed"?, "report"?}. */
VS_API vs_status vs_stylize(const vs_config* config, const char* video, const char* query, const char* out_dir,
                            vs_progress_fn progress, void* user, char** result_json);
VS_API vs_status vs_resume(const char* job_dir, vs_progress_fn progress, void* user, char** result_json);

/* {"valid", "violations", "classes", "styles", "models", "depth"}; invalid
 * trees return VS_OK with "valid": false. */
VS_API vs_status vs_tree_validate(const char* tree_path, int strict, char** result_json);
VS_API vs_status vs_tree_list(const char* tree_path, char** result_json);
/* Identifies the style in `query` and searches the configured tree. */
VS_API vs_status vs_tree_search(const vs_config* config, const char* query, char** decision_json);

/* `style_words` and `shots_path` may be NULL: style words then come from a
 * style_decision.json beside the prompts file and shots are detected on the
 * source. */
VS_API vs_status vs_eval(const vs_config* config, const char* source_dir, const char* stylized_dir,
                         const char* prompts_path, const char* style_words, const char* shots_path,
                         char** report_json);
/* Aggregates eight precomputed metric values given as a JSON object. */
VS_API vs_status vs_eval_values(const char* values_json, char** report_json);

VS_API vs_status vs_fixtures_synth(int scenes, int frames_per_scene, int width, int height, double fps,
                                   uint64_t seed, const char* out_dir, char** result_json);

typedef struct vs_mock_server vs_mock_server;

/* `scenario_path` may be NULL for default mock behavior; port 0 picks one. */
VS_API vs_status vs_mock_server_start(const char* scenario_path, const char* host, int port,
                                      vs_mock_server** out);
VS_API int vs_mock_server_port(const vs_mock_server* server);
VS_API vs_status vs_mock_server_wait(vs_mock_server* server);
VS_API void vs_mock_server_stop(vs_mock_server* server);
VS_API void vs_mock_server_free(vs_mock_server* server);

#ifdef __cplusplus
}
#endif

#endif
