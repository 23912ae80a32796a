#pragma once

/* C interface to the planar tolerance toolkit.
 *
 * Handles are opaque. Every call returns a tk_status; on failure the message is
 * available from tk_last_error() on the same thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * tk_string_free(). Options are JSON objects (NULL or "" for defaults); unknown
 * keys are rejected with TK_ERR_ARGUMENT. */

#include <stddef.h>

#if defined(_WIN32)
#if defined(TOLKIT_BUILDING)
#define TK_API __declspec(dllexport)
#else
#define TK_API __declspec(dllimport)
#endif
#else
#define TK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tk_system tk_system;
typedef struct tk_map tk_map;

typedef enum tk_status {
    TK_OK = 0,
    TK_ERR_ARGUMENT = 1,
    TK_ERR_PARSE = 2,
    TK_ERR_PRECONDITION = 3,
    TK_ERR_DOMAIN = 4,
    TK_ERR_NUMERIC = 5,
    TK_ERR_IO = 6,
    TK_ERR_INTERNAL = 7
} tk_status;

typedef enum tk_outcome { TK_TOLERANCE = 0, TK_NO_TOLERANCE = 1, TK_INCONCLUSIVE = 2 } tk_outcome;

TK_API const char* tk_version(void);
TK_API const char* tk_status_name(tk_status status);
TK_API const char* tk_last_error(void);
TK_API void tk_string_free(char* s);

/* Systems. Integration keys shared by several calls:
 * horizon, rel_tol, abs_tol, eps_ball, max_step, max_steps. */
TK_API tk_status tk_system_builtin(const char* name, tk_system** out);
TK_API tk_status tk_system_parse(const char* definition, tk_system** out);
TK_API tk_status tk_system_load(const char* path, tk_system** out);
/* Row-major ((a[0], a[1]), (a[2], a[3])). */
TK_API tk_status tk_system_linear(const char* name, const double a[4], tk_system** out);
TK_API void tk_system_free(tk_system* sys);
TK_API tk_status tk_system_field(const tk_system* sys, double x, double y, double out[2]);
/* Comma-separated builtin names. */
TK_API tk_status tk_builtin_names(char** out);

/* Description, node report and fixed points. Keys: box [xmin,xmax,ymin,ymax], grid. */
TK_API tk_status tk_check(const tk_system* sys, const char* options_json, char** out_json);

/* Keys: integration keys, backward, to_axis. out_csv may be NULL. */
TK_API tk_status tk_simulate(const tk_system* sys, const double p0[2], const char* options_json, char** out_json,
                             char** out_csv);

/* Keys: integration keys, eps_tol, tie_tolerance, linear_radius, group_property,
 * robustness_samples, robustness_radius, seed. */
TK_API tk_status tk_verdict(const tk_system* sys, const double r0[2], const double p0[2], const char* options_json,
                            tk_outcome* outcome, char** out_json);

/* Excitability report, T and T-hat; p0 may be NULL. Keys: integration keys. */
TK_API tk_status tk_regions(const tk_system* sys, const double r0[2], const double* p0, const char* options_json,
                            char** out_json);

/* Closed-form analysis of x' = A x; p0 may be NULL. */
TK_API tk_status tk_linear(const double a[4], const double r0[2], const double* p0, char** out_json);

/* Keys: integration keys, x_f. */
TK_API tk_status tk_estimate(const tk_system* sys, const double r0[2], const double p0[2], const char* options_json,
                             char** out_json);

/* box = [xmin, xmax, ymin, ymax]. Keys: integration keys, eps_tol, tie_tolerance,
 * linear_radius, predict, threads. */
TK_API tk_status tk_scan(const tk_system* sys, const double r0[2], const double box[4], int nx, int ny,
                         const char* options_json, tk_map** out);
TK_API void tk_map_free(tk_map* map);
TK_API tk_status tk_map_json(const tk_map* map, char** out);
TK_API tk_status tk_map_csv(const tk_map* map, char** out);
/* Keys: width, height, title. */
TK_API tk_status tk_map_svg(const tk_map* map, const char* style_json, char** out);
TK_API tk_status tk_map_violations(const tk_map* map, size_t* count);

/* Keys: integration keys, threads, width, height, title. out_svg may be NULL. */
TK_API tk_status tk_basin(const tk_system* sys, const double fp[2], const double box[4], int nx, int ny,
                          const char* options_json, char** out_json, char** out_svg);

/* Writes n points rho(s_k) + offset into out_xy (2n doubles). r0 may be NULL. */
TK_API tk_status tk_preconditioning(const tk_system* sys, const double rho0[2], const double offset[2],
                                    const double* s, size_t n, const double* r0, const char* options_json,
                                    double* out_xy);

/* Phase portrait. Keys: box, isoclines [levels], nullclines, inhibition, grid,
 * trajectories [[x,y],...], t_max, t_clip, markers [{label,x,y}], width, height,
 * title, integration keys. t_clip truncates drawn trajectories (for frames). */
TK_API tk_status tk_render_portrait(const tk_system* sys, const char* spec_json, char** out_svg);

/* T, T-hat and the reference orbit. Keys: box, width, height, title, integration keys. */
TK_API tk_status tk_render_regions(const tk_system* sys, const double r0[2], const char* options_json,
                                   char** out_svg);

#ifdef __cplusplus
}
#endif
