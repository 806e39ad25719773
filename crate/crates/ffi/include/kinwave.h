#ifndef KINWAVE_H
#define KINWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KwStatus {
  KW_STATUS_OK = 0,
  KW_STATUS_NULL_POINTER = 1,
  KW_STATUS_DOMAIN = 2,
  KW_STATUS_MODEL = 3,
  KW_STATUS_STATE = 4,
  KW_STATUS_CONFIG = 5,
  KW_STATUS_LOGIC = 6,
  KW_STATUS_IO = 7,
  KW_STATUS_PANIC = 8,
} KwStatus;

/**
 * Opaque fundamental diagram.
 */
typedef struct KwDiagram KwDiagram;

/**
 * Opaque simulation grid.
 */
typedef struct KwGrid KwGrid;

/**
 * Opaque parsed scenario file.
 */
typedef struct KwScenario KwScenario;

/**
 * Demand and supply in veh/s.
 */
typedef struct KwState {
  double demand;
  double supply;
} KwState;

/**
 * `kind`: 0 none, 1 shock, 2 rarefaction. `direction`: -1 backward,
 * 0 stationary, 1 forward. Speeds in km/s.
 */
typedef struct KwWave {
  int32_t kind;
  int32_t direction;
  double speed_min;
  double speed_max;
} KwWave;

typedef struct KwRiemannSolution {
  double boundary_flux;
  struct KwState stat_up;
  struct KwState stat_down;
  struct KwWave wave_up;
  struct KwWave wave_down;
} KwRiemannSolution;

/**
 * `scenario` is one of 'a'..'d'; `l2` is NaN when the profile has no
 * stationary shock.
 */
typedef struct KwRingPrediction {
  char scenario;
  double q;
  double l2;
  double threshold_a;
  double threshold_c;
} KwRingPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *kw_last_error_message(void);

/**
 * Static, NUL-terminated version string.
 */
const char *kw_version(void);

/**
 * Greenshields diagram. Speeds in km/s, densities in veh/km.
 */
enum KwStatus kw_diagram_greenshields(double v_free, double rho_jam, struct KwDiagram **out);

enum KwStatus kw_diagram_triangular(double v_free,
                                    double v_cong,
                                    double rho_jam,
                                    struct KwDiagram **out);

enum KwStatus kw_diagram_trapezoidal(double v_free,
                                     double v_cong,
                                     double rho_jam,
                                     double q_max,
                                     struct KwDiagram **out);

/**
 * `tau` in s, `unit_length` in km.
 */
enum KwStatus kw_diagram_kerner_konhauser(double lanes,
                                          double rho_jam_lane,
                                          double tau,
                                          double unit_length,
                                          struct KwDiagram **out);

/**
 * Releases a diagram. NULL is ignored.
 */
void kw_diagram_free(struct KwDiagram *d);

/**
 * Capacity (veh/s), critical density and jam density (veh/km).
 */
enum KwStatus kw_diagram_info(const struct KwDiagram *d,
                              double *capacity,
                              double *rho_crit,
                              double *rho_jam);

enum KwStatus kw_diagram_flux(const struct KwDiagram *d, double rho, double *out);

/**
 * Demand and supply of density `rho`.
 */
enum KwStatus kw_state_from_density(const struct KwDiagram *d, double rho, struct KwState *out);

enum KwStatus kw_state_to_density(const struct KwDiagram *d, struct KwState state, double *out);

/**
 * Riemann problem at the junction of an upstream and a downstream link.
 */
enum KwStatus kw_riemann_solve(const struct KwDiagram *up,
                               const struct KwDiagram *down,
                               struct KwState u1,
                               struct KwState u2,
                               struct KwRiemannSolution *out);

/**
 * Ring road of `n_cells` cells of length `dx` (km). Cell `i` uses
 * `diagrams[cell_diagram[i]]` and starts at density `rho[i]`.
 */
enum KwStatus kw_grid_new_ring(const struct KwDiagram *const *diagrams,
                               size_t n_diagrams,
                               const size_t *cell_diagram,
                               const double *rho,
                               size_t n_cells,
                               double dx,
                               struct KwGrid **out);

/**
 * Open road with constant upstream demand and downstream supply (veh/s).
 */
enum KwStatus kw_grid_new_open(const struct KwDiagram *const *diagrams,
                               size_t n_diagrams,
                               const size_t *cell_diagram,
                               const double *rho,
                               size_t n_cells,
                               double dx,
                               double left_demand,
                               double right_supply,
                               struct KwGrid **out);

/**
 * Grid described by a scenario file's `[road]`, `[initial]` and
 * `[boundary]` sections.
 */
enum KwStatus kw_grid_from_scenario(const struct KwScenario *s, struct KwGrid **out);

void kw_grid_free(struct KwGrid *g);

/**
 * Advances `steps` Godunov steps of length `dt` (s). `allow_high_cfl`
 * lifts the 0.95 guard; CFL numbers above 1 always fail.
 */
enum KwStatus kw_grid_step(struct KwGrid *g,
                           double dt,
                           size_t steps,
                           bool allow_high_cfl,
                           double *max_change);

enum KwStatus kw_grid_len(const struct KwGrid *g, size_t *out);

enum KwStatus kw_grid_time(const struct KwGrid *g, double *out);

/**
 * Total vehicles on the road.
 */
enum KwStatus kw_grid_vehicles(const struct KwGrid *g, double *out);

/**
 * Copies the cell densities into `buf`, which must hold `len` values;
 * `len` must equal the cell count.
 */
enum KwStatus kw_grid_densities(const struct KwGrid *g, double *buf, size_t len);

/**
 * Parses scenario text (TOML, NUL-terminated UTF-8).
 */
enum KwStatus kw_scenario_parse(const char *text, struct KwScenario **out);

void kw_scenario_free(struct KwScenario *s);

/**
 * Stationary profile of a two-link ring holding `vehicles` vehicles.
 * Lengths in km.
 */
enum KwStatus kw_ring_predict(double length,
                              double link1_length,
                              const struct KwDiagram *link1,
                              const struct KwDiagram *link2,
                              double vehicles,
                              struct KwRingPrediction *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KINWAVE_H */
