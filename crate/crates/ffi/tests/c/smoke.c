#include <math.h>
#include <stdio.h>
#include "kinwave.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        KwStatus s_ = (call);                                              \
        if (s_ != KW_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    kw_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    KwDiagram *one = NULL, *two = NULL;
    CHECK(kw_diagram_kerner_konhauser(1.0, 180.0, 5.0, 0.028, &one));
    CHECK(kw_diagram_kerner_konhauser(2.0, 180.0, 5.0, 0.028, &two));

    double cap, rc, rj;
    CHECK(kw_diagram_info(one, &cap, &rc, &rj));

    KwRingPrediction p;
    CHECK(kw_ring_predict(16.8, 2.8, one, two, 858.3893, &p));

    const KwDiagram *fds[2] = {one, two};
    size_t map[6] = {0, 0, 1, 1, 1, 1};
    double rho[6] = {30, 30, 60, 60, 60, 60};
    KwGrid *g = NULL;
    CHECK(kw_grid_new_ring(fds, 2, map, rho, 6, 0.028, &g));
    double before, after, change;
    CHECK(kw_grid_vehicles(g, &before));
    CHECK(kw_grid_step(g, 0.8, 100, false, &change));
    CHECK(kw_grid_vehicles(g, &after));

    KwStatus bad = kw_diagram_flux(one, 1000.0, &cap);
    printf("capacity %.4f scenario %c l2 %.4f drift %.3e bad %d\n", cap, p.scenario, p.l2 / 0.028,
           fabs(after - before), (int)bad);

    kw_grid_free(g);
    kw_diagram_free(one);
    kw_diagram_free(two);
    return bad == KW_STATUS_DOMAIN ? 0 : 1;
}
