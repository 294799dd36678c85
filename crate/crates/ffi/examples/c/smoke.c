#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "tfch.h"

static int check(enum TfchStatus st, const char *what) {
    if (st != TFCH_STATUS_OK) {
        char msg[256];
        tfch_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)st, msg);
        return 1;
    }
    return 0;
}

int main(void) {
    double r = 0.0;
    if (check(tfch_r_star(0.5, &r), "tfch_r_star")) return 1;

    enum { MX = 16, MY = 16 };
    const double L = 6.283185307179586;
    double *phi = malloc(sizeof(double) * MX * MY);
    for (int i = 0; i < MX; ++i)
        for (int j = 0; j < MY; ++j)
            phi[i * MY + j] = 0.1 * sin(L * i / MX) * cos(L * j / MY);

    TfchSolver *s = NULL;
    if (check(tfch_solver_new(0.5, 0.5, 0.3, MX, MY, L, L, phi, MX * MY,
                              TFCH_SCHEME_FBDF2, TFCH_FORCING_NONE, &s),
              "tfch_solver_new"))
        return 1;
    for (int n = 0; n < 4; ++n)
        if (check(tfch_solver_step(s, 1e-3), "tfch_solver_step")) return 1;

    double e, v, ea;
    if (check(tfch_solver_diagnostics(s, &e, &v, &ea), "tfch_solver_diagnostics")) return 1;
    printf("r_star=%.6f level=%zu t=%.4f energy=%.6e volume=%.3e\n", r,
           tfch_solver_level(s), tfch_solver_time(s), e, v);

    if (tfch_r_star(2.0, &r) != TFCH_STATUS_DOMAIN || tfch_last_error_length() == 0) return 1;

    tfch_solver_free(s);
    free(phi);
    return 0;
}
