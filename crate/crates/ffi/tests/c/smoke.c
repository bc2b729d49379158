#include <math.h>
#include <stdio.h>
#include <string.h>

#include "flagmirror.h"

int main(void) {
    FmParams *p = NULL;
    if (fm_params_sample(2, 7, 40, 4, 60, &p) != FM_OK) {
        fprintf(stderr, "sample: %s\n", fm_last_error());
        return 1;
    }
    uint32_t perm[2] = {1, 2};
    FmSeries *s = NULL;
    if (fm_vertex_series(p, perm, 2, 0, &s) != FM_OK) {
        return 2;
    }
    uint32_t d0 = 0;
    double c = 0;
    if (fm_series_coefficient(s, &d0, 1, &c) != FM_OK || c != 1.0) {
        return 3;
    }
    FmMatrix *m = NULL;
    if (fm_stab_matrix(p, FM_STAB, &m) != FM_OK || fm_matrix_size(m) != 2) {
        return 4;
    }
    double lower = 1;
    fm_matrix_get(m, 1, 0, &lower);
    if (fabs(lower) > 1e-30) {
        return 5;
    }
    uint32_t bad[2] = {1, 1};
    FmSeries *t = NULL;
    if (fm_vertex_series(p, bad, 2, 0, &t) != FM_INVALID_ARGUMENT || fm_last_error() == NULL) {
        return 6;
    }
    fm_matrix_free(m);
    fm_series_free(s);
    fm_params_free(p);
    printf("ok\n");
    return 0;
}
