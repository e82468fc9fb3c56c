/* Minimal C client: solve one uniform instance and print the rate. */
#include <stdio.h>

#include "qrd.h"

int main(void) {
    QrdInstance *inst = NULL;
    if (qrd_instance_new_uniform(4, 0.3, &inst) != QRD_STATUS_OK) {
        fprintf(stderr, "instance: %s\n", qrd_last_error_message());
        return 1;
    }
    QrdConfig cfg = qrd_config_default();
    cfg.tol = 1e-12;
    QrdResult *res = NULL;
    if (qrd_solve(inst, &cfg, QRD_PATH_SYMMETRIC, &res) != QRD_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", qrd_last_error_message());
        qrd_instance_free(inst);
        return 1;
    }
    double expected = qrd_analytic_uniform_rd(4, 0.3);
    printf("rate %.12f (analytic %.12f), beta %.6f, %zu iterations\n", qrd_result_rate(res), expected,
           qrd_result_beta(res), qrd_result_iterations(res));
    qrd_result_free(res);
    qrd_instance_free(inst);
    return 0;
}
