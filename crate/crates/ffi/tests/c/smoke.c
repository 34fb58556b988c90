#include <math.h>
#include <stdio.h>

#include "ada2ms.h"

int main(void) {
    Ada2msOptimizer *opt = NULL;
    if (ada2ms_optimizer_new(ADA2MS_OPTIMIZER_KIND_ADA2MS, NULL, &opt) != ADA2MS_STATUS_OK) {
        return 1;
    }
    size_t shape[2] = {2, 2};
    double w[4] = {1.0, -1.0, 0.5, 2.0};
    double b[1] = {0.0};
    if (ada2ms_optimizer_add_tensor(opt, "w", shape, 2, w, 4) != ADA2MS_STATUS_OK) return 2;
    if (ada2ms_optimizer_add_tensor(opt, "b", NULL, 0, b, 1) != ADA2MS_STATUS_OK) return 3;

    /* minimise sum(x^2) over both tensors */
    for (int t = 1; t <= 200; t++) {
        double g[5];
        ada2ms_optimizer_get_values(opt, 0, g, 4);
        ada2ms_optimizer_get_values(opt, 1, g + 4, 1);
        for (int i = 0; i < 5; i++) g[i] *= 2.0;
        double lr, alpha;
        ada2ms_lr_at(ADA2MS_LR_KIND_WSDS, 0.1, 200, t, &lr);
        ada2ms_alpha_at(200, 0.6, t, &alpha);
        if (ada2ms_optimizer_step(opt, g, 5, lr, alpha) != ADA2MS_STATUS_OK) return 4;
    }
    ada2ms_optimizer_get_values(opt, 0, w, 4);
    double norm = 0.0;
    for (int i = 0; i < 4; i++) norm += w[i] * w[i];

    double g_short[2] = {0.0, 0.0};
    Ada2msStatus s = ada2ms_optimizer_step(opt, g_short, 2, 0.1, 1.0);
    char msg[128];
    ada2ms_last_error_message(msg, sizeof msg);
    ada2ms_optimizer_free(opt);

    printf("norm=%g status=%d msg=%s\n", sqrt(norm), (int)s, msg);
    return (sqrt(norm) < 0.1 && s == ADA2MS_STATUS_SHAPE_MISMATCH) ? 0 : 5;
}
