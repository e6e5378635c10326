#include <math.h>
#include <stdio.h>
#include <string.h>

#include "interreflect.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            const char *m = ir_last_error_message();             \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__,        \
                    __LINE__, #cond, m ? m : "no message");      \
            return 1;                                            \
        }                                                        \
    } while (0)

static IrRgb mul(IrRgb a, IrRgb b) {
    IrRgb c = {a.r * b.r, a.g * b.g, a.b * b.b};
    return c;
}

int main(int argc, char **argv) {
    IrRgb l = {0.8, 0.6, 0.3};
    IrRgb r1 = {0.5, 0.2, 0.4};
    IrRgb r2 = {0.1, 0.7, 0.3};
    IrRgb est;
    double deg;

    CHECK(ir_estimate_pure(NULL, mul(r1, l), mul(r2, l), mul(mul(r1, r2), l), &est) == IR_STATUS_OK);
    CHECK(ir_angular_error(est, l, &deg) == IR_STATUS_OK);
    CHECK(deg < 1e-9);

    IrRgb zero = {0.0, 1.0, 1.0};
    CHECK(ir_estimate_pure(NULL, r1, r2, zero, &est) == IR_STATUS_DARK_CHANNEL);
    CHECK(ir_last_error_message() != NULL);

    if (argc > 1) {
        IrEstimator *e = ir_estimator_new(IR_METHOD_LS);
        IrReport *rep = NULL;
        CHECK(ir_estimate_scene_files(e, argv[1], NULL, &rep) == IR_STATUS_OK);
        CHECK(ir_report_angular_error(rep, &deg) == IR_STATUS_OK);
        CHECK(deg < 1e-6);
        char *json = ir_report_to_json(rep);
        CHECK(json != NULL && strstr(json, "\"method\": \"ls\"") != NULL);
        ir_string_free(json);
        ir_report_free(rep);
        ir_estimator_free(e);
    }
    printf("ok\n");
    return 0;
}
