/* Parses an XES file, enforces group privacy and prints risk before and after.
 *   cc examples/smoke.c -Iinclude -L../../target/debug -lpc4pm_ffi -lpthread -ldl -lm
 */
#include <stdio.h>
#include <stdlib.h>

#include "pc4pm.h"

static int fail(enum Pc4pmStatus status) {
    const char *msg = pc4pm_last_error();
    fprintf(stderr, "error %d: %s\n", (int)status, msg ? msg : "?");
    return 1;
}

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s log.xes\n", argv[0]);
        return 2;
    }
    FILE *f = fopen(argv[1], "rb");
    if (!f) return 2;
    fseek(f, 0, SEEK_END);
    long size = ftell(f);
    fseek(f, 0, SEEK_SET);
    uint8_t *data = malloc((size_t)size);
    if (fread(data, 1, (size_t)size, f) != (size_t)size) return 2;
    fclose(f);

    Pc4pmLog *log = NULL;
    enum Pc4pmStatus st = pc4pm_log_parse(data, (size_t)size, &log);
    free(data);
    if (st != PC4PM_STATUS_OK) return fail(st);

    Pc4pmRisk before, after;
    if ((st = pc4pm_risk(log, "set", 1, &before)) != PC4PM_STATUS_OK) return fail(st);

    Pc4pmLog *anon = NULL;
    if ((st = pc4pm_tlkc(log, 1, 2, "set", &anon)) != PC4PM_STATUS_OK) return fail(st);
    if ((st = pc4pm_risk(anon, "set", 1, &after)) != PC4PM_STATUS_OK) return fail(st);

    Pc4pmUtility u;
    if ((st = pc4pm_utility(log, anon, &u)) != PC4PM_STATUS_OK) return fail(st);

    Pc4pmBuffer xes = {0};
    if ((st = pc4pm_log_write(anon, &xes)) != PC4PM_STATUS_OK) return fail(st);

    printf("traces %zu events %zu -> %zu\n", (size_t)pc4pm_log_trace_count(log),
           (size_t)pc4pm_log_event_count(log), (size_t)pc4pm_log_event_count(anon));
    printf("uniqueness %.6f -> %.6f\n", before.uniqueness_rate, after.uniqueness_rate);
    printf("utility %.6f %.6f %.6f\n", u.variant_preservation, u.df_distance, u.event_count_ratio);
    printf("bytes %zu\n", (size_t)xes.len);

    Pc4pmLog *none = NULL;
    st = pc4pm_tlkc(log, 1, 4, "set", &none);
    printf("k4 status %d\n", (int)st);

    pc4pm_buffer_free(&xes);
    pc4pm_log_free(anon);
    pc4pm_log_free(log);
    return 0;
}
