#include <stdio.h>
#include <string.h>

#include "rastmetrics.h"

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke SRC OUT\n");
        return 2;
    }
    RmOptions opts = rm_options_default();
    opts.metrics = "mccabe.*,loc.loc";
    opts.threads = 2;

    RmAnalysis *a = NULL;
    if (rm_analysis_open(argv[1], &opts, &a) != RM_STATUS_OK) {
        fprintf(stderr, "open: %s\n", rm_last_error());
        return 1;
    }
    size_t funcs = 0, vars = 0;
    rm_analysis_function_count(a, &funcs);
    rm_analysis_variation_count(a, &vars);
    double values[128];
    for (size_t i = 0; i < funcs; i++) {
        const char *key = NULL;
        rm_analysis_function_key(a, i, &key);
        if (rm_analysis_row(a, i, values, 128) != RM_STATUS_OK) {
            fprintf(stderr, "row: %s\n", rm_last_error());
            return 1;
        }
        printf("%s %g\n", key, values[0]);
    }
    if (rm_analysis_row(a, funcs, values, 128) != RM_STATUS_OUT_OF_RANGE || strlen(rm_last_error()) == 0) {
        return 1;
    }
    if (rm_analysis_write_csv(a, argv[2]) != RM_STATUS_OK) {
        return 1;
    }
    rm_analysis_free(a);

    opts.metrics = "nope";
    if (rm_analysis_open(argv[1], &opts, &a) != RM_STATUS_INVALID_SELECTION) {
        return 1;
    }
    printf("variations %zu\n", vars);
    return 0;
}
