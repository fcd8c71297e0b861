/*
 * Generic test harness for generated classifier headers.
 *
 * Build once per header:
 *   cc -O2 -o harness harness.c -lm \
 *      -DCLASSIFIER_HEADER='"path/to/model.h"' \
 *      -DCLASSIFIER_SYM=classify -DCLASSIFIER_SYM_UPPER=CLASSIFY
 *
 * Run against any vector file for that header:
 *   ./harness vectors.csv
 *
 * The vector file is a CSV whose first line is a header and whose data
 * rows hold one value per classifier argument followed by the expected
 * class index. Exit status: 0 all vectors agree, 1 mismatches found,
 * 2 usage error, 3 malformed vector file.
 */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#ifndef CLASSIFIER_HEADER
#error "compile with -DCLASSIFIER_HEADER='\"model.h\"'"
#endif
#ifndef CLASSIFIER_SYM
#error "compile with -DCLASSIFIER_SYM=<entry symbol>"
#endif
#ifndef CLASSIFIER_SYM_UPPER
#error "compile with -DCLASSIFIER_SYM_UPPER=<ENTRY SYMBOL IN CAPS>"
#endif

#include CLASSIFIER_HEADER

#define GLUE_(a, b) a##_##b
#define GLUE(a, b) GLUE_(a, b)

#define N_FEATURES GLUE(CLASSIFIER_SYM_UPPER, FEATURE_COUNT)
#define CALL_ROW GLUE(CLASSIFIER_SYM, row)

#if GLUE(CLASSIFIER_SYM_UPPER, VALUE_INT16)
typedef int value_t;
#define CONVERT(x) ((int)floor((x) * (double)GLUE(CLASSIFIER_SYM_UPPER, SCALE) + 0.5))
#elif GLUE(CLASSIFIER_SYM_UPPER, VALUE_DOUBLE)
typedef double value_t;
#define CONVERT(x) (x)
#else
typedef float value_t;
#define CONVERT(x) ((float)(x))
#endif

#define MAX_LINE 8192

int main(int argc, char **argv)
{
    FILE *fh;
    char line[MAX_LINE];
    long tested = 0, mismatches = 0;
    long first_index = -1;
    int first_expected = 0, first_got = 0;
    long lineno = 0;

    if (argc != 2) {
        fprintf(stderr, "usage: %s vectors.csv\n", argv[0]);
        return 2;
    }
    fh = fopen(argv[1], "r");
    if (!fh) {
        fprintf(stderr, "cannot open %s\n", argv[1]);
        return 2;
    }
    if (!fgets(line, MAX_LINE, fh)) {
        fprintf(stderr, "format error: line 1: empty file\n");
        fclose(fh);
        return 3;
    }
    lineno = 1;
    if (!strstr(line, "expected_class")) {
        fprintf(stderr, "format error: line 1: missing expected_class header\n");
        fclose(fh);
        return 3;
    }

    while (fgets(line, MAX_LINE, fh)) {
        value_t row[N_FEATURES];
        char *cursor = line;
        char *end;
        int col, expected, got;

        lineno++;
        if (line[0] == '\n' || line[0] == '\0')
            continue;
        for (col = 0; col < N_FEATURES; col++) {
            double parsed = strtod(cursor, &end);
            if (end == cursor || *end != ',') {
                fprintf(stderr, "format error: line %ld: bad value in column %d\n",
                        lineno, col + 1);
                fclose(fh);
                return 3;
            }
            row[col] = CONVERT(parsed);
            cursor = end + 1;
        }
        expected = (int)strtol(cursor, &end, 10);
        if (end == cursor || (*end != '\n' && *end != '\r' && *end != '\0')) {
            fprintf(stderr, "format error: line %ld: bad expected class\n", lineno);
            fclose(fh);
            return 3;
        }

        got = CALL_ROW(row);
        if (got != expected) {
            if (mismatches == 0) {
                first_index = tested;
                first_expected = expected;
                first_got = got;
            }
            mismatches++;
        }
        tested++;
    }
    fclose(fh);

    printf("vectors %ld\n", tested);
    printf("mismatches %ld\n", mismatches);
    if (mismatches > 0)
        printf("first_mismatch index=%ld expected=%d got=%d\n",
               first_index, first_expected, first_got);
    return mismatches == 0 ? 0 : 1;
}
