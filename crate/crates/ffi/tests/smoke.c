#include <math.h>
#include <stdio.h>
#include "sparse_pwl.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, spwl_last_error()); return 1; } } while (0)

int main(void) {
    double x[] = {0, 1, 2, 3};
    double y[] = {0, 1, 1, 0};
    SpwlSamples *s = NULL;
    CHECK(spwl_samples_new(x, y, 4, &s) == SPWL_STATUS_OK);

    SpwlSpline *f = NULL;
    CHECK(spwl_sparsest_solution(s, NULL, NULL, 0, &f) == SPWL_STATUS_OK);
    CHECK(spwl_spline_knot_count(f) == 1);
    CHECK(spwl_spline_eval(f, 1.5) == 1.5);
    bool passed = false;
    CHECK(spwl_verify(s, f, 1e-9, &passed) == SPWL_STATUS_OK && passed);

    SpwlFit *fit = NULL;
    SpwlFitSummary sum;
    CHECK(spwl_fit(s, 0.01, NULL, &fit) == SPWL_STATUS_OK);
    CHECK(spwl_fit_summary(fit, &sum) == SPWL_STATUS_OK && sum.converged);
    CHECK(fabs(sum.lambda - 0.01) < 1e-15);

    double bad[] = {0, 0};
    SpwlSamples *t = NULL;
    CHECK(spwl_samples_new(bad, bad, 2, &t) == SPWL_STATUS_INVALID_INPUT);
    CHECK(spwl_last_error()[0] != '\0');

    spwl_fit_free(fit);
    spwl_spline_free(f);
    spwl_samples_free(s);
    puts("ok");
    return 0;
}
