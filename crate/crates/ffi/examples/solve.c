/* Biharmonic problem on the unit sphere with data from u = |X|^2; prints u(0.5, 0, 0). */
#include <stdio.h>
#include <stdlib.h>

#include "polyrobin.h"

static int check(PolyrobinStatus s, const char *what) {
    if (s != POLYROBIN_STATUS_OK) {
        char msg[256];
        polyrobin_last_error(msg, sizeof msg);
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg);
        return 1;
    }
    return 0;
}

int main(void) {
    PolyrobinMesh *mesh = NULL;
    PolyrobinProblem *problem = NULL;
    PolyrobinSolution *solution = NULL;
    int rc = 1;

    if (check(polyrobin_mesh_sphere(1.0, 2, &mesh), "mesh")) return 1;
    size_t n = polyrobin_mesh_panel_count(mesh);
    double *b = malloc(2 * n * sizeof(double));
    double *h = malloc(2 * n * sizeof(double));
    /* b = 1; on the unit sphere dN|X|^2 + |X|^2 = 3 and dN 6 + 6 = 6 */
    for (size_t k = 0; k < n; k++) {
        b[k] = b[n + k] = 1.0;
        h[k] = 3.0;
        h[n + k] = 6.0;
    }
    if (check(polyrobin_problem_new(mesh, 2, b, h, 2.0, &problem), "problem")) goto done;
    if (check(polyrobin_solve(problem, &solution), "solve")) goto done;

    double x[3] = {0.5, 0.0, 0.0}, u, grad[3];
    if (check(polyrobin_solution_evaluate(solution, x, 0, &u, grad), "evaluate")) goto done;
    printf("u=%.6f grad_x=%.6f\n", u, grad[0]);

    double far[3] = {2.0, 0.0, 0.0};
    rc = polyrobin_solution_evaluate(solution, far, 0, &u, NULL) == POLYROBIN_STATUS_EVAL_POINT ? 0 : 1;

done:
    polyrobin_solution_free(solution);
    polyrobin_problem_free(problem);
    polyrobin_mesh_free(mesh);
    free(b);
    free(h);
    return rc;
}
