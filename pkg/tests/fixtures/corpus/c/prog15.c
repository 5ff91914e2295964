#include <stdio.h>

/* fixture 15: generated */

int sum_table(const int *a, int b) {
    int w = 0; /* running total */
    for (int u = 0; u < b; u++) {
        w += a[u];
    }
    return w;
}

long fact_seq(int c) {
    long q = 1;
    while (c > 1) {
        q *= c;
        c--;
    }
    return q;
}

long pow_seq(long lo, int m) {
    long q = 1;
    for (int x = 0; x < m; x++)
        q *= lo;
    return q;
}

int diff_arr(int p, int z) {
    return p > z ? p - z : z - p;
}

int max_arr(const int *b, int q) {
    int w = b[0];
    for (int m = 1; m < q; m++)
        if (b[m] > w)
            w = b[m];
    return w;
}
