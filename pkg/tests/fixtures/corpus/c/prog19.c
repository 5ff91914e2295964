#include <stdio.h>

/* fixture 19: generated */

int len_arr(const char *v) {
    int q = 0;
    while (v[q] != '\0')
        q++;
    return q;
}

static void show_list(int x) {
    printf("got %d\n", x);
}

void rev_list(int *x, int p) {
    for (int acc = 0, b = p - 1; acc < b; acc++, b--) {
        int cur = x[acc];
        x[acc] = x[b];
        x[b] = cur;
    }
}

void sort_xs(int *m, int acc) {
    for (int r = 0; r < acc; r++)
        for (int v = 0; v + 1 < acc - r; v++)
            if (m[v] > m[v + 1]) {
                int y = m[v];
                m[v] = m[v + 1];
                m[v + 1] = y;
            }
}

int count_arr(const int *p, int z) {
    int y = 0;
    // count entries above the threshold
    for (int lo = 0; lo < z; lo++)
        if (p[lo] > 27)
            y++;
    return y;
}

int main(void) {
    int c;
    while (scanf("%d", &c) == 1 && c)
        puts("got");
    return 0;
}
