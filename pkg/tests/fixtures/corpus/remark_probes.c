/* Probe kernels that make the loop vectorizer emit one remark per known
 * failure category, plus a few loops it accepts.  Compiled by
 * scripts/record_remarks.py to refresh the recorded-remarks fixture.
 */
#include <stdio.h>

#define N 4096

float A[N], B[N], C[N], D[N];
int S[N];

void dep_mid(void)
{
    for (int i = 0; i < N; i++) {
        A[i] = A[N/2] + B[i];
    }
}

void dep_backward(void)
{
    for (int i = 1; i < N; i++) {
        A[i] = A[i - 1] + B[i];
    }
}

float red_lastvalue(void)
{
    float x = (float)0.;
    for (int i = 0; i < N; i++) {
        if (B[i] > (float)0.) {
            x = A[i];
        }
    }
    return x;
}

float red_conditional(void)
{
    float x = (float)0.;
    int j = 0;
    for (int i = 0; i < N; i++) {
        if (A[i] < (float)0.) {
            j = i;
        }
    }
    return A[j] + x;
}

void bounds_unknown(float *p, int n)
{
    for (int i = 0; i < n; i++) {
        p[i] = p[i + n] * (float)2.;
    }
}

void trip_unknown(void)
{
    for (int i = 0; i < N; i++) {
        if (D[i] < (float)0.) {
            return;
        }
        A[i] += B[i] * C[i];
    }
}

void instr_call(void)
{
    for (int i = 0; i < N; i++) {
        printf("%f\n", (double)A[i]);
    }
}

void switch_dispatch(void)
{
    for (int i = 0; i < N; i++) {
        switch (S[i] & 3) {
        case 0:
            A[i] = B[i] + (float)1.;
            break;
        case 1:
            A[i] = B[i] - (float)1.;
            break;
        default:
            A[i] = (float)0.;
            break;
        }
    }
}

void vec_add(void)
{
    for (int i = 0; i < N; i++) {
        A[i] = B[i] + C[i];
    }
}

void vec_muladd(void)
{
    for (int i = 0; i < N; i++) {
        A[i] += B[i] * C[i];
    }
}

float vec_sum(void)
{
    float s = (float)0.;
    for (int i = 0; i < N; i++) {
        s += A[i];
    }
    return s;
}

void vec_scale(void)
{
    for (int i = 0; i < N; i++) {
        A[i] = B[i] * (float)1.5;
        C[i] = D[i] * (float)0.5;
    }
}

void bounds_scatter(void)
{
    for (int i = 0; i < N; i++) {
        A[S[i]] += A[i];
    }
}

/* Sentinel-terminated scans draw two remarks at one location: the exit
 * value escapes (reduction) and the trip count is unknown. */
void bounds_sentinel(float *a, float *b)
{
    for (int i = 0; b[i] > (float)0.; i++) {
        a[i] = b[i] * (float)2.;
    }
}

struct node {
    struct node *next;
    float v;
};

void ptr_chase(struct node *p)
{
    while (p) {
        p->v *= (float)2.;
        p = p->next;
    }
}

void dep_forward_shift(void)
{
    for (int i = 0; i < N - 4; i++) {
        A[i + 4] = A[i] + B[i];
    }
}

void vec_saxpy(float q)
{
    for (int i = 0; i < N; i++) {
        A[i] = q * B[i] + C[i];
    }
}

void vec_reverse(void)
{
    for (int i = 0; i < N; i++) {
        A[i] = B[N - 1 - i];
    }
}

float vec_dot(void)
{
    float s = (float)0.;
    for (int i = 0; i < N; i++) {
        s += A[i] * B[i];
    }
    return s;
}

float vec_max(void)
{
    float m = A[0];
    for (int i = 1; i < N; i++) {
        if (A[i] > m) {
            m = A[i];
        }
    }
    return m;
}

void vec_nested(void)
{
    for (int j = 0; j < 8; j++) {
        for (int i = 0; i < N; i++) {
            A[i] = A[i] + B[i] * (float)j;
        }
    }
}

void vec_strided_pair(void)
{
    for (int i = 0; i < N / 2; i++) {
        A[2 * i] = B[i];
        A[2 * i + 1] = C[i];
    }
}
