/* Checksum-protected timing kernel driver.
 *
 * Prints one `ORIG_TIME <sec>` / `CAND_TIME <sec>` line per timed
 * repetition and one `ORIG_CHECKSUM` / `CAND_CHECKSUM` line per side; the
 * checksum accumulates over all outputs so the measured calls cannot be
 * dead-code eliminated.
 */
#include <stdio.h>
#include <stdlib.h>
#include <stdint.h>
#include <string.h>
#include <math.h>
#include <time.h>

#define CANDIDATE_SLOT_NAME "{{SLOT_NAME}}"

{{CONTEXT}}

{{ORIGINAL_FN}}

{{CANDIDATE_FN}}

{{COMPARE_POLICY}}

static uint64_t prng_state;

static void prng_seed(uint64_t s) { prng_state = s ? s : 0x9e3779b97f4a7c15ULL; }

static uint64_t prng_next(void) {
    uint64_t x = prng_state;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    prng_state = x;
    return x;
}

static double prng_uniform(double lo, double hi) {
    return lo + (hi - lo) * ((double)(prng_next() >> 11) / 9007199254740992.0);
}

static double now_sec(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + 1e-9 * (double)ts.tv_nsec;
}

/* Defeats hoisting of repeated identical calls out of the timing loop. */
static void memory_fence(void) { __asm__ volatile("" ::: "memory"); }

int main(void) {
    (void)prng_uniform;
    {{RANGES}}
    return 0;
}
