/* Differential comparison driver.
 *
 * Exit protocol: 0 = all trials agree; 1 = divergence (witness printed as
 * `TRIAL <n> PARAM <name> EXPECTED <v> ACTUAL <v>`); anything else = crash.
 * An optional argv[1] selects a single trial for witness replay.
 */
#include <stdio.h>
#include <stdlib.h>
#include <stdint.h>
#include <string.h>
#include <math.h>

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

int main(int argc, char **argv) {
    long only_trial = argc > 1 ? strtol(argv[1], 0, 10) : -1;
    for (long trial = 0; trial < {{TRIALS}}; ++trial) {
        if (only_trial >= 0 && trial != only_trial)
            continue;
        prng_seed({{SEED}}ULL + 0x9e3779b97f4a7c15ULL * (uint64_t)(trial + 1));
        {{RANGES}}
    }
    return 0;
}
