/* kernel-spec: kind=par-constructs iterations=10 num_tasks=100 max_task_size_us=200 num_threads=4 construct=multi-task-gen seed=1 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/time.h>

/* Busy-wait for the requested number of microseconds. */
void stall_us(double us) {
    struct timeval t0;
    gettimeofday(&t0, 0);
    struct timeval t1;
    double elapsed;
    do {
        gettimeofday(&t1, 0);
        elapsed = ((t1.tv_sec - t0.tv_sec) *
            1000000 + t1.tv_usec - t0.tv_usec);
    } while (elapsed < us);
}

/* Deterministic task-size generator (64-bit LCG, reproducible across
 * compilers, unlike rand()). */
static unsigned long long lcg_state = 1ULL;

void lcg_seed(unsigned long long seed) {
    lcg_state = seed ? seed : 1ULL;
}

/* Uniform integer in [0, bound]. */
int lcg_uniform(int bound) {
    lcg_state = lcg_state * 6364136223846793005ULL + 1442695040888963407ULL;
    return (int)((lcg_state >> 33) % ((unsigned long long)bound + 1ULL));
}

/* Energy polling: reads accumulated package counters exposed as files and
 * corrects for at most one counter wrap per domain. Domains are summed. */
#define MAX_DOMAINS 8

typedef struct {
    double t0_us;
    long long energy_uj[MAX_DOMAINS];
    long long max_range_uj[MAX_DOMAINS];
    int domains;
} measurements_t;

static const char *powercap_root(void) {
    const char *root = getenv("LOOPBENCH_POWERCAP_ROOT");
    return root ? root : "/sys/class/powercap";
}

static long long read_ll_file(const char *path, int *ok) {
    FILE *f = fopen(path, "r");
    long long value = 0;
    if (!f) {
        *ok = 0;
        return 0;
    }
    if (fscanf(f, "%lld", &value) != 1)
        *ok = 0;
    fclose(f);
    return value;
}

static int poll_domains(long long energy_uj[], long long max_range_uj[]) {
    int count = 0;
    char path[512];
    for (int k = 0; k < MAX_DOMAINS; k++) {
        int ok = 1;
        snprintf(path, sizeof path, "%s/intel-rapl:%d/energy_uj",
                 powercap_root(), k);
        long long e = read_ll_file(path, &ok);
        if (!ok)
            break;
        snprintf(path, sizeof path, "%s/intel-rapl:%d/max_energy_range_uj",
                 powercap_root(), k);
        long long m = read_ll_file(path, &ok);
        if (!ok)
            break;
        energy_uj[count] = e;
        max_range_uj[count] = m;
        count++;
    }
    return count;
}

static double now_us(void) {
    struct timeval tv;
    gettimeofday(&tv, 0);
    return tv.tv_sec * 1000000.0 + tv.tv_usec;
}

measurements_t *poll_before(void) {
    measurements_t *m = malloc(sizeof(measurements_t));
    m->domains = poll_domains(m->energy_uj, m->max_range_uj);
    m->t0_us = now_us();
    return m;
}

void poll_after(measurements_t *m, const char *out_path) {
    double t1_us = now_us();
    long long energy_uj[MAX_DOMAINS];
    long long max_range_uj[MAX_DOMAINS];
    long long delta_uj[MAX_DOMAINS];
    int domains = poll_domains(energy_uj, max_range_uj);
    long long total_uj = 0;
    if (domains == m->domains) {
        for (int k = 0; k < domains; k++) {
            long long d = energy_uj[k] - m->energy_uj[k];
            if (d < 0)
                d = (m->max_range_uj[k] - m->energy_uj[k]) + energy_uj[k];
            delta_uj[k] = d;
            total_uj += d;
        }
    } else {
        domains = 0;
    }
    double t_s = (t1_us - m->t0_us) / 1e6;
    FILE *out = out_path && strcmp(out_path, "-") ? fopen(out_path, "w") : stdout;
    /* domains are summed for analysis; raw per-domain deltas kept for audit */
    fprintf(out, "{\"t_s\": %.9f, \"e_j\": %.9f, \"domains_uj\": [", t_s,
            total_uj / 1e6);
    for (int k = 0; k < domains; k++)
        fprintf(out, "%s%lld", k ? ", " : "", delta_uj[k]);
    fprintf(out, "]}\n");
    if (out != stdout)
        fclose(out);
    free(m);
}

void perform_task(int us) {
    stall_us(us);
}

int main(int argc, char **argv) {
    int iterations = 10;
    int num_tasks = 100;
    int max_task_size_us = 200;
    unsigned long long seed = 1ULL;
    if (argc > 1)
        seed = strtoull(argv[1], 0, 10);
    lcg_seed(seed);
    int *waittimes = malloc(num_tasks * sizeof(int));
    for (int t = 0; t < num_tasks; t++) {
        waittimes[t] = lcg_uniform(max_task_size_us);
    }
    measurements_t *m = poll_before();
    for (int i = 0; i < iterations; i++) {
        /* New parallel region for every iteration */
        #pragma omp parallel
        {
            #pragma omp for
            for (int t = 0; t < num_tasks; t++) {
                #pragma omp task
                perform_task(waittimes[t]);
            }
        }
    }
    poll_after(m, "-");
    free(waittimes);
    return 0;
}
