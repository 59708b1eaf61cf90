#include <stdio.h>
#include "rnnsched.h"

int main(void) {
    RnnschedNetwork *net = NULL;
    if (rnnsched_network_new(RNNSCHED_CELL_LSTM, 512, 1, 100, 0, &net) != RNNSCHED_STATUS_OK) {
        return 1;
    }
    RnnschedCacheOptions opts = rnnsched_cache_options_default();
    opts.capacity_bytes = 4u << 20;
    opts.weights_only = true;
    RnnschedReport r;
    if (rnnsched_run(net, RNNSCHED_SCHEDULE_A_PLUS, &opts, &r) != RNNSCHED_STATUS_OK) {
        return 2;
    }
    printf("%llu\n", (unsigned long long)(r.mem_read_bytes >> 20));
    if (rnnsched_network_from_catalog("missing", &net) != RNNSCHED_STATUS_UNKNOWN_BENCHMARK) {
        return 3;
    }
    printf("%s\n", rnnsched_last_error());
    rnnsched_network_free(net);
    return 0;
}
