#include <stdio.h>
#include "underwrite.h"

int main(int argc, char **argv) {
    double p = 0.0;
    if (argc < 2 || uw_fisher_exact(7, 18, 0, 25, &p) != UW_STATUS_OK) return 1;

    UwLedger *ledger = NULL;
    if (uw_ledger_open(argv[1], false, &ledger) != UW_STATUS_OK) return 2;
    uint64_t seq = 0;
    uw_ledger_append(ledger, "c-1", "ingested", "{}", &seq);
    uw_ledger_append(ledger, "c-1", "agent_output", "{\"task\":\"draft\"}", &seq);
    enum UwStatus reserved = uw_ledger_append(ledger, "c-1", "recorded", "{}", &seq);
    uint64_t len = 0, div = 0;
    uw_ledger_len(ledger, &len);
    enum UwStatus verified = uw_ledger_verify(ledger, &div);
    uw_ledger_free(ledger);

    printf("fisher=%.6f reserved=%d records=%llu clean=%d\n", p, (int)reserved, (unsigned long long)len,
           verified == UW_STATUS_OK && div == UW_NO_DIVERGENCE);
    return 0;
}
