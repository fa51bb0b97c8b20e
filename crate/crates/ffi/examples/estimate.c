#include "discount_cml.h"
#include <stdio.h>
int main(void) {
    DcmlDataset *ds = NULL, *ab = NULL;
    if (dcml_simulate("n = 1500\n", 3, &ds) != DCML_STATUS_OK) return 1;
    dcml_dataset_always_buyers(ds, &ab);
    DcmlEstimate e;
    DcmlStatus st = dcml_dml_ate(ab, 30, 3, 0.01, 1, &e);
    printf("status %d ate %.4f se %.4f n %llu version %s\n", st, e.effect, e.se, (unsigned long long)e.n, dcml_version());
    st = dcml_dataset_len(NULL, NULL);
    char buf[128]; dcml_last_error_message(buf, sizeof buf);
    printf("null status %d: %s\n", st, buf);
    dcml_dataset_free(ab); dcml_dataset_free(ds);
    return 0;
}
