/* Loads a contract given on the command line, analyzes it and prints
   "<findings> <rounds>". Exits 3 on any API error. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "chainprobe.h"

static char *slurp(const char *path, size_t *len) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc((size_t)n + 1);
    if (fread(buf, 1, (size_t)n, f) != (size_t)n) { fclose(f); free(buf); return NULL; }
    fclose(f);
    buf[n] = 0;
    *len = (size_t)n;
    return buf;
}

int main(int argc, char **argv) {
    if (argc != 3) return 2;
    size_t wasm_len, abi_len;
    char *wasm = slurp(argv[1], &wasm_len);
    char *abi = slurp(argv[2], &abi_len);
    if (!wasm || !abi) return 2;

    CpContract *contract = NULL;
    if (cp_contract_load((const uint8_t *)wasm, wasm_len, abi, &contract) != CP_STATUS_OK) {
        fprintf(stderr, "load: %s\n", cp_last_error());
        return 3;
    }
    CpConfig *config = cp_config_new();
    cp_config_set_max_rounds(config, 5);
    if (cp_config_set_detectors(config, "nonsense") != CP_STATUS_INVALID_ARGUMENT || strlen(cp_last_error()) == 0) return 3;

    CpReport *report = NULL;
    if (cp_analyze(contract, config, &report) != CP_STATUS_OK) {
        fprintf(stderr, "analyze: %s\n", cp_last_error());
        return 3;
    }
    if (strstr(cp_report_json(report), "\"schema_version\": 1") == NULL) return 3;
    printf("%zu %zu\n", cp_report_finding_count(report), cp_report_round_count(report));

    cp_report_free(report);
    cp_config_free(config);
    cp_contract_free(contract);
    free(wasm);
    free(abi);
    return 0;
}
