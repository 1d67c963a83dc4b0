#include <stdio.h>
#include "bonsai.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        BonsaiStatus s_ = (call);                                          \
        if (s_ != BONSAI_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, s_, bonsai_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    BonsaiTarget *t = NULL;
    CHECK(bonsai_target_new("minilang", NULL, &t));
    BonsaiFeedback *fb = NULL;
    CHECK(bonsai_target_execute(t, "pass", &fb));
    if (!bonsai_feedback_valid(fb)) return 2;
    size_t n = bonsai_feedback_coverage_len(fb);
    bonsai_feedback_free(fb);

    BonsaiCorpus *c = NULL;
    CHECK(bonsai_run_lattice(t, 1, 2, 1, false, 200, 7, 2, &c));
    char *text = NULL;
    CHECK(bonsai_corpus_text(c, 0, &text));
    printf("branches=%zu files=%zu first=%s\n", n, bonsai_corpus_len(c), text);
    bonsai_string_free(text);
    if (bonsai_corpus_text(c, 100000, &text) != BONSAI_STATUS_OUT_OF_RANGE) return 3;
    bonsai_corpus_free(c);
    bonsai_target_free(t);
    return 0;
}
