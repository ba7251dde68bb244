#pragma once

#include "pacrr/synth.hpp"
#include "pacrr/training.hpp"

namespace pacrr::testing {

inline Dataset to_dataset(const SyntheticData& data) {
    Dataset out;
    out.corpus = data.corpus;
    out.queries = data.queries;
    out.embeddings = data.embeddings;
    out.qrels = data.qrels;
    out.runs = data.baseline;
    out.train_queries = data.train_ids;
    out.validation_queries = data.validation_ids;
    return out;
}

inline PacrrConfig tiny_config(double learning_rate = 0.3) {
    PacrrConfig c;
    c.l_q = 4;
    c.l_d = 12;
    c.l_g = 3;
    c.n_f = 4;
    c.n_s = 2;
    c.mode = DistillMode::KWindow;
    c.learning_rate = learning_rate;
    return c;
}

inline SynthOptions small_synth(std::uint64_t seed = 1) {
    SynthOptions options;
    options.seed = seed;
    options.docs = 120;
    options.train_queries = 6;
    options.validation_queries = 3;
    options.vocab_size = 300;
    options.dim = 16;
    return options;
}

}  // namespace pacrr::testing
