#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "pacrr/model.hpp"
#include "pacrr/synth.hpp"

namespace pacrr {

/// Settings read from a flat `key = value` file (`#` starts a comment).
/// Relative paths resolve against the file's directory. Every key is optional.
///
///   corpus, queries, qrels, embeddings, run, split   input paths (no default)
///   output_dir = pacrr_out
///   l_q = 16, l_d = 768, l_g = 3, n_f = 32, n_s = 2, mode = firstk
///   learning_rate = 0.001, seed = 1
///   iterations = 150, batches_per_iteration = 64, batch_size = 32
///   k = 20, g_max = 4, grade_map = -2:-2,0:0,1:1,2:2,3:3,4:4
///   synth_docs = 500, synth_train_queries = 30, synth_validation_queries = 10,
///   synth_test_queries = 0, synth_vocab_size = 2000, synth_dim = 50,
///   synth_min_doc_len = 30, synth_max_doc_len = 80,
///   synth_rel_share = 0.3, synth_hrel_share = 0.2
struct RunConfig {
    std::filesystem::path corpus;
    std::filesystem::path queries;
    std::filesystem::path qrels;
    std::filesystem::path embeddings;
    std::filesystem::path run;
    std::filesystem::path split;
    std::filesystem::path output_dir = "pacrr_out";

    PacrrConfig model;
    std::size_t iterations = 150;
    std::size_t batches_per_iteration = 64;
    std::size_t batch_size = 32;
    std::size_t k = 20;
    int g_max = 4;
    std::string grade_map = "-2:-2,0:0,1:1,2:2,3:3,4:4";

    SynthOptions synth;
};

/// Throws ConfigError on unknown keys, malformed lines or invalid values.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Renders every key; input paths are written as given.
std::string render_run_config(const RunConfig& config);

}  // namespace pacrr
