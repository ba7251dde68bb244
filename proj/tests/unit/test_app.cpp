#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pacrr/app.hpp"
#include "pacrr/error.hpp"
#include "temp_dir.hpp"

using namespace pacrr;
using pacrr::testing::read_file;
using pacrr::testing::TempDir;

TEST(RunConfigFile, DefaultsAndOverrides) {
    const RunConfig defaults = parse_run_config("");
    EXPECT_EQ(defaults.model, PacrrConfig{});
    EXPECT_EQ(defaults.iterations, 150u);
    EXPECT_EQ(defaults.k, 20u);

    const auto config = parse_run_config(
        "# comment\n"
        "l_d = 12   # trailing comment\n"
        "mode = kwindow\n"
        "learning_rate = 0.05\n"
        "corpus = data/c.jsonl\n"
        "embeddings = /abs/e.txt\n",
        "/base");
    EXPECT_EQ(config.model.l_d, 12u);
    EXPECT_EQ(config.model.mode, DistillMode::KWindow);
    EXPECT_EQ(config.model.learning_rate, 0.05);
    EXPECT_EQ(config.corpus, std::filesystem::path("/base/data/c.jsonl"));
    EXPECT_EQ(config.embeddings, std::filesystem::path("/abs/e.txt"));
}

TEST(RunConfigFile, Errors) {
    EXPECT_THROW(parse_run_config("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse_run_config("l_d 12\n"), ConfigError);
    EXPECT_THROW(parse_run_config("l_d = twelve\n"), ConfigError);
    EXPECT_THROW(parse_run_config("mode = lastk\n"), ConfigError);
    EXPECT_THROW(parse_run_config("l_g = 1\n"), ConfigError);
}

TEST(RunConfigFile, RenderRoundTrips) {
    RunConfig config = parse_run_config("l_q = 4\nl_d = 12\nn_f = 4\nmode = kwindow\nlearning_rate = 0.05\nseed = 9\n");
    config.corpus = "corpus.jsonl";
    const RunConfig again = parse_run_config(render_run_config(config));
    EXPECT_EQ(again.model, config.model);
    EXPECT_EQ(again.corpus, config.corpus);
    EXPECT_EQ(render_run_config(again), render_run_config(config));
}

TEST(Split, ParsesRoles) {
    TempDir dir;
    const auto roles = load_split(dir.write("split.txt", "q1 train\nq2 validation\n\nq3 test\n"));
    EXPECT_EQ(roles.at("q2"), "validation");
    EXPECT_THROW(load_split(dir.write("bad.txt", "q1 holdout\n")), DataError);
    EXPECT_THROW(load_split(dir.write("dup.txt", "q1 train\nq1 test\n")), DataError);
}

namespace {

// Synthesizes a small benchmark into dir and returns its generated config.
RunConfig synthesize(const TempDir& dir) {
    CommandOptions options;
    options.config = parse_run_config(
        "l_q = 4\nl_d = 12\nn_f = 4\nmode = kwindow\nlearning_rate = 0.05\n"
        "iterations = 2\nbatches_per_iteration = 4\nbatch_size = 8\n"
        "synth_docs = 120\nsynth_train_queries = 6\nsynth_validation_queries = 3\n"
        "synth_vocab_size = 300\nsynth_dim = 16\n");
    options.config.output_dir = dir / "data";
    std::ostringstream out;
    EXPECT_EQ(cmd_synth(options, out), kExitOk);
    return load_run_config(dir / "data" / "pacrr.conf");
}

}  // namespace

TEST(Commands, TrainRerankScorePairaccEval) {
    TempDir dir;
    const RunConfig config = synthesize(dir);
    CommandOptions options;
    options.config = config;
    std::ostringstream out;
    ASSERT_EQ(cmd_train(options, out), kExitOk);
    const std::string log = read_file(config.output_dir / "train_log.jsonl");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);

    ASSERT_EQ(cmd_rerank(options, out), kExitOk);
    const auto reranked = load_run(config.output_dir / "rerank.run");
    EXPECT_EQ(reranked.size(), 9u);

    ASSERT_EQ(cmd_score(options, out), kExitOk);
    EXPECT_FALSE(read_file(config.output_dir / "scores.tsv").empty());

    options.query_set = "validation";
    ASSERT_EQ(cmd_pairacc(options, out), kExitOk);
    const auto report = nlohmann::json::parse(read_file(config.output_dir / "pairacc.json"));
    double volume = 0.0;
    for (const auto& pair : report["pairs"]) {
        volume += pair["volume"].get<double>();
    }
    EXPECT_NEAR(volume, 1.0, 1e-12);

    options.query_set = "all";
    options.run = config.output_dir / "rerank.run";
    ASSERT_EQ(cmd_eval(options, out), kExitOk);
    EXPECT_TRUE(std::filesystem::exists(config.output_dir / "metrics.jsonl"));
}

TEST(Commands, IdentityScorerLeavesMetricsUnchanged) {
    // A checkpoint whose every weight is zero scores each document identically.
    TempDir dir;
    RunConfig config = synthesize(dir);
    auto params = init_params<float>(config.model);
    for (auto& group : params.groups) {
        group.value.fill(0.0f);
    }
    save_params(params, config.model, dir / "zero.pacrr");
    CommandOptions options;
    options.config = config;
    options.checkpoint = dir / "zero.pacrr";
    std::ostringstream out;
    ASSERT_EQ(cmd_rerank(options, out), kExitOk);
    EXPECT_EQ(read_file(config.output_dir / "metrics_before.jsonl"),
              read_file(config.output_dir / "metrics_after.jsonl"));
    const auto original = load_run(config.run);
    const auto reranked = load_run(config.output_dir / "rerank.run");
    for (std::size_t q = 0; q < original.size(); ++q) {
        ASSERT_EQ(original[q].entries.size(), reranked[q].entries.size());
        for (std::size_t i = 0; i < original[q].entries.size(); ++i) {
            EXPECT_EQ(original[q].entries[i].doc_id, reranked[q].entries[i].doc_id);
        }
    }
}

TEST(Commands, MissingInputFailsBeforeWritingOutput) {
    TempDir dir;
    RunConfig config = synthesize(dir);
    config.embeddings = dir / "nowhere.txt";
    config.output_dir = dir / "fresh";
    CommandOptions options;
    options.config = config;
    std::ostringstream out;
    EXPECT_THROW(cmd_train(options, out), ConfigError);
    EXPECT_FALSE(std::filesystem::exists(dir / "fresh"));

    options.config.embeddings = dir / "data" / "embeddings.txt";
    EXPECT_THROW(cmd_rerank(options, out), ConfigError);  // no checkpoint yet
    EXPECT_FALSE(std::filesystem::exists(dir / "fresh"));

    options.config.qrels = dir / "data" / "corrupt.txt";
    std::ofstream(options.config.qrels) << "q001 0 d00001 9\n";
    EXPECT_THROW(cmd_train(options, out), DataError);
    EXPECT_FALSE(std::filesystem::exists(dir / "fresh"));
}

TEST(Commands, GradcheckReportListsOps) {
    TempDir dir;
    CommandOptions options;
    options.config = parse_run_config("l_q = 4\nl_d = 12\nn_f = 4\n");
    options.config.output_dir = dir.path();
    std::ostringstream first;
    std::ostringstream second;
    EXPECT_EQ(cmd_gradcheck(options, first), kExitOk);
    EXPECT_EQ(cmd_gradcheck(options, second), kExitOk);
    EXPECT_EQ(first.str(), second.str());
    for (const auto* op : {"conv2d", "max_over_filters", "kmax_per_row", "softmax", "recurrent_sequence",
                           "hinge_loss", "score[firstk]", "score[kwindow]"}) {
        EXPECT_NE(first.str().find(op), std::string::npos) << op;
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "gradcheck.json"));
}
