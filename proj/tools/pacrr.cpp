#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pacrr/app.hpp"
#include "pacrr/error.hpp"

int main(int argc, char** argv) {
    using namespace pacrr;

    CLI::App app{"PACRR neural re-ranking: train, score, re-rank and evaluate"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool verbose = false;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--out", out_dir, "overrides output_dir");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    CommandOptions options;
    auto add_checkpoint = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", options.checkpoint, "model file (default <output_dir>/best.pacrr)");
    };
    auto add_queries = [&](CLI::App* sub) {
        sub->add_option("--queries", options.query_set, "all, train, validation or test (needs split)")
            ->check(CLI::IsMember({"all", "train", "validation", "test"}));
    };

    auto* train = app.add_subcommand("train", "train on the split's train queries, select on validation");
    auto* rerank = app.add_subcommand("rerank", "re-rank the run and report metrics before and after");
    add_checkpoint(rerank);
    add_queries(rerank);
    auto* score = app.add_subcommand("score", "score every run document");
    add_checkpoint(score);
    add_queries(score);
    auto* eval = app.add_subcommand("eval", "ERR@k and nDCG@k of a run");
    eval->add_option("--run", options.run, "run file (default: config run)");
    add_queries(eval);
    auto* pairacc = app.add_subcommand("pairacc", "pairwise accuracy per merged label pair");
    add_checkpoint(pairacc);
    add_queries(pairacc);
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark with planted relevance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        options.config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) {
            options.config.model.seed = *seed;
            options.config.synth.seed = *seed;
        }
        if (!out_dir.empty()) {
            options.config.output_dir = out_dir;
        }
        options.config.model.validate();

        if (*train) {
            return cmd_train(options, std::cout);
        }
        if (*rerank) {
            return cmd_rerank(options, std::cout);
        }
        if (*score) {
            return cmd_score(options, std::cout);
        }
        if (*eval) {
            return cmd_eval(options, std::cout);
        }
        if (*pairacc) {
            return cmd_pairacc(options, std::cout);
        }
        if (*gradcheck) {
            return cmd_gradcheck(options, std::cout);
        }
        if (*synth) {
            return cmd_synth(options, std::cout);
        }
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitData;
    }
    return kExitConfig;
}
