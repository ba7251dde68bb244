#include "pacrr/config_file.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "pacrr/corpus.hpp"
#include "pacrr/error.hpp"

namespace pacrr {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::map<std::string, Setter> setters(const std::filesystem::path& base_dir) {
    auto path = [base_dir](std::filesystem::path RunConfig::*member) {
        return [base_dir, member](RunConfig& c, const std::string& v) {
            std::filesystem::path p(v);
            c.*member = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        };
    };
    auto size = [](std::size_t RunConfig::*member, const char* key) {
        return [member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<std::size_t>(key, v); };
    };
    auto model_size = [](std::size_t PacrrConfig::*member, const char* key) {
        return [member, key](RunConfig& c, const std::string& v) {
            c.model.*member = parse_number<std::size_t>(key, v);
        };
    };
    auto synth_size = [](std::size_t SynthOptions::*member, const char* key) {
        return [member, key](RunConfig& c, const std::string& v) {
            c.synth.*member = parse_number<std::size_t>(key, v);
        };
    };
    auto synth_real = [](double SynthOptions::*member, const char* key) {
        return [member, key](RunConfig& c, const std::string& v) { c.synth.*member = parse_number<double>(key, v); };
    };
    return {
        {"corpus", path(&RunConfig::corpus)},
        {"queries", path(&RunConfig::queries)},
        {"qrels", path(&RunConfig::qrels)},
        {"embeddings", path(&RunConfig::embeddings)},
        {"run", path(&RunConfig::run)},
        {"split", path(&RunConfig::split)},
        {"output_dir", path(&RunConfig::output_dir)},
        {"l_q", model_size(&PacrrConfig::l_q, "l_q")},
        {"l_d", model_size(&PacrrConfig::l_d, "l_d")},
        {"l_g", model_size(&PacrrConfig::l_g, "l_g")},
        {"n_f", model_size(&PacrrConfig::n_f, "n_f")},
        {"n_s", model_size(&PacrrConfig::n_s, "n_s")},
        {"mode", [](RunConfig& c, const std::string& v) { c.model.mode = parse_distill_mode(v); }},
        {"learning_rate",
         [](RunConfig& c, const std::string& v) { c.model.learning_rate = parse_number<double>("learning_rate", v); }},
        {"seed",
         [](RunConfig& c, const std::string& v) {
             c.model.seed = parse_number<std::uint64_t>("seed", v);
             c.synth.seed = c.model.seed;
         }},
        {"iterations", size(&RunConfig::iterations, "iterations")},
        {"batches_per_iteration", size(&RunConfig::batches_per_iteration, "batches_per_iteration")},
        {"batch_size", size(&RunConfig::batch_size, "batch_size")},
        {"k", size(&RunConfig::k, "k")},
        {"g_max", [](RunConfig& c, const std::string& v) { c.g_max = parse_number<int>("g_max", v); }},
        {"grade_map",
         [](RunConfig& c, const std::string& v) {
             parse_grade_map(v);
             c.grade_map = v;
         }},
        {"synth_docs", synth_size(&SynthOptions::docs, "synth_docs")},
        {"synth_train_queries", synth_size(&SynthOptions::train_queries, "synth_train_queries")},
        {"synth_validation_queries", synth_size(&SynthOptions::validation_queries, "synth_validation_queries")},
        {"synth_test_queries", synth_size(&SynthOptions::test_queries, "synth_test_queries")},
        {"synth_vocab_size", synth_size(&SynthOptions::vocab_size, "synth_vocab_size")},
        {"synth_dim", synth_size(&SynthOptions::dim, "synth_dim")},
        {"synth_min_doc_len", synth_size(&SynthOptions::min_doc_len, "synth_min_doc_len")},
        {"synth_max_doc_len", synth_size(&SynthOptions::max_doc_len, "synth_max_doc_len")},
        {"synth_rel_share", synth_real(&SynthOptions::rel_share, "synth_rel_share")},
        {"synth_hrel_share", synth_real(&SynthOptions::hrel_share, "synth_hrel_share")},
    };
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    RunConfig config;
    const auto table = setters(base_dir);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto setter = table.find(key);
        if (setter == table.end()) {
            throw ConfigError(fmt::format("config line {}: unknown key '{}'", line_no, key));
        }
        try {
            setter->second(config, value);
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
        }
    }
    config.model.validate();
    if (config.k == 0 || config.g_max < 1) {
        throw ConfigError("k and g_max must be at least 1");
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.parent_path());
}

std::string render_run_config(const RunConfig& c) {
    std::string out;
    auto put = [&out](const char* key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    auto put_path = [&](const char* key, const std::filesystem::path& p) {
        if (!p.empty()) {
            put(key, p.generic_string());
        }
    };
    put_path("corpus", c.corpus);
    put_path("queries", c.queries);
    put_path("qrels", c.qrels);
    put_path("embeddings", c.embeddings);
    put_path("run", c.run);
    put_path("split", c.split);
    put_path("output_dir", c.output_dir);
    put("l_q", c.model.l_q);
    put("l_d", c.model.l_d);
    put("l_g", c.model.l_g);
    put("n_f", c.model.n_f);
    put("n_s", c.model.n_s);
    put("mode", to_string(c.model.mode));
    put("learning_rate", c.model.learning_rate);
    put("seed", c.model.seed);
    put("iterations", c.iterations);
    put("batches_per_iteration", c.batches_per_iteration);
    put("batch_size", c.batch_size);
    put("k", c.k);
    put("g_max", c.g_max);
    put("grade_map", c.grade_map);
    put("synth_docs", c.synth.docs);
    put("synth_train_queries", c.synth.train_queries);
    put("synth_validation_queries", c.synth.validation_queries);
    put("synth_test_queries", c.synth.test_queries);
    put("synth_vocab_size", c.synth.vocab_size);
    put("synth_dim", c.synth.dim);
    put("synth_min_doc_len", c.synth.min_doc_len);
    put("synth_max_doc_len", c.synth.max_doc_len);
    put("synth_rel_share", c.synth.rel_share);
    put("synth_hrel_share", c.synth.hrel_share);
    return out;
}

}  // namespace pacrr
