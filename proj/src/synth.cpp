#include "pacrr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "pacrr/error.hpp"
#include "pacrr/rng.hpp"

namespace pacrr {

void SynthOptions::validate() const {
    const std::size_t queries = train_queries + validation_queries + test_queries;
    if (queries == 0 || docs == 0) {
        throw ConfigError("synthetic data needs at least one query and one document");
    }
    if (vocab_size < 4 * queries + 10) {
        throw ConfigError(fmt::format("vocab_size {} too small for {} queries", vocab_size, queries));
    }
    // Up to 12 planted terms must fit two positions apart.
    if (dim == 0 || min_doc_len < 24 || max_doc_len < min_doc_len) {
        throw ConfigError("need dim >= 1 and 24 <= min_doc_len <= max_doc_len");
    }
    if (rel_share < 0.0 || hrel_share < 0.0 || rel_share + hrel_share > 1.0) {
        throw ConfigError("grade shares must be non-negative and sum to at most 1");
    }
}

int planted_grade(std::span<const std::string> query, std::span<const std::string> doc) {
    for (std::size_t j = 0; j + 1 < doc.size(); ++j) {
        for (std::size_t i = 0; i + 1 < query.size(); ++i) {
            if (doc[j] == query[i] && doc[j + 1] == query[i + 1]) {
                return 2;
            }
        }
    }
    std::set<std::string> matched;
    for (const auto& token : doc) {
        if (std::find(query.begin(), query.end(), token) != query.end()) {
            matched.insert(token);
        }
    }
    return matched.size() >= 2 ? 1 : 0;
}

std::size_t unigram_overlap(std::span<const std::string> query, std::span<const std::string> doc) {
    return static_cast<std::size_t>(std::count_if(doc.begin(), doc.end(), [&](const std::string& token) {
        return std::find(query.begin(), query.end(), token) != query.end();
    }));
}

namespace {

// Positions at least two apart, so planted terms never form a bigram.
std::vector<std::size_t> spread_positions(Rng& rng, std::size_t count, std::size_t length) {
    std::vector<std::size_t> chosen;
    while (chosen.size() < count) {
        const std::size_t p = uniform_index(rng, length);
        const bool clear = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t q) {
            return (p > q ? p - q : q - p) >= 2;
        });
        if (clear) {
            chosen.push_back(p);
        }
    }
    return chosen;
}

std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t count, std::size_t population) {
    std::vector<std::size_t> all(population);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(all[i], all[i + uniform_index(rng, population - i)]);
    }
    all.resize(count);
    return all;
}

}  // namespace

SyntheticData generate_synthetic(const SynthOptions& options) {
    options.validate();
    Rng rng(options.seed);
    SyntheticData data;

    std::vector<std::string> vocab(options.vocab_size);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        vocab[w] = fmt::format("w{:05d}", w);
        std::vector<double> vector(options.dim);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (auto& v : vector) {
                v = uniform_real(rng, -1.0, 1.0);
                norm += v * v;
            }
        }
        norm = std::sqrt(norm);
        for (auto& v : vector) {
            v /= norm;
        }
        data.embeddings.insert(vocab[w], std::move(vector));
    }

    const std::size_t query_count = options.train_queries + options.validation_queries + options.test_queries;
    std::vector<std::size_t> free_words(vocab.size());
    std::iota(free_words.begin(), free_words.end(), 0);
    for (std::size_t q = 0; q < query_count; ++q) {
        Query query{fmt::format("q{:03d}", q + 1), {}};
        const std::size_t length = 2 + uniform_index(rng, 3);
        for (const std::size_t pick : sample_distinct(rng, length, free_words.size())) {
            query.tokens.push_back(vocab[free_words[pick]]);
        }
        for (const auto& token : query.tokens) {
            const auto word = static_cast<std::size_t>(std::stoul(token.substr(1)));
            free_words.erase(std::find(free_words.begin(), free_words.end(), word));
        }
        data.queries.push_back(std::move(query));
        auto& split = q < options.train_queries                                  ? data.train_ids
                      : q < options.train_queries + options.validation_queries ? data.validation_ids
                                                                                : data.test_ids;
        split.push_back(data.queries.back().query_id);
    }
    const std::vector<std::size_t> background = free_words;

    std::vector<std::vector<std::size_t>> docs_of_query(query_count);
    for (std::size_t d = 0; d < options.docs; ++d) {
        const std::size_t q = d % query_count;
        const auto& terms = data.queries[q].tokens;
        const std::size_t length =
            options.min_doc_len + uniform_index(rng, options.max_doc_len - options.min_doc_len + 1);
        TokenizedDocument doc{fmt::format("d{:05d}", d + 1), std::vector<std::string>(length)};
        for (auto& token : doc.tokens) {
            token = vocab[background[uniform_index(rng, background.size())]];
        }

        const double draw = uniform_unit(rng);
        if (draw < options.hrel_share) {
            const std::size_t first = uniform_index(rng, terms.size() - 1);
            const std::size_t at = uniform_index(rng, length - 1);
            doc.tokens[at] = terms[first];
            doc.tokens[at + 1] = terms[first + 1];
        } else if (draw < options.hrel_share + options.rel_share) {
            // Several distinct terms, each repeated, scattered apart. Inflates
            // overlap counts relative to a single planted bigram.
            const std::size_t distinct = 2 + uniform_index(rng, terms.size() - 1);
            std::vector<std::string> planted;
            for (const std::size_t t : sample_distinct(rng, distinct, terms.size())) {
                const std::size_t repeats = 1 + uniform_index(rng, 3);
                planted.insert(planted.end(), repeats, terms[t]);
            }
            const auto positions = spread_positions(rng, planted.size(), length);
            for (std::size_t i = 0; i < planted.size(); ++i) {
                doc.tokens[positions[i]] = planted[i];
            }
        } else if (uniform_unit(rng) < 0.7) {
            const std::string& term = terms[uniform_index(rng, terms.size())];
            const std::size_t repeats = 1 + uniform_index(rng, 5);
            for (const std::size_t p : spread_positions(rng, repeats, length)) {
                doc.tokens[p] = term;
            }
        }

        data.qrels.add(data.queries[q].query_id, doc.doc_id, planted_grade(terms, doc.tokens));
        docs_of_query[q].push_back(d);
        data.corpus.push_back(std::move(doc));
    }

    for (std::size_t q = 0; q < query_count; ++q) {
        const auto& terms = data.queries[q].tokens;
        std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (overlap, doc index)
        for (const std::size_t d : docs_of_query[q]) {
            ranked.emplace_back(unigram_overlap(terms, data.corpus[d].tokens), d);
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        RunRanking run{data.queries[q].query_id, {}};
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            run.entries.push_back(
                RunEntry{data.corpus[ranked[r].second].doc_id, static_cast<int>(r + 1), static_cast<double>(ranked[r].first)});
        }
        data.baseline.push_back(std::move(run));
    }
    return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(data.corpus, dir / "corpus.jsonl");
    save_queries(data.queries, dir / "queries.jsonl");
    save_qrels(data.qrels, dir / "qrels.txt");
    save_run(data.baseline, dir / "run.txt", "overlap");
    save_embeddings(data.embeddings, dir / "embeddings.txt");
    std::ofstream split(dir / "split.txt", std::ios::binary | std::ios::trunc);
    if (!split) {
        throw DataError(fmt::format("cannot write {}", (dir / "split.txt").string()));
    }
    for (const auto& id : data.train_ids) {
        split << id << " train\n";
    }
    for (const auto& id : data.validation_ids) {
        split << id << " validation\n";
    }
    for (const auto& id : data.test_ids) {
        split << id << " test\n";
    }
}

}  // namespace pacrr
