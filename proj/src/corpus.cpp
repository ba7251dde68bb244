#include "pacrr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pacrr/error.hpp"

namespace pacrr {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open {}", path.string()));
    }
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write {}", path.string()));
    }
    return out;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream stream(line);
    std::string field;
    while (stream >> field) {
        fields.push_back(std::move(field));
    }
    return fields;
}

template <typename Number>
std::optional<Number> parse_number(const std::string& text) {
    Number value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && text.front() == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        return std::nullopt;
    }
    return value;
}

std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(std::begin(buffer), std::end(buffer), value);
    return std::string(buffer, ptr);
}

std::string& record_id(TokenizedDocument& doc) { return doc.doc_id; }
std::string& record_id(Query& query) { return query.query_id; }

// Reads `{"<id_field>": "...", "tokens": [...]}` records, one per line.
template <typename Record>
std::vector<Record> load_token_records(const std::filesystem::path& path, const char* id_field) {
    auto in = open_input(path);
    std::vector<Record> records;
    std::unordered_set<std::string> seen;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (blank(line)) {
            continue;
        }
        Record record;
        try {
            const json parsed = json::parse(line);
            std::string& id = record_id(record);
            id = parsed.at(id_field).get<std::string>();
            record.tokens = parsed.at("tokens").get<std::vector<std::string>>();
            if (id.empty()) {
                throw DataError("empty id");
            }
        } catch (const std::exception& e) {
            throw DataError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
        }
        const std::string& id = record_id(record);
        if (!seen.insert(id).second) {
            throw DataError(fmt::format("{}:{}: duplicate {} '{}'", path.string(), line_no, id_field, id));
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace

bool is_canonical_grade(int grade) {
    switch (grade) {
        case -2:
        case 0:
        case 1:
        case 2:
        case 3:
        case 4:
            return true;
        default:
            return false;
    }
}

void JudgmentSet::add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (!is_canonical_grade(grade)) {
        throw DataError(fmt::format("grade {} for ({}, {}) is not canonical", grade, query_id, doc_id));
    }
    auto [it, inserted] = entries_[query_id].emplace(doc_id, grade);
    if (!inserted) {
        throw DataError(fmt::format("duplicate judgment for ({}, {})", query_id, doc_id));
    }
    ++size_;
}

std::optional<int> JudgmentSet::grade(const std::string& query_id, const std::string& doc_id) const {
    const auto query = entries_.find(query_id);
    if (query == entries_.end()) {
        return std::nullopt;
    }
    const auto doc = query->second.find(doc_id);
    if (doc == query->second.end()) {
        return std::nullopt;
    }
    return doc->second;
}

const std::map<std::string, int>& JudgmentSet::for_query(const std::string& query_id) const {
    static const std::map<std::string, int> empty;
    const auto it = entries_.find(query_id);
    return it == entries_.end() ? empty : it->second;
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> vector) {
    if (dim_ == 0) {
        dim_ = vector.size();
    }
    if (vector.size() != dim_ || dim_ == 0) {
        throw DataError(fmt::format("embedding for '{}' has length {}, expected {}", token, vector.size(), dim_));
    }
    vectors_[token] = std::move(vector);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
    const auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
}

IdfTable::IdfTable(std::size_t doc_count, std::unordered_map<std::string, std::size_t> df)
    : doc_count_(doc_count), df_(std::move(df)) {
    if (doc_count_ == 0) {
        throw DataError("idf requires a non-empty corpus");
    }
    for (const auto& [token, count] : df_) {
        if (count > doc_count_) {
            throw DataError(fmt::format("df('{}') = {} exceeds N = {}", token, count, doc_count_));
        }
    }
}

std::size_t IdfTable::df(const std::string& token) const {
    const auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
}

double IdfTable::idf(const std::string& token) const {
    return std::log(static_cast<double>(doc_count_ + 1) / static_cast<double>(df(token) + 1));
}

std::vector<double> IdfTable::for_tokens(std::span<const std::string> tokens) const {
    std::vector<double> values;
    values.reserve(tokens.size());
    for (const auto& token : tokens) {
        values.push_back(idf(token));
    }
    return values;
}

GradeMap identity_grade_map() {
    return {{-2, -2}, {0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
}

GradeMap parse_grade_map(const std::string& text) {
    GradeMap map;
    std::istringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        const auto raw = colon == std::string::npos ? std::nullopt : parse_number<int>(item.substr(0, colon));
        const auto canonical = colon == std::string::npos ? std::nullopt : parse_number<int>(item.substr(colon + 1));
        if (!raw || !canonical || !is_canonical_grade(*canonical)) {
            throw ConfigError(fmt::format("bad grade map entry '{}'", item));
        }
        map[*raw] = *canonical;
    }
    if (map.empty()) {
        throw ConfigError("grade map is empty");
    }
    return map;
}

std::vector<TokenizedDocument> load_corpus(const std::filesystem::path& path) {
    return load_token_records<TokenizedDocument>(path, "doc_id");
}

bool truncate_query(Query& query, std::size_t max_len) {
    if (max_len == 0 || query.tokens.size() <= max_len) {
        return false;
    }
    query.tokens.resize(max_len);
    return true;
}

std::vector<Query> load_queries(const std::filesystem::path& path, std::size_t max_query_len) {
    auto queries = load_token_records<Query>(path, "query_id");
    for (auto& query : queries) {
        if (query.tokens.empty()) {
            throw DataError(fmt::format("{}: query '{}' has no tokens", path.string(), query.query_id));
        }
        const std::size_t original = query.tokens.size();
        if (truncate_query(query, max_query_len)) {
            spdlog::warn("query '{}' truncated from {} to {} tokens", query.query_id, original, max_query_len);
        }
    }
    return queries;
}

JudgmentSet load_qrels(const std::filesystem::path& path, const GradeMap& grade_map) {
    auto in = open_input(path);
    JudgmentSet qrels;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (blank(line)) {
            continue;
        }
        const auto fields = split_ws(line);
        const auto raw = fields.size() == 4 ? parse_number<int>(fields[3]) : std::nullopt;
        if (!raw) {
            throw DataError(fmt::format("{}:{}: expected 'query_id 0 doc_id grade'", path.string(), line_no));
        }
        const auto mapped = grade_map.find(*raw);
        if (mapped == grade_map.end()) {
            throw DataError(fmt::format("{}:{}: raw grade {} has no mapping", path.string(), line_no, *raw));
        }
        try {
            qrels.add(fields[0], fields[2], mapped->second);
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return qrels;
}

std::vector<RunRanking> load_run(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<RunRanking> runs;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (blank(line)) {
            continue;
        }
        const auto fields = split_ws(line);
        if (fields.size() != 6) {
            throw DataError(fmt::format("{}:{}: expected 'query_id Q0 doc_id rank score tag'", path.string(), line_no));
        }
        const auto rank = parse_number<int>(fields[3]);
        const auto score = parse_number<double>(fields[4]);
        if (!rank || !score || *rank < 1) {
            throw DataError(fmt::format("{}:{}: bad rank or score", path.string(), line_no));
        }
        auto [it, inserted] = index.emplace(fields[0], runs.size());
        if (inserted) {
            runs.push_back(RunRanking{fields[0], {}});
        }
        runs[it->second].entries.push_back(RunEntry{fields[2], *rank, *score});
    }
    for (auto& run : runs) {
        std::stable_sort(run.entries.begin(), run.entries.end(),
                         [](const RunEntry& a, const RunEntry& b) { return a.original_rank < b.original_rank; });
        std::set<std::string> docs;
        for (std::size_t i = 0; i < run.entries.size(); ++i) {
            if (i > 0 && run.entries[i].original_rank == run.entries[i - 1].original_rank) {
                throw DataError(fmt::format("{}: query '{}' repeats rank {}", path.string(), run.query_id,
                                            run.entries[i].original_rank));
            }
            if (!docs.insert(run.entries[i].doc_id).second) {
                throw DataError(fmt::format("{}: query '{}' lists doc '{}' twice", path.string(), run.query_id,
                                            run.entries[i].doc_id));
            }
        }
    }
    return runs;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    auto in = open_input(path);
    EmbeddingTable table;
    std::string line;
    bool first = true;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (blank(line)) {
            continue;
        }
        const auto fields = split_ws(line);
        if (first) {
            first = false;
            if (fields.size() == 2 && parse_number<std::size_t>(fields[0]) && parse_number<std::size_t>(fields[1])) {
                table = EmbeddingTable(*parse_number<std::size_t>(fields[1]));
                continue;
            }
        }
        if (fields.size() < 2) {
            throw DataError(fmt::format("{}:{}: expected a token followed by its vector", path.string(), line_no));
        }
        std::vector<double> vector;
        vector.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto value = parse_number<double>(fields[i]);
            if (!value || !std::isfinite(*value)) {
                throw DataError(fmt::format("{}:{}: bad component '{}'", path.string(), line_no, fields[i]));
            }
            vector.push_back(*value);
        }
        try {
            table.insert(fields[0], std::move(vector));
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return table;
}

IdfTable compute_idf(std::span<const TokenizedDocument> corpus) {
    if (corpus.empty()) {
        throw DataError("idf requires a non-empty corpus");
    }
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::unordered_set<std::string> unique(doc.tokens.begin(), doc.tokens.end());
        for (const auto& token : unique) {
            ++df[token];
        }
    }
    return IdfTable(corpus.size(), std::move(df));
}

void save_corpus(std::span<const TokenizedDocument> corpus, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& doc : corpus) {
        out << json{{"doc_id", doc.doc_id}, {"tokens", doc.tokens}}.dump() << '\n';
    }
}

void save_queries(std::span<const Query> queries, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& query : queries) {
        out << json{{"query_id", query.query_id}, {"tokens", query.tokens}}.dump() << '\n';
    }
}

void save_qrels(const JudgmentSet& qrels, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& [query_id, docs] : qrels.by_query()) {
        for (const auto& [doc_id, grade] : docs) {
            out << query_id << " 0 " << doc_id << ' ' << grade << '\n';
        }
    }
}

void save_run(std::span<const RunRanking> runs, const std::filesystem::path& path, const std::string& tag) {
    auto out = open_output(path);
    for (const auto& run : runs) {
        for (const auto& entry : run.entries) {
            out << run.query_id << " Q0 " << entry.doc_id << ' ' << entry.original_rank << ' '
                << format_double(entry.original_score) << ' ' << tag << '\n';
        }
    }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    auto out = open_output(path);
    std::vector<const std::string*> tokens;
    tokens.reserve(table.size());
    for (const auto& [token, vector] : table.vectors()) {
        tokens.push_back(&token);
    }
    std::sort(tokens.begin(), tokens.end(), [](const auto* a, const auto* b) { return *a < *b; });
    out << table.size() << ' ' << table.dim() << '\n';
    for (const auto* token : tokens) {
        out << *token;
        for (double value : *table.find(*token)) {
            out << ' ' << format_double(value);
        }
        out << '\n';
    }
}

}  // namespace pacrr
