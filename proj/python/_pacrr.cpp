#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "pacrr/app.hpp"
#include "pacrr/error.hpp"
#include "pacrr/eval.hpp"
#include "pacrr/gradcheck.hpp"
#include "pacrr/model.hpp"
#include "pacrr/neural.hpp"
#include "pacrr/simmat.hpp"
#include "pacrr/synth.hpp"

namespace py = pybind11;
using namespace pacrr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) {
        throw std::invalid_argument("expected a 2-d array");
    }
    Matrix m(a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), m.values.begin());
    return m;
}

Array to_array(const Matrix& m) {
    Array a({m.rows, m.cols});
    std::copy(m.values.begin(), m.values.end(), a.mutable_data());
    return a;
}

PacrrConfig config_from_dict(const py::dict& d) {
    PacrrConfig c;
    for (const auto& [key, value] : d) {
        const auto k = key.cast<std::string>();
        if (k == "l_q") c.l_q = value.cast<std::size_t>();
        else if (k == "l_d") c.l_d = value.cast<std::size_t>();
        else if (k == "l_g") c.l_g = value.cast<std::size_t>();
        else if (k == "n_f") c.n_f = value.cast<std::size_t>();
        else if (k == "n_s") c.n_s = value.cast<std::size_t>();
        else if (k == "mode") c.mode = parse_distill_mode(value.cast<std::string>());
        else if (k == "learning_rate") c.learning_rate = value.cast<double>();
        else if (k == "seed") c.seed = value.cast<std::uint64_t>();
        else throw ConfigError("unknown config key " + k);
    }
    c.validate();
    return c;
}

py::dict config_to_dict(const PacrrConfig& c) {
    py::dict d;
    d["l_q"] = c.l_q;
    d["l_d"] = c.l_d;
    d["l_g"] = c.l_g;
    d["n_f"] = c.n_f;
    d["n_s"] = c.n_s;
    d["mode"] = to_string(c.mode);
    d["learning_rate"] = c.learning_rate;
    d["seed"] = c.seed;
    return d;
}

struct Model {
    PacrrConfig config;
    PacrrParams<float> params;

    double score_matrix(const Array& sim, const std::vector<double>& idf) const {
        SimilarityMatrix s{"q", "d", to_matrix(sim)};
        return score(config, params, distill(s, config.mode, config.l_g, config.l_q, config.l_d), idf);
    }
};

int run(int (*command)(const CommandOptions&, std::ostream&), const std::filesystem::path& config_path,
        const std::string& query_set, py::object out) {
    CommandOptions options;
    options.config = load_run_config(config_path);
    options.query_set = query_set;
    std::ostringstream text;
    const int code = command(options, text);
    if (!out.is_none()) {
        out.attr("write")(text.str());
    }
    return code;
}

}  // namespace

PYBIND11_MODULE(_pacrr, m) {
    m.doc() = "PACRR re-ranking core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    m.def("cosine", &cosine, py::arg("a"), py::arg("b"));
    m.def(
        "sim_matrix",
        [](const std::vector<std::string>& query, const std::vector<std::string>& doc,
           const std::map<std::string, std::vector<double>>& embeddings) {
            EmbeddingTable table;
            for (const auto& [token, vector] : embeddings) {
                table.insert(token, vector);
            }
            return to_array(build_sim_matrix(Query{"q", query}, TokenizedDocument{"d", doc}, table).values);
        },
        py::arg("query"), py::arg("doc"), py::arg("embeddings"));
    m.def(
        "distill_firstk", [](const Array& sim, std::size_t l_q, std::size_t l_d) {
            return to_array(distill_firstk(to_matrix(sim), l_q, l_d));
        },
        py::arg("sim"), py::arg("l_q"), py::arg("l_d"));
    m.def(
        "distill_kwindow", [](const Array& sim, std::size_t n, std::size_t l_q, std::size_t l_d) {
            return to_array(distill_kwindow(to_matrix(sim), n, l_q, l_d));
        },
        py::arg("sim"), py::arg("n"), py::arg("l_q"), py::arg("l_d"));
    m.def(
        "kwindow_selection", [](const Array& sim, std::size_t n, std::size_t l_d) {
            return kwindow_selection(to_matrix(sim), n, l_d);
        },
        py::arg("sim"), py::arg("n"), py::arg("l_d"));
    m.def(
        "kmax_per_row",
        [](const Array& input, std::size_t k) {
            const Matrix in = to_matrix(input);
            const auto out = kmax_per_row(Tensor<double>({in.rows, in.cols}, in.values), k);
            Matrix result(in.rows, k);
            std::copy(out.values.values().begin(), out.values.values().end(), result.values.begin());
            return to_array(result);
        },
        py::arg("input"), py::arg("k"));
    m.def("hinge_loss", [](double pos, double neg) { return hinge_loss<double>(pos, neg); }, py::arg("pos"),
          py::arg("neg"));

    m.def(
        "err_at_k", [](const std::vector<int>& grades, std::size_t k, int g_max) { return err_at_k(grades, k, g_max); },
        py::arg("grades"), py::arg("k"), py::arg("g_max") = kDefaultMaxGrade);
    m.def(
        "ndcg_at_k",
        [](const std::vector<int>& grades, const std::vector<int>& judged, std::size_t k) {
            return ndcg_at_k(grades, judged, k);
        },
        py::arg("grades"), py::arg("judged"), py::arg("k"));
    m.def(
        "pair_accuracy",
        [](const ScoreTable& scores, const std::map<std::string, std::map<std::string, int>>& qrels) {
            JudgmentSet judgments;
            for (const auto& [query_id, docs] : qrels) {
                for (const auto& [doc_id, grade] : docs) {
                    judgments.add(query_id, doc_id, grade);
                }
            }
            return py::module_::import("json").attr("loads")(to_json(pair_accuracy(scores, judgments)).dump());
        },
        py::arg("scores"), py::arg("qrels"));

    py::class_<Model>(m, "Model")
        .def_static(
            "init", [](const py::dict& config) {
                const auto c = config_from_dict(config);
                return Model{c, init_params<float>(c)};
            },
            py::arg("config"))
        .def_static(
            "load", [](const std::filesystem::path& path) {
                auto checkpoint = load_params(path);
                return Model{checkpoint.config, std::move(checkpoint.params)};
            },
            py::arg("path"))
        .def("save", [](const Model& model, const std::filesystem::path& path) {
            save_params(model.params, model.config, path);
        })
        .def_property_readonly("config", [](const Model& model) { return config_to_dict(model.config); })
        .def_property_readonly("parameter_count", [](const Model& model) { return model.params.parameter_count(); })
        .def("score", &Model::score_matrix, py::arg("sim"), py::arg("idf"),
             "rel(q, d) for a |q| x |d| similarity matrix and the query's idf values");

    m.def(
        "gradcheck",
        [](const py::dict& config, std::uint64_t seed) {
            py::list out;
            for (const auto& r : run_gradient_checks(config_from_dict(config), seed)) {
                py::dict d;
                d["name"] = r.name;
                d["max_relative_error"] = r.max_relative_error;
                d["checked"] = r.checked;
                d["excluded"] = r.excluded;
                out.append(d);
            }
            return out;
        },
        py::arg("config"), py::arg("seed") = 1);

    m.def(
        "synth",
        [](const std::filesystem::path& out_dir, std::uint64_t seed, std::size_t docs, std::size_t train,
           std::size_t validation) {
            SynthOptions options;
            options.seed = seed;
            options.docs = docs;
            options.train_queries = train;
            options.validation_queries = validation;
            write_synthetic(generate_synthetic(options), out_dir);
        },
        py::arg("out_dir"), py::arg("seed") = 1, py::arg("docs") = 500, py::arg("train") = 30,
        py::arg("validation") = 10);

    m.def("train", [](const std::filesystem::path& config, py::object out) {
        return run(&cmd_train, config, "all", out);
    }, py::arg("config"), py::arg("out") = py::none());
    m.def("rerank", [](const std::filesystem::path& config, const std::string& queries, py::object out) {
        return run(&cmd_rerank, config, queries, out);
    }, py::arg("config"), py::arg("queries") = "all", py::arg("out") = py::none());
    m.def("pairacc", [](const std::filesystem::path& config, const std::string& queries, py::object out) {
        return run(&cmd_pairacc, config, queries, out);
    }, py::arg("config"), py::arg("queries") = "all", py::arg("out") = py::none());
    m.def("eval", [](const std::filesystem::path& config, const std::string& queries, py::object out) {
        return run(&cmd_eval, config, queries, out);
    }, py::arg("config"), py::arg("queries") = "all", py::arg("out") = py::none());
}
