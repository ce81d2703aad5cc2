#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qdren/checkpoint.hpp"
#include "qdren/cli.hpp"
#include "qdren/config_io.hpp"
#include "qdren/model_gradcheck.hpp"
#include "qdren/synth.hpp"
#include "qdren/training.hpp"

namespace py = pybind11;
using namespace qdren;

namespace {

ModelConfig config_from_dict(const py::dict& d) {
    const std::string text = py::module_::import("json").attr("dumps")(d).cast<std::string>();
    return config_from_json(nlohmann::json::parse(text));
}

py::dict config_to_dict(const ModelConfig& c) {
    return py::module_::import("json").attr("loads")(config_to_json(c).dump()).cast<py::dict>();
}

py::array_t<float> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<float> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::list report_rows(const TrainReport& r) {
    py::list rows;
    for (const auto& e : r.epochs) {
        py::dict row;
        row["epoch"] = e.epoch;
        row["train_loss"] = e.train_loss;
        row["val_loss"] = e.val_loss;
        row["val_acc"] = e.val_acc;
        row["seconds"] = e.seconds;
        rows.append(row);
    }
    return rows;
}

/// A model together with the vocabulary it was trained on.
class Trained {
public:
    Trained(Model model, Vocabulary vocab) : model_(std::move(model)), vocab_(std::move(vocab)) {}

    ModelInput input(const RawStory& s) const {
        return prepare_split(std::span(&s, 1), model_.config, model_.dims, vocab_).front();
    }

    py::dict evaluate(const std::vector<RawStory>& stories, std::size_t threads) const {
        const auto inputs = prepare_split(stories, model_.config, model_.dims, vocab_);
        const EvalResult r = qdren::evaluate(model_, inputs, threads);
        py::dict out;
        out["accuracy"] = r.accuracy;
        out["error"] = r.error;
        out["loss"] = r.loss;
        out["correct"] = r.correct;
        out["total"] = r.total;
        std::vector<std::string> predictions;
        for (TokenId id : r.predictions) predictions.push_back(vocab_.token(id));
        out["predictions"] = predictions;
        return out;
    }

    py::dict predict(const RawStory& s) const {
        const Prediction p = predict_story(model_, input(s));
        py::dict out;
        out["answer"] = vocab_.token(p.token);
        out["logits"] = to_numpy(p.logits);
        out["cross_entropy"] = p.cross_entropy;
        return out;
    }

    py::tuple gates(const RawStory& s) const {
        const GateTrace t = gate_trace(model_, input(s), vocab_);
        return py::make_tuple(to_numpy(t.gates), t.sentence_labels);
    }

    void save(const std::string& prefix) const { save_checkpoint(model_, vocab_, prefix); }

    py::dict config() const { return config_to_dict(model_.config); }
    const std::vector<std::string>& vocabulary() const { return vocab_.tokens(); }
    std::vector<std::string> answer_tokens() const {
        std::vector<std::string> out;
        for (TokenId id : model_.dims.answer_ids) out.push_back(vocab_.token(id));
        return out;
    }
    py::dict parameters() const {
        py::dict out;
        for (const auto& e : model_.params.entries()) out[py::str(e.name)] = to_numpy(e.value);
        return out;
    }

private:
    Model model_;
    Vocabulary vocab_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recurrent entity networks with question-dependent gates";

    static py::exception<Error> base_error(m, "QdrenError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(base_error.ptr(), e.what());
        }
    });

    py::class_<RawStory>(m, "Story")
        .def(py::init([](std::vector<std::vector<std::string>> sentences, std::vector<std::string> question,
                         std::string answer, std::vector<std::size_t> supporting, std::vector<std::string> candidates) {
                 return RawStory{std::move(sentences), std::move(question), std::move(answer), std::move(supporting),
                                 std::move(candidates)};
             }),
             py::arg("sentences"), py::arg("question"), py::arg("answer"), py::arg("supporting") = std::vector<std::size_t>{},
             py::arg("candidates") = std::vector<std::string>{})
        .def_readwrite("sentences", &RawStory::sentences)
        .def_readwrite("question", &RawStory::question)
        .def_readwrite("answer", &RawStory::answer)
        .def_readwrite("supporting", &RawStory::supporting)
        .def_readwrite("candidates", &RawStory::candidates)
        .def(py::self == py::self)
        .def("__repr__", [](const RawStory& s) {
            return "<Story " + std::to_string(s.sentences.size()) + " sentences, answer '" + s.answer + "'>";
        });

    m.def("gen_single_fact", &gen_single_fact, py::arg("seed"), py::arg("n"), py::arg("entities") = 5,
          py::arg("locations") = 6, py::arg("story_len") = 6, "Stories asking where a person last moved.");
    m.def("gen_entity_cloze", &gen_entity_cloze, py::arg("seed"), py::arg("n"), py::arg("entities") = 8,
          py::arg("window") = 5, "Anonymised cloze stories with candidate lists.");

    m.def(
        "parse_babi",
        [](const std::string& text) {
            std::istringstream in(text);
            return parse_babi(in);
        },
        py::arg("text"));
    m.def(
        "parse_babi_file", [](const std::string& path) { return parse_babi_file(path); }, py::arg("path"));
    m.def(
        "write_babi",
        [](const std::vector<RawStory>& stories) {
            std::ostringstream out;
            write_babi(out, stories);
            return out.str();
        },
        py::arg("stories"));

    m.def(
        "resolve_config", [](const py::dict& d) { return config_to_dict(config_from_dict(d)); }, py::arg("config"),
        "Fills defaults and validates; unknown keys raise.");

    py::class_<Trained>(m, "Model")
        .def("evaluate", &Trained::evaluate, py::arg("stories"), py::arg("threads") = 1)
        .def("predict", &Trained::predict, py::arg("story"))
        .def("gates", &Trained::gates, py::arg("story"), "Gate matrix [blocks x steps] and step labels.")
        .def("save", &Trained::save, py::arg("prefix"))
        .def_property_readonly("config", &Trained::config)
        .def_property_readonly("vocabulary", &Trained::vocabulary)
        .def_property_readonly("answer_tokens", &Trained::answer_tokens)
        .def("parameters", &Trained::parameters);

    m.def(
        "init_model",
        [](const py::dict& config, const std::vector<RawStory>& train_split, std::size_t vocab_max) {
            const ModelConfig c = config_from_dict(config);
            RawSplits splits{train_split, {}, {}};
            TaskData data = prepare_task(splits, c, vocab_max);
            return Trained(make_model(c, data.dims), std::move(data.vocab));
        },
        py::arg("config"), py::arg("train"), py::arg("vocab_max") = 50000);

    m.def(
        "train",
        [](const py::dict& config, const std::vector<RawStory>& train_split, const std::vector<RawStory>& valid,
           const std::vector<RawStory>& test, std::size_t patience, std::size_t max_epochs, std::size_t threads,
           std::optional<double> target_train_loss, std::size_t vocab_max) {
            const ModelConfig c = config_from_dict(config);
            TaskData data;
            TrainResult r;
            {
                py::gil_scoped_release release;
                data = prepare_task(RawSplits{train_split, valid, test}, c, vocab_max);
                TrainOptions o;
                o.patience = patience;
                o.max_epochs = max_epochs;
                o.threads = threads;
                o.target_train_loss = target_train_loss;
                r = qdren::train(c, data, o);
            }
            py::dict report;
            report["epochs"] = report_rows(r.report);
            report["best_epoch"] = r.report.best_epoch;
            report["best_val_acc"] = r.report.best_val_acc;
            report["stop_reason"] = r.report.stop_reason;
            return py::make_tuple(Trained(std::move(r.model), std::move(data.vocab)), report);
        },
        py::arg("config"), py::arg("train"), py::arg("valid"), py::arg("test") = std::vector<RawStory>{},
        py::arg("patience") = 50, py::arg("max_epochs") = 200, py::arg("threads") = 1,
        py::arg("target_train_loss") = std::nullopt, py::arg("vocab_max") = 50000,
        "Returns (best model, report dict).");

    m.def(
        "load_checkpoint",
        [](const std::string& prefix) {
            Checkpoint c = load_checkpoint(prefix);
            return Trained(std::move(c.model), std::move(c.vocab));
        },
        py::arg("prefix"));

    m.def(
        "gradcheck",
        [](const std::string& mode, const std::string& style, const std::string& phi, std::size_t dim, std::size_t blocks,
           std::uint64_t seed) {
            ModelGradcheckSpec spec;
            spec.mode = parse_gate_mode(mode);
            spec.style = parse_input_style(style);
            spec.phi = ops::parse_activation(phi);
            spec.dim = dim;
            spec.blocks = blocks;
            spec.seed = seed;
            const auto r = model_gradcheck(spec);
            py::dict groups;
            for (const auto& g : r.report.groups) groups[py::str(g.name)] = g.max_rel_error;
            py::dict out;
            out["max_rel_error"] = r.report.max_rel_error;
            out["worst_param"] = r.report.worst_param;
            out["worst_index"] = r.report.worst_index;
            out["groups"] = groups;
            out["passed"] = r.passed();
            return out;
        },
        py::arg("mode") = "qdren", py::arg("style") = "sentences", py::arg("phi") = "prelu", py::arg("dim") = 8,
        py::arg("blocks") = 4, py::arg("seed") = 1);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one command-line invocation; returns (exit code, stdout, stderr).");

    m.attr("GRADCHECK_TOLERANCE") = kGradcheckTolerance;
}
