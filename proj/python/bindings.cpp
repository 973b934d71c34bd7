#include <pybind11/pybind11.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>

#include "pivot/bandit.hpp"
#include "pivot/config.hpp"
#include "pivot/embeddings.hpp"
#include "pivot/harness.hpp"
#include "pivot/perturbation.hpp"
#include "pivot/pivot_search.hpp"
#include "pivot/victim.hpp"

namespace py = pybind11;
using namespace pivot;

namespace {

// Adapts a Python callable taking a token list and returning int or None.
class CallableVictim : public Victim {
 public:
  explicit CallableVictim(py::function fn) : fn_(std::move(fn)) {}
  Response classify(std::span<const std::string> tokens) override {
    py::gil_scoped_acquire gil;
    py::object r = fn_(std::vector<std::string>(tokens.begin(), tokens.end()));
    if (r.is_none()) return std::nullopt;
    return r.cast<Label>();
  }

 private:
  py::function fn_;
};

std::shared_ptr<Victim> as_victim(const py::object& obj) {
  if (py::isinstance<RuleVictim>(obj)) return obj.cast<std::shared_ptr<RuleVictim>>();
  if (py::isinstance<py::function>(obj)) return std::make_shared<CallableVictim>(obj.cast<py::function>());
  throw py::type_error("victim must be a RuleVictim or a callable(tokens) -> int | None");
}

PositionOrder parse_order(const std::string& s) {
  if (s == "pivot") return PositionOrder::pivot;
  if (s == "random") return PositionOrder::random;
  throw py::value_error("order must be 'pivot' or 'random'");
}

py::dict record_dict(const AttackRecord& r) {
  return py::module_::import("json").attr("loads")(to_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hard-label text attack with KL-LUCB pivot search";

  py::register_exception<BudgetExhausted>(m, "BudgetExhausted");
  py::register_exception<VictimError>(m, "VictimError");
  py::register_exception<EmbeddingFormatError>(m, "EmbeddingFormatError");
  py::register_exception<DatasetError>(m, "DatasetError");

  m.def("bernoulli_kl", &bernoulli_kl, py::arg("p"), py::arg("q"));
  m.def("kl_upper_bound", &kl_upper_bound, py::arg("estimate"), py::arg("pulls"), py::arg("beta"));
  m.def("kl_lower_bound", &kl_lower_bound, py::arg("estimate"), py::arg("pulls"), py::arg("beta"));

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("budget", &AttackConfig::budget)
      .def_readwrite("quota_fraction", &AttackConfig::quota_fraction)
      .def_readwrite("threshold", &AttackConfig::threshold)
      .def_readwrite("epsilon", &AttackConfig::epsilon)
      .def_readwrite("delta", &AttackConfig::delta)
      .def_readwrite("lambda_", &AttackConfig::lambda)
      .def_readwrite("alpha", &AttackConfig::alpha)
      .def_readwrite("init_samples", &AttackConfig::init_samples)
      .def_readwrite("candidate_size", &AttackConfig::candidate_size)
      .def_readwrite("mask_probability", &AttackConfig::mask_probability)
      .def_readwrite("cull_threshold", &AttackConfig::cull_threshold)
      .def_readwrite("h_base", &AttackConfig::h_base)
      .def_readwrite("h_max", &AttackConfig::h_max)
      .def_readwrite("seed", &AttackConfig::seed)
      .def("validate", &AttackConfig::validate)
      .def("pivot_quota", &AttackConfig::pivot_quota);

  m.def(
      "exploration_rate",
      [](std::uint64_t k, std::uint64_t t, double lambda, double alpha, double delta) {
        return exploration_rate(k, t, {lambda, alpha, delta, 0.0});
      },
      py::arg("k"), py::arg("t"), py::arg("lambda_") = 1.0, py::arg("alpha") = 1.1,
      py::arg("delta") = 0.85);

  m.def(
      "perturbation_rate",
      [](const Tokens& a, const Tokens& b) { return perturbation_rate(a, b); }, py::arg("original"),
      py::arg("adversarial"));
  m.def("dynamic_threshold", &dynamic_threshold, py::arg("config"), py::arg("remaining_budget"),
        py::arg("length"));

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init<std::vector<std::string>, const std::vector<std::vector<double>>&>(),
           py::arg("words"), py::arg("vectors"))
      .def_static("load", &load_vectors_file, py::arg("path"))
      .def_property_readonly("dimension", &EmbeddingStore::dimension)
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__", [](const EmbeddingStore& s, const std::string& w) { return s.contains(w); })
      .def("nearest", &EmbeddingStore::nearest, py::arg("word"), py::arg("m"))
      .def(
          "sentence_similarity",
          [](const EmbeddingStore& s, const Tokens& a, const Tokens& b) {
            return s.sentence_similarity(a, b);
          },
          py::arg("a"), py::arg("b"));

  py::class_<Victim, std::shared_ptr<Victim>>(m, "Victim");
  py::class_<RuleVictim, Victim, std::shared_ptr<RuleVictim>>(m, "RuleVictim")
      .def_static(
          "keyword",
          [](std::vector<std::string> tokens, Label present, Label otherwise) {
            return std::make_shared<RuleVictim>(KeywordRule{std::move(tokens), present, otherwise});
          },
          py::arg("tokens"), py::arg("label_if_present") = 1, py::arg("label_otherwise") = 0)
      .def_static(
          "bag_of_words",
          [](std::map<std::string, std::int64_t> weights, std::int64_t bias, Label pos, Label neg) {
            WeightedBagRule rule;
            rule.weights.insert(weights.begin(), weights.end());
            rule.bias = bias;
            rule.positive = pos;
            rule.negative = neg;
            return std::make_shared<RuleVictim>(rule);
          },
          py::arg("weights"), py::arg("bias") = 0, py::arg("positive") = 1, py::arg("negative") = 0)
      .def("__call__", [](RuleVictim& v, const Tokens& t) { return v.label(t); });

  m.def(
      "find_pivot",
      [](const std::string& text, Label label, const py::object& victim, const AttackConfig& cfg) {
        const TokenSequence x(tokenize(text), label);
        VictimOracle oracle(as_victim(victim), cfg.budget);
        Rng rng(cfg.seed);
        const PivotResult r = find_pivot(x, oracle, cfg, rng);
        py::dict d;
        d["pivot"] = r.pivot;
        d["pivot_order"] = r.pivot_order;
        d["culled"] = r.culled;
        d["ranked_non_pivot"] = r.ranked_non_pivot;
        d["queries_used"] = r.queries_used;
        d["estimate"] = r.estimate;
        d["verdict"] = to_string(r.verdict);
        return d;
      },
      py::arg("text"), py::arg("label"), py::arg("victim"), py::arg("config") = AttackConfig{});

  m.def(
      "run_attack",
      [](const std::string& text, Label label, const py::object& victim, const EmbeddingStore& store,
         const AttackConfig& cfg, const std::string& id, const std::string& order) {
        VictimOracle oracle(as_victim(victim), cfg.budget);
        return record_dict(run_attack({id, text, label}, oracle, store, cfg, parse_order(order)));
      },
      py::arg("text"), py::arg("label"), py::arg("victim"), py::arg("store"),
      py::arg("config") = AttackConfig{}, py::arg("id") = "0", py::arg("order") = "pivot");

  m.def(
      "summarize",
      [](const py::list& records) {
        const auto dumps = py::module_::import("json").attr("dumps");
        std::vector<AttackRecord> recs;
        for (const auto& r : records) {
          recs.push_back(record_from_json(nlohmann::json::parse(dumps(r).cast<std::string>())));
        }
        return py::module_::import("json").attr("loads")(to_json(summarize(recs)).dump());
      },
      py::arg("records"));
}
