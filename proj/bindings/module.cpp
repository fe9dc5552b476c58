#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "explanova/pipeline.hpp"
#include "explanova/special_functions.hpp"
#include "explanova/stats.hpp"

namespace py = pybind11;

namespace {

using namespace explanova;

ShapConfig make_shap_config(std::size_t enumeration_limit, std::size_t sample_budget,
                            std::uint64_t seed) {
  ShapConfig cfg;
  cfg.enumeration_limit = enumeration_limit;
  cfg.sample_budget = sample_budget;
  cfg.seed = seed;
  return cfg;
}

LlmConfig make_llm_config(bool mock_llm, const std::string& endpoint, const std::string& model,
                          std::size_t context_char_budget) {
  LlmConfig llm;
  llm.mock_mode = mock_llm;
  if (!endpoint.empty()) llm.endpoint_url = endpoint;
  if (!model.empty()) llm.model_name = model;
  llm.context_char_budget = context_char_budget;
  return llm;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "explanova core: statistics, model selection, attribution, and reporting over CSVs";
  m.attr("__version__") = "0.1.0";

  // --- special functions ---
  m.def("ln_gamma", &ln_gamma, py::arg("x"));
  m.def("regularized_lower_gamma", &regularized_lower_gamma, py::arg("a"), py::arg("x"));
  m.def("regularized_upper_gamma", &regularized_upper_gamma, py::arg("a"), py::arg("x"));
  m.def("regularized_incomplete_beta", &regularized_incomplete_beta, py::arg("a"), py::arg("b"),
        py::arg("x"));
  m.def("f_upper_tail", &f_distribution_upper_tail, py::arg("f"), py::arg("d1"), py::arg("d2"));
  m.def("chi2_upper_tail", &chi_squared_upper_tail, py::arg("x"), py::arg("dof"));

  // --- pairwise statistics ---
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "mutual_information",
      [](const std::vector<double>& x, const std::vector<double>& y, bool x_discrete,
         bool y_discrete, std::size_t bins) {
        return mutual_information(x, y, x_discrete, y_discrete, bins);
      },
      py::arg("x"), py::arg("y"), py::arg("x_discrete") = false, py::arg("y_discrete") = false,
      py::arg("bins") = 10);
  m.def(
      "anova_oneway",
      [](const std::vector<double>& values, const std::vector<int>& groups) {
        AnovaResult r = anova_oneway(values, groups);
        return py::make_tuple(r.f, r.p, r.eta_squared);
      },
      py::arg("values"), py::arg("groups"), "Returns (f, p, eta_squared).");
  m.def(
      "kruskal_wallis",
      [](const std::vector<double>& values, const std::vector<int>& groups) {
        return kruskal_wallis(values, groups);
      },
      py::arg("values"), py::arg("groups"));
  m.def("cohens_f", &cohens_f, py::arg("eta_squared"));
  m.def(
      "chi2_independence",
      [](const std::vector<int>& x, const std::vector<int>& y) {
        Chi2Result r = chi2_independence(x, y);
        return py::make_tuple(r.chi2, r.p, r.cramers_v);
      },
      py::arg("x_codes"), py::arg("y_codes"), "Returns (chi2, p, cramers_v).");

  // --- attribution ---
  m.def("kernel_weight", &kernel_weight, py::arg("m"), py::arg("s"));
  m.def(
      "kernel_shap",
      [](std::size_t n_players, const std::function<double(const std::vector<bool>&)>& value,
         std::size_t enumeration_limit, std::size_t sample_budget, std::uint64_t seed) {
        return kernel_shap_solve(n_players, value,
                                 make_shap_config(enumeration_limit, sample_budget, seed));
      },
      py::arg("n_players"), py::arg("value"), py::arg("enumeration_limit") = 12,
      py::arg("sample_budget") = 2048, py::arg("seed") = 42,
      "Shapley values for an arbitrary coalition value function.");
  m.def(
      "shap_entropy",
      [](const std::vector<double>& attributions) { return shap_entropy(attributions); },
      py::arg("attributions"));
  m.def(
      "credibility",
      [](double entropy, double nll, double shap_error) {
        Credibility c = credibility_score(entropy, nll, shap_error);
        return py::make_tuple(c.score, std::string(to_string(c.level)));
      },
      py::arg("entropy"), py::arg("nll"), py::arg("shap_error"),
      "Returns (score, level) with level in {HIGH, MEDIUM, LOW}.");

  // --- unified scores ---
  m.def("nll_classification", &nll_classification, py::arg("probs"), py::arg("labels"));
  m.def("nll_regression", &nll_regression, py::arg("mu"), py::arg("sigma2"), py::arg("y"));

  // --- pipeline ---
  m.def(
      "analyze_csv",
      [](const std::string& csv_text, const std::string& table_name, const std::string& cache_dir,
         std::uint64_t seed, std::size_t workers, bool mock_llm, bool force,
         const std::string& llm_endpoint, const std::string& llm_model) {
        RunConfig cfg;
        cfg.cache_dir = cache_dir;
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.force = force;
        cfg.llm = make_llm_config(mock_llm, llm_endpoint, llm_model, cfg.llm.context_char_budget);
        AnalysisResult result;
        {
          py::gil_scoped_release release;
          result = run_analysis(cfg, csv_text, table_name);
        }
        py::dict out;
        out["report_text"] = result.report_text;
        out["from_cache"] = result.from_cache;
        out["payload_json"] = result.entry.payload.dump();
        return out;
      },
      py::arg("csv_text"), py::arg("table_name") = "table",
      py::arg("cache_dir") = ".explanova_cache", py::arg("seed") = 42, py::arg("workers") = 1,
      py::arg("mock_llm") = true, py::arg("force") = false, py::arg("llm_endpoint") = "",
      py::arg("llm_model") = "",
      "Full pipeline over CSV text; returns report text plus a JSON payload snapshot.");
  m.def(
      "answer_question",
      [](const std::string& report_text, const std::string& question, bool mock_llm,
         const std::string& llm_endpoint, const std::string& llm_model,
         std::size_t context_char_budget) {
        LlmClient llm(make_llm_config(mock_llm, llm_endpoint, llm_model, context_char_budget));
        py::gil_scoped_release release;
        return answer_question(report_text, question, llm);
      },
      py::arg("report_text"), py::arg("question"), py::arg("mock_llm") = true,
      py::arg("llm_endpoint") = "", py::arg("llm_model") = "",
      py::arg("context_char_budget") = 24000,
      "Map/reduce question answering over a rendered report.");
}
