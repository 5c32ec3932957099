// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Matrices cross the boundary as float64 numpy arrays;
// posteriors are passed as natural-log probabilities.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ctxbias/cli.h"
#include "ctxbias/ctc.h"
#include "ctxbias/decoder.h"
#include "ctxbias/errors.h"
#include "ctxbias/eval.h"
#include "ctxbias/phrase_filter.h"
#include "ctxbias/selfcheck.h"

namespace py = pybind11;
using namespace ctxbias;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix ToMatrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array ToArray(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

PosteriorMatrix Posterior(const Array& log_probs) { return PosteriorMatrix(ToMatrix(log_probs)); }

FilterConfig Config(double window_scale, std::size_t stride) {
  FilterConfig c;
  c.window_scale = window_scale;
  c.stride = stride;
  c.Validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contextual biasing toolkit core";
  m.attr("__version__") = std::string(ToolkitVersion());

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<OracleRefusedError>(m, "OracleRefusedError", PyExc_RuntimeError);

  m.def(
      "ctc_loss",
      [](const Array& log_probs, const LabelSeq& label, bool grad) -> py::object {
        const LossResult r = CtcLoss(Posterior(log_probs), label, grad);
        if (!grad) return py::float_(r.loss);
        return py::make_tuple(r.loss, ToArray(*r.grad_logits));
      },
      py::arg("log_probs"), py::arg("label"), py::arg("grad") = false,
      "Negative log-likelihood of `label`; with grad=True also d loss / d logits.");
  m.def(
      "ctc_loss_oracle",
      [](const Array& log_probs, const LabelSeq& label) {
        return CtcLossOracle(Posterior(log_probs), label);
      },
      py::arg("log_probs"), py::arg("label"));

  m.def(
      "psc",
      [](const Array& log_probs, const LabelSeq& phrase, double window_scale, std::size_t stride) {
        return PhraseScoreConfidence(Posterior(log_probs), phrase, Config(window_scale, stride));
      },
      py::arg("log_probs"), py::arg("phrase"), py::arg("window_scale") = 2.0, py::arg("stride") = 1);
  m.def(
      "soc",
      [](const Array& log_probs, const LabelSeq& phrase, double window_scale, std::size_t stride) {
        return SequenceOrderConfidence(Posterior(log_probs), phrase, Config(window_scale, stride));
      },
      py::arg("log_probs"), py::arg("phrase"), py::arg("window_scale") = 2.0, py::arg("stride") = 1);
  m.def(
      "soc_oracle",
      [](const Array& log_probs, const LabelSeq& phrase, double window_scale, std::size_t stride) {
        return SequenceOrderConfidenceOracle(Posterior(log_probs), phrase,
                                             Config(window_scale, stride));
      },
      py::arg("log_probs"), py::arg("phrase"), py::arg("window_scale") = 2.0, py::arg("stride") = 1);

  m.def(
      "prefix_beam_decode",
      [](const Array& log_probs, std::size_t beam, const std::vector<LabelSeq>& boost,
         double boost_weight) {
        const BoostTrie trie(boost);
        DecodeOptions options;
        options.beam = beam;
        options.boost = &trie;
        options.boost_weight = boost_weight;
        std::vector<std::pair<LabelSeq, double>> out;
        for (const Hypothesis& h : PrefixBeamDecode(Posterior(log_probs), options)) {
          out.emplace_back(h.tokens, h.score);
        }
        return out;
      },
      py::arg("log_probs"), py::arg("beam") = 8, py::arg("boost") = std::vector<LabelSeq>{},
      py::arg("boost_weight") = 1.0, "Ranked (tokens, score) pairs.");

  m.def(
      "score",
      [](const WordSeq& ref, const WordSeq& hyp, const std::set<std::string>& biased) {
        const ScoredTranscript s = Score(ref, hyp, biased);
        auto pair = [](const ErrorRate& e) { return py::make_tuple(e.errors, e.ref_words); };
        py::dict d;
        d["wer"] = pair(s.wer);
        d["u_wer"] = pair(s.u_wer);
        d["b_wer"] = pair(s.b_wer);
        d["substitutions"] = s.substitutions;
        d["deletions"] = s.deletions;
        d["insertions"] = s.insertions;
        return d;
      },
      py::arg("ref"), py::arg("hyp"), py::arg("biased_words") = std::set<std::string>{},
      "(errors, reference words) pairs for WER, U-WER and B-WER.");

  m.def(
      "selfcheck",
      [](std::uint64_t seed) {
        SelfCheckOptions options;
        options.seed = seed;
        py::list out;
        for (const SuiteResult& s : RunSelfCheck(options)) {
          py::dict d;
          d["name"] = s.name;
          d["passed"] = s.passed;
          d["total"] = s.total;
          d["max_error"] = s.max_error;
          d["ok"] = s.ok();
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = SelfCheckOptions{}.seed);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = RunCli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command in-process; returns (exit code, stdout, stderr).");
}
