// SPDX-License-Identifier: Apache-2.0
//
// Release-gate oracle suites: every fast path is compared with a slow,
// independent computation on random small instances.

#ifndef CTXBIAS_SELFCHECK_H_
#define CTXBIAS_SELFCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxbias/ctc.h"

namespace ctxbias {

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  double max_error = 0.0;
  std::string first_failure;
  double seconds = 0.0;  // wall time; not part of any report

  bool ok() const { return total > 0 && passed == total; }
};

using CtcLossFn = std::function<LossResult(const PosteriorMatrix&, const LabelSeq&, bool)>;

struct SelfCheckOptions {
  std::uint64_t seed = 20240917;
  // Loss implementation under test; defaults to CtcLoss. Tests swap in a
  // perturbed recursion to confirm the suites notice.
  CtcLossFn ctc_loss;
};

std::vector<SuiteResult> RunSelfCheck(const SelfCheckOptions& options = {});

// Finite-difference gradient of `loss` with respect to pre-softmax logits.
Matrix NumericCtcGradient(const Matrix& logits, const LabelSeq& label, double step,
                          const CtcLossFn& loss);

}  // namespace ctxbias

#endif  // CTXBIAS_SELFCHECK_H_
