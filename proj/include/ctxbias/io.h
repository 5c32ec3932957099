// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
//   Posterior file  "CPOST1" | u32 T | u32 V | T*V float32 log-probs, row-major
//   Feature file    "CFEAT1" | u32 T | u32 D | T*D float32, row-major
//   (all integers and floats little-endian)
//
//   Weight bundle   JSON: {"format", "config", "tensors": [{name, shape,
//                   values}], "tied": {"cpp.output.weight": "ctc_linear.weight",
//                   "cpp.output.bias": "ctc_linear.bias"}}
//   Vocab           one token per line, line 1 is <blank>, <space> for space
//   Biasing list    one phrase per line, '#' starts a comment line, a
//                   trailing "\tD" marks a distractor
//   Transcripts     utt_id<TAB>text per line

#ifndef CTXBIAS_IO_H_
#define CTXBIAS_IO_H_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxbias/biasing_list.h"
#include "ctxbias/context_bias.h"
#include "ctxbias/phrase_filter.h"
#include "ctxbias/posterior.h"
#include "ctxbias/vocab.h"

namespace ctxbias {

inline constexpr std::string_view kPosteriorMagic = "CPOST1";
inline constexpr std::string_view kFeatureMagic = "CFEAT1";
inline constexpr std::string_view kWeightFormat = "ctxbias-weights/1";

std::string ReadFile(const std::string& path);
// Writes to a sibling temp file, then renames over `path`.
void WriteFileAtomic(const std::string& path, std::string_view bytes);

std::string EncodePosterior(const PosteriorMatrix& post);
PosteriorMatrix DecodePosterior(std::string_view bytes);
PosteriorMatrix ReadPosteriorFile(const std::string& path);

std::string EncodeFeatures(const Matrix& features);
Matrix DecodeFeatures(std::string_view bytes);
Matrix ReadFeatureFile(const std::string& path);

std::string SerializeWeights(const BiasModelWeights& weights);
BiasModelWeights ParseWeights(std::string_view text);
BiasModelWeights ReadWeightsFile(const std::string& path);

std::string SerializeVocab(const Vocab& vocab);
Vocab ParseVocab(std::string_view text);
Vocab ReadVocabFile(const std::string& path);

std::string SerializeBiasingList(const BiasingList& list);

// Raw list lines before tokenization; `line` is 1-based.
struct ListEntry {
  std::string text;
  Provenance provenance = Provenance::kTrueBias;
  std::size_t line = 0;
};
std::vector<ListEntry> ParseListEntries(std::string_view text);
BiasingList ParseBiasingList(std::string_view text, const Vocab& vocab);
BiasingList ReadBiasingListFile(const std::string& path, const Vocab& vocab);

using TsvRows = std::vector<std::pair<std::string, std::string>>;
// Rejects duplicate ids and lines without a tab. Blank lines are skipped;
// text may be empty.
TsvRows ParseTsv(std::string_view text, std::string_view source = "tsv");
std::string SerializeTsv(const TsvRows& rows);

// Structured JSON filter report for one or more utterances.
std::string SerializeFilterReports(const std::vector<std::pair<std::string, FilterReport>>& reports);

// Head-averaged T x (K+1) attention as text.
std::string SerializeAttention(const AttentionResult& attention, const BiasingList& list);

// Shortest round-trip decimal form of a double.
std::string FormatDouble(double v);

}  // namespace ctxbias

#endif  // CTXBIAS_IO_H_
