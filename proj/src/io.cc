// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/io.h"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ctxbias/errors.h"
#include "json.hpp"

namespace ctxbias {

using nlohmann::json;

namespace {

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t GetU32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

std::string EncodeMatrix(std::string_view magic, const Matrix& m) {
  std::string out(magic);
  PutU32(out, static_cast<std::uint32_t>(m.rows()));
  PutU32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + 4 * m.data().size());
  for (double v : m.data()) PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Matrix DecodeMatrix(std::string_view magic, std::string_view bytes) {
  const std::size_t header = magic.size() + 8;
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    throw ParseError("bad magic, expected " + std::string(magic), "byte 0");
  }
  if (bytes.size() < header) {
    throw ParseError("truncated header", "byte " + std::to_string(bytes.size()));
  }
  const std::uint32_t rows = GetU32(bytes, magic.size());
  const std::uint32_t cols = GetU32(bytes, magic.size() + 4);
  const std::uint64_t payload = 4ULL * rows * cols;
  if (bytes.size() - header != payload) {
    throw ParseError("payload is " + std::to_string(bytes.size() - header) +
                         " bytes, header promises " + std::to_string(payload),
                     "byte " + std::to_string(header));
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    const auto f = std::bit_cast<float>(GetU32(bytes, header + 4 * i));
    if (!std::isfinite(f) && !(f < 0 && std::isinf(f))) {
      throw ParseError("non-finite value", "byte " + std::to_string(header + 4 * i));
    }
    m.data()[i] = f;
  }
  return m;
}

std::string Trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> Lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

// Weight tensors in bundle order, bound to their storage.
struct TensorSlot {
  std::string name;
  std::vector<std::size_t> shape;
  std::function<std::vector<double>&()> data;
};

std::vector<TensorSlot> Slots(BiasModelWeights& w) {
  const std::size_t d = w.config.model_dim;
  const std::size_t h = w.config.hidden_size;
  const std::size_t v = w.config.vocab_size;
  auto mat = [](Matrix& m) { return [&m]() -> std::vector<double>& { return m.data(); }; };
  auto vec = [](Vector& x) { return [&x]() -> std::vector<double>& { return x; }; };
  std::vector<TensorSlot> slots;
  for (auto [prefix, lstm] : {std::pair<const char*, LstmWeights*>{"context_encoder.fwd", &w.encoder_fwd},
                              {"context_encoder.bwd", &w.encoder_bwd}}) {
    slots.push_back({std::string(prefix) + ".w_ih", {4 * h, v}, mat(lstm->w_ih)});
    slots.push_back({std::string(prefix) + ".w_hh", {4 * h, h}, mat(lstm->w_hh)});
    slots.push_back({std::string(prefix) + ".bias", {4 * h}, vec(lstm->bias)});
  }
  slots.push_back({"context_encoder.readout.weight", {d, 4 * h}, mat(w.encoder_readout.weight)});
  slots.push_back({"context_encoder.readout.bias", {d}, vec(w.encoder_readout.bias)});
  slots.push_back({"biasing.query", {d, d}, mat(w.query)});
  slots.push_back({"biasing.key", {d, d}, mat(w.key)});
  slots.push_back({"biasing.value", {d, d}, mat(w.value)});
  slots.push_back({"biasing.output", {d, d}, mat(w.output)});
  slots.push_back({"combiner.ln_audio.gain", {d}, vec(w.ln_audio_gain)});
  slots.push_back({"combiner.ln_audio.bias", {d}, vec(w.ln_audio_bias)});
  slots.push_back({"combiner.ln_context.gain", {d}, vec(w.ln_context_gain)});
  slots.push_back({"combiner.ln_context.bias", {d}, vec(w.ln_context_bias)});
  slots.push_back({"combiner.ff.weight", {d, 2 * d}, mat(w.combiner_ff.weight)});
  slots.push_back({"combiner.ff.bias", {d}, vec(w.combiner_ff.bias)});
  slots.push_back({"cpp.hidden.weight", {d, d}, mat(w.cpp_hidden.weight)});
  slots.push_back({"cpp.hidden.bias", {d}, vec(w.cpp_hidden.bias)});
  slots.push_back({"ctc_linear.weight", {v, d}, mat(w.ctc_linear.weight)});
  slots.push_back({"ctc_linear.bias", {v}, vec(w.ctc_linear.bias)});
  return slots;
}

const std::map<std::string, std::string>& TiedTensors() {
  static const std::map<std::string, std::string> tied = {
      {"cpp.output.weight", "ctc_linear.weight"},
      {"cpp.output.bias", "ctc_linear.bias"},
  };
  return tied;
}

// A parse error with the file path prepended to its location.
ParseError InFile(const char* kind, const std::string& path, const ParseError& e) {
  const std::string where = e.location() == path ? path : path + ": " + e.location();
  return ParseError(std::string(kind) + ": " + e.detail(), where);
}

}  // namespace

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::string& path, std::string_view bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

std::string EncodePosterior(const PosteriorMatrix& post) {
  return EncodeMatrix(kPosteriorMagic, post.log_probs());
}

PosteriorMatrix DecodePosterior(std::string_view bytes) {
  Matrix m = DecodeMatrix(kPosteriorMagic, bytes);
  try {
    return PosteriorMatrix(std::move(m), PosteriorMatrix::kStorageTolerance);
  } catch (const DomainError& e) {
    throw ParseError(e.what(), "payload");
  }
}

PosteriorMatrix ReadPosteriorFile(const std::string& path) {
  try {
    return DecodePosterior(ReadFile(path));
  } catch (const ParseError& e) {
    throw InFile("posterior file", path, e);
  }
}

std::string EncodeFeatures(const Matrix& features) {
  return EncodeMatrix(kFeatureMagic, features);
}

Matrix DecodeFeatures(std::string_view bytes) {
  Matrix m = DecodeMatrix(kFeatureMagic, bytes);
  if (!m.AllFinite()) throw ParseError("non-finite feature value", "payload");
  return m;
}

Matrix ReadFeatureFile(const std::string& path) {
  try {
    return DecodeFeatures(ReadFile(path));
  } catch (const ParseError& e) {
    throw InFile("feature file", path, e);
  }
}

std::string SerializeWeights(const BiasModelWeights& weights) {
  weights.Validate();
  BiasModelWeights copy = weights;
  json doc;
  doc["format"] = kWeightFormat;
  doc["config"] = {{"model_dim", copy.config.model_dim},
                   {"hidden_size", copy.config.hidden_size},
                   {"vocab_size", copy.config.vocab_size},
                   {"num_heads", copy.config.num_heads},
                   {"layer_norm_eps", copy.config.layer_norm_eps}};
  json tensors = json::array();
  for (TensorSlot& slot : Slots(copy)) {
    tensors.push_back({{"name", slot.name}, {"shape", slot.shape}, {"values", slot.data()}});
  }
  doc["tensors"] = std::move(tensors);
  json tied = json::object();
  for (const auto& [alias, target] : TiedTensors()) tied[alias] = target;
  doc["tied"] = std::move(tied);
  return doc.dump(1) + "\n";
}

BiasModelWeights ParseWeights(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("weight bundle is not valid JSON: ") + e.what(),
                     "byte " + std::to_string(e.byte));
  }
  try {
    if (doc.value("format", "") != kWeightFormat) {
      throw ParseError("unsupported weight bundle format", "format");
    }
    const json& cfg = doc.at("config");
    ModelConfig config;
    config.model_dim = cfg.at("model_dim").get<std::size_t>();
    config.hidden_size = cfg.at("hidden_size").get<std::size_t>();
    config.vocab_size = cfg.at("vocab_size").get<std::size_t>();
    config.num_heads = cfg.at("num_heads").get<std::size_t>();
    config.layer_norm_eps = cfg.value("layer_norm_eps", 1e-5);
    BiasModelWeights w = BiasModelWeights::Zeros(config);

    std::map<std::string, const json*> by_name;
    for (const json& t : doc.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      if (!by_name.emplace(name, &t).second) {
        throw ParseError("tensor listed twice", "tensors." + name);
      }
    }
    for (TensorSlot& slot : Slots(w)) {
      auto it = by_name.find(slot.name);
      if (it == by_name.end()) throw ParseError("missing tensor", "tensors." + slot.name);
      const json& t = *it->second;
      if (t.at("shape").get<std::vector<std::size_t>>() != slot.shape) {
        throw ParseError("tensor shape disagrees with config", "tensors." + slot.name + ".shape");
      }
      auto values = t.at("values").get<std::vector<double>>();
      if (values.size() != slot.data().size()) {
        throw ParseError("tensor value count disagrees with shape", "tensors." + slot.name + ".values");
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw ParseError("non-finite value", "tensors." + slot.name);
      }
      slot.data() = std::move(values);
      by_name.erase(it);
    }
    if (!by_name.empty()) {
      throw ParseError("unknown tensor", "tensors." + by_name.begin()->first);
    }
    const json& tied = doc.at("tied");
    for (const auto& [alias, target] : TiedTensors()) {
      if (!tied.contains(alias) || tied.at(alias).get<std::string>() != target) {
        throw ParseError("CPP output layer must be tied to " + target, "tied." + alias);
      }
    }
    if (tied.size() != TiedTensors().size()) throw ParseError("unknown tied entry", "tied");
    w.Validate();
    return w;
  } catch (const json::exception& e) {
    throw ParseError(std::string("weight bundle field error: ") + e.what(), "json");
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), "config");
  }
}

BiasModelWeights ReadWeightsFile(const std::string& path) {
  try {
    return ParseWeights(ReadFile(path));
  } catch (const ParseError& e) {
    throw InFile("weight bundle", path, e);
  }
}

std::string SerializeVocab(const Vocab& vocab) {
  std::string out;
  for (const std::string& t : vocab.tokens()) out += t + "\n";
  return out;
}

Vocab ParseVocab(std::string_view text) {
  std::vector<std::string> tokens;
  const auto lines = Lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) continue;
      throw ParseError("empty vocab line", "line " + std::to_string(i + 1));
    }
    tokens.emplace_back(lines[i]);
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const DomainError& e) {
    throw ParseError(e.what(), "vocab");
  }
}

Vocab ReadVocabFile(const std::string& path) {
  try {
    return ParseVocab(ReadFile(path));
  } catch (const ParseError& e) {
    throw InFile("vocab file", path, e);
  }
}

std::string SerializeBiasingList(const BiasingList& list) {
  std::string out;
  for (std::size_t i = 1; i < list.size(); ++i) {
    out += list.phrase(i).text;
    if (list.provenance(i) == Provenance::kDistractor) out += "\tD";
    out += "\n";
  }
  return out;
}

std::vector<ListEntry> ParseListEntries(std::string_view text) {
  std::vector<ListEntry> entries;
  const auto lines = Lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (Trim(line).empty() || Trim(line)[0] == '#') continue;
    Provenance prov = Provenance::kTrueBias;
    if (const auto tab = line.rfind('\t'); tab != std::string_view::npos) {
      const std::string tag = Trim(line.substr(tab + 1));
      if (tag == "D") {
        prov = Provenance::kDistractor;
      } else if (!tag.empty()) {
        throw ParseError("unknown provenance tag '" + tag + "'", "line " + std::to_string(i + 1));
      }
      line = line.substr(0, tab);
    }
    entries.push_back({std::string(line), prov, i + 1});
  }
  return entries;
}

BiasingList ParseBiasingList(std::string_view text, const Vocab& vocab) {
  BiasingList list;
  for (const ListEntry& entry : ParseListEntries(text)) {
    try {
      list.Add(ContextPhrase::FromText(entry.text, vocab), entry.provenance);
    } catch (const Error& e) {
      throw ParseError(e.what(), "line " + std::to_string(entry.line));
    }
  }
  return list;
}

BiasingList ReadBiasingListFile(const std::string& path, const Vocab& vocab) {
  try {
    return ParseBiasingList(ReadFile(path), vocab);
  } catch (const ParseError& e) {
    throw InFile("biasing list", path, e);
  }
}

TsvRows ParseTsv(std::string_view text, std::string_view source) {
  TsvRows rows;
  std::set<std::string> ids;
  const auto lines = Lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (Trim(line).empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = std::string(source) + " line " + std::to_string(i + 1);
    if (tab == std::string_view::npos) throw ParseError("missing tab after utterance id", where);
    std::string id = Trim(line.substr(0, tab));
    if (id.empty()) throw ParseError("empty utterance id", where);
    if (!ids.insert(id).second) throw ParseError("duplicate utterance id '" + id + "'", where);
    rows.emplace_back(std::move(id), std::string(line.substr(tab + 1)));
  }
  return rows;
}

std::string SerializeTsv(const TsvRows& rows) {
  std::string out;
  for (const auto& [id, text] : rows) out += id + "\t" + text + "\n";
  return out;
}

std::string FormatDouble(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string SerializeFilterReports(
    const std::vector<std::pair<std::string, FilterReport>>& reports) {
  json doc;
  doc["format"] = "ctxbias-filter-report/1";
  json utts = json::array();
  for (const auto& [utt_id, report] : reports) {
    json entries = json::array();
    for (const PhraseFilterEntry& e : report.entries) {
      entries.push_back({{"index", e.list_index},
                         {"text", e.text},
                         {"provenance", ProvenanceName(e.provenance)},
                         {"psc", e.psc},
                         {"soc", e.soc ? json(*e.soc) : json(nullptr)},
                         {"verdict", VerdictName(e.verdict)}});
    }
    const FilterCounters& c = report.counters;
    utts.push_back({{"utt_id", utt_id},
                    {"config",
                     {{"window_scale", report.config.window_scale},
                      {"stride", report.config.stride},
                      {"psc_threshold", report.config.psc_threshold},
                      {"soc_threshold", report.config.soc_threshold},
                      {"max_kept", report.config.max_kept}}},
                    {"phrases", std::move(entries)},
                    {"counters",
                     {{"phrases_in", c.phrases_in},
                      {"stage1_evaluated", c.stage1_evaluated},
                      {"stage2_evaluated", c.stage2_evaluated},
                      {"kept", c.kept},
                      {"stage1_window_cells", c.stage1_window_cells},
                      {"stage2_dp_cells", c.stage2_dp_cells}}}});
  }
  doc["utterances"] = std::move(utts);
  return doc.dump(1) + "\n";
}

std::string SerializeAttention(const AttentionResult& attention, const BiasingList& list) {
  const Matrix mean = attention.MeanWeights();
  std::string out = "# attention frames=" + std::to_string(mean.rows()) +
                    " entries=" + std::to_string(mean.cols()) +
                    " heads=" + std::to_string(attention.head_weights.size()) + "\n#";
  for (std::size_t i = 0; i < list.size(); ++i) out += "\t" + list.phrase(i).text;
  out += "\n";
  for (std::size_t t = 0; t < mean.rows(); ++t) {
    out += std::to_string(t);
    for (double v : mean.row(t)) out += "\t" + FormatDouble(v);
    out += "\n";
  }
  return out;
}

}  // namespace ctxbias
