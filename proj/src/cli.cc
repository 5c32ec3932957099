// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/cli.h"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "CLI11.hpp"
#include "ctxbias/biasing_list.h"
#include "ctxbias/context_bias.h"
#include "ctxbias/ctc.h"
#include "ctxbias/decoder.h"
#include "ctxbias/errors.h"
#include "ctxbias/eval.h"
#include "ctxbias/io.h"
#include "ctxbias/phrase_filter.h"
#include "ctxbias/rng.h"
#include "ctxbias/selfcheck.h"
#include "ctxbias/synth.h"
#include "json.hpp"

#ifndef CTXBIAS_VERSION
#define CTXBIAS_VERSION "0.0.0"
#endif

namespace ctxbias {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view ToolkitVersion() { return CTXBIAS_VERSION; }

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs read, outputs written, and the config echo of one command.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)) {}

  std::string Read(const std::string& path) {
    std::string bytes = ReadFile(path);
    if (!seen_inputs_.contains(path)) {
      seen_inputs_.insert(path);
      inputs_.emplace_back(path, Sha256Hex(bytes));
    }
    return bytes;
  }

  void Write(const std::string& path, std::string_view bytes) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    WriteFileAtomic(path, bytes);
    outputs_.emplace_back(path, Sha256Hex(bytes));
  }

  void SetSeed(std::uint64_t seed) { seed_ = seed; }
  json& config() { return config_; }
  std::vector<std::string>& argv() { return argv_; }

  std::string Manifest() const {
    json doc;
    doc["format"] = kManifestFormat;
    doc["toolkit_version"] = ToolkitVersion();
    doc["command"] = command_;
    doc["argv"] = argv_;
    doc["seed"] = seed_ ? json(*seed_) : json(nullptr);
    doc["config"] = config_;
    auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
      json arr = json::array();
      for (const auto& [path, digest] : v) arr.push_back({{"path", path}, {"sha256", digest}});
      return arr;
    };
    doc["inputs"] = files(inputs_);
    doc["outputs"] = files(outputs_);
    return doc.dump(2) + "\n";
  }

  const std::vector<std::pair<std::string, std::string>>& outputs() const { return outputs_; }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::optional<std::uint64_t> seed_;
  json config_ = json::object();
  std::set<std::string> seen_inputs_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback,
                          std::vector<std::string>& argv) {
  if (flag) return *flag;
  std::uint64_t seed = fallback;
  if (const char* env = std::getenv("CTXBIAS_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') {
      throw UsageError(std::string("CTXBIAS_SEED is not an unsigned integer: ") + env);
    }
    seed = v;
  }
  // Pin the resolved seed so a replay does not depend on the environment.
  argv.push_back("--seed");
  argv.push_back(std::to_string(seed));
  return seed;
}

// One row of an scp file: utt_id, posterior or feature path, optional list.
struct ScpRow {
  std::string id;
  std::string path;
  std::optional<std::string> list;
};

std::vector<ScpRow> ReadScp(RunRecord& run, const std::string& scp_path) {
  const fs::path base = fs::path(scp_path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() || base.empty() ? path : base / path).string();
  };
  std::vector<ScpRow> rows;
  for (const auto& [id, rest] : ParseTsv(run.Read(scp_path), scp_path)) {
    ScpRow row{id, "", std::nullopt};
    const auto tab = rest.find('\t');
    row.path = resolve(rest.substr(0, tab));
    if (tab != std::string::npos && !rest.substr(tab + 1).empty()) {
      row.list = resolve(rest.substr(tab + 1));
    }
    if (row.path.empty()) throw ParseError("empty path for '" + id + "'", scp_path);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Path of `target` as written into an scp that lives in `scp_dir`.
std::string ScpRelative(const std::string& target, const fs::path& scp_dir) {
  const fs::path t = fs::absolute(target).lexically_normal();
  const fs::path d = fs::absolute(scp_dir.empty() ? fs::path(".") : scp_dir).lexically_normal();
  const fs::path rel = t.lexically_relative(d);
  return rel.empty() ? t.string() : rel.string();
}

// Error location inside a named file, without repeating the path.
std::string Where(const std::string& path, const ParseError& e) {
  return e.location() == path ? path : path + " " + e.location();
}

Vocab LoadVocab(RunRecord& run, const std::string& path) {
  try {
    return ParseVocab(run.Read(path));
  } catch (const ParseError& e) {
    throw ParseError(std::string("vocab: ") + e.detail(), Where(path, e));
  }
}

BiasingList LoadList(RunRecord& run, const std::string& path, const Vocab& vocab) {
  try {
    return ParseBiasingList(run.Read(path), vocab);
  } catch (const ParseError& e) {
    throw ParseError(std::string("biasing list: ") + e.detail(), Where(path, e));
  }
}

PosteriorMatrix LoadPosterior(RunRecord& run, const std::string& path) {
  try {
    return DecodePosterior(run.Read(path));
  } catch (const ParseError& e) {
    throw ParseError(std::string("posterior: ") + e.detail(), Where(path, e));
  }
}

std::string Percent(const ErrorRate& r) {
  const auto rate = r.rate();
  if (!rate) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *rate);
  return buf;
}

std::string Ratio(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

std::string Counts(const ErrorRate& r) {
  return std::to_string(r.errors) + "/" + std::to_string(r.ref_words);
}

template <typename S>
std::string ScoreLine(const std::string& label, const S& s) {
  return label + "\t" + Percent(s.wer) + " (" + Percent(s.u_wer) + "/" + Percent(s.b_wer) +
         ")\twer=" + Counts(s.wer) + " u_wer=" + Counts(s.u_wer) + " b_wer=" + Counts(s.b_wer) +
         " sub=" + std::to_string(s.substitutions) + " del=" + std::to_string(s.deletions) +
         " ins=" + std::to_string(s.insertions);
}

std::string DefaultManifestPath(const std::string& primary_output) {
  return primary_output + ".manifest.json";
}

// ---- option bundles --------------------------------------------------------

struct InitWeightsOpts {
  std::string vocab, out;
  std::size_t model_dim = 16, hidden = 8, heads = 1;
  double scale = 1.0;
  std::optional<std::uint64_t> seed;
};

struct GenFeaturesOpts {
  std::string out;
  std::size_t frames = 5, dim = 16;
  double scale = 1.0;
  std::optional<std::uint64_t> seed;
};

struct ForwardOpts {
  std::string weights, vocab, features, list, out, dump_attn;
};

struct FilterOpts {
  std::string posterior, scp, list, vocab, out_list, out_dir, out_scp, report;
  FilterConfig config;
};

struct DecodeOpts {
  std::string posterior, scp, vocab, boost_list, out, scores, utt_id;
  std::size_t beam = 8, nbest = 1;
  bool greedy = false;
  double boost_weight = 1.0;
};

struct ScoreOpts {
  std::string ref, hyp, list, out;
};

struct SynthOpts {
  std::string out_dir;
  SynthConfig config;
  std::optional<std::uint64_t> seed;
};

struct SelfCheckOpts {
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct ReplayOpts {
  std::string manifest;
  bool verify = false;
};

// ---- commands --------------------------------------------------------------

std::string CmdInitWeights(const InitWeightsOpts& o, RunRecord& run) {
  const std::uint64_t seed = ResolveSeed(o.seed, 1, run.argv());
  run.SetSeed(seed);
  ModelConfig config;
  config.model_dim = o.model_dim;
  config.hidden_size = o.hidden;
  config.num_heads = o.heads;
  config.vocab_size = LoadVocab(run, o.vocab).size();
  config.Validate();
  run.config() = {{"model_dim", o.model_dim}, {"hidden_size", o.hidden},
                  {"num_heads", o.heads},     {"vocab_size", config.vocab_size},
                  {"scale", o.scale}};
  Rng rng(seed);
  run.Write(o.out, SerializeWeights(BiasModelWeights::Random(config, rng, o.scale)));
  return o.out;
}

std::string CmdGenFeatures(const GenFeaturesOpts& o, RunRecord& run) {
  const std::uint64_t seed = ResolveSeed(o.seed, 1, run.argv());
  run.SetSeed(seed);
  if (o.frames == 0 || o.dim == 0) throw DomainError("features need at least one frame and dim");
  run.config() = {{"frames", o.frames}, {"dim", o.dim}, {"scale", o.scale}};
  Rng rng(seed);
  Matrix feats(o.frames, o.dim);
  for (double& v : feats.data()) v = o.scale * rng.Normal();
  run.Write(o.out, EncodeFeatures(feats));
  return o.out;
}

std::string CmdForward(const ForwardOpts& o, RunRecord& run) {
  const Vocab vocab = LoadVocab(run, o.vocab);
  BiasModelWeights weights;
  try {
    weights = ParseWeights(run.Read(o.weights));
  } catch (const ParseError& e) {
    throw ParseError(std::string("weights: ") + e.detail(), Where(o.weights, e));
  }
  if (weights.config.vocab_size != vocab.size()) {
    throw DomainError("weights expect " + std::to_string(weights.config.vocab_size) +
                      " tokens but the vocab has " + std::to_string(vocab.size()));
  }
  Matrix audio;
  try {
    audio = DecodeFeatures(run.Read(o.features));
  } catch (const ParseError& e) {
    throw ParseError(std::string("features: ") + e.detail(), Where(o.features, e));
  }
  const BiasingList list = o.list.empty() ? BiasingList() : LoadList(run, o.list, vocab);
  run.config() = {{"num_phrases", list.num_phrases()}, {"dump_attention", !o.dump_attn.empty()}};
  const ContextualOutput result = ContextualForward(audio, list, weights);
  run.Write(o.out, EncodePosterior(result.posterior));
  if (!o.dump_attn.empty()) run.Write(o.dump_attn, SerializeAttention(result.attention, list));
  return o.out;
}

json FilterConfigJson(const FilterConfig& c) {
  return {{"window_scale", c.window_scale},
          {"stride", c.stride},
          {"psc_threshold", c.psc_threshold},
          {"soc_threshold", c.soc_threshold},
          {"max_kept", c.max_kept}};
}

std::string CmdFilter(const FilterOpts& o, RunRecord& run) {
  if (o.posterior.empty() == o.scp.empty()) {
    throw UsageError("filter needs exactly one of --posterior or --scp");
  }
  o.config.Validate();
  run.config() = FilterConfigJson(o.config);
  const Vocab vocab = LoadVocab(run, o.vocab);
  std::optional<BiasingList> global;
  if (!o.list.empty()) global = LoadList(run, o.list, vocab);

  std::vector<std::pair<std::string, FilterReport>> reports;
  if (!o.posterior.empty()) {
    if (!global) throw UsageError("filter --posterior needs --list");
    if (o.out_list.empty()) throw UsageError("filter --posterior needs --out-list");
    const PosteriorMatrix post = LoadPosterior(run, o.posterior);
    FilterResult result = FilterList(post, *global, o.config);
    const std::string id = o.posterior.empty() ? "" : fs::path(o.posterior).stem().string();
    run.Write(o.out_list, SerializeBiasingList(result.filtered));
    reports.emplace_back(id, std::move(result.report));
    const std::string report_path = o.report.empty() ? o.out_list + ".report.json" : o.report;
    run.Write(report_path, SerializeFilterReports(reports));
    return o.out_list;
  }

  if (o.out_dir.empty() || o.out_scp.empty()) {
    throw UsageError("filter --scp needs --out-dir and --out-scp");
  }
  const fs::path scp_dir = fs::path(o.out_scp).parent_path();
  std::string scp_out;
  for (const ScpRow& row : ReadScp(run, o.scp)) {
    const PosteriorMatrix post = LoadPosterior(run, row.path);
    BiasingList list;
    if (row.list) {
      list = LoadList(run, *row.list, vocab);
    } else if (global) {
      list = *global;
    } else {
      throw UsageError("utterance '" + row.id + "' has no list; pass --list or add an scp column");
    }
    FilterResult result = FilterList(post, list, o.config);
    const std::string list_path = (fs::path(o.out_dir) / (row.id + ".list")).string();
    run.Write(list_path, SerializeBiasingList(result.filtered));
    scp_out += row.id + "\t" + ScpRelative(row.path, scp_dir) + "\t" +
               ScpRelative(list_path, scp_dir) + "\n";
    reports.emplace_back(row.id, std::move(result.report));
  }
  run.Write(o.out_scp, scp_out);
  const std::string report_path =
      o.report.empty() ? (fs::path(o.out_dir) / "filter_report.json").string() : o.report;
  run.Write(report_path, SerializeFilterReports(reports));
  return o.out_scp;
}

std::string CmdDecode(const DecodeOpts& o, RunRecord& run) {
  if (o.posterior.empty() == o.scp.empty()) {
    throw UsageError("decode needs exactly one of --posterior or --scp");
  }
  if (o.beam == 0) throw UsageError("--beam must be at least 1");
  if (o.greedy && !o.boost_list.empty()) throw UsageError("--greedy cannot use --boost-list");
  run.config() = {{"mode", o.greedy ? "greedy" : "prefix_beam"},
                  {"beam", o.beam},
                  {"nbest", o.nbest},
                  {"boost_weight", o.boost_weight},
                  {"boost_list", !o.boost_list.empty()}};
  const Vocab vocab = LoadVocab(run, o.vocab);
  std::optional<BoostTrie> global_trie;
  if (!o.boost_list.empty()) global_trie = BoostTrie::FromList(LoadList(run, o.boost_list, vocab));

  std::vector<ScpRow> rows;
  if (!o.posterior.empty()) {
    rows.push_back({o.utt_id.empty() ? fs::path(o.posterior).stem().string() : o.utt_id,
                    o.posterior, std::nullopt});
  } else {
    rows = ReadScp(run, o.scp);
  }

  TsvRows hyps;
  std::string scores = "utt_id\trank\ttext\tscore\tctc_log_prob\tboost\n";
  for (const ScpRow& row : rows) {
    const PosteriorMatrix post = LoadPosterior(run, row.path);
    if (post.vocab_size() != vocab.size()) {
      throw DomainError("posterior for '" + row.id + "' has " + std::to_string(post.vocab_size()) +
                        " columns but the vocab has " + std::to_string(vocab.size()));
    }
    if (o.greedy) {
      const LabelSeq best = GreedyDecode(post);
      hyps.emplace_back(row.id, Detokenize(best, vocab));
      scores += row.id + "\t1\t" + hyps.back().second + "\t" +
                FormatDouble(GreedyPathLogProb(post)) + "\t" +
                FormatDouble(GreedyPathLogProb(post)) + "\t0\n";
      continue;
    }
    std::optional<BoostTrie> utt_trie;
    if (row.list && !o.greedy) utt_trie = BoostTrie::FromList(LoadList(run, *row.list, vocab));
    DecodeOptions options;
    options.beam = o.beam;
    options.boost = utt_trie ? &*utt_trie : (global_trie ? &*global_trie : nullptr);
    options.boost_weight = o.boost_weight;
    const std::vector<Hypothesis> beam = PrefixBeamDecode(post, options);
    hyps.emplace_back(row.id, Detokenize(beam.front().tokens, vocab));
    for (std::size_t r = 0; r < std::min(o.nbest, beam.size()); ++r) {
      scores += row.id + "\t" + std::to_string(r + 1) + "\t" + Detokenize(beam[r].tokens, vocab) +
                "\t" + FormatDouble(beam[r].score) + "\t" + FormatDouble(beam[r].ctc_log_prob) +
                "\t" + FormatDouble(beam[r].boost) + "\n";
    }
  }
  run.Write(o.out, SerializeTsv(hyps));
  if (!o.scores.empty()) run.Write(o.scores, scores);
  return o.out;
}

std::string CmdScore(const ScoreOpts& o, RunRecord& run, std::ostream& out) {
  const TsvRows refs = ParseTsv(run.Read(o.ref), o.ref);
  const TsvRows hyps = ParseTsv(run.Read(o.hyp), o.hyp);
  std::map<std::string, std::string> hyp_by_id(hyps.begin(), hyps.end());
  std::set<std::string> ref_ids;
  for (const auto& row : refs) ref_ids.insert(row.first);
  std::vector<std::string> only_ref, only_hyp;
  for (const auto& id : ref_ids) {
    if (!hyp_by_id.contains(id)) only_ref.push_back(id);
  }
  for (const auto& [id, text] : hyp_by_id) {
    if (!ref_ids.contains(id)) only_hyp.push_back(id);
  }
  if (!only_ref.empty() || !only_hyp.empty()) {
    std::string msg = "utterance ids differ between reference and hypothesis";
    for (const auto& id : only_ref) msg += "\n  - " + id + " (reference only)";
    for (const auto& id : only_hyp) msg += "\n  + " + id + " (hypothesis only)";
    throw DomainError(msg);
  }

  std::set<std::string> biased;
  std::vector<WordSeq> phrases;
  if (!o.list.empty()) {
    for (const ListEntry& e : ParseListEntries(run.Read(o.list))) {
      WordSeq words = SplitWords(NormalizeText(e.text));
      if (words.empty()) continue;
      biased.insert(words.begin(), words.end());
      phrases.push_back(std::move(words));
    }
  }
  run.config() = {{"list_phrases", phrases.size()}, {"biased_words", biased.size()}};

  std::string report = "# WER (U-WER/B-WER) in percent; counts are errors/reference words\n";
  CorpusScore corpus;
  std::vector<WordSeq> ref_words, hyp_words;
  for (const auto& [id, text] : refs) {
    ref_words.push_back(SplitWords(NormalizeText(text)));
    hyp_words.push_back(SplitWords(NormalizeText(hyp_by_id.at(id))));
    const ScoredTranscript s = Score(ref_words.back(), hyp_words.back(), biased);
    corpus.Add(s);
    report += ScoreLine(id, s) + "\n";
  }
  report += ScoreLine("corpus", corpus) + " utterances=" + std::to_string(corpus.utterances) + "\n";
  if (!phrases.empty()) {
    const PhraseMetrics m = PhrasePrf(ref_words, hyp_words, phrases);
    report += "phrases\trecall=" + Ratio(m.recall) + " precision=" + Ratio(m.precision) +
              " f1=" + Ratio(m.f1) + " ref=" + std::to_string(m.ref_occurrences) +
              " hyp=" + std::to_string(m.hyp_occurrences) +
              " matched=" + std::to_string(m.matched) + "\n";
  }
  if (o.out.empty()) {
    out << report;
    return "";
  }
  run.Write(o.out, report);
  return o.out;
}

std::string CmdSynth(SynthOpts o, RunRecord& run) {
  o.config.seed = ResolveSeed(o.seed, 1, run.argv());
  run.SetSeed(o.config.seed);
  const SynthConfig& c = o.config;
  run.config() = {{"num_utterances", c.num_utterances}, {"min_words", c.min_words},
                  {"max_words", c.max_words},           {"common_words", c.common_words},
                  {"rare_lexicon", c.rare_lexicon},     {"active_rare", c.active_rare},
                  {"rare_word_prob", c.rare_word_prob}, {"attenuation", c.attenuation},
                  {"peak", c.peak},                     {"max_token_frames", c.max_token_frames},
                  {"distractor_factor", c.distractor_factor},
                  {"feature_dim", c.feature_dim}};
  const SynthCorpus corpus = GenerateSynthCorpus(c);
  const fs::path dir(o.out_dir);
  auto path = [&](const std::string& name) { return (dir / name).string(); };

  run.Write(path("vocab.txt"), SerializeVocab(corpus.vocab));
  TsvRows refs;
  std::string post_scp, feat_scp;
  for (const SynthUtterance& u : corpus.utterances) {
    refs.emplace_back(u.id, u.text);
    run.Write(path("post/" + u.id + ".cpost"), EncodePosterior(u.posterior));
    post_scp += u.id + "\tpost/" + u.id + ".cpost\n";
    if (u.features) {
      run.Write(path("feats/" + u.id + ".cfeat"), EncodeFeatures(*u.features));
      feat_scp += u.id + "\tfeats/" + u.id + ".cfeat\n";
    }
  }
  run.Write(path("ref.tsv"), SerializeTsv(refs));
  run.Write(path("posteriors.scp"), post_scp);
  if (!feat_scp.empty()) run.Write(path("features.scp"), feat_scp);

  std::string true_list = "# rare words present in the corpus\n";
  for (const auto& w : corpus.true_bias) true_list += w + "\n";
  run.Write(path("true_list.txt"), true_list);
  std::string full_list = "# rare words present in the corpus plus distractors\n";
  for (const auto& w : corpus.true_bias) full_list += w + "\n";
  for (const auto& w : corpus.distractors) full_list += w + "\tD\n";
  run.Write(path("distractor_list.txt"), full_list);
  std::string lexicon;
  for (const auto& w : corpus.rare_lexicon) lexicon += w + "\n";
  run.Write(path("rare_lexicon.txt"), lexicon);
  return path("manifest.json");
}

std::string CmdSelfCheck(const SelfCheckOpts& o, RunRecord& run, std::ostream& out, bool& ok) {
  SelfCheckOptions options;
  options.seed = ResolveSeed(o.seed, options.seed, run.argv());
  run.SetSeed(options.seed);
  const std::vector<SuiteResult> suites = RunSelfCheck(options);
  std::string report;
  ok = true;
  for (const SuiteResult& s : suites) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-4s %-24s %zu/%zu  max_error=%.3e", s.ok() ? "PASS" : "FAIL",
                  s.name.c_str(), s.passed, s.total, s.max_error);
    report += line;
    if (!s.ok()) report += "  first_failure: " + s.first_failure;
    report += "\n";
    ok = ok && s.ok();
  }
  report += std::string("selfcheck: ") + (ok ? "PASS" : "FAIL") + " (" +
            std::to_string(suites.size()) + " suites)\n";
  out << report;
  if (o.out.empty()) return "";
  run.Write(o.out, report);
  return o.out;
}

int CmdReplay(const ReplayOpts& o, std::ostream& out, std::ostream& err) {
  json doc;
  try {
    doc = json::parse(ReadFile(o.manifest));
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), o.manifest);
  }
  if (doc.value("format", "") != kManifestFormat) {
    throw ParseError("unsupported manifest format", o.manifest);
  }
  for (const auto& in : doc.at("inputs")) {
    const std::string path = in.at("path");
    if (Sha256Hex(ReadFile(path)) != in.at("sha256").get<std::string>()) {
      throw DomainError("input changed since the manifest was written: " + path);
    }
  }
  std::vector<std::string> argv = doc.at("argv").get<std::vector<std::string>>();
  const std::string scratch = o.manifest + ".replay";
  argv.push_back("--manifest");
  argv.push_back(scratch);
  std::ostringstream sink;
  const int code = RunCli(argv, sink, err);
  std::error_code ec;
  fs::remove(scratch, ec);
  if (code != kExitOk) {
    err << "replay: command exited with status " << code << "\n";
    return code;
  }
  std::size_t mismatches = 0;
  for (const auto& outf : doc.at("outputs")) {
    const std::string path = outf.at("path");
    if (Sha256Hex(ReadFile(path)) != outf.at("sha256").get<std::string>()) {
      ++mismatches;
      err << "replay: output differs: " << path << "\n";
    }
  }
  out << "replay: " << doc.at("outputs").size() - mismatches << "/" << doc.at("outputs").size()
      << " outputs identical\n";
  return o.verify && mismatches > 0 ? kExitDomain : kExitOk;
}

// Argument list with any --manifest option removed.
std::vector<std::string> StripManifest(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--manifest") {
      ++i;
      continue;
    }
    if (args[i].starts_with("--manifest=")) continue;
    out.push_back(args[i]);
  }
  return out;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual biasing toolkit for CTC posteriors", "ctxbias"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ToolkitVersion()));
  std::string manifest;

  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Run manifest path (default: <output>.manifest.json)");
  };
  auto unit = [](auto* opt) { return opt->check(CLI::Range(0.0, 1.0)); };

  InitWeightsOpts iw;
  auto* init = app.add_subcommand("init-weights", "Write a random weight bundle");
  init->add_option("--vocab", iw.vocab, "Vocab file")->required();
  init->add_option("--out", iw.out, "Weight bundle path")->required();
  init->add_option("--model-dim", iw.model_dim, "Model dimension d")->check(CLI::PositiveNumber);
  init->add_option("--hidden", iw.hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
  init->add_option("--heads", iw.heads, "Attention heads")->check(CLI::PositiveNumber);
  init->add_option("--scale", iw.scale, "Initialization scale");
  init->add_option("--seed", iw.seed, "Random seed (fallback: CTXBIAS_SEED)");
  add_manifest(init);

  GenFeaturesOpts gf;
  auto* gen = app.add_subcommand("gen-features", "Write random audio embeddings");
  gen->add_option("--out", gf.out, "Feature file path")->required();
  gen->add_option("--frames", gf.frames, "Frame count");
  gen->add_option("--dim", gf.dim, "Embedding dimension");
  gen->add_option("--scale", gf.scale, "Standard deviation");
  gen->add_option("--seed", gf.seed, "Random seed (fallback: CTXBIAS_SEED)");
  add_manifest(gen);

  ForwardOpts fw;
  auto* fwd = app.add_subcommand("forward", "Run the contextual model on audio embeddings");
  fwd->add_option("--weights", fw.weights, "Weight bundle")->required();
  fwd->add_option("--vocab", fw.vocab, "Vocab file")->required();
  fwd->add_option("--features", fw.features, "Audio embedding file")->required();
  fwd->add_option("--list", fw.list, "Biasing list (default: no-bias only)");
  fwd->add_option("--out", fw.out, "Posterior output")->required();
  fwd->add_option("--dump-attn", fw.dump_attn, "Write the attention matrix here");
  add_manifest(fwd);

  FilterOpts fo;
  auto* filt = app.add_subcommand("filter", "Two-stage phrase filtering on first-pass posteriors");
  filt->add_option("--posterior", fo.posterior, "First-pass posterior");
  filt->add_option("--scp", fo.scp, "Corpus scp: id, posterior[, list]");
  filt->add_option("--list", fo.list, "Biasing list");
  filt->add_option("--vocab", fo.vocab, "Vocab file")->required();
  filt->add_option("--out-list", fo.out_list, "Filtered list (single utterance)");
  filt->add_option("--out-dir", fo.out_dir, "Filtered lists directory (corpus)");
  filt->add_option("--out-scp", fo.out_scp, "Output scp pointing at filtered lists (corpus)");
  filt->add_option("--report", fo.report, "Filter report path");
  unit(filt->add_option("--psc-th", fo.config.psc_threshold, "Stage-1 threshold"));
  unit(filt->add_option("--soc-th", fo.config.soc_threshold, "Stage-2 threshold"));
  filt->add_option("--window-scale", fo.config.window_scale, "Window width factor")
      ->check(CLI::Range(1.0, 1e9));
  filt->add_option("--stride", fo.config.stride, "Window stride")->check(CLI::PositiveNumber);
  filt->add_option("--max-kept", fo.config.max_kept, "Maximum phrases kept");
  add_manifest(filt);

  DecodeOpts dc;
  auto* dec = app.add_subcommand("decode", "Greedy or prefix-beam decoding with optional boosting");
  dec->add_option("--posterior", dc.posterior, "Posterior file");
  dec->add_option("--scp", dc.scp, "Corpus scp: id, posterior[, boost list]");
  dec->add_option("--vocab", dc.vocab, "Vocab file")->required();
  dec->add_option("--out", dc.out, "Hypothesis TSV")->required();
  dec->add_option("--utt-id", dc.utt_id, "Utterance id (single posterior)");
  dec->add_option("--beam", dc.beam, "Beam width");
  dec->add_flag("--greedy", dc.greedy, "Greedy decoding");
  dec->add_option("--boost-list", dc.boost_list, "Phrases to boost");
  dec->add_option("--boost-weight", dc.boost_weight, "Per-token boost")
      ->check(CLI::NonNegativeNumber);
  dec->add_option("--nbest", dc.nbest, "Hypotheses per utterance in --scores")
      ->check(CLI::PositiveNumber);
  dec->add_option("--scores", dc.scores, "Write ranked hypotheses with scores");
  add_manifest(dec);

  ScoreOpts so;
  auto* sco = app.add_subcommand("score", "WER with U-WER/B-WER split");
  sco->add_option("--ref", so.ref, "Reference TSV")->required();
  sco->add_option("--hyp", so.hyp, "Hypothesis TSV")->required();
  sco->add_option("--list", so.list, "Biasing list");
  sco->add_option("--out", so.out, "Report path (default: stdout)");
  add_manifest(sco);

  SynthOpts sy;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic corpus");
  syn->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  syn->add_option("--seed", sy.seed, "Random seed (fallback: CTXBIAS_SEED)");
  syn->add_option("--num-utts", sy.config.num_utterances, "Utterance count");
  syn->add_option("--min-words", sy.config.min_words, "Minimum words per utterance");
  syn->add_option("--max-words", sy.config.max_words, "Maximum words per utterance");
  syn->add_option("--common-words", sy.config.common_words, "Common word pool size");
  syn->add_option("--rare-lexicon", sy.config.rare_lexicon, "Rare lexicon size");
  syn->add_option("--active-rare", sy.config.active_rare, "Rare words eligible for use");
  syn->add_option("--rare-prob", sy.config.rare_word_prob, "Probability a word is rare");
  syn->add_option("--attenuation", sy.config.attenuation, "Rare-token mass multiplier");
  syn->add_option("--peak", sy.config.peak, "Target mass of a clean frame");
  syn->add_option("--max-token-frames", sy.config.max_token_frames, "Frames per token upper bound");
  syn->add_option("--distractor-factor", sy.config.distractor_factor, "Distractors per true word");
  syn->add_option("--feature-dim", sy.config.feature_dim, "Also emit features of this size");
  add_manifest(syn);

  SelfCheckOpts sc;
  auto* self = app.add_subcommand("selfcheck", "Run the oracle suites");
  self->add_option("--seed", sc.seed, "Random seed (fallback: CTXBIAS_SEED)");
  self->add_option("--out", sc.out, "Also write the report here");
  add_manifest(self);

  ReplayOpts rp;
  auto* rep = app.add_subcommand("replay", "Re-run a command from its manifest");
  rep->add_option("manifest", rp.manifest, "Manifest path")->required();
  rep->add_flag("--verify", rp.verify, "Fail unless every output is reproduced byte for byte");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  RunRecord run(name, StripManifest(args));
  try {
    if (sub == rep) return CmdReplay(rp, out, err);
    std::string primary;
    bool selfcheck_ok = true;
    if (sub == init) primary = CmdInitWeights(iw, run);
    if (sub == gen) primary = CmdGenFeatures(gf, run);
    if (sub == fwd) primary = CmdForward(fw, run);
    if (sub == filt) primary = CmdFilter(fo, run);
    if (sub == dec) primary = CmdDecode(dc, run);
    if (sub == sco) primary = CmdScore(so, run, out);
    if (sub == syn) primary = CmdSynth(sy, run);
    if (sub == self) primary = CmdSelfCheck(sc, run, out, selfcheck_ok);

    std::string manifest_path = manifest;
    if (manifest_path.empty() && !primary.empty()) {
      manifest_path = sub == syn ? primary : DefaultManifestPath(primary);
    }
    if (!manifest_path.empty()) WriteFileAtomic(manifest_path, run.Manifest());
    return selfcheck_ok ? kExitOk : kExitDomain;
  } catch (const UsageError& e) {
    err << "ctxbias " << name << ": usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "ctxbias " << name << ": parse error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "ctxbias " << name << ": error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace ctxbias
