// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
//
// usage: acceptance <ctxbias binary> <test data dir> <scratch dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "ctxbias/context_bias.h"
#include "ctxbias/io.h"
#include "ctxbias/phrase_filter.h"
#include "ctxbias/selfcheck.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ctxbias;

namespace {

std::string g_cli;
std::string g_data;
fs::path g_work;

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string Quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI through the shell; returns exit status and captured stdout.
std::pair<int, std::string> Cli(const std::string& args) {
  const std::string cmd = Quote(g_cli) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string Fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof(b), f, a);
  return b;
}

std::string Data(const std::string& name) { return g_data + "/" + name; }
std::string Work(const std::string& name) { return (g_work / name).string(); }

const SuiteResult* Find(const std::vector<SuiteResult>& suites, const std::string& name) {
  for (const auto& s : suites) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

Outcome FromSuite(const std::vector<SuiteResult>& suites, const std::string& name,
                  double time_limit) {
  const SuiteResult* s = Find(suites, name);
  if (s == nullptr) return {false, "suite missing"};
  Outcome o;
  o.ok = s->ok() && (time_limit <= 0.0 || s->seconds < time_limit);
  o.detail = std::to_string(s->passed) + "/" + std::to_string(s->total) +
             " checks, max error " + Fmt("%.2e", s->max_error) + ", " +
             Fmt("%.2f", s->seconds) + " s";
  if (!s->first_failure.empty()) o.detail += ", first failure " + s->first_failure;
  return o;
}

Outcome FilterFixture() {
  const PosteriorMatrix post = PosteriorMatrix::FromProbs(
      Matrix::FromRows({{0.8, 0.1, 0.1}, {0.1, 0.7, 0.2}, {0.1, 0.2, 0.7}}));
  const FilterConfig cfg;
  const double psc_ab = PhraseScoreConfidence(post, {1, 2}, cfg);
  const double psc_ba = PhraseScoreConfidence(post, {2, 1}, cfg);
  const double soc_ab = SequenceOrderConfidence(post, {1, 2}, cfg);
  const double soc_ba = SequenceOrderConfidence(post, {2, 1}, cfg);
  bool ok = std::fabs(psc_ab - 0.7) < 1e-12 && std::fabs(psc_ba - 0.7) < 1e-12 &&
            std::fabs(soc_ab - 0.7) < 1e-12 && std::fabs(soc_ba - 0.4) < 1e-12;

  // The shipped f32 copy through the command line.
  const auto [code, out] =
      Cli("filter --posterior " + Quote(Data("filter_fixture.cpost")) + " --list " +
          Quote(Data("filter_list.txt")) + " --vocab " + Quote(Data("filter_vocab.txt")) +
          " --psc-th 0.5 --soc-th 0.5 --out-list " + Quote(Work("c4/kept.list")));
  const std::string kept = code == 0 ? ReadFile(Work("c4/kept.list")) : out;
  ok = ok && code == 0 && kept == "ab\n";
  return {ok, "psc(ab)=" + Fmt("%.6g", psc_ab) + " psc(ba)=" + Fmt("%.6g", psc_ba) +
                  " soc(ab)=" + Fmt("%.6g", soc_ab) + " soc(ba)=" + Fmt("%.6g", soc_ba) +
                  ", kept list " + json(kept).dump()};
}

Outcome SecondPassFixture() {
  const Vocab vocab = ReadVocabFile(Data("vocab.txt"));
  const BiasModelWeights weights = ReadWeightsFile(Data("weights.json"));
  const Matrix audio = ReadFeatureFile(Data("features.cfeat"));
  const PosteriorMatrix first = FirstPass(audio, weights);

  // Thresholds of 1 drop every phrase of the shipped list.
  FilterConfig cfg;
  cfg.psc_threshold = 1.0;
  cfg.soc_threshold = 1.0;
  const BiasingList list = ReadBiasingListFile(Data("list.txt"), vocab);
  const FilterResult filtered = FilterList(first, list, cfg);
  const PosteriorMatrix second = SecondPass(audio, filtered.filtered, weights);
  const bool in_process = filtered.filtered.num_phrases() == 0 && second == first;

  // The same through the command line against the checked-in first pass.
  const auto [code, out] = Cli("forward --weights " + Quote(Data("weights.json")) + " --vocab " +
                               Quote(Data("vocab.txt")) + " --features " +
                               Quote(Data("features.cfeat")) + " --out " +
                               Quote(Work("c5/second.cpost")));
  const bool on_disk =
      code == 0 && ReadFile(Work("c5/second.cpost")) == ReadFile(Data("golden_first_pass.cpost"));
  return {in_process && on_disk,
          std::to_string(filtered.filtered.num_phrases()) + " phrases kept of " +
              std::to_string(list.num_phrases()) + ", in-process " +
              (in_process ? "bit-identical" : "differs") + ", file " +
              (on_disk ? "byte-identical" : "differs")};
}

struct Rates {
  std::size_t b_err = 0, b_n = 0, u_err = 0, u_n = 0;
  double b() const { return b_n ? 100.0 * static_cast<double>(b_err) / static_cast<double>(b_n) : 0.0; }
  double u() const { return u_n ? 100.0 * static_cast<double>(u_err) / static_cast<double>(u_n) : 0.0; }
};

bool ScoreCorpus(const std::string& dir, const std::string& hyp, Rates& r, std::string& err) {
  const auto [code, out] = Cli("score --ref " + Quote(dir + "/ref.tsv") + " --hyp " + Quote(hyp) +
                               " --list " + Quote(dir + "/true_list.txt"));
  std::smatch m;
  static const std::regex kCorpus(R"(corpus\t.*u_wer=(\d+)/(\d+) b_wer=(\d+)/(\d+))");
  if (code != 0 || !std::regex_search(out, m, kCorpus)) {
    err = "score failed: " + out;
    return false;
  }
  r.u_err = std::stoul(m[1]);
  r.u_n = std::stoul(m[2]);
  r.b_err = std::stoul(m[3]);
  r.b_n = std::stoul(m[4]);
  return true;
}

bool Decode(const std::string& dir, const std::string& scp, const std::string& extra,
            const std::string& hyp, std::string& err) {
  const auto [code, out] = Cli("decode --scp " + Quote(scp) + " --vocab " +
                               Quote(dir + "/vocab.txt") + " --out " + Quote(hyp) + " " + extra);
  if (code != 0) err = "decode failed: " + out;
  return code == 0;
}

// Filters the distractor-heavy list per utterance, decodes with the kept
// lists and scores. The largest kept-list size goes to `largest`.
bool FilteredRun(const std::string& dir, double soc_th, std::size_t cap, const std::string& tag,
                 Rates& r, std::size_t& largest, std::string& err) {
  const std::string out_dir = dir + "/filtered_" + tag;
  const auto [code, out] =
      Cli("filter --scp " + Quote(dir + "/with_distractors.scp") + " --vocab " +
          Quote(dir + "/vocab.txt") + " --psc-th 0.3 --soc-th " + Fmt("%g", soc_th) +
          " --max-kept " + std::to_string(cap) + " --out-dir " + Quote(out_dir) + " --out-scp " +
          Quote(out_dir + ".scp"));
  if (code != 0) {
    err = "filter failed: " + out;
    return false;
  }
  largest = 0;
  const json report = json::parse(ReadFile(out_dir + "/filter_report.json"));
  for (const auto& u : report["utterances"]) {
    largest = std::max<std::size_t>(largest, u["counters"]["kept"].get<std::size_t>());
  }
  const std::string hyp = dir + "/hyp_filtered_" + tag + ".tsv";
  return Decode(dir, out_dir + ".scp", "", hyp, err) && ScoreCorpus(dir, hyp, r, err);
}

Outcome SyntheticTrend() {
  const std::string dir = Work("c7");
  std::string err;
  const auto [code, out] = Cli("synth --out-dir " + Quote(dir) + " --seed 7 --attenuation 0.4");
  if (code != 0) return {false, "synth failed: " + out};

  Rates plain, boosted, distract, filtered, filtered_default;
  if (!Decode(dir, dir + "/posteriors.scp", "", dir + "/hyp_plain.tsv", err) ||
      !ScoreCorpus(dir, dir + "/hyp_plain.tsv", plain, err) ||
      !Decode(dir, dir + "/posteriors.scp", "--boost-list " + Quote(dir + "/true_list.txt"),
              dir + "/hyp_true.tsv", err) ||
      !ScoreCorpus(dir, dir + "/hyp_true.tsv", boosted, err) ||
      !Decode(dir, dir + "/posteriors.scp", "--boost-list " + Quote(dir + "/distractor_list.txt"),
              dir + "/hyp_distract.tsv", err) ||
      !ScoreCorpus(dir, dir + "/hyp_distract.tsv", distract, err)) {
    return {false, err};
  }

  // Every utterance gets the true list plus ten distractors per true word.
  {
    std::istringstream in(ReadFile(dir + "/posteriors.scp"));
    std::string scp;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) scp += line + "\tdistractor_list.txt\n";
    }
    WriteFileAtomic(dir + "/with_distractors.scp", scp);
  }
  constexpr std::size_t kMaxKept = 100;
  std::size_t largest = 0, largest_default = 0;
  if (!FilteredRun(dir, 0.3, kMaxKept, "soc0.3", filtered, largest, err)) return {false, err};
  if (!FilteredRun(dir, 0.4, kMaxKept, "soc0.4", filtered_default, largest_default, err)) {
    return {false, err};
  }

  const double gain = plain.b() - boosted.b();
  const double relative = plain.b() > 0.0 ? gain / plain.b() : 0.0;
  const double u_shift = std::fabs(boosted.u() - plain.u());
  const double restored = gain > 0.0 ? (plain.b() - filtered.b()) / gain : 0.0;
  const double restored_default = gain > 0.0 ? (plain.b() - filtered_default.b()) / gain : 0.0;
  const bool ok = relative >= 0.30 && u_shift <= 2.0 && restored >= 0.90 && largest <= kMaxKept;

  std::ostringstream d;
  d << "B-WER plain " << Fmt("%.2f", plain.b()) << " -> boosted " << Fmt("%.2f", boosted.b())
    << " (" << Fmt("%.1f", 100.0 * relative) << "% relative), U-WER shift "
    << Fmt("%.2f", u_shift) << " pts; distractor list unfiltered " << Fmt("%.2f", distract.b())
    << "; filtered (psc 0.3, soc 0.3) " << Fmt("%.2f", filtered.b()) << ", "
    << Fmt("%.1f", 100.0 * restored) << "% of gain restored, largest kept list " << largest
    << " <= " << kMaxKept << "; [info] default soc 0.4 restores "
    << Fmt("%.1f", 100.0 * restored_default) << "%";
  return {ok, d.str()};
}

// Every command once, then replayed from its manifest with byte comparison.
Outcome Determinism() {
  const std::string d = Work("c8");
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"init-weights --vocab " + Quote(Data("vocab.txt")) + " --out " + Quote(d + "/w.json") +
           " --model-dim 8 --hidden 4 --heads 2 --seed 3",
       d + "/w.json.manifest.json"},
      {"gen-features --out " + Quote(d + "/f.cfeat") + " --frames 7 --dim 8 --seed 4",
       d + "/f.cfeat.manifest.json"},
      {"forward --weights " + Quote(d + "/w.json") + " --vocab " + Quote(Data("vocab.txt")) +
           " --features " + Quote(d + "/f.cfeat") + " --list " + Quote(Data("list.txt")) +
           " --out " + Quote(d + "/p.cpost") + " --dump-attn " + Quote(d + "/attn.txt"),
       d + "/p.cpost.manifest.json"},
      {"filter --posterior " + Quote(d + "/p.cpost") + " --list " + Quote(Data("list.txt")) +
           " --vocab " + Quote(Data("vocab.txt")) + " --psc-th 0.1 --soc-th 0.05 --out-list " +
           Quote(d + "/kept.list"),
       d + "/kept.list.manifest.json"},
      {"synth --out-dir " + Quote(d + "/syn") + " --seed 9 --num-utts 6 --feature-dim 4",
       d + "/syn/manifest.json"},
      {"decode --scp " + Quote(d + "/syn/posteriors.scp") + " --vocab " +
           Quote(d + "/syn/vocab.txt") + " --boost-list " + Quote(d + "/syn/true_list.txt") +
           " --out " + Quote(d + "/hyp.tsv") + " --scores " + Quote(d + "/scores.tsv") +
           " --nbest 3",
       d + "/hyp.tsv.manifest.json"},
      {"score --ref " + Quote(d + "/syn/ref.tsv") + " --hyp " + Quote(d + "/hyp.tsv") +
           " --list " + Quote(d + "/syn/true_list.txt") + " --out " + Quote(d + "/score.txt"),
       d + "/score.txt.manifest.json"},
      {"selfcheck --out " + Quote(d + "/selfcheck.txt"), d + "/selfcheck.txt.manifest.json"},
  };
  std::size_t identical = 0;
  std::string failures;
  for (const auto& [args, manifest] : runs) {
    const std::string name = args.substr(0, args.find(' '));
    const auto [code, out] = Cli(args);
    if (code != 0) {
      failures += " " + name + "(run: " + out + ")";
      continue;
    }
    const auto [rcode, rout] = Cli("replay --verify " + Quote(manifest));
    if (rcode == 0) {
      ++identical;
    } else {
      failures += " " + name + "(" + rout + ")";
    }
  }
  return {identical == runs.size(),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " commands replayed byte-identically" + (failures.empty() ? "" : ";" + failures)};
}

template <typename F>
Outcome Guard(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <ctxbias binary> <test data dir> <scratch dir>\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  g_data = fs::absolute(argv[2]).string();
  g_work = fs::absolute(argv[3]);
  fs::remove_all(g_work);
  for (const char* sub : {"c4", "c5", "c7", "c8"}) fs::create_directories(g_work / sub);

  std::vector<SuiteResult> suites;
  try {
    suites = RunSelfCheck(SelfCheckOptions{});
  } catch (const std::exception& e) {
    std::cerr << "selfcheck threw: " << e.what() << "\n";
  }

  const std::vector<std::pair<std::string, Outcome>> results = {
      {"ctc loss matches path enumeration", Guard([&] { return FromSuite(suites, "ctc_oracle", 30.0); })},
      {"ctc gradient matches finite differences",
       Guard([&] { return FromSuite(suites, "ctc_gradient", 10.0); })},
      {"soc matches enumeration, soc <= psc", Guard([&] { return FromSuite(suites, "soc_oracle", 0.0); })},
      {"filter fixture scores and verdicts", Guard(FilterFixture)},
      {"second pass with no-bias list equals first pass", Guard(SecondPassFixture)},
      {"wer bookkeeping sums and distance oracle",
       Guard([&] { return FromSuite(suites, "wer_bookkeeping", 0.0); })},
      {"synthetic biasing trend", Guard(SyntheticTrend)},
      {"cli determinism under replay", Guard(Determinism)},
  };

  bool all = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, o] = results[i];
    all = all && o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << " " << i + 1 << " " << name << ": " << o.detail
              << "\n";
  }
  std::cout << (all ? "acceptance: all criteria pass" : "acceptance: FAILURES") << "\n";
  return all ? 0 : 1;
}
