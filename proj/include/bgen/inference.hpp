#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bgen/tasks.hpp"
#include "bgen/transformer.hpp"
#include "bgen/vocab.hpp"

namespace bgen {

// ---- greedy decoding ----

// Generates target ids for one conditioning sample (its tgt field is
// ignored). Each step composes the full input with the current prefix plus
// the mask, recomputes every representation from scratch, and appends the
// highest-scoring token (ties break toward the lowest id; the mask token is
// never emitted). Stops when STOP is produced or the length cap is reached;
// STOP is not part of the returned ids.
//
// max_len <= 0 selects the default cap 2·|src| + 8. The cap is additionally
// clamped so every composed input fits max_positions.
std::vector<int> greedy_decode(const Model& m, const Sample& conditioning, int specifier,
                               int max_len = 0);

// Σₜ −log P(tgtₜ | conditioning, gold prefix), one forward pass per target
// position. Factorized-evaluation oracle for the unrolled training loss.
double stepwise_nll(const Model& m, const Sample& sample, int specifier);

// ---- corpus BLEU ----

// Corpus-level BLEU on whitespace tokens: geometric mean of clipped modified
// n-gram precisions (n = 1..max_n) times the brevity penalty, scaled to
// [0, 100]. No smoothing: any zero precision gives 0. One reference per line.
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            int max_n = 4);

// ---- evaluation harnesses ----

struct EvalReport {
  std::string mode;       // "plain", "congruence", or "zero_shot"
  std::string direction;  // "en->de" style, when the task defines one
  int lines = 0;
  double bleu = 0.0;         // congruent-mapping score in congruence mode
  double exact_match = 0.0;  // fraction of lines decoded exactly
  bool zero_shot = false;
  double congruent = 0.0;  // congruence mode only
  double incongruent = 0.0;
  double delta = 0.0;  // congruent − incongruent

  std::string summary_line() const;
};

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
void write_eval_report(const EvalReport& report, const std::string& path);
EvalReport read_eval_report(const std::string& path);

// Decodes every corpus line under the task's modality, order-preserving.
// Returned hypotheses are rendered text (specials dropped).
std::vector<std::string> decode_corpus(const Model& m, const Vocabulary& vocab,
                                       const TaskSpec& task, const std::vector<RawSample>& corpus,
                                       int max_len = 0);

// BLEU + exact match of the task's decodes against the corpus targets.
EvalReport evaluate_corpus(const Model& m, const Vocabulary& vocab, const TaskSpec& task,
                           const std::vector<RawSample>& corpus, int max_len = 0);

// Decodes the corpus twice — original image mapping, then a seeded
// derangement of the images — and reports both scores and their difference.
// A task configuration without images makes both passes identical, so the
// delta is exactly zero.
EvalReport congruence_eval(const Model& m, const Vocabulary& vocab, const TaskSpec& task,
                           const std::vector<RawSample>& corpus, std::uint64_t seed,
                           int max_len = 0);

// Scores a (source language → target language) direction that none of the
// trained tasks covered; rejects directions present in the registry.
EvalReport zero_shot_eval(const Model& m, const Vocabulary& vocab,
                          const std::vector<TaskSpec>& trained_tasks, const TaskSpec& eval_task,
                          const std::vector<RawSample>& corpus, int max_len = 0);

}  // namespace bgen
