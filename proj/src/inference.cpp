#include "bgen/inference.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bgen/embeddings.hpp"
#include "bgen/tensor.hpp"

namespace bgen {

using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string direction_of(const TaskSpec& task) {
  if (task.source_language.empty()) return "->" + task.target_language;
  return task.source_language + "->" + task.target_language;
}

// Strips the region payload so a text-only task configuration can encode an
// image-bearing corpus (the images are simply not consumed).
RawSample drop_regions(RawSample raw) {
  raw.regions.reset();
  return raw;
}

}  // namespace

// ---- greedy decoding ----

std::vector<int> greedy_decode(const Model& m, const Sample& conditioning, int specifier,
                               int max_len) {
  if (max_len <= 0) max_len = 2 * static_cast<int>(conditioning.src.size()) + 8;

  // Keep every composed input (conditioning + prefix + mask) within the
  // positional table.
  int overhead = 1 + 1;  // specifier + mask
  if (!conditioning.src.empty()) overhead += static_cast<int>(conditioning.src.size()) + 1;
  if (conditioning.has_image) {
    overhead += 1 + static_cast<int>(conditioning.regions.size());  // sep + regions
  }
  const int capacity = m.config.max_positions - overhead;
  const int cap = std::min(max_len, capacity < 0 ? 0 : capacity);

  EmbeddingTables tables = embedding_tables(m.params);
  NoGrad frozen;
  std::vector<int> prefix;
  while (static_cast<int>(prefix.size()) < cap) {
    ComposedInput in = compose_input(conditioning, prefix, specifier, tables);
    Tensor logits = forward(m, in);
    int best = -1;
    double best_score = 0;
    for (int j = 0; j < logits.cols(); ++j) {
      if (j == Vocabulary::kMask) continue;  // never emitted: prefixes may not contain it
      double s = logits.at(0, j);
      if (best < 0 || s > best_score) {
        best = j;
        best_score = s;
      }
    }
    if (best == Vocabulary::kStop) break;
    prefix.push_back(best);
  }
  return prefix;
}

double stepwise_nll(const Model& m, const Sample& sample, int specifier) {
  if (sample.tgt.empty()) throw std::invalid_argument("stepwise_nll: sample has empty target");
  double total = 0;
  for (int t = 1; t <= static_cast<int>(sample.tgt.size()); ++t) {
    MaskedExample ex = resolve(sample, specifier, UnrolledExample{0, t, sample.tgt[t - 1]});
    Tensor logits = forward(m, compose_example(m, ex));
    total += cross_entropy(logits, ex.gold).item();
  }
  return total;
}

// ---- corpus BLEU ----

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            int max_n) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) +
                                " hypotheses vs " + std::to_string(references.size()) +
                                " references");
  }
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be positive");

  std::vector<long long> matches(max_n, 0), totals(max_n, 0);
  long long hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = split_tokens(hypotheses[i]);
    const auto ref = split_tokens(references[i]);
    hyp_len += static_cast<long long>(hyp.size());
    ref_len += static_cast<long long>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      if (static_cast<int>(hyp.size()) < n) continue;
      std::map<std::vector<std::string>, long long> hyp_counts, ref_counts;
      for (size_t j = 0; j + n <= hyp.size(); ++j) {
        ++hyp_counts[std::vector<std::string>(hyp.begin() + j, hyp.begin() + j + n)];
      }
      for (size_t j = 0; j + n <= ref.size(); ++j) {
        ++ref_counts[std::vector<std::string>(ref.begin() + j, ref.begin() + j + n)];
      }
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_precision = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (matches[n - 1] == 0 || totals[n - 1] == 0) return 0.0;  // no smoothing
    log_precision += std::log(static_cast<double>(matches[n - 1]) / totals[n - 1]);
  }
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_precision / max_n);
}

// ---- evaluation harnesses ----

std::string EvalReport::summary_line() const {
  char buf[256];
  if (mode == "congruence") {
    std::snprintf(buf, sizeof(buf),
                  "congruence %s: congruent %.2f incongruent %.2f delta %.2f (%d lines)",
                  direction.c_str(), congruent, incongruent, delta, lines);
  } else {
    std::snprintf(buf, sizeof(buf), "%s %s: BLEU %.2f exact %.1f%% (%d lines)%s", mode.c_str(),
                  direction.c_str(), bleu, 100.0 * exact_match, lines,
                  zero_shot ? " [zero-shot]" : "");
  }
  return buf;
}

std::string eval_report_to_json(const EvalReport& r) {
  ordered_json j{{"mode", r.mode},
                 {"direction", r.direction},
                 {"lines", r.lines},
                 {"bleu", r.bleu},
                 {"exact_match", r.exact_match},
                 {"zero_shot", r.zero_shot},
                 {"congruent", r.congruent},
                 {"incongruent", r.incongruent},
                 {"delta", r.delta}};
  return j.dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("eval report does not parse: ") + e.what());
  }
  EvalReport r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.direction = j.at("direction").get<std::string>();
    r.lines = j.at("lines").get<int>();
    r.bleu = j.at("bleu").get<double>();
    r.exact_match = j.at("exact_match").get<double>();
    r.zero_shot = j.at("zero_shot").get<bool>();
    r.congruent = j.at("congruent").get<double>();
    r.incongruent = j.at("incongruent").get<double>();
    r.delta = j.at("delta").get<double>();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("eval report is missing fields: ") + e.what());
  }
  return r;
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_eval_report: cannot open " + path);
  out << eval_report_to_json(report) << "\n";
  if (!out) throw std::runtime_error("write_eval_report: write to " + path + " failed");
}

EvalReport read_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_eval_report: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return eval_report_from_json(buf.str());
}

std::vector<std::string> decode_corpus(const Model& m, const Vocabulary& vocab,
                                       const TaskSpec& task, const std::vector<RawSample>& corpus,
                                       int max_len) {
  const int spec_id = vocab.specifier(task.target_language);
  std::vector<std::string> hypotheses;
  hypotheses.reserve(corpus.size());
  for (const RawSample& raw : corpus) {
    const RawSample fitted =
        modality_has_image(task.modality) || !raw.regions ? raw : drop_regions(raw);
    Sample s = encode_sample(fitted, vocab, task, m.config.d_v);
    hypotheses.push_back(vocab.decode(greedy_decode(m, s, spec_id, max_len)));
  }
  return hypotheses;
}

EvalReport evaluate_corpus(const Model& m, const Vocabulary& vocab, const TaskSpec& task,
                           const std::vector<RawSample>& corpus, int max_len) {
  std::vector<std::string> hyps = decode_corpus(m, vocab, task, corpus, max_len);
  std::vector<std::string> refs;
  refs.reserve(corpus.size());
  int exact = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    // Normalize the reference the way encoding would (case and whitespace)
    // but keep out-of-vocabulary words as themselves: decodes can only emit
    // vocabulary words, so coverage gaps score 0 instead of colliding at the
    // unknown marker.
    std::vector<std::string> words = Vocabulary::split_words(Vocabulary::lowercase(corpus[i].tgt));
    std::string ref;
    for (size_t w = 0; w < words.size(); ++w) {
      if (w > 0) ref += ' ';
      ref += words[w];
    }
    refs.push_back(std::move(ref));
    if (split_tokens(hyps[i]) == split_tokens(refs.back())) ++exact;
  }
  EvalReport r;
  r.mode = "plain";
  r.direction = direction_of(task);
  r.lines = static_cast<int>(corpus.size());
  r.bleu = bleu(hyps, refs);
  r.exact_match = corpus.empty() ? 0.0 : static_cast<double>(exact) / corpus.size();
  return r;
}

EvalReport congruence_eval(const Model& m, const Vocabulary& vocab, const TaskSpec& task,
                           const std::vector<RawSample>& corpus, std::uint64_t seed, int max_len) {
  // decode_corpus drops the regions for image-less task configurations, so
  // the derangement cannot reach such a model and the delta is exactly zero.
  std::vector<RawSample> shuffled = shuffle_images(corpus, seed);
  EvalReport congruent = evaluate_corpus(m, vocab, task, corpus, max_len);
  EvalReport incongruent = evaluate_corpus(m, vocab, task, shuffled, max_len);

  EvalReport r;
  r.mode = "congruence";
  r.direction = direction_of(task);
  r.lines = congruent.lines;
  r.congruent = congruent.bleu;
  r.incongruent = incongruent.bleu;
  r.delta = r.congruent - r.incongruent;
  r.bleu = r.congruent;
  r.exact_match = congruent.exact_match;
  return r;
}

EvalReport zero_shot_eval(const Model& m, const Vocabulary& vocab,
                          const std::vector<TaskSpec>& trained_tasks, const TaskSpec& eval_task,
                          const std::vector<RawSample>& corpus, int max_len) {
  vocab.specifier(eval_task.target_language);  // unknown specifier → rejected
  for (const TaskSpec& t : trained_tasks) {
    if (t.source_language == eval_task.source_language &&
        t.target_language == eval_task.target_language) {
      throw std::invalid_argument("zero_shot_eval: direction " + direction_of(eval_task) +
                                  " was trained (task '" + t.name + "'), not zero-shot");
    }
  }
  EvalReport r = evaluate_corpus(m, vocab, eval_task, corpus, max_len);
  r.mode = "zero_shot";
  r.zero_shot = true;
  return r;
}

}  // namespace bgen
