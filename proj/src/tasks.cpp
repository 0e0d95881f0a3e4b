#include "bgen/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "bgen/rng.hpp"

namespace bgen {

using nlohmann::ordered_json;

// ---- task declarations ----

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::TEXT_TO_TEXT: return "text_to_text";
    case Modality::IMAGE_TO_TEXT: return "image_to_text";
    case Modality::IMAGE_TEXT_TO_TEXT: return "image_text_to_text";
  }
  throw std::logic_error("modality_name: bad enum value");
}

Modality modality_from_name(const std::string& name) {
  if (name == "text_to_text") return Modality::TEXT_TO_TEXT;
  if (name == "image_to_text") return Modality::IMAGE_TO_TEXT;
  if (name == "image_text_to_text") return Modality::IMAGE_TEXT_TO_TEXT;
  throw std::invalid_argument("unknown modality '" + name + "'");
}

bool modality_has_source(Modality m) { return m != Modality::IMAGE_TO_TEXT; }
bool modality_has_image(Modality m) { return m != Modality::TEXT_TO_TEXT; }

// ---- encoding and unrolling ----

Sample encode_sample(const RawSample& raw, const Vocabulary& vocab, const TaskSpec& task, int d_v) {
  Sample s;
  if (modality_has_source(task.modality)) {
    if (!raw.src) throw std::invalid_argument("sample for task '" + task.name + "' lacks a source");
    s.src = vocab.encode(*raw.src);
    if (s.src.empty()) throw std::invalid_argument("sample for task '" + task.name + "' has empty source");
  } else if (raw.src) {
    throw std::invalid_argument("sample for captioning task '" + task.name + "' carries a source");
  }
  if (modality_has_image(task.modality)) {
    if (!raw.regions || raw.regions->empty()) {
      throw std::invalid_argument("sample for task '" + task.name + "' lacks regions");
    }
    int full_count = 0;
    for (const RegionFeature& r : *raw.regions) {
      validate_region(r, d_v);
      if (r.is_full_image()) {
        ++full_count;
        s.full_image = r;
      } else {
        s.regions.push_back(r);
      }
    }
    if (full_count != 1) {
      throw std::invalid_argument("sample for task '" + task.name + "' must carry exactly one full-image region, got " +
                                  std::to_string(full_count));
    }
    if (s.regions.empty()) {
      throw std::invalid_argument("sample for task '" + task.name + "' has no object regions");
    }
    s.has_image = true;
  } else if (raw.regions) {
    throw std::invalid_argument("sample for text-only task '" + task.name + "' carries regions");
  }
  s.tgt = vocab.encode(raw.tgt);
  if (s.tgt.empty()) throw std::invalid_argument("sample for task '" + task.name + "' has empty target");
  s.tgt.push_back(Vocabulary::kStop);
  return s;
}

std::vector<UnrolledExample> unroll(const Sample& sample, int sample_index) {
  if (sample.tgt.empty()) throw std::invalid_argument("unroll: empty target");
  std::vector<UnrolledExample> out;
  out.reserve(sample.tgt.size());
  for (int t = 1; t <= static_cast<int>(sample.tgt.size()); ++t) {
    out.push_back({sample_index, t, sample.tgt[t - 1]});
  }
  return out;
}

std::vector<UnrolledExample> unroll_corpus(const std::vector<Sample>& corpus) {
  std::vector<UnrolledExample> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto ex = unroll(corpus[i], static_cast<int>(i));
    out.insert(out.end(), ex.begin(), ex.end());
  }
  return out;
}

// ---- synthetic translation ----

void validate_cipher(const CipherSpec& cipher) {
  if (cipher.source_lexicon.empty() || cipher.source_lexicon.size() != cipher.target_lexicon.size()) {
    throw std::invalid_argument("cipher: lexicons must be non-empty and the same size");
  }
  std::set<std::string> src(cipher.source_lexicon.begin(), cipher.source_lexicon.end());
  std::set<std::string> tgt(cipher.target_lexicon.begin(), cipher.target_lexicon.end());
  if (src.size() != cipher.source_lexicon.size() || tgt.size() != cipher.target_lexicon.size()) {
    throw std::invalid_argument("cipher: word map is not bijective (duplicate words)");
  }
}

std::string apply_cipher(const CipherSpec& cipher, const std::string& src) {
  validate_cipher(cipher);
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < cipher.source_lexicon.size(); ++i) {
    index.emplace(cipher.source_lexicon[i], static_cast<int>(i));
  }
  std::vector<std::string> words = Vocabulary::split_words(src);
  std::vector<std::string> mapped;
  mapped.reserve(words.size());
  for (const std::string& w : words) {
    auto it = index.find(w);
    if (it == index.end()) throw std::invalid_argument("cipher: word '" + w + "' not in source lexicon");
    mapped.push_back(cipher.target_lexicon[it->second]);
  }
  if (cipher.reverse) std::reverse(mapped.begin(), mapped.end());
  std::string out;
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    if (i) out += ' ';
    out += mapped[i];
  }
  return out;
}

std::vector<RawSample> synth_translation_corpus(const CipherSpec& cipher, int size, int len_min,
                                                int len_max, std::uint64_t seed,
                                                const std::string& task_name) {
  validate_cipher(cipher);
  if (size <= 0) throw std::invalid_argument("synth_translation_corpus: size must be positive");
  if (len_min < 1 || len_min > len_max) {
    throw std::invalid_argument("synth_translation_corpus: bad length range");
  }
  std::mt19937_64 rng(seed);
  std::vector<RawSample> corpus;
  corpus.reserve(size);
  for (int i = 0; i < size; ++i) {
    const int len = len_min + static_cast<int>(rng() % static_cast<std::uint64_t>(len_max - len_min + 1));
    std::string src;
    for (int j = 0; j < len; ++j) {
      if (j) src += ' ';
      src += cipher.source_lexicon[rng() % cipher.source_lexicon.size()];
    }
    corpus.push_back({task_name, src, apply_cipher(cipher, src), std::nullopt});
  }
  return corpus;
}

// ---- synthetic captioning ----

void validate_grammar(const AttributeGrammar& grammar) {
  if (grammar.slots.empty()) throw std::invalid_argument("grammar: no slots");
  int total = 0;
  for (const GrammarSlot& slot : grammar.slots) {
    if (slot.options < 1) throw std::invalid_argument("grammar: slot '" + slot.name + "' has no options");
    if (slot.words.empty()) throw std::invalid_argument("grammar: slot '" + slot.name + "' has no surface words");
    for (const auto& [lang, words] : slot.words) {
      if (static_cast<int>(words.size()) != slot.options) {
        throw std::invalid_argument("grammar: slot '" + slot.name + "' has " + std::to_string(words.size()) +
                                    " words for language '" + lang + "', expected " +
                                    std::to_string(slot.options));
      }
    }
    total += slot.options;
  }
  if (total > grammar.d_v) {
    throw std::invalid_argument("grammar: slot widths total " + std::to_string(total) +
                                ", exceeding feature width " + std::to_string(grammar.d_v));
  }
  if (grammar.noise < 0) throw std::invalid_argument("grammar: negative noise amplitude");
  if (grammar.regions_per_item < 1) throw std::invalid_argument("grammar: need at least one object region");
  if (!(grammar.img_w > 0) || !(grammar.img_h > 0)) throw std::invalid_argument("grammar: bad image size");
}

namespace {

// Feature layout: slot j's one-hot block starts at the sum of preceding slot
// widths; components beyond the last block are pure noise.
std::vector<double> encode_attributes(const AttributeGrammar& g, const std::vector<int>& attrs,
                                      std::mt19937_64& rng) {
  std::vector<double> feat(g.d_v, 0.0);
  int offset = 0;
  for (std::size_t j = 0; j < g.slots.size(); ++j) {
    feat[offset + attrs[j]] = 1.0;
    offset += g.slots[j].options;
  }
  for (double& f : feat) f += g.noise * (2.0 * unit_real(rng) - 1.0);
  return feat;
}

}  // namespace

std::vector<CaptionItem> synth_captioning_corpus(const AttributeGrammar& grammar, int size,
                                                 std::uint64_t seed) {
  validate_grammar(grammar);
  if (size <= 0) throw std::invalid_argument("synth_captioning_corpus: size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<CaptionItem> items;
  items.reserve(size);
  for (int i = 0; i < size; ++i) {
    CaptionItem item;
    for (const GrammarSlot& slot : grammar.slots) {
      item.attributes.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(slot.options)));
    }
    const double w = grammar.img_w, h = grammar.img_h;
    RegionFeature full;
    full.feat = encode_attributes(grammar, item.attributes, rng);
    full.x1 = 0;
    full.y1 = 0;
    full.x2 = w;
    full.y2 = h;
    full.w = w;
    full.h = h;
    full.conf = 1.0;
    item.regions.push_back(full);
    for (int k = 0; k < grammar.regions_per_item; ++k) {
      RegionFeature r;
      r.feat = encode_attributes(grammar, item.attributes, rng);
      r.x1 = unit_real(rng) * 0.8 * w;
      r.x2 = r.x1 + (0.05 + 0.95 * unit_real(rng)) * (w - r.x1);
      r.y1 = unit_real(rng) * 0.8 * h;
      r.y2 = r.y1 + (0.05 + 0.95 * unit_real(rng)) * (h - r.y1);
      r.w = w;
      r.h = h;
      r.conf = 0.5 + 0.5 * unit_real(rng);
      item.regions.push_back(r);
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string render_caption(const AttributeGrammar& grammar, const std::vector<int>& attributes,
                           const std::string& language, const std::vector<std::string>& omit) {
  if (attributes.size() != grammar.slots.size()) {
    throw std::invalid_argument("render_caption: attribute count does not match slot count");
  }
  std::string out;
  for (std::size_t j = 0; j < grammar.slots.size(); ++j) {
    const GrammarSlot& slot = grammar.slots[j];
    if (std::find(omit.begin(), omit.end(), slot.name) != omit.end()) continue;
    auto it = slot.words.find(language);
    if (it == slot.words.end()) {
      throw std::invalid_argument("render_caption: slot '" + slot.name + "' has no words for language '" +
                                  language + "'");
    }
    if (attributes[j] < 0 || attributes[j] >= slot.options) {
      throw std::invalid_argument("render_caption: attribute out of range for slot '" + slot.name + "'");
    }
    if (!out.empty()) out += ' ';
    out += it->second[attributes[j]];
  }
  return out;
}

std::vector<RawSample> caption_items_to_samples(const AttributeGrammar& grammar,
                                                const std::vector<CaptionItem>& items,
                                                const std::string& task_name,
                                                const std::string& src_language,
                                                const std::string& tgt_language,
                                                const std::vector<std::string>& omit_in_src) {
  std::vector<RawSample> corpus;
  corpus.reserve(items.size());
  for (const CaptionItem& item : items) {
    RawSample s;
    s.task = task_name;
    if (!src_language.empty()) s.src = render_caption(grammar, item.attributes, src_language, omit_in_src);
    s.tgt = render_caption(grammar, item.attributes, tgt_language);
    s.regions = item.regions;
    corpus.push_back(std::move(s));
  }
  return corpus;
}

// ---- adversarial image shuffling ----

std::vector<RawSample> shuffle_images(const std::vector<RawSample>& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 2) throw std::invalid_argument("shuffle_images: need at least 2 items for a derangement");
  for (const RawSample& s : corpus) {
    if (!s.regions) throw std::invalid_argument("shuffle_images: item without regions");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  // Rejection-sample seeded shuffles until no item keeps its own image.
  bool deranged = false;
  while (!deranged) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    seeded_shuffle(perm, rng);
    deranged = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] == static_cast<int>(i)) {
        deranged = false;
        break;
      }
    }
  }
  std::vector<RawSample> out = corpus;
  for (std::size_t i = 0; i < n; ++i) out[i].regions = corpus[perm[i]].regions;
  return out;
}

// ---- multi-task scheduling ----

Scheduler::Scheduler(std::vector<std::vector<UnrolledExample>> pools, int reference_index,
                     std::uint64_t seed)
    : pools_(std::move(pools)), reference_(reference_index) {
  if (pools_.empty()) throw std::invalid_argument("scheduler: no tasks registered");
  if (reference_ < 0 || reference_ >= static_cast<int>(pools_.size())) {
    throw std::invalid_argument("scheduler: reference index out of range");
  }
  for (std::size_t i = 0; i < pools_.size(); ++i) {
    if (pools_[i].empty()) {
      throw std::invalid_argument("scheduler: task " + std::to_string(i) + " has an empty pool");
    }
    rng_.emplace_back(mix_seed(seed, "scheduler.task." + std::to_string(i)));
    std::vector<int> order(pools_[i].size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
    seeded_shuffle(order, rng_.back());
    order_.push_back(std::move(order));
    cursor_.push_back(0);
  }
}

std::vector<Scheduler::Pick> Scheduler::next() {
  std::vector<Pick> batch;
  batch.reserve(pools_.size());
  for (std::size_t i = 0; i < pools_.size(); ++i) {
    batch.push_back({static_cast<int>(i), pools_[i][order_[i][cursor_[i]]]});
    if (++cursor_[i] == order_[i].size()) {
      // Pass complete: reshuffle for the next cycle.
      cursor_[i] = 0;
      seeded_shuffle(order_[i], rng_[i]);
      if (static_cast<int>(i) == reference_) ++epoch_;
    }
  }
  return batch;
}

// ---- corpus file IO and stats ----

namespace {

ordered_json region_to_json(const RegionFeature& r) {
  return ordered_json{{"feat", r.feat}, {"bbox", {r.x1, r.y1, r.x2, r.y2}}, {"w", r.w}, {"h", r.h},
                      {"conf", r.conf}};
}

RegionFeature region_from_json(const ordered_json& j) {
  RegionFeature r;
  r.feat = j.at("feat").get<std::vector<double>>();
  const auto& bbox = j.at("bbox");
  if (!bbox.is_array() || bbox.size() != 4) throw std::runtime_error("corpus: bbox must have 4 numbers");
  r.x1 = bbox[0].get<double>();
  r.y1 = bbox[1].get<double>();
  r.x2 = bbox[2].get<double>();
  r.y2 = bbox[3].get<double>();
  r.w = j.at("w").get<double>();
  r.h = j.at("h").get<double>();
  r.conf = j.at("conf").get<double>();
  return r;
}

}  // namespace

void write_corpus(const std::string& path, const std::vector<RawSample>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("corpus: cannot write " + path);
  for (const RawSample& s : corpus) {
    ordered_json j;
    j["task"] = s.task;
    if (s.src) j["src"] = *s.src; else j["src"] = nullptr;
    j["tgt"] = s.tgt;
    if (s.regions) {
      ordered_json regions = ordered_json::array();
      for (const RegionFeature& r : *s.regions) regions.push_back(region_to_json(r));
      j["regions"] = std::move(regions);
    } else {
      j["regions"] = nullptr;
    }
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("corpus: write failed for " + path);
}

std::vector<RawSample> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("corpus: cannot open " + path);
  std::vector<RawSample> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
      RawSample s;
      s.task = j.at("task").get<std::string>();
      if (!j.at("src").is_null()) s.src = j.at("src").get<std::string>();
      s.tgt = j.at("tgt").get<std::string>();
      if (!j.at("regions").is_null()) {
        std::vector<RegionFeature> regions;
        for (const auto& rj : j.at("regions")) regions.push_back(region_from_json(rj));
        s.regions = std::move(regions);
      }
      corpus.push_back(std::move(s));
    } catch (const ordered_json::exception& e) {
      throw std::runtime_error("corpus: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

CorpusStats corpus_stats(const std::vector<RawSample>& corpus) {
  CorpusStats stats;
  stats.sentences = static_cast<long long>(corpus.size());
  for (const RawSample& s : corpus) {
    stats.unrolled += static_cast<long long>(Vocabulary::split_words(s.tgt).size()) + 1;  // + STOP
  }
  if (stats.sentences > 0) {
    stats.mean_target_len = static_cast<double>(stats.unrolled) / static_cast<double>(stats.sentences);
  }
  return stats;
}

}  // namespace bgen
