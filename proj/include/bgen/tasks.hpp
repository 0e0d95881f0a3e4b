#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bgen/region.hpp"
#include "bgen/vocab.hpp"

namespace bgen {

// ---- task declarations ----

// The three input configurations: {x,y}, {v,y}, {x,v,y}.
enum class Modality { TEXT_TO_TEXT, IMAGE_TO_TEXT, IMAGE_TEXT_TO_TEXT };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);
bool modality_has_source(Modality m);
bool modality_has_image(Modality m);

struct TaskSpec {
  std::string name;
  Modality modality = Modality::TEXT_TO_TEXT;
  std::string source_language;  // empty for IMAGE_TO_TEXT
  std::string target_language;
  std::string corpus_path;
  bool reference = false;  // exactly one task per training run defines the epoch
  std::string val_path;    // optional held-out slice scored between steps
};

// Raw corpus record as stored on disk (strings, not ids).
struct RawSample {
  std::string task;
  std::optional<std::string> src;
  std::string tgt;
  std::optional<std::vector<RegionFeature>> regions;  // includes the full-image region
};

// Encoded sample ready for composition. Regions exclude the full-image
// feature, which is carried separately.
struct Sample {
  std::vector<int> src;
  std::vector<RegionFeature> regions;
  RegionFeature full_image;
  bool has_image = false;
  std::vector<int> tgt;  // always ends with STOP
};

// One masked-prediction example produced by unrolling: predict gold = y[t]
// (1-based) given the sample's conditioning and the prefix y_<t.
struct UnrolledExample {
  int sample_index = 0;
  int t = 1;
  int gold = 0;
};

// ---- encoding and unrolling ----

// Validates modality fit (source/regions presence, exactly one full-image
// region for visual tasks) and appends STOP to the target.
Sample encode_sample(const RawSample& raw, const Vocabulary& vocab, const TaskSpec& task, int d_v);

// Expands a sample into |y| examples, one per target position, STOP included
// as the final prediction. Rejects empty targets.
std::vector<UnrolledExample> unroll(const Sample& sample, int sample_index);

std::vector<UnrolledExample> unroll_corpus(const std::vector<Sample>& corpus);

// ---- synthetic translation (word ciphers) ----

// An exactly learnable "translation": word i of the source lexicon always
// maps to word i of the target lexicon, optionally with the target word
// order reversed.
struct CipherSpec {
  std::vector<std::string> source_lexicon;
  std::vector<std::string> target_lexicon;
  bool reverse = false;
};

void validate_cipher(const CipherSpec& cipher);

// Re-applies the cipher to one source sentence (the generator's ground truth;
// also usable as an independent oracle).
std::string apply_cipher(const CipherSpec& cipher, const std::string& src);

// Random source sentences of length in [len_min, len_max], targets by cipher.
// Deterministic per seed.
std::vector<RawSample> synth_translation_corpus(const CipherSpec& cipher, int size, int len_min,
                                                int len_max, std::uint64_t seed,
                                                const std::string& task_name);

// ---- synthetic captioning (attribute grammar) ----

// One attribute slot: `options` one-hot feature components starting at the
// slot's offset in the region feature vector, with one surface word per
// option and language.
struct GrammarSlot {
  std::string name;
  int options = 0;
  std::map<std::string, std::vector<std::string>> words;  // language -> option words
};

struct AttributeGrammar {
  std::vector<GrammarSlot> slots;
  int d_v = 16;
  double noise = 0.05;  // uniform amplitude added to every feature component
  int regions_per_item = 3;
  double img_w = 640, img_h = 480;
};

void validate_grammar(const AttributeGrammar& grammar);

// One generated scene: the sampled attribute per slot plus its regions.
// regions[0] is the full-image feature (bbox = [0,0,w,h]); the rest encode
// the same attributes with independent noise and random valid boxes.
struct CaptionItem {
  std::vector<int> attributes;
  std::vector<RegionFeature> regions;
};

std::vector<CaptionItem> synth_captioning_corpus(const AttributeGrammar& grammar, int size,
                                                 std::uint64_t seed);

// Deterministic surface rendering of attributes: slot words joined in slot
// order, skipping slots listed in `omit` (used to make image-only content).
std::string render_caption(const AttributeGrammar& grammar, const std::vector<int>& attributes,
                           const std::string& language, const std::vector<std::string>& omit = {});

// Captioning corpus -> raw records. Monolingual captions when src_language is
// empty; otherwise a source caption in src_language (with omitted slots) and
// a full target caption in tgt_language.
std::vector<RawSample> caption_items_to_samples(const AttributeGrammar& grammar,
                                                const std::vector<CaptionItem>& items,
                                                const std::string& task_name,
                                                const std::string& src_language,
                                                const std::string& tgt_language,
                                                const std::vector<std::string>& omit_in_src = {});

// ---- adversarial image shuffling ----

// Permutes region lists by a seeded derangement (no item keeps its image);
// text fields untouched. Rejects corpora with fewer than 2 items.
std::vector<RawSample> shuffle_images(const std::vector<RawSample>& corpus, std::uint64_t seed);

// ---- multi-task scheduling ----

// Per-step composite batch: exactly one unrolled example from every task.
// Each task cycles its own shuffled pool, reshuffling on exhaustion; the
// reference task's completed passes define the epoch counter.
class Scheduler {
 public:
  struct Pick {
    int task = 0;  // index into the registered task list
    UnrolledExample example;
  };

  Scheduler(std::vector<std::vector<UnrolledExample>> pools, int reference_index,
            std::uint64_t seed);

  std::vector<Pick> next();
  long long epoch() const { return epoch_; }
  int tasks() const { return static_cast<int>(pools_.size()); }

 private:
  std::vector<std::vector<UnrolledExample>> pools_;
  std::vector<std::vector<int>> order_;
  std::vector<std::size_t> cursor_;
  std::vector<std::mt19937_64> rng_;
  int reference_ = 0;
  long long epoch_ = 0;
};

// ---- corpus file IO and stats ----

void write_corpus(const std::string& path, const std::vector<RawSample>& corpus);
std::vector<RawSample> read_corpus(const std::string& path);

struct CorpusStats {
  long long sentences = 0;
  long long unrolled = 0;       // sum of STOP-terminated target lengths
  double mean_target_len = 0;   // = unrolled / sentences
};

// Target length counts words + the STOP terminator, matching unroll().
CorpusStats corpus_stats(const std::vector<RawSample>& corpus);

}  // namespace bgen
