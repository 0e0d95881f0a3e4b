#pragma once

// Shared fixtures: a tiny bilingual attribute grammar plus samples of each
// modality, sized to keep unit tests fast.

#include <string>
#include <vector>

#include "bgen/tasks.hpp"
#include "bgen/transformer.hpp"
#include "bgen/vocab.hpp"

namespace testworld {

inline bgen::AttributeGrammar grammar(double noise = 0.0, int d_v = 8) {
  bgen::AttributeGrammar g;
  g.d_v = d_v;
  g.noise = noise;
  g.regions_per_item = 2;
  bgen::GrammarSlot color{"color", 3, {{"en", {"red", "green", "blue"}}, {"de", {"rot", "gruen", "blau"}}}};
  bgen::GrammarSlot shape{"shape", 2, {{"en", {"ball", "box"}}, {"de", {"kugel", "kiste"}}}};
  g.slots = {color, shape};
  return g;
}

inline bgen::Vocabulary vocab() {
  return bgen::Vocabulary::build({"red green blue ball box", "rot gruen blau kugel kiste"},
                                 {"en", "de"});
}

inline bgen::TaskSpec mt_task() {
  return {"mt_en_de", bgen::Modality::TEXT_TO_TEXT, "en", "de", "", false};
}

inline bgen::TaskSpec ic_task() {
  return {"ic_de", bgen::Modality::IMAGE_TO_TEXT, "", "de", "", false};
}

inline bgen::TaskSpec mmt_task() {
  return {"mmt_en_de", bgen::Modality::IMAGE_TEXT_TO_TEXT, "en", "de", "", true};
}

inline bgen::Sample mt_sample(const bgen::Vocabulary& v, const std::string& src = "red ball",
                              const std::string& tgt = "rot kugel") {
  return bgen::encode_sample({"mt_en_de", src, tgt, std::nullopt}, v, mt_task(), 8);
}

inline bgen::Sample visual_sample(const bgen::Vocabulary& v, bool with_src, std::uint64_t seed = 3,
                                  double noise = 0.0) {
  bgen::AttributeGrammar g = grammar(noise);
  auto items = bgen::synth_captioning_corpus(g, 1, seed);
  if (with_src) {
    auto raws = bgen::caption_items_to_samples(g, items, "mmt_en_de", "en", "de");
    return bgen::encode_sample(raws[0], v, mmt_task(), g.d_v);
  }
  auto raws = bgen::caption_items_to_samples(g, items, "ic_de", "", "de");
  return bgen::encode_sample(raws[0], v, ic_task(), g.d_v);
}

inline bgen::ModelConfig tiny_config(const bgen::Vocabulary& v) {
  bgen::ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.vocab_size = v.size();
  cfg.max_positions = 32;
  cfg.d_v = 8;
  cfg.seed = 7;
  return cfg;
}

}  // namespace testworld
