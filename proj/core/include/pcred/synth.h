#ifndef PCRED_SYNTH_H_
#define PCRED_SYNTH_H_

#include <span>
#include <string>
#include <vector>

#include "pcred/corpus.h"
#include "pcred/rng.h"

namespace pcred::synth {

inline constexpr std::string_view kHeadSlot = "{head}";
inline constexpr std::string_view kTailSlot = "{tail}";

// A sentence pattern such as "{head} was born in {tail} ." expressing one
// relation. Entity strings may span several words.
struct Template {
  std::string relation;
  std::string pattern;
  std::vector<std::string> heads;
  std::vector<std::string> tails;
};

struct Options {
  // Fraction of instances composed from two templates ("A and B").
  double multi_fraction = 0.3;
  std::string id_prefix = "syn";
};

// Throws GenerationError unless the pattern has exactly one head slot and
// one tail slot.
void validate_template(const Template& t);

// Deterministic given the rng state. Entities within one sentence are drawn
// without replacement; GenerationError when a vocabulary runs out.
std::vector<Instance> generate(std::span<const Template> templates, int count,
                               Rng& rng, const Options& options = {});

// Six relations used as seen labels in desk-scale runs.
std::vector<Template> seen_templates();
// Paraphrased relations held out for zero-shot checks; each shares content
// words with a seen relation.
std::vector<Template> heldout_templates();
// Further relations that widen the label set for protocol demos.
std::vector<Template> extended_templates();

}  // namespace pcred::synth

#endif  // PCRED_SYNTH_H_
