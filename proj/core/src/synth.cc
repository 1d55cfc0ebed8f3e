#include "pcred/synth.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "pcred/errors.h"

namespace pcred::synth {

namespace {

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct Filled {
  std::vector<std::string> words;
  Triplet triplet;
};

std::string draw(const std::vector<std::string>& vocab,
                 std::set<std::string>& used, Rng& rng,
                 const std::string& relation) {
  std::vector<const std::string*> free;
  for (const std::string& v : vocab) {
    if (!used.count(v)) free.push_back(&v);
  }
  if (free.empty()) {
    throw GenerationError("entity vocabulary for '" + relation +
                          "' exhausted");
  }
  const std::string& pick = *free[rng.below(free.size())];
  used.insert(pick);
  return pick;
}

Filled fill(const Template& t, std::set<std::string>& used, Rng& rng,
            int offset) {
  const std::string head = draw(t.heads, used, rng, t.relation);
  const std::string tail = draw(t.tails, used, rng, t.relation);
  Filled out;
  out.triplet.relation = t.relation;
  for (const std::string& token : split(t.pattern)) {
    const bool is_head = token == kHeadSlot;
    if (is_head || token == kTailSlot) {
      const std::vector<std::string> entity = split(is_head ? head : tail);
      WordSpan span{offset + static_cast<int>(out.words.size()), 0};
      out.words.insert(out.words.end(), entity.begin(), entity.end());
      span.end = offset + static_cast<int>(out.words.size()) - 1;
      (is_head ? out.triplet.head : out.triplet.tail) = span;
    } else {
      out.words.push_back(token);
    }
  }
  return out;
}

}  // namespace

void validate_template(const Template& t) {
  const std::vector<std::string> tokens = split(t.pattern);
  const auto heads = std::count(tokens.begin(), tokens.end(), kHeadSlot);
  const auto tails = std::count(tokens.begin(), tokens.end(), kTailSlot);
  if (heads != 1 || tails != 1) {
    throw GenerationError("pattern '" + t.pattern +
                          "' needs exactly one head and one tail slot");
  }
  if (t.relation.empty() || t.heads.empty() || t.tails.empty()) {
    throw GenerationError("template '" + t.pattern + "' is incomplete");
  }
}

std::vector<Instance> generate(std::span<const Template> templates, int count,
                               Rng& rng, const Options& options) {
  if (count < 1) throw GenerationError("count must be at least 1");
  if (templates.size() < 2) throw GenerationError("need at least 2 templates");
  for (const Template& t : templates) validate_template(t);

  std::vector<Instance> out;
  for (int n = 0; n < count; ++n) {
    Instance instance;
    instance.id = options.id_prefix + "-" + std::to_string(n);
    std::set<std::string> used;
    const std::size_t first_index = rng.below(templates.size());
    const Template& first = templates[first_index];
    const bool multi = rng.uniform() < options.multi_fraction;
    Filled a = fill(first, used, rng, 0);
    if (!multi) {
      instance.words = std::move(a.words);
      instance.triplets.push_back(std::move(a.triplet));
    } else {
      std::size_t second_index = rng.below(templates.size() - 1);
      if (second_index >= first_index) ++second_index;
      const Template& second = templates[second_index];
      if (!a.words.empty() && a.words.back() == ".") a.words.pop_back();
      a.words.push_back("and");
      Filled b = fill(second, used, rng, static_cast<int>(a.words.size()));
      instance.words = std::move(a.words);
      instance.words.insert(instance.words.end(), b.words.begin(), b.words.end());
      instance.triplets.push_back(std::move(a.triplet));
      instance.triplets.push_back(std::move(b.triplet));
    }
    validate_instance(instance);
    out.push_back(std::move(instance));
  }
  return out;
}

namespace {

const std::vector<std::string> kPeople = {
    "Richard", "Maria Lopez", "John Smith", "Akira", "Helen Park",
    "Omar", "Lucy Chen", "Pierre Dubois", "Anna", "David Miller",
    "Sofia", "Kenji Sato", "Grace", "Ivan Petrov", "Nora Quinn"};
const std::vector<std::string> kPlaces = {
    "Paris", "the United States", "New York", "Berlin", "Tokyo",
    "Brazil", "Cairo", "the United Kingdom", "Madrid", "Canada",
    "Lagos", "Sydney", "Mexico City", "India", "Oslo"};
const std::vector<std::string> kCountries = {
    "the United States", "France", "Japan", "Germany", "Brazil",
    "Egypt", "the United Kingdom", "Spain", "Canada", "Nigeria",
    "Australia", "Mexico", "India", "Norway", "Italy"};
const std::vector<std::string> kOrganizations = {
    "Google", "the Red Cross", "Siemens", "Toyota", "the World Bank",
    "Nokia", "the BBC", "Airbus", "Samsung", "the United Nations"};
const std::vector<std::string> kParties = {
    "Democratic", "Labour", "Green", "Liberal", "Conservative",
    "Socialist", "Republican", "Pirate"};
const std::vector<std::string> kCities = {
    "Paris", "Berlin", "Tokyo", "Cairo", "Madrid", "Lagos",
    "Sydney", "Oslo", "Rome", "Lima", "Seoul", "Dublin"};

const std::vector<std::string> kSchools = {
    "Harvard", "Oxford", "the Sorbonne", "Kyoto University", "MIT",
    "Cambridge", "Stanford", "ETH Zurich", "Yale", "Princeton"};
const std::vector<std::string> kInstruments = {
    "piano", "violin", "guitar", "cello", "drums", "flute", "trumpet", "harp"};
const std::vector<std::string> kLanguages = {
    "French", "Japanese", "German", "Spanish", "Arabic", "Hindi",
    "Portuguese", "Norwegian", "Italian", "Korean"};
const std::vector<std::string> kBooks = {
    "The Long Road", "Silent Rivers", "Blue Harbor", "The Last Map",
    "Winter Garden", "Paper Stars", "Iron Sky", "The Quiet Hour"};

}  // namespace

std::vector<Template> seen_templates() {
  return {
      {"place of birth", "{head} was born in {tail} .", kPeople, kPlaces},
      {"country of citizenship", "{head} is a citizen of {tail} .", kPeople,
       kCountries},
      {"employer", "{head} works for {tail} .", kPeople, kOrganizations},
      {"member of political party", "{head} is a {tail} politician .", kPeople,
       kParties},
      {"spouse", "{head} is married to {tail} .", kPeople, kPeople},
      {"capital of", "{head} is the capital city of {tail} .", kCities,
       kCountries},
  };
}

std::vector<Template> heldout_templates() {
  return {
      {"birth place", "{head} , born in {tail} , arrived today .", kPeople,
       kPlaces},
      {"citizen of country", "{head} , a citizen of {tail} , spoke today .",
       kPeople, kCountries},
  };
}

std::vector<Template> extended_templates() {
  return {
      {"educated at", "{head} studied at {tail} .", kPeople, kSchools},
      {"instrument", "{head} plays the {tail} .", kPeople, kInstruments},
      {"languages spoken", "{head} speaks {tail} fluently .", kPeople,
       kLanguages},
      {"notable work", "{head} wrote {tail} .", kPeople, kBooks},
      {"headquarters location", "{head} is headquartered in {tail} .",
       kOrganizations, kCities},
      {"official language", "the official language of {head} is {tail} .",
       kCountries, kLanguages},
  };
}

}  // namespace pcred::synth
