#include "ctharness/sampler.hpp"

#include <unordered_set>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::sampler {

using corpus::Label;
using corpus::LabeledExample;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 4> kStratumNames{"positive/1-component", "positive/2-components",
                                                   "positive/3-components", "negative"};

// Stratum index 0..2 for positives by component count, 3 for negatives, -1 if unusable.
int stratum_of(const LabeledExample& e) {
  if (e.label == Label::negative) return 3;
  if (!e.annotation) return -1;
  const auto n = e.annotation->components.size();
  return n >= 1 && n <= 3 ? static_cast<int>(n) - 1 : -1;
}

}  // namespace

std::size_t Composition::size() const {
  return positives_by_components[0] + positives_by_components[1] + positives_by_components[2] + negatives;
}

std::vector<FewShotSet> build_few_shot_sets(const std::vector<LabeledExample>& pool, std::size_t n_sets,
                                            std::uint64_t seed, const Composition& composition) {
  std::array<std::vector<std::size_t>, 4> strata;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    // A duplicated id in the pool would let one message appear twice in a set.
    if (!ids.insert(pool[i].message.id).second) continue;
    const int s = stratum_of(pool[i]);
    if (s >= 0) strata[static_cast<std::size_t>(s)].push_back(i);
  }
  const std::array<std::size_t, 4> wanted{composition.positives_by_components[0],
                                          composition.positives_by_components[1],
                                          composition.positives_by_components[2], composition.negatives};
  for (std::size_t s = 0; s < 4; ++s) {
    if (strata[s].size() < wanted[s]) {
      throw StratumExhaustedError("stratum " + std::string(kStratumNames[s]) + " has " +
                                  std::to_string(strata[s].size()) + " item(s), need " + std::to_string(wanted[s]));
    }
  }

  std::vector<FewShotSet> sets;
  sets.reserve(n_sets);
  for (std::size_t k = 0; k < n_sets; ++k) {
    FewShotSet set;
    set.seed = mix_seed(seed, k);
    set.composition = composition;
    Rng rng(set.seed);
    for (std::size_t s = 0; s < 4; ++s) {
      // Partial Fisher-Yates: the first wanted[s] slots become the draw.
      auto members = strata[s];
      for (std::size_t i = 0; i < wanted[s]; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(members.size() - i));
        std::swap(members[i], members[j]);
        set.items.push_back(pool[members[i]]);
      }
    }
    rng.shuffle(set.items);
    sets.push_back(std::move(set));
  }
  return sets;
}

void verify(const FewShotSet& set) {
  std::array<std::size_t, 4> counts{};
  std::unordered_set<std::string> ids;
  for (const auto& e : set.items) {
    if (!ids.insert(e.message.id).second) throw ValidationError("duplicate message id '" + e.message.id + "' in set");
    const int s = stratum_of(e);
    if (s < 0) throw ValidationError("positive example '" + e.message.id + "' has no usable component annotation");
    ++counts[static_cast<std::size_t>(s)];
  }
  const auto& c = set.composition;
  const std::array<std::size_t, 4> wanted{c.positives_by_components[0], c.positives_by_components[1],
                                          c.positives_by_components[2], c.negatives};
  if (counts != wanted) throw ValidationError("few-shot set composition does not match its declared strata");
}

json to_json(const FewShotSet& set) {
  json items = json::array();
  for (const auto& e : set.items) {
    json item = corpus::to_json(e);
    item["components"] = e.annotation ? e.annotation->components.size() : 0;
    items.push_back(std::move(item));
  }
  const auto& c = set.composition;
  return json{{"seed", set.seed},
              {"source_split", set.source_split},
              {"order", "shuffled"},
              {"composition",
               {{"positive_by_components",
                 {{"1", c.positives_by_components[0]}, {"2", c.positives_by_components[1]},
                  {"3", c.positives_by_components[2]}}},
                {"negative", c.negatives}}},
              {"items", items}};
}

FewShotSet few_shot_set_from_json(const json& j) {
  FewShotSet set;
  set.seed = j.at("seed").get<std::uint64_t>();
  set.source_split = j.value("source_split", std::string("train"));
  const auto& comp = j.at("composition");
  const auto& pos = comp.at("positive_by_components");
  set.composition.positives_by_components = {pos.at("1").get<std::size_t>(), pos.at("2").get<std::size_t>(),
                                             pos.at("3").get<std::size_t>()};
  set.composition.negatives = comp.at("negative").get<std::size_t>();
  for (const auto& item : j.at("items")) set.items.push_back(corpus::labeled_example_from_json(item));
  return set;
}

json manifest(const std::vector<FewShotSet>& sets, std::uint64_t seed) {
  json arr = json::array();
  for (const auto& s : sets) arr.push_back(to_json(s));
  return json{{"seed", seed}, {"n_sets", sets.size()}, {"sets", arr}};
}

std::vector<FewShotSet> read_manifest(const std::filesystem::path& path) {
  const auto j = json::parse(read_file(path));
  std::vector<FewShotSet> sets;
  for (const auto& s : j.at("sets")) sets.push_back(few_shot_set_from_json(s));
  return sets;
}

}  // namespace ctharness::sampler
