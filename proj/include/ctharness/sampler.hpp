#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctharness/corpus.hpp"

namespace ctharness::sampler {

// Positives per component count (1, 2, 3) and negatives drawn into every set.
struct Composition {
  std::array<std::size_t, 3> positives_by_components{2, 3, 2};
  std::size_t negatives = 7;

  std::size_t size() const;
};

struct FewShotSet {
  std::vector<corpus::LabeledExample> items;
  std::uint64_t seed = 0;
  Composition composition;
  std::string source_split = "train";
};

// Draws `n_sets` independent sets. Within a set sampling is without
// replacement; sets may overlap each other. Presentation order is a seeded
// shuffle of the drawn items.
std::vector<FewShotSet> build_few_shot_sets(const std::vector<corpus::LabeledExample>& pool, std::size_t n_sets,
                                            std::uint64_t seed, const Composition& composition = {});

// Throws ValidationError if `set` breaks the class balance, component histogram, or id uniqueness.
void verify(const FewShotSet& set);

nlohmann::json to_json(const FewShotSet& set);
FewShotSet few_shot_set_from_json(const nlohmann::json& j);

nlohmann::json manifest(const std::vector<FewShotSet>& sets, std::uint64_t seed);
std::vector<FewShotSet> read_manifest(const std::filesystem::path& path);

}  // namespace ctharness::sampler
