#pragma once

// Attribute-driven synthetic dataset: items carry attribute tokens, users
// prefer a few tokens and mostly interact with items sharing them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "kgax/graph.hpp"

namespace kgax {

struct SyntheticOptions {
  std::size_t users = 200;
  std::size_t items = 100;
  std::size_t tokens = 20;
  std::size_t tokens_per_item = 2;
  std::size_t tokens_per_user = 2;
  std::size_t interactions_per_user = 12;
  std::size_t tokens_per_genre = 4;  // kg.tsv: (item, in_genre, genre of its first token)
  /// Sampling weight of an item by the number of tokens it shares with the user.
  double weight_shared0 = 0.02;
  double weight_shared1 = 1.0;
  double weight_shared2 = 4.0;
  std::uint64_t seed = 7;
};

/// File contents in the loader formats.
struct SyntheticFiles {
  std::string interactions;
  std::string kg;
  std::string item_map;
  std::string aux;
};

SyntheticFiles make_synthetic_files(const SyntheticOptions& options);

/// Writes interactions.tsv, kg.tsv, item_map.tsv and aux.tsv into `dir`.
void write_synthetic_files(const SyntheticFiles& files, const std::filesystem::path& dir);

Dataset make_synthetic_dataset(const SyntheticOptions& options, const DatasetOptions& dataset_options);

}  // namespace kgax
