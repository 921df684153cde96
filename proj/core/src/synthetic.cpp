#include "kgax/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "kgax/rng.hpp"

namespace kgax {

namespace {

std::vector<std::size_t> draw_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

SyntheticFiles make_synthetic_files(const SyntheticOptions& o) {
  if (o.tokens_per_item > o.tokens || o.tokens_per_user > o.tokens || o.tokens_per_genre == 0) {
    throw Error("synthetic: token counts exceed the vocabulary");
  }
  if (o.interactions_per_user > o.items) throw Error("synthetic: more interactions per user than items");
  Rng rng = make_rng(o.seed, {0x5e7});
  SyntheticFiles f;

  std::vector<std::vector<std::size_t>> item_tokens(o.items);
  for (std::size_t i = 0; i < o.items; ++i) {
    item_tokens[i] = draw_distinct(o.tokens, o.tokens_per_item, rng);
    const auto genre_token = item_tokens[i][uniform_index(rng, item_tokens[i].size())];
    f.kg += "i" + std::to_string(i) + "\tin_genre\tg" + std::to_string(genre_token / o.tokens_per_genre) + "\n";
    f.item_map += "i" + std::to_string(i) + "\ti" + std::to_string(i) + "\n";
    for (auto t : item_tokens[i]) f.aux += "i" + std::to_string(i) + "\tt" + std::to_string(t) + "\n";
  }

  std::vector<double> weight(o.items);
  for (std::size_t u = 0; u < o.users; ++u) {
    const auto prefs = draw_distinct(o.tokens, o.tokens_per_user, rng);
    for (std::size_t i = 0; i < o.items; ++i) {
      std::size_t shared = 0;
      for (auto t : item_tokens[i]) shared += std::binary_search(prefs.begin(), prefs.end(), t) ? 1 : 0;
      weight[i] = shared == 0 ? o.weight_shared0 : shared == 1 ? o.weight_shared1 : o.weight_shared2;
    }
    // Weighted sampling without replacement by sequential draws.
    for (std::size_t k = 0; k < o.interactions_per_user; ++k) {
      const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      double x = uniform_unit(rng) * total;
      std::size_t pick = o.items;
      for (std::size_t i = 0; i < o.items; ++i) {
        if (weight[i] <= 0.0) continue;
        pick = i;
        if (x < weight[i]) break;
        x -= weight[i];
      }
      weight[pick] = 0.0;
      f.interactions += "u" + std::to_string(u) + "\ti" + std::to_string(pick) + "\n";
    }
  }
  return f;
}

void write_synthetic_files(const SyntheticFiles& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << text;
  };
  write("interactions.tsv", files.interactions);
  write("kg.tsv", files.kg);
  write("item_map.tsv", files.item_map);
  write("aux.tsv", files.aux);
}

Dataset make_synthetic_dataset(const SyntheticOptions& options, const DatasetOptions& dataset_options) {
  const auto f = make_synthetic_files(options);
  return make_dataset(f.interactions, f.kg, f.item_map, f.aux, dataset_options);
}

}  // namespace kgax
