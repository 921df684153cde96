#include <CLI11.hpp>
#include <iostream>

#include "kgax/error.hpp"
#include "kgax/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Writes the attribute-driven synthetic dataset as TSV files", "kgax-synth"};
  kgax::SyntheticOptions options;
  std::string out;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--seed", options.seed, "generator seed");
  app.add_option("--users", options.users, "number of users");
  app.add_option("--items", options.items, "number of items");
  app.add_option("--tokens", options.tokens, "attribute vocabulary size");
  app.add_option("--per-user", options.interactions_per_user, "interactions per user");
  CLI11_PARSE(app, argc, argv);
  try {
    kgax::write_synthetic_files(kgax::make_synthetic_files(options), out);
  } catch (const kgax::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
