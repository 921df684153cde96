#include "kgax/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <span>

namespace kgax {

namespace {

constexpr std::array kKeys{
    ConfigKey{"dim", "integer >= 1", "entity/relation embedding size"},
    ConfigKey{"layer_dims", "comma list of 0..3 integers >= 1 (empty or 'none' for L=0)",
              "output size of each propagation layer"},
    ConfigKey{"neighbor_cap", "integer >= 1", "sampled neighbors per entity"},
    ConfigKey{"lr", "real > 0", "Adam learning rate"},
    ConfigKey{"l2", "real >= 0", "L2 coefficient on parameters touched by a batch"},
    ConfigKey{"dropout", "real in [0,1)", "message dropout probability"},
    ConfigKey{"batch_size", "integer >= 1", "pairs or triples per optimizer step"},
    ConfigKey{"epochs", "integer >= 1", "maximum training epochs"},
    ConfigKey{"patience", "integer >= 1", "epochs without validation gain before stopping"},
    ConfigKey{"leaky_slope", "real in (0,1)", "LeakyReLU negative slope"},
    ConfigKey{"attention", "learned|uniform", "attention mode"},
    ConfigKey{"fusion", "on|off", "auxiliary-information fusion"},
    ConfigKey{"fusion_op", "hadamard", "fusion operator"},
    ConfigKey{"pretrain_kg", "on|off", "TransR warmup before recommendation training"},
    ConfigKey{"kg_warmup_epochs", "integer >= 0", "TransR warmup epochs"},
    ConfigKey{"kg_margin", "real >= 0", "margin inside the TransR pairwise loss"},
    ConfigKey{"inverse_relations", "on|off", "add inverse triples to the graph"},
    ConfigKey{"alternate_kg", "on|off", "one TransR pass after each recommendation epoch"},
    ConfigKey{"seed", "unsigned 64-bit integer", "root seed"},
    ConfigKey{"precision", "32|64", "floating-point width for training"},
    ConfigKey{"eval_threads", "integer >= 1", "threads used by evaluation", false},
    ConfigKey{"log_elapsed", "on|off", "record wall-clock time in the epoch log"},
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  std::string legal;
  for (const auto& k : kKeys) {
    if (k.name == key) legal = std::string(k.legal);
  }
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "' (legal: " + legal + ")");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v);
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    bad_value(key, v);
  }
  return out;
}

bool parse_switch(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  bad_value(key, v);
}

std::string on_off(bool b) { return b ? "on" : "off"; }

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

bool is_model_config_key(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.name == key) return true;
  }
  return false;
}

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void set_config_value(ModelConfig& c, std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key == "dim") {
    c.dim = parse_int<std::size_t>(key, v);
  } else if (key == "layer_dims") {
    c.layer_dims.clear();
    if (v.empty() || v == "none") return;
    std::size_t start = 0;
    while (start <= v.size()) {
      const auto comma = v.find(',', start);
      const auto part = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
      c.layer_dims.push_back(parse_int<std::size_t>(key, part));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else if (key == "neighbor_cap") {
    c.neighbor_cap = parse_int<std::size_t>(key, v);
  } else if (key == "lr") {
    c.lr = parse_real(key, v);
  } else if (key == "l2") {
    c.l2 = parse_real(key, v);
  } else if (key == "dropout") {
    c.dropout = parse_real(key, v);
  } else if (key == "batch_size") {
    c.batch_size = parse_int<std::size_t>(key, v);
  } else if (key == "epochs") {
    c.epochs = parse_int<std::size_t>(key, v);
  } else if (key == "patience") {
    c.patience = parse_int<std::size_t>(key, v);
  } else if (key == "leaky_slope") {
    c.leaky_slope = parse_real(key, v);
  } else if (key == "attention") {
    if (v == "learned") {
      c.attention = AttentionMode::Learned;
    } else if (v == "uniform") {
      c.attention = AttentionMode::Uniform;
    } else {
      bad_value(key, v);
    }
  } else if (key == "fusion") {
    c.fusion = parse_switch(key, v);
  } else if (key == "fusion_op") {
    if (v != "hadamard") bad_value(key, v);
    c.fusion_op = std::string(v);
  } else if (key == "pretrain_kg") {
    c.pretrain_kg = parse_switch(key, v);
  } else if (key == "kg_warmup_epochs") {
    c.kg_warmup_epochs = parse_int<std::size_t>(key, v);
  } else if (key == "kg_margin") {
    c.kg_margin = parse_real(key, v);
  } else if (key == "inverse_relations") {
    c.inverse_relations = parse_switch(key, v);
  } else if (key == "alternate_kg") {
    c.alternate_kg = parse_switch(key, v);
  } else if (key == "seed") {
    c.seed = parse_int<std::uint64_t>(key, v);
  } else if (key == "precision") {
    c.precision = parse_int<int>(key, v);
    if (c.precision != 32 && c.precision != 64) bad_value(key, v);
  } else if (key == "eval_threads") {
    c.eval_threads = parse_int<std::size_t>(key, v);
  } else if (key == "log_elapsed") {
    c.log_elapsed = parse_switch(key, v);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

std::string get_config_value(const ModelConfig& c, std::string_view key) {
  if (key == "dim") return std::to_string(c.dim);
  if (key == "layer_dims") {
    if (c.layer_dims.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < c.layer_dims.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(c.layer_dims[i]);
    }
    return s;
  }
  if (key == "neighbor_cap") return std::to_string(c.neighbor_cap);
  if (key == "lr") return format_real(c.lr);
  if (key == "l2") return format_real(c.l2);
  if (key == "dropout") return format_real(c.dropout);
  if (key == "batch_size") return std::to_string(c.batch_size);
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "patience") return std::to_string(c.patience);
  if (key == "leaky_slope") return format_real(c.leaky_slope);
  if (key == "attention") return c.attention == AttentionMode::Learned ? "learned" : "uniform";
  if (key == "fusion") return on_off(c.fusion);
  if (key == "fusion_op") return c.fusion_op;
  if (key == "pretrain_kg") return on_off(c.pretrain_kg);
  if (key == "kg_warmup_epochs") return std::to_string(c.kg_warmup_epochs);
  if (key == "kg_margin") return format_real(c.kg_margin);
  if (key == "inverse_relations") return on_off(c.inverse_relations);
  if (key == "alternate_kg") return on_off(c.alternate_kg);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "precision") return std::to_string(c.precision);
  if (key == "eval_threads") return std::to_string(c.eval_threads);
  if (key == "log_elapsed") return on_off(c.log_elapsed);
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void validate(const ModelConfig& c) {
  const auto fail = [](std::string_view key, const std::string& value) { bad_value(key, value); };
  if (c.dim < 1) fail("dim", std::to_string(c.dim));
  if (c.layer_dims.size() > 3) fail("layer_dims", get_config_value(c, "layer_dims"));
  for (auto d : c.layer_dims) {
    if (d < 1) fail("layer_dims", get_config_value(c, "layer_dims"));
  }
  if (c.neighbor_cap < 1) fail("neighbor_cap", std::to_string(c.neighbor_cap));
  if (!(c.lr > 0.0)) fail("lr", format_real(c.lr));
  if (!(c.l2 >= 0.0)) fail("l2", format_real(c.l2));
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("dropout", format_real(c.dropout));
  if (c.batch_size < 1) fail("batch_size", std::to_string(c.batch_size));
  if (c.epochs < 1) fail("epochs", std::to_string(c.epochs));
  if (c.patience < 1) fail("patience", std::to_string(c.patience));
  if (!(c.leaky_slope > 0.0 && c.leaky_slope < 1.0)) fail("leaky_slope", format_real(c.leaky_slope));
  if (!(c.kg_margin >= 0.0)) fail("kg_margin", format_real(c.kg_margin));
  if (c.eval_threads < 1) fail("eval_threads", std::to_string(c.eval_threads));
}

namespace {

std::string key_lines(const ModelConfig& c, bool recorded_only) {
  std::string out;
  for (const auto& k : kKeys) {
    if (recorded_only && !k.recorded) continue;
    out += k.name;
    out += '=';
    out += get_config_value(c, k.name);
    out += '\n';
  }
  return out;
}

}  // namespace

std::string to_text(const ModelConfig& c) { return key_lines(c, false); }

std::string recorded_text(const ModelConfig& c) { return key_lines(c, true); }

std::vector<std::pair<std::string, std::string>> split_key_values(std::string_view text,
                                                                  std::string_view source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig c;
  for (const auto& [k, v] : split_key_values(text, "config")) set_config_value(c, k, v);
  validate(c);
  return c;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) { return to_text(a) == to_text(b); }

}  // namespace kgax
