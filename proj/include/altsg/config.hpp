#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "altsg/errors.hpp"

namespace altsg {

/// Resolved experiment configuration. Defaults, then config file, then CLI
/// overrides; later wins. The canonical string (and its hash) covers every
/// semantic field, so two configs resolve equal iff their hashes match.
struct ExperimentConfig {
  std::string method = "bptt";  // bptt | dni | bptt_restart | dni_restart | alternating
  long layers = 2;
  long hidden = 64;
  long embed = 32;
  long k = 1;
  long d_g = 16;
  long trunc = 16;  // T
  long batch = 16;  // B
  long epochs = 30;
  long e_base = 2;
  double lr = 2e-3;
  double lr_dni = 1e-3;
  std::uint64_t seed = 42;
  long precision = 64;  // 32 or 64
  std::string train_path, valid_path, test_path;
  std::string mode = "char";  // char | word
  bool train_dni_during_real = true;
  double clip = 10.0;
  bool reset_on_restart = true;
  bool freeze_dni = false;
  long checkpoint_every = 10;
  long vocab_max = 0;  // 0 = unlimited

  void validate() const {
    if (method != "bptt" && method != "dni" && method != "bptt_restart" && method != "dni_restart" &&
        method != "alternating")
      throw ConfigError("unknown method '" + method + "'");
    if (mode != "char" && mode != "word") throw ConfigError("mode must be char or word");
    if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
    if (layers < 1 || hidden < 1 || embed < 1 || d_g < 1 || trunc < 1 || batch < 1 || epochs < 1 ||
        e_base < 1 || k < 1 || k > 2)
      throw ConfigError("model/loop dimensions must be positive (k in {1,2})");
    if (!(lr > 0) || !(lr_dni > 0)) throw ConfigError("learning rates must be positive");
    if (train_path.empty()) throw ConfigError("train_path is required");
  }

  std::map<std::string, std::string> as_map() const {
    auto d2s = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    return {
        {"method", method},
        {"layers", std::to_string(layers)},
        {"hidden", std::to_string(hidden)},
        {"embed", std::to_string(embed)},
        {"k", std::to_string(k)},
        {"d_g", std::to_string(d_g)},
        {"T", std::to_string(trunc)},
        {"B", std::to_string(batch)},
        {"epochs", std::to_string(epochs)},
        {"e_base", std::to_string(e_base)},
        {"lr", d2s(lr)},
        {"lr_dni", d2s(lr_dni)},
        {"seed", std::to_string(seed)},
        {"precision", std::to_string(precision)},
        {"train_path", train_path},
        {"valid_path", valid_path},
        {"test_path", test_path},
        {"mode", mode},
        {"train_dni_during_real", train_dni_during_real ? "true" : "false"},
        {"clip", d2s(clip)},
        {"reset_on_restart", reset_on_restart ? "true" : "false"},
        {"freeze_dni", freeze_dni ? "true" : "false"},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"vocab_max", std::to_string(vocab_max)},
    };
  }

  std::string canonical_string() const {
    std::string out;
    for (const auto& [k_, v] : as_map()) out += k_ + "=" + v + "\n";
    return out;
  }
};

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": " + v);
}

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "method") c.method = value;
    else if (key == "layers") c.layers = std::stol(value);
    else if (key == "hidden") c.hidden = std::stol(value);
    else if (key == "embed") c.embed = std::stol(value);
    else if (key == "k") c.k = std::stol(value);
    else if (key == "d_g") c.d_g = std::stol(value);
    else if (key == "T") c.trunc = std::stol(value);
    else if (key == "B") c.batch = std::stol(value);
    else if (key == "epochs") c.epochs = std::stol(value);
    else if (key == "e_base") c.e_base = std::stol(value);
    else if (key == "lr") c.lr = std::stod(value);
    else if (key == "lr_dni") c.lr_dni = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "precision") c.precision = std::stol(value);
    else if (key == "train_path") c.train_path = value;
    else if (key == "valid_path") c.valid_path = value;
    else if (key == "test_path") c.test_path = value;
    else if (key == "mode") c.mode = value;
    else if (key == "train_dni_during_real") c.train_dni_during_real = parse_bool(value, key);
    else if (key == "clip") c.clip = std::stod(value);
    else if (key == "reset_on_restart") c.reset_on_restart = parse_bool(value, key);
    else if (key == "freeze_dni") c.freeze_dni = parse_bool(value, key);
    else if (key == "checkpoint_every") c.checkpoint_every = std::stol(value);
    else if (key == "vocab_max") c.vocab_max = std::stol(value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigError("invalid value for " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key + ": " + value);
  }
}

/// Flat key=value format, '#' starts a comment.
inline void apply_config_text(ExperimentConfig& c, const std::string& text) {
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char ch : line)
        if (!isspace(static_cast<unsigned char>(ch))) blank = false;
      if (blank) continue;
      throw ConfigError("malformed config line: " + line);
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  ExperimentConfig c;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    apply_config_text(c, ss.str());
  }
  for (const auto& [k, v] : overrides) apply_key(c, k, v);
  c.validate();
  return c;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) { return fnv1a64(c.canonical_string()); }

}  // namespace altsg
