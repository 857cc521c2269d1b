#include "posergcn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace posergcn {

std::string to_string(const LambdaMode& mode) {
  if (mode.adaptive) return "adaptive";
  std::ostringstream out;
  out << "fixed:" << mode.fixed_value;
  return out.str();
}

LambdaMode lambda_mode_from_string(const std::string& s) {
  if (s == "adaptive") return LambdaMode{true, 0.5};
  if (s.rfind("fixed:", 0) == 0) {
    const std::string num = s.substr(6);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(num, &used);
    } catch (const std::exception&) {
      throw ConfigError("lambda_mode: cannot parse fixed value '" + num + "'");
    }
    if (used != num.size()) throw ConfigError("lambda_mode: trailing junk in '" + s + "'");
    if (v < 0.0 || v > 1.0) throw ConfigError("lambda_mode: fixed value must lie in [0, 1]");
    return LambdaMode{false, v};
  }
  throw ConfigError("lambda_mode: expected 'adaptive' or 'fixed:<v>', got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long parse_int(const std::string& key, const std::string& value) {
  size_t used = 0;
  long v = 0;
  try {
    v = std::stol(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse integer '" + value + "'");
  }
  if (used != value.size()) throw ConfigError(key + ": trailing junk in '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse number '" + value + "'");
  }
  if (used != value.size()) throw ConfigError(key + ": trailing junk in '" + value + "'");
  return v;
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
      else if (key == "n") cfg.n = static_cast<int>(parse_int(key, value));
      else if (key == "d") cfg.d = static_cast<int>(parse_int(key, value));
      else if (key == "layers") cfg.layers = static_cast<int>(parse_int(key, value));
      else if (key == "cell") cfg.cell = cell_kind_from_string(value);
      else if (key == "pooling") cfg.pooling = pooling_from_string(value);
      else if (key == "aggregator") cfg.aggregator = aggregator_from_string(value);
      else if (key == "margin") cfg.margin = parse_double(key, value);
      else if (key == "lambda_mode") cfg.lambda_mode = lambda_mode_from_string(value);
      else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
      else if (key == "P") cfg.P = static_cast<int>(parse_int(key, value));
      else if (key == "K") cfg.K = static_cast<int>(parse_int(key, value));
      else if (key == "T") cfg.T = static_cast<int>(parse_int(key, value));
      else if (key == "lr") cfg.lr = parse_double(key, value);
      else throw ConfigError("unknown config key: " + key);
    } catch (const ArgumentError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  return parse(in);
}

RunConfig RunConfig::parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

void RunConfig::validate() const {
  if (n < 1) throw ConfigError("n: must be >= 1");
  if (d < 1) throw ConfigError("d: must be >= 1");
  if (layers < 1) throw ConfigError("layers: must be >= 1");
  if (layers > 1 && cell != CellKind::rgcn)
    throw ConfigError("layers: only rgcn supports layers > 1");
  if (margin < 0.0) throw ConfigError("margin: must be >= 0");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (P < 2) throw ConfigError("P: need at least 2 identities per batch");
  if (K < 2) throw ConfigError("K: need at least 2 tracks per identity");
  if (T < 1) throw ConfigError("T: must be >= 1");
  if (lr <= 0.0) throw ConfigError("lr: must be positive");
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out << "seed = " << seed << "\n";
  out << "n = " << n << "\n";
  out << "d = " << d << "\n";
  out << "layers = " << layers << "\n";
  out << "cell = " << to_string(cell) << "\n";
  out << "pooling = " << to_string(pooling) << "\n";
  out << "aggregator = " << to_string(aggregator) << "\n";
  out << "margin = " << margin << "\n";
  out << "lambda_mode = " << to_string(lambda_mode) << "\n";
  out << "epochs = " << epochs << "\n";
  out << "P = " << P << "\n";
  out << "K = " << K << "\n";
  out << "T = " << T << "\n";
  out << "lr = " << lr << "\n";
  return out.str();
}

std::string RunConfig::hash() const {
  const std::string text = canonical();
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::apply_env_seed_override() {
  const char* env = std::getenv("POSERGCN_SEED");
  if (!env) return;
  seed = static_cast<uint64_t>(parse_int("POSERGCN_SEED", env));
}

}  // namespace posergcn
