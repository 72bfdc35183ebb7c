#include "config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "robandit/errors.hpp"
#include "robandit/seeding.hpp"

namespace robandit::cli {

double Value::as_double() const {
  if (kind == Kind::kInt) return static_cast<double>(integer);
  return real;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Value parse_all() {
    Value v = parse_value();
    skip_space();
    if (pos_ != text_.size()) fail(line_, "unexpected text after value");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  Value parse_value() {
    skip_space();
    if (pos_ >= text_.size()) fail(line_, "missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  Value parse_string() {
    Value v;
    v.kind = Value::Kind::kString;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      v.text.push_back(c);
    }
    if (pos_ >= text_.size()) fail(line_, "unterminated string");
    ++pos_;
    return v;
  }

  Value parse_array() {
    Value v;
    v.kind = Value::Kind::kArray;
    ++pos_;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return v;
    }
    for (;;) {
      v.items.push_back(parse_value());
      skip_space();
      if (pos_ >= text_.size()) fail(line_, "unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
          ++pos_;
          return v;
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      fail(line_, "expected ',' or ']' in array");
    }
  }

  Value parse_scalar() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    const std::string token(text_.substr(start, pos_ - start));
    Value v;
    if (token == "true" || token == "false") {
      v.kind = Value::Kind::kBool;
      v.boolean = token == "true";
      return v;
    }
    if (token == "inf" || token == "+inf" || token == "-inf" || token == "nan" ||
        token == "+nan" || token == "-nan") {
      v.kind = Value::Kind::kFloat;
      v.real = token.find("nan") != std::string::npos
                   ? std::numeric_limits<double>::quiet_NaN()
                   : (token[0] == '-' ? -1.0 : 1.0) * std::numeric_limits<double>::infinity();
      return v;
    }
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    char* end = nullptr;
    errno = 0;
    if (is_float) {
      v.kind = Value::Kind::kFloat;
      v.real = std::strtod(token.c_str(), &end);
    } else {
      v.kind = Value::Kind::kInt;
      v.integer = std::strtoll(token.c_str(), &end, 10);
    }
    if (token.empty() || end != token.c_str() + token.size() || errno == ERANGE) {
      fail(line_, "cannot parse value '" + token + "'");
    }
    return v;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"' && (k == 0 || line[k - 1] != '\\')) in_string = !in_string;
    if (line[k] == '#' && !in_string) return line.substr(0, k);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '"' && (k == 0 || s[k - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (s[k] == '[') ++depth;
    if (s[k] == ']') --depth;
  }
  return depth;
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

}  // namespace

ConfigDocument parse_config(std::string_view text) {
  ConfigDocument doc;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  Section* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_name(name)) fail(line_no, "invalid section name '" + name + "'");
      if (doc.sections.count(name)) fail(line_no, "duplicate section [" + name + "]");
      current = &doc.sections[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_name(key)) fail(line_no, "invalid key '" + key + "'");
    if (current == nullptr) fail(line_no, "key '" + key + "' appears before any [section]");
    std::string value_text = trim(line.substr(eq + 1));
    const std::size_t value_line = line_no;
    while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
      ++line_no;
      value_text += ' ' + trim(strip_comment(raw));
    }
    if (current->count(key)) fail(value_line, "duplicate key '" + key + "'");
    (*current)[key] = ValueParser(value_text, value_line).parse_all();
  }
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Schema

namespace {

enum class Type { kInt, kFloat, kString, kFloatArray, kStringArray, kFloatMatrix };

const std::map<std::string, std::map<std::string, Type>>& schema() {
  static const std::map<std::string, std::map<std::string, Type>> s{
      {"run",
       {{"seed", Type::kInt},
        {"repetitions", Type::kInt},
        {"horizon", Type::kInt},
        {"agents", Type::kStringArray},
        {"parallelism", Type::kInt}}},
      {"env",
       {{"num_arms", Type::kInt},
        {"dim", Type::kInt},
        {"context_law", Type::kString},
        {"mean_reward", Type::kString},
        {"true_mu", Type::kFloatArray},
        {"constant_value", Type::kFloat},
        {"noise_sd", Type::kFloat},
        {"seed", Type::kInt},
        {"context_table", Type::kFloatMatrix}}},
      {"hyper",
       {{"lambda", Type::kFloat},
        {"norm_cap", Type::kFloat},
        {"ridge_scale", Type::kFloat},
        {"epsilon", Type::kFloat},
        {"alpha", Type::kFloat}}},
      {"optimizer",
       {{"grid_radius", Type::kFloat},
        {"grid_points_per_axis", Type::kInt},
        {"nm_max_iters", Type::kInt},
        {"nm_xatol", Type::kFloat},
        {"nm_fatol", Type::kFloat},
        {"nm_initial_step", Type::kFloat},
        {"num_seeds", Type::kInt}}},
      {"oracle",
       {{"mc_samples", Type::kInt}, {"mc_seed", Type::kInt}, {"cache_dir", Type::kString}}},
      {"output", {{"dir", Type::kString}}},
  };
  return s;
}

bool is_number(const Value& v) {
  return v.kind == Value::Kind::kInt || v.kind == Value::Kind::kFloat;
}

void check_type(const std::string& where, const Value& v, Type type) {
  auto bad = [&](const char* expected) {
    throw ConfigError(where + ": expected " + expected);
  };
  switch (type) {
    case Type::kInt:
      if (v.kind != Value::Kind::kInt) bad("an integer");
      break;
    case Type::kFloat:
      if (!is_number(v)) bad("a number");
      break;
    case Type::kString:
      if (v.kind != Value::Kind::kString) bad("a string");
      break;
    case Type::kFloatArray:
      if (v.kind != Value::Kind::kArray) bad("an array of numbers");
      for (const auto& item : v.items) {
        if (!is_number(item)) bad("an array of numbers");
      }
      break;
    case Type::kStringArray:
      if (v.kind != Value::Kind::kArray) bad("an array of strings");
      for (const auto& item : v.items) {
        if (item.kind != Value::Kind::kString) bad("an array of strings");
      }
      break;
    case Type::kFloatMatrix:
      if (v.kind != Value::Kind::kArray) bad("an array of number arrays");
      for (const auto& row : v.items) check_type(where, row, Type::kFloatArray);
      break;
  }
}

std::uint64_t as_seed(const std::string& where, const Value& v) {
  if (v.integer < 0) throw ConfigError(where + ": seeds must be non-negative");
  return static_cast<std::uint64_t>(v.integer);
}

int as_int(const std::string& where, const Value& v) {
  if (v.integer < std::numeric_limits<int>::min() || v.integer > std::numeric_limits<int>::max()) {
    throw ConfigError(where + ": integer out of range");
  }
  return static_cast<int>(v.integer);
}

Vector as_vector(const Value& v) {
  Vector out(static_cast<Eigen::Index>(v.items.size()));
  for (std::size_t k = 0; k < v.items.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = v.items[k].as_double();
  }
  return out;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

RunSettings build_settings(const ConfigDocument& doc) {
  for (const auto& [name, section] : doc.sections) {
    const auto known = schema().find(name);
    if (known == schema().end()) throw ConfigError("unknown config section [" + name + "]");
    for (const auto& [key, value] : section) {
      const auto type = known->second.find(key);
      if (type == known->second.end()) {
        throw ConfigError("unknown key '" + key + "' in [" + name + "]");
      }
      check_type("[" + name + "] " + key, value, type->second);
    }
  }

  RunSettings s;
  ExperimentConfig& x = s.experiment;
  x.env = misspecified_reward_environment();
  auto get = [&](const char* section, const char* key) -> const Value* {
    const auto sec = doc.sections.find(section);
    if (sec == doc.sections.end()) return nullptr;
    const auto it = sec->second.find(key);
    return it == sec->second.end() ? nullptr : &it->second;
  };
  auto where = [](const char* section, const char* key) {
    return std::string("[") + section + "] " + key;
  };

  try {
    if (auto v = get("run", "seed")) x.base_seed = as_seed(where("run", "seed"), *v);
    if (auto v = get("run", "repetitions")) x.repetitions = as_int(where("run", "repetitions"), *v);
    if (auto v = get("run", "horizon")) x.horizon = as_int(where("run", "horizon"), *v);
    if (auto v = get("run", "parallelism")) x.parallelism = as_int(where("run", "parallelism"), *v);
    if (auto v = get("run", "agents")) {
      x.agents.clear();
      for (const auto& item : v->items) x.agents.push_back(agent_kind_from_string(item.text));
    }

    EnvironmentSpec& env = x.env;
    if (auto v = get("env", "num_arms")) env.num_arms = as_int(where("env", "num_arms"), *v);
    if (auto v = get("env", "dim")) env.dim = as_int(where("env", "dim"), *v);
    if (auto v = get("env", "context_law")) env.context_law = context_law_from_string(v->text);
    if (auto v = get("env", "mean_reward")) env.mean_reward = mean_reward_from_string(v->text);
    if (auto v = get("env", "true_mu")) env.true_mu = as_vector(*v);
    if (auto v = get("env", "constant_value")) env.constant_value = v->as_double();
    if (auto v = get("env", "noise_sd")) env.noise_sd = v->as_double();
    if (auto v = get("env", "seed")) env.seed = as_seed(where("env", "seed"), *v);
    if (auto v = get("env", "context_table")) {
      for (const auto& row : v->items) {
        if (static_cast<Eigen::Index>(row.items.size()) != env.num_arms * env.dim) {
          throw ConfigError("[env] context_table: each entry needs num_arms * dim numbers");
        }
        const Vector flat = as_vector(row);
        Matrix arms(env.num_arms, env.dim);
        for (Eigen::Index i = 0; i < env.num_arms; ++i) {
          arms.row(i) = flat.segment(i * env.dim, env.dim).transpose();
        }
        env.context_table.push_back(std::move(arms));
      }
    }
    if (env.mean_reward == MeanReward::kConstant && !get("env", "true_mu")) {
      env.true_mu = Vector::Zero(env.dim);
    }

    HyperParams& h = x.hyper;
    if (auto v = get("hyper", "lambda")) h.lambda = v->as_double();
    if (auto v = get("hyper", "norm_cap")) h.norm_cap = v->as_double();
    if (auto v = get("hyper", "ridge_scale")) h.ridge_scale = v->as_double();
    if (auto v = get("hyper", "epsilon")) h.epsilon = v->as_double();
    if (auto v = get("hyper", "alpha")) h.alpha = v->as_double();

    OptimizerConfig& o = x.opt;
    if (auto v = get("optimizer", "grid_radius")) o.grid_radius = v->as_double();
    if (auto v = get("optimizer", "grid_points_per_axis")) {
      o.grid_points_per_axis = as_int(where("optimizer", "grid_points_per_axis"), *v);
    }
    if (auto v = get("optimizer", "nm_max_iters")) {
      o.nm_max_iters = as_int(where("optimizer", "nm_max_iters"), *v);
    }
    if (auto v = get("optimizer", "nm_xatol")) o.nm_xatol = v->as_double();
    if (auto v = get("optimizer", "nm_fatol")) o.nm_fatol = v->as_double();
    if (auto v = get("optimizer", "nm_initial_step")) o.nm_initial_step = v->as_double();
    if (auto v = get("optimizer", "num_seeds")) o.num_seeds = as_int(where("optimizer", "num_seeds"), *v);

    if (auto v = get("oracle", "mc_samples")) {
      s.oracle.mc_samples = as_int(where("oracle", "mc_samples"), *v);
    }
    if (auto v = get("oracle", "mc_seed")) s.oracle.mc_seed = as_seed(where("oracle", "mc_seed"), *v);
    if (auto v = get("oracle", "cache_dir")) s.oracle.cache_dir = v->text;
    if (auto v = get("output", "dir")) s.output_dir = v->text;

    x.validate();
    if (s.oracle.mc_samples < 1) throw ConfigError("[oracle] mc_samples must be >= 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return s;
}

std::string canonical_config(const RunSettings& s) {
  const ExperimentConfig& x = s.experiment;
  std::ostringstream out;
  out << "run.seed=" << x.base_seed << "\nrun.repetitions=" << x.repetitions
      << "\nrun.horizon=" << x.horizon << "\nrun.agents=";
  for (AgentKind kind : x.agents) out << to_string(kind) << ',';
  out << "\nenv=" << x.env.canonical();
  const HyperParams& h = x.hyper;
  out << "\nhyper.lambda=" << format_double(h.lambda) << "\nhyper.norm_cap="
      << format_double(h.norm_cap) << "\nhyper.ridge_scale=" << format_double(h.ridge_scale)
      << "\nhyper.epsilon=" << format_double(h.epsilon) << "\nhyper.alpha="
      << format_double(h.alpha);
  const OptimizerConfig& o = x.opt;
  out << "\noptimizer.grid_radius=" << format_double(o.grid_radius)
      << "\noptimizer.grid_points_per_axis=" << o.grid_points_per_axis
      << "\noptimizer.nm_max_iters=" << o.nm_max_iters << "\noptimizer.nm_xatol="
      << format_double(o.nm_xatol) << "\noptimizer.nm_fatol=" << format_double(o.nm_fatol)
      << "\noptimizer.nm_initial_step=" << format_double(o.nm_initial_step)
      << "\noptimizer.num_seeds=" << o.num_seeds;
  out << "\noracle.mc_samples=" << s.oracle.mc_samples << "\noracle.mc_seed=" << s.oracle.mc_seed
      << '\n';
  return out.str();
}

std::string config_hash(const RunSettings& settings) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(settings))));
  return buf;
}

namespace {

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);  // JSON has no inf/nan literals
}

nlohmann::json vector_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) out.push_back(number(v(j)));
  return out;
}

}  // namespace

nlohmann::json settings_to_json(const RunSettings& s) {
  const ExperimentConfig& x = s.experiment;
  nlohmann::json agents = nlohmann::json::array();
  for (AgentKind kind : x.agents) agents.push_back(to_string(kind));
  nlohmann::json env{{"num_arms", x.env.num_arms},
                     {"dim", x.env.dim},
                     {"context_law", to_string(x.env.context_law)},
                     {"mean_reward", to_string(x.env.mean_reward)},
                     {"true_mu", vector_json(x.env.true_mu)},
                     {"constant_value", number(x.env.constant_value)},
                     {"noise_sd", number(x.env.noise_sd)},
                     {"seed", x.env.seed}};
  if (!x.env.context_table.empty()) env["context_table_entries"] = x.env.context_table.size();
  return {
      {"run",
       {{"seed", x.base_seed},
        {"repetitions", x.repetitions},
        {"horizon", x.horizon},
        {"agents", agents},
        {"parallelism", x.parallelism}}},
      {"env", env},
      {"hyper",
       {{"lambda", number(x.hyper.lambda)},
        {"norm_cap", number(x.hyper.norm_cap)},
        {"ridge_scale", number(x.hyper.ridge_scale)},
        {"epsilon", number(x.hyper.epsilon)},
        {"alpha", number(x.hyper.alpha)}}},
      {"optimizer",
       {{"grid_radius", number(x.opt.grid_radius)},
        {"grid_points_per_axis", x.opt.grid_points_per_axis},
        {"nm_max_iters", x.opt.nm_max_iters},
        {"nm_xatol", number(x.opt.nm_xatol)},
        {"nm_fatol", number(x.opt.nm_fatol)},
        {"nm_initial_step", number(x.opt.nm_initial_step)},
        {"num_seeds", x.opt.num_seeds}}},
      {"oracle",
       {{"mc_samples", s.oracle.mc_samples},
        {"mc_seed", s.oracle.mc_seed},
        {"cache_dir", s.oracle.cache_dir}}},
      {"output", {{"dir", s.output_dir}}},
  };
}

void apply_seed_environment(RunSettings& settings) {
  const char* raw = std::getenv("ROBANDIT_SEED");
  if (raw == nullptr || *raw == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long seed = std::strtoull(raw, &end, 10);
  if (*end != '\0' || errno == ERANGE || raw[0] == '-') {
    throw ConfigError("ROBANDIT_SEED must be a non-negative integer, got '" + std::string(raw) + "'");
  }
  settings.experiment.base_seed = seed;
  settings.experiment.env.seed = seed;
}

}  // namespace robandit::cli
