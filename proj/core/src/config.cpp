#include "basis/config.hpp"

#include <cerrno>
#include <climits>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace basis {

void ExpertConfig::validate() const {
  if (temperature <= 0.0) throw std::invalid_argument("expert: temperature must be > 0");
  if (demo_count < 1) throw std::invalid_argument("expert: demo_count must be >= 1");
}

void RunConfig::validate() const {
  try {
    if (enumeration_cap < 1)
      throw std::invalid_argument("enumeration_cap must be >= 1");
    env.fruit.validate();
    env.lane.validate();
    pretrain.validate();
    irl.validate();
    eval.validate();
    expert.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(int line_no, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

double to_double(const std::string& v, int line_no) {
  char* end = nullptr;
  errno = 0;
  double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end != v.c_str() + v.size() || v.empty())
    fail(line_no, "expected a number, got '" + v + "'");
  return x;
}

long to_long(const std::string& v, int line_no) {
  char* end = nullptr;
  errno = 0;
  long x = std::strtol(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size() || v.empty())
    fail(line_no, "expected an integer, got '" + v + "'");
  return x;
}

int to_int(const std::string& v, int line_no) {
  long x = to_long(v, line_no);
  if (x < INT_MIN || x > INT_MAX) fail(line_no, "integer out of range: " + v);
  return static_cast<int>(x);
}

uint64_t to_u64(const std::string& v, int line_no) {
  char* end = nullptr;
  errno = 0;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size() || v.empty())
    fail(line_no, "expected an unsigned integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v, int line_no) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(line_no, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= v.size()) {
    size_t comma = v.find(',', start);
    std::string item = trim(v.substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<int> to_int_list(const std::string& v, int line_no) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(to_int(item, line_no));
  return out;
}

std::vector<double> to_double_list(const std::string& v, int line_no) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(item, line_no));
  return out;
}

struct SeenSeeds {
  bool pretrain = false, irl = false, eval = false, expert = false;
};

void set_global(RunConfig& c, const std::string& key, const std::string& val,
                int line_no) {
  if (key == "seed") c.seed = to_u64(val, line_no);
  else if (key == "enumeration_cap") c.enumeration_cap = to_long(val, line_no);
  else fail(line_no, "unknown global key '" + key + "'");
}

void set_env(RunConfig& c, const std::string& key, const std::string& val,
             int line_no) {
  EnvConfig& e = c.env;
  if (key == "kind") {
    try {
      e.kind = parse_env_kind(val);
    } catch (const std::invalid_argument& ex) {
      fail(line_no, ex.what());
    }
  } else if (key == "grid_size") e.fruit.grid_size = to_int(val, line_no);
  else if (key == "colors") e.fruit.colors = to_int(val, line_no);
  else if (key == "fruits_per_color") e.fruit.fruits_per_color = to_int(val, line_no);
  else if (key == "horizon") {
    e.fruit.horizon = to_int(val, line_no);
    e.lane.horizon = e.fruit.horizon;
  } else if (key == "respawn") e.fruit.respawn = to_bool(val, line_no);
  else if (key == "lanes") e.lane.lanes = to_int(val, line_no);
  else if (key == "speed_bins") e.lane.speed_bins = to_int(val, line_no);
  else if (key == "headway_bins") e.lane.headway_bins = to_int(val, line_no);
  else if (key == "collision_penalty") e.lane.collision_penalty = to_double(val, line_no);
  else fail(line_no, "unknown [env] key '" + key + "'");
}

void set_pretrain(RunConfig& c, const std::string& key, const std::string& val,
                  int line_no, SeenSeeds& seen) {
  PretrainConfig& p = c.pretrain;
  if (key == "K") p.K = to_int(val, line_no);
  else if (key == "d") p.d = to_int(val, line_no);
  else if (key == "gamma") p.gamma = to_double(val, line_no);
  else if (key == "total_iterations") p.total_iterations = to_int(val, line_no);
  else if (key == "episode_horizon") p.episode_horizon = to_int(val, line_no);
  else if (key == "gradient_steps_per_iteration")
    p.gradient_steps_per_iteration = to_int(val, line_no);
  else if (key == "batch_size") p.batch_size = to_int(val, line_no);
  else if (key == "lr") p.lr = to_double(val, line_no);
  else if (key == "target_update_interval")
    p.target_update_interval = to_int(val, line_no);
  else if (key == "exploration_temperature")
    p.exploration_temperature = to_double(val, line_no);
  else if (key == "exploration_temperature_final")
    p.exploration_temperature_final = to_double(val, line_no);
  else if (key == "exploration_anneal_fraction")
    p.exploration_anneal_fraction = to_double(val, line_no);
  else if (key == "backup_temperature") p.backup_temperature = to_double(val, line_no);
  else if (key == "buffer_capacity")
    p.buffer_capacity = static_cast<size_t>(to_u64(val, line_no));
  else if (key == "seed") {
    p.seed = to_u64(val, line_no);
    seen.pretrain = true;
  } else if (key == "trunk_hidden") p.trunk_hidden = to_int_list(val, line_no);
  else if (key == "trunk_out") p.trunk_out = to_int(val, line_no);
  else if (key == "head_hidden") p.head_hidden = to_int_list(val, line_no);
  else fail(line_no, "unknown [pretrain] key '" + key + "'");
}

void set_irl(RunConfig& c, const std::string& key, const std::string& val, int line_no,
             SeenSeeds& seen) {
  IRLConfig& r = c.irl;
  if (key == "demo_counts") r.demo_counts = to_int_list(val, line_no);
  else if (key == "epochs") r.epochs = to_int(val, line_no);
  else if (key == "min_gradient_steps") r.min_gradient_steps = to_int(val, line_no);
  else if (key == "batch_size") r.batch_size = to_int(val, line_no);
  else if (key == "lr") r.lr = to_double(val, line_no);
  else if (key == "gamma") r.gamma = to_double(val, line_no);
  else if (key == "bc_weight") r.bc_weight = to_double(val, line_no);
  else if (key == "itd_weight") r.itd_weight = to_double(val, line_no);
  else if (key == "freeze_phi") r.freeze_phi = to_bool(val, line_no);
  else if (key == "target_update_interval")
    r.target_update_interval = to_int(val, line_no);
  else if (key == "seed") {
    r.seed = to_u64(val, line_no);
    seen.irl = true;
  } else fail(line_no, "unknown [irl] key '" + key + "'");
}

void set_eval(RunConfig& c, const std::string& key, const std::string& val, int line_no,
              SeenSeeds& seen) {
  EvalConfig& e = c.eval;
  if (key == "demo_counts") e.demo_counts = to_int_list(val, line_no);
  else if (key == "variants") {
    e.variants.clear();
    for (const auto& item : split_list(val)) {
      try {
        e.variants.push_back(parse_variant(item));
      } catch (const std::invalid_argument& ex) {
        fail(line_no, ex.what());
      }
    }
  } else if (key == "seeds") e.seeds = to_int(val, line_no);
  else if (key == "episodes") e.episodes = to_int(val, line_no);
  else if (key == "phi_ablation") e.phi_ablation = to_bool(val, line_no);
  else if (key == "irl_pretrain_demos_per_task")
    e.irl_pretrain_demos_per_task = to_int(val, line_no);
  else if (key == "seed") {
    e.seed = to_u64(val, line_no);
    seen.eval = true;
  } else fail(line_no, "unknown [eval] key '" + key + "'");
}

void set_expert(RunConfig& c, const std::string& key, const std::string& val,
                int line_no, SeenSeeds& seen) {
  ExpertConfig& x = c.expert;
  if (key == "temperature") x.temperature = to_double(val, line_no);
  else if (key == "demo_count") x.demo_count = to_int(val, line_no);
  else if (key == "seed") {
    x.seed = to_u64(val, line_no);
    seen.expert = true;
  } else fail(line_no, "unknown [expert] key '" + key + "'");
}

std::string join_ints(const std::vector<int>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  SeenSeeds seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    size_t comment = raw.find_first_of("#;");
    std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "env" && section != "pretrain" && section != "irl" &&
          section != "eval" && section != "expert")
        fail(line_no, "unknown section [" + section + "]");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (section.empty()) set_global(config, key, val, line_no);
    else if (section == "env") set_env(config, key, val, line_no);
    else if (section == "pretrain") set_pretrain(config, key, val, line_no, seen);
    else if (section == "irl") set_irl(config, key, val, line_no, seen);
    else if (section == "eval") set_eval(config, key, val, line_no, seen);
    else set_expert(config, key, val, line_no, seen);
  }

  Rng root(config.seed);
  if (!seen.pretrain) config.pretrain.seed = root.stream("pretrain").next_u64();
  if (!seen.irl) config.irl.seed = root.stream("irl").next_u64();
  if (!seen.eval) config.eval.seed = root.stream("eval").next_u64();
  if (!seen.expert) config.expert.seed = root.stream("expert").next_u64();
  config.pretrain.env = config.env;
  config.validate();
  return config;
}

void reseed_from_root(RunConfig& config) {
  Rng root(config.seed);
  config.pretrain.seed = root.stream("pretrain").next_u64();
  config.irl.seed = root.stream("irl").next_u64();
  config.eval.seed = root.stream("eval").next_u64();
  config.expert.seed = root.stream("expert").next_u64();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f)
    throw InputFileError("cannot open config " + path.string() + ": " +
                         std::strerror(errno));
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
  std::fclose(f);
  return parse_run_config(text);
}

std::string render_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << "\n";
  out << "enumeration_cap = " << c.enumeration_cap << "\n\n";

  out << "[env]\n";
  out << "kind = " << env_kind_name(c.env.kind) << "\n";
  out << "grid_size = " << c.env.fruit.grid_size << "\n";
  out << "colors = " << c.env.fruit.colors << "\n";
  out << "fruits_per_color = " << c.env.fruit.fruits_per_color << "\n";
  out << "horizon = " << c.env.fruit.horizon << "\n";
  out << "respawn = " << (c.env.fruit.respawn ? "true" : "false") << "\n";
  out << "lanes = " << c.env.lane.lanes << "\n";
  out << "speed_bins = " << c.env.lane.speed_bins << "\n";
  out << "headway_bins = " << c.env.lane.headway_bins << "\n";
  out << "collision_penalty = " << num(c.env.lane.collision_penalty) << "\n\n";

  const PretrainConfig& p = c.pretrain;
  out << "[pretrain]\n";
  out << "K = " << p.K << "\n";
  out << "d = " << p.d << "\n";
  out << "gamma = " << num(p.gamma) << "\n";
  out << "total_iterations = " << p.total_iterations << "\n";
  out << "episode_horizon = " << p.episode_horizon << "\n";
  out << "gradient_steps_per_iteration = " << p.gradient_steps_per_iteration << "\n";
  out << "batch_size = " << p.batch_size << "\n";
  out << "lr = " << num(p.lr) << "\n";
  out << "target_update_interval = " << p.target_update_interval << "\n";
  out << "exploration_temperature = " << num(p.exploration_temperature) << "\n";
  out << "exploration_temperature_final = " << num(p.exploration_temperature_final)
      << "\n";
  out << "exploration_anneal_fraction = " << num(p.exploration_anneal_fraction) << "\n";
  out << "backup_temperature = " << num(p.backup_temperature) << "\n";
  out << "buffer_capacity = " << p.buffer_capacity << "\n";
  out << "seed = " << p.seed << "\n";
  out << "trunk_hidden = " << join_ints(p.trunk_hidden) << "\n";
  out << "trunk_out = " << p.trunk_out << "\n";
  out << "head_hidden = " << join_ints(p.head_hidden) << "\n\n";

  const IRLConfig& r = c.irl;
  out << "[irl]\n";
  out << "demo_counts = " << join_ints(r.demo_counts) << "\n";
  out << "epochs = " << r.epochs << "\n";
  out << "min_gradient_steps = " << r.min_gradient_steps << "\n";
  out << "batch_size = " << r.batch_size << "\n";
  out << "lr = " << num(r.lr) << "\n";
  out << "gamma = " << num(r.gamma) << "\n";
  out << "bc_weight = " << num(r.bc_weight) << "\n";
  out << "itd_weight = " << num(r.itd_weight) << "\n";
  out << "freeze_phi = " << (r.freeze_phi ? "true" : "false") << "\n";
  out << "target_update_interval = " << r.target_update_interval << "\n";
  out << "seed = " << r.seed << "\n\n";

  const EvalConfig& e = c.eval;
  out << "[eval]\n";
  out << "demo_counts = " << join_ints(e.demo_counts) << "\n";
  out << "variants = ";
  for (size_t i = 0; i < e.variants.size(); ++i) {
    if (i) out << ",";
    out << variant_name(e.variants[i]);
  }
  out << "\n";
  out << "seeds = " << e.seeds << "\n";
  out << "episodes = " << e.episodes << "\n";
  out << "phi_ablation = " << (e.phi_ablation ? "true" : "false") << "\n";
  out << "irl_pretrain_demos_per_task = " << e.irl_pretrain_demos_per_task << "\n";
  out << "seed = " << e.seed << "\n\n";

  out << "[expert]\n";
  out << "temperature = " << num(c.expert.temperature) << "\n";
  out << "demo_count = " << c.expert.demo_count << "\n";
  out << "seed = " << c.expert.seed << "\n";
  return out.str();
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f)
    throw InputFileError("cannot write config " + path.string() + ": " +
                         std::strerror(errno));
  std::string text = render_run_config(config);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

}  // namespace basis
