#include "labelmend/config.hpp"

#include <cmath>
#include <fstream>

#include "labelmend/detector.hpp"
#include "labelmend/error.hpp"

namespace labelmend {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        raise(Errc::config_error,
              path.string() + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(Errc::config_error,
            path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() > 1)
      value = value.substr(1, value.size() - 2);
    if (key.empty()) raise(Errc::config_error, "empty key at line " + std::to_string(lineno));
    out.emplace_back(section.empty() ? key : section + "." + key, value);
  }
  return out;
}

std::uint32_t parse_u32(const std::string& key, const std::string& value) {
  try {
    const unsigned long v = std::stoul(value);
    if (v > 0xffffffffUL) throw std::out_of_range(key);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    raise(Errc::config_error, key + ": expected unsigned integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    raise(Errc::config_error, key + ": expected unsigned integer, got '" + value + "'");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    raise(Errc::config_error, key + ": expected number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  raise(Errc::config_error, key + ": expected true/false, got '" + value + "'");
}

void PipelineConfig::apply(const std::string& key, const std::string& value) {
  if (key == "bg_thresh") bg_thresh = static_cast<float>(parse_f64(key, value));
  else if (key == "fg_thresh") fg_thresh = static_cast<float>(parse_f64(key, value));
  else if (key == "theta") {
    if (value == "auto") theta.reset();
    else theta = parse_f64(key, value);
  }
  else if (key == "target_precision") target_precision = parse_f64(key, value);
  else if (key == "grid_min") grid_min = parse_f64(key, value);
  else if (key == "grid_max") grid_max = parse_f64(key, value);
  else if (key == "grid_size") grid_size = static_cast<int>(parse_u32(key, value));
  else if (key == "superpixel_count") superpixel_count = parse_u32(key, value);
  else if (key == "compactness") compactness = static_cast<float>(parse_f64(key, value));
  else if (key == "slic_iters") slic_iters = static_cast<int>(parse_u32(key, value));
  else if (key == "edge_symmetrize") {
    if (value == "or") edge_symmetrize = EdgeSymmetrize::kOr;
    else if (value == "and") edge_symmetrize = EdgeSymmetrize::kAnd;
    else raise(Errc::config_error, "edge_symmetrize must be 'or' or 'and'");
  }
  else if (key == "gat.heads") gat_heads = parse_u32(key, value);
  else if (key == "gat.hidden") gat_hidden = parse_u32(key, value);
  else if (key == "gat.att") gat_att = parse_u32(key, value);
  else if (key == "gat.lr") gat_lr = parse_f64(key, value);
  else if (key == "gat.weight_decay") gat_weight_decay = parse_f64(key, value);
  else if (key == "gat.epochs") gat_epochs = static_cast<int>(parse_u32(key, value));
  else if (key == "gat.patience") gat_patience = static_cast<int>(parse_u32(key, value));
  else if (key == "gat.init_scale") gat_init_scale = parse_f64(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "workers") workers = static_cast<int>(parse_u32(key, value));
  else if (key == "trust_gat_everywhere") trust_gat_everywhere = parse_bool(key, value);
  else if (key == "save_models") save_models = parse_bool(key, value);
  else raise(Errc::config_error, "unknown config key: " + key);
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  PipelineConfig cfg;
  for (const auto& [key, value] : read_kv_file(path)) cfg.apply(key, value);
  return cfg;
}

std::vector<double> PipelineConfig::theta_grid() const {
  if (grid_size < 1 || !(grid_min > 0) || !(grid_max > grid_min))
    raise(Errc::config_error, "theta grid must satisfy 0 < min < max, size >= 1");
  if (grid_size == 1) return {grid_min};
  std::vector<double> grid(grid_size);
  const double lo = std::log(grid_min), hi = std::log(grid_max);
  for (int i = 0; i < grid_size; ++i)
    grid[i] = std::exp(lo + (hi - lo) * i / (grid_size - 1));
  return grid;
}

}  // namespace labelmend
