#include "mirror/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace mirror {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string unquote(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    std::string inner = s.substr(1, s.size() - 2);
    std::erase_if(inner, [](char c) { return c == ' ' || c == '"' || c == '\''; });
    return inner;
  }
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("type mismatch for " + key + ": expected a number, got '" + text + "'");
  return v;
}

int64_t parse_int(const std::string& key, const std::string& text) {
  int64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("type mismatch for " + key + ": expected an integer, got '" + text + "'");
  return v;
}

std::vector<int64_t> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <size_t N>
std::string join(const std::array<int64_t, N>& values) {
  std::string s;
  for (auto v : values) {
    if (!s.empty()) s += ',';
    s += std::to_string(v);
  }
  return s;
}

struct Binding {
  ConfigKey key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    auto add = [&b](std::string key, std::string help, auto set, auto get) {
      b.push_back({{std::move(key), std::move(help)}, set, get});
    };
    add("seed", "seed for initialisation, sampling and corruption",
        [](TrainConfig& c, const std::string& v) { c.seed = static_cast<uint64_t>(parse_int("seed", v)); },
        [](const TrainConfig& c) { return std::to_string(c.seed); });
    add("model.version", "v1|v2|v3|v4|v2-brain|v2-rec-brain",
        [](TrainConfig& c, const std::string& v) { c.model.version = parse_version(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.model.version)); });
    add("model.shared", "tied stage indices, e.g. 5 or 4+5+6 or none",
        [](TrainConfig& c, const std::string& v) { c.model.shared = StageIndexSet::parse(v); },
        [](const TrainConfig& c) { return c.model.shared.to_string(); });
    add("model.theta", "v4 fusion weight in [0,1] or 'learnable'",
        [](TrainConfig& c, const std::string& v) { c.model.theta = Theta::parse(v); },
        [](const TrainConfig& c) { return c.model.theta.present() ? c.model.theta.to_string() : std::string("none"); });
    add("model.widths", "five channel widths, e.g. 16,32,64,128,256",
        [](TrainConfig& c, const std::string& v) {
          const auto w = parse_int_list("model.widths", v);
          if (w.size() != 5) throw ConfigError("model.widths expects 5 values");
          std::copy(w.begin(), w.end(), c.model.widths.begin());
        },
        [](const TrainConfig& c) { return join(c.model.widths); });
    add("model.patch", "training/inference patch W,H,D (or one edge)",
        [](TrainConfig& c, const std::string& v) {
          const auto p = parse_int_list("model.patch", v);
          if (p.size() == 1) {
            c.model.in_patch = {p[0], p[0], p[0]};
          } else if (p.size() == 3) {
            c.model.in_patch = {p[0], p[1], p[2]};
          } else {
            throw ConfigError("model.patch expects 1 or 3 values");
          }
        },
        [](const TrainConfig& c) { return join(c.model.in_patch); });
    add("baseline.kind", "none|unimodal_ct|unimodal_pet|early_fusion|middle_fusion|late_fusion_base",
        [](TrainConfig& c, const std::string& v) {
          if (v.empty() || v == "none") {
            c.baseline.reset();
          } else {
            c.baseline = parse_baseline_kind(v);
          }
        },
        [](const TrainConfig& c) { return c.baseline ? std::string(to_string(*c.baseline)) : std::string("none"); });
    add("loss.lambda_rec", "reconstruction weight",
        [](TrainConfig& c, const std::string& v) { c.weights.lambda_rec = parse_double("loss.lambda_rec", v); },
        [](const TrainConfig& c) { return fmt_double(c.weights.lambda_rec); });
    add("loss.lambda_seg", "segmentation weight",
        [](TrainConfig& c, const std::string& v) { c.weights.lambda_seg = parse_double("loss.lambda_seg", v); },
        [](const TrainConfig& c) { return fmt_double(c.weights.lambda_seg); });
    add("loss.lambda_class", "classification weight",
        [](TrainConfig& c, const std::string& v) { c.weights.lambda_class = parse_double("loss.lambda_class", v); },
        [](const TrainConfig& c) { return fmt_double(c.weights.lambda_class); });
    add("train.lr", "Adam learning rate",
        [](TrainConfig& c, const std::string& v) { c.lr = parse_double("train.lr", v); },
        [](const TrainConfig& c) { return fmt_double(c.lr); });
    add("train.weight_decay", "L2 weight decay on convolution weights",
        [](TrainConfig& c, const std::string& v) { c.weight_decay = parse_double("train.weight_decay", v); },
        [](const TrainConfig& c) { return fmt_double(c.weight_decay); });
    add("train.batch_size", "patches per step",
        [](TrainConfig& c, const std::string& v) { c.batch_size = parse_int("train.batch_size", v); },
        [](const TrainConfig& c) { return std::to_string(c.batch_size); });
    add("train.epochs", "passes over the training set",
        [](TrainConfig& c, const std::string& v) { c.epochs = parse_int("train.epochs", v); },
        [](const TrainConfig& c) { return std::to_string(c.epochs); });
    add("train.max_steps", "stop after this many steps (0 = no limit)",
        [](TrainConfig& c, const std::string& v) { c.max_steps = parse_int("train.max_steps", v); },
        [](const TrainConfig& c) { return std::to_string(c.max_steps); });
    add("train.corruption", "none|noise|shuffle, applied to the branch-A input",
        [](TrainConfig& c, const std::string& v) { c.corruption.kind = parse_corruption(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.corruption.kind)); });
    add("train.noise_sigma", "Gaussian corruption sigma",
        [](TrainConfig& c, const std::string& v) { c.corruption.sigma = parse_double("train.noise_sigma", v); },
        [](const TrainConfig& c) { return fmt_double(c.corruption.sigma); });
    add("train.shuffle_edge", "cube edge of patch shuffling",
        [](TrainConfig& c, const std::string& v) { c.corruption.shuffle_edge = parse_int("train.shuffle_edge", v); },
        [](const TrainConfig& c) { return std::to_string(c.corruption.shuffle_edge); });
    add("train.p_fg", "probability of a foreground-centred patch",
        [](TrainConfig& c, const std::string& v) { c.p_fg = parse_double("train.p_fg", v); },
        [](const TrainConfig& c) { return fmt_double(c.p_fg); });
    add("train.val_every", "validation cadence in epochs (0 keeps the final weights)",
        [](TrainConfig& c, const std::string& v) { c.val_every = parse_int("train.val_every", v); },
        [](const TrainConfig& c) { return std::to_string(c.val_every); });
    add("train.tying_check_every", "tying audit cadence in steps (0 = off)",
        [](TrainConfig& c, const std::string& v) { c.tying_check_every = parse_int("train.tying_check_every", v); },
        [](const TrainConfig& c) { return std::to_string(c.tying_check_every); });
    add("infer.overlap", "sliding-window overlap in [0,1)",
        [](TrainConfig& c, const std::string& v) { c.overlap = parse_double("infer.overlap", v); },
        [](const TrainConfig& c) { return fmt_double(c.overlap); });
    add("infer.tau", "binarisation threshold in (0,1)",
        [](TrainConfig& c, const std::string& v) { c.tau = parse_double("infer.tau", v); },
        [](const TrainConfig& c) { return fmt_double(c.tau); });
    add("infer.connectivity", "6|18|26 for FPV/FNV components",
        [](TrainConfig& c, const std::string& v) { c.connectivity = static_cast<int>(parse_int("infer.connectivity", v)); },
        [](const TrainConfig& c) { return std::to_string(c.connectivity); });
    add("infer.late_fusion", "logit_sum|union|intersection (late_fusion_base only)",
        [](TrainConfig& c, const std::string& v) { c.late_fusion = parse_late_fusion(v); },
        [](const TrainConfig& c) { return std::string(to_string(c.late_fusion)); });
    add("data.train", "training manifest (JSON)",
        [](TrainConfig& c, const std::string& v) { c.train_manifest = v; },
        [](const TrainConfig& c) { return c.train_manifest; });
    add("data.val", "validation manifest (JSON)",
        [](TrainConfig& c, const std::string& v) { c.val_manifest = v; },
        [](const TrainConfig& c) { return c.val_manifest; });
    add("data.test", "test manifest (JSON)",
        [](TrainConfig& c, const std::string& v) { c.test_manifest = v; },
        [](const TrainConfig& c) { return c.test_manifest; });
    add("output.dir", "run directory (relative paths resolve against MIRROR_OUTPUT_ROOT)",
        [](TrainConfig& c, const std::string& v) { c.output_dir = v; },
        [](const TrainConfig& c) { return c.output_dir; });
    return b;
  }();
  return table;
}

const Binding& find_binding(const std::string& key) {
  for (const auto& b : bindings()) {
    if (b.key.key == key) return b;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (baseline) {
    for (auto w : model.widths) {
      if (w < 1) throw ConfigError("stage widths must be positive");
    }
    for (auto n : model.in_patch) {
      if (n < 16 || n % 16 != 0) throw ConfigError("patch not divisible by 16: " + to_string(model.in_patch));
    }
    if (corruption.kind != Corruption::none) throw ConfigError("corruption applies to Mirror U-Net versions only");
  } else {
    model.validate();
    if (corruption.kind != Corruption::none &&
        (model.version == Version::v4 || model.version == Version::v2_brain)) {
      throw ConfigError("corruption applies only to versions with a reconstruction task");
    }
  }
  weights.validate();
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  if (val_every < 0 || tying_check_every < 0) throw ConfigError("cadences must be >= 0");
  if (!(p_fg >= 0.0 && p_fg <= 1.0)) throw ConfigError("train.p_fg must lie in [0, 1]");
  if (corruption.sigma < 0.0) throw ConfigError("train.noise_sigma must be >= 0");
  if (corruption.kind == Corruption::shuffle) {
    for (auto n : model.in_patch) {
      if (corruption.shuffle_edge < 1 || n % corruption.shuffle_edge != 0) {
        throw ConfigError("train.shuffle_edge must divide the patch");
      }
    }
  }
  window().validate();
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("infer.tau must lie in (0, 1)");
  if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
    throw ConfigError("infer.connectivity must be 6, 18 or 26");
  }
}

std::string TrainConfig::model_name() const {
  return baseline ? std::string(to_string(*baseline)) : std::string(to_string(model.version));
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& b : bindings()) k.push_back(b.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  find_binding(key).set(cfg, unquote(value));
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) { return find_binding(key).get(cfg); }

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    // Strip comments that are not inside quotes.
    bool quoted = false;
    for (size_t n = 0; n < line.size(); ++n) {
      if (line[n] == '"') quoted = !quoted;
      if (line[n] == '#' && !quoted) {
        line.resize(n);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = unquote(line.substr(eq + 1));
  }
  return out;
}

void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set_config_value(cfg, k, v);
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  TrainConfig cfg;
  apply_config(cfg, parse_config_text(ss.str()));
  return cfg;
}

std::string to_config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& b : bindings()) {
    const auto dot = b.key.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : b.key.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? b.key.key : b.key.key.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << name << " = \"" << b.get(cfg) << "\"\n";
  }
  return os.str();
}

TrainConfig desk_preset() {
  TrainConfig cfg;
  cfg.model.widths = {8, 16, 32, 64, 128};
  cfg.model.in_patch = {32, 32, 32};
  cfg.epochs = 30;
  cfg.val_every = 0;
  return cfg;
}

std::filesystem::path resolve_output_path(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("MIRROR_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / path;
  }
  return path;
}

}  // namespace mirror
