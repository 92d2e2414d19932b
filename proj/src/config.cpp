#include "tdsa/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tdsa/rng.hpp"

namespace tdsa {

namespace {

struct Field {
  std::string name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

long to_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    throw std::invalid_argument("config: bad integer '" + v + "' for key " + key);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    throw std::invalid_argument("config: bad number '" + v + "' for key " + key);
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for key " + key);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

#define LONG_FIELD(member)                                            \
  Field{#member,                                                      \
        [](const TrainConfig& c) { return std::to_string(c.member); }, \
        [](TrainConfig& c, const std::string& v) { c.member = to_long(v, #member); }}
#define DOUBLE_FIELD(member)                                       \
  Field{#member, [](const TrainConfig& c) { return fmt_double(c.member); }, \
        [](TrainConfig& c, const std::string& v) { c.member = to_double(v, #member); }}
#define BOOL_FIELD(member)                                                  \
  Field{#member,                                                            \
        [](const TrainConfig& c) { return c.member ? "true" : "false"; },   \
        [](TrainConfig& c, const std::string& v) { c.member = to_bool(v, #member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      LONG_FIELD(grid_h),
      LONG_FIELD(grid_w),
      LONG_FIELD(d_feat),
      LONG_FIELD(d_model),
      LONG_FIELD(slots),
      LONG_FIELD(codebook_size),
      LONG_FIELD(iters),
      LONG_FIELD(batch),
      LONG_FIELD(steps),
      DOUBLE_FIELD(lr),
      Field{"seed",
            [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, const std::string& v) {
              c.seed = static_cast<std::uint64_t>(std::stoull(v));
            }},
      LONG_FIELD(eval_scenes),
      LONG_FIELD(eval_every),
      LONG_FIELD(checkpoint_every),
      LONG_FIELD(log_window),
      LONG_FIELD(objects_min),
      LONG_FIELD(objects_max),
      LONG_FIELD(categories),
      LONG_FIELD(appearance_modes),
      DOUBLE_FIELD(noise_sigma),
      BOOL_FIELD(use_m_c),
      BOOL_FIELD(use_vq),
      BOOL_FIELD(use_m_s),
      BOOL_FIELD(use_shift),
      LONG_FIELD(decoder_blocks),
      LONG_FIELD(decoder_heads),
      LONG_FIELD(select_min_e),
      LONG_FIELD(select_max_e),
      LONG_FIELD(select_steps),
      LONG_FIELD(threads),
      DOUBLE_FIELD(grad_clip),
      DOUBLE_FIELD(vq_weight),
  };
  return f;
}

#undef LONG_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Field& f : fields()) {
      if (f.name == key) {
        f.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.name << " = " << f.get(cfg) << "\n";
  return os.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  return tag_hash(config_to_text(cfg));
}

void validate_config(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
  };
  require(cfg.grid_h > 0 && cfg.grid_w > 0, "grid dimensions must be positive");
  require(cfg.d_feat > 0 && cfg.d_model > 0, "model dims must be positive");
  require(cfg.slots >= 1, "slots must be >= 1");
  require(cfg.codebook_size >= 2, "codebook_size must be >= 2");
  require(cfg.iters >= 1, "iters must be >= 1");
  require(cfg.batch >= 1, "batch must be >= 1");
  require(cfg.steps >= 1, "steps must be >= 1");
  require(cfg.lr > 0, "lr must be positive");
  require(cfg.eval_scenes >= 1, "eval_scenes must be >= 1");
  require(cfg.eval_every >= 1 && cfg.checkpoint_every >= 1,
          "eval_every and checkpoint_every must be >= 1");
  require(cfg.log_window >= 1, "log_window must be >= 1");
  require(cfg.objects_min >= 0, "objects_min must be >= 0");
  require(cfg.objects_max >= cfg.objects_min,
          "objects_max must be >= objects_min");
  require(cfg.categories >= 1, "categories must be >= 1");
  require(cfg.appearance_modes >= 1, "appearance_modes must be >= 1");
  require(cfg.noise_sigma >= 0, "noise_sigma must be >= 0");
  require(cfg.decoder_blocks >= 1, "decoder_blocks must be >= 1");
  require(cfg.decoder_heads >= 1, "decoder_heads must be >= 1");
  require(cfg.d_feat % cfg.decoder_heads == 0,
          "d_feat must be divisible by decoder_heads");
  require(cfg.select_min_e >= 2 && cfg.select_max_e >= cfg.select_min_e,
          "codebook selection range is inconsistent");
  require(cfg.select_steps >= 1, "select_steps must be >= 1");
  require(cfg.threads >= 0, "threads must be >= 0");
  require(cfg.grad_clip > 0, "grad_clip must be positive");
  require(cfg.vq_weight >= 0, "vq_weight must be >= 0");
}

}  // namespace tdsa
