#include "tdsa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tdsa {

namespace {

// category/mode embeddings are a pure function of the dataset seed, shared by
// every sample drawn from the same spec.
std::vector<double> unit_vector(std::uint64_t seed, long d) {
  Rng rng(seed);
  std::vector<double> v(d);
  double norm = 0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> mode_embedding(const SceneSpec& spec, long category,
                                   long mode) {
  return unit_vector(derive_seed(spec.seed, "mode-embedding",
                                 static_cast<std::uint64_t>(category),
                                 static_cast<std::uint64_t>(mode)),
                     spec.d_feat);
}

std::vector<double> background_embedding(const SceneSpec& spec) {
  return unit_vector(derive_seed(spec.seed, "background-embedding"), spec.d_feat);
}

struct Shape {
  bool ellipse;
  long y0, x0, hgt, wid;
  std::vector<long> cells;  // flat indices
};

Shape sample_shape(Rng& rng, long grid_h, long grid_w) {
  Shape s;
  s.ellipse = rng.uniform() < 0.5;
  const long max_h = std::max<long>(2, grid_h / 2);
  const long max_w = std::max<long>(2, grid_w / 2);
  s.hgt = rng.uniform_int(2, max_h);
  s.wid = rng.uniform_int(2, max_w);
  s.y0 = rng.uniform_int(0, grid_h - s.hgt);
  s.x0 = rng.uniform_int(0, grid_w - s.wid);
  const double cy = (s.hgt - 1) / 2.0, cx = (s.wid - 1) / 2.0;
  const double ry = s.hgt / 2.0, rx = s.wid / 2.0;
  for (long dy = 0; dy < s.hgt; ++dy)
    for (long dx = 0; dx < s.wid; ++dx) {
      if (s.ellipse) {
        const double ny = (dy - cy) / ry, nx = (dx - cx) / rx;
        if (ny * ny + nx * nx > 1.0) continue;
      }
      s.cells.push_back((s.y0 + dy) * grid_w + (s.x0 + dx));
    }
  return s;
}

}  // namespace

SceneSpec scene_spec_from_config(const TrainConfig& cfg) {
  SceneSpec s;
  s.grid_h = cfg.grid_h;
  s.grid_w = cfg.grid_w;
  s.d_feat = cfg.d_feat;
  s.objects_min = cfg.objects_min;
  s.objects_max = cfg.objects_max;
  s.categories = cfg.categories;
  s.appearance_modes = cfg.appearance_modes;
  s.noise_sigma = cfg.noise_sigma;
  s.seed = cfg.seed;
  return s;
}

std::vector<std::vector<bool>> SceneSample::object_masks() const {
  std::vector<std::vector<bool>> masks(n_objects,
                                       std::vector<bool>(labels.size(), false));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0) masks[labels[i] - 1][i] = true;
  return masks;
}

std::vector<bool> SceneSample::foreground() const {
  std::vector<bool> fg(labels.size(), false);
  for (std::size_t i = 0; i < labels.size(); ++i) fg[i] = labels[i] > 0;
  return fg;
}

SceneSample generate_scene(const SceneSpec& spec, const std::string& split_tag,
                           std::uint64_t index) {
  const std::uint64_t sample_seed = derive_seed(spec.seed, split_tag, index);
  Rng rng(sample_seed);
  SceneSample s;
  s.h = spec.grid_h;
  s.w = spec.grid_w;
  s.d_feat = spec.d_feat;
  s.sample_seed = sample_seed;
  s.labels.assign(s.n(), 0);
  s.n_objects = rng.uniform_int(spec.objects_min, spec.objects_max);

  long rejections = 0;
  for (long obj = 1; obj <= s.n_objects; ++obj) {
    for (;;) {
      Shape shape = sample_shape(rng, spec.grid_h, spec.grid_w);
      bool ok = shape.cells.size() >= 4;
      if (ok)
        for (long c : shape.cells)
          if (s.labels[c] != 0) {
            ok = false;
            break;
          }
      if (ok) {
        for (long c : shape.cells) s.labels[c] = static_cast<int>(obj);
        break;
      }
      if (++rejections >= 1000)
        throw std::runtime_error(
            "generate_scene: packing infeasible after 1000 rejected placements");
    }
    s.categories.push_back(rng.uniform_int(0, spec.categories - 1));
  }

  // Per object: one appearance mode, or a spatial mix of two distinct modes
  // when the spec asks for heterogeneity.
  std::vector<long> mode_a(s.n_objects), mode_b(s.n_objects);
  std::vector<int> split_axis(s.n_objects), split_at(s.n_objects);
  for (long i = 0; i < s.n_objects; ++i) {
    mode_a[i] = rng.uniform_int(0, spec.appearance_modes - 1);
    mode_b[i] = mode_a[i];
    if (spec.appearance_modes > 1) {
      mode_b[i] = rng.uniform_int(0, spec.appearance_modes - 2);
      if (mode_b[i] >= mode_a[i]) mode_b[i] += 1;
    }
    split_axis[i] = rng.uniform() < 0.5 ? 0 : 1;
    // bounding box of the object for the mode split
    long lo = spec.grid_h * spec.grid_w, hi = -1;
    for (long c = 0; c < s.n(); ++c)
      if (s.labels[c] == i + 1) {
        const long coord = split_axis[i] == 0 ? c / spec.grid_w : c % spec.grid_w;
        lo = std::min(lo, coord);
        hi = std::max(hi, coord);
      }
    split_at[i] = static_cast<int>((lo + hi) / 2);
  }

  const std::vector<double> bg = background_embedding(spec);
  std::vector<std::vector<double>> emb_a(s.n_objects), emb_b(s.n_objects);
  for (long i = 0; i < s.n_objects; ++i) {
    emb_a[i] = mode_embedding(spec, s.categories[i], mode_a[i]);
    emb_b[i] = mode_embedding(spec, s.categories[i], mode_b[i]);
  }

  s.features.resize(s.n() * spec.d_feat);
  for (long c = 0; c < s.n(); ++c) {
    const int lab = s.labels[c];
    const double* base;
    if (lab == 0) {
      base = bg.data();
    } else {
      const long i = lab - 1;
      const long coord = split_axis[i] == 0 ? c / spec.grid_w : c % spec.grid_w;
      base = coord <= split_at[i] ? emb_a[i].data() : emb_b[i].data();
    }
    for (long d = 0; d < spec.d_feat; ++d)
      s.features[c * spec.d_feat + d] = base[d] + spec.noise_sigma * rng.normal();
  }
  return s;
}

std::vector<SceneSample> generate_split(const SceneSpec& spec,
                                        const std::string& split_tag,
                                        long count) {
  std::vector<SceneSample> out(count);
  for (long i = 0; i < count; ++i)
    out[i] = generate_scene(spec, split_tag, static_cast<std::uint64_t>(i));
  return out;
}

Tensor features_tensor(const SceneSample& s) {
  return make_tensor({s.n(), s.d_feat}, s.features, false);
}

namespace {

constexpr char kSceneMagic[8] = {'T', 'D', 'S', 'A', 'S', 'C', 'N', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("read_scene: truncated file");
  return v;
}

}  // namespace

void write_scene(std::ostream& out, const SceneSample& s) {
  out.write(kSceneMagic, sizeof(kSceneMagic));
  write_pod<std::int64_t>(out, s.h);
  write_pod<std::int64_t>(out, s.w);
  write_pod<std::int64_t>(out, s.d_feat);
  write_pod<std::int64_t>(out, s.n_objects);
  write_pod<std::uint64_t>(out, s.sample_seed);
  out.write(reinterpret_cast<const char*>(s.features.data()),
            static_cast<std::streamsize>(s.features.size() * sizeof(double)));
  for (int l : s.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
  for (long c : s.categories) write_pod<std::int64_t>(out, c);
}

SceneSample read_scene(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSceneMagic, 8) != 0)
    throw std::runtime_error("read_scene: bad magic");
  SceneSample s;
  s.h = read_pod<std::int64_t>(in);
  s.w = read_pod<std::int64_t>(in);
  s.d_feat = read_pod<std::int64_t>(in);
  s.n_objects = read_pod<std::int64_t>(in);
  s.sample_seed = read_pod<std::uint64_t>(in);
  s.features.resize(s.n() * s.d_feat);
  in.read(reinterpret_cast<char*>(s.features.data()),
          static_cast<std::streamsize>(s.features.size() * sizeof(double)));
  s.labels.resize(s.n());
  for (long i = 0; i < s.n(); ++i) {
    unsigned char b;
    in.read(reinterpret_cast<char*>(&b), 1);
    s.labels[i] = b;
  }
  s.categories.resize(s.n_objects);
  for (long i = 0; i < s.n_objects; ++i) s.categories[i] = read_pod<std::int64_t>(in);
  if (!in) throw std::runtime_error("read_scene: truncated file");
  return s;
}

void write_dataset_dir(const std::string& dir, const SceneSpec& spec,
                       const std::string& split_tag, long count) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ostringstream spec_text;
  spec_text << "grid_h = " << spec.grid_h << "\n"
            << "grid_w = " << spec.grid_w << "\n"
            << "d_feat = " << spec.d_feat << "\n"
            << "objects_min = " << spec.objects_min << "\n"
            << "objects_max = " << spec.objects_max << "\n"
            << "categories = " << spec.categories << "\n"
            << "appearance_modes = " << spec.appearance_modes << "\n"
            << "noise_sigma = " << spec.noise_sigma << "\n"
            << "seed = " << spec.seed << "\n"
            << "split = " << split_tag << "\n";
  std::ofstream(fs::path(dir) / "spec.txt") << spec_text.str();
  std::ofstream index(fs::path(dir) / "index.txt");
  for (long i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "sample_" << i << ".scene";
    const SceneSample s = generate_scene(spec, split_tag, i);
    std::ofstream out(fs::path(dir) / name.str(), std::ios::binary);
    write_scene(out, s);
    index << name.str() << "\n";
  }
}

std::vector<SceneSample> load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream index(fs::path(dir) / "index.txt");
  if (!index)
    throw std::runtime_error("load_dataset_dir: missing index.txt in " + dir);
  std::vector<SceneSample> out;
  std::string name;
  while (std::getline(index, name)) {
    if (name.empty()) continue;
    std::ifstream in(fs::path(dir) / name, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset_dir: missing sample " + name);
    out.push_back(read_scene(in));
  }
  return out;
}

double mean_within_object_variance(const SceneSpec& spec, long scenes) {
  double total = 0;
  long objects = 0;
  for (long i = 0; i < scenes; ++i) {
    const SceneSample s = generate_scene(spec, "hetero-probe", i);
    for (long obj = 1; obj <= s.n_objects; ++obj) {
      std::vector<long> cells;
      for (long c = 0; c < s.n(); ++c)
        if (s.labels[c] == obj) cells.push_back(c);
      if (cells.empty()) continue;
      double var = 0;
      for (long d = 0; d < s.d_feat; ++d) {
        double mean = 0;
        for (long c : cells) mean += s.features[c * s.d_feat + d];
        mean /= static_cast<double>(cells.size());
        double v = 0;
        for (long c : cells) {
          const double diff = s.features[c * s.d_feat + d] - mean;
          v += diff * diff;
        }
        var += v / static_cast<double>(cells.size());
      }
      total += var;
      ++objects;
    }
  }
  return objects ? total / static_cast<double>(objects) : 0.0;
}

}  // namespace tdsa
