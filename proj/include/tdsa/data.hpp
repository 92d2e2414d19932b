#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdsa/config.hpp"
#include "tdsa/rng.hpp"
#include "tdsa/tensor.hpp"

namespace tdsa {

struct SceneSpec {
  long grid_h = 16;
  long grid_w = 16;
  long d_feat = 32;
  long objects_min = 2;
  long objects_max = 4;
  long categories = 8;
  long appearance_modes = 2;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  long n() const { return grid_h * grid_w; }
};

SceneSpec scene_spec_from_config(const TrainConfig& cfg);

struct SceneSample {
  long h = 0, w = 0, d_feat = 0;
  long n_objects = 0;
  std::vector<double> features;   // N x d_feat
  std::vector<int> labels;        // N; 0 = background, 1..n_objects
  std::vector<long> categories;   // per object
  std::uint64_t sample_seed = 0;

  long n() const { return h * w; }
  // boolean mask per object (no background entry)
  std::vector<std::vector<bool>> object_masks() const;
  std::vector<bool> foreground() const;
};

// Pure function of (spec, split tag, index); train and eval streams use
// different tags and are disjoint by construction.
SceneSample generate_scene(const SceneSpec& spec, const std::string& split_tag,
                           std::uint64_t index);
std::vector<SceneSample> generate_split(const SceneSpec& spec,
                                        const std::string& split_tag,
                                        long count);

Tensor features_tensor(const SceneSample& s);

// binary sample format: header + little-endian float64 payload + label bytes
void write_scene(std::ostream& out, const SceneSample& s);
SceneSample read_scene(std::istream& in);

// dataset directory: spec.cfg snapshot, index.txt, one .scene file per sample
void write_dataset_dir(const std::string& dir, const SceneSpec& spec,
                       const std::string& split_tag, long count);
std::vector<SceneSample> load_dataset_dir(const std::string& dir);

// mean within-object feature variance, averaged over scenes (heterogeneity
// diagnostic).
double mean_within_object_variance(const SceneSpec& spec, long scenes);

}  // namespace tdsa
