#pragma once

#include <cstdint>
#include <string>

namespace tdsa {

// Full run configuration; serializes to and from plain key = value text.
// Unknown keys are rejected.
struct TrainConfig {
  long grid_h = 16;
  long grid_w = 16;
  long d_feat = 32;
  long d_model = 64;  // slot dim D = attention dim d_h
  long slots = 6;     // K
  long codebook_size = 64;  // E
  long iters = 3;     // T
  long batch = 16;
  long steps = 20000;
  double lr = 0.0004;
  std::uint64_t seed = 1;
  long eval_scenes = 512;
  long eval_every = 2000;
  long checkpoint_every = 5000;
  long log_window = 100;
  // toy scenes
  long objects_min = 2;
  long objects_max = 4;
  long categories = 8;
  long appearance_modes = 2;
  double noise_sigma = 0.1;
  // top-down pathway toggles
  bool use_m_c = true;
  bool use_vq = true;
  bool use_m_s = true;
  bool use_shift = true;
  // decoder
  long decoder_blocks = 4;
  long decoder_heads = 8;
  // codebook-size selection
  long select_min_e = 64;
  long select_max_e = 1024;
  long select_steps = 400;
  // execution
  long threads = 0;  // 0 = hardware default
  double grad_clip = 1.0;
  double vq_weight = 1.0;

  long n() const { return grid_h * grid_w; }
};

TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);
std::string config_to_text(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

// Throws on any inconsistent field combination, before any compute happens.
void validate_config(const TrainConfig& cfg);

}  // namespace tdsa
