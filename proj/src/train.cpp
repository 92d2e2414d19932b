#include "tdsa/train.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tdsa/kernels.hpp"
#include "tdsa/metrics.hpp"

namespace tdsa {

TrainState init_train_state(const TrainConfig& cfg) {
  validate_config(cfg);
  if (cfg.threads > 0) kernels::set_max_threads(static_cast<int>(cfg.threads));
  TrainState st;
  st.cfg = cfg;
  st.model = init_model(cfg);
  st.params = make_parameters(st.model);
  return st;
}

namespace {

struct SampleResult {
  std::vector<std::vector<double>> grads;
  double l_recon = 0, l_vq = 0, l_total = 0;
  std::vector<long> indices;
};

SampleResult run_sample(TrainState& st, ForwardKind kind, long step, long b) {
  const TrainConfig& cfg = st.cfg;
  const SceneSpec spec = scene_spec_from_config(cfg);
  const SceneSample scene = generate_scene(
      spec, "train", static_cast<std::uint64_t>(step) * cfg.batch + b);
  const std::uint64_t noise_seed =
      derive_seed(cfg.seed, "train-slots", static_cast<std::uint64_t>(step),
                  static_cast<std::uint64_t>(b));
  Graph g;
  ModelParams local = alias_model(st.model);
  Tensor x = features_tensor(scene);
  SampleResult r;
  if (kind == ForwardKind::two_pass) {
    ForwardResult fr = forward_full(g, local, x, cfg, noise_seed);
    g.backward(fr.l_total);
    r.l_recon = fr.l_recon->v()[0];
    r.l_vq = fr.l_vq ? fr.l_vq->v()[0] : 0.0;
    r.l_total = fr.l_total->v()[0];
    r.indices = fr.quant.indices;
  } else {
    BaselineResult br = forward_baseline(g, local, x, cfg, noise_seed);
    g.backward(br.l_recon);
    r.l_recon = br.l_recon->v()[0];
    r.l_total = r.l_recon;
  }
  for (auto& [name, t] : named_tensors(local))
    r.grads.push_back(std::move((*t)->grad));
  return r;
}

}  // namespace

StepStats train_step(TrainState& st, ForwardKind kind) {
  const TrainConfig& cfg = st.cfg;
  const long batch = cfg.batch;
  std::vector<SampleResult> results(batch);

  if (kernels::exec_mode() == kernels::Exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long b = 0; b < batch; ++b) results[b] = run_sample(st, kind, st.step, b);
  } else {
    for (long b = 0; b < batch; ++b) results[b] = run_sample(st, kind, st.step, b);
  }

  // deterministic reduction: fixed sample order, then 1/B scaling
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t pi = 0; pi < st.params.size(); ++pi) {
    auto& grad = st.params[pi].t->grad;
    for (long b = 0; b < batch; ++b) {
      const auto& src = results[b].grads[pi];
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += src[j];
    }
    for (double& gv : grad) gv *= inv_b;
  }

  StepStats stats;
  for (long b = 0; b < batch; ++b) {
    stats.l_recon += results[b].l_recon * inv_b;
    stats.l_vq += results[b].l_vq * inv_b;
    stats.l_total += results[b].l_total * inv_b;
  }
  if (!std::isfinite(stats.l_recon))
    throw std::runtime_error("train_step: non-finite L_recon at step " +
                             std::to_string(st.step));
  if (!std::isfinite(stats.l_vq))
    throw std::runtime_error("train_step: non-finite L_VQ at step " +
                             std::to_string(st.step));

  clip_grad_norm(st.params, cfg.grad_clip);
  adam_step(st.params, cfg.lr);

  if (kind == ForwardKind::two_pass && cfg.use_vq)
    for (long b = 0; b < batch; ++b)
      record_usage(st.model.codebook, results[b].indices);

  st.step += 1;
  return stats;
}

namespace {

struct SceneMetrics {
  EvalResult modulated, pass1;
  bool has_foreground = false;
};

EvalResult metrics_for_masks(const SceneSample& scene, const MaskExtraction& mx,
                             const EvalOptions& opts) {
  EvalResult r;
  const auto gt_objects = scene.object_masks();
  const auto fg = scene.foreground();

  bool any_fg = false;
  for (bool f : fg) any_fg = any_fg || f;
  if (any_fg) {
    std::vector<int> pred(mx.labels.begin(), mx.labels.end());
    r.fg_ari = fg_ari(scene.labels, pred, fg);
  }

  std::vector<std::vector<bool>> pred_masks(
      mx.k_slots, std::vector<bool>(scene.n(), false));
  for (long i = 0; i < mx.n; ++i) pred_masks[mx.labels[i]][i] = true;

  std::vector<std::vector<bool>> gt_with_bg;
  std::vector<bool> bg(scene.n(), false);
  for (long i = 0; i < scene.n(); ++i) bg[i] = scene.labels[i] == 0;
  gt_with_bg.push_back(bg);
  for (const auto& m : gt_objects) gt_with_bg.push_back(m);

  r.miou = miou_hungarian(gt_with_bg, pred_masks);
  r.mbo_i = mbo(gt_objects, pred_masks, opts.mbo_per_prediction);
  r.mbo_c = mbo(merge_masks_by_category(gt_objects, scene.categories),
                pred_masks, opts.mbo_per_prediction);
  return r;
}

SceneMetrics eval_scene(ModelParams& model, const TrainConfig& cfg,
                        const SceneSample& scene, std::uint64_t scene_index,
                        const EvalOptions& opts) {
  Graph g(/*record=*/false);
  Tensor x = features_tensor(scene);
  const std::uint64_t noise_seed =
      derive_seed(cfg.seed, "eval-slots", scene_index);
  ForwardResult fr = forward_full(g, model, x, cfg, noise_seed);
  const MaskExtraction mod_masks =
      extract_masks(fr.dec, opts.last_block_masks);
  DecoderOutput dec1 = decode(g, model.dec, x, fr.pass1.slots);
  const MaskExtraction p1_masks = extract_masks(dec1, opts.last_block_masks);

  SceneMetrics sm;
  sm.modulated = metrics_for_masks(scene, mod_masks, opts);
  sm.pass1 = metrics_for_masks(scene, p1_masks, opts);
  const auto fg = scene.foreground();
  for (bool f : fg) sm.has_foreground = sm.has_foreground || f;
  return sm;
}

}  // namespace

EvalPair evaluate_model(ModelParams& model, const TrainConfig& cfg,
                        const std::vector<SceneSample>& scenes,
                        const EvalOptions& opts,
                        std::vector<SceneEvalRow>* rows) {
  const long count = static_cast<long>(scenes.size());
  std::vector<SceneMetrics> per_scene(count);
  if (kernels::exec_mode() == kernels::Exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < count; ++i)
      per_scene[i] = eval_scene(model, cfg, scenes[i],
                                static_cast<std::uint64_t>(i), opts);
  } else {
    for (long i = 0; i < count; ++i)
      per_scene[i] = eval_scene(model, cfg, scenes[i],
                                static_cast<std::uint64_t>(i), opts);
  }
  if (rows) {
    rows->clear();
    for (long i = 0; i < count; ++i)
      rows->push_back({i, per_scene[i].modulated, per_scene[i].pass1});
  }

  EvalPair agg;
  long fg_scenes = 0;
  for (const SceneMetrics& sm : per_scene) {
    if (sm.has_foreground) {
      agg.modulated.fg_ari += sm.modulated.fg_ari;
      agg.pass1.fg_ari += sm.pass1.fg_ari;
      ++fg_scenes;
    }
    agg.modulated.mbo_i += sm.modulated.mbo_i;
    agg.modulated.mbo_c += sm.modulated.mbo_c;
    agg.modulated.miou += sm.modulated.miou;
    agg.pass1.mbo_i += sm.pass1.mbo_i;
    agg.pass1.mbo_c += sm.pass1.mbo_c;
    agg.pass1.miou += sm.pass1.miou;
  }
  const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
  const double inv_fg = fg_scenes > 0 ? 1.0 / static_cast<double>(fg_scenes) : 0.0;
  agg.modulated.fg_ari *= inv_fg;
  agg.pass1.fg_ari *= inv_fg;
  agg.modulated.mbo_i *= inv;
  agg.modulated.mbo_c *= inv;
  agg.modulated.miou *= inv;
  agg.pass1.mbo_i *= inv;
  agg.pass1.mbo_c *= inv;
  agg.pass1.miou *= inv;
  return agg;
}

void write_loss_csv_header(std::ostream& os) {
  os << "step,l_recon,l_vq,perplexity\n";
}

void write_metrics_csv_header(std::ostream& os) {
  os << "step,scope,fg_ari,mbo_i,mbo_c,miou\n";
}

namespace {

void write_metrics_row(std::ostream& os, long step, const char* scope,
                       const EvalResult& r) {
  os.precision(10);
  os << step << ',' << scope << ',' << r.fg_ari << ',' << r.mbo_i << ','
     << r.mbo_c << ',' << r.miou << '\n';
}

}  // namespace

TrainRunResult run_training(TrainState& st, long total_steps, ForwardKind kind,
                            std::ostream* loss_csv, std::ostream* metrics_csv,
                            const std::string& checkpoint_dir,
                            bool final_eval) {
  const TrainConfig& cfg = st.cfg;
  TrainRunResult out;
  std::vector<SceneSample> eval_scenes;
  const bool track_vq = kind == ForwardKind::two_pass && cfg.use_vq;

  auto ensure_eval_scenes = [&] {
    if (eval_scenes.empty())
      eval_scenes =
          generate_split(scene_spec_from_config(cfg), "eval", cfg.eval_scenes);
  };

  while (st.step < total_steps) {
    const StepStats stats = train_step(st, kind);
    const long done = st.step;  // step counter after the update

    // perplexity is a per-window quantity; rows between window boundaries
    // carry NaN so an interrupted-and-resumed trace matches exactly
    double perp = std::numeric_limits<double>::quiet_NaN();
    if (track_vq && done % cfg.log_window == 0) {
      perp = perplexity(st.model.codebook.usage);
      reset_usage(st.model.codebook);
    }
    LossRow row{done, stats.l_recon, stats.l_vq, perp};
    out.trace.push_back(row);
    if (loss_csv) {
      loss_csv->precision(17);
      (*loss_csv) << row.step << ',' << row.l_recon << ',' << row.l_vq << ','
                  << row.perplexity << '\n';
    }

    if (metrics_csv && done % cfg.eval_every == 0 && done < total_steps) {
      ensure_eval_scenes();
      const EvalPair ev = evaluate_model(st.model, cfg, eval_scenes);
      write_metrics_row(*metrics_csv, done, "modulated", ev.modulated);
      write_metrics_row(*metrics_csv, done, "pass1", ev.pass1);
    }
    if (!checkpoint_dir.empty() && done % cfg.checkpoint_every == 0 &&
        done < total_steps) {
      std::filesystem::create_directories(checkpoint_dir);
      save_checkpoint(st, checkpoint_dir + "/step_" + std::to_string(done) +
                              ".ckpt");
    }
  }

  if (final_eval) {
    ensure_eval_scenes();
    out.final_eval = evaluate_model(st.model, cfg, eval_scenes);
    if (metrics_csv) {
      write_metrics_row(*metrics_csv, st.step, "modulated",
                        out.final_eval->modulated);
      write_metrics_row(*metrics_csv, st.step, "pass1", out.final_eval->pass1);
    }
  }
  if (!checkpoint_dir.empty()) {
    std::filesystem::create_directories(checkpoint_dir);
    save_checkpoint(st, checkpoint_dir + "/final.ckpt");
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint container: versioned binary header + parameter records,
// plus a human-readable sidecar manifest.

namespace {

constexpr char kCkptMagic[8] = {'T', 'D', 'S', 'A', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated payload");
  return v;
}

}  // namespace

void save_checkpoint(const TrainState& st, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  put<std::uint32_t>(out, 1);  // format version
  put<std::uint64_t>(out, config_hash(st.cfg));
  put<std::int64_t>(out, st.step);
  put<std::uint64_t>(out, st.cfg.seed);
  put_string(out, config_to_text(st.cfg));

  put<std::uint32_t>(out, static_cast<std::uint32_t>(st.params.size()));
  std::ostringstream manifest;
  manifest << "step " << st.step << "\n";
  for (const Parameter& p : st.params) {
    put_string(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.t->shape.size()));
    for (long d : p.t->shape) put<std::int64_t>(out, d);
    put_doubles(out, *p.t->val);
    put_doubles(out, p.adam_m);
    put_doubles(out, p.adam_v);
    put<std::int64_t>(out, p.step_count);
    manifest << p.name << " " << shape_str(p.t->shape) << " "
             << p.t->numel() << "\n";
  }
  put<std::uint64_t>(out, st.model.codebook.usage.size());
  for (long u : st.model.codebook.usage) put<std::int64_t>(out, u);

  std::ofstream(path + ".manifest.txt") << manifest.str();
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != 1)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  const auto saved_hash = get<std::uint64_t>(in);
  const auto step = get<std::int64_t>(in);
  get<std::uint64_t>(in);  // seed, restated by the config text
  const std::string cfg_text = get_string(in);

  TrainState st = init_train_state(parse_config_text(cfg_text));
  if (config_hash(st.cfg) != saved_hash)
    throw std::runtime_error("load_checkpoint: config hash mismatch");
  st.step = step;

  const auto n_params = get<std::uint32_t>(in);
  if (n_params != st.params.size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (Parameter& p : st.params) {
    const std::string name = get_string(in);
    if (name != p.name)
      throw std::runtime_error("load_checkpoint: parameter order mismatch at " +
                               name);
    const auto ndim = get<std::uint32_t>(in);
    std::vector<long> shape(ndim);
    for (auto& d : shape) d = get<std::int64_t>(in);
    if (shape != p.t->shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    *p.t->val = get_doubles(in);
    p.adam_m = get_doubles(in);
    p.adam_v = get_doubles(in);
    p.step_count = get<std::int64_t>(in);
  }
  const auto usage_n = get<std::uint64_t>(in);
  if (usage_n != st.model.codebook.usage.size())
    throw std::runtime_error("load_checkpoint: codebook usage size mismatch");
  for (auto& u : st.model.codebook.usage) u = get<std::int64_t>(in);
  return st;
}

}  // namespace tdsa
