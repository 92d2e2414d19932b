#include "tdsa/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tdsa/image.hpp"
#include "tdsa/kernels.hpp"
#include "tdsa/metrics.hpp"

namespace fs = std::filesystem;

namespace tdsa {

namespace {

constexpr const char* kVersion = "tdsa 0.1.0";

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const TrainConfig& cfg, const std::string& started,
                    const std::vector<std::string>& artifacts) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["code_hash"] = code_version_hash();
  j["seed"] = cfg.seed;
  j["config"] = config_to_text(cfg);
  j["config_hash"] = config_hash(cfg);
  j["started_at"] = started;
  j["finished_at"] = now_iso8601();
  j["artifacts"] = artifacts;
  std::ofstream(fs::path(out_dir) / "manifest.json") << j.dump(2) << "\n";
}

void require_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw UsageError("cannot create output directory " + out_dir + ": " +
                     ec.message());
}

TrainState load_checkpoint_or_usage_error(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

// end-of-training code usage: quantize the bottom-up slots of eval scenes
std::vector<long> probe_code_usage(TrainState& st, long scenes) {
  const SceneSpec spec = scene_spec_from_config(st.cfg);
  std::vector<long> usage(st.cfg.codebook_size, 0);
  for (long i = 0; i < scenes; ++i) {
    const SceneSample scene = generate_scene(spec, "eval", i);
    Graph g(/*record=*/false);
    Tensor x = features_tensor(scene);
    ForwardResult fr = forward_full(
        g, st.model, x, st.cfg, derive_seed(st.cfg.seed, "eval-slots", i));
    for (long idx : fr.quant.indices) usage[idx] += 1;
  }
  return usage;
}

void print_eval(std::ostream& os, const char* scope, const EvalResult& r) {
  os.precision(6);
  os << std::left << std::setw(10) << scope << " fg_ari " << std::setw(10)
     << r.fg_ari << " mbo_i " << std::setw(10) << r.mbo_i << " mbo_c "
     << std::setw(10) << r.mbo_c << " miou " << std::setw(10) << r.miou
     << "\n";
}

}  // namespace

const char* version_string() { return kVersion; }

std::string code_version_hash() {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << tag_hash(kVersion);
  return os.str();
}

std::string resolve_out_dir(const std::string& explicit_out,
                            const std::string& leaf) {
  if (!explicit_out.empty()) return explicit_out;
  const char* root = std::getenv("TDSA_OUT_ROOT");
  if (root && *root) return (fs::path(root) / leaf).string();
  return (fs::path("runs") / leaf).string();
}

TrainConfig load_run_config(const std::string& config_path,
                            const CliOptions& opts) {
  if (!fs::exists(config_path))
    throw UsageError("config file not found: " + config_path);
  TrainConfig cfg;
  try {
    cfg = load_config_file(config_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.steps) cfg.steps = *opts.steps;
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const CliOptions& opts) {
  const TrainConfig cfg = load_run_config(config_path, opts);
  const std::string started = now_iso8601();
  require_out_dir(out_dir);
  std::ofstream(fs::path(out_dir) / "config.txt") << config_to_text(cfg);

  std::ofstream loss_csv(fs::path(out_dir) / "loss.csv");
  std::ofstream metrics_csv(fs::path(out_dir) / "metrics.csv");
  write_loss_csv_header(loss_csv);
  write_metrics_csv_header(metrics_csv);

  TrainState st = init_train_state(cfg);
  const std::string ckpt_dir = (fs::path(out_dir) / "checkpoints").string();
  TrainRunResult res = run_training(st, cfg.steps, ForwardKind::two_pass,
                                    &loss_csv, &metrics_csv, ckpt_dir);
  if (res.final_eval) {
    print_eval(std::cout, "modulated", res.final_eval->modulated);
    print_eval(std::cout, "pass1", res.final_eval->pass1);
  }
  write_manifest(out_dir, "train", cfg, started,
                 {"config.txt", "loss.csv", "metrics.csv",
                  "checkpoints/final.ckpt"});
  return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            long train_count, long eval_count, const CliOptions& opts) {
  const TrainConfig cfg = load_run_config(config_path, opts);
  const std::string started = now_iso8601();
  require_out_dir(out_dir);
  const SceneSpec spec = scene_spec_from_config(cfg);
  if (train_count > 0)
    write_dataset_dir((fs::path(out_dir) / "train").string(), spec, "train",
                      train_count);
  if (eval_count > 0)
    write_dataset_dir((fs::path(out_dir) / "eval").string(), spec, "eval",
                      eval_count);
  write_manifest(out_dir, "gen", cfg, started, {"train", "eval"});
  std::cout << "wrote " << train_count << " train and " << eval_count
            << " eval scenes under " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::string& out_dir, const CliOptions& opts) {
  TrainState st = load_checkpoint_or_usage_error(checkpoint_path);
  const std::string started = now_iso8601();
  std::vector<SceneSample> scenes;
  if (!dataset_dir.empty()) {
    scenes = load_dataset_dir(dataset_dir);
    for (const SceneSample& s : scenes)
      if (s.h != st.cfg.grid_h || s.w != st.cfg.grid_w ||
          s.d_feat != st.cfg.d_feat)
        throw UsageError(
            "dataset dimensions do not match checkpoint config (scene " +
            std::to_string(s.h) + "x" + std::to_string(s.w) + "x" +
            std::to_string(s.d_feat) + " vs config " +
            std::to_string(st.cfg.grid_h) + "x" + std::to_string(st.cfg.grid_w) +
            "x" + std::to_string(st.cfg.d_feat) + ")");
  } else {
    scenes = generate_split(scene_spec_from_config(st.cfg), "eval",
                            st.cfg.eval_scenes);
  }

  EvalOptions eopts;
  eopts.last_block_masks = opts.last_block_masks;
  eopts.mbo_per_prediction = opts.mbo_per_prediction;
  std::vector<SceneEvalRow> rows;
  const EvalPair ev = evaluate_model(st.model, st.cfg, scenes, eopts, &rows);

  print_eval(std::cout, "modulated", ev.modulated);
  print_eval(std::cout, "pass1", ev.pass1);

  if (!out_dir.empty()) {
    require_out_dir(out_dir);
    std::ofstream csv(fs::path(out_dir) / "eval.csv");
    write_metrics_csv_header(csv);
    csv.precision(10);
    csv << st.step << ",modulated," << ev.modulated.fg_ari << ','
        << ev.modulated.mbo_i << ',' << ev.modulated.mbo_c << ','
        << ev.modulated.miou << '\n';
    csv << st.step << ",pass1," << ev.pass1.fg_ari << ',' << ev.pass1.mbo_i
        << ',' << ev.pass1.mbo_c << ',' << ev.pass1.miou << '\n';
    std::ofstream per_sample(fs::path(out_dir) / "eval_samples.csv");
    per_sample << "sample,scope,fg_ari,mbo_i,mbo_c,miou\n";
    per_sample.precision(10);
    for (const SceneEvalRow& r : rows) {
      per_sample << r.scene << ",modulated," << r.modulated.fg_ari << ','
                 << r.modulated.mbo_i << ',' << r.modulated.mbo_c << ','
                 << r.modulated.miou << '\n';
      per_sample << r.scene << ",pass1," << r.pass1.fg_ari << ','
                 << r.pass1.mbo_i << ',' << r.pass1.mbo_c << ','
                 << r.pass1.miou << '\n';
    }
    write_manifest(out_dir, "eval", st.cfg, started,
                   {"eval.csv", "eval_samples.csv"});
  }
  return 0;
}

const std::vector<AblationRowSpec>& ablation_rows() {
  static const std::vector<AblationRowSpec> rows = {
      {"baseline", false, false, false, false},
      {"m_c+m_s+shift", true, false, true, true},
      {"m_s+shift", false, false, true, true},
      {"m_c+vq+m_s", true, true, true, false},
      {"m_c+vq", true, true, false, false},
      {"full", true, true, true, true},
  };
  return rows;
}

std::vector<AblationResult> run_ablation(const TrainConfig& base, long n_seeds,
                                         const std::string& out_dir) {
  std::vector<AblationResult> results;
  for (const AblationRowSpec& row : ablation_rows()) {
    AblationResult res;
    res.row = row;
    for (long s = 0; s < n_seeds; ++s) {
      TrainConfig cfg = base;
      cfg.use_m_c = row.use_m_c;
      cfg.use_vq = row.use_vq;
      cfg.use_m_s = row.use_m_s;
      cfg.use_shift = row.use_shift;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      TrainState st = init_train_state(cfg);
      TrainRunResult run = run_training(st, cfg.steps, ForwardKind::two_pass,
                                        nullptr, nullptr, "");
      const EvalResult& m = run.final_eval->modulated;
      res.fg_ari += m.fg_ari / static_cast<double>(n_seeds);
      res.mbo_i += m.mbo_i / static_cast<double>(n_seeds);
      res.miou += m.miou / static_cast<double>(n_seeds);
      if (!out_dir.empty()) {
        std::ofstream log(fs::path(out_dir) / "ablate_progress.txt",
                          std::ios::app);
        log << row.name << " seed " << cfg.seed << " fg_ari " << m.fg_ari
            << " mbo_i " << m.mbo_i << " miou " << m.miou << "\n";
      }
    }
    results.push_back(res);
  }
  return results;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const CliOptions& opts) {
  const TrainConfig base = load_run_config(config_path, opts);
  const std::string started = now_iso8601();
  require_out_dir(out_dir);
  const auto results = run_ablation(base, opts.ablate_seeds, out_dir);

  std::ofstream csv(fs::path(out_dir) / "ablation.csv");
  csv << "combo,use_m_c,use_vq,use_m_s,use_shift,fg_ari,mbo_i,miou\n";
  csv.precision(10);
  std::ostringstream table;
  table << std::left << std::setw(16) << "combo" << std::setw(6) << "m_c"
        << std::setw(6) << "vq" << std::setw(6) << "m_s" << std::setw(7)
        << "shift" << std::right << std::setw(10) << "fg_ari" << std::setw(10)
        << "mbo_i" << std::setw(10) << "miou" << "\n";
  for (const AblationResult& r : results) {
    csv << r.row.name << ',' << r.row.use_m_c << ',' << r.row.use_vq << ','
        << r.row.use_m_s << ',' << r.row.use_shift << ',' << r.fg_ari << ','
        << r.mbo_i << ',' << r.miou << '\n';
    table << std::left << std::setw(16) << r.row.name << std::setw(6)
          << (r.row.use_m_c ? "x" : "") << std::setw(6)
          << (r.row.use_vq ? "x" : "") << std::setw(6)
          << (r.row.use_m_s ? "x" : "") << std::setw(7)
          << (r.row.use_shift ? "x" : "") << std::right << std::fixed
          << std::setprecision(4) << std::setw(10) << r.fg_ari << std::setw(10)
          << r.mbo_i << std::setw(10) << r.miou << "\n";
  }
  std::ofstream(fs::path(out_dir) / "ablation.txt") << table.str();
  std::cout << table.str();
  write_manifest(out_dir, "ablate", base, started,
                 {"ablation.csv", "ablation.txt"});
  return 0;
}

CodebookSelection select_codebook_size_from_log(
    const std::vector<std::pair<long, double>>& log) {
  if (log.size() < 2)
    throw std::runtime_error(
        "codebook selection needs at least two completed sizes");
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    const auto [e, p] = log[i];
    const auto [e2, p2] = log[i + 1];
    if (p2 < 1.1 * p) {
      CodebookSelection sel;
      sel.plateau_found = true;
      sel.chosen_e = p2 <= p ? e : e2;
      return sel;
    }
  }
  return CodebookSelection{log.back().first, false};
}

int cmd_select_codebook_size(const std::string& config_path,
                             const std::string& out_dir,
                             const CliOptions& opts) {
  const TrainConfig base = load_run_config(config_path, opts);
  const std::string started = now_iso8601();
  require_out_dir(out_dir);

  std::vector<std::pair<long, double>> log;
  const long probe_scenes = std::min<long>(base.eval_scenes, 128);
  for (long e = base.select_min_e; e <= base.select_max_e; e *= 2) {
    TrainConfig cfg = base;
    cfg.codebook_size = e;
    cfg.steps = base.select_steps;
    TrainState st = init_train_state(cfg);
    run_training(st, cfg.steps, ForwardKind::two_pass, nullptr, nullptr, "",
                 /*final_eval=*/false);
    const double perp = perplexity(probe_code_usage(st, probe_scenes));
    log.emplace_back(e, perp);
    std::cout << "E " << e << " perplexity " << perp << "\n";
    if (log.size() >= 2) {
      const auto& [pe, pp] = log[log.size() - 2];
      if (log.back().second < 1.1 * pp) break;  // plateau reached
    }
  }

  std::ofstream csv(fs::path(out_dir) / "codebook_size.csv");
  csv << "codebook_size,perplexity\n";
  csv.precision(10);
  for (const auto& [e, p] : log) csv << e << ',' << p << '\n';

  const CodebookSelection sel = select_codebook_size_from_log(log);
  std::ofstream report(fs::path(out_dir) / "selection.txt");
  if (sel.plateau_found) {
    report << "chosen_e " << sel.chosen_e << "\n";
    std::cout << "chosen codebook size: " << sel.chosen_e << "\n";
  } else {
    report << "no plateau up to " << log.back().first << "; last size "
           << sel.chosen_e << "\n";
    std::cout << "no perplexity plateau up to E=" << log.back().first << "\n";
  }
  write_manifest(out_dir, "select-codebook-size", base, started,
                 {"codebook_size.csv", "selection.txt"});
  return 0;
}

int cmd_visualize(const std::string& checkpoint_path, long sample_id,
                  const std::string& out_dir, bool codebook_mode,
                  const CliOptions& opts) {
  TrainState st = load_checkpoint_or_usage_error(checkpoint_path);
  const std::string started = now_iso8601();
  require_out_dir(out_dir);
  const TrainConfig& cfg = st.cfg;
  const SceneSpec spec = scene_spec_from_config(cfg);

  if (codebook_mode) {
    // group eval scenes by the code their slots quantize to; dump each
    // slot's soft mask under its code directory
    const long scenes = std::min<long>(cfg.eval_scenes, 128);
    std::map<long, std::vector<std::pair<long, long>>> groups;  // code -> (scene, slot)
    std::vector<long> usage(cfg.codebook_size, 0);
    for (long i = 0; i < scenes; ++i) {
      const SceneSample scene = generate_scene(spec, "eval", i);
      Graph g(false);
      ForwardResult fr = forward_full(g, st.model, features_tensor(scene), cfg,
                                      derive_seed(cfg.seed, "eval-slots", i));
      const MaskExtraction mx = extract_masks(fr.dec, opts.last_block_masks);
      for (long k = 0; k < cfg.slots; ++k) {
        const long code = fr.quant.indices[k];
        usage[code] += 1;
        if (static_cast<long>(groups[code].size()) < 16)
          groups[code].emplace_back(i, k);
      }
      if (i == 0) {
        // keep one mask dump around for orientation
        write_label_ppm((fs::path(out_dir) / "sample0_pred.ppm").string(),
                        cfg.grid_w, cfg.grid_h, mx.labels);
      }
    }
    std::vector<long> order(cfg.codebook_size);
    for (long e = 0; e < cfg.codebook_size; ++e) order[e] = e;
    std::stable_sort(order.begin(), order.end(),
                     [&](long a, long b) { return usage[a] > usage[b]; });
    std::ofstream csv(fs::path(out_dir) / "code_groups.csv");
    csv << "code_index,usage,scene,slot\n";
    const long top = std::min<long>(opts.visualize_top_codes,
                                    cfg.codebook_size);
    for (long rank = 0; rank < top; ++rank) {
      const long code = order[rank];
      if (usage[code] == 0) continue;
      const std::string code_dir =
          (fs::path(out_dir) / ("code_" + std::to_string(code))).string();
      fs::create_directories(code_dir);
      for (auto [scene_id, slot] : groups[code]) {
        csv << code << ',' << usage[code] << ',' << scene_id << ',' << slot
            << '\n';
        const SceneSample scene = generate_scene(spec, "eval", scene_id);
        Graph g(false);
        ForwardResult fr =
            forward_full(g, st.model, features_tensor(scene), cfg,
                         derive_seed(cfg.seed, "eval-slots", scene_id));
        const MaskExtraction mx = extract_masks(fr.dec, opts.last_block_masks);
        std::vector<double> mask(cfg.n());
        for (long n = 0; n < cfg.n(); ++n) mask[n] = mx.soft[slot * cfg.n() + n];
        write_pgm(code_dir + "/scene_" + std::to_string(scene_id) + "_slot_" +
                      std::to_string(slot) + ".pgm",
                  cfg.grid_w, cfg.grid_h, mask);
      }
    }
    write_manifest(out_dir, "visualize-codebook", cfg, started,
                   {"code_groups.csv"});
    return 0;
  }

  if (sample_id < 0 || sample_id >= cfg.eval_scenes)
    throw UsageError("sample_id " + std::to_string(sample_id) +
                     " out of range [0, " + std::to_string(cfg.eval_scenes) +
                     ")");
  const SceneSample scene = generate_scene(spec, "eval", sample_id);
  Graph g(false);
  ForwardResult fr =
      forward_full(g, st.model, features_tensor(scene), cfg,
                   derive_seed(cfg.seed, "eval-slots", sample_id));
  const MaskExtraction mx = extract_masks(fr.dec, opts.last_block_masks);

  std::vector<std::string> artifacts;
  for (long k = 0; k < cfg.slots; ++k) {
    std::vector<double> row1(cfg.n()), row2(cfg.n());
    for (long n = 0; n < cfg.n(); ++n) {
      row1[n] = fr.pass1.attn->v()[k * cfg.n() + n];
      row2[n] = fr.pass2.attn->v()[k * cfg.n() + n];
    }
    const std::string f1 = "attn_pass1_slot" + std::to_string(k) + ".pgm";
    const std::string f2 = "attn_pass2_slot" + std::to_string(k) + ".pgm";
    write_pgm((fs::path(out_dir) / f1).string(), cfg.grid_w, cfg.grid_h, row1);
    write_pgm((fs::path(out_dir) / f2).string(), cfg.grid_w, cfg.grid_h, row2);
    artifacts.push_back(f1);
    artifacts.push_back(f2);
  }
  write_label_ppm((fs::path(out_dir) / "pred_mask.ppm").string(), cfg.grid_w,
                  cfg.grid_h, mx.labels);
  write_label_ppm((fs::path(out_dir) / "gt_mask.ppm").string(), cfg.grid_w,
                  cfg.grid_h, scene.labels);
  std::ofstream labels_csv(fs::path(out_dir) / "labels.csv");
  labels_csv << "position,slot\n";
  for (long n = 0; n < cfg.n(); ++n)
    labels_csv << n << ',' << mx.labels[n] << '\n';
  artifacts.push_back("pred_mask.ppm");
  artifacts.push_back("gt_mask.ppm");
  artifacts.push_back("labels.csv");
  write_manifest(out_dir, "visualize", cfg, started, artifacts);
  return 0;
}

int cmd_flops(const std::string& config_path, const CliOptions& opts) {
  const TrainConfig cfg = load_run_config(config_path, opts);
  const FlopCounter analytic = count_flops(cfg);

  // runtime counter over one real forward
  FlopCounter runtime;
  Graph g(false);
  g.set_flop_counter(&runtime);
  ModelParams model = init_model(cfg);
  const SceneSample scene =
      generate_scene(scene_spec_from_config(cfg), "eval", 0);
  forward_full(g, model, features_tensor(scene), cfg,
               derive_seed(cfg.seed, "eval-slots", 0));

  std::cout << std::left << std::setw(26) << "component" << std::right
            << std::setw(16) << "analytic" << std::setw(16) << "runtime"
            << "\n";
  for (int s = 0; s < kNumStages; ++s) {
    const Stage stage = static_cast<Stage>(s);
    std::cout << std::left << std::setw(26) << stage_name(stage) << std::right
              << std::setw(16) << std::fixed << std::setprecision(0)
              << analytic.at(stage) << std::setw(16) << runtime.at(stage)
              << "\n";
  }
  std::cout << std::left << std::setw(26) << "total" << std::right
            << std::setw(16) << analytic.total() << std::setw(16)
            << runtime.total() << "\n";
  std::cout.precision(4);
  std::cout << "pass-2 overhead: "
            << 100.0 * pass2_overhead_fraction(analytic) << "% of total\n";
  return 0;
}

int cmd_codebook(const std::string& checkpoint_path, const std::string& out_csv,
                 const CliOptions& opts) {
  (void)opts;
  TrainState st = load_checkpoint_or_usage_error(checkpoint_path);
  const std::vector<long> usage =
      probe_code_usage(st, std::min<long>(st.cfg.eval_scenes, 256));
  const std::vector<double> nearest = nearest_other_code_dist(st.model.codebook);
  std::ofstream csv(out_csv);
  if (!csv) throw UsageError("cannot open output csv: " + out_csv);
  csv << "code_index,usage_count,nearest_other_code_dist\n";
  csv.precision(10);
  for (long e = 0; e < st.cfg.codebook_size; ++e)
    csv << e << ',' << usage[e] << ',' << nearest[e] << '\n';
  return 0;
}

}  // namespace tdsa
