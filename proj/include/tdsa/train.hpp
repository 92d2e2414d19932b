#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdsa/config.hpp"
#include "tdsa/data.hpp"
#include "tdsa/model.hpp"

namespace tdsa {

struct TrainState {
  TrainConfig cfg;
  ModelParams model;
  std::vector<Parameter> params;
  long step = 0;
};

TrainState init_train_state(const TrainConfig& cfg);

// Which forward the optimizer drives: the two-pass model or the single-pass
// reference used for the baseline-equivalence check.
enum class ForwardKind { two_pass, baseline_reference };

struct StepStats {
  double l_recon = 0;
  double l_vq = 0;
  double l_total = 0;
};

// One optimizer step over a batch. Per-sample forward/backward fan out over
// threads; gradients are reduced in sample order, so the result is
// bit-identical for any thread count.
StepStats train_step(TrainState& st, ForwardKind kind = ForwardKind::two_pass);

struct LossRow {
  long step = 0;
  double l_recon = 0;
  double l_vq = 0;
  double perplexity = 0;  // NaN until a window completes or when VQ is off
};

struct EvalResult {
  double fg_ari = 0;
  double mbo_i = 0;
  double mbo_c = 0;
  double miou = 0;
};

struct EvalPair {
  EvalResult modulated;  // masks decoded from the modulated slots
  EvalResult pass1;      // masks decoded from the bottom-up slots
};

struct EvalOptions {
  bool last_block_masks = false;
  bool mbo_per_prediction = false;
};

struct SceneEvalRow {
  long scene = 0;
  EvalResult modulated, pass1;
};

EvalPair evaluate_model(ModelParams& model, const TrainConfig& cfg,
                        const std::vector<SceneSample>& scenes,
                        const EvalOptions& opts = {},
                        std::vector<SceneEvalRow>* per_scene = nullptr);

struct TrainRunResult {
  std::vector<LossRow> trace;
  std::optional<EvalPair> final_eval;
};

// Runs (total_steps - st.step) optimizer steps with per-step loss logging,
// periodic evaluation and checkpointing.
TrainRunResult run_training(TrainState& st, long total_steps, ForwardKind kind,
                            std::ostream* loss_csv, std::ostream* metrics_csv,
                            const std::string& checkpoint_dir,
                            bool final_eval = true);

void write_loss_csv_header(std::ostream& os);
void write_metrics_csv_header(std::ostream& os);

void save_checkpoint(const TrainState& st, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace tdsa
