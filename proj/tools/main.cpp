#include <iostream>

#include <CLI11.hpp>

#include "tdsa/cli.hpp"
#include "tdsa/kernels.hpp"

using namespace tdsa;

int main(int argc, char** argv) {
  CLI::App app{"top-down slot attention on procedural feature grids"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, dataset_dir, out_csv;
  long sample_id = 0, train_count = 1024, eval_count = 512, threads = 0;
  bool codebook_mode = false, serial = false;
  CliOptions opts;
  std::uint64_t seed_override = 0;
  long steps_override = 0;
  std::string mbo_mode = "per-gt";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--steps", steps_override, "override the step budget");
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    cmd->add_flag("--serial", serial, "run the serial reference kernels");
  };

  auto* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out_dir);
  add_common(train);

  auto* gen = app.add_subcommand("gen", "write a dataset directory");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_dir);
  gen->add_option("--train-count", train_count);
  gen->add_option("--eval-count", eval_count);
  add_common(gen);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_option("--dataset", dataset_dir);
  eval->add_option("--out", out_dir);
  eval->add_flag("--last-block-masks", opts.last_block_masks,
                 "use only the last decoder block for masks");
  eval->add_option("--mbo-mode", mbo_mode)
      ->check(CLI::IsMember({"per-gt", "per-pred"}));
  add_common(eval);

  auto* ablate = app.add_subcommand("ablate", "run the six-row ablation table");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--out", out_dir);
  ablate->add_option("--ablate-seeds", opts.ablate_seeds);
  add_common(ablate);

  auto* select = app.add_subcommand("select-codebook-size",
                                    "double E until perplexity plateaus");
  select->add_option("--config", config_path)->required();
  select->add_option("--out", out_dir);
  add_common(select);

  auto* viz = app.add_subcommand("visualize", "attention / mask image dumps");
  viz->add_option("--checkpoint", checkpoint_path)->required();
  viz->add_option("--sample", sample_id);
  viz->add_option("--out", out_dir);
  viz->add_flag("--codebook", codebook_mode, "group eval scenes by code");
  viz->add_option("--top-codes", opts.visualize_top_codes);
  viz->add_flag("--last-block-masks", opts.last_block_masks);
  add_common(viz);

  auto* flops = app.add_subcommand("flops", "per-component FLOP accounting");
  flops->add_option("--config", config_path)->required();
  add_common(flops);

  auto* codebook = app.add_subcommand("codebook", "codebook inspection CSV");
  codebook->add_option("--checkpoint", checkpoint_path)->required();
  codebook->add_option("--out-csv", out_csv)->required();
  add_common(codebook);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (serial) kernels::set_exec_mode(kernels::Exec::serial);
  if (threads > 0) kernels::set_max_threads(static_cast<int>(threads));
  if (seed_override != 0) opts.seed = seed_override;
  if (steps_override != 0) opts.steps = steps_override;
  opts.mbo_per_prediction = mbo_mode == "per-pred";

  try {
    if (train->parsed())
      return cmd_train(config_path, resolve_out_dir(out_dir, "train"), opts);
    if (gen->parsed())
      return cmd_gen(config_path, resolve_out_dir(out_dir, "dataset"),
                     train_count, eval_count, opts);
    if (eval->parsed())
      return cmd_eval(checkpoint_path, dataset_dir, out_dir, opts);
    if (ablate->parsed())
      return cmd_ablate(config_path, resolve_out_dir(out_dir, "ablate"), opts);
    if (select->parsed())
      return cmd_select_codebook_size(
          config_path, resolve_out_dir(out_dir, "select-codebook-size"), opts);
    if (viz->parsed())
      return cmd_visualize(checkpoint_path, sample_id,
                           resolve_out_dir(out_dir, "visualize"),
                           codebook_mode, opts);
    if (flops->parsed()) return cmd_flops(config_path, opts);
    if (codebook->parsed()) return cmd_codebook(checkpoint_path, out_csv, opts);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
