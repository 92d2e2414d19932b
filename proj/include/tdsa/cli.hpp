#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tdsa/train.hpp"

namespace tdsa {

// Bad invocation / bad input file; maps to exit code 1. Everything else that
// throws maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  bool last_block_masks = false;
  bool mbo_per_prediction = false;
  long ablate_seeds = 3;
  long visualize_top_codes = 8;
};

// Resolves the output directory: explicit --out, else $TDSA_OUT_ROOT/<leaf>.
std::string resolve_out_dir(const std::string& explicit_out,
                            const std::string& leaf);

TrainConfig load_run_config(const std::string& config_path,
                            const CliOptions& opts);

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const CliOptions& opts = {});
int cmd_gen(const std::string& config_path, const std::string& out_dir,
            long train_count, long eval_count, const CliOptions& opts = {});
int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::string& out_dir, const CliOptions& opts = {});
int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const CliOptions& opts = {});
int cmd_select_codebook_size(const std::string& config_path,
                             const std::string& out_dir,
                             const CliOptions& opts = {});
int cmd_visualize(const std::string& checkpoint_path, long sample_id,
                  const std::string& out_dir, bool codebook_mode,
                  const CliOptions& opts = {});
int cmd_flops(const std::string& config_path, const CliOptions& opts = {});
int cmd_codebook(const std::string& checkpoint_path, const std::string& out_csv,
                 const CliOptions& opts = {});

struct CodebookSelection {
  long chosen_e = 0;
  bool plateau_found = false;
};

// Plateau rule over a (codebook size, perplexity) log of successive
// doublings: stop at the first pair where perplexity(2E) < 1.1 *
// perplexity(E); pick E when perplexity did not increase, else 2E. Without a
// plateau the last size is reported with plateau_found = false.
CodebookSelection select_codebook_size_from_log(
    const std::vector<std::pair<long, double>>& log);

// Flag combinations of the six ablation table rows.
struct AblationRowSpec {
  std::string name;
  bool use_m_c, use_vq, use_m_s, use_shift;
};
const std::vector<AblationRowSpec>& ablation_rows();

struct AblationResult {
  AblationRowSpec row;
  double fg_ari = 0, mbo_i = 0, miou = 0;  // seed means
};
std::vector<AblationResult> run_ablation(const TrainConfig& base,
                                         long n_seeds,
                                         const std::string& out_dir);

const char* version_string();
std::string code_version_hash();

}  // namespace tdsa
