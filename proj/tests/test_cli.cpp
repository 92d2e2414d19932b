#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdsa/cli.hpp"
#include "tdsa/image.hpp"

using namespace tdsa;
namespace fs = std::filesystem;

namespace {

std::string tiny_config_text() {
  return R"(grid_h = 6
grid_w = 6
d_feat = 8
d_model = 16
slots = 3
codebook_size = 8
iters = 2
batch = 4
steps = 30
lr = 0.001
seed = 11
eval_scenes = 8
eval_every = 1000000
checkpoint_every = 1000000
log_window = 10
objects_min = 1
objects_max = 2
categories = 3
appearance_modes = 1
noise_sigma = 0.1
decoder_blocks = 2
decoder_heads = 2
select_min_e = 4
select_max_e = 16
select_steps = 10
)";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& leaf)
      : path(fs::temp_directory_path() / leaf) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string write_config(const TempDir& dir, const std::string& text) {
  const std::string p = (dir.path / "run.cfg").string();
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  std::ifstream in(p);
  long n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("the paper's perplexity log selects E = 512") {
  const std::vector<std::pair<long, double>> log = {
      {256, 176.9}, {512, 253.9}, {1024, 242.8}};
  const CodebookSelection sel = select_codebook_size_from_log(log);
  CHECK(sel.plateau_found);
  CHECK(sel.chosen_e == 512);
}

TEST_CASE("strictly growing perplexity reports no plateau") {
  const std::vector<std::pair<long, double>> log = {
      {64, 10.0}, {128, 20.0}, {256, 40.0}, {512, 80.0}};
  const CodebookSelection sel = select_codebook_size_from_log(log);
  CHECK(!sel.plateau_found);
  CHECK(sel.chosen_e == 512);
}

TEST_CASE("a plateau at the first doubling keeps the smallest size") {
  const std::vector<std::pair<long, double>> log = {{64, 10.0}, {128, 9.8}};
  const CodebookSelection sel = select_codebook_size_from_log(log);
  CHECK(sel.plateau_found);
  CHECK(sel.chosen_e == 64);
}

TEST_CASE("a shrinking-but-close second entry still picks the larger size "
          "when perplexity rose") {
  const std::vector<std::pair<long, double>> log = {{64, 10.0}, {128, 10.5}};
  const CodebookSelection sel = select_codebook_size_from_log(log);
  CHECK(sel.plateau_found);
  CHECK(sel.chosen_e == 128);
}

TEST_CASE("selection needs at least two completed sizes") {
  CHECK_THROWS_AS(select_codebook_size_from_log({{64, 10.0}}),
                  std::runtime_error);
}

TEST_CASE("the ablation table has the six documented rows") {
  const auto& rows = ablation_rows();
  REQUIRE(rows.size() == 6);
  CHECK(!rows[0].use_m_c);
  CHECK(!rows[0].use_vq);
  CHECK(!rows[0].use_m_s);
  CHECK(!rows[0].use_shift);
  CHECK(rows[5].use_m_c);
  CHECK(rows[5].use_vq);
  CHECK(rows[5].use_m_s);
  CHECK(rows[5].use_shift);
  // row 2: m_c + m_s + shift (no VQ); row 3: m_s + shift only
  CHECK((rows[1].use_m_c && !rows[1].use_vq && rows[1].use_m_s && rows[1].use_shift));
  CHECK((!rows[2].use_m_c && !rows[2].use_vq && rows[2].use_m_s && rows[2].use_shift));
  // row 4: m_c + vq + m_s (no shift); row 5: m_c + vq only
  CHECK((rows[3].use_m_c && rows[3].use_vq && rows[3].use_m_s && !rows[3].use_shift));
  CHECK((rows[4].use_m_c && rows[4].use_vq && !rows[4].use_m_s && !rows[4].use_shift));
}

TEST_CASE("a missing config file is a usage error naming the path") {
  TempDir dir("tdsa_cli_missing");
  CHECK_THROWS_WITH_AS(cmd_train("/no/such/config.cfg", dir.str()),
                       doctest::Contains("/no/such/config.cfg"), UsageError);
}

TEST_CASE("an unknown config key is a usage error naming the key") {
  TempDir dir("tdsa_cli_unknown");
  const std::string cfg =
      write_config(dir, tiny_config_text() + "mystery_knob = 5\n");
  CHECK_THROWS_WITH_AS(cmd_train(cfg, dir.str()),
                       doctest::Contains("mystery_knob"), UsageError);
}

TEST_CASE("cmd_train writes one loss row per step and is seed-reproducible") {
  TempDir dir("tdsa_cli_train");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string out1 = (dir.path / "a").string();
  const std::string out2 = (dir.path / "b").string();
  CHECK(cmd_train(cfg, out1) == 0);
  CHECK(cmd_train(cfg, out2) == 0);
  CHECK(count_lines(dir.path / "a" / "loss.csv") == 31);  // header + 30 rows
  CHECK(slurp(dir.path / "a" / "loss.csv") == slurp(dir.path / "b" / "loss.csv"));
  CHECK(slurp(dir.path / "a" / "checkpoints" / "final.ckpt") ==
        slurp(dir.path / "b" / "checkpoints" / "final.ckpt"));
  CHECK(fs::exists(dir.path / "a" / "manifest.json"));
}

TEST_CASE("cmd_eval reports modulated and pass-1 metrics, twice identically") {
  TempDir dir("tdsa_cli_eval");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string train_out = (dir.path / "train").string();
  REQUIRE(cmd_train(cfg, train_out) == 0);
  const std::string ckpt = train_out + "/checkpoints/final.ckpt";
  const std::string e1 = (dir.path / "eval1").string();
  const std::string e2 = (dir.path / "eval2").string();
  CHECK(cmd_eval(ckpt, "", e1) == 0);
  CHECK(cmd_eval(ckpt, "", e2) == 0);
  const std::string csv = slurp(fs::path(e1) / "eval.csv");
  CHECK(csv.find("modulated") != std::string::npos);
  CHECK(csv.find("pass1") != std::string::npos);
  CHECK(csv == slurp(fs::path(e2) / "eval.csv"));
  // per-sample rows: 8 eval scenes x 2 scopes + header
  CHECK(count_lines(fs::path(e1) / "eval_samples.csv") == 17);
  CHECK(slurp(fs::path(e1) / "eval_samples.csv") ==
        slurp(fs::path(e2) / "eval_samples.csv"));
}

TEST_CASE("cmd_eval rejects a dataset with mismatched dimensions") {
  TempDir dir("tdsa_cli_eval_dims");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string train_out = (dir.path / "train").string();
  REQUIRE(cmd_train(cfg, train_out) == 0);

  SceneSpec other;
  other.grid_h = 8;
  other.grid_w = 8;
  other.d_feat = 8;
  other.objects_min = 1;
  other.objects_max = 2;
  other.categories = 3;
  other.appearance_modes = 1;
  other.seed = 1;
  const std::string ds = (dir.path / "dataset").string();
  write_dataset_dir(ds, other, "eval", 3);
  CHECK_THROWS_WITH_AS(
      cmd_eval(train_out + "/checkpoints/final.ckpt", ds, ""),
      doctest::Contains("dimensions"), UsageError);
}

TEST_CASE("cmd_gen writes loadable train and eval splits") {
  TempDir dir("tdsa_cli_gen");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string out = (dir.path / "ds").string();
  CHECK(cmd_gen(cfg, out, 4, 3) == 0);
  CHECK(load_dataset_dir(out + "/train").size() == 4);
  CHECK(load_dataset_dir(out + "/eval").size() == 3);
}

TEST_CASE("cmd_visualize emits 2K attention maps plus two mask images") {
  TempDir dir("tdsa_cli_viz");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string train_out = (dir.path / "train").string();
  REQUIRE(cmd_train(cfg, train_out) == 0);
  const std::string viz = (dir.path / "viz").string();
  CHECK(cmd_visualize(train_out + "/checkpoints/final.ckpt", 0, viz, false) ==
        0);
  long pgms = 0, ppms = 0;
  for (const auto& entry : fs::directory_iterator(viz)) {
    if (entry.path().extension() == ".pgm") ++pgms;
    if (entry.path().extension() == ".ppm") ++ppms;
  }
  CHECK(pgms == 2 * 3);  // two passes, K = 3 slots
  CHECK(ppms == 2);      // predicted + ground-truth masks
  CHECK(count_lines(fs::path(viz) / "labels.csv") == 37);  // header + N

  CHECK_THROWS_WITH_AS(
      cmd_visualize(train_out + "/checkpoints/final.ckpt", 9999, viz, false),
      doctest::Contains("out of range"), UsageError);
}

TEST_CASE("heatmap brightness is a monotone map of attention values") {
  TempDir dir("tdsa_cli_pgm");
  std::vector<double> values = {0.1, 0.9, 0.4, 0.2, 0.05, 0.9, 0.3, 0.7, 0.0};
  const std::string path = (dir.path / "m.pgm").string();
  write_pgm(path, 3, 3, values);
  const std::string bytes = slurp(path);
  const std::string header = "P5\n3 3\n255\n";
  REQUIRE(bytes.rfind(header, 0) == 0);
  const unsigned char* px =
      reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      if (values[i] < values[j]) CHECK(px[i] <= px[j]);
      if (values[i] == values[j]) CHECK(px[i] == px[j]);
    }
  // extremes hit the ends of the ramp
  CHECK(px[8] == 0);
  CHECK(px[1] == 255);
}

TEST_CASE("codebook visualization groups scenes under shared codes") {
  TempDir dir("tdsa_cli_codes");
  std::string text = tiny_config_text();
  // one category, tiny codebook: shared codes across scenes are guaranteed
  text.replace(text.find("categories = 3"), 14, "categories = 1");
  text.replace(text.find("codebook_size = 8"), 17, "codebook_size = 2");
  const std::string cfg = write_config(dir, text);
  const std::string train_out = (dir.path / "train").string();
  REQUIRE(cmd_train(cfg, train_out) == 0);
  const std::string viz = (dir.path / "cb").string();
  CHECK(cmd_visualize(train_out + "/checkpoints/final.ckpt", 0, viz, true) == 0);
  const std::string csv = slurp(fs::path(viz) / "code_groups.csv");
  // at least one code folder holds masks from two or more scenes
  bool grouped = false;
  for (long code = 0; code < 2 && !grouped; ++code) {
    const fs::path code_dir = fs::path(viz) / ("code_" + std::to_string(code));
    if (!fs::exists(code_dir)) continue;
    long masks = 0;
    for (const auto& e : fs::directory_iterator(code_dir)) (void)e, ++masks;
    grouped = masks >= 2;
  }
  CHECK(grouped);
  CHECK(csv.find("code_index") != std::string::npos);
}

TEST_CASE("cmd_codebook dumps usage and nearest-neighbor distances") {
  TempDir dir("tdsa_cli_cbdump");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string train_out = (dir.path / "train").string();
  REQUIRE(cmd_train(cfg, train_out) == 0);
  const std::string csv_path = (dir.path / "codes.csv").string();
  CHECK(cmd_codebook(train_out + "/checkpoints/final.ckpt", csv_path) == 0);
  CHECK(count_lines(csv_path) == 9);  // header + 8 codes
  const std::string csv = slurp(csv_path);
  CHECK(csv.find("nearest_other_code_dist") != std::string::npos);
}

TEST_CASE("cmd_flops runs and reports the overhead") {
  TempDir dir("tdsa_cli_flops");
  const std::string cfg = write_config(dir, tiny_config_text());
  CHECK(cmd_flops(cfg) == 0);
}

TEST_CASE("select-codebook-size terminates on toy data within the budget") {
  TempDir dir("tdsa_cli_select");
  const std::string cfg = write_config(dir, tiny_config_text());
  const std::string out = (dir.path / "sel").string();
  CHECK(cmd_select_codebook_size(cfg, out) == 0);
  CHECK(fs::exists(fs::path(out) / "codebook_size.csv"));
  CHECK(fs::exists(fs::path(out) / "selection.txt"));
  CHECK(count_lines(fs::path(out) / "codebook_size.csv") >= 3);  // >= 2 sizes
}

#ifdef TDSA_BIN_PATH
TEST_CASE("the binary maps usage errors to exit code 1") {
  const std::string bin = TDSA_BIN_PATH;
  const int rc =
      std::system((bin + " train --config /no/such/file.cfg --out /tmp/x "
                         ">/dev/null 2>&1")
                      .c_str());
  CHECK(WEXITSTATUS(rc) == 1);
  const int rc2 = std::system((bin + " --version >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc2) == 0);
}
#endif
