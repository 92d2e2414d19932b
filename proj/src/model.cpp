#include "tdsa/model.hpp"

#include <stdexcept>

namespace tdsa {

ModelParams init_model(const TrainConfig& cfg) {
  validate_config(cfg);
  Rng rng(derive_seed(cfg.seed, "model-init"));
  ModelParams m;
  m.sa = init_slot_attention(rng, cfg.d_feat, cfg.d_model);
  m.codebook = init_codebook(rng, cfg.codebook_size, cfg.d_model);
  m.mod_mlp = init_mlp(rng, cfg.d_model, cfg.d_model, cfg.d_model);
  m.dec = init_decoder(rng, cfg.d_feat, cfg.d_model, cfg.n(), cfg.decoder_blocks,
                       cfg.decoder_heads);
  return m;
}

namespace {

void add_linear(std::vector<std::pair<std::string, Tensor*>>& out,
                const std::string& name, LinearParams& p) {
  out.emplace_back(name + ".w", &p.w);
  out.emplace_back(name + ".b", &p.b);
}

void add_norm(std::vector<std::pair<std::string, Tensor*>>& out,
              const std::string& name, LayerNormParams& p) {
  out.emplace_back(name + ".gamma", &p.gamma);
  out.emplace_back(name + ".beta", &p.beta);
}

void add_mlp(std::vector<std::pair<std::string, Tensor*>>& out,
             const std::string& name, MlpParams& p) {
  add_linear(out, name + ".fc1", p.fc1);
  add_linear(out, name + ".fc2", p.fc2);
}

void add_gru(std::vector<std::pair<std::string, Tensor*>>& out,
             const std::string& name, GruWeights& w) {
  out.emplace_back(name + ".wi_r", &w.wi_r);
  out.emplace_back(name + ".wi_z", &w.wi_z);
  out.emplace_back(name + ".wi_n", &w.wi_n);
  out.emplace_back(name + ".wh_r", &w.wh_r);
  out.emplace_back(name + ".wh_z", &w.wh_z);
  out.emplace_back(name + ".wh_n", &w.wh_n);
  out.emplace_back(name + ".bi_r", &w.bi_r);
  out.emplace_back(name + ".bi_z", &w.bi_z);
  out.emplace_back(name + ".bi_n", &w.bi_n);
  out.emplace_back(name + ".bh_r", &w.bh_r);
  out.emplace_back(name + ".bh_z", &w.bh_z);
  out.emplace_back(name + ".bh_n", &w.bh_n);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& m) {
  std::vector<std::pair<std::string, Tensor*>> out;
  add_linear(out, "sa.adapter", m.sa.adapter);
  add_norm(out, "sa.input_norm", m.sa.input_norm);
  add_linear(out, "sa.q", m.sa.q);
  add_linear(out, "sa.k", m.sa.k);
  add_linear(out, "sa.v", m.sa.v);
  add_norm(out, "sa.slot_norm", m.sa.slot_norm);
  add_norm(out, "sa.pre_mlp_norm", m.sa.pre_mlp_norm);
  add_gru(out, "sa.gru", m.sa.gru);
  add_mlp(out, "sa.update_mlp", m.sa.update_mlp);
  out.emplace_back("sa.mu", &m.sa.mu);
  out.emplace_back("sa.log_sigma", &m.sa.log_sigma);
  out.emplace_back("codebook.codes", &m.codebook.codes);
  add_mlp(out, "pathway.mod_mlp", m.mod_mlp);
  for (std::size_t b = 0; b < m.dec.blocks.size(); ++b) {
    const std::string base = "dec.block" + std::to_string(b);
    DecoderBlockParams& blk = m.dec.blocks[b];
    add_norm(out, base + ".ln_self", blk.ln_self);
    add_norm(out, base + ".ln_cross", blk.ln_cross);
    add_norm(out, base + ".ln_ffn", blk.ln_ffn);
    add_linear(out, base + ".sq", blk.sq);
    add_linear(out, base + ".sk", blk.sk);
    add_linear(out, base + ".sv", blk.sv);
    add_linear(out, base + ".so", blk.so);
    add_linear(out, base + ".cq", blk.cq);
    add_linear(out, base + ".ck", blk.ck);
    add_linear(out, base + ".cv", blk.cv);
    add_linear(out, base + ".co", blk.co);
    add_mlp(out, base + ".ffn", blk.ffn);
  }
  add_linear(out, "dec.slot_proj", m.dec.slot_proj);
  out.emplace_back("dec.bos", &m.dec.bos);
  out.emplace_back("dec.pos", &m.dec.pos);
  add_norm(out, "dec.final_norm", m.dec.final_norm);
  add_linear(out, "dec.head", m.dec.head);
  return out;
}

ModelParams alias_model(const ModelParams& m) {
  ModelParams copy = m;  // shallow: shared TensorData handles
  for (auto& [name, t] : named_tensors(copy)) *t = alias_tensor(*t);
  return copy;
}

std::vector<Parameter> make_parameters(ModelParams& m) {
  std::vector<Parameter> out;
  for (auto& [name, t] : named_tensors(m)) out.push_back(make_parameter(name, *t));
  return out;
}

ForwardResult forward_full(Graph& g, ModelParams& m, const Tensor& x,
                           const TrainConfig& cfg, std::uint64_t noise_seed) {
  ForwardResult r;
  g.set_stage(Stage::adapter);
  Tensor h = encode_input(g, m.sa, x);

  g.set_stage(Stage::other);
  Rng noise(noise_seed);
  r.s0 = init_slots(g, m.sa, cfg.slots, noise);

  g.set_stage(Stage::pass1);
  r.pass1 = run_bottom_up(g, m.sa, h, r.s0, cfg.iters);

  g.set_stage(Stage::pathway);
  Tensor codes;
  if (cfg.use_vq) {
    r.quant = quantize(g, r.pass1.slots, m.codebook);
    codes = r.quant.ste_codes;
  } else {
    codes = r.pass1.slots;
  }
  if (cfg.use_m_c) {
    r.m_c = channel_modulation(g, m.mod_mlp, codes);
  } else {
    r.m_c = full_like_shape({cfg.slots, cfg.d_model}, 1.0);
  }
  if (cfg.use_m_s) {
    r.m_s = spatial_modulation(g, r.pass1.attn, cfg.use_shift);
  } else {
    r.m_s = full_like_shape({cfg.slots, cfg.n()}, 1.0);
  }
  r.mod_map = build_modulation_map(g, r.m_s, r.m_c);

  g.set_stage(Stage::pass2);
  r.pass2 = run_modulated(g, m.sa, h, r.s0, r.mod_map, cfg.iters);

  g.set_stage(Stage::decoder);
  r.dec = decode(g, m.dec, x, r.pass2.slots);

  g.set_stage(Stage::loss);
  r.l_recon = g.mse(r.dec.recon, x);
  if (cfg.use_vq) {
    r.l_vq = g.mse(g.stopgrad(r.pass1.slots), r.quant.vq_codes);
    r.l_total = g.add(r.l_recon, g.scale(r.l_vq, cfg.vq_weight));
  } else {
    r.l_total = r.l_recon;
  }
  g.set_stage(Stage::other);
  return r;
}

BaselineResult forward_baseline(Graph& g, ModelParams& m, const Tensor& x,
                                const TrainConfig& cfg,
                                std::uint64_t noise_seed) {
  BaselineResult r;
  g.set_stage(Stage::adapter);
  Tensor h = encode_input(g, m.sa, x);
  g.set_stage(Stage::other);
  Rng noise(noise_seed);
  r.s0 = init_slots(g, m.sa, cfg.slots, noise);
  g.set_stage(Stage::pass1);
  r.pass1 = run_bottom_up(g, m.sa, h, r.s0, cfg.iters);
  g.set_stage(Stage::decoder);
  r.dec = decode(g, m.dec, x, r.pass1.slots);
  g.set_stage(Stage::loss);
  r.l_recon = g.mse(r.dec.recon, x);
  g.set_stage(Stage::other);
  return r;
}

namespace {

double linear_cost(double rows, double in, double out) {
  return rows * in * out + rows * out;
}

double norm_cost(double rows, double cols) { return 8.0 * rows * cols; }

double mlp_cost(double rows, double in, double hidden, double out,
                double act_charge) {
  return linear_cost(rows, in, hidden) + act_charge * rows * hidden +
         linear_cost(rows, hidden, out);
}

// one slot-attention iteration; the update term costs K*N*D plain or
// 2*K*N*D modulated.
double iteration_cost(const TrainConfig& cfg, bool modulated) {
  const double K = cfg.slots, N = cfg.n(), D = cfg.d_model;
  double c = 0;
  c += norm_cost(K, D);              // slot norm
  c += linear_cost(K, D, D);         // q projection
  c += K * D * N;                    // logits
  c += K * N;                        // 1/sqrt(d) scale
  c += 4.0 * K * N;                  // softmax over slots
  c += K * N + K;                    // row sums + epsilon
  c += K * N;                        // row normalization
  c += (modulated ? 2.0 : 1.0) * K * N * D;  // update term
  c += K * (3.0 * D * D + 3.0 * D * D) + 12.0 * K * D;  // GRU cell
  c += norm_cost(K, D);              // pre-MLP norm
  c += mlp_cost(K, D, D, D, 1.0);    // update MLP (relu)
  c += K * D;                        // residual add
  return c;
}

double pass_cost(const TrainConfig& cfg, bool modulated) {
  const double N = cfg.n(), D = cfg.d_model;
  double c = 2.0 * linear_cost(N, D, D);  // k and v projections
  for (long t = 0; t < cfg.iters; ++t) c += iteration_cost(cfg, modulated);
  return c;
}

}  // namespace

FlopCounter count_flops(const TrainConfig& cfg) {
  const double K = cfg.slots, N = cfg.n(), D = cfg.d_model, Df = cfg.d_feat;
  const double H = cfg.decoder_heads, B = cfg.decoder_blocks;
  FlopCounter c;

  c.at(Stage::adapter) = linear_cost(N, Df, D) + norm_cost(N, D);
  // shared slot initialization: exp + scale + shift
  c.at(Stage::other) = 2.0 * D + K * D + K * D;
  c.at(Stage::pass1) = pass_cost(cfg, false);
  c.at(Stage::pass2) = pass_cost(cfg, true);

  double path = 0;
  if (cfg.use_vq) path += 2.0 * K * cfg.codebook_size * D;
  if (cfg.use_m_c) path += mlp_cost(K, D, D, D, 1.0);
  if (cfg.use_m_s && cfg.use_shift) path += (K * N + K) + K * N + K * N;
  path += K * N * D;  // outer product
  c.at(Stage::pathway) = path;

  const double dh = Df / H;
  double dec = linear_cost(K, D, Df);  // slot projection
  dec += N * Df;                       // positional add
  // self-attention: q/k/v/o projections + per-head logits, scale, mask add,
  // softmax, weighted values
  const double self_attn = 4.0 * linear_cost(N, Df, Df) +
                           H * (N * N * dh + N * N + N * N + 4.0 * N * N +
                                N * N * dh);
  const double cross_attn = 2.0 * linear_cost(N, Df, Df) +
                            2.0 * linear_cost(K, Df, Df) +
                            H * (N * K * dh + N * K + 4.0 * N * K +
                                 N * K * dh);
  const double ffn = mlp_cost(N, Df, 4.0 * Df, Df, 6.0);
  dec += B * (3.0 * norm_cost(N, Df) + self_attn + cross_attn + ffn +
              3.0 * N * Df);  // 3 residual adds
  dec += norm_cost(N, Df) + linear_cost(N, Df, Df);
  c.at(Stage::decoder) = dec;

  double loss = 2.0 * N * Df;  // reconstruction mse
  if (cfg.use_vq) loss += 2.0 * K * D + 1.0 + 1.0;  // vq mse + scale + add
  c.at(Stage::loss) = loss;
  return c;
}

double pass2_overhead_fraction(const FlopCounter& c) {
  const double total = c.total();
  return total > 0 ? c.at(Stage::pass2) / total : 0.0;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::adapter: return "encoder_substitute";
    case Stage::pass1: return "slot_attention_pass1";
    case Stage::pathway: return "top_down_pathway";
    case Stage::pass2: return "slot_attention_pass2";
    case Stage::decoder: return "decoder";
    case Stage::loss: return "loss";
    case Stage::other: return "shared";
  }
  return "?";
}

}  // namespace tdsa
