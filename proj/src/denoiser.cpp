#include "flowplan/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "flowplan/ops.hpp"

namespace flowplan {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string blk(int i, const char* suffix) { return "blk" + std::to_string(i) + "." + suffix; }

// Sinusoidal features of the scalar time, frequencies doubling per pair.
Tensor time_features(double t, int freqs) {
  Tensor f(1, 2 * freqs, false);
  double w = kPi;
  for (int k = 0; k < freqs; ++k) {
    f.at(0, 2 * k) = std::sin(w * t);
    f.at(0, 2 * k + 1) = std::cos(w * t);
    w *= 2.0;
  }
  return f;
}

Tensor grid_features(const ObservationEncoding& obs) {
  Tensor f(1, obs.w * obs.h * obs.c, false);
  std::copy(obs.grid.begin(), obs.grid.end(), f.data());
  return f;
}

// One token per grid cell, projected from that cell's channel vector. The
// obs buffer is cell-major, so it reshapes directly to (w*h, c). Attention
// over these tokens is what lets the trunk propagate route information
// spatially; a single pooled observation vector cannot express that.
Tensor cell_tokens(Graph& g, const ParamStore& ps, const ObservationEncoding& obs) {
  Tensor raw(obs.w * obs.h, obs.c, false);
  std::copy(obs.grid.begin(), obs.grid.end(), raw.data());
  return add_bias(g, matmul(g, raw, ps.at("cell.w")), ps.at("cell.b"));
}

// Conditioning vector: summed grid/pose/instruction (and optional goal-hint,
// time) embeddings. This both seeds the first token and modulates each block.
Tensor cond_vector(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                   const ObservationEncoding& obs, double t) {
  require(static_cast<int>(obs.grid.size()) == cfg.grid_w * cfg.grid_h * cfg.grid_c &&
              obs.w == cfg.grid_w && obs.h == cfg.grid_h && obs.c == cfg.grid_c,
          "observation grid does not match the configured extent");
  require(obs.agent_token >= 0 && obs.agent_token < cfg.n_states, "agent token out of range");
  require(obs.instruction_id >= 0 && obs.instruction_id < cfg.n_instructions,
          "instruction id out of range");
  Tensor cond = add_bias(g, matmul(g, grid_features(obs), ps.at("obs.w")), ps.at("obs.b"));
  cond = add(g, cond, embedding(g, ps.at("emb.agent"), {obs.agent_token}));
  cond = add(g, cond, embedding(g, ps.at("emb.instr"), {obs.instruction_id}));
  if (cfg.oracle_goal && obs.oracle_goal_token >= 0) {
    require(obs.oracle_goal_token < cfg.n_goals, "goal hint token out of range");
    cond = add(g, cond, embedding(g, ps.at("emb.oracle"), {obs.oracle_goal_token}));
  }
  if (cfg.layout == TrunkLayout::Joint) {
    Tensor temb =
        add_bias(g, matmul(g, time_features(t, cfg.t_freqs), ps.at("temb.w")), ps.at("temb.b"));
    cond = add(g, cond, temb);
  }
  return cond;
}

Tensor attention(Graph& g, const ParamStore& ps, const ArchConfig& cfg, int block,
                 const Tensor& h) {
  const int dh = cfg.embed_dim / cfg.n_heads;
  Tensor q = add_bias(g, matmul(g, h, ps.at(blk(block, "attn.wq"))), ps.at(blk(block, "attn.bq")));
  Tensor k = add_bias(g, matmul(g, h, ps.at(blk(block, "attn.wk"))), ps.at(blk(block, "attn.bk")));
  Tensor v = add_bias(g, matmul(g, h, ps.at(blk(block, "attn.wv"))), ps.at(blk(block, "attn.bv")));
  std::vector<Tensor> heads;
  heads.reserve(cfg.n_heads);
  for (int hd = 0; hd < cfg.n_heads; ++hd) {
    Tensor qh = slice_cols(g, q, hd * dh, dh);
    Tensor kh = slice_cols(g, k, hd * dh, dh);
    Tensor vh = slice_cols(g, v, hd * dh, dh);
    Tensor scores = scale(g, matmul_nt(g, qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (cfg.causal()) scores = causal_mask(g, scores);
    heads.push_back(matmul(g, softmax_rows(g, scores), vh));
  }
  return add_bias(g, matmul(g, concat_cols(g, heads), ps.at(blk(block, "attn.wo"))),
                  ps.at(blk(block, "attn.bo")));
}

std::pair<Tensor, Tensor> modulation(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                                     const Tensor& cond, const std::string& name) {
  Tensor f = add_bias(g, matmul(g, cond, ps.at(name + ".w")), ps.at(name + ".b"));
  return {slice_cols(g, f, 0, cfg.embed_dim), slice_cols(g, f, cfg.embed_dim, cfg.embed_dim)};
}

// Pre-norm transformer stack over [cond-token | body] with per-block
// conditioning-driven scale/shift after each norm.
Tensor trunk_forward(Graph& g, const ParamStore& ps, const ArchConfig& cfg, const Tensor& cond,
                     const std::vector<Tensor>& body) {
  std::vector<Tensor> rows{cond};
  rows.insert(rows.end(), body.begin(), body.end());
  Tensor x = concat_rows(g, rows);
  require(x.rows() == cfg.n_tokens(), "token count does not match the layout");
  x = add(g, x, ps.at("pos"));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    auto [sc1, sh1] = modulation(g, ps, cfg, cond, blk(b, "film1"));
    Tensor h1 = film(g, layer_norm(g, x, ps.at(blk(b, "ln1.g")), ps.at(blk(b, "ln1.b"))), sc1, sh1);
    x = add(g, x, attention(g, ps, cfg, b, h1));
    auto [sc2, sh2] = modulation(g, ps, cfg, cond, blk(b, "film2"));
    Tensor h2 = film(g, layer_norm(g, x, ps.at(blk(b, "ln2.g")), ps.at(blk(b, "ln2.b"))), sc2, sh2);
    Tensor mid = gelu(g, add_bias(g, matmul(g, h2, ps.at(blk(b, "mlp.w1"))), ps.at(blk(b, "mlp.b1"))));
    x = add(g, x, add_bias(g, matmul(g, mid, ps.at(blk(b, "mlp.w2"))), ps.at(blk(b, "mlp.b2"))));
  }
  return layer_norm(g, x, ps.at("lnf.g"), ps.at("lnf.b"));
}

Tensor head(Graph& g, const ParamStore& ps, const Tensor& x, const char* name) {
  return add_bias(g, matmul(g, x, ps.at(std::string("head.") + name + ".w")),
                  ps.at(std::string("head.") + name + ".b"));
}

void check_tokens(const std::vector<int>& xs, int horizon, int vocab_with_placeholder,
                  const char* what) {
  require(static_cast<int>(xs.size()) == horizon,
          std::string(what) + ": sequence length differs from the horizon");
  for (int x : xs) {
    require(x >= 0 && x < vocab_with_placeholder, std::string(what) + ": token out of range");
  }
}

}  // namespace

void init_denoiser_params(ParamStore& ps, const ArchConfig& cfg, Rng& rng) {
  require(cfg.embed_dim % cfg.n_heads == 0, "embed_dim must be divisible by n_heads");
  require(cfg.horizon > 0 && cfg.n_blocks > 0 && cfg.t_freqs > 0, "bad architecture sizes");
  require(cfg.n_ctx >= 0 && (cfg.layout == TrunkLayout::Joint || cfg.n_ctx == 0),
          "memory tokens need the joint layout");
  const int e = cfg.embed_dim;
  auto weight = [&](const std::string& name, int rows, int cols) {
    ps.add(name, rows, cols);
    ps.init_uniform_fan_in(name, rng);
  };
  auto zeros = [&](const std::string& name, int rows, int cols) { ps.add(name, rows, cols); };
  auto ones = [&](const std::string& name, int cols) {
    Tensor& t = ps.add(name, 1, cols);
    std::fill(t.data(), t.data() + t.size(), 1.0);
  };

  weight("obs.w", cfg.grid_w * cfg.grid_h * cfg.grid_c, e);
  zeros("obs.b", 1, e);
  weight("cell.w", cfg.grid_c, e);
  zeros("cell.b", 1, e);
  weight("emb.agent", cfg.n_states, e);
  weight("emb.instr", cfg.n_instructions, e);
  if (cfg.oracle_goal) weight("emb.oracle", cfg.n_goals, e);
  if (cfg.layout == TrunkLayout::Joint) {
    weight("temb.w", 2 * cfg.t_freqs, e);
    zeros("temb.b", 1, e);
  }
  weight("emb.state", cfg.n_states, e);
  weight("emb.action", cfg.n_actions, e);
  if (cfg.layout == TrunkLayout::Joint) weight("emb.goal", cfg.n_goals, e);
  weight("pos", cfg.n_tokens(), e);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    ones(blk(b, "ln1.g"), e);
    zeros(blk(b, "ln1.b"), 1, e);
    zeros(blk(b, "film1.w"), e, 2 * e);  // zero modulation: identity at init
    zeros(blk(b, "film1.b"), 1, 2 * e);
    for (const char* n : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) weight(blk(b, n), e, e);
    for (const char* n : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) zeros(blk(b, n), 1, e);
    ones(blk(b, "ln2.g"), e);
    zeros(blk(b, "ln2.b"), 1, e);
    zeros(blk(b, "film2.w"), e, 2 * e);
    zeros(blk(b, "film2.b"), 1, 2 * e);
    weight(blk(b, "mlp.w1"), e, 4 * e);
    zeros(blk(b, "mlp.b1"), 1, 4 * e);
    weight(blk(b, "mlp.w2"), 4 * e, e);
    zeros(blk(b, "mlp.b2"), 1, e);
  }
  ones("lnf.g", e);
  zeros("lnf.b", 1, e);
  weight("head.state.w", e, cfg.n_states);
  zeros("head.state.b", 1, cfg.n_states);
  weight("head.action.w", e, cfg.n_actions);
  zeros("head.action.b", 1, cfg.n_actions);
  if (cfg.layout == TrunkLayout::Joint) {
    weight("head.goal.w", e, cfg.n_goals);
    zeros("head.goal.b", 1, cfg.n_goals);
  }
}

DenoiserOutput denoiser_forward(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                                const DenoiserInput& in) {
  require(cfg.layout == TrunkLayout::Joint, "denoiser_forward needs the joint layout");
  require(in.t >= 0.0 && in.t < 1.0, "denoising time must lie in [0, 1)");
  const int h = cfg.horizon;
  const bool mask = cfg.kind == Interpolant::Mask;
  check_tokens(in.states, h, cfg.n_states + (mask ? 1 : 0), "states");
  check_tokens(in.actions, h, cfg.n_actions + (mask ? 1 : 0), "actions");
  check_tokens(in.goals, h, cfg.n_goals + (mask ? 1 : 0), "goals");
  require(in.ctx_states.size() == in.ctx_actions.size() &&
              static_cast<int>(in.ctx_states.size()) <= cfg.n_ctx,
          "memory pairs exceed the configured length");
  Tensor cond = cond_vector(g, ps, cfg, in.obs, in.t);
  std::vector<Tensor> body;
  body.reserve(2 * cfg.n_ctx + 4);
  body.push_back(cell_tokens(g, ps, in.obs));
  if (cfg.n_ctx > 0) {
    // Right-align the supplied pairs; empty slots carry the absent id, which
    // embeds as a zero row.
    std::vector<int> cs(cfg.n_ctx, cfg.n_states), ca(cfg.n_ctx, cfg.n_actions);
    const int m = static_cast<int>(in.ctx_states.size());
    for (int i = 0; i < m; ++i) {
      cs[cfg.n_ctx - m + i] = in.ctx_states[i];
      ca[cfg.n_ctx - m + i] = in.ctx_actions[i];
    }
    check_tokens(cs, cfg.n_ctx, cfg.n_states + 1, "memory states");
    check_tokens(ca, cfg.n_ctx, cfg.n_actions + 1, "memory actions");
    Tensor cse = embedding_or_zero(g, ps.at("emb.state"), cs);
    Tensor cae = embedding_or_zero(g, ps.at("emb.action"), ca);
    for (int i = 0; i < cfg.n_ctx; ++i) {
      body.push_back(slice_rows(g, cse, i, 1));
      body.push_back(slice_rows(g, cae, i, 1));
    }
  }
  body.push_back(embedding_or_zero(g, ps.at("emb.state"), in.states));
  body.push_back(embedding_or_zero(g, ps.at("emb.action"), in.actions));
  body.push_back(embedding_or_zero(g, ps.at("emb.goal"), in.goals));
  Tensor x = trunk_forward(g, ps, cfg, cond, body);
  const int base = 1 + cfg.grid_w * cfg.grid_h + 2 * cfg.n_ctx;
  DenoiserOutput out;
  out.state_logits = head(g, ps, slice_rows(g, x, base, h), "state");
  out.action_logits = head(g, ps, slice_rows(g, x, base + h, h), "action");
  out.goal_logits = head(g, ps, slice_rows(g, x, base + 2 * h, h), "goal");
  return out;
}

BcOutput bc_forward(Graph& g, const ParamStore& ps, const ArchConfig& cfg,
                    const ObservationEncoding& obs, const std::vector<int>& states,
                    const std::vector<int>& actions) {
  require(cfg.layout == TrunkLayout::Interleaved, "bc_forward needs the interleaved layout");
  const int h = cfg.horizon;
  check_tokens(states, h, cfg.n_states, "states");
  check_tokens(actions, h, cfg.n_actions, "actions");
  Tensor cond = cond_vector(g, ps, cfg, obs, 0.0);
  Tensor se = embedding_or_zero(g, ps.at("emb.state"), states);
  Tensor ae = embedding_or_zero(g, ps.at("emb.action"), actions);
  std::vector<Tensor> body;
  body.reserve(2 * h);
  for (int i = 0; i < h; ++i) {
    body.push_back(slice_rows(g, se, i, 1));
    body.push_back(slice_rows(g, ae, i, 1));
  }
  Tensor x = trunk_forward(g, ps, cfg, cond, body);
  // Gather the alternating read positions back into contiguous blocks.
  std::vector<Tensor> at_state, at_action;
  at_state.reserve(h);
  at_action.reserve(h);
  for (int i = 0; i < h; ++i) {
    at_state.push_back(slice_rows(g, x, 1 + 2 * i, 1));
    at_action.push_back(slice_rows(g, x, 2 + 2 * i, 1));
  }
  BcOutput out;
  out.action_logits = head(g, ps, concat_rows(g, at_state), "action");
  out.next_state_logits = head(g, ps, concat_rows(g, at_action), "state");
  return out;
}

std::string arch_to_json(const ArchConfig& cfg) {
  nlohmann::json j;
  j["horizon"] = cfg.horizon;
  j["n_states"] = cfg.n_states;
  j["n_actions"] = cfg.n_actions;
  j["n_goals"] = cfg.n_goals;
  j["kind"] = cfg.kind == Interpolant::Mask ? "mask" : "uniform";
  j["layout"] = cfg.layout == TrunkLayout::Joint ? "joint" : "interleaved";
  j["embed_dim"] = cfg.embed_dim;
  j["n_blocks"] = cfg.n_blocks;
  j["n_heads"] = cfg.n_heads;
  j["t_freqs"] = cfg.t_freqs;
  j["grid_w"] = cfg.grid_w;
  j["grid_h"] = cfg.grid_h;
  j["grid_c"] = cfg.grid_c;
  j["n_instructions"] = cfg.n_instructions;
  j["oracle_goal"] = cfg.oracle_goal;
  j["n_ctx"] = cfg.n_ctx;
  return j.dump();
}

ArchConfig arch_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ArchConfig cfg;
  cfg.horizon = j.at("horizon").get<int>();
  cfg.n_states = j.at("n_states").get<int>();
  cfg.n_actions = j.at("n_actions").get<int>();
  cfg.n_goals = j.at("n_goals").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "mask" && kind != "uniform") throw std::invalid_argument("unknown noise kind");
  cfg.kind = kind == "mask" ? Interpolant::Mask : Interpolant::Uniform;
  const std::string layout = j.at("layout").get<std::string>();
  if (layout != "joint" && layout != "interleaved") throw std::invalid_argument("unknown layout");
  cfg.layout = layout == "joint" ? TrunkLayout::Joint : TrunkLayout::Interleaved;
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.n_blocks = j.at("n_blocks").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.t_freqs = j.at("t_freqs").get<int>();
  cfg.grid_w = j.at("grid_w").get<int>();
  cfg.grid_h = j.at("grid_h").get<int>();
  cfg.grid_c = j.at("grid_c").get<int>();
  cfg.n_instructions = j.at("n_instructions").get<int>();
  cfg.oracle_goal = j.at("oracle_goal").get<bool>();
  cfg.n_ctx = j.value("n_ctx", 0);
  return cfg;
}

}  // namespace flowplan
