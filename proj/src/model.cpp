#include "minotaur/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace minotaur {

namespace {

constexpr double kMaskBias = -1e9;
constexpr double kLnEps = 1e-5;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Eigen::MatrixXd xavier(int rows, int cols, Rng& rng) {
  double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

std::string layer_name(const char* stack, int i, const char* rest) {
  return std::string(stack) + "." + std::to_string(i) + "." + rest;
}

}  // namespace

void ModelConfig::validate() const {
  require(source_vocab_size > 0 && target_vocab_size > 0, "ModelConfig: vocab sizes unset");
  require(d > 0 && encoder_layers > 0 && decoder_layers > 0 && attention_heads > 0,
          "ModelConfig: nonpositive size");
  require(d % attention_heads == 0, "ModelConfig: d must be divisible by attention_heads");
  require(max_source_len > 0 && max_target_len > 0, "ModelConfig: nonpositive max length");
  require(dropout >= 0 && dropout < 1, "ModelConfig: dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"source_vocab_size", source_vocab_size},
          {"target_vocab_size", target_vocab_size},
          {"d", d},
          {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"attention_heads", attention_heads},
          {"ffn_hidden", ffn_hidden},
          {"max_source_len", max_source_len},
          {"max_target_len", max_target_len},
          {"dropout", dropout},
          {"deterministic_bottleneck", deterministic_bottleneck},
          {"reparam_printed_scaling", reparam_printed_scaling}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.source_vocab_size = j.value("source_vocab_size", 0);
  c.target_vocab_size = j.value("target_vocab_size", 0);
  c.d = j.value("d", c.d);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.max_source_len = j.value("max_source_len", c.max_source_len);
  c.max_target_len = j.value("max_target_len", c.max_target_len);
  c.dropout = j.value("dropout", c.dropout);
  c.deterministic_bottleneck = j.value("deterministic_bottleneck", false);
  c.reparam_printed_scaling = j.value("reparam_printed_scaling", false);
  return c;
}

ModelParameters ModelParameters::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParameters p;
  const int d = cfg.d, f = cfg.ffn();

  auto weight = [&](const std::string& name, int r, int c) {
    p.arrays[name] = xavier(r, c, rng);
  };
  auto zeros = [&](const std::string& name, int r, int c) {
    p.arrays[name] = Eigen::MatrixXd::Zero(r, c);
  };
  auto ones = [&](const std::string& name, int r, int c) {
    p.arrays[name] = Eigen::MatrixXd::Ones(r, c);
  };
  auto ln = [&](const std::string& prefix) {
    ones(prefix + ".g", 1, d);
    zeros(prefix + ".b", 1, d);
  };
  auto attn = [&](const std::string& prefix) {
    weight(prefix + ".wq", d, d);
    weight(prefix + ".wk", d, d);
    weight(prefix + ".wv", d, d);
    weight(prefix + ".wo", d, d);
    zeros(prefix + ".bo", 1, d);
  };
  auto ffn = [&](const std::string& prefix) {
    weight(prefix + ".w1", d, f);
    zeros(prefix + ".b1", 1, f);
    weight(prefix + ".w2", f, d);
    zeros(prefix + ".b2", 1, d);
  };

  // Embeddings scaled by sqrt(d) at lookup, so init keeps entries ~ d^{-1/2}.
  double estd = 1.0 / std::sqrt(static_cast<double>(d));
  p.arrays["src_embed"] = estd * rng.normal_matrix(cfg.source_vocab_size, d);
  p.arrays["tgt_embed"] = estd * rng.normal_matrix(cfg.target_vocab_size, d);

  for (int i = 0; i < cfg.encoder_layers; ++i) {
    ln(layer_name("enc", i, "ln1"));
    attn(layer_name("enc", i, "attn"));
    ln(layer_name("enc", i, "ln2"));
    ffn(layer_name("enc", i, "ff"));
  }
  ln("enc.final_ln");
  weight("pooler.wk", d, d);
  weight("pooler.wv", d, d);
  weight("pooler.q", 1, d);

  for (int i = 0; i < cfg.decoder_layers; ++i) {
    ln(layer_name("dec", i, "ln1"));
    attn(layer_name("dec", i, "self"));
    ln(layer_name("dec", i, "ln2"));
    attn(layer_name("dec", i, "cross"));
    ln(layer_name("dec", i, "ln3"));
    ffn(layer_name("dec", i, "ff"));
  }
  ln("dec.final_ln");
  weight("out.w", d, cfg.target_vocab_size);
  zeros("out.b", 1, cfg.target_vocab_size);
  return p;
}

const Eigen::MatrixXd& ModelParameters::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw std::out_of_range("ModelParameters: missing " + name);
  return it->second;
}

bool ModelParameters::all_finite() const {
  for (const auto& [name, m] : arrays)
    if (!m.allFinite()) return false;
  return true;
}

Eigen::MatrixXd sinusoidal_positions(int len, int d) {
  Eigen::MatrixXd pos(len, d);
  for (int t = 0; t < len; ++t)
    for (int i = 0; i < d; ++i) {
      double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(d));
      pos(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  return pos;
}

ParamGraph ParamGraph::bind(const ModelParameters& params, bool trainable) {
  ParamGraph pg;
  for (const auto& [name, m] : params.arrays)
    pg.vars.emplace(name, trainable ? ad::leaf(m) : ad::constant(m));
  return pg;
}

const ad::Var& ParamGraph::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::out_of_range("ParamGraph: missing " + name);
  return it->second;
}

// ---- graph forward ----------------------------------------------------------

namespace {

ad::Var dropout_var(const ad::Var& x, double p, Rng* rng) {
  if (!rng || p <= 0) return x;
  Eigen::MatrixXd mask(x.rows(), x.cols());
  double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng->uniform() < p ? 0.0 : 1.0 / keep;
  return ad::cmul(x, ad::constant(std::move(mask)));
}

ad::Var add_bias(const ad::Var& x, const ad::Var& bias) {
  return ad::add(x, ad::broadcast_rows(bias, static_cast<int>(x.rows())));
}

// Additive attention bias masking invalid key columns.
Eigen::MatrixXd key_mask_bias(int t_q, const std::vector<int>& mask) {
  Eigen::MatrixXd bias = Eigen::MatrixXd::Zero(t_q, static_cast<int>(mask.size()));
  for (size_t j = 0; j < mask.size(); ++j)
    if (mask[j] == 0) bias.col(static_cast<Eigen::Index>(j)).setConstant(kMaskBias);
  return bias;
}

Eigen::MatrixXd causal_bias(int t) {
  Eigen::MatrixXd bias = Eigen::MatrixXd::Zero(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) bias(i, j) = kMaskBias;
  return bias;
}

ad::Var multihead_attention(const ParamGraph& pg, const std::string& prefix,
                            const ad::Var& q_in, const ad::Var& kv_in,
                            const ModelConfig& cfg, const Eigen::MatrixXd* bias) {
  ad::Var q = ad::matmul(q_in, pg.at(prefix + ".wq"));
  ad::Var k = ad::matmul(kv_in, pg.at(prefix + ".wk"));
  ad::Var v = ad::matmul(kv_in, pg.at(prefix + ".wv"));
  ad::Var mixed = ad::multihead_attention_core(q, k, v, cfg.attention_heads, bias);
  return add_bias(ad::matmul(mixed, pg.at(prefix + ".wo")), pg.at(prefix + ".bo"));
}

ad::Var ffn_block(const ParamGraph& pg, const std::string& prefix, const ad::Var& x) {
  ad::Var h = ad::relu(add_bias(ad::matmul(x, pg.at(prefix + ".w1")), pg.at(prefix + ".b1")));
  return add_bias(ad::matmul(h, pg.at(prefix + ".w2")), pg.at(prefix + ".b2"));
}

ad::Var pool_variance_graph(const ParamGraph& pg, const ad::Var& hidden,
                            const ModelConfig& cfg, const std::vector<int>* mask) {
  const int t = static_cast<int>(hidden.rows());
  const int dh = cfg.head_dim();
  ad::Var k = ad::matmul(hidden, pg.at("pooler.wk"));
  ad::Var v = ad::matmul(hidden, pg.at("pooler.wv"));

  Eigen::MatrixXd bias = Eigen::MatrixXd::Zero(1, t);
  if (mask) {
    for (size_t j = 0; j < mask->size(); ++j)
      if ((*mask)[j] == 0) bias(0, static_cast<Eigen::Index>(j)) = kMaskBias;
  }
  ad::Var bias_var = ad::constant(bias);

  std::vector<ad::Var> heads;
  for (int h = 0; h < cfg.attention_heads; ++h) {
    ad::Var kh = ad::block(k, 0, h * dh, t, dh);
    ad::Var vh = ad::block(v, 0, h * dh, t, dh);
    ad::Var qh = ad::block(pg.at("pooler.q"), 0, h * dh, 1, dh);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(dh));
    scores = ad::add(scores, bias_var);
    heads.push_back(ad::matmul(ad::row_softmax(scores), vh));  // 1 x dh
  }
  return ad::add_scalar(ad::softplus(ad::concat_cols(heads)), kVarianceFloor);
}

}  // namespace

EncoderGraph encode_graph(const ParamGraph& pg, const std::vector<int>& tokens,
                          const ModelConfig& cfg, const std::vector<int>* mask,
                          Rng* dropout_rng) {
  const int t = static_cast<int>(tokens.size());
  require(t >= 1, "encode: empty input");
  require(t <= cfg.max_source_len, "encode: input longer than max_source_len");
  for (int id : tokens)
    require(id >= 0 && id < cfg.source_vocab_size, "encode: unknown token id");
  if (mask) require(static_cast<int>(mask->size()) == t, "encode: mask length mismatch");

  ad::Var x = ad::scale(ad::gather_rows(pg.at("src_embed"), tokens),
                        std::sqrt(static_cast<double>(cfg.d)));
  x = ad::add(x, ad::constant(sinusoidal_positions(t, cfg.d)));
  x = dropout_var(x, cfg.dropout, dropout_rng);

  std::optional<Eigen::MatrixXd> key_bias;
  if (mask) key_bias = key_mask_bias(t, *mask);

  for (int i = 0; i < cfg.encoder_layers; ++i) {
    std::string base = "enc." + std::to_string(i);
    ad::Var a = ad::layer_norm(x, pg.at(base + ".ln1.g"), pg.at(base + ".ln1.b"), kLnEps);
    x = ad::add(x, dropout_var(multihead_attention(pg, base + ".attn", a, a, cfg,
                                                   key_bias ? &*key_bias : nullptr),
                               cfg.dropout, dropout_rng));
    ad::Var f = ad::layer_norm(x, pg.at(base + ".ln2.g"), pg.at(base + ".ln2.b"), kLnEps);
    x = ad::add(x, dropout_var(ffn_block(pg, base + ".ff", f), cfg.dropout, dropout_rng));
  }
  EncoderGraph out;
  out.hidden = ad::layer_norm(x, pg.at("enc.final_ln.g"), pg.at("enc.final_ln.b"), kLnEps);
  out.means = out.hidden;
  out.var = pool_variance_graph(pg, out.hidden, cfg, mask);
  return out;
}

ad::Var decode_ce_graph(const ParamGraph& pg, const ad::Var& memory,
                        const std::vector<int>& gold, const ModelConfig& cfg,
                        const std::vector<int>* src_mask, Rng* dropout_rng,
                        ad::Var* logits_out) {
  const int n = static_cast<int>(gold.size());
  require(n + 1 <= cfg.max_target_len, "decode: target longer than max_target_len");
  for (int id : gold)
    require(id >= 0 && id < cfg.target_vocab_size, "decode: unknown target id");

  std::vector<int> dec_in, targets;
  dec_in.push_back(Vocab::kBos);
  dec_in.insert(dec_in.end(), gold.begin(), gold.end());
  targets = gold;
  targets.push_back(Vocab::kEos);
  const int t = n + 1;

  ad::Var x = ad::scale(ad::gather_rows(pg.at("tgt_embed"), dec_in),
                        std::sqrt(static_cast<double>(cfg.d)));
  x = ad::add(x, ad::constant(sinusoidal_positions(t, cfg.d)));
  x = dropout_var(x, cfg.dropout, dropout_rng);

  Eigen::MatrixXd causal = causal_bias(t);
  std::optional<Eigen::MatrixXd> cross_bias;
  if (src_mask) cross_bias = key_mask_bias(t, *src_mask);

  for (int i = 0; i < cfg.decoder_layers; ++i) {
    std::string base = "dec." + std::to_string(i);
    ad::Var a = ad::layer_norm(x, pg.at(base + ".ln1.g"), pg.at(base + ".ln1.b"), kLnEps);
    x = ad::add(x, dropout_var(multihead_attention(pg, base + ".self", a, a, cfg, &causal),
                               cfg.dropout, dropout_rng));
    ad::Var c = ad::layer_norm(x, pg.at(base + ".ln2.g"), pg.at(base + ".ln2.b"), kLnEps);
    x = ad::add(x, dropout_var(multihead_attention(pg, base + ".cross", c, memory, cfg,
                                                   cross_bias ? &*cross_bias : nullptr),
                               cfg.dropout, dropout_rng));
    ad::Var f = ad::layer_norm(x, pg.at(base + ".ln3.g"), pg.at(base + ".ln3.b"), kLnEps);
    x = ad::add(x, dropout_var(ffn_block(pg, base + ".ff", f), cfg.dropout, dropout_rng));
  }
  x = ad::layer_norm(x, pg.at("dec.final_ln.g"), pg.at("dec.final_ln.b"), kLnEps);
  ad::Var logits = add_bias(ad::matmul(x, pg.at("out.w")), pg.at("out.b"));
  if (logits_out) *logits_out = logits;
  return ad::cross_entropy_logits(logits, targets, Vocab::kPad);
}

// ---- plain-value API --------------------------------------------------------

GaussianSequence encode(const ModelParameters& params, const std::vector<int>& tokens,
                        const ModelConfig& cfg, const std::vector<int>* mask) {
  ParamGraph pg = ParamGraph::bind(params, false);
  EncoderGraph eg = encode_graph(pg, tokens, cfg, mask);
  GaussianSequence seq;
  seq.means = eg.means.value();
  seq.variance = eg.var.value().row(0).transpose();
  return seq;
}

Eigen::MatrixXd encode_deterministic(const ModelParameters& params,
                                     const std::vector<int>& tokens,
                                     const ModelConfig& cfg,
                                     const std::vector<int>* mask) {
  require(cfg.deterministic_bottleneck,
          "encode_deterministic: deterministic_bottleneck is disabled");
  ParamGraph pg = ParamGraph::bind(params, false);
  return encode_graph(pg, tokens, cfg, mask).hidden.value();
}

Eigen::VectorXd pool_variance(const ModelParameters& params,
                              const Eigen::MatrixXd& hidden, const ModelConfig& cfg,
                              const std::vector<int>* mask) {
  require(hidden.rows() >= 1, "pool_variance: empty input");
  ParamGraph pg = ParamGraph::bind(params, false);
  return pool_variance_graph(pg, ad::constant(hidden), cfg, mask).value().row(0).transpose();
}

Eigen::MatrixXd reparameterize(const GaussianSequence& g, Rng& rng, bool printed_scaling) {
  g.validate();
  Eigen::RowVectorXd sigma = g.variance.transpose();
  if (!printed_scaling) sigma = sigma.array().sqrt().matrix();
  Eigen::MatrixXd eps = rng.normal_matrix(g.length(), g.dim());
  return g.means + (eps.array().rowwise() * sigma.array()).matrix();
}

std::pair<Eigen::MatrixXd, double> decode_teacher_forced(
    const ModelParameters& params, const Eigen::MatrixXd& z, const std::vector<int>& gold,
    const ModelConfig& cfg, const std::vector<int>* src_mask) {
  ParamGraph pg = ParamGraph::bind(params, false);
  ad::Var logits;
  ad::Var ce = decode_ce_graph(pg, ad::constant(z), gold, cfg, src_mask, nullptr, &logits);
  return {logits.value(), ce.scalar()};
}

std::vector<EncodedExample> encode_batch(const ModelParameters& params,
                                         const std::vector<std::vector<int>>& batch,
                                         const ModelConfig& cfg, Rng& rng, bool sample) {
  std::vector<EncodedExample> out;
  out.reserve(batch.size());
  for (const auto& tokens : batch) {
    EncodedExample ee;
    ee.posterior = encode(params, tokens, cfg);
    ee.mask.assign(tokens.size(), 1);
    ee.z = sample ? reparameterize(ee.posterior, rng, cfg.reparam_printed_scaling)
                  : ee.posterior.means;
    out.push_back(std::move(ee));
  }
  return out;
}

// ---- fast incremental decoding ----------------------------------------------

namespace {

Eigen::RowVectorXd plain_ln(const Eigen::RowVectorXd& x, const Eigen::MatrixXd& g,
                            const Eigen::MatrixXd& b) {
  double mu = x.mean();
  double var = (x.array() - mu).square().mean();
  double is = 1.0 / std::sqrt(var + kLnEps);
  return (((x.array() - mu) * is) * g.row(0).array() + b.row(0).array()).matrix();
}

Eigen::RowVectorXd plain_softmax(const Eigen::RowVectorXd& v) {
  double mx = v.maxCoeff();
  Eigen::RowVectorXd e = (v.array() - mx).exp().matrix();
  return e / e.sum();
}

struct InferDecoder {
  const ModelParameters& p;
  const ModelConfig& cfg;
  std::vector<Eigen::MatrixXd> cross_k, cross_v;  // per layer, T_src x d
  Eigen::MatrixXd pos;
  const std::vector<int>* src_mask;

  InferDecoder(const ModelParameters& params, const ModelConfig& config,
               const Eigen::MatrixXd& memory, const std::vector<int>* mask)
      : p(params), cfg(config), src_mask(mask) {
    pos = sinusoidal_positions(cfg.max_target_len, cfg.d);
    for (int i = 0; i < cfg.decoder_layers; ++i) {
      std::string base = "dec." + std::to_string(i) + ".cross";
      cross_k.push_back(memory * p.at(base + ".wk"));
      cross_v.push_back(memory * p.at(base + ".wv"));
    }
  }

  struct State {
    std::vector<Eigen::MatrixXd> k, v;  // per layer, grows one row per step
    int len = 0;
  };

  State fresh_state() const {
    State st;
    st.k.assign(static_cast<size_t>(cfg.decoder_layers),
                Eigen::MatrixXd(cfg.max_target_len, cfg.d));
    st.v = st.k;
    return st;
  }

  Eigen::RowVectorXd attend(const Eigen::RowVectorXd& q_row, const Eigen::MatrixXd& K,
                            const Eigen::MatrixXd& V, int rows, bool apply_src_mask) const {
    const int dh = cfg.head_dim();
    Eigen::RowVectorXd out(cfg.d);
    for (int h = 0; h < cfg.attention_heads; ++h) {
      Eigen::RowVectorXd qh = q_row.segment(h * dh, dh);
      Eigen::RowVectorXd scores =
          qh * K.topRows(rows).middleCols(h * dh, dh).transpose() / std::sqrt(dh);
      if (apply_src_mask && src_mask) {
        for (int j = 0; j < rows; ++j)
          if ((*src_mask)[static_cast<size_t>(j)] == 0) scores(j) = kMaskBias;
      }
      Eigen::RowVectorXd a = plain_softmax(scores);
      out.segment(h * dh, dh) = a * V.topRows(rows).middleCols(h * dh, dh);
    }
    return out;
  }

  /// Feeds one token at the given position; returns next-token logits.
  Eigen::RowVectorXd step(State& st, int token, int position) const {
    Eigen::RowVectorXd x =
        p.at("tgt_embed").row(token) * std::sqrt(static_cast<double>(cfg.d)) +
        pos.row(position);
    for (int i = 0; i < cfg.decoder_layers; ++i) {
      const auto li = static_cast<size_t>(i);
      std::string base = "dec." + std::to_string(i);
      Eigen::RowVectorXd a = plain_ln(x, p.at(base + ".ln1.g"), p.at(base + ".ln1.b"));
      st.k[li].row(st.len) = a * p.at(base + ".self.wk");
      st.v[li].row(st.len) = a * p.at(base + ".self.wv");
      Eigen::RowVectorXd attn =
          attend(a * p.at(base + ".self.wq"), st.k[li], st.v[li], st.len + 1, false);
      x += attn * p.at(base + ".self.wo") + p.at(base + ".self.bo").row(0);

      Eigen::RowVectorXd c = plain_ln(x, p.at(base + ".ln2.g"), p.at(base + ".ln2.b"));
      Eigen::RowVectorXd cross =
          attend(c * p.at(base + ".cross.wq"), cross_k[li], cross_v[li],
                 static_cast<int>(cross_k[li].rows()), true);
      x += cross * p.at(base + ".cross.wo") + p.at(base + ".cross.bo").row(0);

      Eigen::RowVectorXd f = plain_ln(x, p.at(base + ".ln3.g"), p.at(base + ".ln3.b"));
      Eigen::RowVectorXd h =
          ((f * p.at(base + ".ff.w1") + p.at(base + ".ff.b1").row(0)).array().max(0.0))
              .matrix();
      x += h * p.at(base + ".ff.w2") + p.at(base + ".ff.b2").row(0);
    }
    ++st.len;
    x = plain_ln(x, p.at("dec.final_ln.g"), p.at("dec.final_ln.b"));
    return x * p.at("out.w") + p.at("out.b").row(0);
  }
};

Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& v) {
  double mx = v.maxCoeff();
  double lse = std::log((v.array() - mx).exp().sum()) + mx;
  return (v.array() - lse).matrix();
}

}  // namespace

std::vector<int> beam_decode(const ModelParameters& params, const Eigen::MatrixXd& z,
                             int beam_width, int max_len, const ModelConfig& cfg,
                             const std::vector<int>* src_mask) {
  require(beam_width >= 1, "beam_decode: beam_width must be >= 1");
  max_len = std::min(max_len, cfg.max_target_len - 1);
  InferDecoder dec(params, cfg, z, src_mask);

  struct Hyp {
    InferDecoder::State st;
    std::vector<int> tokens;
    double logp = 0.0;
    Eigen::RowVectorXd next_logits;
  };
  struct Done {
    std::vector<int> tokens;
    double score;
  };

  std::vector<Hyp> live(1);
  live[0].st = dec.fresh_state();
  live[0].next_logits = dec.step(live[0].st, Vocab::kBos, 0);

  std::vector<Done> completed;
  for (int t = 0; t < max_len && !live.empty(); ++t) {
    struct Cand {
      size_t hyp;
      int token;
      double logp;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * static_cast<size_t>(cfg.target_vocab_size));
    for (size_t hi = 0; hi < live.size(); ++hi) {
      Eigen::RowVectorXd lp = log_softmax_row(live[hi].next_logits);
      for (int tok = 0; tok < cfg.target_vocab_size; ++tok)
        cands.push_back({hi, tok, live[hi].logp + lp(tok)});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.logp != b.logp) return a.logp > b.logp;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });

    // The top beam_width candidates survive; an EOS candidate consumes its
    // slot and closes the hypothesis, so width 1 is exactly greedy.
    std::vector<Hyp> next;
    next.reserve(static_cast<size_t>(beam_width));
    int taken = 0;
    for (const Cand& c : cands) {
      if (taken >= beam_width) break;
      ++taken;
      if (c.token == Vocab::kEos) {
        double len = static_cast<double>(live[c.hyp].tokens.size()) + 1.0;
        completed.push_back({live[c.hyp].tokens, c.logp / len});
        continue;
      }
      Hyp h;
      h.st = live[c.hyp].st;
      h.tokens = live[c.hyp].tokens;
      h.tokens.push_back(c.token);
      h.logp = c.logp;
      h.next_logits = dec.step(h.st, c.token, static_cast<int>(h.tokens.size()));
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  auto better = [](const Done& a, const Done& b) { return a.score > b.score; };
  if (!completed.empty()) {
    const Done* best = &completed[0];
    for (const auto& d : completed)
      if (better(d, *best)) best = &d;
    return best->tokens;
  }
  // Nothing reached EOS within the cap; fall back to the best truncated path.
  const Hyp* best = nullptr;
  for (const auto& h : live)
    if (!best || h.logp / std::max<size_t>(1, h.tokens.size()) >
                     best->logp / std::max<size_t>(1, best->tokens.size()))
      best = &h;
  return best ? best->tokens : std::vector<int>{};
}

// ---- checkpoints ------------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const ModelConfig& cfg, const Vocab& source_vocab,
                     const Vocab& target_vocab) {
  nlohmann::json meta;
  meta["config"] = cfg.to_json();
  meta["source_vocab"] = source_vocab.tokens;
  meta["target_vocab"] = target_vocab.tokens;
  meta["arrays"] = nlohmann::json::array();
  for (const auto& [name, m] : params.arrays)
    meta["arrays"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    out << kCheckpointHeader << "\n" << meta.dump() << "\n";
    for (const auto& [name, m] : params.arrays) {
      // Row-major on disk regardless of Eigen's storage order.
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          double v = m(i, j);
          out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string header, meta_line;
  std::getline(in, header);
  if (header != kCheckpointHeader)
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  std::getline(in, meta_line);
  nlohmann::json meta = nlohmann::json::parse(meta_line);

  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(meta.at("config"));
  for (const auto& t : meta.at("source_vocab").get<std::vector<std::string>>())
    ckpt.source_vocab.add(t);
  for (const auto& t : meta.at("target_vocab").get<std::vector<std::string>>())
    ckpt.target_vocab.add(t);

  for (const auto& aj : meta.at("arrays")) {
    std::string name = aj.at("name").get<std::string>();
    Eigen::Index rows = aj.at("rows").get<Eigen::Index>();
    Eigen::Index cols = aj.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(i, j) = v;
      }
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path);
    ckpt.params.arrays[name] = std::move(m);
  }
  return ckpt;
}

}  // namespace minotaur
