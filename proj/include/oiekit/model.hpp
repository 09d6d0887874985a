#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oiekit/core.hpp"
#include "oiekit/score_filter.hpp"
#include "oiekit/train_builder.hpp"
#include "oiekit/vocab.hpp"

namespace oiekit {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int embed_dim = 64;
  int hidden_dim = 64;  // per encoder direction; decoder state is 2x this
  int attn_dim = 64;
  double learning_rate = 0.25;
  int epochs = 40;
  double clip_norm = 5.0;
  int batch_size = 4;
  std::uint64_t seed = 1;
  int max_iters = 16;
  int max_len = 48;
  int vocab_min_freq = 2;
  int max_input_len = 300;

  int decoder_dim() const { return 2 * hidden_dim; }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"attn_dim", c.attn_dim},
                     {"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"clip_norm", c.clip_norm},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed},
                     {"max_iters", c.max_iters},
                     {"max_len", c.max_len},
                     {"vocab_min_freq", c.vocab_min_freq},
                     {"max_input_len", c.max_input_len}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("hidden_dim").get_to(c.hidden_dim);
  j.at("attn_dim").get_to(c.attn_dim);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("epochs").get_to(c.epochs);
  j.at("clip_norm").get_to(c.clip_norm);
  j.at("batch_size").get_to(c.batch_size);
  j.at("seed").get_to(c.seed);
  j.at("max_iters").get_to(c.max_iters);
  j.at("max_len").get_to(c.max_len);
  j.at("vocab_min_freq").get_to(c.vocab_min_freq);
  j.at("max_input_len").get_to(c.max_input_len);
}

// ---------------------------------------------------------------------------
// Gated recurrent cell.

struct GruParams {
  Mat Wz, Uz, Wr, Ur, Wn, Un;  // input and recurrent weights
  Mat bz, br, bn;              // biases, stored hidden x 1
};

struct GruCache {
  Vec x, hprev, z, r, n, h;
};

namespace nn {

inline Vec sigmoid(const Vec& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

inline Vec gru_step(const GruParams& p, const Vec& x, const Vec& hprev, GruCache* cache = nullptr) {
  const Vec z = sigmoid(p.Wz * x + p.Uz * hprev + p.bz);
  const Vec r = sigmoid(p.Wr * x + p.Ur * hprev + p.br);
  const Vec n = (p.Wn * x + p.Un * (r.cwiseProduct(hprev)) + p.bn).array().tanh().matrix();
  Vec h = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(hprev);
  if (cache) *cache = {x, hprev, z, r, n, h};
  return h;
}

// Accumulates weight gradients into g; returns (dx, dhprev).
inline std::pair<Vec, Vec> gru_backward(const GruParams& p, const GruCache& c, const Vec& dh,
                                        GruParams& g) {
  const Vec dz = dh.cwiseProduct(c.hprev - c.n);
  const Vec dn = dh.cwiseProduct((1.0 - c.z.array()).matrix());
  Vec dhprev = dh.cwiseProduct(c.z);

  const Vec dan = dn.cwiseProduct((1.0 - c.n.array().square()).matrix());
  g.Wn += dan * c.x.transpose();
  g.Un += dan * (c.r.cwiseProduct(c.hprev)).transpose();
  g.bn += dan;
  const Vec drh = p.Un.transpose() * dan;
  const Vec dr = drh.cwiseProduct(c.hprev);
  dhprev += drh.cwiseProduct(c.r);

  const Vec daz = dz.cwiseProduct(c.z).cwiseProduct((1.0 - c.z.array()).matrix());
  g.Wz += daz * c.x.transpose();
  g.Uz += daz * c.hprev.transpose();
  g.bz += daz;
  dhprev += p.Uz.transpose() * daz;

  const Vec dar = dr.cwiseProduct(c.r).cwiseProduct((1.0 - c.r.array()).matrix());
  g.Wr += dar * c.x.transpose();
  g.Ur += dar * c.hprev.transpose();
  g.br += dar;
  dhprev += p.Ur.transpose() * dar;

  Vec dx = p.Wz.transpose() * daz + p.Wr.transpose() * dar + p.Wn.transpose() * dan;
  return {std::move(dx), std::move(dhprev)};
}

// Runs the cell over a sequence in the given order, starting from zeros.
inline std::vector<GruCache> gru_chain(const GruParams& p, const std::vector<Vec>& xs, int hidden) {
  std::vector<GruCache> caches(xs.size());
  Vec h = Vec::Zero(hidden);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    h = gru_step(p, xs[t], h, &caches[t]);
  }
  return caches;
}

}  // namespace nn

// ---------------------------------------------------------------------------
// Parameters.

struct ModelParams {
  ModelConfig config;
  int vocab_size = 0;

  Mat embed;                      // V x E
  GruParams enc_fwd, enc_bwd;     // E -> H
  GruParams dec;                  // E -> D
  Mat attn_enc, attn_state;       // A x D each
  Mat attn_bias;                  // A x 1
  Mat attn_v;                     // A x 1
  Mat out_w;                      // V x 2D
  Mat out_b;                      // V x 1
  Mat gate_w;                     // (2D + E) x 1
  Mat gate_b;                     // 1 x 1

  // Declared parameter order; also the checkpoint layout.
  std::vector<std::pair<const char*, Mat*>> parameter_list() {
    auto gru = [](const char* base, GruParams& g, std::vector<std::pair<const char*, Mat*>>& out) {
      (void)base;
      out.push_back({"Wz", &g.Wz});
      out.push_back({"Uz", &g.Uz});
      out.push_back({"bz", &g.bz});
      out.push_back({"Wr", &g.Wr});
      out.push_back({"Ur", &g.Ur});
      out.push_back({"br", &g.br});
      out.push_back({"Wn", &g.Wn});
      out.push_back({"Un", &g.Un});
      out.push_back({"bn", &g.bn});
    };
    std::vector<std::pair<const char*, Mat*>> out;
    out.push_back({"embed", &embed});
    gru("enc_fwd", enc_fwd, out);
    gru("enc_bwd", enc_bwd, out);
    gru("dec", dec, out);
    out.push_back({"attn_enc", &attn_enc});
    out.push_back({"attn_state", &attn_state});
    out.push_back({"attn_bias", &attn_bias});
    out.push_back({"attn_v", &attn_v});
    out.push_back({"out_w", &out_w});
    out.push_back({"out_b", &out_b});
    out.push_back({"gate_w", &gate_w});
    out.push_back({"gate_b", &gate_b});
    return out;
  }

  // Parameter groups for diagnostics: name prefixes per architectural block.
  std::vector<std::pair<std::string, Mat*>> named_parameters() {
    std::vector<std::pair<std::string, Mat*>> out;
    const char* gru_names[] = {"Wz", "Uz", "bz", "Wr", "Ur", "br", "Wn", "Un", "bn"};
    std::size_t i = 0;
    auto list = parameter_list();
    out.emplace_back("embed", list[i++].second);
    for (const char* n : gru_names) out.emplace_back(std::string("enc_fwd.") + n, list[i++].second);
    for (const char* n : gru_names) out.emplace_back(std::string("enc_bwd.") + n, list[i++].second);
    for (const char* n : gru_names) out.emplace_back(std::string("dec.") + n, list[i++].second);
    for (const char* n : {"attn_enc", "attn_state", "attn_bias", "attn_v", "out_w", "out_b",
                          "gate_w", "gate_b"}) {
      out.emplace_back(n, list[i++].second);
    }
    return out;
  }

  static void shape(ModelParams& p, const ModelConfig& cfg, int vocab_size) {
    p.config = cfg;
    p.vocab_size = vocab_size;
    const int E = cfg.embed_dim, H = cfg.hidden_dim, D = cfg.decoder_dim(), A = cfg.attn_dim;
    const int V = vocab_size;
    auto gru = [](GruParams& g, int in, int hidden) {
      g.Wz = Mat::Zero(hidden, in);
      g.Uz = Mat::Zero(hidden, hidden);
      g.bz = Mat::Zero(hidden, 1);
      g.Wr = Mat::Zero(hidden, in);
      g.Ur = Mat::Zero(hidden, hidden);
      g.br = Mat::Zero(hidden, 1);
      g.Wn = Mat::Zero(hidden, in);
      g.Un = Mat::Zero(hidden, hidden);
      g.bn = Mat::Zero(hidden, 1);
    };
    p.embed = Mat::Zero(V, E);
    gru(p.enc_fwd, E, H);
    gru(p.enc_bwd, E, H);
    gru(p.dec, E, D);
    p.attn_enc = Mat::Zero(A, D);
    p.attn_state = Mat::Zero(A, D);
    p.attn_bias = Mat::Zero(A, 1);
    p.attn_v = Mat::Zero(A, 1);
    p.out_w = Mat::Zero(V, 2 * D);
    p.out_b = Mat::Zero(V, 1);
    p.gate_w = Mat::Zero(2 * D + E, 1);
    p.gate_b = Mat::Zero(1, 1);
  }

  static ModelParams init(const ModelConfig& cfg, int vocab_size) {
    ModelParams p;
    shape(p, cfg, vocab_size);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-0.08, 0.08);
    for (auto& [name, m] : p.parameter_list()) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) {
        for (Eigen::Index r = 0; r < m->rows(); ++r) {
          (*m)(r, c) = dist(rng);
        }
      }
    }
    return p;
  }

  static ModelParams zeros_like(const ModelParams& other) {
    ModelParams g;
    shape(g, other.config, other.vocab_size);
    return g;
  }
};

// ---------------------------------------------------------------------------
// Encoding.

struct EncodeResult {
  Mat H;           // D x S, column per input position; fwd states on top
  Mat attn_keys;   // A x S, attn_enc * H (cached projection)
  std::vector<int> ids;
  std::vector<GruCache> fwd;  // per position
  std::vector<GruCache> bwd;  // chain order = reversed input
};

// Bidirectional encoding of a memory input. H[0] (the [CLS] position) seeds
// the decoder. Unknown tokens map to <unk>.
inline EncodeResult encode(const ModelParams& p, const Vocab& vocab,
                           const std::vector<Token>& input) {
  if (input.empty() || input.front() != symbols::kCls) {
    throw std::invalid_argument("encode: input must begin with " + symbols::kCls);
  }
  const int S = static_cast<int>(input.size());
  const int H = p.config.hidden_dim;
  EncodeResult enc;
  enc.ids.reserve(input.size());
  std::vector<Vec> xs(input.size());
  for (int t = 0; t < S; ++t) {
    const int id = vocab.id(input[static_cast<std::size_t>(t)]);
    enc.ids.push_back(id);
    xs[static_cast<std::size_t>(t)] = p.embed.row(id).transpose();
  }
  enc.fwd = nn::gru_chain(p.enc_fwd, xs, H);
  std::vector<Vec> rev(xs.rbegin(), xs.rend());
  enc.bwd = nn::gru_chain(p.enc_bwd, rev, H);
  enc.H = Mat::Zero(p.config.decoder_dim(), S);
  for (int t = 0; t < S; ++t) {
    enc.H.block(0, t, H, 1) = enc.fwd[static_cast<std::size_t>(t)].h;
    enc.H.block(H, t, H, 1) = enc.bwd[static_cast<std::size_t>(S - 1 - t)].h;
  }
  enc.attn_keys = p.attn_enc * enc.H;
  return enc;
}

// ---------------------------------------------------------------------------
// One decoder step.

struct DecodeStep {
  Vec s;       // new decoder state
  Vec alpha;   // attention over source positions, sums to 1
  Vec context; // attention-weighted encoder states
  Vec gen;     // softmax over the vocabulary
  double gate = 0.5;  // mixture weight on generation
  Mat attn_pre;       // A x S pre-tanh activations (cache)
  GruCache dec_cache;
  Vec e;  // embedding of the previous token

  // Probability of emitting `tok` under the mixed generate/copy distribution.
  double probability(const Token& tok, const Vocab& vocab,
                     const std::vector<Token>& input) const {
    double p = 0.0;
    if (vocab.contains(tok)) p += gate * gen(vocab.id(tok));
    for (std::size_t j = 0; j < input.size(); ++j) {
      if (input[j] == tok) p += (1.0 - gate) * alpha(static_cast<Eigen::Index>(j));
    }
    return p;
  }
};

inline DecodeStep decode_step(const ModelParams& p, const EncodeResult& enc, const Vec& state,
                              int prev_id) {
  DecodeStep step;
  step.e = p.embed.row(prev_id).transpose();
  step.s = nn::gru_step(p.dec, step.e, state, &step.dec_cache);

  Mat pre = enc.attn_keys;  // A x S
  const Vec state_part = p.attn_state * step.s + p.attn_bias;
  pre.colwise() += state_part;
  step.attn_pre = pre.array().tanh().matrix();
  Vec scores = step.attn_pre.transpose() * p.attn_v;  // S
  const double mx = scores.maxCoeff();
  Vec ex = (scores.array() - mx).exp().matrix();
  step.alpha = ex / ex.sum();
  step.context = enc.H * step.alpha;

  Vec sc(2 * step.s.size());
  sc << step.s, step.context;
  Vec logits = p.out_w * sc + p.out_b;
  const double lmx = logits.maxCoeff();
  Vec lex = (logits.array() - lmx).exp().matrix();
  step.gen = lex / lex.sum();

  double gate_in = p.gate_w.col(0).head(step.s.size()).dot(step.s) +
                   p.gate_w.col(0).segment(step.s.size(), step.context.size()).dot(step.context) +
                   p.gate_w.col(0).tail(step.e.size()).dot(step.e) + p.gate_b(0, 0);
  step.gate = 1.0 / (1.0 + std::exp(-gate_in));
  return step;
}

// ---------------------------------------------------------------------------
// Teacher-forced loss and gradients.

namespace detail {

enum class TargetBranch { InVocab, CopyOnly, UnkFallback };

struct StepRecord {
  DecodeStep step;
  int prev_id = 0;
  int vid = 0;  // vocab id of the target (or <unk>)
  TargetBranch branch = TargetBranch::InVocab;
  std::vector<int> copy_positions;
  double prob = 0.0;
};

// Forward pass over one instance. Targets end with an implicit <eos>.
// Returns summed negative log-likelihood; fills records when given.
inline double forced_decode(const ModelParams& p, const Vocab& vocab, const EncodeResult& enc,
                            const std::vector<Token>& input, const std::vector<Token>& target,
                            std::vector<StepRecord>* records) {
  std::vector<Token> ys = target;
  ys.push_back(symbols::kEos);
  Vec state = enc.H.col(0);
  int prev_id = Vocab::kBosId;
  double nll = 0.0;
  for (const Token& y : ys) {
    StepRecord rec;
    rec.prev_id = prev_id;
    rec.step = decode_step(p, enc, state, prev_id);
    for (std::size_t j = 0; j < input.size(); ++j) {
      if (input[j] == y) rec.copy_positions.push_back(static_cast<int>(j));
    }
    double prob = 0.0;
    if (vocab.contains(y)) {
      rec.branch = TargetBranch::InVocab;
      rec.vid = vocab.id(y);
      prob = rec.step.gate * rec.step.gen(rec.vid);
      for (int j : rec.copy_positions) prob += (1.0 - rec.step.gate) * rec.step.alpha(j);
    } else if (!rec.copy_positions.empty()) {
      rec.branch = TargetBranch::CopyOnly;
      rec.vid = Vocab::kUnkId;
      for (int j : rec.copy_positions) prob += (1.0 - rec.step.gate) * rec.step.alpha(j);
    } else {
      rec.branch = TargetBranch::UnkFallback;
      rec.vid = Vocab::kUnkId;
      prob = rec.step.gate * rec.step.gen(Vocab::kUnkId);
    }
    prob = std::max(prob, 1e-300);
    rec.prob = prob;
    nll -= std::log(prob);
    state = rec.step.s;
    prev_id = vocab.id(y);
    if (records) records->push_back(std::move(rec));
  }
  return nll;
}

}  // namespace detail

struct InstanceLoss {
  double nll = 0.0;
  std::size_t tokens = 0;  // number of predicted positions, incl. <eos>
};

// Loss only (no gradients); shared by training diagnostics and the
// finite-difference check.
inline InstanceLoss instance_loss(const ModelParams& p, const Vocab& vocab,
                                  const TrainingInstance& inst) {
  const EncodeResult enc = encode(p, vocab, inst.input);
  const double nll = detail::forced_decode(p, vocab, enc, inst.input, inst.target, nullptr);
  return {nll, inst.target.size() + 1};
}

// Full forward/backward for one instance; gradients accumulate into `grads`.
inline InstanceLoss instance_backward(const ModelParams& p, const Vocab& vocab,
                                      const TrainingInstance& inst, ModelParams& grads) {
  const int S = static_cast<int>(inst.input.size());
  const int Hdim = p.config.hidden_dim;
  const int D = p.config.decoder_dim();
  const int E = p.config.embed_dim;

  const EncodeResult enc = encode(p, vocab, inst.input);
  std::vector<detail::StepRecord> records;
  const double nll = detail::forced_decode(p, vocab, enc, inst.input, inst.target, &records);

  Mat dH = Mat::Zero(D, S);
  Vec ds_carry = Vec::Zero(D);

  for (int t = static_cast<int>(records.size()) - 1; t >= 0; --t) {
    const auto& rec = records[static_cast<std::size_t>(t)];
    const auto& step = rec.step;
    const double dp = -1.0 / rec.prob;  // dL/dprob

    double dgate = 0.0;
    double dgen_val = 0.0;  // gradient on gen(vid)
    Vec dalpha = Vec::Zero(S);
    const double copy_mass = [&] {
      double m = 0.0;
      for (int j : rec.copy_positions) m += step.alpha(j);
      return m;
    }();

    switch (rec.branch) {
      case detail::TargetBranch::InVocab:
        dgate += dp * (step.gen(rec.vid) - copy_mass);
        dgen_val = dp * step.gate;
        for (int j : rec.copy_positions) dalpha(j) += dp * (1.0 - step.gate);
        break;
      case detail::TargetBranch::CopyOnly:
        dgate += -dp * copy_mass;
        for (int j : rec.copy_positions) dalpha(j) += dp * (1.0 - step.gate);
        break;
      case detail::TargetBranch::UnkFallback:
        dgate += dp * step.gen(rec.vid);
        dgen_val = dp * step.gate;
        break;
    }

    // Generation softmax + output projection.
    Vec ds = Vec::Zero(D);
    Vec dc = Vec::Zero(D);
    if (dgen_val != 0.0) {
      const double coef = dgen_val * step.gen(rec.vid);
      Vec dlogits = step.gen * (-coef);
      dlogits(rec.vid) += coef;
      grads.out_w.leftCols(D) += dlogits * step.s.transpose();
      grads.out_w.rightCols(D) += dlogits * step.context.transpose();
      grads.out_b += dlogits;
      ds += p.out_w.leftCols(D).transpose() * dlogits;
      dc += p.out_w.rightCols(D).transpose() * dlogits;
    }

    // Gate.
    const double da = dgate * step.gate * (1.0 - step.gate);
    if (da != 0.0) {
      grads.gate_w.col(0).head(D) += da * step.s;
      grads.gate_w.col(0).segment(D, D) += da * step.context;
      grads.gate_w.col(0).tail(E) += da * step.e;
      grads.gate_b(0, 0) += da;
      ds += da * p.gate_w.col(0).head(D);
      dc += da * p.gate_w.col(0).segment(D, D);
    }
    Vec de = da * p.gate_w.col(0).tail(E);

    // Context.
    dalpha += enc.H.transpose() * dc;
    dH += dc * step.alpha.transpose();

    // Attention softmax and additive scoring.
    const double adot = step.alpha.dot(dalpha);
    const Vec du = step.alpha.cwiseProduct(dalpha - Vec::Constant(S, adot));
    Mat dq = p.attn_v.col(0) * du.transpose();                       // A x S
    Mat dpre = dq.cwiseProduct((1.0 - step.attn_pre.array().square()).matrix());
    grads.attn_v.col(0) += step.attn_pre * du;
    grads.attn_enc += dpre * enc.H.transpose();
    const Vec rowsum = dpre.rowwise().sum();
    grads.attn_state += rowsum * step.s.transpose();
    grads.attn_bias.col(0) += rowsum;
    ds += p.attn_state.transpose() * rowsum;
    dH += p.attn_enc.transpose() * dpre;

    // Decoder cell.
    ds += ds_carry;
    auto [dx, dhprev] = nn::gru_backward(p.dec, step.dec_cache, ds, grads.dec);
    de += dx;
    grads.embed.row(rec.prev_id) += de.transpose();
    ds_carry = std::move(dhprev);
  }

  dH.col(0) += ds_carry;  // the decoder starts from H[0]

  // Encoder backward: forward direction.
  {
    Vec carry = Vec::Zero(Hdim);
    for (int t = S - 1; t >= 0; --t) {
      Vec dh = dH.block(0, t, Hdim, 1) + carry;
      auto [dx, dhprev] = nn::gru_backward(p.enc_fwd, enc.fwd[static_cast<std::size_t>(t)], dh,
                                           grads.enc_fwd);
      grads.embed.row(enc.ids[static_cast<std::size_t>(t)]) += dx.transpose();
      carry = std::move(dhprev);
    }
  }
  // Backward direction: chain index k covers input position S-1-k.
  {
    Vec carry = Vec::Zero(Hdim);
    for (int k = S - 1; k >= 0; --k) {
      const int t = S - 1 - k;
      Vec dh = dH.block(Hdim, t, Hdim, 1) + carry;
      auto [dx, dhprev] = nn::gru_backward(p.enc_bwd, enc.bwd[static_cast<std::size_t>(k)], dh,
                                           grads.enc_bwd);
      grads.embed.row(enc.ids[static_cast<std::size_t>(t)]) += dx.transpose();
      carry = std::move(dhprev);
    }
  }

  return {nll, inst.target.size() + 1};
}

// ---------------------------------------------------------------------------
// Training.

struct TrainResult {
  std::vector<double> epoch_loss;  // mean NLL per predicted token
};

// Teacher-forced SGD with epoch shuffling and global-norm gradient clipping.
// Deterministic for a fixed (params, instances, config).
template <typename EpochCallback = std::nullptr_t>
inline TrainResult train(ModelParams& params, const std::vector<TrainingInstance>& instances,
                         const Vocab& vocab, EpochCallback&& on_epoch = nullptr) {
  if (instances.empty()) throw std::invalid_argument("train: no instances");
  const ModelConfig& cfg = params.config;
  TrainResult result;
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x747261696eULL));
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ModelParams grads = ModelParams::zeros_like(params);
  auto gparams = grads.parameter_list();
  auto pparams = params.parameter_list();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(std::max(1, cfg.batch_size))) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(std::max(1, cfg.batch_size)));
      for (auto& [name, m] : gparams) m->setZero();
      double batch_nll = 0.0;
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const InstanceLoss loss = instance_backward(params, vocab, instances[order[i]], grads);
        batch_nll += loss.nll;
        batch_tokens += loss.tokens;
      }
      if (!std::isfinite(batch_nll)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_nll += batch_nll;
      epoch_tokens += batch_tokens;
      const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, batch_tokens));
      double norm_sq = 0.0;
      for (auto& [name, m] : gparams) {
        *m *= scale;
        norm_sq += m->squaredNorm();
      }
      const double norm = std::sqrt(norm_sq);
      const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      for (std::size_t k = 0; k < gparams.size(); ++k) {
        *pparams[k].second -= (cfg.learning_rate * clip) * (*gparams[k].second);
      }
    }
    result.epoch_loss.push_back(epoch_nll / static_cast<double>(std::max<std::size_t>(1, epoch_tokens)));
    if constexpr (!std::is_same_v<std::decay_t<EpochCallback>, std::nullptr_t>) {
      on_epoch(epoch, result.epoch_loss.back());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Generation.

struct GenerateResult {
  std::vector<Extraction> extractions;     // confidence filled in, source "model"
  std::size_t malformed = 0;               // decodes that did not parse
  std::vector<Mat> attention;              // per decode: emitted x input positions
  std::vector<std::vector<Token>> inputs;  // encoder input per decode
  std::vector<std::vector<Token>> raw;     // emitted tokens per decode
};

namespace detail {

struct GreedyDecode {
  std::vector<Token> tokens;   // emitted, <eos> excluded
  double total_logp = 0.0;     // over all steps incl. <eos>
  std::size_t steps = 0;
  Mat attention;               // emitted x S
};

inline GreedyDecode greedy_decode(const ModelParams& p, const Vocab& vocab,
                                  const EncodeResult& enc, const std::vector<Token>& input,
                                  int max_len) {
  GreedyDecode out;
  Vec state = enc.H.col(0);
  int prev_id = Vocab::kBosId;
  std::vector<Vec> alphas;
  for (int t = 0; t < max_len + 1; ++t) {
    const DecodeStep step = decode_step(p, enc, state, prev_id);

    // Copy mass pooled per distinct source string, in first-occurrence order.
    std::vector<std::pair<const Token*, double>> copy_mass;
    std::unordered_map<Token, std::size_t> copy_index;
    for (std::size_t j = 0; j < input.size(); ++j) {
      const auto [it, inserted] = copy_index.try_emplace(input[j], copy_mass.size());
      if (inserted) copy_mass.push_back({&input[j], 0.0});
      copy_mass[it->second].second += (1.0 - step.gate) * step.alpha(static_cast<Eigen::Index>(j));
    }

    const Token* best_tok = nullptr;
    double best_p = -1.0;
    for (int v = 0; v < vocab.size(); ++v) {
      if (v == Vocab::kPadId || v == Vocab::kBosId) continue;
      double prob = step.gate * step.gen(v);
      const auto it = copy_index.find(vocab.token(v));
      if (it != copy_index.end()) prob += copy_mass[it->second].second;
      if (prob > best_p) {
        best_p = prob;
        best_tok = &vocab.token(v);
      }
    }
    for (const auto& [tok, mass] : copy_mass) {
      if (vocab.contains(*tok)) continue;  // already counted through the vocab
      if (mass > best_p) {
        best_p = mass;
        best_tok = tok;
      }
    }

    out.total_logp += std::log(std::max(best_p, 1e-300));
    ++out.steps;
    const Token emitted = *best_tok;
    if (emitted == symbols::kEos) break;
    out.tokens.push_back(emitted);
    alphas.push_back(step.alpha);
    if (static_cast<int>(out.tokens.size()) >= max_len) break;
    state = step.s;
    prev_id = vocab.id(emitted);
  }
  out.attention = Mat::Zero(static_cast<Eigen::Index>(alphas.size()), enc.H.cols());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    out.attention.row(static_cast<Eigen::Index>(i)) = alphas[i].transpose();
  }
  return out;
}

}  // namespace detail

// Iterative decoding: encode the sentence plus everything emitted so far,
// generate one extraction, append it to the memory, repeat until the
// end-of-extractions symbol (or a cap) stops the loop. Malformed decodes are
// counted and skipped but still enter the memory.
inline GenerateResult generate_extractions(const ModelParams& p, const Vocab& vocab,
                                           const Sentence& sentence, int max_iters = -1,
                                           int max_len = -1) {
  if (max_iters < 0) max_iters = p.config.max_iters;
  if (max_len < 0) max_len = p.config.max_len;
  GenerateResult result;
  std::vector<Token> memory;
  memory.push_back(symbols::kCls);
  memory.insert(memory.end(), sentence.tokens.begin(), sentence.tokens.end());

  for (int iter = 0; iter < max_iters; ++iter) {
    const EncodeResult enc = encode(p, vocab, memory);
    detail::GreedyDecode decode = detail::greedy_decode(p, vocab, enc, memory, max_len);
    if (decode.tokens.size() == 1 && decode.tokens[0] == symbols::kEndOfExtractions) break;

    result.attention.push_back(std::move(decode.attention));
    result.inputs.push_back(memory);
    result.raw.push_back(decode.tokens);
    try {
      Extraction ext = parse_linearized(decode.tokens);
      ext.confidence = std::exp(decode.total_logp / static_cast<double>(std::max<std::size_t>(1, decode.steps)));
      ext.source = "model";
      result.extractions.push_back(std::move(ext));
    } catch (const MalformedExtraction&) {
      ++result.malformed;
    }
    if (memory.size() + 1 + decode.tokens.size() >
        static_cast<std::size_t>(p.config.max_input_len)) {
      break;
    }
    memory.push_back(symbols::kSep);
    memory.insert(memory.end(), decode.tokens.begin(), decode.tokens.end());
  }
  return result;
}

// Force-decodes the linearized extraction against the bare sentence;
// exp(mean token log-probability), in (0,1].
inline double score_extraction(const ModelParams& p, const Vocab& vocab, const Sentence& sentence,
                               const Extraction& ext) {
  std::vector<Token> input;
  input.push_back(symbols::kCls);
  input.insert(input.end(), sentence.tokens.begin(), sentence.tokens.end());
  const EncodeResult enc = encode(p, vocab, input);
  const std::vector<Token> target = linearize(ext);
  const double nll = detail::forced_decode(p, vocab, enc, input, target, nullptr);
  return std::exp(-nll / static_cast<double>(target.size() + 1));
}

// Scorer backed by a trained model; used by score_and_filter.
class ModelScorer : public Scorer {
 public:
  ModelScorer(ModelParams params, Vocab vocab)
      : params_(std::move(params)), vocab_(std::move(vocab)) {}

  double score(const Sentence& sentence, const Extraction& ext) const override {
    return score_extraction(params_, vocab_, sentence, ext);
  }

 private:
  ModelParams params_;
  Vocab vocab_;
};

// ---------------------------------------------------------------------------
// Attention export.

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Writes the step-by-position attention matrix as CSV: header row carries the
// input tokens, first column the decoded tokens.
inline void export_attention(const Mat& attention, const std::vector<Token>& input,
                             const std::vector<Token>& decoded, const std::string& path) {
  if (attention.rows() != static_cast<Eigen::Index>(decoded.size()) ||
      attention.cols() != static_cast<Eigen::Index>(input.size())) {
    throw std::invalid_argument("export_attention: matrix shape does not match token lists");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << "token";
  for (const auto& t : input) out << ',' << csv_escape(t);
  out << '\n';
  for (Eigen::Index i = 0; i < attention.rows(); ++i) {
    out << csv_escape(decoded[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < attention.cols(); ++j) out << ',' << attention(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Checkpoints: magic line, one-line JSON header (config + vocab), then the
// flat parameter arrays in declared order as raw 64-bit floats.

inline constexpr const char* kCheckpointMagic = "oiekit.ckpt.v1";

inline void save_checkpoint(const std::string& path, ModelParams& params, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  nlohmann::json header;
  header["config"] = params.config;
  header["vocab"] = vocab.tokens();
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  for (auto& [name, m] : params.parameter_list()) {
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

struct Checkpoint {
  ModelParams params;
  Vocab vocab;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kCheckpointMagic) {
    throw IoError("not a checkpoint file: " + path);
  }
  if (!std::getline(in, header_line)) throw IoError("truncated checkpoint header: " + path);
  Checkpoint ckpt;
  try {
    const nlohmann::json header = nlohmann::json::parse(header_line);
    const ModelConfig cfg = header.at("config").get<ModelConfig>();
    const std::vector<Token> tokens = header.at("vocab").get<std::vector<Token>>();
    ckpt.vocab = Vocab::from_tokens(tokens);
    ModelParams::shape(ckpt.params, cfg, ckpt.vocab.size());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  for (auto& [name, m] : ckpt.params.parameter_list()) {
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m->size())));
    if (!in) throw IoError(std::string("truncated checkpoint data at ") + name + ": " + path);
  }
  return ckpt;
}

}  // namespace oiekit
