#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phonrec/error.hpp"
#include "phonrec/random.hpp"

namespace phonrec {

enum class SourceKind { Tokens, Features };

/// Architecture and optimisation settings. Defaults are the reference
/// configuration: width 200, 2 heads, feed-forward 400, 4 encoder layers,
/// 1 decoder layer, 100 epochs with a checkpoint every 10.
struct ModelConfig {
  int d_model = 200;
  int heads = 2;
  int d_ff = 400;
  int encoder_layers = 4;
  int decoder_layers = 1;
  int epochs = 100;
  int checkpoint_interval = 10;
  int max_target_len = 400;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  int batch_size = 32;
  double dropout = 0.1;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  SourceKind source = SourceKind::Tokens;
  int source_vocab = 0;  // Tokens: alphabet size including specials
  int feature_dim = 0;   // Features: frame dimension
  int target_vocab = 0;

  // Throws Error(ShapeMismatch) on inconsistent settings.
  void validate() const;
};

/// Encoder input: character indices or a frames x feature_dim matrix.
struct Source {
  std::vector<int> tokens;
  Eigen::MatrixXd features;

  std::size_t length() const {
    return tokens.empty() ? static_cast<std::size_t>(features.rows()) : tokens.size();
  }
};

struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;
};

class ParamLayout {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    const std::size_t offset = size_;
    blocks_.push_back({std::move(name), rows, cols, offset});
    size_ += static_cast<std::size_t>(rows * cols);
    return offset;
  }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t size() const { return size_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

namespace nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using RowMajorMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LinearRef {
  std::size_t w = 0;
  std::size_t b = 0;
  Eigen::Index in = 0;
  Eigen::Index out = 0;
};
struct NormRef {
  std::size_t gain = 0;
  std::size_t bias = 0;
  Eigen::Index dim = 0;
};
struct AttentionRef {
  LinearRef q, k, v, o;
};
struct FeedForwardRef {
  LinearRef in, out;
};
struct EncoderLayerRef {
  NormRef ln1;
  AttentionRef attn;
  NormRef ln2;
  FeedForwardRef ff;
};
struct DecoderLayerRef {
  NormRef ln1;
  AttentionRef self_attn;
  NormRef ln2;
  AttentionRef cross_attn;
  NormRef ln3;
  FeedForwardRef ff;
};

inline LinearRef add_linear(ParamLayout& layout, const std::string& name, Eigen::Index in,
                            Eigen::Index out) {
  LinearRef r;
  r.in = in;
  r.out = out;
  r.w = layout.add(name + ".w", in, out);
  r.b = layout.add(name + ".b", 1, out);
  return r;
}

inline NormRef add_norm(ParamLayout& layout, const std::string& name, Eigen::Index dim) {
  NormRef r;
  r.dim = dim;
  r.gain = layout.add(name + ".gain", 1, dim);
  r.bias = layout.add(name + ".bias", 1, dim);
  return r;
}

inline AttentionRef add_attention(ParamLayout& layout, const std::string& name, Eigen::Index d) {
  return {add_linear(layout, name + ".q", d, d), add_linear(layout, name + ".k", d, d),
          add_linear(layout, name + ".v", d, d), add_linear(layout, name + ".o", d, d)};
}

template <typename Scalar>
Eigen::Map<const RowMajorMat<Scalar>> weight(const Scalar* base, const LinearRef& r) {
  return {base + r.w, r.in, r.out};
}
template <typename Scalar>
Eigen::Map<RowMajorMat<Scalar>> weight(Scalar* base, const LinearRef& r) {
  return {base + r.w, r.in, r.out};
}
template <typename Scalar>
Eigen::Map<const RowVec<Scalar>> row(const Scalar* base, std::size_t offset, Eigen::Index n) {
  return {base + offset, n};
}
template <typename Scalar>
Eigen::Map<RowVec<Scalar>> row(Scalar* base, std::size_t offset, Eigen::Index n) {
  return {base + offset, n};
}

template <typename Scalar>
Mat<Scalar> linear(const Mat<Scalar>& x, const Scalar* p, const LinearRef& r) {
  Mat<Scalar> y = x * weight(p, r);
  y.rowwise() += row(p, r.b, r.out);
  return y;
}

// Accumulates parameter gradients into g and returns d(input).
template <typename Scalar>
Mat<Scalar> linear_backward(const Mat<Scalar>& x, const Mat<Scalar>& dy, const Scalar* p,
                            Scalar* g, const LinearRef& r) {
  weight(g, r).noalias() += x.transpose() * dy;
  row(g, r.b, r.out) += dy.colwise().sum();
  return dy * weight(p, r).transpose();
}

template <typename Scalar>
struct NormCache {
  Mat<Scalar> xhat;
  Vec<Scalar> inv_std;
};

inline constexpr double kNormEps = 1e-5;

template <typename Scalar>
Mat<Scalar> layer_norm(const Mat<Scalar>& x, const Scalar* p, const NormRef& r,
                       NormCache<Scalar>* cache) {
  const Eigen::Index n = x.cols();
  Mat<Scalar> xhat(x.rows(), n);
  Vec<Scalar> inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = x.row(i).mean();
    const RowVec<Scalar> centered = (x.row(i).array() - mu).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
    inv_std(i) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kNormEps));
    xhat.row(i) = centered * inv_std(i);
  }
  Mat<Scalar> y = (xhat.array().rowwise() * row(p, r.gain, r.dim).array()).matrix();
  y.rowwise() += row(p, r.bias, r.dim);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> layer_norm_backward(const NormCache<Scalar>& c, const Mat<Scalar>& dy,
                                const Scalar* p, Scalar* g, const NormRef& r) {
  row(g, r.gain, r.dim) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  row(g, r.bias, r.dim) += dy.colwise().sum();
  const Mat<Scalar> dxhat = (dy.array().rowwise() * row(p, r.gain, r.dim).array()).matrix();
  const Scalar n = static_cast<Scalar>(dy.cols());
  Mat<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar sum = dxhat.row(i).sum();
    const Scalar dot = dxhat.row(i).dot(c.xhat.row(i));
    dx.row(i) = (c.inv_std(i) / n) *
                (n * dxhat.row(i).array() - sum - c.xhat.row(i).array() * dot).matrix();
  }
  return dx;
}

template <typename Scalar>
struct AttentionCache {
  Mat<Scalar> xq, xkv, q, k, v, o;
  std::vector<Mat<Scalar>> probs;
};

/// Multi-head scaled dot-product attention of queries from xq over xkv.
template <typename Scalar>
Mat<Scalar> attention(const Mat<Scalar>& xq, const Mat<Scalar>& xkv, bool causal, int heads,
                      const Scalar* p, const AttentionRef& r, AttentionCache<Scalar>* cache) {
  const Mat<Scalar> q = linear(xq, p, r.q);
  const Mat<Scalar> k = linear(xkv, p, r.k);
  const Mat<Scalar> v = linear(xkv, p, r.v);
  const Eigen::Index dk = q.cols() / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
  Mat<Scalar> o(q.rows(), q.cols());
  std::vector<Mat<Scalar>> probs;
  for (int h = 0; h < heads; ++h) {
    Mat<Scalar> s = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) * scale;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const Eigen::Index visible = causal ? std::min<Eigen::Index>(i + 1, s.cols()) : s.cols();
      const Scalar mx = s.row(i).head(visible).maxCoeff();
      s.row(i).head(visible).array() = (s.row(i).head(visible).array() - mx).exp();
      s.row(i).head(visible) /= s.row(i).head(visible).sum();
      if (visible < s.cols()) s.row(i).tail(s.cols() - visible).setZero();
    }
    o.middleCols(h * dk, dk).noalias() = s * v.middleCols(h * dk, dk);
    if (cache) probs.push_back(std::move(s));
  }
  Mat<Scalar> y = linear(o, p, r.o);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->o = std::move(o);
    cache->probs = std::move(probs);
  }
  return y;
}

// Returns d(xq); adds d(xkv) into dxkv.
template <typename Scalar>
Mat<Scalar> attention_backward(const AttentionCache<Scalar>& c, const Mat<Scalar>& dy, int heads,
                               const Scalar* p, Scalar* g, const AttentionRef& r,
                               Mat<Scalar>& dxkv) {
  const Mat<Scalar> d_o = linear_backward(c.o, dy, p, g, r.o);
  const Eigen::Index dk = c.q.cols() / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
  Mat<Scalar> dq(c.q.rows(), c.q.cols());
  Mat<Scalar> dk_all(c.k.rows(), c.k.cols());
  Mat<Scalar> dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const auto& pr = c.probs[static_cast<std::size_t>(h)];
    const auto doh = d_o.middleCols(h * dk, dk);
    const Mat<Scalar> dp = doh * c.v.middleCols(h * dk, dk).transpose();
    dv.middleCols(h * dk, dk).noalias() = pr.transpose() * doh;
    const Vec<Scalar> rowdot = (dp.array() * pr.array()).rowwise().sum();
    const Mat<Scalar> ds = (pr.array() * (dp.colwise() - rowdot).array()).matrix() * scale;
    dq.middleCols(h * dk, dk).noalias() = ds * c.k.middleCols(h * dk, dk);
    dk_all.middleCols(h * dk, dk).noalias() = ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  dxkv += linear_backward(c.xkv, dk_all, p, g, r.k);
  dxkv += linear_backward(c.xkv, dv, p, g, r.v);
  return linear_backward(c.xq, dq, p, g, r.q);
}

template <typename Scalar>
struct FeedForwardCache {
  Mat<Scalar> x, pre, hidden;
};

template <typename Scalar>
Mat<Scalar> feed_forward(const Mat<Scalar>& x, const Scalar* p, const FeedForwardRef& r,
                         FeedForwardCache<Scalar>* cache) {
  Mat<Scalar> pre = linear(x, p, r.in);
  Mat<Scalar> hidden = pre.cwiseMax(Scalar(0));
  Mat<Scalar> y = linear(hidden, p, r.out);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> feed_forward_backward(const FeedForwardCache<Scalar>& c, const Mat<Scalar>& dy,
                                  const Scalar* p, Scalar* g, const FeedForwardRef& r) {
  Mat<Scalar> dh = linear_backward(c.hidden, dy, p, g, r.out);
  dh.array() *= (c.pre.array() > Scalar(0)).template cast<Scalar>();
  return linear_backward(c.x, dh, p, g, r.in);
}

/// Inverted dropout. An empty mask is the identity (evaluation mode).
template <typename Scalar>
struct DropMask {
  Mat<Scalar> mask;

  Mat<Scalar> apply(Mat<Scalar> x) const {
    if (mask.size() != 0) x.array() *= mask.array();
    return x;
  }
};

template <typename Scalar>
DropMask<Scalar> make_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  DropMask<Scalar> m;
  if (!rng || rate <= 0.0) return m;
  m.mask.resize(rows, cols);
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  // Column-major fill order; part of the reproducibility contract.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m.mask(i, j) = rng->uniform() < rate ? Scalar(0) : keep;
    }
  }
  return m;
}

template <typename Scalar>
Mat<Scalar> positional_encoding(Eigen::Index length, Eigen::Index d) {
  Mat<Scalar> pe(length, d);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) /
                                                static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = static_cast<Scalar>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

/// Mean cross-entropy over target positions that are not `pad`. Writes
/// d(loss)/d(logits) * scale into dlogits when given. Returns the summed
/// (unnormalised) loss; `count` receives the number of scored positions.
template <typename Scalar>
Scalar cross_entropy_sum(const Mat<Scalar>& logits, std::span<const int> target, int pad,
                         std::size_t& count, Mat<Scalar>* dlogits, Scalar scale) {
  if (static_cast<std::size_t>(logits.rows()) != target.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "logits have " + std::to_string(logits.rows()) + " rows, target has " +
                    std::to_string(target.size()));
  }
  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  Scalar total = 0;
  count = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = target[static_cast<std::size_t>(i)];
    if (t == pad) continue;
    if (t < 0 || t >= logits.cols()) {
      throw Error(ErrorKind::IndexOutOfRange, "target unit " + std::to_string(t));
    }
    const Scalar mx = logits.row(i).maxCoeff();
    const RowVec<Scalar> e = (logits.row(i).array() - mx).exp();
    const Scalar z = e.sum();
    total += std::log(z) + mx - logits(i, t);
    ++count;
    if (dlogits) {
      dlogits->row(i) = e / z * scale;
      (*dlogits)(i, t) -= scale;
    }
  }
  return total;
}

}  // namespace nn

struct LossValue {
  double value = 0.0;
  std::size_t tokens = 0;
  bool all_padding = false;  // value is 0 by convention
};

/// Mean token cross-entropy of logits against target, skipping `pad`.
template <typename Scalar>
LossValue loss(const nn::Mat<Scalar>& logits, std::span<const int> target, int pad = 0) {
  LossValue out;
  const Scalar sum = nn::cross_entropy_sum<Scalar>(logits, target, pad, out.tokens, nullptr, 1);
  out.all_padding = out.tokens == 0;
  out.value = out.tokens ? static_cast<double>(sum) / static_cast<double>(out.tokens) : 0.0;
  return out;
}

/// Pre-norm encoder-decoder Transformer over a flat parameter vector.
template <typename Scalar>
class Transformer {
 public:
  using Mat = nn::Mat<Scalar>;
  using Vec = nn::Vec<Scalar>;

  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  explicit Transformer(const ModelConfig& config) : config_(config) {
    config_.validate();
    const Eigen::Index d = config_.d_model;
    if (config_.source == SourceKind::Tokens) {
      src_embed_ = layout_.add("src.embed", config_.source_vocab, d);
    } else {
      src_proj_ = nn::add_linear(layout_, "src.proj", config_.feature_dim, d);
    }
    tgt_embed_ = layout_.add("tgt.embed", config_.target_vocab, d);
    for (int l = 0; l < config_.encoder_layers; ++l) {
      const std::string n = "enc." + std::to_string(l);
      nn::EncoderLayerRef r;
      r.ln1 = nn::add_norm(layout_, n + ".ln1", d);
      r.attn = nn::add_attention(layout_, n + ".attn", d);
      r.ln2 = nn::add_norm(layout_, n + ".ln2", d);
      r.ff = {nn::add_linear(layout_, n + ".ff1", d, config_.d_ff),
              nn::add_linear(layout_, n + ".ff2", config_.d_ff, d)};
      enc_.push_back(r);
    }
    enc_norm_ = nn::add_norm(layout_, "enc.norm", d);
    for (int l = 0; l < config_.decoder_layers; ++l) {
      const std::string n = "dec." + std::to_string(l);
      nn::DecoderLayerRef r;
      r.ln1 = nn::add_norm(layout_, n + ".ln1", d);
      r.self_attn = nn::add_attention(layout_, n + ".self", d);
      r.ln2 = nn::add_norm(layout_, n + ".ln2", d);
      r.cross_attn = nn::add_attention(layout_, n + ".cross", d);
      r.ln3 = nn::add_norm(layout_, n + ".ln3", d);
      r.ff = {nn::add_linear(layout_, n + ".ff1", d, config_.d_ff),
              nn::add_linear(layout_, n + ".ff2", config_.d_ff, d)};
      dec_.push_back(r);
    }
    dec_norm_ = nn::add_norm(layout_, "dec.norm", d);
    out_ = nn::add_linear(layout_, "out", d, config_.target_vocab);
    params_ = Vec::Zero(static_cast<Eigen::Index>(layout_.size()));
  }

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  /// Weights and embeddings uniform in +-1/sqrt(fan_in), biases zero,
  /// normalisation gains one.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& b : layout_.blocks()) {
      auto block = params_.segment(static_cast<Eigen::Index>(b.offset), b.rows * b.cols);
      const bool is_gain = b.name.ends_with(".gain");
      const bool is_bias = b.name.ends_with(".b") || b.name.ends_with(".bias");
      if (is_gain) {
        block.setOnes();
      } else if (is_bias) {
        block.setZero();
      } else {
        const Eigen::Index fan_in = b.name.find("embed") != std::string::npos ? b.cols : b.rows;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < block.size(); ++i) {
          block(i) = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
      }
    }
  }

  /// Per-example activations kept for the backward pass.
  struct Tape {
    Source source;
    nn::DropMask<Scalar> src_drop;
    struct Enc {
      nn::NormCache<Scalar> ln1, ln2;
      nn::AttentionCache<Scalar> attn;
      nn::FeedForwardCache<Scalar> ff;
      nn::DropMask<Scalar> d1, d2;
    };
    struct Dec {
      nn::NormCache<Scalar> ln1, ln2, ln3;
      nn::AttentionCache<Scalar> self_attn, cross_attn;
      nn::FeedForwardCache<Scalar> ff;
      nn::DropMask<Scalar> d1, d2, d3;
    };
    std::vector<Enc> enc;
    nn::NormCache<Scalar> enc_norm;
    Mat memory;
    std::vector<int> prefix;
    nn::DropMask<Scalar> tgt_drop;
    std::vector<Dec> dec;
    nn::NormCache<Scalar> dec_norm;
    Mat dec_out;
  };

  Mat encode(const Source& src, Tape* tape = nullptr, Rng* dropout_rng = nullptr) const {
    const Scalar* p = params_.data();
    const Eigen::Index d = config_.d_model;
    Mat x;
    if (config_.source == SourceKind::Tokens) {
      if (src.tokens.empty()) throw Error(ErrorKind::ShapeMismatch, "empty source sequence");
      x.resize(static_cast<Eigen::Index>(src.tokens.size()), d);
      const Eigen::Map<const nn::RowMajorMat<Scalar>> table(p + src_embed_, config_.source_vocab, d);
      for (std::size_t i = 0; i < src.tokens.size(); ++i) {
        const int t = src.tokens[i];
        if (t < 0 || t >= config_.source_vocab) {
          throw Error(ErrorKind::ShapeMismatch, "source token " + std::to_string(t) +
                                                    " outside alphabet of " +
                                                    std::to_string(config_.source_vocab));
        }
        x.row(static_cast<Eigen::Index>(i)) = table.row(t) * embed_scale();
      }
    } else {
      if (src.features.cols() != config_.feature_dim || src.features.rows() == 0) {
        throw Error(ErrorKind::ShapeMismatch,
                    "feature matrix must be frames x " + std::to_string(config_.feature_dim));
      }
      x = nn::linear<Scalar>(src.features.template cast<Scalar>(), p, src_proj_);
    }
    x += nn::positional_encoding<Scalar>(x.rows(), d);
    const auto drop = nn::make_mask<Scalar>(x.rows(), x.cols(), config_.dropout, dropout_rng);
    x = drop.apply(std::move(x));
    if (tape) {
      tape->source = src;
      tape->src_drop = drop;
      tape->enc.resize(enc_.size());
    }
    for (std::size_t l = 0; l < enc_.size(); ++l) {
      const auto& r = enc_[l];
      auto* c = tape ? &tape->enc[l] : nullptr;
      const Mat a = nn::layer_norm(x, p, r.ln1, c ? &c->ln1 : nullptr);
      auto d1 = nn::make_mask<Scalar>(x.rows(), x.cols(), config_.dropout, dropout_rng);
      x += d1.apply(nn::attention(a, a, false, config_.heads, p, r.attn, c ? &c->attn : nullptr));
      const Mat b = nn::layer_norm(x, p, r.ln2, c ? &c->ln2 : nullptr);
      auto d2 = nn::make_mask<Scalar>(x.rows(), x.cols(), config_.dropout, dropout_rng);
      x += d2.apply(nn::feed_forward(b, p, r.ff, c ? &c->ff : nullptr));
      if (c) {
        c->d1 = std::move(d1);
        c->d2 = std::move(d2);
      }
    }
    Mat memory = nn::layer_norm(x, p, enc_norm_, tape ? &tape->enc_norm : nullptr);
    if (tape) tape->memory = memory;
    return memory;
  }

  /// Logits (prefix length x target vocabulary) for a decoder input that
  /// starts with BOS.
  Mat decode(const Mat& memory, std::span<const int> prefix, Tape* tape = nullptr,
             Rng* dropout_rng = nullptr) const {
    const Scalar* p = params_.data();
    const Eigen::Index d = config_.d_model;
    if (prefix.empty()) throw Error(ErrorKind::ShapeMismatch, "empty decoder input");
    if (memory.cols() != d) throw Error(ErrorKind::ShapeMismatch, "memory width mismatch");
    Mat y(static_cast<Eigen::Index>(prefix.size()), d);
    const Eigen::Map<const nn::RowMajorMat<Scalar>> table(p + tgt_embed_, config_.target_vocab, d);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      const int t = prefix[i];
      if (t < 0 || t >= config_.target_vocab) {
        throw Error(ErrorKind::ShapeMismatch, "target unit " + std::to_string(t) +
                                                  " outside vocabulary of " +
                                                  std::to_string(config_.target_vocab));
      }
      y.row(static_cast<Eigen::Index>(i)) = table.row(t) * embed_scale();
    }
    y += nn::positional_encoding<Scalar>(y.rows(), d);
    const auto drop = nn::make_mask<Scalar>(y.rows(), y.cols(), config_.dropout, dropout_rng);
    y = drop.apply(std::move(y));
    if (tape) {
      tape->prefix.assign(prefix.begin(), prefix.end());
      tape->tgt_drop = drop;
      tape->dec.resize(dec_.size());
    }
    for (std::size_t l = 0; l < dec_.size(); ++l) {
      const auto& r = dec_[l];
      auto* c = tape ? &tape->dec[l] : nullptr;
      const Mat a = nn::layer_norm(y, p, r.ln1, c ? &c->ln1 : nullptr);
      auto d1 = nn::make_mask<Scalar>(y.rows(), y.cols(), config_.dropout, dropout_rng);
      y += d1.apply(
          nn::attention(a, a, true, config_.heads, p, r.self_attn, c ? &c->self_attn : nullptr));
      const Mat b = nn::layer_norm(y, p, r.ln2, c ? &c->ln2 : nullptr);
      auto d2 = nn::make_mask<Scalar>(y.rows(), y.cols(), config_.dropout, dropout_rng);
      y += d2.apply(nn::attention(b, memory, false, config_.heads, p, r.cross_attn,
                                  c ? &c->cross_attn : nullptr));
      const Mat e = nn::layer_norm(y, p, r.ln3, c ? &c->ln3 : nullptr);
      auto d3 = nn::make_mask<Scalar>(y.rows(), y.cols(), config_.dropout, dropout_rng);
      y += d3.apply(nn::feed_forward(e, p, r.ff, c ? &c->ff : nullptr));
      if (c) {
        c->d1 = std::move(d1);
        c->d2 = std::move(d2);
        c->d3 = std::move(d3);
      }
    }
    Mat h = nn::layer_norm(y, p, dec_norm_, tape ? &tape->dec_norm : nullptr);
    Mat logits = nn::linear(h, p, out_);
    if (tape) tape->dec_out = std::move(h);
    return logits;
  }

  Mat forward(const Source& src, std::span<const int> prefix) const {
    return decode(encode(src), prefix);
  }

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(logits).
  void backward(const Tape& t, const Mat& dlogits, Vec& grad) const {
    const Scalar* p = params_.data();
    Scalar* g = grad.data();
    const Eigen::Index d = config_.d_model;

    Mat dy = nn::linear_backward(t.dec_out, dlogits, p, g, out_);
    dy = nn::layer_norm_backward(t.dec_norm, dy, p, g, dec_norm_);
    Mat dmem = Mat::Zero(t.memory.rows(), d);
    for (std::size_t l = dec_.size(); l-- > 0;) {
      const auto& r = dec_[l];
      const auto& c = t.dec[l];
      dy += nn::layer_norm_backward(
          c.ln3, nn::feed_forward_backward(c.ff, c.d3.apply(dy), p, g, r.ff), p, g, r.ln3);
      dy += nn::layer_norm_backward(
          c.ln2,
          nn::attention_backward(c.cross_attn, c.d2.apply(dy), config_.heads, p, g, r.cross_attn,
                                 dmem),
          p, g, r.ln2);
      Mat dself_kv = Mat::Zero(dy.rows(), d);
      Mat dself_q =
          nn::attention_backward(c.self_attn, c.d1.apply(dy), config_.heads, p, g, r.self_attn,
                                 dself_kv);
      dy += nn::layer_norm_backward(c.ln1, Mat(dself_q + dself_kv), p, g, r.ln1);
    }
    dy = t.tgt_drop.apply(std::move(dy));
    {
      Eigen::Map<nn::RowMajorMat<Scalar>> gtable(g + tgt_embed_, config_.target_vocab, d);
      for (std::size_t i = 0; i < t.prefix.size(); ++i) {
        gtable.row(t.prefix[i]) += dy.row(static_cast<Eigen::Index>(i)) * embed_scale();
      }
    }

    Mat dx = nn::layer_norm_backward(t.enc_norm, dmem, p, g, enc_norm_);
    for (std::size_t l = enc_.size(); l-- > 0;) {
      const auto& r = enc_[l];
      const auto& c = t.enc[l];
      dx += nn::layer_norm_backward(
          c.ln2, nn::feed_forward_backward(c.ff, c.d2.apply(dx), p, g, r.ff), p, g, r.ln2);
      Mat dkv = Mat::Zero(dx.rows(), d);
      Mat dq = nn::attention_backward(c.attn, c.d1.apply(dx), config_.heads, p, g, r.attn, dkv);
      dx += nn::layer_norm_backward(c.ln1, Mat(dq + dkv), p, g, r.ln1);
    }
    dx = t.src_drop.apply(std::move(dx));
    if (config_.source == SourceKind::Tokens) {
      Eigen::Map<nn::RowMajorMat<Scalar>> gtable(g + src_embed_, config_.source_vocab, d);
      for (std::size_t i = 0; i < t.source.tokens.size(); ++i) {
        gtable.row(t.source.tokens[i]) += dx.row(static_cast<Eigen::Index>(i)) * embed_scale();
      }
    } else {
      nn::linear_backward<Scalar>(t.source.features.template cast<Scalar>(), dx, p, g, src_proj_);
    }
  }

  /// Teacher-forced example: decoder input BOS + target, expected output
  /// target + EOS. Adds scale * d(sum CE)/d(params) into grad and returns
  /// the summed cross-entropy; `tokens` receives the scored positions.
  Scalar accumulate_gradient(const Source& src, std::span<const int> target, Scalar scale,
                             Vec& grad, std::size_t& tokens, Rng* dropout_rng = nullptr) const {
    std::vector<int> input{kBos};
    input.insert(input.end(), target.begin(), target.end());
    std::vector<int> expected(target.begin(), target.end());
    expected.push_back(kEos);
    Tape tape;
    const Mat memory = encode(src, &tape, dropout_rng);
    const Mat logits = decode(memory, input, &tape, dropout_rng);
    Mat dlogits;
    const Scalar sum =
        nn::cross_entropy_sum<Scalar>(logits, expected, kPad, tokens, &dlogits, scale);
    backward(tape, dlogits, grad);
    return sum;
  }

  /// Summed teacher-forced cross-entropy without gradients.
  Scalar example_loss(const Source& src, std::span<const int> target, std::size_t& tokens) const {
    std::vector<int> input{kBos};
    input.insert(input.end(), target.begin(), target.end());
    std::vector<int> expected(target.begin(), target.end());
    expected.push_back(kEos);
    const Mat logits = forward(src, input);
    return nn::cross_entropy_sum<Scalar>(logits, expected, kPad, tokens, nullptr, 1);
  }

  struct Decoded {
    std::vector<int> units;  // without BOS/EOS
    bool truncated = false;
  };

  /// Argmax decoding from BOS until EOS or max_len units.
  Decoded greedy(const Source& src, std::size_t max_len) const {
    const Mat memory = encode(src);
    std::vector<int> prefix{kBos};
    Decoded out;
    while (true) {
      if (out.units.size() >= max_len) {
        out.truncated = true;
        break;
      }
      const Mat logits = decode(memory, prefix);
      Eigen::Index best;
      logits.row(logits.rows() - 1).maxCoeff(&best);
      const int unit = static_cast<int>(best);
      if (unit == kEos) break;
      out.units.push_back(unit);
      prefix.push_back(unit);
    }
    return out;
  }

  const nn::LinearRef& output_layer() const { return out_; }

 private:
  Scalar embed_scale() const { return std::sqrt(static_cast<Scalar>(config_.d_model)); }

  ModelConfig config_;
  ParamLayout layout_;
  std::size_t src_embed_ = 0;
  nn::LinearRef src_proj_;
  std::size_t tgt_embed_ = 0;
  std::vector<nn::EncoderLayerRef> enc_;
  nn::NormRef enc_norm_;
  std::vector<nn::DecoderLayerRef> dec_;
  nn::NormRef dec_norm_;
  nn::LinearRef out_;
  Vec params_;
};

}  // namespace phonrec

namespace phonrec {

/// A source with its target unit sequence (no BOS/EOS).
struct Example {
  std::string id;
  Source source;
  std::vector<int> target;
};

template <typename Scalar>
struct BatchGradient {
  double loss = 0.0;  // mean token cross-entropy over the batch
  std::size_t tokens = 0;
  nn::Vec<Scalar> gradient;
};

/// Gradient of the batch's mean token cross-entropy, without dropout.
template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const Transformer<Scalar>& model,
                                     std::span<const Example> batch) {
  BatchGradient<Scalar> out;
  out.gradient = nn::Vec<Scalar>::Zero(model.parameters().size());
  for (const auto& ex : batch) out.tokens += ex.target.size() + 1;
  if (out.tokens == 0) return out;
  const Scalar scale = Scalar(1) / static_cast<Scalar>(out.tokens);
  Scalar sum = 0;
  for (const auto& ex : batch) {
    std::size_t n = 0;
    sum += model.accumulate_gradient(ex.source, ex.target, scale, out.gradient, n);
  }
  out.loss = static_cast<double>(sum) / static_cast<double>(out.tokens);
  if (!out.gradient.allFinite()) {
    throw Error(ErrorKind::NonFiniteGradient, "gradient has non-finite entries");
  }
  return out;
}

/// Mean token cross-entropy of the batch, without dropout.
template <typename Scalar>
double batch_loss(const Transformer<Scalar>& model, std::span<const Example> batch) {
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    std::size_t n = 0;
    sum += static_cast<double>(model.example_loss(ex.source, ex.target, n));
    tokens += n;
  }
  return tokens ? sum / static_cast<double>(tokens) : 0.0;
}

}  // namespace phonrec
