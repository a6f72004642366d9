#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "phonrec/bleu.hpp"
#include "phonrec/corpus.hpp"
#include "phonrec/transformer.hpp"
#include "phonrec/vocab.hpp"

namespace phonrec {

using Model = Transformer<double>;

/// Character alphabet of the encoder input: `<pad>`, `<unk>`, then every
/// code point seen in the training texts in code point order.
class SourceAlphabet {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  SourceAlphabet() = default;
  explicit SourceAlphabet(std::vector<std::string> symbols);

  static SourceAlphabet build(const std::vector<std::string>& texts);

  std::vector<int> encode(std::string_view text) const;
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
};

std::string to_json(const ModelConfig& c);
ModelConfig model_config_from_json(std::string_view text);

/// Per-frame features: one frame per line, whitespace-separated reals.
Eigen::MatrixXd load_features(const std::filesystem::path& path);

struct Checkpoint {
  int epoch = 0;
  ModelConfig config;
  std::string variant;
  std::uint64_t vocab_fingerprint = 0;
  std::vector<std::string> source_alphabet;
  Eigen::VectorXd parameters;

  Model model() const;

  /// Binary: magic "PHONREC1", u32 header length, JSON header (config,
  /// variant, epoch, vocabulary fingerprint, alphabet, named shapes), u64
  /// parameter count, little-endian doubles in layout order.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // NaN without a validation split
};

struct TrainingTrace {
  std::vector<EpochLoss> epochs;

  // `epoch,train_loss,valid_loss` with shortest round-trip decimals.
  std::string to_csv() const;
};

struct TrainingData {
  std::vector<Example> train;
  std::vector<Example> valid;
  SourceAlphabet alphabet;
  std::string variant;
  std::uint64_t vocab_fingerprint = 0;
  int target_vocab = 0;
};

/// Tokenizes train/valid utterances under `vocab` and builds the source
/// side (character indices, or features read from feature_path).
TrainingData prepare_training_data(const CorpusManifest& m, const Vocabulary& vocab,
                                   SourceKind source = SourceKind::Tokens);

Source make_source(const Utterance& u, const SourceAlphabet& alphabet, SourceKind kind);

struct TrainOptions {
  bool keep_checkpoints = true;
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const EpochLoss&)> on_epoch;
};

struct TrainResult {
  TrainingTrace trace;
  std::vector<Checkpoint> checkpoints;
};

/// Adam with a constant learning rate, shuffled mini-batches, dropout and
/// global-norm clipping. Deterministic for a fixed config.seed. Throws
/// Error(NonFiniteLoss) naming the epoch and step.
TrainResult train(const TrainingData& data, ModelConfig config, const TrainOptions& options = {});

class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct DecodeResult {
  PhonemeSequence phonemes;  // flat atoms
  std::vector<int> units;
  bool truncated = false;
};

DecodeResult greedy_decode(const Model& model, const Source& source, const Vocabulary& vocab,
                           std::size_t max_target_len);

struct Prediction {
  const Utterance* utterance = nullptr;
  DecodeResult decoded;
};

/// Decodes every utterance of `split`. Throws Error(VocabMismatch) when the
/// checkpoint was trained with a different vocabulary.
std::vector<Prediction> predict(const Checkpoint& ckpt, const CorpusManifest& m,
                                const Vocabulary& vocab, Split split = Split::Test);

BleuReport evaluate_checkpoint(const Checkpoint& ckpt, const CorpusManifest& m,
                               const Vocabulary& vocab);

}  // namespace phonrec
