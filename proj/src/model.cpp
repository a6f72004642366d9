#include "phonrec/model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "phonrec/error.hpp"
#include "phonrec/random.hpp"
#include "phonrec/utf8.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace phonrec {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ShapeMismatch, msg); };
  if (d_model <= 0 || heads <= 0 || d_ff <= 0) fail("model dimensions must be positive");
  if (d_model % heads != 0) fail("d_model must be divisible by heads");
  if (encoder_layers < 0 || decoder_layers < 0) fail("layer counts must be non-negative");
  if (epochs < 0 || checkpoint_interval <= 0) fail("bad epoch settings");
  if (epochs % checkpoint_interval != 0) fail("checkpoint_interval must divide epochs");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (target_vocab <= 0) fail("target_vocab must be positive");
  if (source == SourceKind::Tokens && source_vocab <= 0) fail("source_vocab must be positive");
  if (source == SourceKind::Features && feature_dim <= 0) fail("feature_dim must be positive");
}

SourceAlphabet::SourceAlphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {}

SourceAlphabet SourceAlphabet::build(const std::vector<std::string>& texts) {
  std::set<char32_t> chars;
  for (const auto& t : texts) {
    for (char32_t c : utf8::decode(t)) chars.insert(c);
  }
  std::vector<std::string> symbols{"<pad>", "<unk>"};
  for (char32_t c : chars) symbols.push_back(utf8::encode(c));
  return SourceAlphabet(std::move(symbols));
}

std::vector<int> SourceAlphabet::encode(std::string_view text) const {
  std::vector<int> out;
  for (char32_t c : utf8::decode(text)) {
    const std::string s = utf8::encode(c);
    const auto it = std::lower_bound(symbols_.begin() + 2, symbols_.end(), s);
    out.push_back(it != symbols_.end() && *it == s ? static_cast<int>(it - symbols_.begin())
                                                   : kUnk);
  }
  return out;
}

namespace {

nlohmann::ordered_json config_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"heads", c.heads},
          {"d_ff", c.d_ff},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"epochs", c.epochs},
          {"checkpoint_interval", c.checkpoint_interval},
          {"max_target_len", c.max_target_len},
          {"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"dropout", c.dropout},
          {"grad_clip", c.grad_clip},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"source", c.source == SourceKind::Tokens ? "tokens" : "features"},
          {"source_vocab", c.source_vocab},
          {"feature_dim", c.feature_dim},
          {"target_vocab", c.target_vocab}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.heads = j.at("heads");
  c.d_ff = j.at("d_ff");
  c.encoder_layers = j.at("encoder_layers");
  c.decoder_layers = j.at("decoder_layers");
  c.epochs = j.at("epochs");
  c.checkpoint_interval = j.at("checkpoint_interval");
  c.max_target_len = j.at("max_target_len");
  c.seed = j.at("seed");
  c.learning_rate = j.at("learning_rate");
  c.batch_size = j.at("batch_size");
  c.dropout = j.at("dropout");
  c.grad_clip = j.at("grad_clip");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_eps = j.at("adam_eps");
  c.source = j.at("source") == "tokens" ? SourceKind::Tokens : SourceKind::Features;
  c.source_vocab = j.at("source_vocab");
  c.feature_dim = j.at("feature_dim");
  c.target_vocab = j.at("target_vocab");
  return c;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

constexpr char kMagic[8] = {'P', 'H', 'O', 'N', 'R', 'E', 'C', '1'};

}  // namespace

std::string to_json(const ModelConfig& c) { return config_json(c).dump(2); }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("model config: ") + e.what());
  }
}

Eigen::MatrixXd load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open feature file " + path.string());
  std::vector<std::vector<double>> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (utf8::trim(line).empty()) continue;
    std::istringstream ss(line);
    std::vector<double> frame;
    double v;
    while (ss >> v) frame.push_back(v);
    if (!ss.eof()) throw Error(ErrorKind::ParseError, path.string() + ": bad number", line_no);
    if (!frames.empty() && frame.size() != frames.front().size()) {
      throw Error(ErrorKind::ParseError, path.string() + ": ragged frame", line_no);
    }
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) throw Error(ErrorKind::ParseError, path.string() + ": no frames");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames.size()),
                    static_cast<Eigen::Index>(frames.front().size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = 0; j < frames[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = frames[i][j];
    }
  }
  return m;
}

Model Checkpoint::model() const {
  Model m(config);
  if (m.parameters().size() != parameters.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "checkpoint has " + std::to_string(parameters.size()) +
                    " parameters, config implies " + std::to_string(m.parameters().size()));
  }
  m.parameters() = parameters;
  return m;
}

std::string Checkpoint::serialize() const {
  const Model m = model();
  nlohmann::ordered_json header;
  header["format_version"] = 1;
  header["epoch"] = epoch;
  header["variant"] = variant;
  header["vocab_fingerprint"] = vocab_fingerprint;
  header["config"] = config_json(config);
  header["source_alphabet"] = source_alphabet;
  auto shapes = nlohmann::ordered_json::array();
  for (const auto& b : m.layout().blocks()) shapes.push_back({b.name, b.rows, b.cols});
  header["shapes"] = std::move(shapes);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  const auto header_len = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out += text;
  const auto count = static_cast<std::uint64_t>(parameters.size());
  out.append(reinterpret_cast<const char*>(&count), sizeof count);
  out.append(reinterpret_cast<const char*>(parameters.data()),
             static_cast<std::size_t>(parameters.size()) * sizeof(double));
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  auto need = [&](std::size_t pos, std::size_t n) {
    if (pos + n > bytes.size()) throw Error(ErrorKind::ParseError, "truncated checkpoint");
  };
  need(0, sizeof kMagic + 4);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorKind::ParseError, "not a checkpoint file (bad magic)");
  }
  std::uint32_t header_len;
  std::memcpy(&header_len, bytes.data() + sizeof kMagic, sizeof header_len);
  std::size_t pos = sizeof kMagic + sizeof header_len;
  need(pos, header_len);
  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(pos, header_len));
    if (header.at("format_version") != 1) {
      throw Error(ErrorKind::ParseError, "unsupported checkpoint version");
    }
    c.epoch = header.at("epoch");
    c.variant = header.at("variant");
    c.vocab_fingerprint = header.at("vocab_fingerprint");
    c.config = config_from(header.at("config"));
    c.source_alphabet = header.at("source_alphabet").get<std::vector<std::string>>();
    const Model m(c.config);
    const auto& shapes = header.at("shapes");
    const auto& blocks = m.layout().blocks();
    if (shapes.size() != blocks.size()) {
      throw Error(ErrorKind::ShapeMismatch, "checkpoint layout does not match its config");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (shapes[i][0] != blocks[i].name || shapes[i][1] != blocks[i].rows ||
          shapes[i][2] != blocks[i].cols) {
        throw Error(ErrorKind::ShapeMismatch, "checkpoint block " + blocks[i].name +
                                                  " does not match its config");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;
  std::uint64_t count;
  need(pos, sizeof count);
  std::memcpy(&count, bytes.data() + pos, sizeof count);
  pos += sizeof count;
  need(pos, count * sizeof(double));
  c.parameters.resize(static_cast<Eigen::Index>(count));
  std::memcpy(c.parameters.data(), bytes.data() + pos, count * sizeof(double));
  if (pos + count * sizeof(double) != bytes.size()) {
    throw Error(ErrorKind::ParseError, "trailing bytes after checkpoint parameters");
  }
  c.model();  // validates the parameter count
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

std::string TrainingTrace::to_csv() const {
  std::string out = "epoch,train_loss,valid_loss\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
           format_double(e.valid_loss) + "\n";
  }
  return out;
}

Source make_source(const Utterance& u, const SourceAlphabet& alphabet, SourceKind kind) {
  Source s;
  if (kind == SourceKind::Tokens) {
    s.tokens = alphabet.encode(u.text);
  } else {
    if (u.feature_path.empty()) {
      throw Error(ErrorKind::Io, "utterance '" + u.id + "' has no feature_path");
    }
    s.features = load_features(u.feature_path);
  }
  return s;
}

TrainingData prepare_training_data(const CorpusManifest& m, const Vocabulary& vocab,
                                   SourceKind source) {
  TrainingData data;
  std::vector<std::string> texts;
  for (const auto* u : m.select(Split::Train)) texts.push_back(u->text);
  data.alphabet = SourceAlphabet::build(texts);
  data.variant = vocab.variant();
  data.vocab_fingerprint = vocab.fingerprint();
  data.target_vocab = static_cast<int>(vocab.size());
  auto build = [&](Split split, std::vector<Example>& out) {
    for (const auto* u : m.select(split)) {
      Example ex;
      ex.id = u->id;
      ex.source = make_source(*u, data.alphabet, source);
      try {
        ex.target = tokenize(u->phonemes, vocab);
      } catch (const Error& e) {
        throw Error(e.kind(), "utterance '" + u->id + "': " + e.message(), e.position());
      }
      out.push_back(std::move(ex));
    }
  };
  build(Split::Train, data.train);
  build(Split::Valid, data.valid);
  return data;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainResult train(const TrainingData& data, ModelConfig config, const TrainOptions& options) {
  if (data.train.empty()) throw Error(ErrorKind::EmptyCorpus, "no training examples");
  config.target_vocab = data.target_vocab;
  if (config.source == SourceKind::Tokens) {
    config.source_vocab = static_cast<int>(data.alphabet.size());
  } else {
    config.feature_dim = static_cast<int>(data.train.front().source.features.cols());
  }
  config.validate();

  Model model(config);
  model.initialize(config.seed);
  Adam adam(model.parameters().size(), config.learning_rate, config.adam_beta1,
            config.adam_beta2, config.adam_eps);
  Rng order_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  Rng dropout_rng(config.seed ^ 0xD1B54A32D192ED03ULL);
  Rng* drop = config.dropout > 0.0 ? &dropout_rng : nullptr;

  TrainResult result;
  Eigen::VectorXd grad(model.parameters().size());
  std::vector<std::size_t> order(data.train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      const std::size_t end = std::min(start + batch, order.size());
      std::size_t tokens = 0;
      for (std::size_t k = start; k < end; ++k) tokens += data.train[order[k]].target.size() + 1;
      grad.setZero();
      double sum = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data.train[order[k]];
        std::size_t n = 0;
        sum += model.accumulate_gradient(ex.source, ex.target, 1.0 / static_cast<double>(tokens),
                                         grad, n, drop);
      }
      if (!std::isfinite(sum)) {
        throw Error(ErrorKind::NonFiniteLoss, "non-finite loss at epoch " +
                                                  std::to_string(epoch) + ", step " +
                                                  std::to_string(step));
      }
      if (!grad.allFinite()) {
        throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient at epoch " +
                                                      std::to_string(epoch) + ", step " +
                                                      std::to_string(step));
      }
      if (config.grad_clip > 0.0) {
        const double norm = grad.norm();
        if (norm > config.grad_clip) grad *= config.grad_clip / norm;
      }
      adam.step(model.parameters(), grad);
      epoch_loss += sum;
      epoch_tokens += tokens;
    }

    EpochLoss e;
    e.epoch = epoch;
    e.train_loss = epoch_loss / static_cast<double>(epoch_tokens);
    e.valid_loss = data.valid.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : batch_loss(model, std::span<const Example>(data.valid));
    result.trace.epochs.push_back(e);
    if (options.on_epoch) options.on_epoch(e);

    if (epoch % config.checkpoint_interval == 0) {
      Checkpoint c;
      c.epoch = epoch;
      c.config = config;
      c.variant = data.variant;
      c.vocab_fingerprint = data.vocab_fingerprint;
      c.source_alphabet = data.alphabet.symbols();
      c.parameters = model.parameters();
      if (options.on_checkpoint) options.on_checkpoint(c);
      if (options.keep_checkpoints) result.checkpoints.push_back(std::move(c));
    }
  }
  return result;
}

DecodeResult greedy_decode(const Model& model, const Source& source, const Vocabulary& vocab,
                           std::size_t max_target_len) {
  if (static_cast<std::size_t>(model.config().target_vocab) != vocab.size()) {
    throw Error(ErrorKind::VocabMismatch, "model output size " +
                                              std::to_string(model.config().target_vocab) +
                                              " differs from vocabulary size " +
                                              std::to_string(vocab.size()));
  }
  const auto decoded = model.greedy(source, max_target_len);
  DecodeResult out;
  out.units = decoded.units;
  out.truncated = decoded.truncated;
  out.phonemes = detokenize(out.units, vocab);
  return out;
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const CorpusManifest& m,
                                const Vocabulary& vocab, Split split) {
  if (ckpt.variant != vocab.variant() || ckpt.vocab_fingerprint != vocab.fingerprint()) {
    throw Error(ErrorKind::VocabMismatch, "checkpoint was trained with vocabulary '" +
                                              ckpt.variant + "', got '" + vocab.variant() + "'");
  }
  const Model model = ckpt.model();
  const SourceAlphabet alphabet(ckpt.source_alphabet);
  std::vector<Prediction> out;
  for (const auto* u : m.select(split)) {
    Prediction p;
    p.utterance = u;
    p.decoded = greedy_decode(model, make_source(*u, alphabet, ckpt.config.source), vocab,
                              static_cast<std::size_t>(ckpt.config.max_target_len));
    out.push_back(std::move(p));
  }
  return out;
}

BleuReport evaluate_checkpoint(const Checkpoint& ckpt, const CorpusManifest& m,
                               const Vocabulary& vocab) {
  const auto predictions = predict(ckpt, m, vocab, Split::Test);
  std::vector<Sentence> hyps;
  std::vector<Sentence> refs;
  for (const auto& p : predictions) {
    hyps.push_back(p.decoded.phonemes.flat());
    refs.push_back(p.utterance->phonemes.flat());
  }
  BleuReport r = corpus_bleu(hyps, refs);
  r.variant = ckpt.variant;
  r.epoch = ckpt.epoch;
  return r;
}

}  // namespace phonrec
