#include "amn/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "amn/errors.hpp"

namespace amn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian hosts");

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string config_block(const Checkpoint& c) {
  std::ostringstream s;
  const ModelConfig& m = c.config;
  s << "size=" << m.size << "\n"
    << "depth=" << m.depth << "\n"
    << "memories=" << m.memories << "\n"
    << "dropout=" << format_double(m.dropout) << "\n"
    << "vocab_size=" << m.vocab_size << "\n"
    << "max_sentence_len=" << m.max_sentence_len << "\n"
    << "max_question_len=" << m.max_question_len << "\n"
    << "max_story_len=" << m.max_story_len << "\n"
    << "max_answer_len=" << m.max_answer_len << "\n"
    << "seed=" << m.seed << "\n";
  for (const auto& [k, v] : c.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw FormatError("checkpoint metadata key/value contains a separator: " + k);
    }
    s << "meta." << k << "=" << v << "\n";
  }
  s << "vocab=";
  for (std::size_t i = 0; i < c.vocab.size(); ++i) s << (i ? " " : "") << c.vocab[i];
  s << "\n";
  return s.str();
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw FormatError("checkpoint config '" + key + "' is not an unsigned integer");
  }
  return out;
}

void parse_config(const std::string& block, Checkpoint& c) {
  std::istringstream in(block);
  std::string line;
  bool have_vocab = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint config line without '='");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    ModelConfig& m = c.config;
    if (key == "size") m.size = parse_uint(key, val);
    else if (key == "depth") m.depth = parse_uint(key, val);
    else if (key == "memories") m.memories = parse_uint(key, val);
    else if (key == "dropout") {
      auto res = std::from_chars(val.data(), val.data() + val.size(), m.dropout);
      if (res.ec != std::errc()) throw FormatError("checkpoint config 'dropout' is not a number");
    } else if (key == "vocab_size") m.vocab_size = parse_uint(key, val);
    else if (key == "max_sentence_len") m.max_sentence_len = parse_uint(key, val);
    else if (key == "max_question_len") m.max_question_len = parse_uint(key, val);
    else if (key == "max_story_len") m.max_story_len = parse_uint(key, val);
    else if (key == "max_answer_len") m.max_answer_len = parse_uint(key, val);
    else if (key == "seed") m.seed = parse_uint(key, val);
    else if (key.rfind("meta.", 0) == 0) c.meta[key.substr(5)] = val;
    else if (key == "vocab") {
      have_vocab = true;
      std::istringstream toks(val);
      std::string t;
      while (toks >> t) c.vocab.push_back(t);
    } else {
      throw FormatError("unknown checkpoint config key '" + key + "'");
    }
  }
  if (!have_vocab) throw FormatError("checkpoint has no vocabulary");
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = "AMN1";
  put<std::uint16_t>(out, kCheckpointVersion);
  const std::string cfg = config_block(ckpt);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;

  const auto arrays = const_cast<ModelParams<float>&>(ckpt.params).named();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, 2);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->cols()));
    out.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(float));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4) != "AMN1") throw FormatError("not an AMN checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  parse_config(r.take(r.get<std::uint32_t>()), c);
  try {
    c.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (c.vocab.size() != c.config.vocab_size) throw FormatError("checkpoint vocabulary size disagrees with config");

  c.params = ModelParams<float>::zeros(c.config);
  auto expected = c.params.named();
  const auto count = r.get<std::uint32_t>();
  if (count != expected.size()) throw FormatError("checkpoint array count does not match its config");
  for (auto& [name, t] : expected) {
    const std::string got = r.take(r.get<std::uint16_t>());
    if (got != name) throw FormatError("checkpoint array '" + got + "' where '" + name + "' was expected");
    const auto rank = r.get<std::uint8_t>();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>();
    std::size_t rows = 1, cols = 1;
    if (rank == 1) {
      cols = dims[0];
    } else if (rank == 2) {
      rows = dims[0];
      cols = dims[1];
    } else {
      throw FormatError("checkpoint array '" + name + "' has unsupported rank " + std::to_string(rank));
    }
    if (rows != t->rows() || cols != t->cols()) {
      throw FormatError("checkpoint array '" + name + "' has shape " + Tensor<float>::shape_string(rows, cols) +
                        ", expected " + t->shape_str());
    }
    const std::string payload = r.take(t->size() * sizeof(float));
    std::memcpy(t->data(), payload.data(), payload.size());
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint arrays");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace amn
