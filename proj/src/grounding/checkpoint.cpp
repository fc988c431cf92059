#include "vdgpt/grounding/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace vdgpt::grounding {

namespace {

constexpr char kMagic[8] = {'V', 'D', 'G', 'P', 'T', 'C', 'K', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kIoError, "checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void add(std::vector<NamedTensor>& out, const std::string& name, const Eigen::MatrixXd& m) { out.push_back({name, m}); }

void add_attention(std::vector<NamedTensor>& out, const std::string& prefix, const AttentionParams<double>& p) {
  add(out, prefix + ".Wq", p.Wq);
  add(out, prefix + ".Wk", p.Wk);
  add(out, prefix + ".Wv", p.Wv);
  add(out, prefix + ".Wo", p.Wo);
}

}  // namespace

std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put_le<double>(out, t.value(r, c));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kIoError, "not a checkpoint file");
  }
  Reader r(bytes);
  r.get_string(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kIoError, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (std::uint64_t(rows) * cols * 8 > bytes.size()) throw Error(ErrorCode::kIoError, "checkpoint truncated");
    t.value.resize(rows, cols);
    for (std::uint32_t a = 0; a < rows; ++a)
      for (std::uint32_t b = 0; b < cols; ++b) t.value(a, b) = r.get<double>();
    out.push_back(std::move(t));
  }
  if (!r.done()) throw Error(ErrorCode::kIoError, "trailing bytes after checkpoint");
  return out;
}

void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = encode_checkpoint(tensors);
  if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw Error(ErrorCode::kIoError, "cannot write " + path);
  }
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

std::vector<NamedTensor> model_tensors(const ToyDenoiser<double>& model) {
  const ToyConfig& c = model.config();
  Eigen::MatrixXd cfg(1, 11);
  cfg << c.channels, c.height, c.width, c.mlp.embed, c.mlp.project, c.mlp.hidden, c.mlp.model, c.mlp.bands,
      c.data_sigma, c.train_steps, double(c.seed);
  std::vector<NamedTensor> out;
  add(out, "config", cfg);
  const auto& f = model.frozen();
  add(out, "frozen.W_in", f.W_in);
  add(out, "frozen.W_out", f.W_out);
  add(out, "frozen.P_ctx", f.P_ctx);
  add_attention(out, "frozen.self_attn", f.self_attn);
  add_attention(out, "frozen.cross_attn", f.cross_attn);
  const auto& t = model.trainable();
  add(out, "mlp.P_img", t.mlp.P_img);
  add(out, "mlp.P_text", t.mlp.P_text);
  add(out, "mlp.W1", t.mlp.W1);
  add(out, "mlp.b1", t.mlp.b1);
  add(out, "mlp.W2", t.mlp.W2);
  add(out, "mlp.b2", t.mlp.b2);
  add_attention(out, "gated", t.gated.attn);
  add(out, "gated.gamma", Eigen::MatrixXd::Constant(1, 1, t.gated.gamma));
  return out;
}

ToyDenoiser<double> model_from_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Eigen::MatrixXd*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  auto fetch = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) -> const Eigen::MatrixXd& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorCode::kShapeError, "checkpoint lacks tensor", name);
    if (it->second->rows() != rows || it->second->cols() != cols) {
      throw Error(ErrorCode::kShapeError, "tensor has the wrong shape", name);
    }
    return *it->second;
  };
  const Eigen::MatrixXd& cfg = fetch("config", 1, 11);
  ToyConfig c;
  c.channels = int(cfg(0, 0));
  c.height = int(cfg(0, 1));
  c.width = int(cfg(0, 2));
  c.mlp.embed = int(cfg(0, 3));
  c.mlp.project = int(cfg(0, 4));
  c.mlp.hidden = int(cfg(0, 5));
  c.mlp.model = int(cfg(0, 6));
  c.mlp.bands = int(cfg(0, 7));
  c.data_sigma = cfg(0, 8);
  c.train_steps = int(cfg(0, 9));
  c.seed = static_cast<std::uint64_t>(cfg(0, 10));
  ToyDenoiser<double> model(c);
  auto load = [&](Eigen::MatrixXd& dst, const std::string& name) { dst = fetch(name, dst.rows(), dst.cols()); };
  auto load_vec = [&](Eigen::VectorXd& dst, const std::string& name) { dst = fetch(name, dst.size(), 1); };
  auto load_attention = [&](AttentionParams<double>& p, const std::string& prefix) {
    load(p.Wq, prefix + ".Wq");
    load(p.Wk, prefix + ".Wk");
    load(p.Wv, prefix + ".Wv");
    load(p.Wo, prefix + ".Wo");
  };
  auto& f = model.frozen();
  load(f.W_in, "frozen.W_in");
  load(f.W_out, "frozen.W_out");
  load(f.P_ctx, "frozen.P_ctx");
  load_attention(f.self_attn, "frozen.self_attn");
  load_attention(f.cross_attn, "frozen.cross_attn");
  auto& t = model.trainable();
  load(t.mlp.P_img, "mlp.P_img");
  load(t.mlp.P_text, "mlp.P_text");
  load(t.mlp.W1, "mlp.W1");
  load_vec(t.mlp.b1, "mlp.b1");
  load(t.mlp.W2, "mlp.W2");
  load_vec(t.mlp.b2, "mlp.b2");
  load_attention(t.gated.attn, "gated");
  t.gated.gamma = fetch("gated.gamma", 1, 1)(0, 0);
  return model;
}

}  // namespace vdgpt::grounding
