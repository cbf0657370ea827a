#include "scott/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scott/config.hpp"
#include "scott/errors.hpp"

namespace scott {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'C', 'O', 'T', 'T', 'C', 'K', 'P'};

class Writer {
 public:
  template <typename U>
  void pod(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(U));
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename U>
  U pod() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t Checkpoint::config_digest() const { return fnv1a64(config_text); }

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

NamedTensors<float> Checkpoint::group(const std::string& prefix) const {
  NamedTensors<float> out;
  for (const auto& [n, t] : tensors)
    if (n.rfind(prefix, 0) == 0) out.emplace_back(n.substr(prefix.size()), t);
  return out;
}

void Checkpoint::add_group(const std::string& prefix, const NamedTensors<float>& named) {
  for (const auto& [n, t] : named) tensors.emplace_back(prefix + n, t);
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod(ckpt.config_digest());
  w.str(ckpt.config_text);
  w.pod(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.pod(std::uint8_t{0});
    w.pod(static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) w.pod(static_cast<std::uint64_t>(e));
    w.bytes(t.data().data(), t.data().size_bytes());
  }
  const auto sum = fnv1a64(w.buffer());
  w.pod(sum);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError("short write on '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.size() < sizeof kMagic + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint (bad magic)");
  const std::string_view body(data.data(), data.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + data.size() - 8, 8);
  if (fnv1a64(body) != stored) throw CheckpointError("checkpoint checksum mismatch in '" + path.string() + "'");

  Reader r(body);
  char magic[8];
  r.bytes(magic, 8);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto digest = r.pod<std::uint64_t>();
  Checkpoint ck;
  ck.config_text = r.str();
  if (fnv1a64(ck.config_text) != digest) throw CheckpointError("checkpoint config digest mismatch");
  const auto nmeta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto k = r.str();
    ck.meta[k] = r.str();
  }
  const auto ntens = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < ntens; ++i) {
    auto name = r.str();
    const auto dtype = r.pod<std::uint8_t>();
    const auto ndim = r.pod<std::uint8_t>();
    Shape shape;
    std::uint64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      const auto e = r.pod<std::uint64_t>();
      shape.push_back(static_cast<std::int64_t>(e));
      count *= e;
    }
    if (count > data.size()) throw CheckpointError("tensor '" + name + "' is larger than the file");
    std::vector<float> values(count);
    if (dtype == 0) {
      r.bytes(values.data(), count * sizeof(float));
    } else if (dtype == 1) {
      std::vector<double> tmp(count);
      r.bytes(tmp.data(), count * sizeof(double));
      for (std::size_t j = 0; j < count; ++j) values[j] = static_cast<float>(tmp[j]);
    } else {
      throw CheckpointError("unknown dtype tag " + std::to_string(dtype) + " for '" + name + "'");
    }
    ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (r.pos() != body.size()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace scott
