#include "ash/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ash/rng.hpp"

namespace ash {

namespace {

constexpr char kMagic[] = "ASHCKPT1";

void put_u32(std::string& out, uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta_.emplace_back(key, value);
}

std::optional<std::string> Checkpoint::get_meta(const std::string& key) const {
  for (const auto& kv : meta_)
    if (kv.first == key) return kv.second;
  return std::nullopt;
}

void Checkpoint::add(const std::string& name, const Tensor& t) {
  for (const auto& kv : tensors_) {
    if (kv.first == name) throw std::invalid_argument("checkpoint: duplicate tensor name " + name);
  }
  tensors_.emplace_back(name, t.detach());
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& kv : tensors_)
    if (kv.first == name) return &kv.second;
  return nullptr;
}

std::string Checkpoint::serialize() const {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, static_cast<uint32_t>(meta_.size()));
  for (const auto& kv : meta_) {
    put_str(out, kv.first);
    put_str(out, kv.second);
  }
  put_u32(out, static_cast<uint32_t>(tensors_.size()));
  for (const auto& kv : tensors_) {
    put_str(out, kv.first);
    const Shape& shape = kv.second.shape();
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (int d : shape) {
      int32_t v = d;
      out.append(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    const auto& data = kv.second.values();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  return out;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
  const std::string bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r{bytes};
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic (not an ASHCKPT1 file)");
  }
  r.pos = 8;
  Checkpoint ckpt;
  const uint32_t nmeta = r.u32();
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    ckpt.meta_.emplace_back(std::move(k), std::move(v));
  }
  const uint32_t ntensors = r.u32();
  for (uint32_t i = 0; i < ntensors; ++i) {
    std::string name = r.str();
    const uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) {
      r.need(4);
      int32_t v;
      std::memcpy(&v, bytes.data() + r.pos, 4);
      r.pos += 4;
      shape[d] = v;
    }
    const size_t count = static_cast<size_t>(shape_numel(shape));
    r.need(count * sizeof(double));
    std::vector<double> data(count);
    std::memcpy(data.data(), bytes.data() + r.pos, count * sizeof(double));
    r.pos += count * sizeof(double);
    ckpt.tensors_.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

uint64_t Checkpoint::digest() const { return fnv1a64(serialize()); }

void checkpoint_add_params(Checkpoint& ckpt, const std::vector<NamedParam>& params) {
  for (const auto& p : params) ckpt.add(p.name, p.tensor);
}

void checkpoint_load_params(const Checkpoint& ckpt, std::vector<NamedParam>& params) {
  for (auto& p : params) {
    const Tensor* stored = ckpt.find(p.name);
    if (!stored) throw std::runtime_error("checkpoint: missing tensor " + p.name);
    check_same_shape("checkpoint_load_params", p.tensor, *stored);
    p.tensor.raw() = stored->values();
  }
}

}  // namespace ash
