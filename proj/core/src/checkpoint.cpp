// SPDX-License-Identifier: Apache-2.0
#include "lead/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lead/config.hpp"
#include "lead/error.hpp"

namespace lead::ckpt {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "LEADW I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::vector<char>& buf, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::kLength, where_ + ": archive is truncated");
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Parsed {
  model::ModelConfig config;
  std::vector<EntryInfo> entries;
  std::size_t payload_start = 0;
};

Parsed parse(const std::vector<char>& bytes, const std::string& where) {
  Reader r(bytes, where);
  const std::size_t head = std::min(bytes.size(), kMagic.size());
  if (std::string_view(bytes.data(), head) != kMagic.substr(0, head))
    fail(ErrorKind::kFormat, where + ": not a LEADW archive");
  r.str(kMagic.size());
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion)
    fail(ErrorKind::kVersion, where + ": unsupported LEADW version " + std::to_string(version));
  Parsed p;
  const auto meta_len = r.get<std::uint32_t>();
  p.config = config::model_config_from_json(r.str(meta_len));
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    EntryInfo e;
    e.name = r.str(r.get<std::uint16_t>());
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kDtypeF32) fail(ErrorKind::kFormat, where + ": unsupported dtype for " + e.name);
    const auto ndim = r.get<std::uint8_t>();
    for (std::uint8_t d = 0; d < ndim; ++d) e.dims.push_back(r.get<std::uint32_t>());
    e.offset = r.get<std::uint64_t>();
    p.entries.push_back(std::move(e));
  }
  p.payload_start = r.pos();
  return p;
}

}  // namespace

std::vector<char> serialize(const model::ModelConfig& cfg, const model::ParamStore& params) {
  std::vector<char> buf(kMagic.begin(), kMagic.end());
  put(buf, kVersion);
  const std::string meta = config::model_config_to_json(cfg);
  put(buf, static_cast<std::uint32_t>(meta.size()));
  buf.insert(buf.end(), meta.begin(), meta.end());
  put(buf, static_cast<std::uint32_t>(params.all().size()));
  std::uint64_t offset = 0;
  for (const auto& p : params.all()) {
    put(buf, static_cast<std::uint16_t>(p.name.size()));
    buf.insert(buf.end(), p.name.begin(), p.name.end());
    put(buf, kDtypeF32);
    put(buf, std::uint8_t{2});
    put(buf, static_cast<std::uint32_t>(p.var->value.rows()));
    put(buf, static_cast<std::uint32_t>(p.var->value.cols()));
    put(buf, offset);
    offset += static_cast<std::uint64_t>(p.var->value.size()) * sizeof(float);
  }
  for (const auto& p : params.all()) {
    if (!p.var->value.allFinite())
      fail(ErrorKind::kNumeric, "parameter '" + p.name + "' is not finite");
    const Matrix& m = p.var->value;
    for (Eigen::Index i = 0; i < m.size(); ++i) put(buf, static_cast<float>(m.data()[i]));
  }
  return buf;
}

void save(const model::ModelConfig& cfg, const model::ParamStore& params, const fs::path& path) {
  const auto bytes = serialize(cfg, params);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

void save(const model::Model& m, const fs::path& path) { save(m.config(), m.params(), path); }

std::vector<EntryInfo> read_index(const fs::path& path) {
  return parse(slurp(path), path.string()).entries;
}

Archive read(const fs::path& path) {
  const auto bytes = slurp(path);
  const Parsed p = parse(bytes, path.string());
  Archive a;
  a.config = p.config;
  const auto layout = model::param_layout(p.config);
  for (const auto& e : p.entries) {
    std::uint64_t count = 1;
    for (auto d : e.dims) count *= d;
    const std::uint64_t begin = p.payload_start + e.offset;
    if (begin + count * sizeof(float) > bytes.size())
      fail(ErrorKind::kLength, path.string() + ": payload of '" + e.name + "' is truncated");
    const Eigen::Index rows = e.dims.size() >= 1 ? e.dims[0] : 1;
    const Eigen::Index cols = e.dims.size() >= 2 ? e.dims[1] : 1;
    if (e.dims.size() > 2 || static_cast<std::uint64_t>(rows * cols) != count)
      fail(ErrorKind::kShape, path.string() + ": tensor '" + e.name + "' is not 2-D");
    Matrix m(rows, cols);
    for (std::uint64_t i = 0; i < count; ++i) {
      float v;
      std::memcpy(&v, bytes.data() + begin + i * sizeof(float), sizeof(float));
      m.data()[i] = v;
    }
    bool trainable = true;
    for (const auto& spec : layout)
      if (spec.name == e.name) trainable = spec.trainable;
    a.params.add(e.name, std::move(m), trainable);
  }
  return a;
}

model::Model load(const fs::path& path) {
  Archive a = read(path);
  return model::Model(a.config, std::move(a.params));
}

}  // namespace lead::ckpt
