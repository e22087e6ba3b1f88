#include "graphuil/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "graphuil/error.hpp"

namespace graphuil {

static_assert(std::endian::native == std::endian::little, "param container assumes little-endian host");

Matrix& ParamSet::add(std::string name, Matrix value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter block: " + name);
  blocks_.push_back({std::move(name), std::move(value)});
  return blocks_.back().value;
}

std::size_t ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  return npos;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  const auto i = find(name);
  if (i == npos) throw std::out_of_range("no parameter block named " + std::string(name));
  return i;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& b : blocks_) out.add(b.name, Matrix::Zero(b.value.rows(), b.value.cols()));
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

void ParamSet::append(const ParamSet& other, std::string_view prefix) {
  for (const auto& b : other) add(std::string(prefix) + b.name, b.value);
}

ParamSet ParamSet::extract(std::string_view prefix) const {
  ParamSet out;
  for (const auto& b : blocks_) {
    if (b.name.starts_with(prefix)) out.add(b.name.substr(prefix.size()), b.value);
  }
  return out;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value != b[i].value) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[8] = {'G', 'U', 'I', 'L', 'P', 'S', 'E', 'T'};

template <typename T>
void put(std::string& out, T v) {
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
    if (pos_ + n > bytes_.size()) throw ParseError("truncated parameter container");
  }
  const std::string& bytes_;
  std::size_t pos_{0};
};

}  // namespace

std::string serialize_params(const ParamSet& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kParamFormatVersion);
  put<std::uint64_t>(out, params.size());
  for (const auto& b : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(b.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(b.value.cols()));
    out.append(reinterpret_cast<const char*>(b.value.data()),
               static_cast<std::size_t>(b.value.size()) * sizeof(double));
  }
  return out;
}

ParamSet deserialize_params(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ParseError("not a parameter container (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kParamFormatVersion) {
    throw ParseError("unsupported parameter container version " + std::to_string(version));
  }
  const auto count = r.get<std::uint64_t>();
  ParamSet out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint32_t>();
    std::string name = r.get_string(len);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<double>();
    out.add(std::move(name), std::move(m));
  }
  if (!r.done()) throw ParseError("trailing bytes after parameter container");
  return out;
}

void save_params(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_params(params);
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_params(buf.str());
}

std::uint64_t params_checksum(const ParamSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_params(params)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace graphuil
