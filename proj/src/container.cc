#include "mvtap/container.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mvtap/error.h"

namespace mvtap {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'V', 'T', 'K'};

template <typename T>
void Put(std::string* out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out->append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    T value;
    std::memcpy(&value, Take(sizeof(T)), sizeof(T));
    return value;
  }

  const char* Take(size_t n) {
    if (n > bytes_.size() - pos_) {
      throw Error(ErrorCode::kFormatError, "truncated container");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

std::int64_t Product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

void CheckKey(const std::string& key) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) {
    throw Error(ErrorCode::kFormatError, "invalid header key '" + key + "'");
  }
}

}  // namespace

std::int64_t Array::element_count() const { return Product(shape); }

void Container::Set(const std::string& key, const std::string& value) {
  CheckKey(key);
  if (value.find('\n') != std::string::npos) {
    throw Error(ErrorCode::kFormatError, "header value contains a newline");
  }
  header[key] = value;
}

const std::string& Container::Get(const std::string& key) const {
  auto it = header.find(key);
  if (it == header.end()) {
    throw Error(ErrorCode::kFormatError, "missing header key '" + key + "'");
  }
  return it->second;
}

void Container::AddF64(const std::string& name,
                       std::vector<std::int64_t> shape,
                       std::vector<double> values) {
  if (Product(shape) != static_cast<std::int64_t>(values.size())) {
    throw Error(ErrorCode::kShapeMismatch, "array '" + name + "' size");
  }
  Array a;
  a.name = name;
  a.dtype = DType::kF64;
  a.shape = std::move(shape);
  a.f64 = std::move(values);
  arrays.push_back(std::move(a));
}

void Container::AddU8(const std::string& name, std::vector<std::int64_t> shape,
                      std::vector<std::uint8_t> values) {
  if (Product(shape) != static_cast<std::int64_t>(values.size())) {
    throw Error(ErrorCode::kShapeMismatch, "array '" + name + "' size");
  }
  Array a;
  a.name = name;
  a.dtype = DType::kU8;
  a.shape = std::move(shape);
  a.u8 = std::move(values);
  arrays.push_back(std::move(a));
}

const Array& Container::Find(const std::string& name, DType dtype) const {
  for (const Array& a : arrays) {
    if (a.name != name) continue;
    if (a.dtype != dtype) {
      throw Error(ErrorCode::kFormatError, "array '" + name + "' has wrong dtype");
    }
    return a;
  }
  throw Error(ErrorCode::kFormatError, "missing array '" + name + "'");
}

bool Container::Contains(const std::string& name) const {
  for (const Array& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

std::string Serialize(const Container& c) {
  std::string out(kMagic, 4);
  Put<std::uint32_t>(&out, kContainerVersion);
  std::string header;
  for (const auto& [key, value] : c.header) header += key + "=" + value + "\n";
  Put<std::uint32_t>(&out, static_cast<std::uint32_t>(header.size()));
  out += header;
  Put<std::uint32_t>(&out, static_cast<std::uint32_t>(c.arrays.size()));
  for (const Array& a : c.arrays) {
    Put<std::uint32_t>(&out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    Put<std::uint8_t>(&out, static_cast<std::uint8_t>(a.dtype));
    Put<std::uint32_t>(&out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::int64_t d : a.shape) Put<std::int64_t>(&out, d);
    if (a.dtype == DType::kF64) {
      out.append(reinterpret_cast<const char*>(a.f64.data()),
                 a.f64.size() * sizeof(double));
    } else {
      out.append(reinterpret_cast<const char*>(a.u8.data()), a.u8.size());
    }
  }
  return out;
}

Container Deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.Take(4), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormatError, "bad magic, not an MVTK file");
  }
  const auto version = in.Get<std::uint32_t>();
  if (version != kContainerVersion) {
    throw Error(ErrorCode::kFormatError,
                "unsupported container version " + std::to_string(version));
  }
  Container c;
  const auto header_size = in.Get<std::uint32_t>();
  std::istringstream header(std::string(in.Take(header_size), header_size));
  for (std::string line; std::getline(header, line);) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kFormatError, "header line without '='");
    }
    c.Set(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = in.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Array a;
    const auto name_size = in.Get<std::uint32_t>();
    a.name.assign(in.Take(name_size), name_size);
    const auto dtype = in.Get<std::uint8_t>();
    if (dtype != static_cast<std::uint8_t>(DType::kF64) &&
        dtype != static_cast<std::uint8_t>(DType::kU8)) {
      throw Error(ErrorCode::kFormatError, "unknown dtype in '" + a.name + "'");
    }
    a.dtype = static_cast<DType>(dtype);
    const auto rank = in.Get<std::uint32_t>();
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = in.Get<std::int64_t>();
      if (d < 0 || d > (std::int64_t{1} << 40)) {
        throw Error(ErrorCode::kFormatError, "bad dimension in '" + a.name + "'");
      }
      a.shape.push_back(d);
    }
    const auto n = static_cast<size_t>(Product(a.shape));
    if (a.dtype == DType::kF64) {
      a.f64.resize(n);
      std::memcpy(a.f64.data(), in.Take(n * sizeof(double)), n * sizeof(double));
    } else {
      a.u8.resize(n);
      std::memcpy(a.u8.data(), in.Take(n), n);
    }
    c.arrays.push_back(std::move(a));
  }
  if (!in.done()) throw Error(ErrorCode::kFormatError, "trailing bytes");
  return c;
}

void WriteContainer(const std::string& path, const Container& c) {
  WriteTextFile(path, Serialize(c));
}

Container ReadContainer(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIOError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw Error(ErrorCode::kIOError, "cannot read '" + path + "'");
  return Deserialize(ss.str());
}

std::string ContainerToJson(const Container& c, int indent) {
  nlohmann::ordered_json j;
  j["header"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : c.header) j["header"][key] = value;
  j["arrays"] = nlohmann::ordered_json::object();
  for (const Array& a : c.arrays) {
    nlohmann::ordered_json e;
    e["dtype"] = a.dtype == DType::kF64 ? "f64" : "u8";
    e["shape"] = a.shape;
    if (a.dtype == DType::kF64) {
      e["data"] = a.f64;
    } else {
      e["data"] = a.u8;
    }
    j["arrays"][a.name] = std::move(e);
  }
  return j.dump(indent) + "\n";
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIOError, "cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::kIOError, "cannot write '" + path + "'");
}

}  // namespace mvtap
