#ifndef MVTAP_CONTAINER_H_
#define MVTAP_CONTAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mvtap {

inline constexpr char kToolkitVersion[] = "0.1.0";
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { kF64 = 1, kU8 = 2 };

struct Array {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::int64_t> shape;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;

  std::int64_t element_count() const;
};

// Self-describing binary file:
//   "MVTK" | u32 version | u32 header bytes | header text (key=value lines)
//   | u32 array count | per array: u32 name bytes, name, u8 dtype, u32 rank,
//   i64 dims..., row-major payload
// All integers and doubles are little-endian.
struct Container {
  std::map<std::string, std::string> header;
  std::vector<Array> arrays;

  void Set(const std::string& key, const std::string& value);
  // Throws kFormatError when missing.
  const std::string& Get(const std::string& key) const;
  bool Has(const std::string& key) const { return header.count(key) > 0; }

  void AddF64(const std::string& name, std::vector<std::int64_t> shape,
              std::vector<double> values);
  void AddU8(const std::string& name, std::vector<std::int64_t> shape,
             std::vector<std::uint8_t> values);
  // Throws kFormatError when missing or of another dtype.
  const Array& Find(const std::string& name, DType dtype) const;
  bool Contains(const std::string& name) const;
};

std::string Serialize(const Container& c);
// Throws kFormatError on malformed input.
Container Deserialize(const std::string& bytes);

// Throw kIOError when the file cannot be written or read.
void WriteContainer(const std::string& path, const Container& c);
Container ReadContainer(const std::string& path);

// Debug view: {"header": {...}, "arrays": {name: {"dtype", "shape", "data"}}}.
std::string ContainerToJson(const Container& c, int indent = 2);

void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace mvtap

#endif  // MVTAP_CONTAINER_H_
