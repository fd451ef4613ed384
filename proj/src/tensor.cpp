#include "ocacnn/tensor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"

namespace ocacnn {

namespace {

constexpr char kTensorMagic[4] = {'O', 'C', 'T', '1'};
constexpr std::uint32_t kMaxRank = 16;

template <typename Stored, typename T>
void read_elements(std::istream& in, std::vector<T>& values) {
  for (auto& v : values) v = static_cast<T>(detail::read_le<Stored>(in));
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void write_tensor(std::ostream& out, const BasicTensor<T>& tensor) {
  out.write(kTensorMagic, sizeof(kTensorMagic));
  detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) detail::write_le<std::uint64_t>(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.raw()),
              static_cast<std::streamsize>(tensor.size() * sizeof(T)));
  } else {
    for (T v : tensor.data()) detail::write_le<T>(out, v);
  }
  if (!out) throw DataError("failed writing tensor");
}

template <typename T>
BasicTensor<T> read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) {
    throw FormatError("bad tensor magic (expected OCT1)");
  }
  const auto code = detail::read_le<std::uint8_t>(in);
  if (code != 4 && code != 8) {
    throw FormatError("unknown tensor precision code " + std::to_string(code));
  }
  const auto ndim = detail::read_le<std::uint32_t>(in);
  if (ndim == 0 || ndim > kMaxRank) throw FormatError("bad tensor rank " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& d : shape) {
    const auto v = detail::read_le<std::uint64_t>(in);
    if (v == 0 || v > (std::uint64_t{1} << 40)) throw FormatError("bad tensor dimension");
    d = static_cast<std::size_t>(v);
  }
  std::vector<T> values(shape_numel(shape));
  if (code == sizeof(T) && std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
    if (!in) throw FormatError("truncated tensor payload");
  } else if (code == 4) {
    read_elements<float>(in, values);
  } else {
    read_elements<double>(in, values);
  }
  return BasicTensor<T>(std::move(shape), std::move(values));
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
}

template <typename T>
BasicTensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_tensor<T>(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template bool all_finite(const Tensor&);
template bool all_finite(const Tensor64&);
template void write_tensor(std::ostream&, const Tensor&);
template void write_tensor(std::ostream&, const Tensor64&);
template Tensor read_tensor<float>(std::istream&);
template Tensor64 read_tensor<double>(std::istream&);
template void save_tensor(const std::filesystem::path&, const Tensor&);
template void save_tensor(const std::filesystem::path&, const Tensor64&);
template Tensor load_tensor<float>(const std::filesystem::path&);
template Tensor64 load_tensor<double>(const std::filesystem::path&);

}  // namespace ocacnn
