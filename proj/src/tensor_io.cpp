#include "mtnet/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mtnet/errors.hpp"

namespace mtnet {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

const char* dtype_name(DType d) { return d == DType::kF32 ? "f32" : "f64"; }

DType dtype_from_name(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  throw InvalidArgument("unsupported tensor dtype '" + s + "'");
}

}  // namespace

void write_container(std::ostream& out, const nlohmann::json& header, std::span<const double> payload,
                     DType dtype) {
  nlohmann::json h = header;
  h["dtype"] = dtype_name(dtype);
  const std::string text = h.dump();
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(kTensorMagic, 8);
  char len_bytes[4];
  std::memcpy(len_bytes, &len, 4);
  out.write(len_bytes, 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (dtype == DType::kF32) {
    std::vector<float> buf(payload.begin(), payload.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  } else {
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * 8));
  }
  if (!out) throw InvalidArgument("failed writing tensor container");
}

Container read_container(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
    throw InvalidArgument("not a tensor container (bad magic)");
  }
  std::uint32_t len = 0;
  char len_bytes[4];
  if (!in.read(len_bytes, 4)) throw InvalidArgument("truncated tensor container header");
  std::memcpy(&len, len_bytes, 4);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw InvalidArgument("truncated tensor container header");
  Container c;
  try {
    c.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed tensor header: ") + e.what());
  }
  const DType dtype = dtype_from_name(c.header.value("dtype", std::string("f32")));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t elem = dtype == DType::kF32 ? 4 : 8;
  if (bytes.size() % elem != 0) throw InvalidArgument("tensor payload is not a whole number of elements");
  const std::size_t n = bytes.size() / elem;
  c.payload.resize(n);
  if (dtype == DType::kF32) {
    std::vector<float> buf(n);
    std::memcpy(buf.data(), bytes.data(), bytes.size());
    std::copy(buf.begin(), buf.end(), c.payload.begin());
  } else {
    std::memcpy(c.payload.data(), bytes.data(), bytes.size());
  }
  return c;
}

void write_tensor(std::ostream& out, const GridTensor& t, DType dtype) {
  const nlohmann::json header = {{"shape", {t.batch, t.channels, t.k, t.k}},
                                 {"layout", "row-major"},
                                 {"activated", t.activated}};
  write_container(out, header, t.data, dtype);
}

GridTensor read_tensor(std::istream& in) {
  Container c = read_container(in);
  try {
    const auto shape = c.header.at("shape").get<std::vector<int>>();
    if (shape.size() != 4 || shape[2] != shape[3]) {
      throw InvalidArgument("grid tensor shape must be [batch, channels, K, K]");
    }
    if (c.header.value("layout", std::string("row-major")) != "row-major") {
      throw InvalidArgument("only row-major layout is supported");
    }
    GridTensor t(shape[0], shape[1], shape[2]);
    if (c.payload.size() != t.size()) throw InvalidArgument("tensor payload size does not match its shape");
    t.data = std::move(c.payload);
    t.activated = c.header.value("activated", false);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed tensor header: ") + e.what());
  }
}

void write_tensor_file(const std::string& path, const GridTensor& t, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_tensor(out, t, dtype);
}

GridTensor read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_tensor(in);
}

}  // namespace mtnet
