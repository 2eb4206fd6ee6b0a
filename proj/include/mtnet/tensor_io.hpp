#pragma once

// Binary tensor container:
//   8 bytes   magic "MTNTENS1"
//   4 bytes   little-endian uint32 header length N
//   N bytes   UTF-8 JSON header
//   payload   little-endian floats ("f32") or doubles ("f64"), row-major
//
// Grid tensors use the header {"shape": [b, c, k, k], "dtype": "f32",
// "layout": "row-major", "activated": bool}. Other writers (model weights)
// put their own keys in the header; the payload is always one flat array
// whose element count the header determines.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtnet/grid.hpp"

namespace mtnet {

inline constexpr char kTensorMagic[] = "MTNTENS1";

enum class DType { kF32, kF64 };

struct Container {
  nlohmann::json header;
  std::vector<double> payload;
};

void write_container(std::ostream& out, const nlohmann::json& header, std::span<const double> payload,
                     DType dtype);
/// Reads a container. The payload length is the remainder of the stream
/// divided by the element size of header["dtype"].
Container read_container(std::istream& in);

void write_tensor(std::ostream& out, const GridTensor& t, DType dtype = DType::kF32);
GridTensor read_tensor(std::istream& in);
void write_tensor_file(const std::string& path, const GridTensor& t, DType dtype = DType::kF32);
GridTensor read_tensor_file(const std::string& path);

}  // namespace mtnet
