#pragma once

#include <string>

#include "allspark/tensor.hpp"

namespace allspark {

// STT1 container: magic "STT1", one dtype byte (0 = f32, 1 = f64), one rank
// byte, rank little-endian u32 dims, then the row-major little-endian
// payload. Bit-exact on roundtrip.

void stt1_write(const std::string& path, const Tensor& t);
TensorPtr stt1_read(const std::string& path);

/// Serialize to an in-memory buffer (the writer goes through this).
std::string stt1_encode(const Tensor& t);
TensorPtr stt1_decode(const std::string& bytes);

/// Write via temp file + rename so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace allspark
