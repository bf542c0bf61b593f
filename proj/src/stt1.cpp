#include "allspark/stt1.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace allspark {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

template <typename T>
void put_scalar_le(std::string& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  // host is little-endian on every supported target; keep the explicit copy
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

}  // namespace

std::string stt1_encode(const Tensor& t) {
  if (t.dims.size() > 255) throw IoError("stt1: rank exceeds 255");
  std::string out;
  out.reserve(6 + 4 * t.dims.size() + t.data.size() * (t.dtype == Dtype::F32 ? 4 : 8));
  out += "STT1";
  out.push_back(t.dtype == Dtype::F32 ? '\x00' : '\x01');
  out.push_back(static_cast<char>(t.dims.size()));
  for (std::size_t d : t.dims) {
    if (d > 0xFFFFFFFFull) throw IoError("stt1: dim exceeds u32");
    put_u32_le(out, static_cast<std::uint32_t>(d));
  }
  if (t.dtype == Dtype::F32) {
    for (double v : t.data) put_scalar_le(out, static_cast<float>(v));
  } else {
    for (double v : t.data) put_scalar_le(out, v);
  }
  return out;
}

TensorPtr stt1_decode(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 6 || std::memcmp(p, "STT1", 4) != 0) throw IoError("stt1: bad magic");
  const unsigned dtype_code = p[4];
  if (dtype_code > 1) throw IoError("stt1: unknown dtype code " + std::to_string(dtype_code));
  const Dtype dt = dtype_code == 0 ? Dtype::F32 : Dtype::F64;
  const unsigned rank = p[5];
  std::size_t off = 6;
  if (bytes.size() < off + 4ull * rank) throw IoError("stt1: truncated header");
  std::vector<std::size_t> dims(rank);
  std::size_t numel = 1;
  for (unsigned i = 0; i < rank; ++i) {
    dims[i] = get_u32_le(p + off);
    off += 4;
    if (dims[i] == 0) throw IoError("stt1: zero dim");
    numel *= dims[i];
  }
  const std::size_t elem = dt == Dtype::F32 ? 4 : 8;
  if (bytes.size() != off + numel * elem) {
    throw IoError("stt1: payload size mismatch, expected " + std::to_string(off + numel * elem) + " bytes, have " +
                  std::to_string(bytes.size()));
  }
  auto t = Tensor::make(dims, dt, false);
  for (std::size_t i = 0; i < numel; ++i) {
    if (dt == Dtype::F32) {
      float f;
      std::memcpy(&f, p + off + 4 * i, 4);
      t->data[i] = static_cast<double>(f);
    } else {
      double d;
      std::memcpy(&d, p + off + 8 * i, 8);
      t->data[i] = d;
    }
  }
  return t;
}

void stt1_write(const std::string& path, const Tensor& t) {
  write_file_atomic(path, stt1_encode(t));
}

TensorPtr stt1_read(const std::string& path) {
  return stt1_decode(read_file(path));
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp + " -> " + path + " failed: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for " + path);
  return bytes;
}

}  // namespace allspark
