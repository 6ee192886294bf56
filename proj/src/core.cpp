#include "typodiff/core.hpp"

#include <fstream>

namespace td {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for read: " + path);
  f.seekg(0, std::ios::end);
  std::streamoff size = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), size);
  if (!f) throw IoError("read failed: " + path);
  return buf;
}

void write_file_bytes(const std::string& path, const void* data, size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  if (n > 0) f.write(static_cast<const char*>(data), std::streamsize(n));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file_text(const std::string& path) {
  auto b = read_file_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_file_text(const std::string& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

}  // namespace td
