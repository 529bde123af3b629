#include "quadprior/tensor_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "quadprior/errors.hpp"

namespace qp {

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_qpt(const ImageF& img) {
  std::vector<std::uint8_t> out;
  out.reserve(20 + img.data.size() * 4);
  out.insert(out.end(), {'Q', 'P', 'T', '1'});
  put_u32le(out, static_cast<std::uint32_t>(img.width));
  put_u32le(out, static_cast<std::uint32_t>(img.height));
  put_u32le(out, static_cast<std::uint32_t>(img.channels));
  put_u32le(out, 0);
  for (float v : img.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    put_u32le(out, bits);
  }
  return out;
}

ImageF decode_qpt(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "QPT1", 4) != 0)
    throw io_error("decode_qpt: '" + context + "' has no QPT1 header");
  std::uint32_t w = get_u32le(bytes.data() + 4);
  std::uint32_t h = get_u32le(bytes.data() + 8);
  std::uint32_t c = get_u32le(bytes.data() + 12);
  std::uint64_t n = static_cast<std::uint64_t>(w) * h * c;
  if (w == 0 || h == 0 || c == 0 || bytes.size() != 20 + n * 4)
    throw io_error("decode_qpt: '" + context + "' has inconsistent dimensions");
  ImageF img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (std::uint64_t i = 0; i < n; ++i)
    img.data[i] = std::bit_cast<float>(get_u32le(bytes.data() + 20 + i * 4));
  return img;
}

void save_qpt(const ImageF& img, const std::string& path) {
  auto bytes = encode_qpt(img);
  atomic_write_file(path, bytes.data(), bytes.size());
}

ImageF load_qpt(const std::string& path) { return decode_qpt(read_file_bytes(path), path); }

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw io_error("read_file_bytes: cannot open '" + path + "'");
  std::fseek(f, 0, SEEK_END);
  long n = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<std::uint8_t> out(n > 0 ? static_cast<std::size_t>(n) : 0);
  if (!out.empty() && std::fread(out.data(), 1, out.size(), f) != out.size()) {
    std::fclose(f);
    throw io_error("read_file_bytes: short read on '" + path + "'");
  }
  std::fclose(f);
  return out;
}

void atomic_write_file(const std::string& path, const void* data, std::size_t size) {
  std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw io_error("atomic_write_file: cannot open '" + tmp + "'");
  if (size > 0 && std::fwrite(data, 1, size, f) != size) {
    std::fclose(f);
    std::remove(tmp.c_str());
    throw io_error("atomic_write_file: short write on '" + tmp + "'");
  }
  if (std::fclose(f) != 0) {
    std::remove(tmp.c_str());
    throw io_error("atomic_write_file: close failed on '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw io_error("atomic_write_file: rename to '" + path + "' failed: " + ec.message());
  }
}

}  // namespace qp
