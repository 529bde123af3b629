#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadprior/image.hpp"

namespace qp {

// Raw tensor dump: magic "QPT1", four little-endian u32 (width, height,
// channels, reserved=0), then width*height*channels little-endian float32,
// row-major channel-interleaved.
std::vector<std::uint8_t> encode_qpt(const ImageF& img);
ImageF decode_qpt(const std::vector<std::uint8_t>& bytes, const std::string& context = "<memory>");

void save_qpt(const ImageF& img, const std::string& path);
ImageF load_qpt(const std::string& path);

// Whole-file helpers; writes go through a temp file + rename so readers never
// observe a partial file.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void atomic_write_file(const std::string& path, const void* data, std::size_t size);

}  // namespace qp
