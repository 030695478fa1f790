#ifndef GRNN_PNG_IO_HPP
#define GRNN_PNG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace grnn {

struct ImageU8 {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;  // interleaved RGB, row-major
};

// Decodes any PNG to 8-bit RGB (palette expanded, gray promoted, alpha
// stripped, 16-bit narrowed). Throws IoError on unreadable/undecodable files.
ImageU8 read_png_rgb8(const std::filesystem::path& path);

void write_png_rgb8(const std::filesystem::path& path, const ImageU8& image);

}  // namespace grnn

#endif  // GRNN_PNG_IO_HPP
