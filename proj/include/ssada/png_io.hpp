#pragma once

#include <filesystem>

#include "ssada/tensor.hpp"

namespace ssada::pngio {

// 8-bit RGB image. Throws io_error on missing files or malformed data.
ImageU8 read_rgb8(const std::filesystem::path& path);
void write_rgb8(const std::filesystem::path& path, const ImageU8& img);

// 8-bit single-channel label map, 255 reserved as ignore.
LabelMap read_gray8(const std::filesystem::path& path);
void write_gray8(const std::filesystem::path& path, const LabelMap& labels);

} // namespace ssada::pngio
