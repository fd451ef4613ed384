#pragma once

#include <filesystem>

#include "ocacnn/tensor.hpp"

namespace ocacnn {

/// Binary PPM (P6). Pixels map linearly from [0, maxval] to [-1, 1]; the
/// result is [3,H,W].
Tensor read_ppm(const std::filesystem::path& path);

/// Writes [3,H,W] values in [-1, 1] as P6 with maxval 255 (values are clamped
/// and rounded to the nearest level).
void write_ppm(const std::filesystem::path& path, const Tensor& image);

/// Reads a .ppm or OCT1 (.oct) image file as [C,H,W].
Tensor read_image(const std::filesystem::path& path);

/// Crops the largest centred square, then bilinearly resamples it to
/// size x size.
Tensor center_crop_resize(const Tensor& image, std::size_t size);

}  // namespace ocacnn
