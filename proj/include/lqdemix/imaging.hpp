#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lqdemix/experiments.hpp"
#include "lqdemix/solvers.hpp"

namespace lqdemix {

/// Raster image; pixels is (height * width) x channels with pixel (r, c) at row r * width + c.
struct Image {
  Index width = 0;
  Index height = 0;
  Index channels = 1;
  Matrix pixels;

  Image() = default;
  Image(Index width, Index height, Index channels);

  Index pixel_count() const { return width * height; }
  double& at(Index row, Index col, Index channel) { return pixels(row * width + col, channel); }
  double at(Index row, Index col, Index channel) const { return pixels(row * width + col, channel); }
};

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads binary PGM (P5) or PPM (P6) with maxval 255.
Image read_image(const std::filesystem::path& path);
/// Writes P5 for one channel, P6 for three; values are rounded and clamped to [0, 255].
void write_image(const Image& image, const std::filesystem::path& path);

struct Corruption {
  Image image;
  /// One flag per pixel location, shared by all channels.
  std::vector<std::uint8_t> mask;

  Index corrupted_count() const;
};

/*
 * Sets exactly round(fraction * width * height) pixel locations to salt (255)
 * or pepper (0). Locations are shared across channels; the polarity is drawn
 * independently per channel.
 */
Corruption salt_pepper_corrupt(const Image& image, double fraction, std::uint64_t seed);

struct InpaintTask {
  Image corrupted;
  double q1 = 0.7;
  double q2 = 0.4;
  double mu = 1.0;
  /// Joint recovery of all channels with a multitask solver; otherwise one solve per channel.
  bool joint = true;
};

struct InpaintResult {
  Image restored;
  /// 2-D DCT coefficients, (height * width) x channels.
  Matrix coefficients;
  Matrix corruption;
  /// One entry for a joint solve, one per channel otherwise.
  std::vector<SolveResult> results;
};

/*
 * Separates the image from sparse corruption with A₁ = 2-D IDCT over the full
 * grid and A₂ = I. Joint mode needs mt-bcd or mt-admm; per-channel mode needs
 * bcd, admm or sadmm. The restored image is A₁x₁ clamped to [0, 255].
 * Pixels are used on their 0..255 scale, so cfg.beta_start should be large
 * (kImageBetaStart); starting at 1 leaves the shrinkage negligible.
 */
InpaintResult inpaint(const InpaintTask& task, const SolverConfig& cfg, SolverId solver,
                      const Protocol& protocol = {});

/// Continuation start suited to 8-bit pixel data, on the order of the mean squared pixel value.
inline constexpr double kImageBetaStart = 1e4;

inline constexpr double kPsnrCap = 999.0;

/// 10·log10(255² / MSE) over all pixels and channels; +infinity for identical images.
double psnr(const Image& restored, const Image& reference);

/// PSNR clamped to kPsnrCap for serialized output.
double reported_psnr(double psnr_db);

}  // namespace lqdemix
