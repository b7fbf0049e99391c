#include "lqdemix/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "lqdemix/random.hpp"

namespace lqdemix {

Image::Image(Index width_, Index height_, Index channels_)
    : width(width_), height(height_), channels(channels_), pixels(Matrix::Zero(width_ * height_, channels_)) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw DimensionError("images have 1 or 3 channels");
}

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long read_int(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) fail(std::string(field) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + field, start);
    return value;
  }

  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("expected whitespace after maxval", pos_);
    ++pos_;
  }

  [[noreturn]] static void fail(const std::string& what, std::size_t at) {
    throw ImageFormatError("malformed image header at byte offset " + std::to_string(at) + ": " + what);
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_;
};

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    HeaderReader::fail("expected magic P5 or P6", 0);
  }
  const Index channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader fields(bytes, 2);
  const long width = fields.read_int("width");
  const long height = fields.read_int("height");
  const long maxval = fields.read_int("maxval");
  if (width <= 0 || height <= 0) HeaderReader::fail("width and height must be positive", fields.offset());
  if (maxval != 255) {
    HeaderReader::fail("unsupported maxval " + std::to_string(maxval) + " (only 8-bit, maxval 255)",
                       fields.offset());
  }
  fields.expect_single_space();

  const std::size_t data_offset = fields.offset();
  const std::size_t needed = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                             static_cast<std::size_t>(channels);
  if (bytes.size() - data_offset < needed) {
    throw ImageFormatError("truncated image data: expected " + std::to_string(needed) + " bytes at offset " +
                           std::to_string(data_offset) + ", found " + std::to_string(bytes.size() - data_offset));
  }

  Image image(width, height, channels);
  std::size_t p = data_offset;
  for (Index i = 0; i < image.pixel_count(); ++i) {
    for (Index c = 0; c < channels; ++c) image.pixels(i, c) = bytes[p++];
  }
  return image;
}

void write_image(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw DimensionError("write_image: 1 or 3 channels required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image '" + path.string() + "'");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> data;
  data.reserve(static_cast<std::size_t>(image.pixels.size()));
  for (Index i = 0; i < image.pixel_count(); ++i) {
    for (Index c = 0; c < image.channels; ++c) {
      const double v = std::clamp(std::round(image.pixels(i, c)), 0.0, 255.0);
      data.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed writing image '" + path.string() + "'");
}

Index Corruption::corrupted_count() const {
  return static_cast<Index>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Corruption salt_pepper_corrupt(const Image& image, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("corruption fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
  const Index n = image.pixel_count();
  const auto count = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  Rng rng = make_rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  Corruption out{image, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)};
  std::bernoulli_distribution salt(0.5);
  for (Index i = 0; i < count; ++i) {
    const Index loc = order[static_cast<std::size_t>(i)];
    out.mask[static_cast<std::size_t>(loc)] = 1;
    for (Index c = 0; c < image.channels; ++c) out.image.pixels(loc, c) = salt(rng) ? 255.0 : 0.0;
  }
  return out;
}

InpaintResult inpaint(const InpaintTask& task, const SolverConfig& cfg_in, SolverId solver,
                      const Protocol& protocol) {
  const Image& img = task.corrupted;
  if (img.pixels.rows() != img.pixel_count() || img.pixels.cols() != img.channels) {
    throw DimensionError("inpaint: pixel matrix does not match image dimensions");
  }
  if (task.joint && !is_multitask(solver)) {
    throw std::invalid_argument("inpaint: joint recovery needs mt-bcd or mt-admm, got " +
                                std::string(to_string(solver)));
  }
  if (!task.joint && is_multitask(solver)) {
    throw std::invalid_argument("inpaint: per-channel recovery needs bcd, admm or sadmm, got " +
                                std::string(to_string(solver)));
  }
  SolverConfig cfg = cfg_in;
  cfg.q1 = task.q1;
  cfg.q2 = task.q2;
  cfg.mu = task.mu;

  const LinearOperator a1 = LinearOperator::idct2d(img.height, img.width);
  const LinearOperator a2 = LinearOperator::identity(img.pixel_count());

  InpaintResult out;
  out.coefficients.resize(img.pixel_count(), img.channels);
  out.corruption.resize(img.pixel_count(), img.channels);
  if (task.joint) {
    SolveResult r = solve_with_protocol(solver, DemixProblem{a1, a2, img.pixels}, cfg, protocol);
    out.coefficients = r.x1;
    out.corruption = r.x2;
    out.results.push_back(std::move(r));
  } else {
    for (Index c = 0; c < img.channels; ++c) {
      SolveResult r = solve_with_protocol(solver, DemixProblem{a1, a2, img.pixels.col(c)}, cfg, protocol);
      out.coefficients.col(c) = r.x1;
      out.corruption.col(c) = r.x2;
      out.results.push_back(std::move(r));
    }
  }
  out.restored = Image(img.width, img.height, img.channels);
  out.restored.pixels = a1.apply(out.coefficients).cwiseMax(0.0).cwiseMin(255.0);
  return out;
}

double psnr(const Image& restored, const Image& reference) {
  if (restored.width != reference.width || restored.height != reference.height ||
      restored.channels != reference.channels) {
    throw DimensionError("psnr: image dimensions differ");
  }
  const double mse = (restored.pixels - reference.pixels).squaredNorm() / static_cast<double>(reference.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double reported_psnr(double psnr_db) { return std::min(psnr_db, kPsnrCap); }

}  // namespace lqdemix
