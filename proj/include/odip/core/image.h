#ifndef ODIP_CORE_IMAGE_H_
#define ODIP_CORE_IMAGE_H_

#include <cstdint>
#include <vector>

namespace odip {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Largest absolute per-channel difference.
int ChannelDistance(Rgb a, Rgb b);

// Interleaved 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const std::size_t i = Offset(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = Offset(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& mutable_bytes() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t Offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

}  // namespace odip

#endif  // ODIP_CORE_IMAGE_H_
