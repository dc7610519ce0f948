#include "odip/core/image.h"

#include <algorithm>
#include <cstdlib>

#include "odip/core/error.h"

namespace odip {

int ChannelDistance(Rgb a, Rgb b) {
  return std::max({std::abs(int{a.r} - int{b.r}), std::abs(int{a.g} - int{b.g}),
                   std::abs(int{a.b} - int{b.b})});
}

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative image dimensions");
  }
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

}  // namespace odip
