#include "odip/detector/features.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "odip/core/error.h"

namespace odip::detector {
namespace {

struct PixelRange {
  int x0, y0, x1, y1;  // [x0, x1) x [y0, y1)
};

PixelRange RangeOf(const BBox& box, int width, int height) {
  return {std::max(0, static_cast<int>(std::floor(box.x_min()))),
          std::max(0, static_cast<int>(std::floor(box.y_min()))),
          std::min(width, static_cast<int>(std::ceil(box.x_max()))),
          std::min(height, static_cast<int>(std::ceil(box.y_max())))};
}

// Linear split of one channel value between the two nearest bin centers
// (32, 96, 160, 224); values beyond the outer centers stay in the edge bin.
struct ChannelSplit {
  int lo;
  int hi;
  double w_hi;
};

ChannelSplit SplitChannel(std::uint8_t value) {
  const double p = std::clamp((value + 0.5) / 64.0 - 0.5, 0.0, 3.0);
  const int lo = std::min(static_cast<int>(p), 2);
  return {lo, lo + 1, p - lo};
}

// Trilinear soft assignment of one pixel to the 4x4x4 joint histogram.
void AddToHistogram(Rgb c, Descriptor& d) {
  const ChannelSplit r = SplitChannel(c.r), g = SplitChannel(c.g),
                     b = SplitChannel(c.b);
  for (int i = 0; i < 2; ++i) {
    const double wr = i ? r.w_hi : 1.0 - r.w_hi;
    const int br = (i ? r.hi : r.lo) * 16;
    for (int j = 0; j < 2; ++j) {
      const double wg = wr * (j ? g.w_hi : 1.0 - g.w_hi);
      const int bg = br + (j ? g.hi : g.lo) * 4;
      d[bg + b.lo] += wg * (1.0 - b.w_hi);
      d[bg + b.hi] += wg * b.w_hi;
    }
  }
}

// Summed-area table of the foreground mask.
class Integral {
 public:
  explicit Integral(const ForegroundMask& mask)
      : w_(mask.width + 1), sums_(static_cast<std::size_t>(w_) * (mask.height + 1), 0) {
    for (int y = 0; y < mask.height; ++y) {
      int row = 0;
      for (int x = 0; x < mask.width; ++x) {
        row += mask.at(x, y);
        sums_[Idx(x + 1, y + 1)] = sums_[Idx(x + 1, y)] + row;
      }
    }
  }
  int Count(int x0, int y0, int x1, int y1) const {
    return sums_[Idx(x1, y1)] - sums_[Idx(x0, y1)] - sums_[Idx(x1, y0)] +
           sums_[Idx(x0, y0)];
  }

 private:
  std::size_t Idx(int x, int y) const {
    return static_cast<std::size_t>(y) * w_ + x;
  }
  int w_;
  std::vector<int> sums_;
};

struct Component {
  int x0, y0, x1, y1;  // inclusive pixel bounds
  int area = 0;
  BBox box() const { return BBox(x0, y0, x1 + 1, y1 + 1); }
};

// 4-connected components of foreground pixels. When color_tolerance >= 0,
// neighbors must also be within that channel distance of each other.
std::vector<Component> Components(const Image& image, const ForegroundMask& mask,
                                  int color_tolerance) {
  const int w = mask.width, h = mask.height;
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<Component> out;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!mask.bits[start] || label[start] >= 0) continue;
    Component c{start % w, start / w, start % w, start / w, 0};
    const int id = static_cast<int>(out.size());
    label[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      ++c.area;
      c.x0 = std::min(c.x0, x);
      c.y0 = std::min(c.y0, y);
      c.x1 = std::max(c.x1, x);
      c.y1 = std::max(c.y1, y);
      const Rgb here = image.at(x, y);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const int q = ny[k] * w + nx[k];
        if (!mask.bits[q] || label[q] >= 0) continue;
        if (color_tolerance >= 0 &&
            ChannelDistance(here, image.at(nx[k], ny[k])) > color_tolerance) {
          continue;
        }
        label[q] = id;
        stack.push_back(q);
      }
    }
    out.push_back(c);
  }
  return out;
}

// Tight box of foreground pixels inside [x0,x1) x [y0,y1).
std::optional<BBox> SnapToForeground(const ForegroundMask& mask, int x0, int y0,
                                     int x1, int y1) {
  int lx = x1, ly = y1, hx = -1, hy = -1;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (!mask.at(x, y)) continue;
      lx = std::min(lx, x);
      ly = std::min(ly, y);
      hx = std::max(hx, x);
      hy = std::max(hy, y);
    }
  }
  if (hx < 0) return std::nullopt;
  return BBox(lx, ly, hx + 1, hy + 1);
}

struct Ranked {
  BBox box;
  int tier;  // 0 = component, 1 = window
  double fill;
};

}  // namespace

Rgb EstimateBackground(const Image& image, int border_band) {
  if (image.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "image is empty");
  }
  const int band = std::max(1, std::min({border_band, image.width(), image.height()}));
  std::map<int, std::array<long, 4>> bins;  // key -> (count, r, g, b)
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const bool border = x < band || y < band || x >= image.width() - band ||
                          y >= image.height() - band;
      if (!border) continue;
      const Rgb c = image.at(x, y);
      auto& bin = bins[(c.r >> 3) << 10 | (c.g >> 3) << 5 | (c.b >> 3)];
      ++bin[0];
      bin[1] += c.r;
      bin[2] += c.g;
      bin[3] += c.b;
    }
  }
  // Coarse bins split a noisy flat color; pool each bin with its neighbors.
  auto pooled = [&](int key) {
    std::array<long, 4> sum{0, 0, 0, 0};
    const int r = key >> 10, g = (key >> 5) & 31, b = key & 31;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dg = -1; dg <= 1; ++dg)
        for (int db = -1; db <= 1; ++db) {
          auto it = bins.find((r + dr) << 10 | (g + dg) << 5 | (b + db));
          if (r + dr < 0 || g + dg < 0 || b + db < 0 || it == bins.end()) continue;
          for (int i = 0; i < 4; ++i) sum[i] += it->second[i];
        }
    return sum;
  };
  std::array<long, 4> best{0, 0, 0, 0};
  for (const auto& [key, bin] : bins) {
    const auto sum = pooled(key);
    if (sum[0] > best[0]) best = sum;
  }
  auto avg = [&](long v) {
    return static_cast<std::uint8_t>((v + best[0] / 2) / best[0]);
  };
  return {avg(best[1]), avg(best[2]), avg(best[3])};
}

ForegroundMask ComputeForeground(const Image& image,
                                 const ProposalConfig& config) {
  ForegroundMask mask;
  mask.width = image.width();
  mask.height = image.height();
  mask.background = EstimateBackground(image, config.border_band);
  mask.bits.resize(static_cast<std::size_t>(mask.width) * mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      mask.bits[static_cast<std::size_t>(y) * mask.width + x] =
          ChannelDistance(image.at(x, y), mask.background) >
          config.foreground_threshold;
    }
  }
  return mask;
}

Descriptor Embed(const Image& image, const ForegroundMask& mask,
                 const BBox& box) {
  Descriptor d{};
  const double log_aspect = std::log(box.width() / box.height());
  d[kAspectIndex] = std::clamp(log_aspect, -kMaxLogAspect, kMaxLogAspect);
  const PixelRange r = RangeOf(box, image.width(), image.height());
  if (r.x1 <= r.x0 || r.y1 <= r.y0) return d;

  long fg = 0;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    const double v = (y + 0.5 - box.y_min()) / box.height();
    for (int x = r.x0; x < r.x1; ++x) {
      if (!mask.at(x, y)) continue;
      const double u = (x + 0.5 - box.x_min()) / box.width();
      ++fg;
      AddToHistogram(image.at(x, y), d);
      sx += u;
      sy += v;
      sxx += u * u;
      syy += v * v;
      sxy += u * v;
    }
  }
  const long total = static_cast<long>(r.x1 - r.x0) * (r.y1 - r.y0);
  d[kFillIndex] = static_cast<double>(fg) / total;
  if (fg == 0) return d;
  const double n = static_cast<double>(fg);
  for (int i = 0; i < kHistogramBins; ++i) d[i] /= n;
  const double mx = sx / n, my = sy / n;
  d[kMomentIndex] = 12.0 * std::max(0.0, sxx / n - mx * mx);
  d[kMomentIndex + 1] = 12.0 * std::max(0.0, syy / n - my * my);
  d[kMomentIndex + 2] = 12.0 * (sxy / n - mx * my);
  return d;
}

Descriptor Embed(const Image& image, const BBox& box,
                 const ProposalConfig& config) {
  return Embed(image, ComputeForeground(image, config), box);
}

namespace {

std::vector<BBox> ProposeWithMask(const Image& image, const ForegroundMask& mask,
                                  const ProposalConfig& config) {
  std::vector<Ranked> pool;
  for (const Component& c : Components(image, mask, config.color_tolerance)) {
    if (c.area < config.min_component_area) continue;
    const BBox box = c.box();
    pool.push_back({box, 0, c.area / box.area()});
  }
  const Integral integral(mask);
  for (const Component& blob : Components(image, mask, -1)) {
    if (blob.area < config.min_component_area) continue;
    const BBox blob_box = blob.box();
    if (blob.area <= config.max_single_object_area) {
      pool.push_back({blob_box, 0, blob.area / blob_box.area()});
      continue;
    }
    // Large blobs: multi-scale windows at three aspect ratios.
    const int bw = blob.x1 - blob.x0 + 1, bh = blob.y1 - blob.y0 + 1;
    for (int scale : config.window_scales) {
      const int stride = std::max(1, scale / 4);
      const int half = std::max(1, scale / 2);
      const std::pair<int, int> shapes[] = {{scale, scale}, {scale, half}, {half, scale}};
      for (const auto& [ww, wh] : shapes) {
        if (ww > bw + stride || wh > bh + stride) continue;
        for (int y = blob.y0; y + wh <= blob.y1 + 1 + stride; y += stride) {
          for (int x = blob.x0; x + ww <= blob.x1 + 1 + stride; x += stride) {
            const int x0 = std::min(x, mask.width - 1);
            const int y0 = std::min(y, mask.height - 1);
            const int x1 = std::min(x + ww, mask.width);
            const int y1 = std::min(y + wh, mask.height);
            if (x1 <= x0 || y1 <= y0) continue;
            const double fill =
                integral.Count(x0, y0, x1, y1) / double((x1 - x0) * (y1 - y0));
            if (fill < config.window_min_fill) continue;
            const std::optional<BBox> snapped = SnapToForeground(mask, x0, y0, x1, y1);
            if (!snapped || snapped->area() < config.min_component_area) continue;
            pool.push_back({*snapped, 1, fill});
          }
        }
      }
    }
  }
  // Components first, then windows by fill; stable within ties.
  std::stable_sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
    if (a.tier != b.tier) return a.tier < b.tier;
    if (a.fill != b.fill) return a.fill > b.fill;
    return BoxLess(a.box, b.box);
  });
  std::vector<BBox> kept;
  for (const Ranked& r : pool) {
    if (static_cast<int>(kept.size()) >= config.max_proposals) break;
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const BBox& k) {
      return Iou(k, r.box) >= config.nms_iou;
    });
    if (!duplicate) kept.push_back(r.box);
  }
  return kept;
}

}  // namespace

std::vector<BBox> Propose(const Image& image, const ProposalConfig& config) {
  if (image.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "image is empty");
  }
  return ProposeWithMask(image, ComputeForeground(image, config), config);
}

AnalyzedImage Analyze(const Image& image, const ProposalConfig& config) {
  if (image.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "image is empty");
  }
  const ForegroundMask mask = ComputeForeground(image, config);
  AnalyzedImage out;
  out.proposals = ProposeWithMask(image, mask, config);
  out.descriptors.reserve(out.proposals.size());
  for (const BBox& box : out.proposals) {
    out.descriptors.push_back(Embed(image, mask, box));
  }
  return out;
}

Descriptor DescribeSupport(const Image& image, const ProposalConfig& config) {
  const ForegroundMask mask = ComputeForeground(image, config);
  const std::optional<BBox> tight =
      SnapToForeground(mask, 0, 0, mask.width, mask.height);
  if (!tight) {
    return Embed(image, mask, BBox(0, 0, image.width(), image.height()));
  }
  return Embed(image, mask, *tight);
}

std::shared_ptr<const AnalyzedImage> FeatureCache::Analysis(
    const std::string& id, const Image& image) {
  {
    std::lock_guard lock(mutex_);
    auto it = analyses_.find(id);
    if (it != analyses_.end()) return it->second;
  }
  auto analysis = std::make_shared<const AnalyzedImage>(Analyze(image, config_));
  std::lock_guard lock(mutex_);
  return analyses_.emplace(id, std::move(analysis)).first->second;
}

Descriptor FeatureCache::SupportDescriptor(const std::string& id,
                                           const Image& image) {
  {
    std::lock_guard lock(mutex_);
    auto it = supports_.find(id);
    if (it != supports_.end()) return it->second;
  }
  const Descriptor d = DescribeSupport(image, config_);
  std::lock_guard lock(mutex_);
  return supports_.emplace(id, d).first->second;
}

std::size_t FeatureCache::size() const {
  std::lock_guard lock(mutex_);
  return analyses_.size() + supports_.size();
}

}  // namespace odip::detector
