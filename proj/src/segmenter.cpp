#include "voxflood/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "voxflood/voxel_ops.hpp"

namespace voxflood {

void SegmenterRequest::validate() const {
  if (image.width != kCanvasSize || image.height != kCanvasSize) {
    throw InputError("segmenter image must be " + std::to_string(kCanvasSize) + "x" +
                     std::to_string(kCanvasSize) + ", got " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  }
  if (image.rgb.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw InputError("segmenter image payload has the wrong length");
  }
  for (const auto& p : points) {
    if (p.x < 0 || p.y < 0 || p.x >= image.width || p.y >= image.height) {
      throw InputError("point prompt outside the image");
    }
  }
  if (dense && (dense->width() != image.width || dense->height() != image.height)) {
    throw InputError("dense prompt dims differ from the image");
  }
}

Grid2<float> pooled_logits(const Mask2D& mask, float inside, float outside) {
  const Dims2 d{mask.width() / kLogitsScale, mask.height() / kLogitsScale};
  Grid2<float> logits(d, 0.0f);
  constexpr float area = kLogitsScale * kLogitsScale;
  for (std::int64_t y = 0; y < d.h; ++y)
    for (std::int64_t x = 0; x < d.w; ++x) {
      float sum = 0.0f;
      for (std::int64_t j = 0; j < kLogitsScale; ++j)
        for (std::int64_t i = 0; i < kLogitsScale; ++i)
          sum += mask(x * kLogitsScale + i, y * kLogitsScale + j) ? inside : outside;
      logits(x, y) = sum / area;
    }
  return logits;
}

SegmenterResponse OracleFloodSegmenter::segment(const SegmenterRequest& request) {
  request.validate();
  const Dims2 d{request.image.width, request.image.height};
  Image2D grey(d);
  for (std::size_t i = 0; i < grey.size(); ++i) grey[i] = request.image.rgb[3 * i];

  double threshold = 0.0;
  if (options_.threshold == ThresholdKind::Otsu) {
    threshold = otsu_threshold(histogram8(grey.values()));
  } else {
    threshold = options_.threshold_fraction * 255.0;
  }
  const Mask2D fg = binarize(grey, threshold);

  Mask2D mask(d, 0);
  for (const auto& p : request.points) {
    const Mask2D part = keep_component_at(fg, Pixel{p.x, p.y}, 8);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= part[i];
  }
  if (request.dense) {
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= (*request.dense)[i] ? 1 : 0;
  }

  SegmenterResponse response;
  response.id = request.id;
  MaskChannel ch;
  ch.logits = pooled_logits(mask);
  ch.mask = std::move(mask);
  ch.predicted_iou = 1.0;
  response.channels.push_back(std::move(ch));
  return response;
}

SegmenterResponse EchoSegmenter::segment(const SegmenterRequest& request) {
  request.validate();
  const Dims2 d{request.image.width, request.image.height};
  MaskChannel ch;
  ch.mask = request.dense ? *request.dense : Mask2D(d, 0);
  for (auto& v : ch.mask.values()) v = v ? 1 : 0;
  ch.logits = pooled_logits(ch.mask);
  ch.predicted_iou = 1.0;
  SegmenterResponse response;
  response.id = request.id;
  response.channels.push_back(std::move(ch));
  return response;
}

const char* channel_strategy_name(ChannelStrategyKind k) {
  switch (k) {
    case ChannelStrategyKind::MaxPredictedIoU: return "max-predicted-iou";
    case ChannelStrategyKind::FixedIndex: return "fixed-index";
    case ChannelStrategyKind::MaxIoUWithForeground: return "max-iou-with-fg";
    case ChannelStrategyKind::MinVoxelCount: return "min-voxel-count";
  }
  return "?";
}

namespace {

double mask_iou(const Mask2D& a, const Mask2D& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

}  // namespace

std::size_t select_channel_index(const SegmenterResponse& response, const ChannelStrategy& strategy,
                                 const Mask2D* fg_slice) {
  const auto& ch = response.channels;
  if (ch.empty()) throw BackendError("segmenter response has no channels");
  std::size_t best = 0;
  switch (strategy.kind) {
    case ChannelStrategyKind::FixedIndex:
      if (strategy.index >= ch.size()) {
        throw InputError("channel index " + std::to_string(strategy.index) + " out of range (" +
                         std::to_string(ch.size()) + " channels)");
      }
      return strategy.index;
    case ChannelStrategyKind::MaxPredictedIoU:
      for (std::size_t i = 1; i < ch.size(); ++i)
        if (ch[i].predicted_iou > ch[best].predicted_iou) best = i;
      return best;
    case ChannelStrategyKind::MinVoxelCount: {
      std::size_t best_count = count_true(ch[0].mask);
      for (std::size_t i = 1; i < ch.size(); ++i) {
        const std::size_t c = count_true(ch[i].mask);
        if (c < best_count) {
          best = i;
          best_count = c;
        }
      }
      return best;
    }
    case ChannelStrategyKind::MaxIoUWithForeground: {
      if (!fg_slice) throw InputError("max-iou-with-fg channel selection needs a foreground slice");
      double best_iou = -1.0;
      for (std::size_t i = 0; i < ch.size(); ++i) {
        if (ch[i].mask.dims() != fg_slice->dims()) throw InputError("foreground slice dims differ from mask");
        const double v = mask_iou(ch[i].mask, *fg_slice);
        if (v > best_iou) {
          best = i;
          best_iou = v;
        }
      }
      return best;
    }
  }
  return best;
}

const MaskChannel& select_channel(const SegmenterResponse& response, const ChannelStrategy& strategy,
                                  const Mask2D* fg_slice) {
  return response.channels[select_channel_index(response, strategy, fg_slice)];
}

Mask2D mask_from_logits(const Grid2<float>& logits, double threshold, Upscaling upscaling) {
  const std::int64_t lw = logits.width(), lh = logits.height();
  const Dims2 d{lw * kLogitsScale, lh * kLogitsScale};
  Mask2D out(d, 0);
  if (upscaling == Upscaling::Nearest) {
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x)
        out(x, y) = logits(x / kLogitsScale, y / kLogitsScale) > threshold ? 1 : 0;
    return out;
  }
  // Half-pixel-centre bilinear sampling with edge clamping.
  const double inv = 1.0 / kLogitsScale;
  for (std::int64_t y = 0; y < d.h; ++y) {
    const double sy = std::clamp((y + 0.5) * inv - 0.5, 0.0, double(lh - 1));
    const auto y0 = static_cast<std::int64_t>(std::floor(sy));
    const std::int64_t y1 = std::min(y0 + 1, lh - 1);
    const double fy = sy - double(y0);
    for (std::int64_t x = 0; x < d.w; ++x) {
      const double sx = std::clamp((x + 0.5) * inv - 0.5, 0.0, double(lw - 1));
      const auto x0 = static_cast<std::int64_t>(std::floor(sx));
      const std::int64_t x1 = std::min(x0 + 1, lw - 1);
      const double fx = sx - double(x0);
      const double top = logits(x0, y0) * (1 - fx) + logits(x1, y0) * fx;
      const double bottom = logits(x0, y1) * (1 - fx) + logits(x1, y1) * fx;
      out(x, y) = top * (1 - fy) + bottom * fy > threshold ? 1 : 0;
    }
  }
  return out;
}

}  // namespace voxflood
