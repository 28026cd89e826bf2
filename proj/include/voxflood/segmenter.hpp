#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voxflood/grid.hpp"
#include "voxflood/volume.hpp"

namespace voxflood {

// Native input resolution of the 2D segmenter; logits come back at a quarter
// of it per side.
inline constexpr std::int64_t kCanvasSize = 1024;
inline constexpr std::int64_t kLogitsScale = 4;

struct PointPrompt {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

struct SegmenterRequest {
  std::uint64_t id = 0;
  RgbImage image;
  std::vector<PointPrompt> points;
  std::optional<Mask2D> dense;  // full resolution, aligned with `image`

  // Throws InputError unless the image is kCanvasSize square, every point
  // is inside it and the dense prompt (if any) matches its dims.
  void validate() const;
};

struct MaskChannel {
  Mask2D mask;
  double predicted_iou = 0.0;
  Grid2<float> logits;  // (w / 4) x (h / 4)
};

struct SegmenterResponse {
  std::uint64_t id = 0;
  std::vector<MaskChannel> channels;
};

// Prompt-driven 2D segmenter. Implementations must tolerate concurrent
// segment() calls (one per slice axis).
class SliceSegmenter {
 public:
  virtual ~SliceSegmenter() = default;
  // Throws BackendError on transport failure.
  virtual SegmenterResponse segment(const SegmenterRequest& request) = 0;
};

enum class ThresholdKind { Otsu, Fixed };

struct OracleOptions {
  ThresholdKind threshold = ThresholdKind::Fixed;
  double threshold_fraction = 0.5;  // Fixed: grey > f * 255
};

// Deterministic stand-in: binarise the grey image, flood fill (8-connected)
// from each point prompt, union with the dense prompt. One channel with
// predicted IoU 1 and logits +10/-10 average-pooled 4x4.
class OracleFloodSegmenter final : public SliceSegmenter {
 public:
  explicit OracleFloodSegmenter(OracleOptions options = {}) : options_(options) {}
  SegmenterResponse segment(const SegmenterRequest& request) override;

 private:
  OracleOptions options_;
};

// Returns the dense prompt (or an empty mask) as its single channel.
class EchoSegmenter final : public SliceSegmenter {
 public:
  SegmenterResponse segment(const SegmenterRequest& request) override;
};

Grid2<float> pooled_logits(const Mask2D& mask, float inside = 10.0f, float outside = -10.0f);

enum class ChannelStrategyKind { MaxPredictedIoU, FixedIndex, MaxIoUWithForeground, MinVoxelCount };

struct ChannelStrategy {
  ChannelStrategyKind kind = ChannelStrategyKind::MaxPredictedIoU;
  std::size_t index = 0;  // FixedIndex only
};

const char* channel_strategy_name(ChannelStrategyKind k);

// Index of the chosen channel; ties go to the lowest index.
std::size_t select_channel_index(const SegmenterResponse& response, const ChannelStrategy& strategy,
                                 const Mask2D* fg_slice = nullptr);
const MaskChannel& select_channel(const SegmenterResponse& response, const ChannelStrategy& strategy,
                                  const Mask2D* fg_slice = nullptr);

enum class Upscaling { Nearest, Bilinear };

// Upscale x4 with the chosen filter, then compare > threshold.
Mask2D mask_from_logits(const Grid2<float>& logits, double threshold, Upscaling upscaling);

}  // namespace voxflood
