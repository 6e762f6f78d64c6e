#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo::dataset {

/// Seeded generator for splits and augmentations. std::mt19937_64's output
/// sequence is fixed by the C++ standard; bounded draws use rejection
/// sampling on raw 64-bit outputs so results match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound]. Exact, no modulo bias.
  std::uint64_t uniform(std::uint64_t bound);
  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a label and counters into a child seed (FNV-1a).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t a = 0,
                          std::uint64_t b = 0);

/// Exact nonnegative fraction used for split ratios.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Parses "0.8", "4/5" or "1" exactly.
Ratio parse_ratio(std::string_view text);
/// Shortest decimal text when the ratio has one, else "num/den".
std::string format_ratio(Ratio r);
/// Parses "a,b,c" into three ratios.
std::array<Ratio, 3> parse_ratios(std::string_view text);

inline const std::array<Ratio, 3> kDefaultRatios{Ratio{4, 5}, Ratio{1, 10}, Ratio{1, 10}};

struct ClipManifest {
  std::string id;
  std::uint32_t frame_count = 0;
  Rational fps{30, 1};
  std::string source_path;
  friend bool operator==(const ClipManifest&, const ClipManifest&) = default;
};

/// Corpus manifest: a JSON array of {id, frame_count, fps_num, fps_den, source}.
std::vector<ClipManifest> parse_corpus(const std::string& json_text);
std::string format_corpus(const std::vector<ClipManifest>& clips);
/// Validates frame_count >= 1 and unique ids.
void validate_corpus(const std::vector<ClipManifest>& clips);

/// Scans <dir>/<clip>/manifest.json frame directories into a corpus.
std::vector<ClipManifest> scan_corpus_dir(const std::filesystem::path& dir);

/// <I_t, I_t+1, I_t+2> by frame index; the middle frame is ground truth.
struct Triplet {
  std::string clip_id;
  std::uint32_t t = 0;
  std::uint32_t first() const noexcept { return t; }
  std::uint32_t middle() const noexcept { return t + 1; }
  std::uint32_t last() const noexcept { return t + 2; }
  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletExtraction {
  std::vector<Triplet> triplets;
  std::vector<std::string> warnings;
};

/// Windows t = 0, stride, 2*stride, ... with t + 2 < frame_count. Clips too
/// short for one window yield no triplets and a warning.
TripletExtraction extract_triplets(std::string_view clip_id, std::uint32_t frame_count,
                                   std::uint32_t stride = 1);
TripletExtraction extract_triplets(std::string_view clip_id, const FrameSequence& clip,
                                   std::uint32_t stride = 1);

enum class Split : std::uint8_t { kTrain, kVal, kTest };
std::string_view split_name(Split split) noexcept;
Split parse_split(std::string_view name);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::array<Ratio, 3> ratios = kDefaultRatios;
  std::map<std::string, Split> assignments;

  std::vector<std::string> clips_in(Split split) const;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Sorts ids, shuffles them with Rng(seed), then hands out floor(n*val) and
/// floor(n*test) clips to val and test; the rest (including remainders) is train.
SplitAssignment split_clips(const std::vector<ClipManifest>& clips,
                            const std::array<Ratio, 3>& ratios = kDefaultRatios,
                            std::uint64_t seed = 0);

/// Split file: {"seed", "ratios": [..3 numbers..], "assignments": {id: split}}.
std::string format_split_file(const SplitAssignment& split);
SplitAssignment parse_split_file(const std::string& json_text);

/// Triplets of every clip tagged with the clip's split.
struct TripletIndex {
  struct Entry {
    Triplet triplet;
    Split split = Split::kTrain;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries;
  std::vector<std::string> warnings;

  std::vector<Triplet> in(Split split) const;
  friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
};

/// Clips are visited in id order. Clips missing from `split` are an error.
TripletIndex build_triplet_index(const std::vector<ClipManifest>& clips, const SplitAssignment& split,
                                 std::uint32_t stride = 1);
/// {"triplets": [{"clip_id", "t", "split"}...], "warnings": [...]}
std::string format_triplet_index(const TripletIndex& index);
TripletIndex parse_triplet_index(const std::string& json_text);

// --- augmentation -----------------------------------------------------------

struct TripletFrames {
  Frame first;
  Frame middle;
  Frame last;
};

struct CropRect {
  int x = 0;
  int y = 0;
  int width = 448;
  int height = 256;
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

inline constexpr int kCropWidth = 448;
inline constexpr int kCropHeight = 256;

/// Descriptor plus materialized frames. The descriptor is applied in the
/// order crop (source coordinates), horizontal flip, time reversal.
struct AugmentedTriplet {
  Triplet source;
  CropRect crop;
  bool hflip = false;
  bool time_reversed = false;
  TripletFrames frames;
};

/// Identity augmentation: crop covers the whole frame.
AugmentedTriplet make_augmented(Triplet source, TripletFrames frames);

/// Crops all three frames identically; `origin` is in the current (possibly
/// already flipped) coordinates. Throws kBounds naming the overflowing axis.
AugmentedTriplet crop(const AugmentedTriplet& in, int x, int y, int width = kCropWidth,
                      int height = kCropHeight);
AugmentedTriplet hflip(const AugmentedTriplet& in);
AugmentedTriplet time_reverse(const AugmentedTriplet& in);

/// Random draws behind random_augment, without touching pixels.
struct AugmentationPlan {
  CropRect crop;  // source coordinates
  bool hflip = false;
  bool time_reversed = false;
  friend bool operator==(const AugmentationPlan&, const AugmentationPlan&) = default;
};

/// Draws x, then y, then the flip coin, then the reversal coin.
AugmentationPlan plan_augmentation(int frame_width, int frame_height, std::uint64_t seed,
                                   int width = kCropWidth, int height = kCropHeight);

/// Uniform crop origin, then flip and reversal with probability 1/2 each.
AugmentedTriplet random_augment(const AugmentedTriplet& in, std::uint64_t seed,
                                int width = kCropWidth, int height = kCropHeight);

Frame crop_frame(const Frame& frame, int x, int y, int width, int height);
Frame mirror_frame(const Frame& frame);

/// One JSON object per line: {clip_id, t, crop:{x,y,w,h}, hflip, time_reversed}.
std::string format_augmentation_line(const AugmentedTriplet& aug);
std::string format_augmentation_line(const Triplet& source, const AugmentationPlan& plan);

}  // namespace slomo::dataset
