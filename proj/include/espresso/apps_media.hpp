#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "espresso/common.hpp"

namespace espresso {

/// Interleaved RGB samples in [0, maxval].
struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> samples;

  std::size_t pixel_count() const { return std::size_t{width} * height; }
};

/// Binary PPM (P6), 8- or 16-bit samples. Throws kMalformedInput.
RgbImage parse_ppm(ByteSpan data);
RgbImage read_ppm(const std::filesystem::path& path);
Bytes write_ppm(const RgbImage& image);

inline constexpr int kHueBins = 16;
inline constexpr int kSaturationBins = 4;
inline constexpr int kValueBins = 4;
inline constexpr int kFeatureBins = kHueBins * kSaturationBins * kValueBins;

/// Hexcone HSV bin of one pixel: (hue_bin * 4 + sat_bin) * 4 + value_bin.
/// Evaluated in exact integer arithmetic so bin edges are unambiguous.
int hsv_bin(std::uint32_t r, std::uint32_t g, std::uint32_t b, std::uint32_t maxval);

struct FeatureSet {
  std::set<std::uint16_t> features;

  /// Bin identifiers as decimal strings, the protocol items.
  std::vector<Bytes> items() const;
  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

inline constexpr Fraction kDefaultFeatureThreshold{1, 512};

/// A bin enters the set iff count / pixels > threshold. Throws
/// kInvalidArgument for an empty image.
FeatureSet extract_features(const RgbImage& image, const Fraction& threshold = kDefaultFeatureThreshold);

/// Newline-separated bin identifiers.
FeatureSet parse_feature_file(std::string_view text);
std::string format_features(const FeatureSet& set);

}  // namespace espresso
