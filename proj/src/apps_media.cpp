#include "espresso/apps_media.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace espresso {

namespace {

class PpmHeaderReader {
 public:
  explicit PpmHeaderReader(ByteSpan data) : data_(data) {}

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(data_[pos_])) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::uint32_t number(const char* what) {
    skip_space_and_comments();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < data_.size() && std::isdigit(data_[pos_])) {
      v = v * 10 + (data_[pos_++] - '0');
      if (++digits > 9) fail(ErrorCode::kMalformedInput, std::string("ppm: ") + what + " too large");
    }
    if (digits == 0) fail(ErrorCode::kMalformedInput, std::string("ppm: missing ") + what);
    return static_cast<std::uint32_t>(v);
  }

  std::size_t pos_ = 0;
  ByteSpan data_;
};

}  // namespace

RgbImage parse_ppm(ByteSpan data) {
  if (data.size() < 2 || data[0] != 'P' || data[1] != '6') {
    fail(ErrorCode::kMalformedInput, "ppm: only binary P6 images are supported");
  }
  PpmHeaderReader h(data);
  h.pos_ = 2;
  RgbImage img;
  img.width = h.number("width");
  img.height = h.number("height");
  const auto maxval = h.number("maxval");
  if (img.width == 0 || img.height == 0) fail(ErrorCode::kMalformedInput, "ppm: empty image");
  if (maxval == 0 || maxval > 65535) fail(ErrorCode::kMalformedInput, "ppm: maxval out of range");
  img.maxval = static_cast<std::uint16_t>(maxval);
  if (h.pos_ >= data.size() || !std::isspace(data[h.pos_])) {
    fail(ErrorCode::kMalformedInput, "ppm: header must end with one whitespace byte");
  }
  ++h.pos_;

  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const auto count = img.pixel_count() * 3;
  if (count / 3 != img.pixel_count() || data.size() - h.pos_ < count * bytes_per_sample) {
    fail(ErrorCode::kMalformedInput, "ppm: pixel data truncated");
  }
  img.samples.resize(count);
  const auto* p = data.data() + h.pos_;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = bytes_per_sample == 2 ? static_cast<std::uint16_t>(p[2 * i] << 8 | p[2 * i + 1]) : p[i];
    if (v > maxval) fail(ErrorCode::kMalformedInput, "ppm: sample exceeds maxval");
    img.samples[i] = v;
  }
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ppm(data);
}

Bytes write_ppm(const RgbImage& image) {
  auto header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
                std::to_string(image.maxval) + "\n";
  Bytes out = to_bytes(header);
  for (auto s : image.samples) {
    if (image.maxval > 255) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s));
  }
  return out;
}

int hsv_bin(std::uint32_t r, std::uint32_t g, std::uint32_t b, std::uint32_t maxval) {
  const std::uint64_t mx = std::max({r, g, b});
  const std::uint64_t mn = std::min({r, g, b});
  const std::uint64_t c = mx - mn;

  // Hue in sextants is n / c; hue_bin = floor(16 n / (6 c)).
  std::uint64_t hue_bin = 0;
  if (c != 0) {
    std::int64_t n;
    if (mx == r) {
      n = static_cast<std::int64_t>(g) - static_cast<std::int64_t>(b);
      if (n < 0) n += static_cast<std::int64_t>(6 * c);
    } else if (mx == g) {
      n = static_cast<std::int64_t>(b) - static_cast<std::int64_t>(r) + static_cast<std::int64_t>(2 * c);
    } else {
      n = static_cast<std::int64_t>(r) - static_cast<std::int64_t>(g) + static_cast<std::int64_t>(4 * c);
    }
    hue_bin = std::min<std::uint64_t>(kHueBins - 1, 8 * static_cast<std::uint64_t>(n) / (3 * c));
  }
  const std::uint64_t sat_bin = mx == 0 ? 0 : std::min<std::uint64_t>(kSaturationBins - 1, 4 * c / mx);
  const std::uint64_t val_bin = std::min<std::uint64_t>(kValueBins - 1, 4 * mx / maxval);
  return static_cast<int>((hue_bin * kSaturationBins + sat_bin) * kValueBins + val_bin);
}

std::vector<Bytes> FeatureSet::items() const {
  std::vector<Bytes> out;
  out.reserve(features.size());
  for (auto f : features) out.push_back(to_bytes(std::to_string(f)));
  return out;
}

FeatureSet extract_features(const RgbImage& image, const Fraction& threshold) {
  if (image.pixel_count() == 0) fail(ErrorCode::kInvalidArgument, "image has no pixels");
  if (image.samples.size() != image.pixel_count() * 3) {
    fail(ErrorCode::kMalformedInput, "pixel buffer does not match the image size");
  }
  if (threshold.den == 0) fail(ErrorCode::kInvalidArgument, "threshold has a zero denominator");
  std::array<std::uint64_t, kFeatureBins> hist{};
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const auto* px = &image.samples[3 * i];
    ++hist[static_cast<std::size_t>(hsv_bin(px[0], px[1], px[2], image.maxval))];
  }
  FeatureSet out;
  const auto total = static_cast<unsigned __int128>(image.pixel_count());
  for (int bin = 0; bin < kFeatureBins; ++bin) {
    if (static_cast<unsigned __int128>(hist[bin]) * threshold.den > total * threshold.num) {
      out.features.insert(static_cast<std::uint16_t>(bin));
    }
  }
  return out;
}

FeatureSet parse_feature_file(std::string_view text) {
  FeatureSet out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size() || v >= kFeatureBins) {
      fail(ErrorCode::kMalformedInput, "feature file: bad bin identifier '" + line + "'");
    }
    out.features.insert(static_cast<std::uint16_t>(v));
  }
  return out;
}

std::string format_features(const FeatureSet& set) {
  std::string out;
  for (auto f : set.features) out += std::to_string(f) + "\n";
  return out;
}

}  // namespace espresso
