#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "espresso/apps_media.hpp"
#include "espresso/session.hpp"

using namespace espresso;

namespace {

template <typename F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

std::string data_file(const std::string& name) {
  std::ifstream in(std::string(ESPRESSO_TEST_DATA) + "/" + name, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RgbImage solid(std::uint32_t w, std::uint32_t h, std::uint16_t r, std::uint16_t g, std::uint16_t b) {
  RgbImage img{w, h, 255, {}};
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.samples.push_back(r);
    img.samples.push_back(g);
    img.samples.push_back(b);
  }
  return img;
}

// Floating-point hexcone HSV, the textbook definition. Returns the scaled
// coordinates (hue in [0, 16), saturation and value in [0, 4]).
std::array<double, 3> float_coords(double r, double g, double b) {
  double mx = std::max({r, g, b}), mn = std::min({r, g, b}), c = mx - mn;
  double h = 0;
  if (c > 0) {
    if (mx == r) {
      h = std::fmod((g - b) / c + 6, 6);
    } else if (mx == g) {
      h = (b - r) / c + 2;
    } else {
      h = (r - g) / c + 4;
    }
  }
  double s = mx == 0 ? 0 : c / mx;
  return {h / 6 * 16, s * 4, mx * 4};
}

bool near_edge(const std::array<double, 3>& x) {
  for (double v : x) {
    if (std::abs(v - std::round(v)) < 1e-9) return true;
  }
  return false;
}

int float_bin(const std::array<double, 3>& x) {
  int hb = std::min(15, static_cast<int>(x[0]));
  int sb = std::min(3, static_cast<int>(x[1]));
  int vb = std::min(3, static_cast<int>(x[2]));
  return (hb * 4 + sb) * 4 + vb;
}

SessionInputs media_inputs(const FeatureSet& f, bool approximate = false) {
  SessionInputs in;
  in.items = f.items();
  in.approximate = approximate;
  return in;
}

}  // namespace

TEST(Media, BinOfPrimaries) {
  EXPECT_EQ(hsv_bin(0, 0, 0, 255), 0);
  EXPECT_EQ(hsv_bin(255, 255, 255, 255), 3);
  EXPECT_EQ(hsv_bin(255, 0, 0, 255), (0 * 4 + 3) * 4 + 3);
  EXPECT_EQ(hsv_bin(0, 255, 0, 255), (5 * 4 + 3) * 4 + 3);  // hue 120 deg
  EXPECT_EQ(hsv_bin(0, 0, 255, 255), (10 * 4 + 3) * 4 + 3);  // hue 240 deg
}

TEST(Media, BinAgreesWithFloatingPointAwayFromEdges) {
  auto rng = Rng::seeded(1);
  int checked = 0;
  for (int t = 0; t < 20000; ++t) {
    auto r = rng.uniform(256), g = rng.uniform(256), b = rng.uniform(256);
    int bin = hsv_bin(r, g, b, 255);
    ASSERT_GE(bin, 0);
    ASSERT_LT(bin, kFeatureBins);
    auto x = float_coords(r / 255.0, g / 255.0, b / 255.0);
    if (near_edge(x)) continue;
    ++checked;
    ASSERT_EQ(bin, float_bin(x)) << r << " " << g << " " << b;
  }
  EXPECT_GT(checked, 10000);
}

TEST(Media, SingleColourImageHasOneFeature) {
  auto f = extract_features(solid(8, 8, 200, 30, 30));
  EXPECT_EQ(f.features, (std::set<std::uint16_t>{static_cast<std::uint16_t>(hsv_bin(200, 30, 30, 255))}));
}

TEST(Media, ThresholdIsStrict) {
  // 512 pixels, one of them blue: exactly 1/512 does not pass.
  auto img = solid(32, 16, 255, 0, 0);
  img.samples[0] = 0;
  img.samples[2] = 255;
  EXPECT_EQ(extract_features(img).features.size(), 1u);
  EXPECT_EQ(extract_features(img, {1, 1024}).features.size(), 2u);
}

TEST(Media, PixelOrderDoesNotMatter) {
  auto img = read_ppm(std::string(ESPRESSO_TEST_DATA) + "/sunset.ppm");
  auto expected = extract_features(img);
  auto rng = Rng::seeded(2);
  std::vector<std::array<std::uint16_t, 3>> px;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    px.push_back({img.samples[3 * i], img.samples[3 * i + 1], img.samples[3 * i + 2]});
  }
  shuffle(px, rng);
  for (std::size_t i = 0; i < px.size(); ++i) {
    for (int c = 0; c < 3; ++c) img.samples[3 * i + c] = px[i][c];
  }
  EXPECT_EQ(extract_features(img), expected);
}

TEST(Media, FixturesMatchGoldenFeatures) {
  for (const char* name : {"sunset", "meadow"}) {
    auto img = read_ppm(std::string(ESPRESSO_TEST_DATA) + "/" + name + ".ppm");
    auto golden = parse_feature_file(data_file(std::string(name) + ".features"));
    EXPECT_EQ(extract_features(img), golden) << name;
  }
}

TEST(Media, PpmRoundTripAndErrors) {
  auto img = solid(3, 2, 1, 2, 3);
  auto bytes = write_ppm(img);
  auto back = parse_ppm(bytes);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.samples, img.samples);
  auto with_comment = to_bytes("P6\n# made by hand\n1 1\n255\n");
  with_comment.insert(with_comment.end(), {9, 8, 7});
  EXPECT_EQ(parse_ppm(with_comment).samples, (std::vector<std::uint16_t>{9, 8, 7}));
  auto wide = to_bytes("P6 1 1 65535\n");
  wide.insert(wide.end(), {0x12, 0x34, 0, 1, 0xff, 0xff});
  EXPECT_EQ(parse_ppm(wide).samples, (std::vector<std::uint16_t>{0x1234, 1, 0xffff}));
  EXPECT_EQ(code_of([] { parse_ppm(to_bytes("P3\n1 1\n255\n1 2 3")); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_ppm(to_bytes("P6\n2 2\n255\nabc")); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_ppm(to_bytes("P6\n0 2\n255\n")); }), ErrorCode::kMalformedInput);
}

TEST(Media, FeatureFileFormat) {
  FeatureSet f{{3, 17, 255}};
  EXPECT_EQ(format_features(f), "3\n17\n255\n");
  EXPECT_EQ(parse_feature_file("17\n3\n255\n\n"), f);
  EXPECT_EQ(code_of([] { parse_feature_file("256\n"); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_feature_file("x\n"); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(f.items()[1], to_bytes("17"));
}

TEST(Media, LoopbackExactAndSketched) {
  auto sunset = parse_feature_file(data_file("sunset.features"));
  auto meadow = parse_feature_file(data_file("meadow.features"));
  SessionConfig config;
  config.options.params = toy_params();
  auto rng = Rng::seeded(3);
  auto same = run_loopback(ProtocolId::kMedia, media_inputs(sunset), media_inputs(sunset), config, rng);
  EXPECT_EQ(same.client.similarity->jaccard, (Fraction{1, 1}));
  auto diff = run_loopback(ProtocolId::kMedia, media_inputs(sunset), media_inputs(meadow), config, rng);
  EXPECT_EQ(diff.client.similarity->jaccard, oracle_jaccard(sunset.items(), meadow.items()));
  // More hash functions than there are bins still gives a value in [0, 1].
  config.options.k = 300;
  auto sk = run_loopback(ProtocolId::kMedia, media_inputs(sunset, true), media_inputs(meadow, true),
                         config, rng);
  const auto& j = sk.client.similarity->jaccard;
  EXPECT_LE(j.num, j.den);
  EXPECT_EQ(sk.client.similarity->k, 300u);
}
