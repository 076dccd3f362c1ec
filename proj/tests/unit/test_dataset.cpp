// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "chansr/dataset.hpp"
#include "chansr/error.hpp"
#include "chansr/generate.hpp"
#include "test_util.hpp"

using namespace chansr;
using namespace chansr::dataset;

namespace {

ChannelMap ramp_map(int h, int w) {
  ChannelMap m;
  m.data = Grid4(1, kNumChannels, h, w);
  for (int c = 0; c < kNumChannels - 1; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) m.data(0, c, y, x) = static_cast<float>(y * w + x + c);
    }
  }
  for (auto& v : m.data.plane(0, kNumChannels - 1)) v = kLosCodeLos;
  return m;
}

std::multiset<float> channel_values(const Grid4& g, int c) {
  const auto p = g.plane(0, c);
  return {p.begin(), p.end()};
}

}  // namespace

TEST(Degrade, ScaleOneIsIdentity) {
  const auto m = fixtures::random_map(16, 16, 3);
  EXPECT_EQ(degrade(m, 1).data, m.data);
}

TEST(Degrade, ConstantMapUnchanged) {
  ChannelMap m;
  m.data = Grid4(1, kNumChannels, 16, 16, 0.0f);
  for (int c = 0; c < kNumChannels; ++c) {
    for (auto& v : m.data.plane(0, c)) v = c == kNumChannels - 1 ? kLosCodeNlos : 3.5f * c;
  }
  for (int s : {2, 4, 8}) EXPECT_EQ(degrade(m, s).data, m.data) << s;
}

TEST(Degrade, RampHandComputedBilinear) {
  const auto lr = degrade(ramp_map(4, 4), 2);
  // Anchors at rows/cols {0, 2}; the last row/col repeats its anchor.
  const float expect[4][4] = {{0, 1, 2, 2}, {4, 5, 6, 6}, {8, 9, 10, 10}, {8, 9, 10, 10}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_FLOAT_EQ(lr.data(0, 1, y, x), expect[y][x] + 1.0f);
  }
  EXPECT_EQ(lr.scale, 2);
}

TEST(Degrade, AnchorsExactAndShapePreserved) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = fixtures::random_map(32, 32, seed);
    for (int s : {2, 4, 8}) {
      const auto lr = degrade(m, s);
      ASSERT_EQ(lr.data.shape(), m.data.shape());
      for (int c = 0; c < kNumChannels; ++c) {
        for (int y = 0; y < 32; y += s) {
          for (int x = 0; x < 32; x += s) EXPECT_EQ(lr.data(0, c, y, x), m.data(0, c, y, x));
        }
      }
    }
  }
}

TEST(Degrade, LosCodesStayCategorical) {
  const auto m = fixtures::scene_map(5, 32);
  for (int s : {2, 4, 8}) {
    const auto lr = degrade(m, s);
    for (float v : lr.data.plane(0, ch(Channel::kLosCode))) {
      EXPECT_TRUE(v == -1.0f || v == 0.0f || v == 1.0f) << v;
    }
  }
}

TEST(Degrade, NearestNeighbourTiesGoToLowerAnchor) {
  ChannelMap m = ramp_map(8, 8);
  auto codes = m.data.plane(0, ch(Channel::kLosCode));
  std::fill(codes.begin(), codes.end(), kLosCodeNlos);
  m.data(0, ch(Channel::kLosCode), 0, 0) = kLosCodeInBuilding;
  const auto lr = degrade(m, 4);
  // Cells 0..2 are nearest to anchor 0 (cell 2 is a tie), cells 3..7 to 4.
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const float want = (y <= 2 && x <= 2) ? kLosCodeInBuilding : kLosCodeNlos;
      EXPECT_EQ(lr.data(0, ch(Channel::kLosCode), y, x), want) << y << "," << x;
    }
  }
}

TEST(Degrade, RejectsBadScale) {
  const auto m = fixtures::random_map(12, 12, 1);
  EXPECT_THROW(degrade(m, 0), InvalidArgument);
  EXPECT_THROW(degrade(m, -2), InvalidArgument);
  EXPECT_THROW(degrade(m, 5), InvalidArgument);
}

TEST(Degrade, CommutesWithTranspose) {
  const auto m = fixtures::random_map(16, 16, 9);
  for (int s : {2, 4, 8}) {
    const auto a = degrade(apply_transform(m, Transform::kTranspose), s).data;
    const auto b = apply_transform(degrade(m, s).data, Transform::kTranspose);
    EXPECT_EQ(a, b) << s;
  }
  for (Transform t : kAugmentations) {
    EXPECT_EQ(degrade(apply_transform(m, t), 1).data, apply_transform(degrade(m, 1).data, t));
  }
}

TEST(Transform, RotationDirectionAndShape) {
  Grid4 g(1, 1, 2, 3);
  for (int i = 0; i < 6; ++i) g.data()[i] = static_cast<float>(i + 1);
  const auto r = apply_transform(g, Transform::kRot90);
  ASSERT_EQ(r.shape(), (Shape4{1, 1, 3, 2}));
  const float want[3][2] = {{4, 1}, {5, 2}, {6, 3}};
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 2; ++x) EXPECT_EQ(r(0, 0, y, x), want[y][x]);
  }
  const auto fh = apply_transform(g, Transform::kFlipHorizontal);
  EXPECT_EQ(fh(0, 0, 0, 0), 3.0f);
  const auto fv = apply_transform(g, Transform::kFlipVertical);
  EXPECT_EQ(fv(0, 0, 0, 0), 4.0f);
}

TEST(Transform, InvolutionsAndCycles) {
  const auto m = fixtures::random_map(8, 8, 2);
  const auto r180 = apply_transform(m, Transform::kRot180);
  EXPECT_EQ(apply_transform(r180, Transform::kRot180).data, m.data);
  auto g = m.data;
  for (int i = 0; i < 4; ++i) g = apply_transform(g, Transform::kRot90);
  EXPECT_EQ(g, m.data);
  EXPECT_EQ(apply_transform(apply_transform(m.data, Transform::kRot90), Transform::kRot270),
            m.data);
  EXPECT_EQ(apply_transform(apply_transform(m.data, Transform::kFlipHorizontal),
                            Transform::kFlipHorizontal),
            m.data);
}

TEST(Augment, SixfoldAndPreservesValueMultisets) {
  const std::vector<ChannelMap> in{fixtures::random_map(8, 8, 1), fixtures::random_map(8, 8, 2)};
  const auto out = augment(in);
  ASSERT_EQ(out.size(), 12u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& src = in[i / 6];
    EXPECT_EQ(out[i].meta.scene_id, src.meta.scene_id);
    for (int c = 0; c < kNumChannels; ++c) {
      EXPECT_EQ(channel_values(out[i].data, c), channel_values(src.data, c));
    }
  }
  EXPECT_EQ(out[0].data, in[0].data);
  EXPECT_EQ(out[2].data, apply_transform(in[0].data, Transform::kRot180));
}

TEST(Augment, FullSizedCorpusCount) {
  std::vector<ChannelMap> in(753, ramp_map(2, 2));
  EXPECT_EQ(augment(in).size(), 4518u);
}

TEST(Augment, RejectsEmpty) { EXPECT_THROW(augment({}), InvalidArgument); }

TEST(Augment, SameTransformOnAllChannels) {
  const auto m = fixtures::random_map(8, 8, 4);
  const auto out = augment({m});
  for (std::size_t k = 0; k < kAugmentations.size(); ++k) {
    for (int c = 0; c < kNumChannels; ++c) {
      Grid4 plane(1, 1, 8, 8);
      const auto src = m.data.plane(0, c);
      std::copy(src.begin(), src.end(), plane.data());
      const auto moved = apply_transform(plane, kAugmentations[k]);
      const auto got = out[k].data.plane(0, c);
      EXPECT_TRUE(std::equal(got.begin(), got.end(), moved.data()));
    }
  }
}

TEST(Split, SevenThreeAndDeterministic) {
  DatasetManifest m;
  for (int i = 0; i < 10; ++i) {
    SampleEntry e;
    e.id = e.scene_id = "s" + std::to_string(i);
    m.samples.push_back(e);
  }
  const auto [train, test] = split(m, 0.7, 5);
  EXPECT_EQ(train.size(), 7u);
  EXPECT_EQ(test.size(), 3u);
  const auto again = split(m, 0.7, 5);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, test);
  for (const auto& t : test) {
    EXPECT_TRUE(std::none_of(train.begin(), train.end(),
                             [&](const SampleEntry& e) { return e.scene_id == t.scene_id; }));
  }
  EXPECT_THROW(split(DatasetManifest{}, 0.7, 1), InvalidArgument);
  EXPECT_THROW(split(m, 1.0, 1), InvalidArgument);
}

TEST(Split, RatioWithinOneSample) {
  for (int n : {2, 3, 7, 11, 60}) {
    DatasetManifest m;
    for (int i = 0; i < n; ++i) {
      SampleEntry e;
      e.id = e.scene_id = "s" + std::to_string(i);
      m.samples.push_back(e);
    }
    for (double ratio : {0.3, 0.5, 0.7}) {
      const auto [train, test] = split(m, ratio, 3);
      EXPECT_EQ(train.size() + test.size(), static_cast<std::size_t>(n));
      EXPECT_LE(std::abs(static_cast<double>(train.size()) - ratio * n), 1.0);
    }
  }
}

TEST(Split, NoTestSceneLeaksIntoAugmentedTraining) {
  GenerateOptions o;
  o.scenes = 10;
  o.grid = 16;
  const auto g = generate_dataset(o);
  const auto train = augment(g.select("train"));
  const auto test = g.select("test");
  std::set<std::string> test_ids;
  for (const auto& t : test) test_ids.insert(t.meta.scene_id);
  EXPECT_EQ(test_ids.size(), 3u);
  for (const auto& t : train) EXPECT_EQ(test_ids.count(t.meta.scene_id), 0u);
  EXPECT_EQ(train.size(), 42u);
}

TEST(Normalization, RoundTripAndUnitInterval) {
  const auto n = Normalization::defaults();
  const auto m = fixtures::scene_map(2, 16);
  const auto g = n.normalize(m.data);
  for (int c = 0; c < kNumChannels; ++c) {
    for (std::size_t i = 0; i < g.plane(0, c).size(); ++i) {
      const float v = g.plane(0, c)[i];
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      EXPECT_NEAR(n.denormalize(c, v), m.data.plane(0, c)[i], 1e-3);
    }
  }
  EXPECT_FLOAT_EQ(n.normalize(ch(Channel::kPathLoss), 200.0f), 1.0f);
  EXPECT_FLOAT_EQ(n.normalize(ch(Channel::kPathLoss), -200.0f), 0.0f);
}

TEST(DatasetIo, RoundTripBitExact) {
  fixtures::TempDir dir;
  GenerateOptions o;
  o.scenes = 4;
  o.grid = 16;
  const auto g = generate_dataset(o);
  save_dataset(dir.path(), g.manifest, g.maps);
  const auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.manifest(), g.manifest);
  ASSERT_EQ(ds.size(), 4u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto m = ds.load(i);
    EXPECT_EQ(std::memcmp(m.data.data(), g.maps[i].data.data(), m.data.size() * sizeof(float)),
              0);
    EXPECT_EQ(m.meta.scene_id, g.maps[i].meta.scene_id);
  }
  EXPECT_EQ(ds.load_split("train").size() + ds.load_split("test").size(), 4u);
}

TEST(DatasetIo, SampleHeaderLayout) {
  fixtures::TempDir dir;
  Grid4 g(1, 7, 2, 3, 1.5f);
  write_sample_file(dir.path() / "x.bin", g);
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "x.bin"), 28u + 7 * 2 * 3 * 4);
  std::ifstream in(dir.path() / "x.bin", std::ios::binary);
  char head[28];
  in.read(head, 28);
  EXPECT_EQ(std::string(head, 4), "CSRD");
  EXPECT_EQ(head[4], 1);
  EXPECT_EQ(head[6], 7);
  EXPECT_EQ(head[10], 2);
  EXPECT_EQ(head[14], 3);
  EXPECT_EQ(read_sample_file(dir.path() / "x.bin"), g);
}

TEST(DatasetIo, CorruptedManifestIsFormatError) {
  fixtures::TempDir dir;
  GenerateOptions o;
  o.scenes = 2;
  o.grid = 16;
  const auto g = generate_dataset(o);
  save_dataset(dir.path(), g.manifest, g.maps);
  {
    std::ofstream out(dir.path() / "manifest.json", std::ios::trunc);
    out << "{ \"format\": \"chansr-dataset\", \"version\": 1, ";
  }
  EXPECT_THROW(load_dataset(dir.path()), FormatError);

  auto text = manifest_to_json(g.manifest);
  const auto pos = text.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 12, "\"version\": 99");
  {
    std::ofstream out(dir.path() / "manifest.json", std::ios::trunc);
    out << text;
  }
  try {
    load_dataset(dir.path());
    FAIL() << "expected version error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(DatasetIo, ShapeMismatchNamesSample) {
  fixtures::TempDir dir;
  GenerateOptions o;
  o.scenes = 2;
  o.grid = 32;
  auto g = generate_dataset(o);
  save_dataset(dir.path(), g.manifest, g.maps);
  write_sample_file(dir.path() / g.manifest.samples[1].file, Grid4(1, 7, 16, 16));
  try {
    load_dataset(dir.path());
    FAIL() << "expected shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find(g.manifest.samples[1].id), std::string::npos);
  }
}

TEST(DatasetIo, MissingAndTruncatedFiles) {
  fixtures::TempDir dir;
  EXPECT_THROW(load_dataset(dir.path()), IoError);
  GenerateOptions o;
  o.scenes = 2;
  o.grid = 16;
  const auto g = generate_dataset(o);
  save_dataset(dir.path(), g.manifest, g.maps);
  std::filesystem::resize_file(dir.path() / g.manifest.samples[0].file, 20);
  EXPECT_THROW(read_sample_file(dir.path() / g.manifest.samples[0].file), FormatError);
  std::filesystem::remove(dir.path() / g.manifest.samples[0].file);
  EXPECT_THROW(load_dataset(dir.path()), IoError);
}

TEST(Generate, DeterministicAndValid) {
  GenerateOptions o;
  o.scenes = 3;
  o.grid = 32;
  const auto a = generate_dataset(o);
  const auto b = generate_dataset(o);
  EXPECT_EQ(a.manifest, b.manifest);
  for (std::size_t i = 0; i < a.maps.size(); ++i) {
    EXPECT_EQ(a.maps[i].data, b.maps[i].data);
    EXPECT_NO_THROW(validate_channel_map(a.maps[i]));
  }
  o.scenes = 0;
  EXPECT_THROW(generate_dataset(o), InvalidArgument);
}
