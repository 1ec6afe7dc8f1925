#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pxmc/data.hpp"

using namespace pxmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "pxmc_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Two 2x2 images and their labels, byte by byte.
const std::vector<std::uint8_t> kImages{0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02,
                                        0x00, 0x00, 0x00, 0x02, 0,    255,  51,   102,  204,  0,    255,  153};
const std::vector<std::uint8_t> kLabels{0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 3, 7};

}  // namespace

TEST(TwoMoons, BalancedAndDeterministic) {
  RngStream a(1), b(1);
  const Dataset x = two_moons(100, 0.1, a);
  const Dataset y = two_moons(100, 0.1, b);
  EXPECT_EQ(std::count(x.labels.begin(), x.labels.end(), 0), 50);
  EXPECT_EQ(std::count(x.labels.begin(), x.labels.end(), 1), 50);
  EXPECT_EQ(x.features, y.features);
  EXPECT_EQ(x.labels, y.labels);
  EXPECT_EQ(x.num_classes, 2);
  RngStream c(2);
  EXPECT_NE(two_moons(100, 0.1, c).features, x.features);
  RngStream d(3);
  const Dataset odd = two_moons(101, 0.1, d);
  EXPECT_EQ(std::count(odd.labels.begin(), odd.labels.end(), 0), 51);
}

TEST(TwoMoons, NoiselessPointsOnArcs) {
  RngStream rng(4);
  const Dataset d = two_moons(200, 0.0, rng);
  for (Index i = 0; i < d.size(); ++i) {
    const double x = d.features(i, 0), y = d.features(i, 1);
    if (d.labels[static_cast<std::size_t>(i)] == 0) {
      EXPECT_NEAR(x * x + y * y, 1.0, 1e-12);
      EXPECT_GE(y, 0.0);
    } else {
      EXPECT_NEAR((x - 1.0) * (x - 1.0) + (y - 0.5) * (y - 0.5), 1.0, 1e-12);
      EXPECT_LE(y, 0.5);
    }
  }
}

TEST(Spirals, BalancedAndOnArms) {
  RngStream rng(5);
  const Dataset d = spirals(300, 3, 0.0, rng);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), k), 100);
  for (Index i = 0; i < d.size(); ++i) {
    const double r = d.features.row(i).norm();
    EXPECT_LE(r, 1.0);
  }
  RngStream again(5);
  EXPECT_EQ(spirals(300, 3, 0.0, again).features, d.features);
  EXPECT_THROW(spirals(10, 0, 0.0, rng), ConfigError);
}

TEST(Idx, HandFixture) {
  const auto img = scratch("fixture-images.idx"), lbl = scratch("fixture-labels.idx");
  write_bytes(img, kImages);
  write_bytes(lbl, kLabels);
  const Dataset d = load_idx(img.string(), lbl.string());
  ASSERT_EQ(d.size(), 2);
  ASSERT_EQ(d.dim(), 4);
  const double expected[2][4] = {{0.0, 1.0, 0.2, 0.4}, {0.8, 0.0, 1.0, 0.6}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(d.features(i, j), expected[i][j], 1e-15);
  EXPECT_EQ(d.labels, (std::vector<int>{3, 7}));
  EXPECT_EQ(d.num_classes, 8);
}

TEST(Idx, WriterRoundTripIsByteIdentical) {
  const auto img = scratch("rt-images.idx"), lbl = scratch("rt-labels.idx");
  write_idx_images(img.string(), {{0, 255, 51, 102}, {204, 0, 255, 153}}, 2, 2);
  write_idx_labels(lbl.string(), {3, 7});
  EXPECT_EQ(read_bytes(img), kImages);
  EXPECT_EQ(read_bytes(lbl), kLabels);
  const Dataset d = load_idx(img.string(), lbl.string());
  for (Index i = 0; i < d.size(); ++i)
    for (Index j = 0; j < d.dim(); ++j)
      EXPECT_EQ(static_cast<int>(std::lround(d.features(i, j) * 255.0)),
                kImages[16 + static_cast<std::size_t>(i * 4 + j)]);
  EXPECT_THROW(write_idx_images(img.string(), {{1, 2, 3}}, 2, 2), ShapeError);
}

TEST(Idx, BadMagic) {
  auto bytes = kImages;
  bytes[3] = 0x01;
  const auto img = scratch("bad-magic.idx"), lbl = scratch("ok-labels.idx");
  write_bytes(img, bytes);
  write_bytes(lbl, kLabels);
  try {
    load_idx(img.string(), lbl.string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
  EXPECT_THROW(load_idx(lbl.string(), img.string()), FormatError);
}

TEST(Idx, TruncatedFiles) {
  const auto img = scratch("short-images.idx"), lbl = scratch("short-labels.idx");
  write_bytes(img, std::vector<std::uint8_t>(kImages.begin(), kImages.end() - 1));
  write_bytes(lbl, kLabels);
  EXPECT_THROW(load_idx(img.string(), lbl.string()), FormatError);
  write_bytes(img, std::vector<std::uint8_t>(kImages.begin(), kImages.begin() + 10));
  EXPECT_THROW(load_idx(img.string(), lbl.string()), FormatError);
  write_bytes(img, kImages);
  write_bytes(lbl, std::vector<std::uint8_t>(kLabels.begin(), kLabels.end() - 1));
  EXPECT_THROW(load_idx(img.string(), lbl.string()), FormatError);
}

TEST(Idx, CountMismatch) {
  const auto img = scratch("mm-images.idx"), lbl = scratch("mm-labels.idx");
  write_bytes(img, kImages);
  write_idx_labels(lbl.string(), {1, 2, 3});
  EXPECT_THROW(load_idx(img.string(), lbl.string()), FormatError);
}

TEST(Idx, MissingFileIsIoError) {
  EXPECT_THROW(load_idx(scratch("nope-a").string(), scratch("nope-b").string()), IoError);
}

TEST(Csv, HeaderOptional) {
  const auto with = scratch("with-header.csv"), without = scratch("no-header.csv");
  write_text(with, "x,y,label\n0.5,-1,0\n2,3.25,2\n");
  write_text(without, "0.5,-1,0\n2,3.25,2\n");
  for (const auto& p : {with, without}) {
    const Dataset d = load_csv(p.string());
    ASSERT_EQ(d.size(), 2);
    EXPECT_EQ(d.dim(), 2);
    EXPECT_EQ(d.features(1, 1), 3.25);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 2}));
    EXPECT_EQ(d.num_classes, 3);
  }
}

TEST(Csv, Errors) {
  const auto p = scratch("bad.csv");
  write_text(p, "1,2,0\n1,0\n");
  EXPECT_THROW(load_csv(p.string()), FormatError);
  write_text(p, "1,2,0\n1,x,0\n");
  EXPECT_THROW(load_csv(p.string()), FormatError);
  write_text(p, "1,2,0.5\n");
  EXPECT_THROW(load_csv(p.string()), FormatError);
  write_text(p, "1,2,-1\n");
  EXPECT_THROW(load_csv(p.string()), FormatError);
  write_text(p, "1\n");
  EXPECT_THROW(load_csv(p.string()), FormatError);
  EXPECT_THROW(load_csv(scratch("missing.csv").string()), IoError);
}

TEST(Dataset, ValidateAndSlice) {
  RngStream rng(6);
  Dataset d = two_moons(10, 0.1, rng);
  EXPECT_NO_THROW(d.validate());
  const Dataset s = d.slice(2, 3);
  EXPECT_EQ(s.size(), 3);
  EXPECT_EQ(s.features.row(0), d.features.row(2));
  d.labels[0] = 5;
  EXPECT_THROW(d.validate(), FormatError);
  d.labels.pop_back();
  EXPECT_THROW(d.validate(), FormatError);
}

TEST(Dataset, SplitTags) {
  RngStream rng(7);
  const Dataset d = two_moons(10, 0.1, rng);
  const auto [train, valid] = split_dataset(d, 7);
  EXPECT_EQ(train.size(), 7);
  EXPECT_EQ(valid.size(), 3);
  EXPECT_EQ(train.split, "train");
  EXPECT_EQ(valid.split, "validation");
  EXPECT_EQ(valid.features.row(0), d.features.row(7));
  EXPECT_THROW(split_dataset(d, 11), ConfigError);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  RngStream rng(8);
  Dataset d = two_moons(500, 0.1, rng);
  d.features.col(1).setConstant(3.0);
  const auto st = standardize(d);
  EXPECT_NEAR(d.features.col(0).mean(), 0.0, 1e-12);
  EXPECT_NEAR(d.features.col(0).squaredNorm() / 500.0, 1.0, 1e-12);
  EXPECT_EQ(st.scale(1), 1.0);
  EXPECT_TRUE(d.features.col(1).isZero(0.0));
  Dataset other = two_moons(5, 0.1, rng);
  EXPECT_NO_THROW(apply_standardization(other, st));
  Dataset wide;
  wide.features.resize(2, 3);
  EXPECT_THROW(apply_standardization(wide, st), ShapeError);
}

TEST(Batches, FullBatchCoversDataset) {
  RngStream rng(9);
  const Dataset d = two_moons(20, 0.1, rng);
  BatchIterator it(d, 20, RngStream(1));
  EXPECT_EQ(it.batches_per_epoch(), 1);
  auto idx = it.next_indices();
  std::sort(idx.begin(), idx.end());
  for (Index i = 0; i < 20; ++i) EXPECT_EQ(idx[static_cast<std::size_t>(i)], i);
}

TEST(Batches, EveryExampleOncePerEpoch) {
  RngStream rng(10);
  const Dataset d = two_moons(23, 0.1, rng);
  BatchIterator it(d, 5, RngStream(2));
  EXPECT_EQ(it.batches_per_epoch(), 5);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::multiset<Index> seen;
    std::vector<Index> sizes;
    for (Index b = 0; b < it.batches_per_epoch(); ++b) {
      const auto idx = it.next_indices();
      sizes.push_back(static_cast<Index>(idx.size()));
      seen.insert(idx.begin(), idx.end());
    }
    EXPECT_EQ(sizes, (std::vector<Index>{5, 5, 5, 5, 3}));
    EXPECT_EQ(seen.size(), 23u);
    EXPECT_EQ(std::set<Index>(seen.begin(), seen.end()).size(), 23u);
  }
  EXPECT_EQ(it.epoch(), 2);
}

TEST(Batches, BatchRowsMatchIndices) {
  RngStream rng(11);
  const Dataset d = two_moons(12, 0.1, rng);
  BatchIterator a(d, 4, RngStream(3)), b(d, 4, RngStream(3));
  for (int k = 0; k < 6; ++k) {
    const auto idx = a.next_indices();
    const Batch batch = b.next();
    ASSERT_EQ(batch.size(), 4);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      EXPECT_EQ(batch.x.row(static_cast<Index>(r)), d.features.row(idx[r]));
      EXPECT_EQ(batch.y[r], d.labels[static_cast<std::size_t>(idx[r])]);
    }
  }
}

TEST(Batches, SameSeedSameSequence) {
  RngStream rng(12);
  const Dataset d = two_moons(30, 0.1, rng);
  BatchIterator a(d, 7, RngStream(4)), b(d, 7, RngStream(4)), c(d, 7, RngStream(5));
  bool differs = false;
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next_indices();
    EXPECT_EQ(x, b.next_indices());
    differs = differs || x != c.next_indices();
  }
  EXPECT_TRUE(differs);
}

TEST(Batches, RejectsBadSize) {
  RngStream rng(13);
  const Dataset d = two_moons(10, 0.1, rng);
  EXPECT_THROW(BatchIterator(d, 0, RngStream(1)), ConfigError);
  EXPECT_THROW(BatchIterator(d, 11, RngStream(1)), ConfigError);
}
