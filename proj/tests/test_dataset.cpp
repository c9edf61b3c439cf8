#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "advrl/dataset.hpp"
#include "support.hpp"

using namespace advrl;

namespace {

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

void write_file(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                      const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> b;
  put_be32(b, 0x803);
  put_be32(b, count);
  put_be32(b, rows);
  put_be32(b, cols);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<unsigned char> idx_labels(std::uint32_t count, const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> b;
  put_be32(b, 0x801);
  put_be32(b, count);
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

IdxError::Kind error_kind(const std::filesystem::path& images, const std::filesystem::path& labels) {
  try {
    load_idx(images, labels);
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("expected IdxError");
  return IdxError::Kind::Io;
}

}  // namespace

TEST_CASE("shape generator") {
  ShapesConfig cfg;
  cfg.per_class = 6;
  const Dataset a = generate_shapes(cfg), b = generate_shapes(cfg);
  REQUIRE(a.size() == 60);
  CHECK(a.classes == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.images[i].pixels == b.images[i].pixels);
    CHECK(a.images[i].label == b.images[i].label);
    CHECK(a.images[i].pixels.shape() == Shape{1, 28, 28});
    for (double p : a.images[i].pixels.data()) CHECK((p >= 0.0 && p <= 1.0));
  }
  for (std::size_t c = 0; c < 10; ++c) CHECK(a.indices_of(c).size() == 6);

  cfg.split = Split::Test;
  const Dataset test = generate_shapes(cfg);
  CHECK(test.images[0].pixels != a.images[0].pixels);
  CHECK(test.provenance.find("test") != std::string::npos);

  cfg.seed = 2;
  cfg.split = Split::Train;
  CHECK(generate_shapes(cfg).images[0].pixels != a.images[0].pixels);

  cfg.per_class = 0;
  CHECK(generate_shapes(cfg).empty());
  CHECK_THROWS(Dataset{}.image_shape());

  cfg.per_class = 1;
  cfg.classes = 11;
  CHECK_THROWS_AS(generate_shapes(cfg), std::invalid_argument);
  cfg.classes = 1;
  CHECK_THROWS_AS(generate_shapes(cfg), std::invalid_argument);
}

TEST_CASE("growing per_class extends the dataset without changing earlier images") {
  ShapesConfig small;
  small.per_class = 2;
  ShapesConfig large = small;
  large.per_class = 5;
  const Dataset a = generate_shapes(small), b = generate_shapes(large);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.images[i].pixels == b.images[i].pixels);
}

TEST_CASE("IDX parsing") {
  testing::TempDir dir("idx");
  const auto img = dir / "img", lbl = dir / "lbl";

  SUBCASE("scaling of bytes") {
    write_file(img, idx_images(2, 1, 2, {0, 255, 51, 102}));
    write_file(lbl, idx_labels(2, {3, 1}));
    const Dataset ds = load_idx(img, lbl);
    REQUIRE(ds.size() == 2);
    CHECK(ds.images[0].pixels[0] == 0.0);
    CHECK(ds.images[0].pixels[1] == 1.0);
    CHECK(ds.images[1].pixels[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(ds.images[0].pixels.shape() == Shape{1, 1, 2});
    CHECK(ds.images[0].label == 3);
    CHECK(ds.classes == 4);
  }
  SUBCASE("count mismatch names both counts") {
    write_file(img, idx_images(3, 1, 1, {1, 2, 3}));
    write_file(lbl, idx_labels(2, {0, 1}));
    try {
      load_idx(img, lbl);
      FAIL("expected IdxError");
    } catch (const IdxError& e) {
      CHECK(e.kind() == IdxError::Kind::CountMismatch);
      const std::string msg = e.what();
      CHECK(msg.find('3') != std::string::npos);
      CHECK(msg.find('2') != std::string::npos);
    }
  }
  SUBCASE("bad magic") {
    auto bytes = idx_images(1, 1, 1, {7});
    bytes[3] = 0x01;
    write_file(img, bytes);
    write_file(lbl, idx_labels(1, {0}));
    CHECK(error_kind(img, lbl) == IdxError::Kind::BadMagic);
  }
  SUBCASE("truncated payload") {
    write_file(img, idx_images(2, 2, 2, {1, 2, 3, 4, 5}));
    write_file(lbl, idx_labels(2, {0, 1}));
    CHECK(error_kind(img, lbl) == IdxError::Kind::Truncated);
    write_file(img, idx_images(2, 1, 1, {1, 2}));
    write_file(lbl, idx_labels(2, {0}));
    CHECK(error_kind(img, lbl) == IdxError::Kind::Truncated);
  }
  SUBCASE("huge header extents do not overflow") {
    write_file(img, idx_images(0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFF, {1, 2, 3}));
    write_file(lbl, idx_labels(0xFFFFFFFF, {0}));
    CHECK(error_kind(img, lbl) == IdxError::Kind::Truncated);
  }
  SUBCASE("missing file names the path") {
    write_file(lbl, idx_labels(0, {}));
    try {
      load_idx(dir / "nope-images", lbl);
      FAIL("expected IdxError");
    } catch (const IdxError& e) {
      CHECK(e.kind() == IdxError::Kind::Io);
      CHECK(std::string(e.what()).find("nope-images") != std::string::npos);
    }
  }
  SUBCASE("save and reload quantizes to bytes") {
    ShapesConfig cfg;
    cfg.per_class = 2;
    const Dataset ds = generate_shapes(cfg);
    save_idx(ds, img, lbl);
    const Dataset back = load_idx(img, lbl);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.images[i].label == ds.images[i].label);
      for (std::size_t k = 0; k < ds.images[i].pixels.size(); ++k)
        CHECK(std::abs(back.images[i].pixels[k] - ds.images[i].pixels[k]) <= 0.5 / 255.0 + 1e-12);
    }
    save_idx(back, dir / "img2", dir / "lbl2");
    const Dataset again = load_idx(dir / "img2", dir / "lbl2");
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(again.images[i].pixels == back.images[i].pixels);
  }
}
