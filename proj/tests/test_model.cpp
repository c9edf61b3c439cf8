#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "advrl/checkpoint.hpp"
#include "advrl/model.hpp"
#include "support.hpp"

using namespace advrl;
using testing::random_tensor;
using testing::relative_error;
using testing::tiny_architecture;

namespace {

Model zero_final_layer(Model m) {
  auto& params = m.parameters();
  params[params.size() - 2].value = Tensor(params[params.size() - 2].value.shape(), 0.0);
  params[params.size() - 1].value = Tensor(params[params.size() - 1].value.shape(), 0.0);
  return m;
}

// Two Gaussian blobs in a 4-pixel image, centred at +/-0.5.
Dataset blobs(std::uint64_t seed, std::size_t per_class) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.15);
  Dataset ds;
  ds.classes = 2;
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      Tensor x(Shape{1, 2, 2});
      for (double& v : x.data()) v = (c == 0 ? 0.5 : -0.5) + noise(rng);
      ds.images.push_back({x, c});
    }
  return ds;
}

Architecture dense_only() {
  Architecture a;
  a.input = {1, 2, 2};
  a.classes = 2;
  a.layers = {LayerSpec::flatten(), LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(2),
              LayerSpec::softmax()};
  return a;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("architecture validation") {
  CHECK_NOTHROW(Architecture::reference().validate());
  CHECK(Architecture::reference().layer_shapes().back() == Shape{10});
  Architecture bad = tiny_architecture();
  bad.layers.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = tiny_architecture();
  bad.layers[6] = LayerSpec::dense(4);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = tiny_architecture();
  bad.layers.erase(bad.layers.begin() + 3);  // dense straight after a rank-3 pool output
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS(parse_layer_kind("lstm"));
  CHECK(parse_layer_kind(layer_name(LayerSpec::Kind::MaxPool)) == LayerSpec::Kind::MaxPool);
}

TEST_CASE("parameter checks at construction") {
  Model m = Model::initialize(tiny_architecture(), 3);
  auto params = m.parameters();
  params[0].value[0] = std::nan("");
  CHECK_THROWS_AS(Model(tiny_architecture(), params), std::invalid_argument);
  params = m.parameters();
  params.pop_back();
  CHECK_THROWS_AS(Model(tiny_architecture(), params), std::invalid_argument);
  CHECK(m.parameters()[0].name == "layer0.weight");
}

TEST_CASE("predict_probabilities") {
  std::mt19937_64 rng(1);
  const Model uniform = zero_final_layer(Model::initialize(tiny_architecture(4), 1));
  for (double p : uniform.predict_probabilities(random_tensor({1, 8, 8}, rng, 0, 1)))
    CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  const Model m = Model::initialize(tiny_architecture(), 2);
  for (int i = 0; i < 50; ++i) {
    const auto p = m.predict_probabilities(random_tensor({1, 8, 8}, rng, 0, 1));
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
    for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
  }
  CHECK_THROWS_AS(m.predict(Tensor(Shape{1, 7, 8})), ShapeError);
}

TEST_CASE("input gradient matches finite differences over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed + 100);
    const Model m = Model::initialize(tiny_architecture(), seed);
    const Tensor x = random_tensor({1, 8, 8}, rng, 0, 1);
    const std::size_t label = seed % 3;
    const auto [loss, grad] = m.loss_and_input_gradient(x, label);
    const Tensor fd = finite_difference_gradient(
        [&](const Tensor& xx) { return m.loss_and_input_gradient(xx, label).first; }, x, 1e-5);
    CHECK(relative_error(grad, fd) < 1e-4);

    const auto probs = m.predict_probabilities(x);
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(-std::log(probs[label])).epsilon(1e-9));
    const InputEvaluation ev = m.evaluate(x, label);
    CHECK(ev.loss == loss);
    CHECK(ev.input_gradient == grad);
    CHECK(ev.probabilities == probs);
  }
  CHECK_THROWS_AS(Model::initialize(tiny_architecture(), 0).loss_and_input_gradient(Tensor(Shape{1, 8, 8}), 3),
                  std::out_of_range);
}

TEST_CASE("reference model input gradient matches finite differences") {
  std::mt19937_64 rng(9);
  const Model m = Model::initialize(Architecture::reference(), 9);
  const Tensor x = random_tensor({1, 28, 28}, rng, 0, 1);
  const auto [loss, grad] = m.loss_and_input_gradient(x, 4);
  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& xx) { return m.loss_and_input_gradient(xx, 4).first; }, x, 1e-5);
  CHECK(relative_error(grad, fd) < 1e-4);
}

TEST_CASE("training") {
  SUBCASE("separable blobs reach full accuracy") {
    const Dataset train_set = blobs(1, 40), test_set = blobs(2, 40);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    const Model m = train(dense_only(), train_set, &test_set, cfg);
    CHECK(accuracy(m, test_set) == 1.0);
    REQUIRE(m.metadata().test_accuracy);
    CHECK(*m.metadata().test_accuracy == 1.0);
    CHECK(m.metadata().train_examples == 80);
  }
  SUBCASE("zero epochs leaves the initialization untouched") {
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 4;
    const Model m = train(dense_only(), blobs(1, 5), nullptr, cfg);
    const Model init = Model::initialize(dense_only(), 4);
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
      CHECK(m.parameters()[i].value == init.parameters()[i].value);
    CHECK(m.metadata().epochs == 0);
  }
  SUBCASE("same seed gives bit-identical parameters") {
    TrainConfig cfg;
    cfg.epochs = 2;
    const Model a = train(dense_only(), blobs(1, 10), nullptr, cfg);
    const Model b = train(dense_only(), blobs(1, 10), nullptr, cfg);
    cfg.seed = 2;
    const Model c = train(dense_only(), blobs(1, 10), nullptr, cfg);
    for (std::size_t i = 0; i < a.parameters().size(); ++i) CHECK(a.parameters()[i].value == b.parameters()[i].value);
    CHECK(a.parameters()[0].value != c.parameters()[0].value);
  }
  SUBCASE("bad inputs are rejected") {
    TrainConfig cfg;
    CHECK_THROWS(train(dense_only(), Dataset{}, nullptr, cfg));
    Dataset wrong = blobs(1, 2);
    wrong.images[0].label = 5;
    CHECK_THROWS(train(dense_only(), wrong, nullptr, cfg));
    cfg.batch_size = 0;
    CHECK_THROWS(train(dense_only(), blobs(1, 2), nullptr, cfg));
  }
}

TEST_CASE("penultimate features") {
  std::mt19937_64 rng(3);
  const Model m = Model::initialize(tiny_architecture(), 5);
  const Tensor x = random_tensor({1, 8, 8}, rng, 0, 1);
  const auto f = m.penultimate_features(x);
  CHECK(f.size() == 6);
  CHECK(f == m.penultimate_features(x));
}

TEST_CASE("checkpoint round trip and corruption") {
  testing::TempDir dir("ckpt");
  Model m = Model::initialize(tiny_architecture(), 8);
  m.metadata().seed = 8;
  m.metadata().test_accuracy = 0.5;
  m.metadata().dataset = "unit";
  const auto path = dir / "m.ckpt";
  save_checkpoint(m, path);
  const Model back = load_checkpoint(path);
  CHECK(back.architecture() == m.architecture());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    CHECK(back.parameters()[i].name == m.parameters()[i].name);
    CHECK(back.parameters()[i].value == m.parameters()[i].value);
  }
  CHECK(back.metadata().test_accuracy == m.metadata().test_accuracy);
  CHECK(back.metadata().dataset == "unit");
  CHECK(encode_checkpoint(back) == encode_checkpoint(m));

  const auto bytes = read_bytes(path);
  REQUIRE(bytes.size() > 40);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == kCheckpointMagic);

  auto kind_of = [](const std::vector<unsigned char>& b) {
    try {
      decode_checkpoint(b);
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  auto payload_flip = bytes;
  payload_flip[bytes.size() - 12] ^= 0x40;
  CHECK(kind_of(payload_flip) == static_cast<int>(CheckpointError::Kind::Checksum));
  auto crc_flip = bytes;
  crc_flip.back() ^= 0x01;
  CHECK(kind_of(crc_flip) == static_cast<int>(CheckpointError::Kind::Checksum));
  auto version = bytes;
  version[6] = '9';
  CHECK(kind_of(version) == static_cast<int>(CheckpointError::Kind::Version));
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(kind_of(magic) == static_cast<int>(CheckpointError::Kind::BadMagic));
  const std::vector<unsigned char> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
  CHECK(kind_of(truncated) == static_cast<int>(CheckpointError::Kind::Truncated));
  CHECK(kind_of({bytes.begin(), bytes.begin() + 3}) == static_cast<int>(CheckpointError::Kind::Truncated));

  try {
    load_checkpoint(dir / "missing.ckpt");
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::Io);
    CHECK(std::string(e.what()).find("missing.ckpt") != std::string::npos);
  }
}
