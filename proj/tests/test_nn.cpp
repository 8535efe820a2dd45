#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include <nlohmann/json.hpp>

#include "rlda/nn/adam.hpp"
#include "rlda/nn/checkpoint.hpp"
#include "rlda/nn/qnetwork.hpp"

using namespace rlda;
using namespace rlda::nn;

namespace {

using MatD = Matrix<double>;

MatD random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Central-difference check of every parameter entry against the analytic
// gradient of loss = sum(weights .* f(x)). `run` performs a forward pass and
// returns the output; `backprop` accumulates analytic gradients for dL/dy.
double worst_param_error(const std::vector<Param<double>*>& params, const std::function<MatD()>& run,
                         const std::function<void(const MatD&)>& backprop, const MatD& weights, double h = 1e-4) {
  for (auto* p : params) p->zero_grad();
  run();
  backprop(weights);
  double worst = 0.0;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      const double up = run().cwiseProduct(weights).sum();
      p->value.data()[i] = orig - h;
      const double down = run().cwiseProduct(weights).sum();
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, rel_error(p->grad.data()[i], numeric));
    }
  }
  return worst;
}

double worst_input_error(MatD& x, const std::function<MatD()>& run, const MatD& analytic, const MatD& weights,
                         double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = run().cwiseProduct(weights).sum();
    x.data()[i] = orig - h;
    const double down = run().cwiseProduct(weights).sum();
    x.data()[i] = orig;
    worst = std::max(worst, rel_error(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

Architecture tiny_arch() {
  Architecture a;
  a.input_freq = 4;
  a.input_time = 5;
  a.conv1_filters = 2;
  a.conv2_filters = 3;
  a.lstm_units = 3;
  a.dense_units = 6;
  a.dropout = 0.0;
  return a;
}

}  // namespace

TEST(GradientCheck, Conv2D) {
  for (bool relu : {false, true}) {
    Conv2D<double> conv("c", 5, 4, 2, 3, 3, relu);
    Rng rng(1);
    conv.init(rng);
    conv.bias().value = random_matrix(1, 3, 2, 0.1);
    MatD x = random_matrix(2, conv.in_features(), 3);
    const MatD w = random_matrix(2, conv.out_features(), 4);
    typename Conv2D<double>::Cache cache;
    auto run = [&] { return conv.forward(x, &cache); };
    MatD dx;
    auto back = [&](const MatD& dy) { dx = conv.backward(cache, dy, true); };
    EXPECT_LT(worst_param_error({&conv.weight(), &conv.bias()}, run, back, w), 1e-4);
    EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
  }
}

TEST(GradientCheck, BatchNormTrainMode) {
  BatchNorm<double> bn("bn", 3);
  bn.init();
  bn.gamma().value = random_matrix(1, 3, 5, 1.0);
  bn.beta().value = random_matrix(1, 3, 6, 1.0);
  MatD x = random_matrix(4, 6 * 3, 7);
  const MatD w = random_matrix(4, 6 * 3, 8);
  typename BatchNorm<double>::Cache cache;
  auto run = [&] { return bn.forward(x, true, &cache); };
  MatD dx;
  auto back = [&](const MatD& dy) { dx = bn.backward(cache, dy); };
  EXPECT_LT(worst_param_error({&bn.gamma(), &bn.beta()}, run, back, w), 1e-4);
  EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
}

TEST(GradientCheck, BatchNormFrozen) {
  BatchNorm<double> bn("bn", 2);
  bn.init();
  bn.moving_mean().value = random_matrix(1, 2, 9, 0.5);
  bn.moving_variance().value = random_matrix(1, 2, 10, 0.3).array().abs() + 0.5;
  bn.set_frozen(true);
  MatD x = random_matrix(3, 8, 11);
  const MatD w = random_matrix(3, 8, 12);
  typename BatchNorm<double>::Cache cache;
  auto run = [&] { return bn.forward(x, true, &cache); };
  MatD dx;
  auto back = [&](const MatD& dy) { dx = bn.backward(cache, dy); };
  EXPECT_LT(worst_param_error({&bn.gamma(), &bn.beta()}, run, back, w), 1e-4);
  EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
}

TEST(GradientCheck, Lstm) {
  Lstm<double> lstm("lstm", 6, 5, 4);
  Rng rng(13);
  lstm.init(rng);
  lstm.bias().value += random_matrix(1, 16, 14, 0.2);
  MatD x = random_matrix(3, lstm.in_features(), 15);
  const MatD w = random_matrix(3, 4, 16);
  typename Lstm<double>::Cache cache;
  auto run = [&] { return lstm.forward(x, &cache); };
  MatD dx;
  auto back = [&](const MatD& dy) { dx = lstm.backward(cache, dy, true); };
  EXPECT_LT(worst_param_error({&lstm.kernel(), &lstm.recurrent_kernel(), &lstm.bias()}, run, back, w), 1e-4);
  EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
}

TEST(GradientCheck, Dense) {
  for (bool relu : {false, true}) {
    Dense<double> dense("d", 5, 7, relu);
    Rng rng(17);
    dense.init(rng);
    dense.bias().value = random_matrix(1, 7, 18, 0.1);
    MatD x = random_matrix(4, 5, 19);
    const MatD w = random_matrix(4, 7, 20);
    typename Dense<double>::Cache cache;
    auto run = [&] { return dense.forward(x, &cache); };
    MatD dx;
    auto back = [&](const MatD& dy) { dx = dense.backward(cache, dy, true); };
    EXPECT_LT(worst_param_error({&dense.weight(), &dense.bias()}, run, back, w), 1e-4);
    EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
  }
}

TEST(GradientCheck, DropoutWithFixedMask) {
  Dropout<double> drop(0.5);
  typename Dropout<double>::Cache cache;
  Rng rng(21);
  MatD x = random_matrix(3, 8, 22);
  drop.forward(x, true, rng, &cache);
  const MatD mask = cache.mask;
  const MatD w = random_matrix(3, 8, 23);
  auto run = [&] { return MatD(x.cwiseProduct(mask)); };
  const MatD dx = drop.backward(cache, w);
  EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
}

TEST(GradientCheck, WholeNetwork) {
  QNetwork<double> net(tiny_arch(), 24);
  net.set_mode(Mode::Train);
  MatD x = random_matrix(3, net.input_width(), 25);
  const MatD w = random_matrix(3, 4, 26);
  typename QNetwork<double>::Cache cache;
  auto run = [&] { return net.forward(x, &cache); };
  MatD dx;
  auto back = [&](const MatD& dy) { net.backward(cache, dy, &dx); };
  EXPECT_LT(worst_param_error(net.parameters(), run, back, w), 1e-4);
  EXPECT_LT(worst_input_error(x, run, dx, w), 1e-4);
}

TEST(Backward, DroppedPathHasZeroGradient) {
  Architecture a = tiny_arch();
  a.dropout = 0.5;
  QNetwork<double> net(a, 27);
  net.set_mode(Mode::Train);
  typename QNetwork<double>::Cache cache;
  net.forward(random_matrix(2, net.input_width(), 28), &cache);
  cache.dropout.mask.setZero();
  net.zero_grad();
  net.backward(cache, MatD::Ones(2, 4));
  for (const char* name : {"dense1.kernel", "dense1.bias", "lstm.kernel", "conv1.kernel"})
    EXPECT_EQ(net.find(name)->grad.cwiseAbs().maxCoeff(), 0.0) << name;
  EXPECT_GT(net.find("dense2.bias")->grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, RequiresCachedForward) {
  QNetwork<double> net(tiny_arch(), 29);
  typename QNetwork<double>::Cache cache;
  EXPECT_THROW(net.backward(cache, MatD::Ones(1, 4)), Error);
  net.forward(random_matrix(1, net.input_width(), 30), &cache);
  net.backward(cache, MatD::Ones(1, 4));
  EXPECT_THROW(net.backward(cache, MatD::Ones(1, 4)), Error);
}

TEST(Backward, DuplicatedRowsGetIdenticalInputGradients) {
  QNetwork<double> net(tiny_arch(), 31);
  net.set_mode(Mode::Train);
  const MatD row = random_matrix(1, net.input_width(), 32);
  MatD x(4, net.input_width());
  for (int r = 0; r < 4; ++r) x.row(r) = row;
  typename QNetwork<double>::Cache cache;
  net.forward(x, &cache);
  MatD dx;
  net.backward(cache, MatD::Ones(4, 4), &dx);
  for (int r = 1; r < 4; ++r) EXPECT_LT((dx.row(r) - dx.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, ZeroFinalLayerOutputsBias) {
  QNet net(Architecture{}, 33);
  auto* k = net.find("dense2.kernel");
  k->value.setZero();
  net.find("dense2.bias")->value << 0.25f, -1.5f, 3.0f, 0.0f;
  const auto q = net.predict(Matrix<float>::Random(2, net.input_width()) * 50.0f);
  for (int r = 0; r < 2; ++r) {
    EXPECT_EQ(q(r, 0), 0.25f);
    EXPECT_EQ(q(r, 1), -1.5f);
    EXPECT_EQ(q(r, 2), 3.0f);
    EXPECT_EQ(q(r, 3), 0.0f);
  }
}

TEST(Forward, EvalIsBatchIndependent) {
  Architecture a;
  a.conv1_filters = 4;
  a.conv2_filters = 8;
  QNet net(a, 34);
  net.set_mode(Mode::Eval);
  const Matrix<float> x = Matrix<float>::Random(8, net.input_width()) * 20.0f;
  const auto all = net.forward(x);
  const auto all_predict = net.predict(x);
  for (int r = 0; r < 8; ++r) {
    const auto one = net.predict(x.row(r));
    for (int c = 0; c < 4; ++c) {
      EXPECT_NEAR(one(0, c), all(r, c), 1e-5);
      EXPECT_EQ(all(r, c), all_predict(r, c));
    }
  }
}

TEST(Forward, MatchesIndependentReference) {
  std::ifstream in(std::filesystem::path(RLDA_TEST_DATA_DIR) / "nn_reference.json");
  const auto doc = nlohmann::json::parse(in);
  Architecture a;
  a.conv1_filters = doc["architecture"]["conv1_filters"];
  a.conv2_filters = doc["architecture"]["conv2_filters"];
  QNet net(a, 0);
  for (auto* p : net.parameters()) {
    const auto values = doc["weights"].at(p->name).get<std::vector<float>>();
    ASSERT_EQ(static_cast<Eigen::Index>(values.size()), p->value.size()) << p->name;
    std::copy(values.begin(), values.end(), p->value.data());
  }
  for (std::size_t s = 0; s < doc["features"].size(); ++s) {
    const dsp::FeatureMatrix f(doc["features"][s].get<std::vector<float>>());
    const auto q = net.predict(to_batch(f));
    const auto expect = doc["outputs"][s].get<std::vector<double>>();
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(q(0, c), expect[static_cast<std::size_t>(c)], 1e-5);
  }
}

TEST(Forward, RejectsShapeMismatch) {
  QNet net(tiny_arch(), 35);
  EXPECT_THROW(net.predict(Matrix<float>::Zero(1, 7)), ValueError);
}

TEST(Dropout, TrainExpectationMatchesEval) {
  Dropout<double> drop(0.3);
  Rng rng(36);
  const MatD x = random_matrix(1, 256, 37).cwiseAbs();
  double acc = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += drop.forward(x, true, rng, nullptr).sum();
  EXPECT_NEAR(acc / draws / x.sum(), 1.0, 0.01);
}

TEST(Dropout, NetworkTrainExpectationMatchesEval) {
  Architecture a = tiny_arch();
  a.dropout = 0.3;
  a.dense_units = 64;
  QNetwork<double> net(a, 38);
  net.set_batch_norm_frozen(true);
  const MatD x = random_matrix(1, net.input_width(), 39);
  const MatD eval = net.predict(x);
  net.set_mode(Mode::Train);
  MatD acc = MatD::Zero(1, 4);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += net.forward(x);
  acc /= draws;
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(acc(0, c), eval(0, c), 0.01 * std::max(1.0, std::abs(eval(0, c))));
}

TEST(BatchNorm, UpdatesRunningStatsOnlyInTrainMode) {
  QNetwork<double> net(tiny_arch(), 40);
  const MatD before = net.find("bn1.moving_mean")->value;
  const MatD x = random_matrix(3, net.input_width(), 41);
  net.forward(x);
  EXPECT_EQ(net.find("bn1.moving_mean")->value, before);
  net.set_mode(Mode::Train);
  net.forward(x);
  EXPECT_NE(net.find("bn1.moving_mean")->value, before);
  const MatD after = net.find("bn1.moving_mean")->value;
  net.set_batch_norm_frozen(true);
  net.forward(x);
  EXPECT_EQ(net.find("bn1.moving_mean")->value, after);
}

TEST(Architecture, DefaultParameterCount) {
  // conv1 5*5*1*32+32, bn 2*32, conv2 3*3*32*64+64,
  // lstm (40*64)*64 + 16*64 + 64, dense1 16*256+256, dense2 256*4+4
  const std::size_t expected = (800 + 32) + 64 + (18432 + 64) + (163840 + 1024 + 64) + (4096 + 256) + (1024 + 4);
  QNet net;
  EXPECT_EQ(net.parameter_count(), expected);
  EXPECT_EQ(net.parameter_count(false), expected + 64);
  EXPECT_EQ(expected, 189700u);
}

TEST(Architecture, DescriptorRoundTrip) {
  Architecture a;
  a.conv1_filters = 8;
  a.dropout = 0.25;
  EXPECT_EQ(Architecture::parse(a.describe()), a);
  EXPECT_NE(a.hash(), Architecture{}.hash());
  EXPECT_THROW(Architecture::parse("input=40x87;garbage"), FormatError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  QNetwork<double> net(tiny_arch(), 42);
  Adam<double> opt;
  const auto before = net.find("lstm.kernel")->value;
  net.zero_grad();
  opt.step(net.trainable_parameters());
  EXPECT_EQ(net.find("lstm.kernel")->value, before);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ConstantGradientStepApproachesLearningRateTimesSign) {
  Param<double> p("w", 1, 3);
  Adam<double> opt;
  for (int i = 0; i < 500; ++i) {
    p.grad << 0.5, -2.0, 1e-3;
    const MatD before = p.value;
    opt.step({&p});
    const MatD delta = p.value - before;
    if (i >= 100) {
      EXPECT_NEAR(delta(0, 0), -2.5e-4, 1e-9);
      EXPECT_NEAR(delta(0, 1), 2.5e-4, 1e-9);
      EXPECT_NEAR(delta(0, 2), -2.5e-4, 1e-6);
    }
  }
}

TEST(Adam, NaNGradientAbortsAndNamesParameter) {
  QNetwork<double> net(tiny_arch(), 43);
  Adam<double> opt;
  net.zero_grad();
  net.find("dense1.bias")->grad(0, 2) = std::numeric_limits<double>::quiet_NaN();
  net.find("conv1.kernel")->grad.setConstant(1.0);
  const auto before = net.find("conv1.kernel")->value;
  try {
    opt.step(net.trainable_parameters());
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("dense1.bias"), std::string::npos);
  }
  EXPECT_EQ(net.find("conv1.kernel")->value, before);
}

TEST(Adam, TrainingIsDeterministic) {
  auto run = [] {
    QNetwork<double> net(tiny_arch(), 44);
    net.set_mode(Mode::Train);
    Adam<double> opt;
    const MatD x = random_matrix(4, net.input_width(), 45);
    for (int i = 0; i < 5; ++i) {
      typename QNetwork<double>::Cache c;
      net.forward(x, &c);
      net.zero_grad();
      net.backward(c, MatD::Ones(4, 4));
      opt.step(net.trainable_parameters());
    }
    return net.find("lstm.kernel")->value;
  };
  EXPECT_EQ(run(), run());
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() / ("rlda_ckpt_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::filesystem::path dir;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  Architecture a;
  a.conv1_filters = 4;
  a.conv2_filters = 6;
  QNet net(a, 46);
  net.set_mode(Mode::Train);
  Adam<float> opt;
  const Matrix<float> x = Matrix<float>::Random(3, net.input_width()) * 30.0f;
  for (int i = 0; i < 2; ++i) {
    QNet::Cache c;
    net.forward(x, &c);
    net.zero_grad();
    net.backward(c, Matrix<float>::Ones(3, 4));
    opt.step(net.trainable_parameters());
  }
  CheckpointMeta meta;
  meta.stage = "rl";
  meta.step = 2;
  meta.model_version = 7;
  save_checkpoint(dir / "a.ckpt", net, &opt, meta);
  const auto ck = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(ck.net.architecture(), a);
  EXPECT_EQ(ck.meta.stage, "rl");
  EXPECT_EQ(ck.meta.model_version, 7);
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_EQ(ck.optimizer->steps(), 2);
  EXPECT_EQ(ck.optimizer->first_moments()[3], opt.first_moments()[3]);
  EXPECT_EQ(ck.net.predict(x), net.predict(x));
}

TEST_F(CheckpointTest, TruncatedOrCorruptFilesAreRejected) {
  QNet net(tiny_arch(), 47);
  auto bytes = serialize_checkpoint(net, nullptr, {});
  for (std::size_t cut : {std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(deserialize_checkpoint(part), FormatError) << cut;
  }
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(deserialize_checkpoint(flipped), FormatError);
  dsp::write_file_bytes(dir / "t.ckpt", std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 100));
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_F(CheckpointTest, VersionMismatchIsRejected) {
  QNet net(tiny_arch(), 48);
  auto bytes = serialize_checkpoint(net, nullptr, {});
  bytes[8] = 99;  // version field
  const auto sum = detail::fnv1a(std::span(bytes).first(bytes.size() - 8));
  for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + i] = static_cast<std::uint8_t>(sum >> (8 * i));
  try {
    deserialize_checkpoint(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST_F(CheckpointTest, SoftmaxHeadTransfersAsHeadSwap) {
  QNet net(tiny_arch(), 49);
  net.set_mode(Mode::Train);
  SoftmaxHead<float> head(net);
  Adam<float> opt;
  const Matrix<float> x = Matrix<float>::Random(4, net.input_width());
  const std::vector<int> labels{0, 1, 2, 3};
  net.zero_grad();
  head.train_step_loss(x, labels);
  opt.step(net.trainable_parameters());
  CheckpointMeta meta;
  meta.stage = "pretrained";
  meta.head = "softmax";
  save_checkpoint(dir / "base.ckpt", head.network(), &opt, meta);

  const auto ck = load_checkpoint(dir / "base.ckpt");
  EXPECT_EQ(ck.meta.head, "softmax");
  QNet dqn = ck.net;
  for (const auto* p : net.parameters()) EXPECT_EQ(dqn.find(p->name)->value, p->value) << p->name;
  // Linear head: raw outputs; softmax head: their normalization.
  const auto q = dqn.predict(x);
  const auto probs = head.probabilities(x);
  EXPECT_LT((softmax_rows(q) - probs).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SoftmaxHead, CrossEntropyGradientMatchesFiniteDifference) {
  QNetwork<double> net(tiny_arch(), 50);
  net.set_mode(Mode::Train);
  net.set_batch_norm_frozen(true);
  SoftmaxHead<double> head(net);
  const MatD x = random_matrix(3, net.input_width(), 51);
  const std::vector<int> labels{2, 0, 3};
  net.zero_grad();
  head.train_step_loss(x, labels);
  auto* p = net.find("dense2.kernel");
  const double h = 1e-5;
  auto loss = [&] {
    const MatD prob = softmax_rows(net.predict(x));
    double l = 0;
    for (int r = 0; r < 3; ++r) l -= std::log(prob(r, labels[static_cast<std::size_t>(r)]));
    return l / 3;
  };
  for (Eigen::Index i = 0; i < p->value.size(); ++i) {
    const double orig = p->value.data()[i];
    p->value.data()[i] = orig + h;
    const double up = loss();
    p->value.data()[i] = orig - h;
    const double down = loss();
    p->value.data()[i] = orig;
    EXPECT_LT(rel_error(p->grad.data()[i], (up - down) / (2 * h)), 1e-4);
  }
}
