#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "stormchip/errors.hpp"
#include "stormchip/gradcheck.hpp"
#include "stormchip/network.hpp"
#include "stormchip/optim.hpp"
#include "test_util.hpp"

using namespace stormchip;
using testutil::random_tensor;

namespace {

Tensor batch_of(const Shape& sample, std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return random_tensor(s, seed, lo, hi);
}

Network<float> random_net(const Shape& input, std::vector<LayerSpec> layers, std::uint64_t seed) {
  Network<float> net(input, std::move(layers));
  Rng rng(seed);
  initialize_xavier(net, rng);
  return net;
}

}  // namespace

// --- builders -------------------------------------------------------------

TEST(DamageNet, ParameterCountsPerLayer) {
  const Network<float> net = build_damage_net();
  const std::vector<std::size_t> want{896, 0, 18496, 0, 73856, 0, 147584, 0, 0, 0, 3211776, 513};
  ASSERT_EQ(net.layer_count(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(net.param_count(i), want[i]) << "layer " << i + 1;
  EXPECT_EQ(net.total_param_count(), 3453121u);
}

TEST(DamageNet, ParameterCountsFromFormula) {
  // conv: (9*Cin + 1) * Cout; dense: (in + 1) * out.
  auto conv = [](std::size_t cin, std::size_t cout) { return (9 * cin + 1) * cout; };
  const std::size_t total = conv(3, 32) + conv(32, 64) + conv(64, 128) + conv(128, 128) + (6272 + 1) * 512 + 513;
  EXPECT_EQ(build_damage_net().total_param_count(), total);
}

TEST(DamageNet, ShapeTrace) {
  const Network<float> net = build_damage_net();
  const std::vector<Shape> want{{32, 148, 148}, {32, 74, 74}, {64, 72, 72}, {64, 36, 36}, {128, 34, 34}, {128, 17, 17},
                                {128, 15, 15},  {128, 7, 7},  {6272},       {6272},       {512},         {1}};
  EXPECT_EQ(net.shape_trace(), want);
}

TEST(DamageNet, VariantsKeepParameterCount) {
  for (DropoutVariant d : {DropoutVariant::none, DropoutVariant::fc, DropoutVariant::full})
    for (ActivationKind a : {ActivationKind::relu, ActivationKind::leaky_relu}) {
      DamageNetOptions o;
      o.dropout = d;
      o.activation = a;
      EXPECT_EQ(build_damage_net(o).total_param_count(), 3453121u);
    }
  DamageNetOptions fdo;
  fdo.dropout = DropoutVariant::full;
  std::size_t dropouts = 0;
  for (const LayerSpec& l : build_damage_net(fdo).layers()) dropouts += l.kind == LayerKind::dropout ? 1 : 0;
  EXPECT_EQ(dropouts, 5u);
}

TEST(DamageNet, TooSmallInputIsShapeError) {
  DamageNetOptions o;
  o.input_shape = {3, 20, 20};
  EXPECT_THROW(build_damage_net(o), ShapeError);
}

TEST(Vgg16, ThirteenConvLayersAndPositiveExtents) {
  const Network<float> net = build_vgg16_shaped<float>({3, 150, 150});
  std::size_t convs = 0;
  for (const LayerSpec& l : net.layers()) convs += l.kind == LayerKind::conv3x3 ? 1 : 0;
  EXPECT_EQ(convs, 13u);
  for (const Shape& s : net.shape_trace())
    for (std::size_t d : s) EXPECT_GT(d, 0u);
  EXPECT_EQ(net.shape_trace()[flatten_index(net)], (Shape{512 * 4 * 4}));
}

TEST(Vgg16, ConvStackHasAlmostFifteenMillionParameters) {
  const Network<float> net = build_vgg16_shaped<float>({3, 150, 150});
  std::size_t conv_params = 0;
  for (std::size_t i = 0; i < net.layer_count(); ++i)
    if (net.layer(i).kind == LayerKind::conv3x3) conv_params += net.param_count(i);
  EXPECT_EQ(conv_params, 14714688u);
  EXPECT_GT(conv_params, 13000000u);
  EXPECT_LT(conv_params, 17000000u);
}

TEST(Vgg16, FullTotalIncludesDense512Head) {
  // 4x4x512 features feeding the dense-512 / dense-1 head.
  const std::size_t head = (8192 + 1) * 512 + (512 + 1);
  EXPECT_EQ(build_vgg16_shaped<float>({3, 150, 150}).total_param_count(), 14714688u + head);
}

TEST(Vgg16, TooSmallInputIsShapeError) {
  EXPECT_THROW(build_vgg16_shaped<float>({3, 31, 64}), ShapeError);
}

// --- activations ----------------------------------------------------------

TEST(Activations, Definitions) {
  EXPECT_EQ(activate<double>(ActivationKind::relu, 0.0, -2.0), 0.0);
  EXPECT_EQ(activate<double>(ActivationKind::relu, 0.0, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(activate<double>(ActivationKind::leaky_relu, 0.1, -2.0), -0.2);
  EXPECT_EQ(activate<double>(ActivationKind::leaky_relu, 0.1, 2.0), 2.0);
  EXPECT_EQ(activate<double>(ActivationKind::sigmoid, 0.0, 0.0), 0.5);
  EXPECT_EQ(activate<double>(ActivationKind::identity, 0.0, -4.0), -4.0);
}

TEST(Activations, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_NEAR(sigmoid(-30.0), std::exp(-30.0), 1e-25);
}

TEST(Activations, LeakyAlphaValidated) {
  EXPECT_THROW(LayerSpec::act(ActivationKind::leaky_relu, 0.0).validate(), ValidationError);
  EXPECT_THROW(LayerSpec::act(ActivationKind::leaky_relu, 1.0).validate(), ValidationError);
  EXPECT_NO_THROW(LayerSpec::act(ActivationKind::leaky_relu, 0.1).validate());
}

// --- pooling / dropout / flatten -----------------------------------------

TEST(MaxPool, PicksMaximum) {
  const auto r = maxpool2x2(Tensor({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4}));
  EXPECT_EQ(r.output.size(), 1u);
  EXPECT_EQ(r.output[0], 4.0f);
  EXPECT_EQ(r.argmax[0], 3u);
}

TEST(MaxPool, ConstantImageHalvesResolution) {
  const auto r = maxpool2x2(Tensor({2, 3, 8, 6}, 0.7f));
  EXPECT_EQ(r.output.shape(), (Shape{2, 3, 4, 3}));
  for (float v : r.output.values()) EXPECT_EQ(v, 0.7f);
}

TEST(MaxPool, OddSizesTruncate) {
  EXPECT_EQ(maxpool2x2(Tensor({1, 1, 34, 34})).output.shape(), (Shape{1, 1, 17, 17}));
  EXPECT_EQ(maxpool2x2(Tensor({1, 1, 15, 15})).output.shape(), (Shape{1, 1, 7, 7}));
  // The dropped last row/column never wins even when it holds the maximum.
  Tensor x({1, 1, 3, 3});
  x[8] = 100.0f;
  x[0] = 1.0f;
  EXPECT_EQ(maxpool2x2(x).output[0], 1.0f);
}

TEST(MaxPool, TiesGoToFirstInScanOrder) {
  const auto r = maxpool2x2(Tensor({1, 1, 2, 2}, 5.0f));
  EXPECT_EQ(r.argmax[0], 0u);
}

TEST(Dropout, RateZeroIsIdentityInBothModes) {
  const Tensor x = random_tensor({4, 10}, 3);
  Rng rng(1);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::train, &rng).output, x);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::eval, nullptr).output, x);
}

TEST(Dropout, EvalModeIsIdentity) {
  const Tensor x = random_tensor({4, 10}, 3);
  EXPECT_EQ(dropout_forward(x, 0.5, Mode::eval, nullptr).output, x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng(2024);
  const auto r = dropout_forward(Tensor({100000}, 1.0f), 0.5, Mode::train, &rng);
  double sum = 0.0;
  std::size_t zeros = 0;
  for (float v : r.output.values()) {
    sum += v;
    zeros += v == 0.0f ? 1 : 0;
    ASSERT_TRUE(v == 0.0f || v == 2.0f);
  }
  EXPECT_NEAR(sum / 1e5, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.5, 0.01);
}

TEST(Dropout, TrainModeNeedsGenerator) {
  EXPECT_THROW(dropout_forward(Tensor({3}, 1.0f), 0.5, Mode::train, nullptr), UsageError);
  EXPECT_THROW(dropout_forward(Tensor({3}, 1.0f), 1.0, Mode::eval, nullptr), ValidationError);
}

// --- forward --------------------------------------------------------------

TEST(Forward, ZeroParametersGiveOneHalf) {
  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  const Network<float> net = build_damage_net(o);
  const auto fp = forward(net, batch_of({3, 46, 46}, 3, 5), Mode::eval);
  ASSERT_EQ(fp.probabilities().shape(), (Shape{3, 1}));
  for (float p : fp.probabilities().values()) EXPECT_EQ(p, 0.5f);
}

TEST(Forward, EvalRepeatIsBitwiseIdentical) {
  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  Network<float> net = build_damage_net(o);
  Rng rng(3);
  initialize_xavier(net, rng);
  const Tensor x = batch_of({3, 46, 46}, 2, 6, 0.0, 1.0);
  EXPECT_EQ(forward(net, x, Mode::eval).probabilities(), forward(net, x, Mode::eval).probabilities());
}

TEST(Forward, ToyNetMatchesHandRolledPipeline) {
  // 1x5x5 -> conv(2, relu) 2x3x3 -> pool 2x1x1 -> flatten 2 -> dense(1, sigmoid)
  const Network<float> net = random_net({1, 5, 5},
                                        {LayerSpec::conv(2, ActivationKind::relu), LayerSpec::maxpool(),
                                         LayerSpec::flatten(), LayerSpec::dense(1, ActivationKind::sigmoid)},
                                        17);
  Network<float> with_bias = net;
  with_bias.params(0).bias = Tensor({2}, std::vector<float>{0.1f, -0.05f});
  with_bias.params(3).bias = Tensor({1}, std::vector<float>{0.2f});
  const Tensor x = batch_of({1, 5, 5}, 1, 99);

  const Tensor& w = with_bias.params(0).weight;
  double feat[2];
  for (std::size_t co = 0; co < 2; ++co) {
    double best = -1e300;
    for (std::size_t oy = 0; oy < 2; ++oy)  // pooled window covers rows/cols 0..1 of the 3x3 map
      for (std::size_t ox = 0; ox < 2; ++ox) {
        double s = with_bias.params(0).bias[co];
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) s += w.at(co, ky * 3 + kx) * x[(oy + ky) * 5 + ox + kx];
        best = std::max(best, std::max(0.0, s));
      }
    feat[co] = best;
  }
  const Tensor& wd = with_bias.params(3).weight;
  const double logit = feat[0] * wd[0] + feat[1] * wd[1] + with_bias.params(3).bias[0];
  const double want = 1.0 / (1.0 + std::exp(-logit));
  EXPECT_NEAR(forward(with_bias, x, Mode::eval).probabilities()[0], want, 1e-6);
}

TEST(Forward, RejectsWrongBatchShape) {
  const Network<float> net({1, 5, 5}, {LayerSpec::flatten(), LayerSpec::dense(1, ActivationKind::sigmoid)});
  EXPECT_THROW(forward(net, Tensor({2, 1, 5, 4}), Mode::eval), ShapeError);
}

TEST(Forward, TrainModeWithDropoutNeedsGenerator) {
  const Network<float> net({4}, {LayerSpec::dropout(0.5), LayerSpec::dense(1, ActivationKind::sigmoid)});
  EXPECT_THROW(forward(net, Tensor({1, 4}), Mode::train), UsageError);
}

// --- loss / backward ------------------------------------------------------

TEST(Loss, HalfProbabilityLabelOneIsLn2) {
  Network<double> net({3}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  const auto fp = forward(net, Tensor64({1, 3}, 0.7), Mode::eval);
  EXPECT_EQ(fp.probabilities()[0], 0.5);
  const auto r = backward(net, fp, Tensor64({1, 1}, 1.0), LossKind::binary_cross_entropy, 0.0);
  EXPECT_NEAR(r.loss, std::numbers::ln2, 1e-15);
}

TEST(Loss, ZeroWeightsContributeNoPenalty) {
  Network<double> net({3}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  const auto fp = forward(net, Tensor64({1, 3}, 0.7), Mode::eval);
  const Tensor64 y({1, 1}, 1.0);
  EXPECT_EQ(backward(net, fp, y, LossKind::binary_cross_entropy, 0.0).loss,
            backward(net, fp, y, LossKind::binary_cross_entropy, 1e-2).loss);
}

TEST(Loss, PenaltyIsLambdaTimesSquaredWeightsOnly) {
  Network<double> net({2}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  net.params(0).weight = Tensor64({2, 1}, std::vector<double>{0.5, -1.5});
  net.params(0).bias = Tensor64({1}, 10.0);  // excluded from the penalty
  const Tensor64 x({1, 2}, 0.0);
  const auto fp = forward(net, x, Mode::eval);
  const Tensor64 y({1, 1}, 1.0);
  const double base = backward(net, fp, y, LossKind::binary_cross_entropy, 0.0).loss;
  const double with = backward(net, fp, y, LossKind::binary_cross_entropy, 0.1).loss;
  EXPECT_NEAR(with - base, 0.1 * (0.25 + 2.25), 1e-12);
  EXPECT_NEAR(net.grads(0).weight[1], 2 * 0.1 * -1.5, 1e-12);  // x = 0, so only the penalty
}

TEST(Loss, SaturatedWrongPredictionStillHasGradient) {
  Network<double> net({1}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  net.params(0).bias = Tensor64({1}, -50.0);
  const auto fp = forward(net, Tensor64({1, 1}, 0.0), Mode::eval);
  const auto r = backward(net, fp, Tensor64({1, 1}, 1.0), LossKind::binary_cross_entropy, 0.0);
  EXPECT_NEAR(r.loss, -std::log(1e-7), 1e-6);
  EXPECT_NEAR(net.grads(0).bias[0], -1.0, 1e-12);
}

TEST(Loss, RejectsLabelsOutsideUnitInterval) {
  Network<double> net({1}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  const auto fp = forward(net, Tensor64({1, 1}, 0.0), Mode::eval);
  EXPECT_THROW(backward(net, fp, Tensor64({1, 1}, 2.0), LossKind::binary_cross_entropy, 0.0), ValidationError);
}

TEST(Backward, FloatAgreesWithDouble) {
  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  o.dropout = DropoutVariant::none;
  Network<double> net64 = build_damage_net<double>(o);
  Rng rng(12);
  initialize_xavier(net64, rng);
  Network<float> net32 = net64.cast<float>();
  const Tensor x = batch_of({3, 46, 46}, 2, 13, 0.0, 1.0);
  const Tensor y({2, 1}, std::vector<float>{1, 0});
  const auto r32 = backward(net32, forward(net32, x, Mode::train), y, LossKind::binary_cross_entropy, 1e-6f);
  const auto r64 = backward(net64, forward(net64, x.cast<double>(), Mode::train), y.cast<double>(),
                            LossKind::binary_cross_entropy, 1e-6);
  EXPECT_NEAR(r32.loss, r64.loss, 1e-5);
  auto g32 = net32.gradient_tensors();
  auto g64 = net64.gradient_tensors();
  for (std::size_t t = 0; t < g32.size(); ++t) {
    double max_abs = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < g32[t]->size(); ++i) {
      max_abs = std::max(max_abs, std::fabs((*g64[t])[i]));
      max_diff = std::max(max_diff, std::fabs((*g32[t])[i] - (*g64[t])[i]));
    }
    EXPECT_LE(max_diff, 1e-4 * std::max(max_abs, 1e-3)) << "tensor " << t;
  }
}

// --- gradient checks ------------------------------------------------------

TEST(GradCheck, EveryLayerKindPasses) {
  const auto results = run_gradient_checks(1);
  std::set<std::string> kinds;
  for (const auto& r : results) {
    kinds.insert(r.name);
    EXPECT_TRUE(r.passed) << r.name << " seed " << r.seed << " rel error " << r.max_rel_error;
    EXPECT_GT(r.checked, 0u);
  }
  for (const char* k : {"conv3x3", "maxpool2x2", "dense", "relu", "leaky_relu", "sigmoid", "flatten", "dropout",
                        "bce_l2"})
    EXPECT_TRUE(kinds.count(k)) << k;
}

TEST(GradCheck, SingleLayerKindsPassWithTighterFloor) {
  GradCheckOptions opt;
  opt.floor = 1e-7;
  for (const auto& r : run_gradient_checks(1, opt))
    if (r.name != "stack") {
      EXPECT_TRUE(r.passed) << r.name << " seed " << r.seed << " rel error " << r.max_rel_error;
    }
}

TEST(GradCheck, CoarseStepIsFlagged) {
  // A step this large makes central differences inaccurate, so the check must fail.
  GradCheckOptions opt;
  opt.step = 0.5;
  opt.seeds = 2;
  bool any_failed = false;
  for (const auto& r : run_gradient_checks(3, opt)) any_failed = any_failed || !r.passed;
  EXPECT_TRUE(any_failed);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.1), (1.1 - 1.0) / 1.1);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9, 1e-6), 1e-3);
  EXPECT_EQ(relative_error(2.0, 2.0), 0.0);
}

// --- features / dead filters ---------------------------------------------

TEST(Features, DamageNetWidth) {
  DamageNetOptions o;
  Network<float> net = build_damage_net(o);
  Rng rng(4);
  initialize_xavier(net, rng);
  const Tensor f = extract_features(net, batch_of({3, 150, 150}, 1, 1, 0.0, 1.0));
  EXPECT_EQ(f.shape(), (Shape{1, 6272}));
}

TEST(Features, ZeroInputZeroWeightsGiveZeroFeatures) {
  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  const Network<float> net = build_damage_net(o);
  const Tensor f = extract_features(net, Tensor({2, 3, 46, 46}));
  for (float v : f.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Features, NonNegativeUnderRelu) {
  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Network<float> net = build_damage_net(o);
    Rng rng(seed);
    initialize_xavier(net, rng);
    for (auto* t : net.parameter_tensors())
      if (t->rank() == 1)
        for (float& v : t->values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    const Tensor f = extract_features(net, batch_of({3, 46, 46}, 3, seed + 100));
    for (float v : f.values()) ASSERT_GE(v, 0.0f);
  }
}

TEST(DeadFilters, AllNegativePreActivationsAreDead) {
  Network<float> net({1, 6, 6}, {LayerSpec::conv(4, ActivationKind::relu), LayerSpec::flatten(),
                                 LayerSpec::dense(1, ActivationKind::sigmoid)});
  net.params(0).bias.fill(-1.0f);
  const auto fp = forward(net, batch_of({1, 6, 6}, 2, 3), Mode::eval);
  const DeadFilterReport r = dead_filter_report(net, fp, 0);
  EXPECT_EQ(r.dead, 4u);
  EXPECT_EQ(r.fraction, 1.0);
}

TEST(DeadFilters, LeakyFiltersAreNeverDead) {
  Network<float> net = random_net({1, 6, 6},
                                  {LayerSpec::conv(8, ActivationKind::leaky_relu, 0.1), LayerSpec::flatten(),
                                   LayerSpec::dense(1, ActivationKind::sigmoid)},
                                  5);
  net.params(0).bias.fill(-1.0f);
  const auto fp = forward(net, batch_of({1, 6, 6}, 2, 3), Mode::eval);
  EXPECT_EQ(dead_filter_report(net, fp, 0).fraction, 0.0);
}

TEST(DeadFilters, RandomDamageNetFractionsInUnitInterval) {
  DamageNetOptions o;
  o.input_shape = {3, 60, 60};
  Network<float> net = build_damage_net(o);
  Rng rng(8);
  initialize_xavier(net, rng);
  const auto fp = forward(net, batch_of({3, 60, 60}, 2, 9, 0.0, 1.0), Mode::eval);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (net.layer(i).kind != LayerKind::conv3x3) continue;
    const DeadFilterReport r = dead_filter_report(net, fp, i);
    EXPECT_GE(r.fraction, 0.0);
    EXPECT_LE(r.fraction, 1.0);
    EXPECT_EQ(r.total, net.layer(i).units);
  }
  EXPECT_THROW(dead_filter_report(net, fp, 1), UsageError);
}
