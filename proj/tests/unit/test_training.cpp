#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradres/model.hpp"
#include "gradres/train.hpp"

namespace gradres {
namespace {

ModelSpec spec_for(ResidualKind kind, std::size_t d = 16, std::uint64_t seed = 1,
                   std::optional<double> alpha = std::nullopt) {
  ModelSpec s;
  s.hidden_dim = d;
  s.variant = ResidualVariantSpec::make(kind, d, alpha);
  s.weight_init_seed = seed;
  return s;
}

std::vector<Sample> small_dataset(std::size_t n, std::uint64_t seed, double noise = 0.1) {
  SinDatasetConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.noise_std = noise;
  return generate_dataset(cfg);
}

TEST(Model, ParameterCounts) {
  EXPECT_EQ(Model::build(spec_for(ResidualKind::Regular)).parameter_count(), 593u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::Standard)).parameter_count(), 593u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::GradOnly)).parameter_count(), 593u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::GradMagnitudeConcat)).parameter_count(), 594u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::StandardTrainableScalar)).parameter_count(), 594u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::ConvexCombined, 16, 1, 3.0)).parameter_count(), 594u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::IndependentScalars, 16, 1, 3.0)).parameter_count(), 595u);
  EXPECT_EQ(Model::build(spec_for(ResidualKind::SampleDependentScalars, 16, 1, 3.0)).parameter_count(),
            593u + 2 * 17);
  std::size_t counted = 0;
  for (const Tensor* p : Model::build(spec_for(ResidualKind::Regular)).parameters()) counted += p->size();
  EXPECT_EQ(counted, 593u);
}

TEST(Model, LayerShapes) {
  const Model m = Model::build(spec_for(ResidualKind::GradMagnitudeConcat, 32));
  EXPECT_EQ(m.input_layer().weight.shape(), (Shape{32, 1}));
  EXPECT_EQ(m.output_layer().weight.shape(), (Shape{1, 33}));
  EXPECT_EQ(m.block().dim(), 32u);
}

TEST(Model, InitializationIsDeterministicAndBounded) {
  const Model a = Model::build(spec_for(ResidualKind::Regular, 16, 42));
  const Model b = Model::build(spec_for(ResidualKind::Regular, 16, 42));
  const Model c = Model::build(spec_for(ResidualKind::Regular, 16, 43));
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), c.digest());
  for (double w : a.input_layer().weight.data()) EXPECT_LE(std::abs(w), 1.0);
  for (double w : a.block().sub_network().layers()[0].weight.data()) EXPECT_LE(std::abs(w), 0.25);
  for (double v : a.input_layer().bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, SameSeedSameWeightsAcrossComparableKinds) {
  const Model std_model = Model::build(spec_for(ResidualKind::Standard, 16, 9));
  const Model cc = Model::build(spec_for(ResidualKind::ConvexCombined, 16, 9, -3.0));
  EXPECT_EQ(std_model.output_layer().weight, cc.output_layer().weight);
}

TEST(EvaluateMse, ConstantPredictor) {
  Model m = Model::build(spec_for(ResidualKind::Regular));
  LinearLayer& out = m.output_layer();
  out.weight.fill(0.0);
  out.bias.fill(0.0);
  std::vector<Sample> zeros(11);
  for (std::size_t i = 0; i < zeros.size(); ++i) zeros[i].x = -5.0 + i;
  EXPECT_EQ(evaluate_mse(m, zeros), 0.0);
  out.bias.fill(0.3);
  EXPECT_NEAR(evaluate_mse(m, zeros), 0.09, 1e-15);
}

TEST(EvaluateMse, UntrainedModelsStayInSanityBand) {
  const auto grid = generate_test_grid(1001, -4 * std::numbers::pi, 4 * std::numbers::pi);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (ResidualKind kind : {ResidualKind::Regular, ResidualKind::ConvexCombined}) {
      const auto alpha = sweeps_alpha_init(kind) ? std::optional<double>(3.0) : std::nullopt;
      const double mse = evaluate_mse(Model::build(spec_for(kind, 16, seed, alpha)), grid);
      EXPECT_GE(mse, 0.1) << seed;
      EXPECT_LE(mse, 10.0) << seed;
    }
  }
}

TEST(Sgd, OneStepOnLinearModelMatchesHandUpdate) {
  Tensor w = Tensor::scalar(0.5), b = Tensor::scalar(-0.25);
  const std::vector<double> xs{1.0, -2.0, 0.5}, ys{2.0, 0.0, 1.0};
  Tape tape;
  Binder binder(tape);
  const Var wv = binder.bind(w), bv = binder.bind(b);
  const Var x = tape.constant(Tensor::vector(xs));
  const Var diff = tape.sub(tape.add(tape.mul(wv, x), bv), tape.constant(Tensor::vector(ys)));
  const Var loss = tape.scale(tape.sum_all(tape.mul(diff, diff)), 1.0 / 3.0);
  binder.sgd_step(tape.backward(loss), 0.1);

  double gw = 0.0, gb = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double r = 0.5 * xs[i] - 0.25 - ys[i];
    gw += 2.0 * r * xs[i] / 3.0;
    gb += 2.0 * r / 3.0;
  }
  EXPECT_NEAR(w.item(), 0.5 - 0.1 * gw, 1e-12);
  EXPECT_NEAR(b.item(), -0.25 - 0.1 * gb, 1e-12);
}

TEST(Train, ZeroEpochsGivesInitialEvaluationOnly) {
  Model m = Model::build(spec_for(ResidualKind::Standard));
  const auto data = small_dataset(100, 1);
  const auto grid = generate_test_grid(51, -1, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const LearningCurve c = train(m, data, grid, cfg);
  EXPECT_EQ(c.eval_epochs, std::vector<std::size_t>{0});
  EXPECT_EQ(c.size(), 1u);
  EXPECT_FALSE(c.diverged);
}

TEST(Train, ZeroLearningRateKeepsMseConstant) {
  Model m = Model::build(spec_for(ResidualKind::ConvexCombined, 16, 2, 3.0));
  const auto data = small_dataset(300, 2);
  const auto grid = generate_test_grid(101, -10, 10);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 20;
  cfg.eval_every = 5;
  cfg.batch_size = 128;
  const LearningCurve c = train(m, data, grid, cfg);
  EXPECT_EQ(c.eval_epochs, (std::vector<std::size_t>{0, 5, 10, 15, 20}));
  for (double v : c.test_mse) EXPECT_EQ(v, c.test_mse.front());
}

TEST(Train, EvaluatesAtFinalEpochOffSchedule) {
  Model m = Model::build(spec_for(ResidualKind::Regular, 4));
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.eval_every = 3;
  const LearningCurve c = train(m, small_dataset(50, 3), generate_test_grid(11, -1, 1), cfg);
  EXPECT_EQ(c.eval_epochs, (std::vector<std::size_t>{0, 3, 6, 7}));
}

TEST(Train, LearnsLinearTarget) {
  SinDatasetConfig dc;
  dc.n = 512;
  dc.seed = 4;
  dc.x_min = -1.0;
  dc.x_max = 1.0;
  std::vector<Sample> data = generate_dataset(dc);
  for (Sample& s : data) s.y = 0.5 * s.x;
  Model m = Model::build(spec_for(ResidualKind::Regular));
  TrainConfig cfg;
  cfg.lr = 0.125;
  cfg.batch_size = 64;
  cfg.epochs = 300;
  cfg.eval_every = 300;
  const LearningCurve c = train(m, data, data, cfg);
  ASSERT_FALSE(c.diverged);
  EXPECT_LT(c.test_mse.back(), 1e-3);
}

TEST(Train, ShuffleIsDeterministic) {
  const auto data = small_dataset(700, 5);
  const auto grid = generate_test_grid(101, -12, 12);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.eval_every = 2;
  cfg.seed = 77;
  Model a = Model::build(spec_for(ResidualKind::GradOnly));
  Model b = Model::build(spec_for(ResidualKind::GradOnly));
  const LearningCurve ca = train(a, data, grid, cfg), cb = train(b, data, grid, cfg);
  EXPECT_EQ(ca.test_mse, cb.test_mse);
  EXPECT_EQ(ca.final_params_digest, cb.final_params_digest);
  cfg.seed = 78;
  Model c = Model::build(spec_for(ResidualKind::GradOnly));
  EXPECT_NE(train(c, data, grid, cfg).final_params_digest, ca.final_params_digest);
}

TEST(Train, DivergenceIsFlagged) {
  Model m = Model::build(spec_for(ResidualKind::Standard));
  TrainConfig cfg;
  cfg.lr = 1e6;
  cfg.epochs = 50;
  cfg.eval_every = 1;
  const LearningCurve c = train(m, small_dataset(600, 6), generate_test_grid(21, -5, 5), cfg);
  ASSERT_TRUE(c.diverged);
  ASSERT_TRUE(c.diverged_epoch);
  EXPECT_GE(*c.diverged_epoch, 1u);
  EXPECT_EQ(c.eval_epochs.size(), c.test_mse.size());
  for (double v : c.test_mse) EXPECT_TRUE(std::isfinite(v));
}

TEST(Train, VeryNegativeAlphaTracksStandard) {
  const auto data = small_dataset(1024, 7);
  const auto grid = generate_test_grid(201, -4 * std::numbers::pi, 4 * std::numbers::pi);
  TrainConfig cfg;
  cfg.epochs = 45;
  cfg.eval_every = 5;
  cfg.seed = 3;
  Model std_model = Model::build(spec_for(ResidualKind::Standard, 16, 11));
  Model cc = Model::build(spec_for(ResidualKind::ConvexCombined, 16, 11, -30.0));
  const LearningCurve a = train(std_model, data, grid, cfg), b = train(cc, data, grid, cfg);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.test_mse[i], b.test_mse[i], 1e-6);
}

// GradOnly with a constant gradient term: the parameter gradients must equal
// those of a network that adds a precomputed, normalized Jacobian row sum as
// a fixed input.
TEST(Train, GradientTermIsIsolatedWhenNotRetained) {
  const auto data = small_dataset(64, 8);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);

  Model model = Model::build(spec_for(ResidualKind::GradOnly, 8, 4));
  Tape tape;
  Binder binder(tape);
  const Gradients grads = tape.backward(minibatch_loss(tape, binder, model, data, idx));
  std::vector<Tensor> from_model;
  for (const auto& [p, v] : binder.bindings()) from_model.push_back(grads[v]);

  Model copy = model;
  Tape t2;
  Binder b2(t2);
  const auto in = copy.input_layer().bind(b2);
  const auto f = copy.block().sub_network().bind(b2);
  const auto out = copy.output_layer().bind(b2);
  Tensor xs(Shape{data.size(), 1}), ys(Shape{data.size(), 1});
  for (std::size_t i = 0; i < data.size(); ++i) {
    xs[i] = data[i].x;
    ys[i] = data[i].y;
  }
  const Var h1 = t2.activation(apply_linear(t2, in, t2.constant(xs)), Activation::Tanh);
  const Var fx = forward_trace(t2, f, h1).output;

  Tensor g_hat(Shape{data.size(), 8});
  const Tensor h1_values = t2.value(h1);
  for (std::size_t r = 0; r < data.size(); ++r) {
    Tensor row(Shape{8});
    for (std::size_t c = 0; c < 8; ++c) row[c] = h1_values.at(r, c);
    const Tensor g = vjp_sum_outputs(copy.block().sub_network(), row);
    double n = 0.0;
    for (double v : g.data()) n += v * v;
    for (std::size_t c = 0; c < 8; ++c) g_hat.at(r, c) = g[c] / (std::sqrt(n) + 1e-8);
  }
  const Var h = t2.add(fx, t2.constant(g_hat));
  const Var pred = apply_linear(t2, out, t2.activation(h, Activation::Tanh));
  const Var diff = t2.sub(pred, t2.constant(ys));
  const Var loss = t2.scale(t2.sum_all(t2.mul(diff, diff)), 1.0 / data.size());
  const Gradients g2 = t2.backward(loss);

  ASSERT_EQ(b2.bindings().size(), from_model.size());
  for (std::size_t k = 0; k < from_model.size(); ++k) {
    const Tensor expected = g2[b2.bindings()[k].second];
    ASSERT_EQ(expected.shape(), from_model[k].shape());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_NEAR(from_model[k][i], expected[i], 1e-12) << "parameter " << k;
    }
  }
}

}  // namespace
}  // namespace gradres
