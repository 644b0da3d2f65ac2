#include "corrcast/neuralnet.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "corrcast/rng.hpp"

using namespace corrcast;

namespace {

double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// straight-line transcription of the five gate equations, scalar arithmetic
// only, used as a duplicate-implementation oracle for the cell step
void cell_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                 const Eigen::VectorXd& c_prev, const nn::LstmParams& p, Eigen::VectorXd& h_out,
                 Eigen::VectorXd& c_out) {
  const int hidden = p.hidden_size();
  const int input = p.input_size();
  h_out.resize(hidden);
  c_out.resize(hidden);
  for (int k = 0; k < hidden; ++k) {
    double zf = p.b_f(k), zi = p.b_i(k), zc = p.b_c(k), zo = p.b_o(k);
    for (int j = 0; j < hidden; ++j) {
      zf += p.w_f(k, j) * h_prev(j);
      zi += p.w_i(k, j) * h_prev(j);
      zc += p.w_c(k, j) * h_prev(j);
      zo += p.w_o(k, j) * h_prev(j);
    }
    for (int j = 0; j < input; ++j) {
      zf += p.w_f(k, hidden + j) * x(j);
      zi += p.w_i(k, hidden + j) * x(j);
      zc += p.w_c(k, hidden + j) * x(j);
      zo += p.w_o(k, hidden + j) * x(j);
    }
    const double f = scalar_sigmoid(zf);
    const double i = scalar_sigmoid(zi);
    const double c_bar = std::tanh(zc);
    const double o = scalar_sigmoid(zo);
    c_out(k) = f * c_prev(k) + i * c_bar;
    h_out(k) = o * std::tanh(c_out(k));
  }
}

nn::ModelParams random_params(int hidden, int input, std::uint64_t seed) {
  Rng rng(seed);
  return nn::init_params(hidden, input, rng);
}

double loss_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const nn::ModelParams& p,
               const nn::TrainConfig& cfg, const Eigen::MatrixXd* mask) {
  nn::ForwardCache cache;
  const Eigen::VectorXd yhat = nn::forward_batch(X, p, &cache, mask);
  return nn::loss(yhat, y, p, cfg);
}

// central finite differences over every scalar parameter
double max_fd_relative_error(nn::ModelParams p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const nn::TrainConfig& cfg, const Eigen::MatrixXd* mask) {
  nn::ForwardCache cache;
  nn::forward_batch(X, p, &cache, mask);
  const nn::Gradients g = nn::backward(X, y, cache, p, cfg);

  std::vector<std::pair<double*, double>> entries;
  const auto add_mat = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& gm) {
    for (Eigen::Index k = 0; k < m.size(); ++k) entries.emplace_back(m.data() + k, gm.data()[k]);
  };
  const auto add_vec = [&](Eigen::VectorXd& v, const Eigen::VectorXd& gv) {
    for (Eigen::Index k = 0; k < v.size(); ++k) entries.emplace_back(v.data() + k, gv.data()[k]);
  };
  add_mat(p.lstm.w_f, g.lstm.w_f);
  add_mat(p.lstm.w_i, g.lstm.w_i);
  add_mat(p.lstm.w_c, g.lstm.w_c);
  add_mat(p.lstm.w_o, g.lstm.w_o);
  add_vec(p.lstm.b_f, g.lstm.b_f);
  add_vec(p.lstm.b_i, g.lstm.b_i);
  add_vec(p.lstm.b_c, g.lstm.b_c);
  add_vec(p.lstm.b_o, g.lstm.b_o);
  add_vec(p.dense.w, g.dense.w);
  entries.emplace_back(&p.dense.b, g.dense.b);

  double worst = 0.0;
  const double h = 1e-5;
  for (auto& [ptr, analytic] : entries) {
    const double orig = *ptr;
    *ptr = orig + h;
    const double up = loss_at(X, y, p, cfg, mask);
    *ptr = orig - h;
    const double down = loss_at(X, y, p, cfg, mask);
    *ptr = orig;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

TEST(Activations, CenterValuesAndSaturation) {
  EXPECT_DOUBLE_EQ(nn::sigmoid(0.0), 0.5);
  EXPECT_DOUBLE_EQ(std::tanh(0.0), 0.0);
  EXPECT_DOUBLE_EQ(nn::double_tanh(0.0), 0.0);
  EXPECT_NEAR(nn::sigmoid(1.0), 0.7310585786300049, 1e-15);
  EXPECT_GT(std::abs(nn::double_tanh(20.0)), 1.999999);
  // saturate, never NaN
  EXPECT_FALSE(std::isnan(nn::sigmoid(-1000.0)));
  EXPECT_FALSE(std::isnan(nn::sigmoid(1000.0)));
  EXPECT_DOUBLE_EQ(nn::sigmoid(-1000.0), 0.0);
  EXPECT_DOUBLE_EQ(nn::sigmoid(1000.0), 1.0);
  EXPECT_FALSE(std::isnan(nn::double_tanh(1e308)));
}

TEST(LstmCellStep, ZeroParametersClosedForm) {
  const auto p = nn::LstmParams::zeros(3, 1);
  Eigen::VectorXd x(1), h_prev(3), c_prev(3), h, c;
  x << 0.7;
  h_prev << 0.1, -0.2, 0.3;
  c_prev << 0.4, -0.8, 1.2;
  nn::lstm_cell_step(x, h_prev, c_prev, p, h, c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(c(k), 0.5 * c_prev(k));  // f=i=o=1/2, c_bar=0
    EXPECT_DOUBLE_EQ(h(k), 0.5 * std::tanh(0.5 * c_prev(k)));
  }
}

TEST(LstmCellStep, SaturatedGatesGivePerfectMemory) {
  auto p = nn::LstmParams::zeros(2, 1);
  p.b_f.setConstant(50.0);   // forget gate pinned open
  p.b_i.setConstant(-50.0);  // input gate pinned shut
  Eigen::VectorXd x(1), h_prev(2), c_prev(2), h, c;
  x << 1.3;
  h_prev << 0.2, -0.1;
  c_prev << 0.9, -0.5;
  nn::lstm_cell_step(x, h_prev, c_prev, p, h, c);
  EXPECT_NEAR(c(0), c_prev(0), 1e-9);
  EXPECT_NEAR(c(1), c_prev(1), 1e-9);
}

TEST(LstmCellStep, MatchesTranscriptionOracle) {
  const auto p = random_params(2, 1, 99);
  Rng rng(123);
  Eigen::VectorXd x(1), h_prev(2), c_prev(2);
  x << rng.normal();
  h_prev << rng.normal(0, 0.5), rng.normal(0, 0.5);
  c_prev << rng.normal(0, 0.5), rng.normal(0, 0.5);
  Eigen::VectorXd h, c, h_ref, c_ref;
  nn::lstm_cell_step(x, h_prev, c_prev, p.lstm, h, c);
  cell_oracle(x, h_prev, c_prev, p.lstm, h_ref, c_ref);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(h(k), h_ref(k), 1e-14);
    EXPECT_NEAR(c(k), c_ref(k), 1e-14);
  }
  Eigen::VectorXd bad(2);
  EXPECT_THROW(nn::lstm_cell_step(bad, h_prev, c_prev, p.lstm, h, c), std::invalid_argument);
}

TEST(Forward, ZeroEverythingGivesZero) {
  const auto p = nn::ModelParams::zeros(4);
  EXPECT_DOUBLE_EQ(nn::forward(Eigen::VectorXd::Zero(20), p), 0.0);
}

TEST(Forward, OutputStrictlyInsideBand) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto p = random_params(5, 1, 1000 + seed);
    Rng rng(seed);
    Eigen::VectorXd x(20);
    for (int t = 0; t < 20; ++t) x(t) = rng.normal(0, 3);
    const double y = nn::forward(x, p);
    EXPECT_GT(y, -2.0);
    EXPECT_LT(y, 2.0);
    EXPECT_TRUE(std::isfinite(y));
  }
}

TEST(Forward, MatchesStepByStepUnroll) {
  const auto p = random_params(3, 1, 7);
  Rng rng(8);
  Eigen::VectorXd x(20);
  for (int t = 0; t < 20; ++t) x(t) = rng.normal();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(3), c = Eigen::VectorXd::Zero(3);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd xt(1), h_next, c_next;
    xt << x(t);
    cell_oracle(xt, h, c, p.lstm, h_next, c_next);
    h = h_next;
    c = c_next;
  }
  const double expected = nn::double_tanh(p.dense.w.dot(h) + p.dense.b);
  EXPECT_NEAR(nn::forward(x, p), expected, 1e-13);
}

TEST(Forward, BatchAgreesWithSingleSequence) {
  const auto p = random_params(6, 1, 17);
  Rng rng(18);
  Eigen::MatrixXd X(4, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const Eigen::VectorXd batch = nn::forward_batch(X, p);
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    EXPECT_NEAR(batch(r), nn::forward(X.row(r).transpose(), p), 1e-13);
}

TEST(Loss, PlainAndRegularized) {
  nn::TrainConfig cfg;
  const auto p0 = nn::ModelParams::zeros(2);
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 0;
  EXPECT_DOUBLE_EQ(nn::loss(b, b, p0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(nn::loss(a, b, p0, cfg), 0.5);

  // lambda_w = 0.1 with squared weights summing to 2 adds exactly 0.2
  auto p = nn::ModelParams::zeros(2);
  p.lstm.w_f(0, 0) = 1.0;
  p.lstm.w_c(1, 2) = -1.0;
  cfg.lambda_w = 0.1;
  EXPECT_DOUBLE_EQ(nn::loss(a, b, p, cfg), 0.5 + 0.2);
  cfg.regularizer = nn::Regularizer::l1;
  EXPECT_DOUBLE_EQ(nn::loss(a, b, p, cfg), 0.5 + 0.2);  // |1| + |-1| = 2 as well
  EXPECT_THROW(nn::loss(Eigen::VectorXd(), Eigen::VectorXd(), p, cfg), std::invalid_argument);
}

TEST(Backward, StationaryPointHasZeroGradients) {
  const auto p = nn::ModelParams::zeros(3);
  nn::TrainConfig cfg;
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 5);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  nn::ForwardCache cache;
  nn::forward_batch(X, p, &cache);
  const auto g = nn::backward(X, y, cache, p, cfg);
  EXPECT_DOUBLE_EQ(g.lstm.w_f.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(g.lstm.b_o.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(g.dense.w.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(g.dense.b, 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  const auto p = random_params(4, 1, 42);
  Rng rng(43);
  Eigen::MatrixXd X(3, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal(0, 0.8);
  Eigen::VectorXd y(3);
  for (int i = 0; i < 3; ++i) y(i) = rng.uniform(-1.5, 1.5);
  nn::TrainConfig cfg;
  cfg.hidden_size = 4;
  EXPECT_LT(max_fd_relative_error(p, X, y, cfg, nullptr), 1e-4);
}

TEST(Backward, MatchesFiniteDifferencesWithRegularizationAndDropout) {
  const auto p = random_params(4, 1, 52);
  Rng rng(53);
  Eigen::MatrixXd X(3, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal(0, 0.8);
  Eigen::VectorXd y(3);
  for (int i = 0; i < 3; ++i) y(i) = rng.uniform(-1.5, 1.5);
  nn::TrainConfig cfg;
  cfg.hidden_size = 4;
  cfg.lambda_w = 0.02;
  cfg.lambda_b = 0.01;
  const Eigen::MatrixXd mask = nn::dropout_mask(4, 3, 0.4, rng);
  EXPECT_LT(max_fd_relative_error(p, X, y, cfg, &mask), 1e-4);
}

TEST(Backward, DuplicatedBatchLeavesMeanGradientsUnchanged) {
  const auto p = random_params(3, 1, 60);
  Rng rng(61);
  Eigen::MatrixXd X(2, 6);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Eigen::VectorXd y(2);
  y << 0.3, -0.7;
  Eigen::MatrixXd X2(4, 6);
  X2 << X, X;
  Eigen::VectorXd y2(4);
  y2 << y, y;
  nn::TrainConfig cfg;
  nn::ForwardCache c1, c2;
  nn::forward_batch(X, p, &c1);
  nn::forward_batch(X2, p, &c2);
  const auto g1 = nn::backward(X, y, c1, p, cfg);
  const auto g2 = nn::backward(X2, y2, c2, p, cfg);
  EXPECT_LT((g1.lstm.w_f - g2.lstm.w_f).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((g1.dense.w - g2.dense.w).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(g1.dense.b, g2.dense.b, 1e-12);
}

TEST(AdamUpdate, ZeroGradientLeavesParametersUnchanged) {
  auto p = random_params(3, 1, 70);
  const auto before = p;
  auto state = nn::AdamState::zeros(3, 1);
  const auto g = nn::Gradients::zeros(3, 1);
  nn::TrainConfig cfg;
  nn::adam_update(p, g, state, 1, cfg);
  EXPECT_EQ(p.lstm.w_f, before.lstm.w_f);
  EXPECT_EQ(p.dense.b, before.dense.b);
}

TEST(AdamUpdate, FirstStepMovesByLearningRate) {
  // with m_hat = g and v_hat = g^2, the first update is lr * sign(g)
  auto p = nn::ModelParams::zeros(2);
  auto state = nn::AdamState::zeros(2, 1);
  auto g = nn::Gradients::zeros(2, 1);
  g.lstm.w_f.setConstant(0.37);
  g.dense.b = -2.5;
  nn::TrainConfig cfg;
  nn::adam_update(p, g, state, 1, cfg);
  for (Eigen::Index i = 0; i < p.lstm.w_f.size(); ++i)
    EXPECT_NEAR(p.lstm.w_f.data()[i], -cfg.learning_rate, cfg.learning_rate * 1e-4);
  EXPECT_NEAR(p.dense.b, cfg.learning_rate, cfg.learning_rate * 1e-4);
  EXPECT_THROW(nn::adam_update(p, g, state, 0, cfg), std::invalid_argument);
}

TEST(AdamUpdate, DeterministicGivenEqualState) {
  auto p1 = random_params(3, 1, 80);
  auto p2 = p1;
  auto s1 = nn::AdamState::zeros(3, 1);
  auto s2 = nn::AdamState::zeros(3, 1);
  auto g = nn::Gradients::zeros(3, 1);
  Rng rng(81);
  for (Eigen::Index i = 0; i < g.lstm.w_c.size(); ++i) g.lstm.w_c.data()[i] = rng.normal();
  nn::TrainConfig cfg;
  nn::adam_update(p1, g, s1, 1, cfg);
  nn::adam_update(p2, g, s2, 1, cfg);
  EXPECT_EQ(p1.lstm.w_c, p2.lstm.w_c);
  EXPECT_EQ(s1.m.lstm.w_c, s2.m.lstm.w_c);
}

TEST(DropoutMask, EdgeCasesAndKeepFraction) {
  Rng rng(90);
  const auto ones = nn::dropout_mask(5, 4, 0.0, rng);
  EXPECT_DOUBLE_EQ(ones.minCoeff(), 1.0);

  Rng rng_a(91), rng_b(91);
  const auto a = nn::dropout_mask(10, 10, 0.5, rng_a);
  const auto b = nn::dropout_mask(10, 10, 0.5, rng_b);
  EXPECT_EQ(a, b);  // same seed, same mask

  Rng rng_c(92);
  const auto big = nn::dropout_mask(1000, 100, 0.5, rng_c);
  const double keep = big.sum() / static_cast<double>(big.size());
  EXPECT_NEAR(keep, 0.5, 0.01);
  EXPECT_THROW(nn::dropout_mask(2, 2, 1.0, rng), std::invalid_argument);
}

TEST(Train, LearnsSyntheticMeanTask) {
  Rng data_rng(7);
  const auto make = [&](int n, Eigen::MatrixXd& X, Eigen::VectorXd& Y) {
    X.resize(n, 20);
    Y.resize(n);
    for (int i = 0; i < n; ++i) {
      double mean = 0.0;
      for (int t = 0; t < 20; ++t) {
        X(i, t) = data_rng.normal();
        mean += X(i, t) / 20.0;
      }
      Y(i) = nn::double_tanh(3.0 * mean + data_rng.normal(0, 0.05));
    }
  };
  Eigen::MatrixXd train_x, dev_x;
  Eigen::VectorXd train_y, dev_y;
  make(1500, train_x, train_y);
  make(400, dev_x, dev_y);
  const double var_y = (dev_y.array() - dev_y.mean()).square().sum() / (dev_y.size() - 1.0);

  nn::TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.batch_size = 300;
  cfg.seed = 11;
  const auto result = nn::train(train_x, train_y, dev_x, dev_y, cfg);
  EXPECT_LT(result.records.back().dev_mse, 0.1 * var_y);
}

TEST(Train, ZeroLearningRateFreezesMetrics) {
  Rng rng(12);
  Eigen::MatrixXd X(40, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Eigen::VectorXd Y(40);
  for (int i = 0; i < 40; ++i) Y(i) = rng.uniform(-1, 1);
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  cfg.converge_window = 100;  // keep all three epochs
  const auto result = nn::train(X, Y, X, Y, cfg);
  ASSERT_EQ(result.records.size(), 3u);
  for (const auto& r : result.records) {
    EXPECT_DOUBLE_EQ(r.train_mse, result.records.front().train_mse);
    EXPECT_DOUBLE_EQ(r.dev_mse, result.records.front().dev_mse);
  }
}

TEST(Train, BitwiseDeterministicPerSeed) {
  Rng rng(13);
  Eigen::MatrixXd X(60, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Eigen::VectorXd Y(60);
  for (int i = 0; i < 60; ++i) Y(i) = rng.uniform(-1, 1);
  nn::TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.batch_size = 16;
  cfg.seed = 77;
  const auto a = nn::train(X, Y, X, Y, cfg);
  const auto b = nn::train(X, Y, X, Y, cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].train_mse, b.records[i].train_mse);
    EXPECT_EQ(a.records[i].dev_mse, b.records[i].dev_mse);
    EXPECT_EQ(a.records[i].train_mae, b.records[i].train_mae);
    EXPECT_EQ(a.records[i].dev_mae, b.records[i].dev_mae);
  }
  EXPECT_EQ(a.params.lstm.w_f, b.params.lstm.w_f);
  EXPECT_EQ(a.params.dense.w, b.params.dense.w);
}

TEST(Train, CheckpointsReloadBitExact) {
  Rng rng(14);
  Eigen::MatrixXd X(30, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Eigen::VectorXd Y(30);
  for (int i = 0; i < 30; ++i) Y(i) = rng.uniform(-1, 1);
  nn::TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.seed = 5;
  const std::string dir = ::testing::TempDir() + "ckpt_test";
  std::filesystem::remove_all(dir);
  const auto result = nn::train(X, Y, X, Y, cfg, dir);
  ASSERT_TRUE(std::filesystem::exists(dir + "/epoch_0002.json"));
  const auto ckpt = nn::load_checkpoint(dir + "/epoch_0002.json");
  EXPECT_EQ(ckpt.epoch, 2);
  const Eigen::VectorXd original = nn::predict(X, result.params, cfg);
  const Eigen::VectorXd reloaded = nn::predict(X, ckpt.params, cfg);
  EXPECT_EQ(original, reloaded);  // bit-exact round trip
}

TEST(SelectEpoch, DominatingEpochWins) {
  std::vector<nn::EpochRecord> records = {
      {1, 0.50, 0.80, 0, 0},  // diff .30 sum 1.30
      {2, 0.30, 0.35, 0, 0},  // diff .05 sum 0.65  <- dominates both columns
      {3, 0.40, 0.60, 0, 0},  // diff .20 sum 1.00
  };
  EXPECT_EQ(nn::select_epoch(records), 2);
}

TEST(SelectEpoch, MatchesHandComputedZScores) {
  // diffs = {.10,.06,.20}: mean .12, sample sd .072111 -> z {-.27735,-.83205,1.10940}
  // sums  = {.70,.46,.40}: mean .52, sample sd .158745 -> z {1.13389,-.37796,-.75593}
  // criterion = {.85654, -1.21001, .35347} -> epoch 2
  std::vector<nn::EpochRecord> records = {
      {1, 0.30, 0.40, 0, 0},
      {2, 0.20, 0.26, 0, 0},
      {3, 0.10, 0.30, 0, 0},
  };
  EXPECT_EQ(nn::select_epoch(records), 2);
}

TEST(SelectEpoch, ZeroVarianceColumnContributesNothing) {
  // all diffs equal: the gap term drops out, the sum term decides
  std::vector<nn::EpochRecord> records = {
      {1, 0.50, 0.60, 0, 0},
      {2, 0.20, 0.30, 0, 0},
      {3, 0.40, 0.50, 0, 0},
  };
  EXPECT_EQ(nn::select_epoch(records), 2);
}

TEST(SelectEpoch, TiesGoToTheEarliestEpoch) {
  std::vector<nn::EpochRecord> records = {
      {1, 0.20, 0.30, 0, 0},
      {2, 0.20, 0.30, 0, 0},
      {3, 0.50, 0.90, 0, 0},
  };
  EXPECT_EQ(nn::select_epoch(records), 1);
  EXPECT_THROW(nn::select_epoch({records[0]}), std::invalid_argument);
}

TEST(SelectEpoch, ShiftingAllSumsLeavesArgminUnchanged) {
  std::vector<nn::EpochRecord> records = {
      {1, 0.30, 0.40, 0, 0}, {2, 0.20, 0.26, 0, 0}, {3, 0.10, 0.30, 0, 0}};
  const int base = nn::select_epoch(records);
  for (auto& r : records) {
    r.train_mse += 0.75;  // shifts every sum by 1.5, leaves every diff alone
    r.dev_mse += 0.75;
  }
  EXPECT_EQ(nn::select_epoch(records), base);
}

TEST(TrainConfig, DefaultsAreTheReferenceConfiguration) {
  const nn::TrainConfig cfg;
  EXPECT_EQ(cfg.hidden_size, 25);
  EXPECT_EQ(cfg.batch_size, 500);
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.beta1, 0.9);
  EXPECT_DOUBLE_EQ(cfg.beta2, 0.999);
  EXPECT_DOUBLE_EQ(cfg.epsilon, 1e-8);
  // the reference setup uses neither regularization nor dropout
  EXPECT_DOUBLE_EQ(cfg.lambda_w, 0.0);
  EXPECT_DOUBLE_EQ(cfg.lambda_b, 0.0);
  EXPECT_DOUBLE_EQ(cfg.dropout_p, 0.0);
  EXPECT_DOUBLE_EQ(cfg.grad_clip, 0.0);
  EXPECT_TRUE(cfg.shuffle);
}

TEST(Train, FirstEpochsLossNonIncreasingOnLinearTask) {
  // full-batch updates with a small learning rate on an easy linear target:
  // the train MSE should fall monotonically in most seeds
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(200 + seed);
    Eigen::MatrixXd X(80, 20);
    Eigen::VectorXd Y(80);
    for (int i = 0; i < 80; ++i) {
      double mean = 0.0;
      for (int t = 0; t < 20; ++t) {
        X(i, t) = rng.normal();
        mean += X(i, t) / 20.0;
      }
      Y(i) = 0.8 * mean;
    }
    nn::TrainConfig cfg;
    cfg.batch_size = 80;
    cfg.max_epochs = 5;
    cfg.seed = seed;
    cfg.converge_window = 50;
    const auto result = nn::train(X, Y, X, Y, cfg);
    bool ok = true;
    for (std::size_t e = 1; e < result.records.size(); ++e)
      ok = ok && result.records[e].train_mse <= result.records[e - 1].train_mse + 1e-12;
    monotone += ok;
  }
  EXPECT_GE(monotone, 3);
}

TEST(Train, DropoutModesStayFiniteAndDeterministic) {
  Rng rng(15);
  Eigen::MatrixXd X(50, 20);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Eigen::VectorXd Y(50);
  for (int i = 0; i < 50; ++i) Y(i) = rng.uniform(-1, 1);
  for (const auto mode : {nn::DropoutMode::classical, nn::DropoutMode::inverted}) {
    nn::TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 25;
    cfg.dropout_p = 0.3;
    cfg.dropout_mode = mode;
    cfg.seed = 99;
    const auto a = nn::train(X, Y, X, Y, cfg);
    const auto b = nn::train(X, Y, X, Y, cfg);
    for (std::size_t e = 0; e < a.records.size(); ++e) {
      EXPECT_TRUE(std::isfinite(a.records[e].train_mse));
      EXPECT_EQ(a.records[e].train_mse, b.records[e].train_mse);
    }
  }
}

TEST(EpochLog, RoundTrips) {
  const std::vector<nn::EpochRecord> records = {{1, 0.5, 0.6, 0.4, 0.45}, {2, 0.3, 0.42, 0.31, 0.36}};
  const std::string path = ::testing::TempDir() + "epoch_log.csv";
  nn::write_epoch_log(path, records, "test fixture");
  const auto loaded = nn::read_epoch_log(path);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[1].epoch, 2);
  EXPECT_DOUBLE_EQ(loaded[1].dev_mse, 0.42);
  EXPECT_DOUBLE_EQ(loaded[0].train_mae, 0.4);
}

TEST(InitParams, MatchesStatedScheme) {
  Rng rng(1);
  const auto p = nn::init_params(25, 1, rng);
  // forget bias at one, other biases zero
  EXPECT_DOUBLE_EQ(p.lstm.b_f.minCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(p.lstm.b_i.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(p.lstm.b_c.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(p.lstm.b_o.cwiseAbs().maxCoeff(), 0.0);
  // recurrent slice orthogonal
  const Eigen::MatrixXd q = p.lstm.w_f.leftCols(25);
  EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(25, 25)).cwiseAbs().maxCoeff(), 1e-10);
  // input slice inside the Glorot limit
  const double limit = std::sqrt(6.0 / 26.0);
  EXPECT_LE(p.lstm.w_c.rightCols(1).cwiseAbs().maxCoeff(), limit);
}
