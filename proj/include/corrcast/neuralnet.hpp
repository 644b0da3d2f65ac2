#pragma once

// From-scratch LSTM regressor: 25 recurrent units over a 20-step scalar
// sequence, a dense head merging the final hidden state to one value, and a
// doubled-tanh output activation. Trained with mini-batch Adam on exact BPTT
// gradients. Everything is double precision and deterministic given the seed.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrcast/csv.hpp"
#include "corrcast/rng.hpp"

namespace corrcast::nn {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double double_tanh(double x) { return 2.0 * std::tanh(x); }

// ---------------------------------------------------------------------------
// Parameters.

/// Gate weight matrices act on the concatenated [h_{t-1}, x_t]: columns
/// [0, hidden) are the recurrent slice, columns [hidden, hidden+input) the
/// input slice.
struct LstmParams {
  Eigen::MatrixXd w_f, w_i, w_c, w_o;  // (hidden, hidden+input)
  Eigen::VectorXd b_f, b_i, b_c, b_o;  // (hidden)

  int hidden_size() const { return static_cast<int>(w_f.rows()); }
  int input_size() const { return static_cast<int>(w_f.cols() - w_f.rows()); }

  static LstmParams zeros(int hidden, int input) {
    LstmParams p;
    p.w_f = p.w_i = p.w_c = p.w_o = Eigen::MatrixXd::Zero(hidden, hidden + input);
    p.b_f = p.b_i = p.b_c = p.b_o = Eigen::VectorXd::Zero(hidden);
    return p;
  }
};

struct DenseParams {
  Eigen::VectorXd w;
  double b = 0.0;

  static DenseParams zeros(int hidden) {
    DenseParams p;
    p.w = Eigen::VectorXd::Zero(hidden);
    return p;
  }
};

struct ModelParams {
  LstmParams lstm;
  DenseParams dense;

  static ModelParams zeros(int hidden, int input = 1) {
    return {LstmParams::zeros(hidden, input), DenseParams::zeros(hidden)};
  }
};

enum class Regularizer { l2, l1 };
enum class DropoutMode { classical, inverted };

struct TrainConfig {
  int hidden_size = 25;
  int batch_size = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 300;
  std::uint64_t seed = 1;
  double lambda_w = 0.0;  // weight-matrix regularization strength
  double lambda_b = 0.0;  // bias regularization strength
  Regularizer regularizer = Regularizer::l2;
  double dropout_p = 0.0;  // drop probability on the final hidden state
  DropoutMode dropout_mode = DropoutMode::classical;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  bool shuffle = true;
  int checkpoint_every = 1;
  // convergence: train/dev MSE gap below converge_gap and both curves moving
  // less than converge_delta over the last converge_window epochs
  double converge_gap = 0.01;
  double converge_delta = 1e-4;
  int converge_window = 10;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double dev_mse = 0.0;
  double train_mae = 0.0;
  double dev_mae = 0.0;
};

/// Glorot-uniform input slices, orthogonal recurrent slices, forget-gate bias
/// at one. The draw order is fixed so a seed pins the full parameter set.
inline ModelParams init_params(int hidden, int input, Rng& rng) {
  ModelParams p = ModelParams::zeros(hidden, input);
  const auto orthogonal = [&](Eigen::Index n) {
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
  };
  const double limit = std::sqrt(6.0 / static_cast<double>(input + hidden));
  for (Eigen::MatrixXd* w : {&p.lstm.w_f, &p.lstm.w_i, &p.lstm.w_c, &p.lstm.w_o}) {
    w->leftCols(hidden) = orthogonal(hidden);
    for (Eigen::Index j = hidden; j < w->cols(); ++j)
      for (Eigen::Index i = 0; i < w->rows(); ++i) (*w)(i, j) = rng.uniform(-limit, limit);
  }
  const double dense_limit = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (Eigen::Index i = 0; i < hidden; ++i) p.dense.w(i) = rng.uniform(-dense_limit, dense_limit);
  p.lstm.b_f.setOnes();
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass.

/// One LSTM step for a single sample.
inline void lstm_cell_step(const Eigen::VectorXd& x_t, const Eigen::VectorXd& h_prev,
                           const Eigen::VectorXd& c_prev, const LstmParams& p,
                           Eigen::VectorXd& h_out, Eigen::VectorXd& c_out) {
  const int hidden = p.hidden_size();
  if (x_t.size() != p.input_size() || h_prev.size() != hidden || c_prev.size() != hidden)
    throw std::invalid_argument("lstm_cell_step: dimension mismatch");
  Eigen::VectorXd z(hidden + p.input_size());
  z << h_prev, x_t;
  const Eigen::VectorXd zf = p.w_f * z + p.b_f;
  const Eigen::VectorXd zi = p.w_i * z + p.b_i;
  const Eigen::VectorXd zc = p.w_c * z + p.b_c;
  const Eigen::VectorXd zo = p.w_o * z + p.b_o;
  Eigen::VectorXd f(hidden), i(hidden), o(hidden);
  for (int k = 0; k < hidden; ++k) {
    f(k) = sigmoid(zf(k));
    i(k) = sigmoid(zi(k));
    o(k) = sigmoid(zo(k));
  }
  const Eigen::VectorXd c_bar = zc.array().tanh();
  c_out = f.cwiseProduct(c_prev) + i.cwiseProduct(c_bar);
  h_out = o.cwiseProduct(c_out.array().tanh().matrix());
}

/// Cached intermediates of a batched forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> f, i, c_bar, o, tanh_c, c, h;  // per step, (hidden, batch)
  Eigen::MatrixXd h_final;  // last hidden state after dropout, feeds the dense head
  Eigen::MatrixXd mask;     // effective dropout mask (empty when dropout off)
  Eigen::VectorXd yhat;
};

inline Eigen::MatrixXd batch_sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

/**
 * Batched forward pass. X holds one 20-step scalar sequence per row. The
 * optional mask is an effective dropout mask (zeros and keep-scale values)
 * applied to the final hidden state during training.
 */
inline Eigen::VectorXd forward_batch(const Eigen::MatrixXd& X, const ModelParams& params,
                                     ForwardCache* cache = nullptr,
                                     const Eigen::MatrixXd* mask = nullptr, double h_scale = 1.0) {
  if (params.lstm.input_size() != 1)
    throw std::invalid_argument("forward_batch: batched path expects scalar inputs");
  const auto batch = X.rows();
  const auto steps = X.cols();
  if (steps < 1) throw std::invalid_argument("forward_batch: empty sequence");
  const int hidden = params.lstm.hidden_size();

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden, batch);
  if (cache) {
    cache->f.resize(steps);
    cache->i.resize(steps);
    cache->c_bar.resize(steps);
    cache->o.resize(steps);
    cache->tanh_c.resize(steps);
    cache->c.resize(steps);
    cache->h.resize(steps);
  }
  Eigen::MatrixXd z(hidden + 1, batch);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z.topRows(hidden) = h;
    z.row(hidden) = X.col(t).transpose();
    const Eigen::MatrixXd f = batch_sigmoid((params.lstm.w_f * z).colwise() + params.lstm.b_f);
    const Eigen::MatrixXd i = batch_sigmoid((params.lstm.w_i * z).colwise() + params.lstm.b_i);
    const Eigen::MatrixXd c_bar = ((params.lstm.w_c * z).colwise() + params.lstm.b_c).array().tanh();
    const Eigen::MatrixXd o = batch_sigmoid((params.lstm.w_o * z).colwise() + params.lstm.b_o);
    c = f.cwiseProduct(c) + i.cwiseProduct(c_bar);
    const Eigen::MatrixXd tanh_c = c.array().tanh();
    h = o.cwiseProduct(tanh_c);
    if (cache) {
      cache->f[static_cast<std::size_t>(t)] = f;
      cache->i[static_cast<std::size_t>(t)] = i;
      cache->c_bar[static_cast<std::size_t>(t)] = c_bar;
      cache->o[static_cast<std::size_t>(t)] = o;
      cache->tanh_c[static_cast<std::size_t>(t)] = tanh_c;
      cache->c[static_cast<std::size_t>(t)] = c;
      cache->h[static_cast<std::size_t>(t)] = h;
    }
  }

  Eigen::MatrixXd h_final = h;
  if (mask) h_final = h_final.cwiseProduct(*mask);
  if (h_scale != 1.0) h_final *= h_scale;

  Eigen::VectorXd u = (params.dense.w.transpose() * h_final).transpose();
  u.array() += params.dense.b;
  Eigen::VectorXd yhat = (2.0 * u.array().tanh()).matrix();
  if (cache) {
    cache->h_final = h_final;
    cache->mask = mask ? *mask : Eigen::MatrixXd();
    cache->yhat = yhat;
  }
  return yhat;
}

/// Single-sequence forward pass; output lies strictly inside (-2, 2).
inline double forward(const Eigen::VectorXd& x_seq, const ModelParams& params) {
  Eigen::MatrixXd X = x_seq.transpose();
  return forward_batch(X, params)(0);
}

/// Evaluation-mode predictions, applying the classical dropout scale when
/// the model was trained with dropout.
inline Eigen::VectorXd predict(const Eigen::MatrixXd& X, const ModelParams& params,
                               const TrainConfig& cfg) {
  double scale = 1.0;
  if (cfg.dropout_p > 0.0 && cfg.dropout_mode == DropoutMode::classical)
    scale = 1.0 - cfg.dropout_p;
  return forward_batch(X, params, nullptr, nullptr, scale);
}

// ---------------------------------------------------------------------------
// Loss and gradients.

namespace detail {

template <typename Fn>
void for_each_weight(const ModelParams& p, Fn&& fn) {
  fn(p.lstm.w_f);
  fn(p.lstm.w_i);
  fn(p.lstm.w_c);
  fn(p.lstm.w_o);
}

}  // namespace detail

/// Mean squared error plus the configured L1/L2 penalty on weights and biases.
inline double loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& y, const ModelParams& params,
                   const TrainConfig& cfg) {
  if (yhat.size() != y.size()) throw std::invalid_argument("loss: batch length mismatch");
  if (yhat.size() == 0) throw std::invalid_argument("loss: empty batch");
  double value = (yhat - y).squaredNorm() / static_cast<double>(yhat.size());
  if (cfg.lambda_w != 0.0 || cfg.lambda_b != 0.0) {
    double wpen = 0.0, bpen = 0.0;
    if (cfg.regularizer == Regularizer::l2) {
      detail::for_each_weight(params, [&](const Eigen::MatrixXd& w) { wpen += w.squaredNorm(); });
      wpen += params.dense.w.squaredNorm();
      for (const auto* b : {&params.lstm.b_f, &params.lstm.b_i, &params.lstm.b_c, &params.lstm.b_o})
        bpen += b->squaredNorm();
      bpen += params.dense.b * params.dense.b;
    } else {
      detail::for_each_weight(params, [&](const Eigen::MatrixXd& w) { wpen += w.cwiseAbs().sum(); });
      wpen += params.dense.w.cwiseAbs().sum();
      for (const auto* b : {&params.lstm.b_f, &params.lstm.b_i, &params.lstm.b_c, &params.lstm.b_o})
        bpen += b->cwiseAbs().sum();
      bpen += std::abs(params.dense.b);
    }
    value += cfg.lambda_w * wpen + cfg.lambda_b * bpen;
  }
  return value;
}

struct Gradients {
  LstmParams lstm;
  DenseParams dense;

  static Gradients zeros(int hidden, int input) {
    return {LstmParams::zeros(hidden, input), DenseParams::zeros(hidden)};
  }
};

/// Exact gradients of loss() through the unrolled sequence (BPTT).
inline Gradients backward(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const ForwardCache& cache, const ModelParams& params,
                          const TrainConfig& cfg) {
  const auto batch = X.rows();
  const auto steps = X.cols();
  const int hidden = params.lstm.hidden_size();
  Gradients g = Gradients::zeros(hidden, params.lstm.input_size());

  // dense head: yhat = 2 tanh(u), so dyhat/du = 2 (1 - (yhat/2)^2)
  const Eigen::VectorXd dy = 2.0 / static_cast<double>(batch) * (cache.yhat - y);
  const Eigen::VectorXd du =
      dy.cwiseProduct((2.0 * (1.0 - (cache.yhat.array() / 2.0).square())).matrix());
  g.dense.w = cache.h_final * du;
  g.dense.b = du.sum();

  Eigen::MatrixXd dh = params.dense.w * du.transpose();  // (hidden, batch)
  if (cache.mask.size() > 0) dh = dh.cwiseProduct(cache.mask);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(hidden, batch);

  Eigen::MatrixXd z(hidden + 1, batch);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    const Eigen::MatrixXd& f = cache.f[ts];
    const Eigen::MatrixXd& i = cache.i[ts];
    const Eigen::MatrixXd& c_bar = cache.c_bar[ts];
    const Eigen::MatrixXd& o = cache.o[ts];
    const Eigen::MatrixXd& tanh_c = cache.tanh_c[ts];

    const Eigen::MatrixXd do_ = dh.cwiseProduct(tanh_c);
    dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix());

    const Eigen::MatrixXd c_prev =
        t == 0 ? Eigen::MatrixXd::Zero(hidden, batch).eval() : cache.c[ts - 1];
    const Eigen::MatrixXd df = dc.cwiseProduct(c_prev);
    const Eigen::MatrixXd di = dc.cwiseProduct(c_bar);
    const Eigen::MatrixXd dc_bar = dc.cwiseProduct(i);

    const Eigen::MatrixXd dzf = df.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
    const Eigen::MatrixXd dzi = di.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
    const Eigen::MatrixXd dzo = do_.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());
    const Eigen::MatrixXd dzc = dc_bar.cwiseProduct((1.0 - c_bar.array().square()).matrix());

    z.topRows(hidden) = t == 0 ? Eigen::MatrixXd::Zero(hidden, batch).eval() : cache.h[ts - 1];
    z.row(hidden) = X.col(t).transpose();

    g.lstm.w_f += dzf * z.transpose();
    g.lstm.w_i += dzi * z.transpose();
    g.lstm.w_c += dzc * z.transpose();
    g.lstm.w_o += dzo * z.transpose();
    g.lstm.b_f += dzf.rowwise().sum();
    g.lstm.b_i += dzi.rowwise().sum();
    g.lstm.b_c += dzc.rowwise().sum();
    g.lstm.b_o += dzo.rowwise().sum();

    const Eigen::MatrixXd dz = params.lstm.w_f.transpose() * dzf + params.lstm.w_i.transpose() * dzi +
                               params.lstm.w_c.transpose() * dzc + params.lstm.w_o.transpose() * dzo;
    dh = dz.topRows(hidden);
    dc = dc.cwiseProduct(f);
  }

  if (cfg.lambda_w != 0.0 || cfg.lambda_b != 0.0) {
    const auto wreg = [&](Eigen::MatrixXd& grad, const Eigen::MatrixXd& w) {
      if (cfg.regularizer == Regularizer::l2)
        grad += 2.0 * cfg.lambda_w * w;
      else
        grad += cfg.lambda_w * w.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    };
    wreg(g.lstm.w_f, params.lstm.w_f);
    wreg(g.lstm.w_i, params.lstm.w_i);
    wreg(g.lstm.w_c, params.lstm.w_c);
    wreg(g.lstm.w_o, params.lstm.w_o);
    if (cfg.regularizer == Regularizer::l2) {
      g.dense.w += 2.0 * cfg.lambda_w * params.dense.w;
      g.lstm.b_f += 2.0 * cfg.lambda_b * params.lstm.b_f;
      g.lstm.b_i += 2.0 * cfg.lambda_b * params.lstm.b_i;
      g.lstm.b_c += 2.0 * cfg.lambda_b * params.lstm.b_c;
      g.lstm.b_o += 2.0 * cfg.lambda_b * params.lstm.b_o;
      g.dense.b += 2.0 * cfg.lambda_b * params.dense.b;
    } else {
      const auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
      g.dense.w += cfg.lambda_w * params.dense.w.unaryExpr(sign);
      g.lstm.b_f += cfg.lambda_b * params.lstm.b_f.unaryExpr(sign);
      g.lstm.b_i += cfg.lambda_b * params.lstm.b_i.unaryExpr(sign);
      g.lstm.b_c += cfg.lambda_b * params.lstm.b_c.unaryExpr(sign);
      g.lstm.b_o += cfg.lambda_b * params.lstm.b_o.unaryExpr(sign);
      g.dense.b += cfg.lambda_b * sign(params.dense.b);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam.

struct AdamState {
  ModelParams m, v;

  static AdamState zeros(int hidden, int input) {
    return {ModelParams::zeros(hidden, input), ModelParams::zeros(hidden, input)};
  }
};

/// Standard Adam with bias correction; t is the 1-based update count.
inline void adam_update(ModelParams& params, const Gradients& g, AdamState& state, int t,
                        const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam_update: t must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const auto mat = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                       Eigen::MatrixXd& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    p.array() -= cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  const auto vec = [&](Eigen::VectorXd& p, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                       Eigen::VectorXd& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    p.array() -= cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  mat(params.lstm.w_f, g.lstm.w_f, state.m.lstm.w_f, state.v.lstm.w_f);
  mat(params.lstm.w_i, g.lstm.w_i, state.m.lstm.w_i, state.v.lstm.w_i);
  mat(params.lstm.w_c, g.lstm.w_c, state.m.lstm.w_c, state.v.lstm.w_c);
  mat(params.lstm.w_o, g.lstm.w_o, state.m.lstm.w_o, state.v.lstm.w_o);
  vec(params.lstm.b_f, g.lstm.b_f, state.m.lstm.b_f, state.v.lstm.b_f);
  vec(params.lstm.b_i, g.lstm.b_i, state.m.lstm.b_i, state.v.lstm.b_i);
  vec(params.lstm.b_c, g.lstm.b_c, state.m.lstm.b_c, state.v.lstm.b_c);
  vec(params.lstm.b_o, g.lstm.b_o, state.m.lstm.b_o, state.v.lstm.b_o);
  vec(params.dense.w, g.dense.w, state.m.dense.w, state.v.dense.w);
  {
    double& p = params.dense.b;
    double& m = state.m.dense.b;
    double& v = state.v.dense.b;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g.dense.b;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.dense.b * g.dense.b;
    p -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
  }
}

/// Bernoulli(1-p) keep mask; entries are drawn column-major.
inline Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout_mask: p must be in [0,1)");
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < 1.0 - p ? 1.0 : 0.0;
  return mask;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto& data = j["data"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));  // row-major
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("checkpoint matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[idx++].get<double>();
  return m;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json config_json(const TrainConfig& cfg) {
  return {{"hidden_size", cfg.hidden_size},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"epsilon", cfg.epsilon},
          {"max_epochs", cfg.max_epochs},
          {"seed", cfg.seed},
          {"lambda_w", cfg.lambda_w},
          {"lambda_b", cfg.lambda_b},
          {"regularizer", cfg.regularizer == Regularizer::l2 ? "l2" : "l1"},
          {"dropout_p", cfg.dropout_p},
          {"dropout_mode", cfg.dropout_mode == DropoutMode::classical ? "classical" : "inverted"},
          {"grad_clip", cfg.grad_clip},
          {"shuffle", cfg.shuffle}};
}

struct Checkpoint {
  ModelParams params;
  int epoch = 0;
  nlohmann::json config;
};

inline void save_checkpoint(const std::string& path, const ModelParams& params,
                            const TrainConfig& cfg, int epoch) {
  nlohmann::json j;
  j["version"] = 1;
  j["epoch"] = epoch;
  j["config"] = config_json(cfg);
  j["lstm"] = {{"w_f", detail::matrix_json(params.lstm.w_f)},
               {"w_i", detail::matrix_json(params.lstm.w_i)},
               {"w_c", detail::matrix_json(params.lstm.w_c)},
               {"w_o", detail::matrix_json(params.lstm.w_o)},
               {"b_f", detail::vector_json(params.lstm.b_f)},
               {"b_i", detail::vector_json(params.lstm.b_i)},
               {"b_c", detail::vector_json(params.lstm.b_c)},
               {"b_o", detail::vector_json(params.lstm.b_o)}};
  j["dense"] = {{"w", detail::vector_json(params.dense.w)}, {"b", params.dense.b}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.epoch = j.at("epoch").get<int>();
  ckpt.config = j.value("config", nlohmann::json::object());
  const auto& lstm = j.at("lstm");
  ckpt.params.lstm.w_f = detail::matrix_from_json(lstm.at("w_f"));
  ckpt.params.lstm.w_i = detail::matrix_from_json(lstm.at("w_i"));
  ckpt.params.lstm.w_c = detail::matrix_from_json(lstm.at("w_c"));
  ckpt.params.lstm.w_o = detail::matrix_from_json(lstm.at("w_o"));
  ckpt.params.lstm.b_f = detail::vector_from_json(lstm.at("b_f"));
  ckpt.params.lstm.b_i = detail::vector_from_json(lstm.at("b_i"));
  ckpt.params.lstm.b_c = detail::vector_from_json(lstm.at("b_c"));
  ckpt.params.lstm.b_o = detail::vector_from_json(lstm.at("b_o"));
  ckpt.params.dense.w = detail::vector_from_json(j.at("dense").at("w"));
  ckpt.params.dense.b = j.at("dense").at("b").get<double>();
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainResult {
  std::vector<EpochRecord> records;
  ModelParams params;
  bool converged = false;
};

namespace detail {

inline void eval_metrics(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                         const ModelParams& params, const TrainConfig& cfg, double& mse,
                         double& mae) {
  const Eigen::VectorXd yhat = predict(X, params, cfg);
  const Eigen::VectorXd err = yhat - Y;
  mse = err.squaredNorm() / static_cast<double>(err.size());
  mae = err.cwiseAbs().sum() / static_cast<double>(err.size());
}

inline double range_of(const std::vector<EpochRecord>& records, std::size_t from,
                       double EpochRecord::* field) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = from; i < records.size(); ++i) {
    lo = std::min(lo, records[i].*field);
    hi = std::max(hi, records[i].*field);
  }
  return hi - lo;
}

}  // namespace detail

/**
 * Mini-batch training per the usual loop: seeded shuffle, batches of
 * cfg.batch_size (last partial batch kept), forward/backward/Adam, one
 * train+dev evaluation per epoch, one checkpoint per epoch. Stops early when
 * the train and dev MSE curves have converged.
 */
inline TrainResult train(const Eigen::MatrixXd& trainX, const Eigen::VectorXd& trainY,
                         const Eigen::MatrixXd& devX, const Eigen::VectorXd& devY,
                         const TrainConfig& cfg, const std::string& checkpoint_dir = "") {
  if (trainX.rows() != trainY.size() || devX.rows() != devY.size())
    throw std::invalid_argument("train: X/Y row mismatch");
  if (trainX.rows() == 0) throw std::invalid_argument("train: empty training set");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = init_params(cfg.hidden_size, 1, rng);
  AdamState adam = AdamState::zeros(cfg.hidden_size, 1);

  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  const auto n = trainX.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  int step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd bx(size, trainX.cols());
      Eigen::VectorXd by(size);
      for (Eigen::Index r = 0; r < size; ++r) {
        bx.row(r) = trainX.row(order[static_cast<std::size_t>(start + r)]);
        by(r) = trainY(order[static_cast<std::size_t>(start + r)]);
      }
      ForwardCache cache;
      if (cfg.dropout_p > 0.0) {
        Eigen::MatrixXd mask = dropout_mask(cfg.hidden_size, size, cfg.dropout_p, rng);
        if (cfg.dropout_mode == DropoutMode::inverted) mask /= 1.0 - cfg.dropout_p;
        forward_batch(bx, result.params, &cache, &mask);
      } else {
        forward_batch(bx, result.params, &cache);
      }
      Gradients g = backward(bx, by, cache, result.params, cfg);
      if (cfg.grad_clip > 0.0) {
        double norm2 = g.dense.b * g.dense.b + g.dense.w.squaredNorm();
        for (const auto* m : {&g.lstm.w_f, &g.lstm.w_i, &g.lstm.w_c, &g.lstm.w_o}) norm2 += m->squaredNorm();
        for (const auto* v : {&g.lstm.b_f, &g.lstm.b_i, &g.lstm.b_c, &g.lstm.b_o}) norm2 += v->squaredNorm();
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) {
          const double scale = cfg.grad_clip / norm;
          for (auto* m : {&g.lstm.w_f, &g.lstm.w_i, &g.lstm.w_c, &g.lstm.w_o}) *m *= scale;
          for (auto* v : {&g.lstm.b_f, &g.lstm.b_i, &g.lstm.b_c, &g.lstm.b_o}) *v *= scale;
          g.dense.w *= scale;
          g.dense.b *= scale;
        }
      }
      adam_update(result.params, g, adam, ++step, cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    detail::eval_metrics(trainX, trainY, result.params, cfg, rec.train_mse, rec.train_mae);
    detail::eval_metrics(devX, devY, result.params, cfg, rec.dev_mse, rec.dev_mae);
    result.records.push_back(rec);

    if (!checkpoint_dir.empty() && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.max_epochs)) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.json", epoch);
      save_checkpoint(checkpoint_dir + "/" + name, result.params, cfg, epoch);
    }

    const auto window = static_cast<std::size_t>(cfg.converge_window);
    if (result.records.size() >= window) {
      const std::size_t from = result.records.size() - window;
      const bool flat = detail::range_of(result.records, from, &EpochRecord::train_mse) < cfg.converge_delta &&
                        detail::range_of(result.records, from, &EpochRecord::dev_mse) < cfg.converge_delta;
      if (flat && std::abs(rec.train_mse - rec.dev_mse) < cfg.converge_gap) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

/**
 * Epoch choice balancing overfitting and fit quality: z-normalize the
 * |train-dev| MSE gap and the train+dev MSE sum across epochs and take the
 * epoch minimizing their total. A zero-variance column contributes nothing;
 * ties go to the earliest epoch.
 */
inline int select_epoch(const std::vector<EpochRecord>& records) {
  if (records.size() < 2) throw std::invalid_argument("select_epoch: need at least two records");
  const auto n = static_cast<double>(records.size());
  std::vector<double> diff(records.size()), sum(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    diff[i] = std::abs(records[i].train_mse - records[i].dev_mse);
    sum[i] = records[i].train_mse + records[i].dev_mse;
  }
  const auto znorm = [&](std::vector<double>& v) {
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    if (sd < 1e-15 * std::max(1.0, std::abs(mean))) {
      std::fill(v.begin(), v.end(), 0.0);
      return;
    }
    for (double& x : v) x = (x - mean) / sd;
  };
  znorm(diff);
  znorm(sum);
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double value = diff[i] + sum[i];
    if (value < best_value) {
      best_value = value;
      best = i;
    }
  }
  return records[best].epoch;
}

// ---------------------------------------------------------------------------
// Epoch log files (columns follow the usual score-table naming).

inline void write_epoch_log(const std::string& path, const std::vector<EpochRecord>& records,
                            const std::string& meta) {
  csv::Writer out(path);
  out.comment(meta);
  out.row(std::vector<std::string>{"epoch", "TRAIN_MSE", "DEV_MSE", "TRAIN_MAE", "DEV_MAE"});
  for (const auto& r : records)
    out.row(std::vector<std::string>{std::to_string(r.epoch), csv::format_double(r.train_mse),
                                     csv::format_double(r.dev_mse), csv::format_double(r.train_mae),
                                     csv::format_double(r.dev_mae)});
}

inline std::vector<EpochRecord> read_epoch_log(const std::string& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw std::runtime_error("empty epoch log: " + path);
  std::vector<EpochRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != 5) throw std::runtime_error("bad epoch log row in " + path);
    EpochRecord rec;
    rec.epoch = static_cast<int>(csv::to_double(cells[0], "epoch"));
    rec.train_mse = csv::to_double(cells[1], "TRAIN_MSE");
    rec.dev_mse = csv::to_double(cells[2], "DEV_MSE");
    rec.train_mae = csv::to_double(cells[3], "TRAIN_MAE");
    rec.dev_mae = csv::to_double(cells[4], "DEV_MAE");
    records.push_back(rec);
  }
  return records;
}

}  // namespace corrcast::nn
