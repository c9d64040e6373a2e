#pragma once

/* Scenario-translation regressor: a small feed-forward net mapping
 * (plan bits, weather, scenario distribution) to the translated distribution.
 * Rectifier hidden layers, softmax head, cross-entropy loss, Adam updates.
 * Hand-rolled on purpose; the backprop is pinned against central finite
 * differences in the tests. */

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridhard/common.hpp"
#include "gridhard/outage.hpp"

namespace gridhard {

struct RegressorModel {
  int n_seg = 0, n_weather = 0, n_scen = 0;
  std::vector<int> dims;  // [n_seg+n_weather+n_scen, hidden..., n_scen]
  std::vector<Eigen::MatrixXd> W;  // per layer: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd feat_mean, feat_std;  // weather standardization (training split)

  int input_dim() const { return dims.empty() ? 0 : dims.front(); }
  int output_dim() const { return dims.empty() ? 0 : dims.back(); }
};

struct TrainingConfig {
  int batch_size = 32;
  int max_epochs = 100;
  double learning_rate = 1e-3;
  int patience = 10;  // epochs without val improvement before stopping
  double train_frac = 0.70;
  double val_frac = 0.15;  // remainder held out as the test share
  int hidden_width = 64;
  int hidden_layers = 3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainingTrace {
  std::vector<double> train_loss, val_loss;  // one entry per epoch run
  int best_epoch = -1;                       // epoch whose weights were kept
  int epochs_run = 0;
  bool early_stopped = false;
};

struct TrainResult {
  RegressorModel model;
  TrainingTrace trace;
  std::vector<size_t> train_idx, val_idx, test_idx;
};

namespace detail {

inline Eigen::VectorXd softmax_vec(Eigen::VectorXd z) {
  double mx = z.maxCoeff();
  z = (z.array() - mx).exp();
  return z / z.sum();
}

inline Eigen::MatrixXd softmax_cols(Eigen::MatrixXd z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) z.col(c) = softmax_vec(z.col(c));
  return z;
}

// mean cross-entropy over columns; probabilities clamped away from log(0)
inline double cross_entropy(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  double loss = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c)
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      if (y(r, c) > 0) loss -= y(r, c) * std::log(std::max(p(r, c), 1e-12));
  return loss / static_cast<double>(p.cols());
}

struct LayerGrads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

/* Forward with cached activations, then backprop of mean cross-entropy.
 * Returns the batch loss; fills grads. */
inline double forward_backward(const RegressorModel& m, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y, LayerGrads& g) {
  const size_t L = m.W.size();
  std::vector<Eigen::MatrixXd> A(L + 1);
  A[0] = X;
  for (size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd Z = (m.W[l] * A[l]).colwise() + m.b[l];
    A[l + 1] = l + 1 < L ? Z.cwiseMax(0.0).eval() : softmax_cols(std::move(Z));
  }
  double loss = cross_entropy(A[L], Y);
  const double invb = 1.0 / static_cast<double>(X.cols());
  g.dW.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd dZ = (A[L] - Y) * invb;  // softmax + cross-entropy pair
  for (size_t l = L; l-- > 0;) {
    g.dW[l] = dZ * A[l].transpose();
    g.db[l] = dZ.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd dA = m.W[l].transpose() * dZ;
      dZ = dA.cwiseProduct((A[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

inline double batch_loss(const RegressorModel& m, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y) {
  const size_t L = m.W.size();
  Eigen::MatrixXd A = X;
  for (size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd Z = (m.W[l] * A).colwise() + m.b[l];
    A = l + 1 < L ? Z.cwiseMax(0.0).eval() : softmax_cols(std::move(Z));
  }
  return cross_entropy(A, Y);
}

}  // namespace detail

inline Eigen::VectorXd regressor_input(const RegressorModel& m, const std::vector<double>& h,
                                       const std::vector<double>& weather,
                                       const std::vector<double>& o) {
  if (static_cast<int>(h.size()) != m.n_seg || static_cast<int>(weather.size()) != m.n_weather ||
      static_cast<int>(o.size()) != m.n_scen)
    throw ConfigError("regressor input dims do not match model");
  Eigen::VectorXd x(m.input_dim());
  int at = 0;
  for (double v : h) x[at++] = v;
  for (int j = 0; j < m.n_weather; ++j)
    x[at++] = (weather[static_cast<size_t>(j)] - m.feat_mean[j]) / m.feat_std[j];
  for (double v : o) x[at++] = v;
  return x;
}

/* Pure forward pass; output is a probability vector for any finite input. */
inline std::vector<double> predict(const RegressorModel& m, const std::vector<double>& h,
                                   const std::vector<double>& weather,
                                   const std::vector<double>& o) {
  Eigen::VectorXd a = regressor_input(m, h, weather, o);
  for (size_t l = 0; l < m.W.size(); ++l) {
    Eigen::VectorXd z = m.W[l] * a + m.b[l];
    a = l + 1 < m.W.size() ? z.cwiseMax(0.0).eval() : detail::softmax_vec(std::move(z));
  }
  return std::vector<double>(a.data(), a.data() + a.size());
}

inline RegressorModel init_regressor(int n_seg, int n_weather, int n_scen,
                                     const TrainingConfig& cfg, Rng& rng) {
  if (n_seg < 0 || n_weather < 0 || n_scen < 1) throw ConfigError("bad regressor shape");
  RegressorModel m;
  m.n_seg = n_seg;
  m.n_weather = n_weather;
  m.n_scen = n_scen;
  m.dims.push_back(n_seg + n_weather + n_scen);
  for (int l = 0; l < cfg.hidden_layers; ++l) m.dims.push_back(cfg.hidden_width);
  m.dims.push_back(n_scen);
  m.feat_mean = Eigen::VectorXd::Zero(n_weather);
  m.feat_std = Eigen::VectorXd::Ones(n_weather);
  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    int fan_in = m.dims[l], fan_out = m.dims[l + 1];
    double limit = std::sqrt(6.0 / std::max(1, fan_in));
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = u(rng);
    m.W.push_back(std::move(w));
    m.b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

/* Deterministic per seed: shuffle, split, standardize weather on the training
 * share, minibatch Adam with early stopping on validation loss, restore the
 * best-validation weights. Tiny datasets may leave val/test empty, in which
 * case the train loss doubles as the monitored loss. */
inline TrainResult train_regressor(const std::vector<TrainingInstance>& data,
                                   const TrainingConfig& cfg, std::uint64_t seed) {
  if (data.empty()) throw ConfigError("train: empty dataset");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw ConfigError("train: bad config");
  if (cfg.train_frac <= 0 || cfg.val_frac < 0 || cfg.train_frac + cfg.val_frac > 1.0 + 1e-9)
    throw ConfigError("train: bad split fractions");
  const size_t N = data.size();
  const size_t n_seg = data[0].h.size(), n_w = data[0].weather.size(), n_s = data[0].o.size();
  for (const auto& t : data)
    if (t.h.size() != n_seg || t.weather.size() != n_w || t.o.size() != n_s ||
        t.label.size() != n_s)
      throw ConfigError("train: inconsistent instance dimensions");

  Rng rng(seed);
  std::vector<size_t> idx(N);
  for (size_t i = 0; i < N; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);

  TrainResult out;
  size_t n_train = std::max<size_t>(1, static_cast<size_t>(std::llround(cfg.train_frac * N)));
  size_t n_val = static_cast<size_t>(std::llround(cfg.val_frac * N));
  n_train = std::min(n_train, N);
  n_val = std::min(n_val, N - n_train);
  out.train_idx.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
  out.val_idx.assign(idx.begin() + static_cast<long>(n_train),
                     idx.begin() + static_cast<long>(n_train + n_val));
  out.test_idx.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());

  RegressorModel m = init_regressor(static_cast<int>(n_seg), static_cast<int>(n_w),
                                    static_cast<int>(n_s), cfg, rng);
  for (size_t j = 0; j < n_w; ++j) {
    double mean = 0;
    for (size_t i : out.train_idx) mean += data[i].weather[j];
    mean /= static_cast<double>(n_train);
    double var = 0;
    for (size_t i : out.train_idx) {
      double d = data[i].weather[j] - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(n_train));
    m.feat_mean[static_cast<int>(j)] = mean;
    m.feat_std[static_cast<int>(j)] = sd > 1e-12 ? sd : 1.0;
  }

  auto fill_cols = [&](const std::vector<size_t>& rows, size_t from, size_t count,
                       Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
    X.resize(static_cast<long>(n_seg + n_w + n_s), static_cast<long>(count));
    Y.resize(static_cast<long>(n_s), static_cast<long>(count));
    for (size_t c = 0; c < count; ++c) {
      const auto& t = data[rows[from + c]];
      X.col(static_cast<long>(c)) = regressor_input(m, t.h, t.weather, t.o);
      for (size_t r = 0; r < n_s; ++r) Y(static_cast<long>(r), static_cast<long>(c)) = t.label[r];
    }
  };

  Eigen::MatrixXd Xval, Yval;
  if (!out.val_idx.empty()) fill_cols(out.val_idx, 0, out.val_idx.size(), Xval, Yval);

  // Adam state
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mB, vB;
  for (size_t l = 0; l < m.W.size(); ++l) {
    mW.push_back(Eigen::MatrixXd::Zero(m.W[l].rows(), m.W[l].cols()));
    vW.push_back(Eigen::MatrixXd::Zero(m.W[l].rows(), m.W[l].cols()));
    mB.push_back(Eigen::VectorXd::Zero(m.b[l].size()));
    vB.push_back(Eigen::VectorXd::Zero(m.b[l].size()));
  }
  long adam_t = 0;

  std::vector<size_t> order = out.train_idx;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> bestW = m.W;
  std::vector<Eigen::VectorXd> bestB = m.b;
  int stall = 0;
  detail::LayerGrads g;
  Eigen::MatrixXd Xb, Yb;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double ep_loss = 0;
    size_t seen = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size)) {
      size_t bs = std::min(static_cast<size_t>(cfg.batch_size), order.size() - at);
      fill_cols(order, at, bs, Xb, Yb);
      double loss = detail::forward_backward(m, Xb, Yb, g);
      ep_loss += loss * static_cast<double>(bs);
      seen += bs;
      ++adam_t;
      double corr = cfg.learning_rate * std::sqrt(1.0 - std::pow(cfg.beta2, adam_t)) /
                    (1.0 - std::pow(cfg.beta1, adam_t));
      for (size_t l = 0; l < m.W.size(); ++l) {
        mW[l] = cfg.beta1 * mW[l] + (1 - cfg.beta1) * g.dW[l];
        vW[l] = cfg.beta2 * vW[l] + (1 - cfg.beta2) * g.dW[l].cwiseProduct(g.dW[l]);
        m.W[l] -= corr * mW[l].cwiseQuotient(vW[l].cwiseSqrt() +
                                             Eigen::MatrixXd::Constant(
                                                 vW[l].rows(), vW[l].cols(), cfg.adam_eps));
        mB[l] = cfg.beta1 * mB[l] + (1 - cfg.beta1) * g.db[l];
        vB[l] = cfg.beta2 * vB[l] + (1 - cfg.beta2) * g.db[l].cwiseProduct(g.db[l]);
        m.b[l] -= corr * mB[l].cwiseQuotient(
                             vB[l].cwiseSqrt() +
                             Eigen::VectorXd::Constant(vB[l].size(), cfg.adam_eps));
      }
    }
    double train_loss = ep_loss / static_cast<double>(seen);
    double val_loss = out.val_idx.empty() ? train_loss : detail::batch_loss(m, Xval, Yval);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw SolveError("training diverged at epoch " + std::to_string(epoch));
    out.trace.train_loss.push_back(train_loss);
    out.trace.val_loss.push_back(val_loss);
    out.trace.epochs_run = epoch + 1;
    if (val_loss < best_val - 1e-12) {
      best_val = val_loss;
      bestW = m.W;
      bestB = m.b;
      out.trace.best_epoch = epoch;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      out.trace.early_stopped = true;
      break;
    }
  }
  m.W = bestW;
  m.b = bestB;
  out.model = std::move(m);
  return out;
}

struct EvalMetrics {
  double accuracy = 0, precision = 0, recall = 0;
  double mae = 0, rmse = 0;
  int n = 0;
};

/* Accuracy/precision/recall on argmax classes (macro over classes that
 * appear), MAE/RMSE over the full probability vectors. */
inline EvalMetrics evaluate_regressor(const RegressorModel& m,
                                      const std::vector<TrainingInstance>& test) {
  if (test.empty()) throw ConfigError("evaluate: empty test set");
  size_t S = static_cast<size_t>(m.n_scen);
  std::vector<long> tp(S, 0), fp(S, 0), fn(S, 0);
  long correct = 0;
  double abs_sum = 0, sq_sum = 0;
  for (const auto& t : test) {
    std::vector<double> p = predict(m, t.h, t.weather, t.o);
    size_t pa = static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    size_t ya = static_cast<size_t>(std::max_element(t.label.begin(), t.label.end()) -
                                    t.label.begin());
    if (pa == ya) {
      ++correct;
      ++tp[pa];
    } else {
      ++fp[pa];
      ++fn[ya];
    }
    for (size_t s = 0; s < S; ++s) {
      double d = p[s] - t.label[s];
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
  }
  EvalMetrics e;
  e.n = static_cast<int>(test.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  double prec = 0, rec = 0;
  int nprec = 0, nrec = 0;
  for (size_t s = 0; s < S; ++s) {
    if (tp[s] + fp[s] > 0) {
      prec += static_cast<double>(tp[s]) / static_cast<double>(tp[s] + fp[s]);
      ++nprec;
    }
    if (tp[s] + fn[s] > 0) {
      rec += static_cast<double>(tp[s]) / static_cast<double>(tp[s] + fn[s]);
      ++nrec;
    }
  }
  e.precision = nprec > 0 ? prec / nprec : 0.0;
  e.recall = nrec > 0 ? rec / nrec : 0.0;
  double cnt = static_cast<double>(test.size() * S);
  e.mae = abs_sum / cnt;
  e.rmse = std::sqrt(sq_sum / cnt);
  return e;
}

/* Central finite differences over the parameters (all of them, or a seeded
 * subsample when max_params > 0) against the analytic gradient on one
 * instance. Returns the max relative error. */
inline double gradient_check(const RegressorModel& model, const TrainingInstance& sample,
                             double eps = 1e-5, size_t max_params = 0, std::uint64_t seed = 1) {
  if (eps < 1e-7 || eps > 1e-3) throw ConfigError("gradient_check: eps out of range");
  RegressorModel m = model;  // local copy gets perturbed
  Eigen::MatrixXd X(m.input_dim(), 1), Y(m.output_dim(), 1);
  X.col(0) = regressor_input(m, sample.h, sample.weather, sample.o);
  for (int r = 0; r < m.output_dim(); ++r) Y(r, 0) = sample.label[static_cast<size_t>(r)];
  detail::LayerGrads g;
  detail::forward_backward(m, X, Y, g);

  struct Slot {
    int layer;
    long index;  // < W size: weight, else bias at index - W size
  };
  std::vector<Slot> slots;
  for (size_t l = 0; l < m.W.size(); ++l) {
    for (long i = 0; i < m.W[l].size(); ++i) slots.push_back({static_cast<int>(l), i});
    for (long i = 0; i < m.b[l].size(); ++i)
      slots.push_back({static_cast<int>(l), m.W[l].size() + i});
  }
  if (max_params > 0 && slots.size() > max_params) {
    Rng rng(seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    slots.resize(std::min(slots.size(), std::max<size_t>(max_params, 500)));
  }

  double worst = 0;
  for (const auto& s : slots) {
    double* p;
    double analytic;
    if (s.index < m.W[static_cast<size_t>(s.layer)].size()) {
      p = m.W[static_cast<size_t>(s.layer)].data() + s.index;
      analytic = g.dW[static_cast<size_t>(s.layer)].data()[s.index];
    } else {
      long bi = s.index - m.W[static_cast<size_t>(s.layer)].size();
      p = m.b[static_cast<size_t>(s.layer)].data() + bi;
      analytic = g.db[static_cast<size_t>(s.layer)][bi];
    }
    double keep = *p;
    *p = keep + eps;
    double up = detail::batch_loss(m, X, Y);
    *p = keep - eps;
    double dn = detail::batch_loss(m, X, Y);
    *p = keep;
    double fd = (up - dn) / (2 * eps);
    double rel = std::abs(analytic - fd) / std::max({1e-6, std::abs(analytic), std::abs(fd)});
    worst = std::max(worst, rel);
  }
  return worst;
}

inline nlohmann::json model_to_json(const RegressorModel& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["n_seg"] = m.n_seg;
  j["n_weather"] = m.n_weather;
  j["n_scen"] = m.n_scen;
  j["dims"] = m.dims;
  j["feat_mean"] = std::vector<double>(m.feat_mean.data(), m.feat_mean.data() + m.feat_mean.size());
  j["feat_std"] = std::vector<double>(m.feat_std.data(), m.feat_std.data() + m.feat_std.size());
  nlohmann::json layers = nlohmann::json::array();
  for (size_t l = 0; l < m.W.size(); ++l) {
    nlohmann::json lay;
    std::vector<double> w;
    w.reserve(static_cast<size_t>(m.W[l].size()));
    for (long r = 0; r < m.W[l].rows(); ++r)  // row-major on disk
      for (long c = 0; c < m.W[l].cols(); ++c) w.push_back(m.W[l](r, c));
    lay["w"] = std::move(w);
    lay["b"] = std::vector<double>(m.b[l].data(), m.b[l].data() + m.b[l].size());
    layers.push_back(std::move(lay));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline RegressorModel model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw ConfigError("model file: unsupported version");
  RegressorModel m;
  m.n_seg = j.at("n_seg").get<int>();
  m.n_weather = j.at("n_weather").get<int>();
  m.n_scen = j.at("n_scen").get<int>();
  m.dims = j.at("dims").get<std::vector<int>>();
  if (m.dims.size() < 2 || m.dims.front() != m.n_seg + m.n_weather + m.n_scen ||
      m.dims.back() != m.n_scen)
    throw ConfigError("model file: inconsistent dims");
  auto mean = j.at("feat_mean").get<std::vector<double>>();
  auto sd = j.at("feat_std").get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != m.n_weather || sd.size() != mean.size())
    throw ConfigError("model file: bad standardization vectors");
  m.feat_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
  m.feat_std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<long>(sd.size()));
  const auto& layers = j.at("layers");
  if (layers.size() != m.dims.size() - 1) throw ConfigError("model file: layer count mismatch");
  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    auto w = layers[l].at("w").get<std::vector<double>>();
    auto bias = layers[l].at("b").get<std::vector<double>>();
    long rows = m.dims[l + 1], cols = m.dims[l];
    if (static_cast<long>(w.size()) != rows * cols || static_cast<long>(bias.size()) != rows)
      throw ConfigError("model file: layer " + std::to_string(l) + " has wrong shape");
    Eigen::MatrixXd wm(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) wm(r, c) = w[static_cast<size_t>(r * cols + c)];
    m.W.push_back(std::move(wm));
    m.b.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), rows));
  }
  return m;
}

inline void save_model(const std::string& path, const RegressorModel& m) {
  write_text_file(path, model_to_json(m).dump(1) + "\n");
}

inline RegressorModel load_model(const std::string& path) {
  return model_from_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace gridhard
