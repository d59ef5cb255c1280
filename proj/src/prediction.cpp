#include "sat/prediction.hpp"

#include "sat/entities.hpp"
#include "sat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sat {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

template <typename Fn>
void for_each_tensor(PredictorWeights& w, Fn&& fn) {
  fn("lstm.wx", w.wx);
  fn("lstm.wh", w.wh);
  fn("lstm.b", w.b);
  fn("mlp.w1", w.w1);
  fn("mlp.b1", w.b1);
  fn("mlp.w2", w.w2);
  fn("mlp.b2", w.b2);
  fn("mlp.w3", w.w3);
  fn("mlp.b3", w.b3);
}

template <typename Fn>
void for_each_tensor(const PredictorWeights& w, Fn&& fn) {
  for_each_tensor(const_cast<PredictorWeights&>(w), [&](const char* name, auto& t) { fn(name, std::as_const(t)); });
}

void fill_uniform(MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

void fill_uniform(VectorXd& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Activations kept for backpropagation. Index t+1 holds the state after step t.
struct Tape {
  std::vector<VectorXd> h, c, gi, gf, gg, go, tc;
  VectorXd mask, hd, z1, r1, z2, r2;
};

VectorXd run(const PredictorWeights& w, const Window& input, Tape* tape, const VectorXd* mask) {
  const int hd = w.hidden_dim;
  VectorXd h = VectorXd::Zero(hd);
  VectorXd c = VectorXd::Zero(hd);
  if (tape) {
    tape->h.assign(1, h);
    tape->c.assign(1, c);
    tape->gi.clear();
    tape->gf.clear();
    tape->gg.clear();
    tape->go.clear();
    tape->tc.clear();
  }
  for (const Vec2& x : input) {
    const VectorXd a = w.wx * x + w.wh * h + w.b;
    const VectorXd gi = a.segment(0, hd).unaryExpr(&sigmoid);
    const VectorXd gf = a.segment(hd, hd).unaryExpr(&sigmoid);
    const VectorXd gg = a.segment(2 * hd, hd).array().tanh();
    const VectorXd go = a.segment(3 * hd, hd).unaryExpr(&sigmoid);
    c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
    const VectorXd tc = c.array().tanh();
    h = go.cwiseProduct(tc);
    if (tape) {
      tape->gi.push_back(gi);
      tape->gf.push_back(gf);
      tape->gg.push_back(gg);
      tape->go.push_back(go);
      tape->tc.push_back(tc);
      tape->h.push_back(h);
      tape->c.push_back(c);
    }
  }
  VectorXd hdrop = mask ? VectorXd(h.cwiseProduct(*mask)) : h;
  VectorXd z1 = w.w1 * hdrop + w.b1;
  VectorXd r1 = z1.cwiseMax(0.0);
  VectorXd z2 = w.w2 * r1 + w.b2;
  VectorXd r2 = z2.cwiseMax(0.0);
  VectorXd y = w.w3 * r2 + w.b3;
  if (tape) {
    tape->mask = mask ? *mask : VectorXd::Ones(hd);
    tape->hd = std::move(hdrop);
    tape->z1 = std::move(z1);
    tape->r1 = std::move(r1);
    tape->z2 = std::move(z2);
    tape->r2 = std::move(r2);
  }
  return y;
}

void backward(const PredictorWeights& w, const Window& input, const Tape& tp, const VectorXd& dy,
              PredictorWeights& g) {
  const int hd = w.hidden_dim;
  g.w3.noalias() += dy * tp.r2.transpose();
  g.b3 += dy;
  const VectorXd dz2 = (w.w3.transpose() * dy).cwiseProduct((tp.z2.array() > 0.0).cast<double>().matrix());
  g.w2.noalias() += dz2 * tp.r1.transpose();
  g.b2 += dz2;
  const VectorXd dz1 = (w.w2.transpose() * dz2).cwiseProduct((tp.z1.array() > 0.0).cast<double>().matrix());
  g.w1.noalias() += dz1 * tp.hd.transpose();
  g.b1 += dz1;

  VectorXd dh = (w.w1.transpose() * dz1).cwiseProduct(tp.mask);
  VectorXd dc = VectorXd::Zero(hd);
  VectorXd da(4 * hd);
  for (int t = static_cast<int>(input.size()) - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    const VectorXd& gi = tp.gi[k];
    const VectorXd& gf = tp.gf[k];
    const VectorXd& gg = tp.gg[k];
    const VectorXd& go = tp.go[k];
    const VectorXd& tc = tp.tc[k];
    dc += dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
    const VectorXd dgo = dh.cwiseProduct(tc);
    da.segment(0, hd) = dc.cwiseProduct(gg).cwiseProduct(gi.cwiseProduct((1.0 - gi.array()).matrix()));
    da.segment(hd, hd) = dc.cwiseProduct(tp.c[k]).cwiseProduct(gf.cwiseProduct((1.0 - gf.array()).matrix()));
    da.segment(2 * hd, hd) = dc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
    da.segment(3 * hd, hd) = dgo.cwiseProduct(go.cwiseProduct((1.0 - go.array()).matrix()));
    g.wx.noalias() += da * input[k].transpose();
    g.wh.noalias() += da * tp.h[k].transpose();
    g.b += da;
    dh = w.wh.transpose() * da;
    dc = dc.cwiseProduct(gf);
  }
}

VectorXd target_vector(const Window& target) {
  VectorXd t(2 * static_cast<Eigen::Index>(target.size()));
  for (std::size_t k = 0; k < target.size(); ++k) {
    t(2 * static_cast<Eigen::Index>(k)) = target[k].x();
    t(2 * static_cast<Eigen::Index>(k) + 1) = target[k].y();
  }
  return t;
}

void check_shapes(const PredictorWeights& w, const Window& input) {
  if (input.empty()) throw std::invalid_argument("predictor: empty input window");
  if (w.wx.rows() != 4 * w.hidden_dim || w.wx.cols() != 2) throw std::invalid_argument("predictor: shape mismatch");
}

}  // namespace

PredictorWeights PredictorWeights::zeros(int hidden_dim, int mlp_width) {
  if (hidden_dim <= 0 || mlp_width <= 0) throw std::invalid_argument("predictor: dimensions must be positive");
  PredictorWeights w;
  w.hidden_dim = hidden_dim;
  w.mlp_width = mlp_width;
  const int out = 2 * w.output_len;
  w.wx = MatrixXd::Zero(4 * hidden_dim, 2);
  w.wh = MatrixXd::Zero(4 * hidden_dim, hidden_dim);
  w.b = VectorXd::Zero(4 * hidden_dim);
  w.w1 = MatrixXd::Zero(mlp_width, hidden_dim);
  w.b1 = VectorXd::Zero(mlp_width);
  w.w2 = MatrixXd::Zero(mlp_width, mlp_width);
  w.b2 = VectorXd::Zero(mlp_width);
  w.w3 = MatrixXd::Zero(out, mlp_width);
  w.b3 = VectorXd::Zero(out);
  return w;
}

PredictorWeights PredictorWeights::random(int hidden_dim, int mlp_width, Rng& rng) {
  PredictorWeights w = zeros(hidden_dim, mlp_width);
  const double kh = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const double km = 1.0 / std::sqrt(static_cast<double>(mlp_width));
  fill_uniform(w.wx, kh, rng);
  fill_uniform(w.wh, kh, rng);
  fill_uniform(w.b, kh, rng);
  fill_uniform(w.w1, kh, rng);
  fill_uniform(w.b1, kh, rng);
  fill_uniform(w.w2, km, rng);
  fill_uniform(w.b2, km, rng);
  fill_uniform(w.w3, km, rng);
  fill_uniform(w.b3, km, rng);
  return w;
}

std::size_t PredictorWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

std::vector<double> PredictorWeights::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_tensor(*this, [&](const char*, const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); });
  return out;
}

void PredictorWeights::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("predictor: parameter count mismatch");
  std::size_t at = 0;
  for_each_tensor(*this, [&](const char*, auto& t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), t.size(), t.data());
    at += static_cast<std::size_t>(t.size());
  });
}

void PredictorWeights::validate() const {
  const int h = hidden_dim;
  const int m = mlp_width;
  const int o = 2 * output_len;
  const bool ok = h > 0 && m > 0 && output_len > 0 && input_len > 0 && wx.rows() == 4 * h && wx.cols() == 2 &&
                  wh.rows() == 4 * h && wh.cols() == h && b.size() == 4 * h && w1.rows() == m && w1.cols() == h &&
                  b1.size() == m && w2.rows() == m && w2.cols() == m && b2.size() == m && w3.rows() == o &&
                  w3.cols() == m && b3.size() == o;
  if (!ok) throw std::invalid_argument("predictor: inconsistent weight shapes");
  for (double v : flatten()) {
    if (!std::isfinite(v)) throw std::invalid_argument("predictor: non-finite weight");
  }
}

void TrainConfig::validate() const {
  if (batch_size <= 0 || epochs <= 0 || learning_rate < 0.0 || dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("train: invalid configuration");
  }
}

std::pair<Window, Vec2> normalize_window(const Window& w) {
  if (w.empty()) throw std::invalid_argument("normalize_window: empty window");
  const Vec2 offset = w.back();
  Window out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - offset;
  return {out, offset};
}

Window denormalize_window(const Window& w, const Vec2& offset) {
  Window out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] + offset;
  return out;
}

Window rotate_window(const Window& w, int k) {
  const double a = k * std::numbers::pi / 4.0;
  Mat2 r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  Window out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = k == 0 ? w[i] : Vec2(r * w[i]);
  return out;
}

std::array<Window, 8> augment_rotations(const Window& traj) {
  if (traj.empty()) throw std::invalid_argument("augment_rotations: empty trajectory");
  std::array<Window, 8> out;
  for (int k = 0; k < 8; ++k) out[static_cast<std::size_t>(k)] = rotate_window(traj, k);
  return out;
}

Window lstm_forward(const PredictorWeights& w, const Window& input) {
  check_shapes(w, input);
  const VectorXd y = run(w, input, nullptr, nullptr);
  Window out(static_cast<std::size_t>(y.size() / 2));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = Vec2(y(2 * static_cast<Eigen::Index>(k)), y(2 * static_cast<Eigen::Index>(k) + 1));
  }
  return out;
}

Window lstm_predict(const PredictorWeights& w, const Window& global_input) {
  const auto [norm, offset] = normalize_window(global_input);
  return denormalize_window(lstm_forward(w, norm), offset);
}

double loss_and_gradient(const PredictorWeights& w, const std::vector<Sample>& batch, std::vector<double>* grad) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  PredictorWeights g = PredictorWeights::zeros(w.hidden_dim, w.mlp_width);
  Tape tape;
  double loss = 0.0;
  const double scale = 1.0 / (static_cast<double>(batch.size()) * 2.0 * w.output_len);
  for (const auto& s : batch) {
    check_shapes(w, s.input);
    const VectorXd y = run(w, s.input, grad ? &tape : nullptr, nullptr);
    const VectorXd diff = y - target_vector(s.target);
    loss += diff.squaredNorm() * scale;
    if (grad) backward(w, s.input, tape, 2.0 * scale * diff, g);
  }
  if (grad) *grad = g.flatten();
  return loss;
}

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg, std::uint64_t seed,
                  const PredictorWeights& init) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  cfg.validate();
  init.validate();
  Rng rng = Rng::derive(seed, Stream::Training);
  TrainResult result{init, {}};
  PredictorWeights& w = result.weights;
  std::vector<double> theta = w.flatten();
  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double scale = 1.0 / (2.0 * w.output_len);
  const double keep = 1.0 - cfg.dropout;
  long step = 0;
  Tape tape;
  VectorXd mask(w.hidden_dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      PredictorWeights g = PredictorWeights::zeros(w.hidden_dim, w.mlp_width);
      double loss = 0.0;
      for (std::size_t j = start; j < end; ++j) {
        const Sample& s = dataset[order[j]];
        const VectorXd* mp = nullptr;
        if (cfg.dropout > 0.0) {
          for (Eigen::Index u = 0; u < mask.size(); ++u) mask(u) = rng.uniform() < keep ? 1.0 / keep : 0.0;
          mp = &mask;
        }
        const VectorXd y = run(w, s.input, &tape, mp);
        const VectorXd diff = y - target_vector(s.target);
        loss += diff.squaredNorm() * scale * inv_b;
        backward(w, s.input, tape, 2.0 * scale * inv_b * diff, g);
      }
      if (!std::isfinite(loss)) throw TrainingDiverged("train: loss became non-finite");
      epoch_loss += loss;
      ++batches;

      ++step;
      const std::vector<double> grad = g.flatten();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
        theta[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
      }
      w.assign(theta);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg, std::uint64_t seed, int hidden_dim) {
  Rng rng = Rng::derive(seed, Stream::Training, 1);
  return train(dataset, cfg, seed, PredictorWeights::random(hidden_dim, 64, rng));
}

Window cv_predict(const Window& input, int horizon, const CvParams& params) {
  if (input.size() < 2) throw std::invalid_argument("cv_predict: need at least two points");
  if (horizon <= 0) throw std::invalid_argument("cv_predict: horizon must be positive");
  // Two independent per-axis filters, state (position, velocity per step).
  Mat2 f;
  f << 1.0, 1.0, 0.0, 1.0;
  Vec2 gvec(0.5, 1.0);
  const Mat2 q = params.process_noise * gvec * gvec.transpose();
  Vec2 pos, vel;
  for (int axis = 0; axis < 2; ++axis) {
    Vec2 s(input[0](axis), 0.0);
    Mat2 p = Mat2::Identity() * 1e6;
    for (std::size_t k = 0; k < input.size(); ++k) {
      if (k > 0) {
        s = f * s;
        p = f * p * f.transpose() + q;
      }
      const double innov = input[k](axis) - s(0);
      const double sv = p(0, 0) + params.measurement_noise;
      const Vec2 gain = p.col(0) / sv;
      s += gain * innov;
      p = p - gain * p.row(0);
    }
    pos(axis) = s(0);
    vel(axis) = s(1);
  }
  Window out(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) out[static_cast<std::size_t>(k)] = pos + (k + 1) * vel;
  return out;
}

DisplacementError ade_fde(const Window& pred, const Window& truth) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("ade_fde: length mismatch");
  DisplacementError e;
  for (std::size_t k = 0; k < pred.size(); ++k) e.ade += (pred[k] - truth[k]).norm();
  e.ade /= static_cast<double>(pred.size());
  e.fde = (pred.back() - truth.back()).norm();
  return e;
}

std::vector<Window> gen_trajectories(int n, const std::vector<TrajKind>& kinds, std::uint64_t seed, int length,
                                     double max_speed) {
  if (n <= 0) throw std::invalid_argument("gen_trajectories: n must be positive");
  if (kinds.empty()) throw std::invalid_argument("gen_trajectories: no kinds");
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, Stream::Dataset, static_cast<std::uint64_t>(i));
    const TrajKind kind = kinds[static_cast<std::size_t>(i) % kinds.size()];
    const double speed = rng.uniform(0.3, 1.0) * max_speed;
    const double theta0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double omega = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 0.8);
    const double amp = rng.uniform(0.4, 1.2);
    const double freq = rng.uniform(0.1, 0.4);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Window traj;
    traj.reserve(static_cast<std::size_t>(length));
    Vec2 p = Vec2::Zero();
    for (int k = 0; k < length; ++k) {
      traj.push_back(p);
      const double t = k * kPredictDt;
      double heading = theta0;
      if (kind == TrajKind::Turning) heading += omega * t;
      if (kind == TrajKind::Sinusoidal) heading += amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
      p += speed * kPredictDt * Vec2(std::cos(heading), std::sin(heading));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Sample> make_windows(const std::vector<Window>& trajectories, int stride) {
  if (stride <= 0) throw std::invalid_argument("make_windows: stride must be positive");
  std::vector<Sample> out;
  const std::size_t span = kInputLen + kOutputLen;
  for (const auto& traj : trajectories) {
    for (std::size_t s = 0; s + span <= traj.size(); s += static_cast<std::size_t>(stride)) {
      Sample sample;
      const Vec2 offset = traj[s + kInputLen - 1];
      for (std::size_t k = 0; k < kInputLen; ++k) sample.input.push_back(traj[s + k] - offset);
      for (std::size_t k = 0; k < kOutputLen; ++k) sample.target.push_back(traj[s + kInputLen + k] - offset);
      out.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<Sample> augment_dataset(const std::vector<Sample>& samples) {
  std::vector<Sample> out;
  out.reserve(samples.size() * 8);
  for (const auto& s : samples) {
    for (int k = 0; k < 8; ++k) out.push_back({rotate_window(s.input, k), rotate_window(s.target, k)});
  }
  return out;
}

std::vector<Sample> gen_synthetic_dataset(int n, const std::vector<TrajKind>& kinds, std::uint64_t seed) {
  return augment_dataset(make_windows(gen_trajectories(n, kinds, seed)));
}

std::string weights_to_json(const PredictorWeights& w) {
  nlohmann::json doc;
  doc["format"] = "sat-predictor-v1";
  doc["hidden_dim"] = w.hidden_dim;
  doc["mlp_width"] = w.mlp_width;
  doc["dt"] = w.dt;
  doc["input_len"] = w.input_len;
  doc["output_len"] = w.output_len;
  nlohmann::json tensors = nlohmann::json::object();
  for_each_tensor(w, [&](const char* name, const auto& t) {
    nlohmann::json entry;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) data.push_back(t(i, j));
    entry["shape"] = t.cols() == 1 ? nlohmann::json::array({t.rows()}) : nlohmann::json::array({t.rows(), t.cols()});
    entry["data"] = data;
    tensors[name] = entry;
  });
  doc["tensors"] = tensors;
  return doc.dump();
}

PredictorWeights weights_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights: ") + e.what());
  }
  if (doc.value("format", "") != "sat-predictor-v1") throw ParseError("weights: unknown format");
  try {
    PredictorWeights w = PredictorWeights::zeros(doc.at("hidden_dim").get<int>(), doc.at("mlp_width").get<int>());
    w.dt = doc.at("dt").get<double>();
    w.input_len = doc.at("input_len").get<int>();
    if (doc.at("output_len").get<int>() != w.output_len) throw ParseError("weights: unsupported output_len");
    const auto& tensors = doc.at("tensors");
    for_each_tensor(w, [&](const char* name, auto& t) {
      const auto& entry = tensors.at(name);
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const Eigen::Index rows = shape.at(0);
      const Eigen::Index cols = shape.size() > 1 ? shape[1] : 1;
      if (rows != t.rows() || cols != t.cols()) throw ParseError(std::string("weights: shape mismatch for ") + name);
      const auto data = entry.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError(std::string("weights: size mismatch for ") + name);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = data[static_cast<std::size_t>(i * cols + j)];
    });
    w.validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("weights: ") + e.what());
  }
}

void save_weights(const PredictorWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << weights_to_json(w) << "\n";
}

PredictorWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("weights: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return weights_from_json(ss.str());
}

std::vector<Window> load_trajectory_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Window> out;
  for (const auto& f : files) {
    const auto samples = load_trajectory(f);
    if (samples.size() < 2) continue;
    // Resample to the predictor rate by linear interpolation.
    Window traj;
    std::size_t j = 0;
    for (double t = samples.front().t; t <= samples.back().t + 1e-9; t += kPredictDt) {
      while (j + 2 < samples.size() && samples[j + 1].t < t) ++j;
      const auto& a = samples[j];
      const auto& b = samples[j + 1];
      const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
      traj.emplace_back(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void save_trajectory(const Window& traj, double dt, const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    doc.push_back({{"t", static_cast<double>(k) * dt}, {"x", traj[k].x()}, {"y", traj[k].y()}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump() << "\n";
}

}  // namespace sat
