#pragma once

#include "sat/rng.hpp"
#include "sat/world.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sat {

/// Fixed-rate sequence of planar points.
using Window = std::vector<Vec2>;

inline constexpr int kInputLen = 10;
inline constexpr int kOutputLen = 15;
inline constexpr double kPredictDt = 0.2;

/// Single-layer LSTM (gate order i, f, g, o) feeding a three-layer MLP.
struct PredictorWeights {
  int hidden_dim = 32;
  int mlp_width = 64;
  double dt = kPredictDt;
  int input_len = kInputLen;
  int output_len = kOutputLen;

  Eigen::MatrixXd wx;  // 4H x 2
  Eigen::MatrixXd wh;  // 4H x H
  Eigen::VectorXd b;   // 4H
  Eigen::MatrixXd w1;  // M x H
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // M x M
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // 2*output_len x M
  Eigen::VectorXd b3;

  static PredictorWeights zeros(int hidden_dim, int mlp_width = 64);
  /// Uniform(-1/sqrt(fan), 1/sqrt(fan)) per layer.
  static PredictorWeights random(int hidden_dim, int mlp_width, Rng& rng);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
  /// Throws std::invalid_argument on inconsistent shapes or non-finite entries.
  void validate() const;
};

struct Sample {
  Window input;
  Window target;
};

struct TrainConfig {
  int batch_size = 32;
  int epochs = 300;
  double dropout = 0.4;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  void validate() const;
};

struct TrainResult {
  PredictorWeights weights;
  /// Mean minibatch loss per epoch.
  std::vector<double> epoch_loss;
};

/// Shifts the window so its last point is the origin; returns the shift.
std::pair<Window, Vec2> normalize_window(const Window& w);
Window denormalize_window(const Window& w, const Vec2& offset);

/// The eight copies rotated by k*45 degrees about the origin, k = 0..7.
std::array<Window, 8> augment_rotations(const Window& traj);
Window rotate_window(const Window& w, int k);

/// Predicted 15 points in the normalized frame.
Window lstm_forward(const PredictorWeights& w, const Window& input);
/// Normalizes, predicts and maps back to the global frame.
Window lstm_predict(const PredictorWeights& w, const Window& global_input);

/// MSE over the batch and its gradient, dropout disabled.
double loss_and_gradient(const PredictorWeights& w, const std::vector<Sample>& batch,
                         std::vector<double>* grad);

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg, std::uint64_t seed,
                  const PredictorWeights& init);
TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg, std::uint64_t seed,
                  int hidden_dim = 32);

/// Position-velocity Kalman filter noise in window units per step.
struct CvParams {
  double process_noise = 1e-4;
  double measurement_noise = 1e-2;
};

/// Constant-velocity extrapolation from the filtered state at the last point.
Window cv_predict(const Window& input, int horizon = kOutputLen, const CvParams& params = {});

struct DisplacementError {
  double ade = 0.0;
  double fde = 0.0;
};
DisplacementError ade_fde(const Window& pred, const Window& truth);

enum class TrajKind { Linear, Turning, Sinusoidal };

/// Raw trajectories sampled at 0.2 s with speed at most `max_speed`.
std::vector<Window> gen_trajectories(int n, const std::vector<TrajKind>& kinds, std::uint64_t seed,
                                     int length = 40, double max_speed = 0.2);
/// Sliding (10 in, 15 out) windows, normalized on the input's last point.
std::vector<Sample> make_windows(const std::vector<Window>& trajectories, int stride = 1);
/// gen_trajectories + make_windows + 8-fold rotation augmentation.
std::vector<Sample> gen_synthetic_dataset(int n, const std::vector<TrajKind>& kinds, std::uint64_t seed);
std::vector<Sample> augment_dataset(const std::vector<Sample>& samples);

/// JSON weights file ("sat-predictor-v1").
void save_weights(const PredictorWeights& w, const std::filesystem::path& path);
PredictorWeights load_weights(const std::filesystem::path& path);
std::string weights_to_json(const PredictorWeights& w);
PredictorWeights weights_from_json(const std::string& text);

/// Every *.json trajectory file in a directory, sorted by file name.
std::vector<Window> load_trajectory_dir(const std::filesystem::path& dir);
void save_trajectory(const Window& traj, double dt, const std::filesystem::path& path);

}  // namespace sat
