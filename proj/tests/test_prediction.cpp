#include <doctest.h>

#include "sat/errors.hpp"
#include "sat/prediction.hpp"

#include <cmath>
#include <filesystem>

using namespace sat;

namespace {

Window line(Vec2 start, Vec2 step, int n) {
  Window w;
  for (int k = 0; k < n; ++k) w.push_back(start + k * step);
  return w;
}

// Least-squares line through (k, w[k]) evaluated past the end: the limit of a
// constant-velocity Kalman filter with no process noise and a diffuse prior.
Window ls_extrapolate(const Window& w, int horizon) {
  const double n = static_cast<double>(w.size());
  double sk = 0, skk = 0;
  Vec2 sy = Vec2::Zero(), sky = Vec2::Zero();
  for (std::size_t k = 0; k < w.size(); ++k) {
    sk += k;
    skk += double(k) * k;
    sy += w[k];
    sky += double(k) * w[k];
  }
  const Vec2 slope = (n * sky - sk * sy) / (n * skk - sk * sk);
  const Vec2 icept = (sy - slope * sk) / n;
  Window out;
  for (int h = 1; h <= horizon; ++h) out.push_back(icept + slope * (n - 1 + h));
  return out;
}

}  // namespace

TEST_CASE("normalize and denormalize are inverse") {
  const Window w = line({1.0, -2.0}, {0.5, 0.625}, 10);
  const auto [n, off] = normalize_window(w);
  CHECK(n.back() == Vec2::Zero());
  CHECK(off == w.back());
  CHECK(denormalize_window(n, off) == w);
  const auto [again, zero] = normalize_window(n);
  CHECK(again == n);
  CHECK(zero == Vec2::Zero());
}

TEST_CASE("rotation augmentation") {
  const auto rots = augment_rotations({Vec2(1.0, 0.0), Vec2(2.0, 1.0)});
  CHECK(rots[0][0] == Vec2(1.0, 0.0));
  CHECK(rots[2][0].x() == doctest::Approx(0.0));
  CHECK(rots[2][0].y() == doctest::Approx(1.0));
  for (const auto& r : rots) CHECK((r[1] - r[0]).norm() == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS(augment_rotations({}));
}

TEST_CASE("lstm_forward basics") {
  const Window in = line({-0.36, 0.0}, {0.04, 0.0}, 10);
  const auto zero = lstm_forward(PredictorWeights::zeros(8), in);
  CHECK(zero.size() == 15);
  for (const auto& p : zero) CHECK(p == Vec2::Zero());

  Rng rng(4);
  PredictorWeights w = PredictorWeights::zeros(8, 16);
  std::vector<double> flat(w.parameter_count());
  for (double& v : flat) v = rng.uniform(-1.0, 1.0);
  w.assign(flat);
  const auto a = lstm_forward(w, in);
  const auto b = lstm_forward(w, in);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(std::isfinite(a[k].x()));
    CHECK(a[k] == b[k]);
  }
  CHECK_THROWS(lstm_forward(w, {}));
}

TEST_CASE("global prediction is translation equivariant") {
  Rng rng(6);
  const PredictorWeights w = PredictorWeights::random(8, 16, rng);
  const Window in = line({0.0, 0.0}, {0.03, 0.01}, 10);
  const Window shifted = line({5.0, -2.0}, {0.03, 0.01}, 10);
  const auto a = lstm_predict(w, in);
  const auto b = lstm_predict(w, shifted);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK((b[k] - a[k] - Vec2(5.0, -2.0)).norm() < 1e-9);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(10);
  const PredictorWeights w = PredictorWeights::random(8, 16, rng);
  auto data = gen_synthetic_dataset(2, {TrajKind::Turning}, 3);
  data.resize(1);
  std::vector<double> grad;
  loss_and_gradient(w, data, &grad);
  std::vector<double> theta = w.flatten();
  PredictorWeights probe = w;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + 1e-4;
    probe.assign(theta);
    const double up = loss_and_gradient(probe, data, nullptr);
    theta[i] = keep - 1e-4;
    probe.assign(theta);
    const double down = loss_and_gradient(probe, data, nullptr);
    theta[i] = keep;
    const double fd = (up - down) / 2e-4;
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    if (scale < 1e-6) {
      CHECK(std::abs(fd - grad[i]) < 1e-9);
    } else {
      worst = std::max(worst, std::abs(fd - grad[i]) / scale);
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  Rng rng(2);
  const PredictorWeights w = PredictorWeights::random(8, 16, rng);
  auto data = gen_synthetic_dataset(1, {TrajKind::Linear}, 1);
  data.resize(1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  const auto out = train(data, cfg, 5, w);
  CHECK(out.weights.flatten() == w.flatten());
}

TEST_CASE("training reduces loss and learns straight lines") {
  const auto trajs = gen_trajectories(12, {TrajKind::Linear}, 42);
  const auto data = augment_dataset(make_windows(trajs, 4));
  TrainConfig cfg;
  cfg.epochs = 300;
  const auto result = train(data, cfg, 9, 32);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());

  const auto held = make_windows(gen_trajectories(20, {TrajKind::Linear}, 4242), 5);
  double ade = 0.0;
  for (const auto& s : held) ade += ade_fde(lstm_forward(result.weights, s.input), s.target).ade;
  ade /= static_cast<double>(held.size());
  MESSAGE("held-out straight-line ADE " << ade);
  CHECK(ade < 0.05);
}

TEST_CASE("constant velocity prediction") {
  const Window moving = line({0.0, 0.0}, {1.0, 0.0}, 10);
  const auto pred = cv_predict(moving, 15);
  for (int k = 0; k < 15; ++k) {
    CHECK(pred[static_cast<std::size_t>(k)].x() == doctest::Approx(9.0 + k + 1).epsilon(1e-6));
    CHECK(std::abs(pred[static_cast<std::size_t>(k)].y()) < 1e-6);
  }
  const auto still = cv_predict(line({2.0, 3.0}, {0.0, 0.0}, 10), 15);
  for (const auto& p : still) CHECK((p - Vec2(2.0, 3.0)).norm() < 1e-9);
  CHECK_THROWS(cv_predict({Vec2::Zero()}, 15));
}

TEST_CASE("noise-free filter limit equals least-squares extrapolation") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Window noisy = line({rng.uniform(-1, 1), rng.uniform(-1, 1)}, {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)}, 10);
    for (auto& p : noisy) p += 0.02 * Vec2(rng.normal(), rng.normal());
    const auto pred = cv_predict(noisy, 15, CvParams{0.0, 1.0});
    const auto want = ls_extrapolate(noisy, 15);
    for (std::size_t k = 0; k < pred.size(); ++k) CHECK((pred[k] - want[k]).norm() < 1e-5);
  }
}

TEST_CASE("noisy linear input stays near the true line") {
  Rng rng(19);
  const double sigma = 0.01;
  for (int trial = 0; trial < 20; ++trial) {
    const Window truth = line({0.0, 0.0}, {0.04, 0.0}, 25);
    Window in(truth.begin(), truth.begin() + 10);
    for (auto& p : in) p += sigma * Vec2(rng.normal(), rng.normal());
    const auto pred = cv_predict(in, 15, CvParams{0.0, sigma * sigma});
    // Least-squares slope error over ten points has std sigma*sqrt(12/990).
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double horizon = 4.5 + static_cast<double>(k + 1);
      const double bound = 3.0 * sigma * std::sqrt(1.0 / 10.0 + horizon * horizon * 12.0 / 990.0);
      CHECK(std::abs(pred[k].y()) < bound);
    }
  }
}

TEST_CASE("displacement errors") {
  const Window a = line({0.0, 0.0}, {1.0, 0.0}, 15);
  const auto same = ade_fde(a, a);
  CHECK(same.ade == 0.0);
  CHECK(same.fde == 0.0);
  const auto off = ade_fde(a, line({1.0, 0.0}, {1.0, 0.0}, 15));
  CHECK(off.ade == doctest::Approx(1.0));
  CHECK(off.fde == doctest::Approx(1.0));
  CHECK_THROWS(ade_fde(a, Window(3)));
}

TEST_CASE("synthetic dataset") {
  const auto lin = gen_trajectories(3, {TrajKind::Linear}, 1, 40, 0.2);
  for (const auto& t : lin) {
    for (std::size_t k = 1; k < t.size(); ++k) CHECK((t[k] - t[k - 1]).norm() <= 0.04 + 1e-12);
  }
  const auto fixed = gen_trajectories(1, {TrajKind::Linear}, 1, 40, 0.2);
  CHECK(gen_trajectories(1, {TrajKind::Linear}, 1, 40, 0.2)[0] == fixed[0]);
  CHECK_THROWS(gen_trajectories(0, {TrajKind::Linear}, 1));
  const auto a = gen_synthetic_dataset(4, {TrajKind::Turning, TrajKind::Sinusoidal}, 8);
  const auto b = gen_synthetic_dataset(4, {TrajKind::Turning, TrajKind::Sinusoidal}, 8);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() % 8 == 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].input == b[i].input);
    CHECK(a[i].input.back().norm() < 1e-12);
    CHECK(a[i].target.size() == 15);
  }
}

TEST_CASE("loss is invariant to which rotation copy is the original") {
  Rng rng(3);
  const PredictorWeights w = PredictorWeights::random(8, 16, rng);
  const auto base = make_windows(gen_trajectories(2, {TrajKind::Turning}, 5), 4);
  const auto aug = augment_dataset(base);
  std::vector<Sample> relabeled;
  for (const auto& s : base) {
    const Sample r{rotate_window(s.input, 3), rotate_window(s.target, 3)};
    for (const auto& c : augment_dataset({r})) relabeled.push_back(c);
  }
  CHECK(loss_and_gradient(w, aug, nullptr) ==
        doctest::Approx(loss_and_gradient(w, relabeled, nullptr)).epsilon(1e-12));
}

TEST_CASE("weights survive a JSON round trip") {
  Rng rng(1);
  const PredictorWeights w = PredictorWeights::random(4, 8, rng);
  const auto back = weights_from_json(weights_to_json(w));
  CHECK(back.flatten() == w.flatten());
  CHECK(back.hidden_dim == 4);
  CHECK_THROWS_AS(weights_from_json("{\"format\":\"other\"}"), ParseError);

  const auto path = std::filesystem::temp_directory_path() / "sat_weights_test.json";
  save_weights(w, path);
  CHECK(load_weights(path).flatten() == w.flatten());
  std::filesystem::remove(path);
}

TEST_CASE("trajectory directories resample to the predictor rate") {
  const auto dir = std::filesystem::temp_directory_path() / "sat_traj_dir_test";
  std::filesystem::create_directories(dir);
  save_trajectory(line({0.0, 0.0}, {0.1, 0.0}, 5), 0.4, dir / "a.json");
  const auto trajs = load_trajectory_dir(dir);
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].size() == 9);
  CHECK(trajs[0][1].x() == doctest::Approx(0.05));
  std::filesystem::remove_all(dir);
}
