#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include <cstdio>
#include <fstream>

#include "mpctune/mlp.hpp"

using namespace mpctune;
using namespace mpctune::testing;

namespace {

Eigen::VectorXd random_input(Rng& rng, int n = kNetInput, double scale = 2.0) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(-scale, scale);
  return x;
}

std::string temp_path(const std::string& name) {
  return "mlp_test_" + name;
}

}  // namespace

TEST_CASE("softsign values") {
  CHECK(softsign(0.0) == 0.0);
  CHECK(softsign(1.0) == 0.5);
  CHECK(softsign(-3.0) == -0.75);
  CHECK(softsign(1e9) < 1.0);
  CHECK(softsign(-1e9) > -1.0);
}

TEST_CASE("zero network outputs the output mean") {
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Force, 0);
  for (auto& w : p.weights) w.setZero();
  p.out_mean = Eigen::VectorXd::LinSpaced(kNetOutput, 1.0, 6.0);
  const Eigen::VectorXd out =
      mlp_forward(p, Eigen::VectorXd::Zero(kNetInput));
  CHECK((out - p.out_mean).lpNorm<Eigen::Infinity>() == 0.0);
  // Constant network has a zero input Jacobian.
  Rng rng(4);
  const Eigen::MatrixXd jac = mlp_input_jacobian(p, random_input(rng));
  CHECK(jac.norm() == 0.0);
}

TEST_CASE("layer norm of a constant vector yields the offset") {
  // One hidden layer wide enough to exercise the epsilon path.
  MlpSpec spec;
  spec.layer_sizes = {4, 8, 3};
  MlpParams p = init_mlp(spec, ChannelGroup::Force, 1);
  p.weights[0].setZero();
  p.biases[0].setConstant(2.5);  // constant pre-activation
  p.ln_offset[0] = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0);
  p.weights[1].setZero();
  p.weights[1](0, 0) = 1.0;  // pick out softsign(offset_0)
  const Eigen::VectorXd out = mlp_forward(p, Eigen::VectorXd::Zero(4));
  CHECK(out(0) == doctest::Approx(softsign(p.ln_offset[0](0))).epsilon(1e-12));
}

TEST_CASE("single linear layer reduces to the scaled weight matrix") {
  MlpSpec spec;
  spec.layer_sizes = {3, 2};
  MlpParams p = init_mlp(spec, ChannelGroup::Force, 2);
  p.in_std << 2.0, 4.0, 8.0;
  p.out_std << 3.0, 5.0;
  Rng rng(5);
  const Eigen::MatrixXd jac = mlp_input_jacobian(p, random_input(rng, 3));
  const Eigen::MatrixXd expect = p.out_std.asDiagonal() * p.weights[0] *
                                 p.in_std.cwiseInverse().asDiagonal();
  CHECK((jac - expect).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("input jacobian matches central finite differences") {
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Moment, 17);
  // Non-trivial normalization to exercise the full chain.
  Rng rng(6);
  for (int i = 0; i < kNetInput; ++i) {
    p.in_mean(i) = rng.uniform(-1, 1);
    p.in_std(i) = rng.uniform(0.5, 2.0);
  }
  for (int i = 0; i < kNetOutput; ++i) {
    p.out_mean(i) = rng.uniform(-1, 1);
    p.out_std(i) = rng.uniform(0.5, 2.0);
  }
  const double delta = 1e-6;
  for (int sample = 0; sample < 20; ++sample) {
    const Eigen::VectorXd x = random_input(rng);
    const Eigen::MatrixXd jac = mlp_input_jacobian(p, x);
    Eigen::MatrixXd fd(kNetOutput, kNetInput);
    for (int i = 0; i < kNetInput; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += delta;
      xm(i) -= delta;
      fd.col(i) = (mlp_forward(p, xp) - mlp_forward(p, xm)) / (2 * delta);
    }
    CHECK(max_rel_error(jac, fd, 1e-10) < 1e-6);
  }
}

TEST_CASE("training gradients match finite differences of the loss") {
  MlpSpec spec;
  spec.layer_sizes = {18, 16, 16, 16, 6};  // smaller for a fast FD sweep
  MlpParams p = init_mlp(spec, ChannelGroup::Force, 3);
  Rng rng(8);
  Eigen::MatrixXd x(18, 3), y(6, 3);
  for (int c = 0; c < 3; ++c) {
    x.col(c) = random_input(rng, 18);
    y.col(c) = random_input(rng, 6);
  }
  const double l2 = 1e-3;
  std::vector<Eigen::MatrixXd> gw;
  std::vector<Eigen::VectorXd> gb, gg, go;
  train_loss_and_gradient(p, x, y, l2, gw, gb, gg, go);

  const double delta = 1e-6;
  auto loss_at = [&](MlpParams& q) {
    std::vector<Eigen::MatrixXd> tw;
    std::vector<Eigen::VectorXd> tb, tg, to;
    return train_loss_and_gradient(q, x, y, l2, tw, tb, tg, to);
  };

  Rng pick(9);
  double worst = 0.0;
  for (int probe = 0; probe < 60; ++probe) {
    const int layer = static_cast<int>(pick.index(4));
    const auto lu = static_cast<std::size_t>(layer);
    const int r = static_cast<int>(pick.index(
        static_cast<std::size_t>(p.weights[lu].rows())));
    const int c = static_cast<int>(pick.index(
        static_cast<std::size_t>(p.weights[lu].cols())));
    MlpParams q = p;
    q.weights[lu](r, c) += delta;
    const double up = loss_at(q);
    q.weights[lu](r, c) -= 2 * delta;
    const double dn = loss_at(q);
    worst = std::max(worst, rel_error((up - dn) / (2 * delta), gw[lu](r, c),
                                      1e-10));
  }
  for (int probe = 0; probe < 20; ++probe) {
    const int layer = static_cast<int>(pick.index(3));
    const auto lu = static_cast<std::size_t>(layer);
    const int r = static_cast<int>(
        pick.index(static_cast<std::size_t>(p.ln_gain[lu].size())));
    MlpParams q = p;
    q.ln_gain[lu](r) += delta;
    const double up = loss_at(q);
    q.ln_gain[lu](r) -= 2 * delta;
    const double dn = loss_at(q);
    worst = std::max(worst,
                     rel_error((up - dn) / (2 * delta), gg[lu](r), 1e-10));
    q = p;
    q.biases[lu](r) += delta;
    const double bup = loss_at(q);
    q.biases[lu](r) -= 2 * delta;
    const double bdn = loss_at(q);
    worst = std::max(worst,
                     rel_error((bup - bdn) / (2 * delta), gb[lu](r), 1e-10));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("constant-target dataset trains to near-zero validation MSE") {
  Rng rng(10);
  const int n = 400;
  Eigen::MatrixXd X(n, kNetInput), Y(n, kNetOutput);
  Eigen::VectorXd target(kNetOutput);
  for (int i = 0; i < kNetOutput; ++i) target(i) = rng.uniform(-3, 3);
  for (int r = 0; r < n; ++r) {
    X.row(r) = random_input(rng).transpose();
    Y.row(r) = target.transpose();
  }
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 11;
  const TrainResult res = train_mlp(X, Y, ChannelGroup::Force, cfg);
  CHECK(res.val_mse.back() < 1e-6);
  CHECK(res.val_mse.size() == static_cast<std::size_t>(cfg.epochs) + 1);
  CHECK(res.val_mse.back() <= res.val_mse[1]);
}

TEST_CASE("identity-gap dataset converges to the noise floor") {
  Rng rng(12);
  const int n = 1500;
  const double sigma = 0.3;
  Eigen::MatrixXd X(n, kNetInput), Y(n, kNetOutput);
  for (int r = 0; r < n; ++r) {
    X.row(r) = random_input(rng, kNetInput, 5.0).transpose();
    for (int c = 0; c < kNetOutput; ++c)
      Y(r, c) = X(r, 12 + c) + rng.gaussian(0.0, sigma);  // newest slot
  }
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.seed = 13;
  const TrainResult res = train_mlp(X, Y, ChannelGroup::Force, cfg);
  const double floor = sigma * sigma * kNetOutput;
  CHECK(res.val_mse.back() < 2.2 * floor);
  CHECK(res.val_mse.back() > 0.5 * floor);  // cannot beat the noise
}

TEST_CASE("save/load round-trips the forward map bit-exactly") {
  Rng rng(14);
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Force, 15);
  for (int i = 0; i < kNetInput; ++i) {
    p.in_mean(i) = rng.uniform(-2, 2);
    p.in_std(i) = rng.uniform(0.1, 3.0);
  }
  const std::string path = temp_path("roundtrip.json");
  save_mlp(p, path);
  const MlpParams q = load_mlp(path);
  CHECK(q.group == ChannelGroup::Force);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = random_input(rng);
    const Eigen::VectorXd a = mlp_forward(p, x);
    const Eigen::VectorXd b = mlp_forward(q, x);
    CHECK(a == b);
  }
  std::remove(path.c_str());
}

TEST_CASE("truncated and mismatched model files are rejected") {
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Moment, 16);
  const std::string path = temp_path("truncated.json");
  save_mlp(p, path);
  // Truncate the file.
  {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content.substr(0, content.size() / 2);
  }
  CHECK_THROWS_AS(load_mlp(path), std::runtime_error);
  std::remove(path.c_str());

  const std::string path2 = temp_path("group.json");
  save_mlp(p, path2);
  CHECK_THROWS_AS(load_mlp_expecting(path2, ChannelGroup::Force),
                  std::runtime_error);
  CHECK_NOTHROW(load_mlp_expecting(path2, ChannelGroup::Moment));
  std::remove(path2.c_str());
}

TEST_CASE("training is deterministic given the seed") {
  Rng rng(20);
  const int n = 300;
  Eigen::MatrixXd X(n, kNetInput), Y(n, kNetOutput);
  for (int r = 0; r < n; ++r) {
    X.row(r) = random_input(rng).transpose();
    Y.row(r) = random_input(rng, kNetOutput).transpose();
  }
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 77;
  const TrainResult a = train_mlp(X, Y, ChannelGroup::Force, cfg);
  const TrainResult b = train_mlp(X, Y, ChannelGroup::Force, cfg);
  CHECK(a.val_mse == b.val_mse);
  for (std::size_t l = 0; l < a.params.weights.size(); ++l)
    CHECK(a.params.weights[l] == b.params.weights[l]);
}

TEST_CASE("shape mismatches are rejected") {
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Force, 0);
  CHECK_THROWS_AS(mlp_forward(p, Eigen::VectorXd::Zero(7)),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_mlp(Eigen::MatrixXd::Zero(4, 3),
                            Eigen::MatrixXd::Zero(4, kNetOutput),
                            ChannelGroup::Force, TrainConfig{}),
                  std::invalid_argument);
}
