#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace mpctune {

inline constexpr int kNetInput = 18;   // history w = 3 x 6 channels
inline constexpr int kNetOutput = 6;

enum class ChannelGroup { Force, Moment };

std::string to_string(ChannelGroup g);
ChannelGroup channel_group_from_string(const std::string& s);

// 18 -> 64 -> 64 -> 64 -> 6, softsign activations, layer normalization after
// each hidden linear layer (before the activation).
struct MlpSpec {
  std::vector<int> layer_sizes{18, 64, 64, 64, 6};
  double layer_norm_eps = 1e-5;

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
};

struct MlpParams {
  MlpSpec spec;
  ChannelGroup group = ChannelGroup::Force;
  std::vector<Eigen::MatrixXd> weights;   // one per layer
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::VectorXd> ln_gain;   // hidden layers only
  std::vector<Eigen::VectorXd> ln_offset;
  // Per-channel z-score normalization captured from the training set.
  Eigen::VectorXd in_mean, in_std, out_mean, out_std;
  int version = 1;

  void validate() const;
};

inline double softsign(double x) { return x / (1.0 + std::abs(x)); }

// Seeded parameter initialization (uniform Xavier on weights, layer norm at
// identity, normalization stats at identity).
MlpParams init_mlp(const MlpSpec& spec, ChannelGroup group, std::uint64_t seed);

// Physical units in, physical units out.
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

// Exact analytic Jacobian of mlp_forward, 6 x 18.
Eigen::MatrixXd mlp_input_jacobian(const MlpParams& params,
                                   const Eigen::VectorXd& input);

struct TrainConfig {
  double lr = 1e-3;
  double l2_weight = 1e-3;
  int epochs = 200;
  int batch_size = 256;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainResult {
  MlpParams params;
  // Physical-units MSE per sample, summed over the 6 output channels.
  // Entry 0 is the pre-training evaluation; entry e is after epoch e.
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  int best_epoch = 0;  // argmin of val_mse
};

// Minimizes mean-per-sample squared error (normalized space) plus
// l2_weight * ||W||^2 over the linear-layer weights, by Adam. Deterministic
// given cfg.seed. X is n x 18, Y is n x 6, both in physical units.
TrainResult train_mlp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                      ChannelGroup group, const TrainConfig& cfg,
                      const MlpSpec& spec = MlpSpec{});

// Training objective and its gradient on an explicit batch (normalized-space
// MSE + L2), exposed for gradient verification. The gradient layout matches
// pack_gradients below.
double train_loss_and_gradient(const MlpParams& params,
                               const Eigen::MatrixXd& x_norm_cols,
                               const Eigen::MatrixXd& y_norm_cols,
                               double l2_weight,
                               std::vector<Eigen::MatrixXd>& grad_w,
                               std::vector<Eigen::VectorXd>& grad_b,
                               std::vector<Eigen::VectorXd>& grad_g,
                               std::vector<Eigen::VectorXd>& grad_o);

// Lossless round-trip; the file records the spec, shapes, normalization
// stats, channel group, and a format-version tag.
void save_mlp(const MlpParams& params, const std::string& path);
MlpParams load_mlp(const std::string& path);
MlpParams load_mlp_expecting(const std::string& path, ChannelGroup expected);

}  // namespace mpctune
