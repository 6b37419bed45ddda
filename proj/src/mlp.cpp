#include "mpctune/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mpctune/rng.hpp"
#include <json.hpp>

namespace mpctune {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double softsign_deriv(double x) {
  const double d = 1.0 + std::abs(x);
  return 1.0 / (d * d);
}

// Column-wise layer norm. Caches the normalized activations and inverse
// stddev for the backward pass.
void layer_norm_forward(const VectorXd& gain, const VectorXd& offset,
                        double eps, const MatrixXd& z, MatrixXd& x_hat,
                        VectorXd& inv_std, MatrixXd& out) {
  const auto n = z.rows();
  x_hat.resize(z.rows(), z.cols());
  inv_std.resize(z.cols());
  out.resize(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double mu = z.col(c).mean();
    const double var = (z.col(c).array() - mu).square().sum() / double(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(c) = inv;
    x_hat.col(c) = (z.col(c).array() - mu) * inv;
    out.col(c) = gain.array() * x_hat.col(c).array() + offset.array();
  }
}

// dz given dy = dL/d(layer-norm output).
void layer_norm_backward(const VectorXd& gain, const MatrixXd& x_hat,
                         const VectorXd& inv_std, const MatrixXd& dy,
                         MatrixXd& dz) {
  const auto n = static_cast<double>(x_hat.rows());
  dz.resize(x_hat.rows(), x_hat.cols());
  for (Eigen::Index c = 0; c < x_hat.cols(); ++c) {
    const VectorXd dxh = dy.col(c).cwiseProduct(gain);
    const double sum_dxh = dxh.sum();
    const double sum_dxh_xh = dxh.dot(x_hat.col(c));
    dz.col(c) = (inv_std(c) / n) *
                (n * dxh.array() - sum_dxh - x_hat.col(c).array() * sum_dxh_xh);
  }
}

struct ForwardCache {
  std::vector<MatrixXd> activations;  // input + post-activation per hidden
  std::vector<MatrixXd> pre_ln;       // z per hidden layer
  std::vector<MatrixXd> ln_x_hat;
  std::vector<VectorXd> ln_inv_std;
  std::vector<MatrixXd> ln_out;
  MatrixXd output;  // normalized-space prediction
};

void forward_batch(const MlpParams& p, const MatrixXd& x_cols,
                   ForwardCache& cache) {
  const int hidden = p.spec.num_layers() - 1;
  cache.activations.assign(1, x_cols);
  cache.pre_ln.resize(static_cast<std::size_t>(hidden));
  cache.ln_x_hat.resize(static_cast<std::size_t>(hidden));
  cache.ln_inv_std.resize(static_cast<std::size_t>(hidden));
  cache.ln_out.resize(static_cast<std::size_t>(hidden));
  for (int l = 0; l < hidden; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    cache.pre_ln[lu] =
        (p.weights[lu] * cache.activations.back()).colwise() + p.biases[lu];
    layer_norm_forward(p.ln_gain[lu], p.ln_offset[lu], p.spec.layer_norm_eps,
                       cache.pre_ln[lu], cache.ln_x_hat[lu],
                       cache.ln_inv_std[lu], cache.ln_out[lu]);
    cache.activations.push_back(
        cache.ln_out[lu].unaryExpr([](double v) { return softsign(v); }));
  }
  const auto last = static_cast<std::size_t>(hidden);
  cache.output =
      (p.weights[last] * cache.activations.back()).colwise() + p.biases[last];
}

VectorXd safe_std(const VectorXd& std) {
  VectorXd s = std;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (!(s(i) > 1e-12)) s(i) = 1.0;
  return s;
}

}  // namespace

std::string to_string(ChannelGroup g) {
  return g == ChannelGroup::Force ? "force" : "moment";
}

ChannelGroup channel_group_from_string(const std::string& s) {
  if (s == "force") return ChannelGroup::Force;
  if (s == "moment") return ChannelGroup::Moment;
  throw std::invalid_argument("unknown channel group: " + s);
}

void MlpParams::validate() const {
  const int L = spec.num_layers();
  if (L < 1) throw std::invalid_argument("mlp: need at least one layer");
  if (static_cast<int>(weights.size()) != L ||
      static_cast<int>(biases.size()) != L ||
      static_cast<int>(ln_gain.size()) != L - 1 ||
      static_cast<int>(ln_offset.size()) != L - 1)
    throw std::invalid_argument("mlp: parameter count mismatch");
  for (int l = 0; l < L; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    if (weights[lu].rows() != spec.layer_sizes[lu + 1] ||
        weights[lu].cols() != spec.layer_sizes[lu] ||
        biases[lu].size() != spec.layer_sizes[lu + 1])
      throw std::invalid_argument("mlp: shape mismatch at layer " +
                                  std::to_string(l));
    if (!weights[lu].allFinite() || !biases[lu].allFinite())
      throw std::invalid_argument("mlp: non-finite parameters");
  }
  const int ni = spec.layer_sizes.front();
  const int no = spec.layer_sizes.back();
  if (in_mean.size() != ni || in_std.size() != ni || out_mean.size() != no ||
      out_std.size() != no)
    throw std::invalid_argument("mlp: normalization shape mismatch");
}

MlpParams init_mlp(const MlpSpec& spec, ChannelGroup group,
                   std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "mlp-init-" + to_string(group));
  MlpParams p;
  p.spec = spec;
  p.group = group;
  const int L = spec.num_layers();
  for (int l = 0; l < L; ++l) {
    const int rows = spec.layer_sizes[static_cast<std::size_t>(l) + 1];
    const int cols = spec.layer_sizes[static_cast<std::size_t>(l)];
    const double bound = std::sqrt(6.0 / double(rows + cols));
    MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
    p.weights.push_back(w);
    p.biases.push_back(VectorXd::Zero(rows));
    if (l < L - 1) {
      p.ln_gain.push_back(VectorXd::Ones(rows));
      p.ln_offset.push_back(VectorXd::Zero(rows));
    }
  }
  p.in_mean = VectorXd::Zero(spec.layer_sizes.front());
  p.in_std = VectorXd::Ones(spec.layer_sizes.front());
  p.out_mean = VectorXd::Zero(spec.layer_sizes.back());
  p.out_std = VectorXd::Ones(spec.layer_sizes.back());
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const VectorXd& input) {
  p.validate();
  if (input.size() != p.spec.layer_sizes.front())
    throw std::invalid_argument("mlp_forward: input size mismatch");
  const VectorXd x_norm =
      (input - p.in_mean).cwiseQuotient(safe_std(p.in_std));
  ForwardCache cache;
  forward_batch(p, x_norm, cache);
  return p.out_mean + p.out_std.cwiseProduct(cache.output.col(0));
}

Eigen::MatrixXd mlp_input_jacobian(const MlpParams& p, const VectorXd& input) {
  p.validate();
  if (input.size() != p.spec.layer_sizes.front())
    throw std::invalid_argument("mlp_input_jacobian: input size mismatch");
  const VectorXd std_in = safe_std(p.in_std);
  const VectorXd x_norm = (input - p.in_mean).cwiseQuotient(std_in);
  ForwardCache cache;
  forward_batch(p, x_norm, cache);

  const int hidden = p.spec.num_layers() - 1;
  // Running chain J = d(hidden activation)/d(raw input).
  MatrixXd chain = std_in.cwiseInverse().asDiagonal();
  for (int l = 0; l < hidden; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    chain = p.weights[lu] * chain;
    // Layer-norm Jacobian: diag(g) * inv * (I - (1/n) 11' - (1/n) xh xh').
    const auto n = static_cast<double>(cache.pre_ln[lu].rows());
    const VectorXd xh = cache.ln_x_hat[lu].col(0);
    const Eigen::RowVectorXd col_sums = chain.colwise().sum();
    const Eigen::RowVectorXd xh_proj = xh.transpose() * chain;
    MatrixXd ln_chain = chain;
    ln_chain.rowwise() -= col_sums / n;
    ln_chain -= (xh / n) * xh_proj;
    ln_chain *= cache.ln_inv_std[lu](0);
    ln_chain.array().colwise() *= p.ln_gain[lu].array();
    // Softsign derivative at the layer-norm output.
    const VectorXd d = cache.ln_out[lu].col(0).unaryExpr(
        [](double v) { return softsign_deriv(v); });
    ln_chain.array().colwise() *= d.array();
    chain = std::move(ln_chain);
  }
  MatrixXd jac = p.weights[static_cast<std::size_t>(hidden)] * chain;
  jac.array().colwise() *= p.out_std.array();
  return jac;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("train: lr must be positive");
  if (!(val_fraction > 0 && val_fraction < 1))
    throw std::invalid_argument("train: val_fraction must be in (0,1)");
  if (epochs < 1 || batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
}

double train_loss_and_gradient(const MlpParams& p, const MatrixXd& x_cols,
                               const MatrixXd& y_cols, double l2_weight,
                               std::vector<MatrixXd>& grad_w,
                               std::vector<VectorXd>& grad_b,
                               std::vector<VectorXd>& grad_g,
                               std::vector<VectorXd>& grad_o) {
  const int L = p.spec.num_layers();
  const int hidden = L - 1;
  const auto batch = static_cast<double>(x_cols.cols());

  ForwardCache cache;
  forward_batch(p, x_cols, cache);

  const MatrixXd err = cache.output - y_cols;
  double loss = err.squaredNorm() / batch;
  for (const auto& w : p.weights) loss += l2_weight * w.squaredNorm();

  grad_w.assign(static_cast<std::size_t>(L), MatrixXd());
  grad_b.assign(static_cast<std::size_t>(L), VectorXd());
  grad_g.assign(static_cast<std::size_t>(hidden), VectorXd());
  grad_o.assign(static_cast<std::size_t>(hidden), VectorXd());

  MatrixXd delta = (2.0 / batch) * err;  // d loss / d output-layer pre-act
  for (int l = L - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    grad_w[lu] = delta * cache.activations[lu].transpose() +
                 2.0 * l2_weight * p.weights[lu];
    grad_b[lu] = delta.rowwise().sum();
    if (l == 0) break;
    MatrixXd da = p.weights[lu].transpose() * delta;
    // Through softsign, then layer norm of hidden layer l-1.
    const auto hu = static_cast<std::size_t>(l - 1);
    MatrixXd dy = da.cwiseProduct(cache.ln_out[hu].unaryExpr(
        [](double v) { return softsign_deriv(v); }));
    grad_g[hu] = dy.cwiseProduct(cache.ln_x_hat[hu]).rowwise().sum();
    grad_o[hu] = dy.rowwise().sum();
    dy = dy.array().colwise() * p.ln_gain[hu].array();
    // Reuse layer_norm_backward with unit gain since dy already includes it.
    MatrixXd dz;
    layer_norm_backward(VectorXd::Ones(dy.rows()), cache.ln_x_hat[hu],
                        cache.ln_inv_std[hu], dy, dz);
    delta = std::move(dz);
  }
  return loss;
}

namespace {

struct AdamState {
  std::vector<MatrixXd> m_w, v_w;
  std::vector<VectorXd> m_b, v_b, m_g, v_g, m_o, v_o;
  long step = 0;

  explicit AdamState(const MlpParams& p) {
    for (const auto& w : p.weights) {
      m_w.push_back(MatrixXd::Zero(w.rows(), w.cols()));
      v_w.push_back(MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : p.biases) {
      m_b.push_back(VectorXd::Zero(b.size()));
      v_b.push_back(VectorXd::Zero(b.size()));
    }
    for (const auto& g : p.ln_gain) {
      m_g.push_back(VectorXd::Zero(g.size()));
      v_g.push_back(VectorXd::Zero(g.size()));
      m_o.push_back(VectorXd::Zero(g.size()));
      v_o.push_back(VectorXd::Zero(g.size()));
    }
  }
};

template <typename T>
void adam_update(T& param, T& m, T& v, const T& grad, const TrainConfig& cfg,
                 double bias1, double bias2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
  v = (cfg.adam_beta2 * v.array() +
       (1.0 - cfg.adam_beta2) * grad.array().square())
          .matrix();
  param.array() -= cfg.lr * (m.array() / bias1) /
                   ((v.array() / bias2).sqrt() + cfg.adam_eps);
}

double physical_mse(const MlpParams& p, const MatrixXd& x_norm_cols,
                    const MatrixXd& y_phys_cols) {
  ForwardCache cache;
  forward_batch(p, x_norm_cols, cache);
  MatrixXd pred = cache.output;
  pred.array().colwise() *= p.out_std.array();
  pred.colwise() += p.out_mean;
  return (pred - y_phys_cols).squaredNorm() /
         static_cast<double>(x_norm_cols.cols());
}

}  // namespace

TrainResult train_mlp(const MatrixXd& X, const MatrixXd& Y, ChannelGroup group,
                      const TrainConfig& cfg, const MlpSpec& spec) {
  cfg.validate();
  const auto n = X.rows();
  if (n == 0) throw std::invalid_argument("train_mlp: empty dataset");
  if (Y.rows() != n || X.cols() != spec.layer_sizes.front() ||
      Y.cols() != spec.layer_sizes.back())
    throw std::invalid_argument("train_mlp: dataset shape mismatch");

  // Deterministic split.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng = Rng::substream(cfg.seed, "train-split-" + to_string(group));
  split_rng.shuffle(order);
  const auto n_val = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(cfg.val_fraction * double(n))));
  if (n_val >= n) throw std::invalid_argument("train_mlp: dataset too small");
  std::vector<Eigen::Index> val_idx(order.begin(), order.begin() + n_val);
  std::vector<Eigen::Index> train_idx(order.begin() + n_val, order.end());

  MlpParams p = init_mlp(spec, group, cfg.seed);
  // Normalization from the training split.
  const auto nt = static_cast<Eigen::Index>(train_idx.size());
  MatrixXd xt(spec.layer_sizes.front(), nt), yt(spec.layer_sizes.back(), nt);
  for (Eigen::Index i = 0; i < nt; ++i) {
    xt.col(i) = X.row(train_idx[static_cast<std::size_t>(i)]).transpose();
    yt.col(i) = Y.row(train_idx[static_cast<std::size_t>(i)]).transpose();
  }
  p.in_mean = xt.rowwise().mean();
  p.out_mean = yt.rowwise().mean();
  p.in_std = ((xt.colwise() - p.in_mean).array().square().rowwise().sum() /
              double(nt))
                 .sqrt()
                 .matrix();
  p.out_std = ((yt.colwise() - p.out_mean).array().square().rowwise().sum() /
               double(nt))
                  .sqrt()
                  .matrix();
  p.in_std = safe_std(p.in_std);
  p.out_std = safe_std(p.out_std);

  MatrixXd xt_norm = xt;
  xt_norm.colwise() -= p.in_mean;
  xt_norm.array().colwise() /= p.in_std.array();
  MatrixXd yt_norm = yt;
  yt_norm.colwise() -= p.out_mean;
  yt_norm.array().colwise() /= p.out_std.array();

  MatrixXd xv_norm(spec.layer_sizes.front(), n_val);
  MatrixXd yv(spec.layer_sizes.back(), n_val);
  for (Eigen::Index i = 0; i < n_val; ++i) {
    xv_norm.col(i) =
        (X.row(val_idx[static_cast<std::size_t>(i)]).transpose() - p.in_mean)
            .cwiseQuotient(p.in_std);
    yv.col(i) = Y.row(val_idx[static_cast<std::size_t>(i)]).transpose();
  }

  TrainResult result;
  result.train_mse.push_back(physical_mse(p, xt_norm, yt));
  result.val_mse.push_back(physical_mse(p, xv_norm, yv));

  AdamState adam(p);
  Rng batch_rng = Rng::substream(cfg.seed, "train-batches-" + to_string(group));
  std::vector<Eigen::Index> perm(train_idx.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    perm[i] = static_cast<Eigen::Index>(i);

  const int hidden = spec.num_layers() - 1;
  std::vector<MatrixXd> gw;
  std::vector<VectorXd> gb, gg, go;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    batch_rng.shuffle(perm);
    for (Eigen::Index start = 0; start < nt; start += cfg.batch_size) {
      const auto bs = std::min<Eigen::Index>(cfg.batch_size, nt - start);
      MatrixXd xb(spec.layer_sizes.front(), bs);
      MatrixXd yb(spec.layer_sizes.back(), bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        xb.col(i) = xt_norm.col(perm[static_cast<std::size_t>(start + i)]);
        yb.col(i) = yt_norm.col(perm[static_cast<std::size_t>(start + i)]);
      }
      const double loss =
          train_loss_and_gradient(p, xb, yb, cfg.l2_weight, gw, gb, gg, go);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_mlp: diverged at epoch " +
                                 std::to_string(epoch));
      ++adam.step;
      const double bias1 = 1.0 - std::pow(cfg.adam_beta1, double(adam.step));
      const double bias2 = 1.0 - std::pow(cfg.adam_beta2, double(adam.step));
      for (int l = 0; l < spec.num_layers(); ++l) {
        const auto lu = static_cast<std::size_t>(l);
        adam_update(p.weights[lu], adam.m_w[lu], adam.v_w[lu], gw[lu], cfg,
                    bias1, bias2);
        adam_update(p.biases[lu], adam.m_b[lu], adam.v_b[lu], gb[lu], cfg,
                    bias1, bias2);
      }
      for (int l = 0; l < hidden; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        adam_update(p.ln_gain[lu], adam.m_g[lu], adam.v_g[lu], gg[lu], cfg,
                    bias1, bias2);
        adam_update(p.ln_offset[lu], adam.m_o[lu], adam.v_o[lu], go[lu], cfg,
                    bias1, bias2);
      }
    }
    result.train_mse.push_back(physical_mse(p, xt_norm, yt));
    result.val_mse.push_back(physical_mse(p, xv_norm, yv));
  }

  result.best_epoch = 0;
  for (std::size_t e = 1; e < result.val_mse.size(); ++e)
    if (result.val_mse[e] < result.val_mse[static_cast<std::size_t>(result.best_epoch)])
      result.best_epoch = static_cast<int>(e);
  result.params = std::move(p);
  return result;
}

namespace {

nlohmann::json vec_to_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vec_from_json(const nlohmann::json& a) {
  VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

void save_mlp(const MlpParams& p, const std::string& path) {
  p.validate();
  nlohmann::json j;
  j["format"] = "mpctune-mlp";
  j["version"] = p.version;
  j["group"] = to_string(p.group);
  j["layer_sizes"] = p.spec.layer_sizes;
  j["layer_norm_eps"] = p.spec.layer_norm_eps;
  j["in_mean"] = vec_to_json(p.in_mean);
  j["in_std"] = vec_to_json(p.in_std);
  j["out_mean"] = vec_to_json(p.out_mean);
  j["out_std"] = vec_to_json(p.out_std);
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c)
        w.push_back(p.weights[l](r, c));
    weights.push_back(w);
    biases.push_back(vec_to_json(p.biases[l]));
  }
  j["weights"] = weights;
  j["biases"] = biases;
  nlohmann::json gains = nlohmann::json::array();
  nlohmann::json offsets = nlohmann::json::array();
  for (std::size_t l = 0; l < p.ln_gain.size(); ++l) {
    gains.push_back(vec_to_json(p.ln_gain[l]));
    offsets.push_back(vec_to_json(p.ln_offset[l]));
  }
  j["ln_gain"] = gains;
  j["ln_offset"] = offsets;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  out << j.dump(1) << '\n';
}

MlpParams load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_mlp: malformed model file " + path + ": " +
                             e.what());
  }
  if (j.value("format", "") != "mpctune-mlp")
    throw std::runtime_error("load_mlp: not a model file: " + path);
  MlpParams p;
  p.version = j.at("version").get<int>();
  if (p.version != 1)
    throw std::runtime_error("load_mlp: unsupported format version " +
                             std::to_string(p.version));
  p.group = channel_group_from_string(j.at("group").get<std::string>());
  p.spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  p.spec.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  p.in_mean = vec_from_json(j.at("in_mean"));
  p.in_std = vec_from_json(j.at("in_std"));
  p.out_mean = vec_from_json(j.at("out_mean"));
  p.out_std = vec_from_json(j.at("out_std"));
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  const int L = p.spec.num_layers();
  if (static_cast<int>(weights.size()) != L ||
      static_cast<int>(biases.size()) != L)
    throw std::runtime_error("load_mlp: layer count mismatch");
  for (int l = 0; l < L; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    const int rows = p.spec.layer_sizes[lu + 1];
    const int cols = p.spec.layer_sizes[lu];
    const auto& flat = weights[lu];
    if (static_cast<int>(flat.size()) != rows * cols)
      throw std::runtime_error("load_mlp: weight shape mismatch at layer " +
                               std::to_string(l));
    MatrixXd w(rows, cols);
    std::size_t idx = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = flat[idx++].get<double>();
    p.weights.push_back(w);
    p.biases.push_back(vec_from_json(biases[lu]));
  }
  for (const auto& g : j.at("ln_gain")) p.ln_gain.push_back(vec_from_json(g));
  for (const auto& o : j.at("ln_offset"))
    p.ln_offset.push_back(vec_from_json(o));
  p.validate();
  return p;
}

MlpParams load_mlp_expecting(const std::string& path, ChannelGroup expected) {
  MlpParams p = load_mlp(path);
  if (p.group != expected)
    throw std::runtime_error("load_mlp: expected a " + to_string(expected) +
                             " model but " + path + " holds a " +
                             to_string(p.group) + " model");
  return p;
}

}  // namespace mpctune
