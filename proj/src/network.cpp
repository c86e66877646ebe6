#include "ixfdr/network.hpp"

#include "ixfdr/error.hpp"
#include "ixfdr/random.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace ixfdr {

namespace {

using Array = Eigen::ArrayXXd;

Matrix elu(const Matrix& a) {
  return a.unaryExpr([](double u) { return u > 0.0 ? u : std::expm1(u); });
}

Matrix elu_prime(const Matrix& a) {
  return a.unaryExpr([](double u) { return u > 0.0 ? 1.0 : std::exp(u); });
}

Matrix elu_second(const Matrix& a) {
  return a.unaryExpr([](double u) { return u > 0.0 ? 0.0 : std::exp(u); });
}

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

void check_input(const CoupledNetwork& net, Eigen::Index dim, const char* op) {
  if (static_cast<std::size_t>(dim) != net.input_dim()) {
    throw ContractViolation(std::string(op) + ": expected input of length " +
                            std::to_string(net.input_dim()) + ", got " + std::to_string(dim));
  }
}

// Column-per-sample activations of one forward pass.
struct Trace {
  Matrix h0;
  std::array<Matrix, 3> pre;
  std::array<Matrix, 3> act;
  Eigen::RowVectorXd out;
};

// x_cols: 2p x B.
Matrix filter_outputs(const CoupledNetwork& net, const Matrix& x_cols) {
  if (!net.coupled) return x_cols;
  const auto p = static_cast<Eigen::Index>(net.p);
  return net.z.asDiagonal() * x_cols.topRows(p) + net.z_tilde.asDiagonal() * x_cols.bottomRows(p);
}

void forward_trace(const CoupledNetwork& net, const Matrix& x_cols, Trace& t) {
  t.h0 = filter_outputs(net, x_cols);
  const Matrix* h = &t.h0;
  for (std::size_t l = 0; l < 3; ++l) {
    t.pre[l] = (net.w[l].transpose() * *h).colwise() + net.b[l];
    t.act[l] = elu(t.pre[l]);
    h = &t.act[l];
  }
  t.out = (net.w[3].transpose() * *h).array() + net.b[3](0);
}

struct Gradients {
  Vector z;
  Vector z_tilde;
  std::array<Matrix, 4> w;
  std::array<Vector, 4> b;
};

// Backpropagates d(loss)/d(out) (1 x B) through a trace.
void backward(const CoupledNetwork& net, const Matrix& x_cols, const Trace& t,
              const Eigen::RowVectorXd& d_out, Gradients& g) {
  g.w[3] = t.act[2] * d_out.transpose();
  g.b[3] = Vector::Constant(1, d_out.sum());
  Matrix upstream = net.w[3] * d_out;  // p3 x B
  for (int l = 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const Matrix delta = upstream.cwiseProduct(elu_prime(t.pre[li]));
    const Matrix& below = li == 0 ? t.h0 : t.act[li - 1];
    g.w[li] = below * delta.transpose();
    g.b[li] = delta.rowwise().sum();
    upstream = net.w[li] * delta;
  }
  if (net.coupled) {
    const auto p = static_cast<Eigen::Index>(net.p);
    g.z = upstream.cwiseProduct(x_cols.topRows(p)).rowwise().sum();
    g.z_tilde = upstream.cwiseProduct(x_cols.bottomRows(p)).rowwise().sum();
  }
}

struct AdamMoments {
  Matrix m;
  Matrix v;
};

template <typename Param>
void adam_step(Param& param, const Param& grad, AdamMoments& mom, double lr, int t) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (mom.m.size() == 0) {
    mom.m = Matrix::Zero(param.rows(), param.cols());
    mom.v = Matrix::Zero(param.rows(), param.cols());
  }
  mom.m = beta1 * mom.m + (1.0 - beta1) * grad;
  mom.v = beta2 * mom.v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  param.array() -= lr * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + eps);
}

double filter_penalty(const CoupledNetwork& net, double lambda) {
  if (!net.coupled || lambda == 0.0) return 0.0;
  return lambda * (net.z.lpNorm<1>() + net.z_tilde.lpNorm<1>());
}

// Mean data loss over columns; y in the training (standardized) scale.
double data_loss(const CoupledNetwork& net, const Eigen::RowVectorXd& out,
                 const Eigen::RowVectorXd& y) {
  if (out.size() == 0) return 0.0;
  double total = 0.0;
  if (net.task == Task::kRegression) {
    total = (out - y).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < out.size(); ++i) total += softplus(out(i)) - y(i) * out(i);
  }
  return total / static_cast<double>(out.size());
}

double full_objective(const CoupledNetwork& net, const Matrix& x_cols,
                      const Eigen::RowVectorXd& y, double lambda) {
  if (x_cols.cols() == 0) return 0.0;
  Trace t;
  forward_trace(net, x_cols, t);
  return data_loss(net, t.out, y) + filter_penalty(net, lambda);
}

bool all_finite(const CoupledNetwork& net) {
  bool ok = net.z.allFinite() && net.z_tilde.allFinite();
  for (std::size_t l = 0; l < 4; ++l) ok = ok && net.w[l].allFinite() && net.b[l].allFinite();
  return ok;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(l1_filter_penalty >= 0.0)) throw ConfigError("l1_filter_penalty must be nonnegative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

CoupledNetwork init_network(std::size_t p, const HiddenSizes& hidden, Task task,
                            std::uint64_t seed, bool coupled) {
  if (p < 1) throw ConfigError("feature count p must be at least 1");
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be at least 1");
  }
  CoupledNetwork net;
  net.p = p;
  net.task = task;
  net.coupled = coupled;
  net.hidden_sizes = hidden;
  net.seed = seed;
  if (coupled) {
    net.z = Vector::Constant(static_cast<Eigen::Index>(p), kInitialFilterWeight);
    net.z_tilde = net.z;
  }

  // Glorot-uniform weights, zero biases.
  const std::array<std::size_t, 5> dims{net.filter_dim(), hidden[0], hidden[1], hidden[2], 1};
  CounterRng rng(seed, 0);
  for (std::size_t l = 0; l < 4; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(dims[l]);
    const auto fan_out = static_cast<Eigen::Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    net.w[l].resize(fan_in, fan_out);
    for (Eigen::Index c = 0; c < fan_out; ++c) {
      for (Eigen::Index r = 0; r < fan_in; ++r) net.w[l](r, c) = rng.uniform(-limit, limit);
    }
    net.b[l] = Vector::Zero(fan_out);
  }
  return net;
}

double forward_affine(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug) {
  check_input(net, x_aug.size(), "forward");
  Trace t;
  forward_trace(net, Matrix(x_aug), t);
  return t.out(0);
}

double forward(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug) {
  const double out = forward_affine(net, x_aug);
  return net.task == Task::kBinary ? logistic(out) : out;
}

Vector forward_affine_rows(const CoupledNetwork& net, const Matrix& x_aug) {
  check_input(net, x_aug.cols(), "forward");
  Trace t;
  forward_trace(net, x_aug.transpose(), t);
  return t.out.transpose();
}

Vector predict(const CoupledNetwork& net, const Matrix& x_aug) {
  Vector out = forward_affine_rows(net, x_aug);
  if (net.task == Task::kBinary) return out.unaryExpr([](double u) { return logistic(u); });
  return (out.array() * net.response_scale + net.response_shift).matrix();
}

Vector input_gradient(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug) {
  check_input(net, x_aug.size(), "input_gradient");
  return input_gradient_rows(net, x_aug.transpose()).row(0).transpose();
}

Matrix input_gradient_rows(const CoupledNetwork& net, const Matrix& points) {
  check_input(net, points.cols(), "input_gradient");
  const Matrix x_cols = points.transpose();
  Trace t;
  forward_trace(net, x_cols, t);
  Matrix upstream = net.w[3] * Eigen::RowVectorXd::Ones(x_cols.cols());
  for (int l = 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    upstream = net.w[li] * upstream.cwiseProduct(elu_prime(t.pre[li]));
  }
  if (!net.coupled) return upstream.transpose();
  const auto p = static_cast<Eigen::Index>(net.p);
  Matrix grad(points.rows(), 2 * p);
  grad.leftCols(p) = (net.z.asDiagonal() * upstream).transpose();
  grad.rightCols(p) = (net.z_tilde.asDiagonal() * upstream).transpose();
  return grad;
}

Matrix input_hessian(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug) {
  check_input(net, x_aug.size(), "input_hessian");
  const auto p = static_cast<Eigen::Index>(net.p);
  const auto dim = static_cast<Eigen::Index>(net.input_dim());

  Trace t;
  forward_trace(net, Matrix(x_aug), t);
  std::array<Vector, 3> d1;
  std::array<Vector, 3> d2;
  for (std::size_t l = 0; l < 3; ++l) {
    d1[l] = elu_prime(t.pre[l]);
    d2[l] = elu_second(t.pre[l]);
  }

  // Forward tangents of the pre-activations along every input direction.
  Matrix filter_jac;
  if (net.coupled) {
    filter_jac = Matrix::Zero(p, dim);
    filter_jac.leftCols(p).diagonal() = net.z;
    filter_jac.rightCols(p).diagonal() = net.z_tilde;
  } else {
    filter_jac = Matrix::Identity(dim, dim);
  }
  std::array<Matrix, 3> pre_dot;
  pre_dot[0] = net.w[0].transpose() * filter_jac;
  pre_dot[1] = net.w[1].transpose() * (d1[0].asDiagonal() * pre_dot[0]);
  pre_dot[2] = net.w[2].transpose() * (d1[1].asDiagonal() * pre_dot[1]);

  // Reverse sweep (adjoints of the activations) and its tangent.
  Vector adj = net.w[3].col(0);
  Matrix adj_dot = Matrix::Zero(adj.size(), dim);
  for (int l = 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const Vector delta = adj.cwiseProduct(d1[li]);
    const Matrix delta_dot =
        d1[li].asDiagonal() * adj_dot + adj.cwiseProduct(d2[li]).asDiagonal() * pre_dot[li];
    adj = net.w[li] * delta;
    adj_dot = net.w[li] * delta_dot;
  }

  Matrix hess(dim, dim);
  if (net.coupled) {
    hess.topRows(p) = net.z.asDiagonal() * adj_dot;
    hess.bottomRows(p) = net.z_tilde.asDiagonal() * adj_dot;
  } else {
    hess = adj_dot;
  }
  const Matrix sym = 0.5 * (hess + hess.transpose());
  return sym;
}

TrainResult train(CoupledNetwork net, const Matrix& x_aug, const Vector& y,
                  const TrainConfig& cfg) {
  cfg.validate();
  check_input(net, x_aug.cols(), "train");
  if (x_aug.rows() != y.size()) throw ContractViolation("train: X and y row counts differ");
  if (!x_aug.allFinite() || !y.allFinite()) throw DataError("train: inputs contain non-finite values");

  const auto n = x_aug.rows();
  const auto n_val = static_cast<Eigen::Index>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
  const auto n_fit = n - n_val;
  if (static_cast<std::size_t>(n_fit) < cfg.batch_size) {
    throw ConfigError("batch_size (" + std::to_string(cfg.batch_size) +
                      ") exceeds the number of training rows (" + std::to_string(n_fit) + ")");
  }

  Eigen::RowVectorXd target = y.transpose();
  if (net.task == Task::kRegression) {
    const double mean = y.head(n_fit).mean();
    const double var = (y.head(n_fit).array() - mean).square().mean();
    net.response_shift = mean;
    net.response_scale = var > 0.0 ? std::sqrt(var) : 1.0;
    target = (target.array() - net.response_shift) / net.response_scale;
  } else {
    net.response_shift = 0.0;
    net.response_scale = 1.0;
  }

  const Matrix x_cols = x_aug.transpose();
  const Matrix fit_cols = x_cols.leftCols(n_fit);
  const Matrix val_cols = x_cols.rightCols(n_val);
  const Eigen::RowVectorXd fit_y = target.head(n_fit);
  const Eigen::RowVectorXd val_y = target.tail(n_val);
  const double lambda = cfg.l1_filter_penalty;

  TrainResult result;
  result.loss_trace.push_back(full_objective(net, fit_cols, fit_y, lambda));
  if (n_val > 0) result.validation_trace.push_back(full_objective(net, val_cols, val_y, lambda));

  AdamMoments mz;
  AdamMoments mzt;
  std::array<AdamMoments, 4> mw;
  std::array<AdamMoments, 4> mb;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_fit));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  CounterRng rng(derive_seed(cfg.seed, 1));
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);

  Trace trace;
  Gradients grad;
  Matrix xb;
  Eigen::RowVectorXd yb;
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (Eigen::Index start = 0; start < n_fit; start += batch) {
      const Eigen::Index size = std::min(batch, n_fit - start);
      xb.resize(x_cols.rows(), size);
      yb.resize(size);
      for (Eigen::Index k = 0; k < size; ++k) {
        const Eigen::Index r = order[static_cast<std::size_t>(start + k)];
        xb.col(k) = fit_cols.col(r);
        yb(k) = fit_y(r);
      }
      forward_trace(net, xb, trace);
      const double loss = data_loss(net, trace.out, yb);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged(epoch, "training diverged: non-finite loss in epoch " +
                                          std::to_string(epoch));
      }
      Eigen::RowVectorXd d_out(size);
      if (net.task == Task::kRegression) {
        d_out = 2.0 * (trace.out - yb) / static_cast<double>(size);
      } else {
        for (Eigen::Index k = 0; k < size; ++k) d_out(k) = (logistic(trace.out(k)) - yb(k)) / static_cast<double>(size);
      }
      backward(net, xb, trace, d_out, grad);

      ++step;
      const double lr = cfg.learning_rate;
      if (net.coupled) {
        grad.z += lambda * net.z.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
        grad.z_tilde += lambda * net.z_tilde.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
        adam_step(net.z, grad.z, mz, lr, step);
        adam_step(net.z_tilde, grad.z_tilde, mzt, lr, step);
      }
      for (std::size_t l = 0; l < 4; ++l) {
        adam_step(net.w[l], grad.w[l], mw[l], lr, step);
        adam_step(net.b[l], grad.b[l], mb[l], lr, step);
      }
    }
    const double objective = full_objective(net, fit_cols, fit_y, lambda);
    if (!std::isfinite(objective) || !all_finite(net)) {
      throw TrainingDiverged(epoch, "training diverged: non-finite loss after epoch " +
                                        std::to_string(epoch));
    }
    result.loss_trace.push_back(objective);
    if (n_val > 0) result.validation_trace.push_back(full_objective(net, val_cols, val_y, lambda));
  }
  result.net = std::move(net);
  return result;
}

FitSummary evaluate_fit(const CoupledNetwork& net, const Matrix& x_aug, const Vector& y) {
  if (x_aug.rows() != y.size()) throw ContractViolation("evaluate_fit: X and y row counts differ");
  FitSummary s;
  if (y.size() == 0) return s;
  const Vector pred = predict(net, x_aug);
  s.mse = (pred - y).squaredNorm() / static_cast<double>(y.size());
  if (net.task == Task::kRegression) {
    const double ss_tot = (y.array() - y.mean()).square().sum();
    s.r_squared = ss_tot > 0.0 ? 1.0 - (pred - y).squaredNorm() / ss_tot : 0.0;
  } else {
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) correct += ((pred(i) >= 0.5) == (y(i) == 1.0));
    s.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  }
  return s;
}

namespace {

constexpr char kMagic[8] = {'I', 'X', 'F', 'D', 'R', 'N', 'E', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw DataError("network file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_values(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

void get_values(std::istream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
}

template <typename V>
void put_vector(std::ostream& out, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

template <typename V>
void get_vector(std::istream& in, V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(in);
}

}  // namespace

// Layout (all integers little-endian u64 unless noted, reals IEEE-754 f64):
//   magic[8] "IXFDRNET", version, task (0 regression, 1 binary), coupled,
//   p, h1, h2, h3, seed, response_shift, response_scale,
//   z[p], z_tilde[p] (coupled only), w0..w3 column-major, b0..b3.
void save_network(const CoupledNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put_u64(out, kFormatVersion);
  put_u64(out, net.task == Task::kBinary ? 1 : 0);
  put_u64(out, net.coupled ? 1 : 0);
  put_u64(out, net.p);
  for (std::size_t h : net.hidden_sizes) put_u64(out, h);
  put_u64(out, net.seed);
  put_f64(out, net.response_shift);
  put_f64(out, net.response_scale);
  if (net.coupled) {
    put_vector(out, net.z);
    put_vector(out, net.z_tilde);
  }
  for (const auto& w : net.w) put_values(out, w);
  for (const auto& b : net.b) put_vector(out, b);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

CoupledNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw DataError("'" + path.string() + "' is not a network file");
  }
  const std::uint64_t version = get_u64(in);
  if (version != kFormatVersion) {
    throw DataError("unsupported network file version " + std::to_string(version));
  }
  const std::uint64_t task = get_u64(in);
  const std::uint64_t coupled = get_u64(in);
  const std::uint64_t p = get_u64(in);
  HiddenSizes hidden{};
  for (auto& h : hidden) h = get_u64(in);
  if (task > 1 || coupled > 1 || p == 0 || p > (1u << 20)) throw DataError("corrupt network header");
  for (auto h : hidden) {
    if (h == 0 || h > (1u << 20)) throw DataError("corrupt network header");
  }
  const std::uint64_t seed = get_u64(in);
  CoupledNetwork net = init_network(p, hidden, task ? Task::kBinary : Task::kRegression, seed, coupled != 0);
  net.response_shift = get_f64(in);
  net.response_scale = get_f64(in);
  if (net.coupled) {
    get_vector(in, net.z);
    get_vector(in, net.z_tilde);
  }
  for (auto& w : net.w) get_values(in, w);
  for (auto& b : net.b) get_vector(in, b);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in network file");
  return net;
}

}  // namespace ixfdr
