#include "ixfdr/importance.hpp"

#include "ixfdr/error.hpp"
#include "ixfdr/random.hpp"

#include <charconv>
#include <exception>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

namespace ixfdr {

std::string_view to_string(ImportanceMethod method) {
  return method == ImportanceMethod::kModelBased ? "model_based" : "instance_based";
}

ImportanceMethod parse_method(std::string_view name) {
  if (name == "model_based") return ImportanceMethod::kModelBased;
  if (name == "instance_based") return ImportanceMethod::kInstanceBased;
  throw ConfigError("unknown importance method '" + std::string(name) + "'");
}

void AttributionConfig::validate() const {
  if (alpha_steps < 1 || beta_steps < 1) throw ConfigError("quadrature steps must be at least 1");
  if (!(epsilon_floor > 0.0)) throw ConfigError("epsilon_floor must be positive");
  if (sample_cap < 1) throw ConfigError("sample_cap must be at least 1");
}

namespace {

Vector aggregated_weights(const CoupledNetwork& net) {
  return net.w[1] * (net.w[2] * net.w[3].col(0));
}

// Row i is Zagg_i * Wint_i.
Matrix interaction_rows(const CoupledNetwork& net) {
  if (!net.coupled) return net.w[0];
  const auto p = static_cast<Eigen::Index>(net.p);
  Matrix rows(2 * p, net.w[0].cols());
  rows.topRows(p) = net.z.asDiagonal() * net.w[0];
  rows.bottomRows(p) = net.z_tilde.asDiagonal() * net.w[0];
  return rows;
}

void check_data(const CoupledNetwork& net, const Matrix& x_aug, const AttributionConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(x_aug.cols()) != net.input_dim()) {
    throw ContractViolation("attribution: expected " + std::to_string(net.input_dim()) +
                            " columns, got " + std::to_string(x_aug.cols()));
  }
  if (x_aug.rows() == 0) throw ContractViolation("attribution: no samples");
  for (const auto& b : cfg.baselines) {
    if (static_cast<std::size_t>(b.size()) != net.input_dim()) {
      throw ContractViolation("attribution: baseline has wrong length");
    }
  }
}

std::vector<Vector> resolve_baselines(const Matrix& x_aug, const AttributionConfig& cfg) {
  if (!cfg.baselines.empty()) return cfg.baselines;
  std::vector<Vector> out;
  if (cfg.sampled_baselines > 0) {
    CounterRng rng(cfg.baseline_seed, 0);
    for (std::size_t k = 0; k < cfg.sampled_baselines; ++k) {
      const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x_aug.rows())));
      out.push_back(x_aug.row(r).transpose());
    }
    return out;
  }
  out.push_back(x_aug.colwise().mean().transpose());
  return out;
}

std::size_t worker_count(const AttributionConfig& cfg, std::size_t jobs) {
  std::size_t n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, count) over `workers` threads. Each index is written
// by exactly one worker, so callers can reduce results in index order.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Matrix model_based_2d(const CoupledNetwork& net) {
  const Matrix rows = interaction_rows(net);
  const Vector agg = aggregated_weights(net);
  const auto dim = rows.rows();
  Matrix out(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) {
      const double v = rows.row(i).cwiseProduct(rows.row(j)).dot(agg.transpose());
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Vector model_based_1d(const CoupledNetwork& net) {
  const Vector w1d = net.w[0] * aggregated_weights(net);
  if (!net.coupled) return w1d;
  const auto p = static_cast<Eigen::Index>(net.p);
  Vector out(2 * p);
  out.head(p) = net.z.cwiseProduct(w1d);
  out.tail(p) = net.z_tilde.cwiseProduct(w1d);
  return out;
}

Matrix instance_based_2d(const CoupledNetwork& net, const Matrix& x_aug,
                         const AttributionConfig& cfg) {
  check_data(net, x_aug, cfg);
  const std::vector<Vector> baselines = resolve_baselines(x_aug, cfg);
  const auto dim = static_cast<Eigen::Index>(net.input_dim());
  const std::size_t samples = std::min<std::size_t>(cfg.sample_cap, static_cast<std::size_t>(x_aug.rows()));
  const double grid = static_cast<double>(cfg.alpha_steps * cfg.beta_steps);

  std::vector<Matrix> per_sample(samples);
  parallel_for(samples, worker_count(cfg, samples), [&](std::size_t s) {
    const Vector x = x_aug.row(static_cast<Eigen::Index>(s)).transpose();
    Matrix contribution = Matrix::Zero(dim, dim);
    for (const Vector& base : baselines) {
      const Vector delta = x - base;
      Matrix path = Matrix::Zero(dim, dim);
      for (std::size_t a = 0; a < cfg.alpha_steps; ++a) {
        const double alpha = (static_cast<double>(a) + 0.5) / static_cast<double>(cfg.alpha_steps);
        for (std::size_t b = 0; b < cfg.beta_steps; ++b) {
          const double beta = (static_cast<double>(b) + 0.5) / static_cast<double>(cfg.beta_steps);
          path += input_hessian(net, base + (alpha * beta) * delta);
        }
      }
      contribution += (path / grid).cwiseProduct(delta * delta.transpose());
    }
    contribution /= static_cast<double>(baselines.size());
    if (!contribution.allFinite()) {
      throw NumericalError("instance-based interaction scores: non-finite Hessian at sample " +
                           std::to_string(s));
    }
    per_sample[s] = std::move(contribution);
  });

  Matrix total = Matrix::Zero(dim, dim);
  for (const Matrix& m : per_sample) total += m;
  return 0.5 * (total + total.transpose());
}

Vector instance_based_1d(const CoupledNetwork& net, const Matrix& x_aug,
                         const AttributionConfig& cfg) {
  check_data(net, x_aug, cfg);
  const std::vector<Vector> baselines = resolve_baselines(x_aug, cfg);
  const auto dim = static_cast<Eigen::Index>(net.input_dim());
  const std::size_t samples = std::min<std::size_t>(cfg.sample_cap, static_cast<std::size_t>(x_aug.rows()));
  const auto steps = static_cast<Eigen::Index>(cfg.alpha_steps);

  std::vector<Vector> per_sample(samples);
  parallel_for(samples, worker_count(cfg, samples), [&](std::size_t s) {
    const Vector x = x_aug.row(static_cast<Eigen::Index>(s)).transpose();
    Vector contribution = Vector::Zero(dim);
    Matrix points(steps, dim);
    for (const Vector& base : baselines) {
      const Vector delta = x - base;
      for (Eigen::Index a = 0; a < steps; ++a) {
        const double alpha = (static_cast<double>(a) + 0.5) / static_cast<double>(steps);
        points.row(a) = (base + alpha * delta).transpose();
      }
      const Vector mean_grad = input_gradient_rows(net, points).colwise().mean().transpose();
      contribution += delta.cwiseProduct(mean_grad);
    }
    contribution /= static_cast<double>(baselines.size());
    if (!contribution.allFinite()) {
      throw NumericalError("instance-based univariate scores: non-finite gradient at sample " +
                           std::to_string(s));
    }
    per_sample[s] = std::move(contribution);
  });

  Vector total = Vector::Zero(dim);
  for (const Vector& v : per_sample) total += v;
  return total;
}

Matrix calibrate(const Matrix& s2d, const Vector& s1d, double epsilon_floor) {
  if (!(epsilon_floor > 0.0)) throw ConfigError("epsilon_floor must be positive");
  if (s2d.rows() != s2d.cols() || s2d.rows() != s1d.size()) {
    throw ContractViolation("calibrate: dimension mismatch");
  }
  const auto dim = s2d.rows();
  Matrix out(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double denom = std::sqrt(std::max(std::abs(s1d(i) * s1d(j)), epsilon_floor));
      out(i, j) = std::abs(s2d(i, j)) / denom;
    }
  }
  return out;
}

ImportanceScores compute_scores(const CoupledNetwork& net, const Matrix& x_aug,
                                ImportanceMethod method, const AttributionConfig& cfg) {
  cfg.validate();
  ImportanceScores scores;
  scores.method = method;
  if (method == ImportanceMethod::kModelBased) {
    scores.s2d = model_based_2d(net);
    scores.s1d = model_based_1d(net);
  } else {
    scores.s2d = instance_based_2d(net, x_aug, cfg);
    scores.s1d = instance_based_1d(net, x_aug, cfg);
    scores.samples_used = std::min<std::size_t>(cfg.sample_cap, static_cast<std::size_t>(x_aug.rows()));
  }
  scores.calibrated = calibrate(scores.s2d, scores.s1d, cfg.epsilon_floor);
  return scores;
}

namespace {

void write_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

double parse_double(const std::string& cell, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataError("'" + path.string() + "': bad number '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

void write_scores_csv(const std::filesystem::path& path, const ImportanceScores& scores) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto dim = scores.s2d.rows();
  const auto p = static_cast<std::size_t>(dim / 2);
  out << "i,j,class,raw,calibrated\n";
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      out << i + 1 << ',' << j + 1 << ','
          << to_string(classify_pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j), p)) << ',';
      write_double(out, scores.s2d(i, j));
      out << ',';
      write_double(out, scores.calibrated(i, j));
      out << '\n';
    }
  }
}

void write_univariate_csv(const std::filesystem::path& path, const ImportanceScores& scores) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "index,s1d\n";
  for (Eigen::Index i = 0; i < scores.s1d.size(); ++i) {
    out << i + 1 << ',';
    write_double(out, scores.s1d(i));
    out << '\n';
  }
}

ImportanceScores read_scores(const std::filesystem::path& pairs_csv,
                             const std::filesystem::path& univariate_csv,
                             ImportanceMethod method) {
  ImportanceScores scores;
  scores.method = method;

  std::ifstream uni(univariate_csv);
  if (!uni) throw DataError("cannot open '" + univariate_csv.string() + "'");
  std::string line;
  std::getline(uni, line);
  std::vector<double> s1d;
  while (std::getline(uni, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 2) throw DataError("'" + univariate_csv.string() + "': expected 2 fields");
    s1d.push_back(parse_double(cells[1], univariate_csv));
  }
  const auto dim = static_cast<Eigen::Index>(s1d.size());
  if (dim == 0 || dim % 2 != 0) throw DataError("'" + univariate_csv.string() + "': expected 2p entries");
  scores.s1d = Eigen::Map<const Vector>(s1d.data(), dim);
  scores.s2d = Matrix::Zero(dim, dim);
  scores.calibrated = Matrix::Zero(dim, dim);

  std::ifstream pairs(pairs_csv);
  if (!pairs) throw DataError("cannot open '" + pairs_csv.string() + "'");
  std::getline(pairs, line);
  Eigen::Index seen = 0;
  while (std::getline(pairs, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 5) throw DataError("'" + pairs_csv.string() + "': expected 5 fields");
    const auto i = static_cast<Eigen::Index>(std::stoul(cells[0])) - 1;
    const auto j = static_cast<Eigen::Index>(std::stoul(cells[1])) - 1;
    if (i < 0 || j <= i || j >= dim) throw DataError("'" + pairs_csv.string() + "': bad pair index");
    scores.s2d(i, j) = scores.s2d(j, i) = parse_double(cells[3], pairs_csv);
    scores.calibrated(i, j) = scores.calibrated(j, i) = parse_double(cells[4], pairs_csv);
    ++seen;
  }
  if (seen != dim * (dim - 1) / 2) {
    throw DataError("'" + pairs_csv.string() + "': expected every pair i < j");
  }
  return scores;
}

}  // namespace ixfdr
