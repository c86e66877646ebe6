#include "ixfdr/knockoff.hpp"

#include "ixfdr/error.hpp"
#include "ixfdr/random.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace ixfdr {

namespace {

void require_spd(const Matrix& sigma, const char* op) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw ContractViolation(std::string(op) + ": covariance must be a nonempty square matrix");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) {
    throw ContractViolation(std::string(op) + ": covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw ContractViolation(std::string(op) + ": covariance is not positive definite");
  }
}

}  // namespace

Vector solve_s(const Matrix& sigma) {
  require_spd(sigma, "solve_s");
  const Vector sd = sigma.diagonal().cwiseSqrt();
  const Matrix corr = sd.cwiseInverse().asDiagonal() * sigma * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(corr, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double s_corr = (1.0 - kEquicorrelationShrink) * std::min(2.0 * lambda_min, 1.0);
  return s_corr * sigma.diagonal();
}

GaussianKnockoffModel make_knockoff_model(const Vector& mu, const Matrix& sigma) {
  if (mu.size() != sigma.rows()) {
    throw ContractViolation("make_knockoff_model: mean and covariance sizes differ");
  }
  GaussianKnockoffModel model;
  model.mu = mu;
  model.sigma = sigma;
  model.s = solve_s(sigma);

  const auto p = sigma.rows();
  const Eigen::LLT<Matrix> sigma_llt(sigma);
  // Sigma^-1 diag(s)
  const Matrix inv_s = sigma_llt.solve(Matrix(model.s.asDiagonal()));
  model.cond_mean_map = Matrix::Identity(p, p) - inv_s.transpose();
  Matrix cond_cov = Matrix(2.0 * model.s.asDiagonal()) - model.s.asDiagonal() * inv_s;
  cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
  Eigen::LLT<Matrix> cov_llt(cond_cov);
  if (cov_llt.info() != Eigen::Success) {
    throw NumericalError("knockoff conditional covariance is not positive definite");
  }
  model.cond_cov_factor = cov_llt.matrixL();
  return model;
}

GaussianKnockoffModel fit_gaussian(const Matrix& x, double ridge) {
  if (x.rows() < 2) throw ContractViolation("fit_gaussian: need at least 2 rows");
  if (x.cols() < 1) throw ContractViolation("fit_gaussian: need at least 1 column");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be nonnegative");
  if (!x.allFinite()) throw DataError("fit_gaussian: non-finite feature values");

  const Vector mu = x.colwise().mean();
  const Matrix centered = x.rowwise() - mu.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  cov = 0.5 * (cov + cov.transpose());

  if (ridge == 0.0) {
    std::vector<std::size_t> constant;
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      if (!(cov(j, j) > 0.0)) constant.push_back(static_cast<std::size_t>(j));
    }
    if (!constant.empty()) {
      std::string cols;
      for (std::size_t j : constant) cols += (cols.empty() ? "" : ", ") + std::to_string(j + 1);
      throw DegenerateFeatureError(constant, "zero-variance feature columns: " + cols);
    }
  }

  const auto p = cov.rows();
  double applied = ridge;
  for (;;) {
    const Matrix candidate = cov + applied * Matrix::Identity(p, p);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(candidate, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() >= kMinCovarianceEigenvalue) {
      GaussianKnockoffModel model = make_knockoff_model(mu, candidate);
      model.ridge = applied;
      return model;
    }
    applied = applied > 0.0 ? applied * 10.0 : kMinCovarianceEigenvalue;
    if (applied > 1e12) throw NumericalError("fit_gaussian: covariance could not be regularized");
  }
}

Matrix sample_knockoffs(const Matrix& x, const GaussianKnockoffModel& model, std::uint64_t seed) {
  const auto p = static_cast<Eigen::Index>(model.p());
  if (x.cols() != p) {
    throw ContractViolation("sample_knockoffs: X has " + std::to_string(x.cols()) +
                            " columns, model expects " + std::to_string(p));
  }
  const Matrix centered = x.rowwise() - model.mu.transpose();
  Matrix out = centered * model.cond_mean_map.transpose();
  Vector noise(p);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    CounterRng rng(seed, static_cast<std::uint64_t>(r));
    for (Eigen::Index j = 0; j < p; ++j) noise(j) = rng.normal();
    out.row(r) += (model.cond_cov_factor * noise).transpose();
  }
  out.rowwise() += model.mu.transpose();
  return out;
}

Matrix sample_cross_covariance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("cross covariance: row counts differ");
  if (a.rows() < 2) throw ContractViolation("cross covariance: need at least 2 rows");
  const Matrix ca = a.rowwise() - a.colwise().mean();
  const Matrix cb = b.rowwise() - b.colwise().mean();
  return ca.transpose() * cb / static_cast<double>(a.rows() - 1);
}

KnockoffDiagnostics knockoff_diagnostics(const Matrix& x, const Matrix& x_ko,
                                         const GaussianKnockoffModel& model) {
  if (x.rows() == 0 || x_ko.rows() == 0) {
    throw ContractViolation("knockoff_diagnostics: empty input, nothing to report");
  }
  if (x.rows() != x_ko.rows() || x.cols() != x_ko.cols() ||
      x.cols() != static_cast<Eigen::Index>(model.p())) {
    throw ContractViolation("knockoff_diagnostics: shape mismatch");
  }
  KnockoffDiagnostics d;
  d.n = static_cast<std::size_t>(x.rows());
  const Matrix cov_ko = sample_cross_covariance(x_ko, x_ko);
  const Matrix cross = sample_cross_covariance(x, x_ko);
  const Matrix cross_target = model.sigma - Matrix(model.s.asDiagonal());
  d.knockoff_cov_deviation = (cov_ko - model.sigma).cwiseAbs().maxCoeff();
  d.cross_cov_deviation = (cross - cross_target).cwiseAbs().maxCoeff();
  d.mean_shift = x_ko.colwise().mean().transpose() - model.mu;
  d.max_mean_shift = d.mean_shift.cwiseAbs().maxCoeff();
  return d;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw DataError("knockoff model: bad matrix shape");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("knockoff model: bad matrix shape");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

void save_knockoff_model(const GaussianKnockoffModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "gaussian-knockoff-model";
  j["version"] = 1;
  j["p"] = model.p();
  j["ridge"] = model.ridge;
  j["mu"] = std::vector<double>(model.mu.data(), model.mu.data() + model.mu.size());
  j["s"] = std::vector<double>(model.s.data(), model.s.data() + model.s.size());
  j["sigma"] = matrix_to_json(model.sigma);
  j["cond_mean_map"] = matrix_to_json(model.cond_mean_map);
  j["cond_cov_factor"] = matrix_to_json(model.cond_cov_factor);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

GaussianKnockoffModel load_knockoff_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "gaussian-knockoff-model") throw DataError("not a knockoff model file");
    const auto p = j.at("p").get<Eigen::Index>();
    GaussianKnockoffModel model;
    model.ridge = j.at("ridge").get<double>();
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto s = j.at("s").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mu.size()) != p || static_cast<Eigen::Index>(s.size()) != p) {
      throw DataError("knockoff model: bad vector length");
    }
    model.mu = Eigen::Map<const Vector>(mu.data(), p);
    model.s = Eigen::Map<const Vector>(s.data(), p);
    model.sigma = matrix_from_json(j.at("sigma"), p, p);
    model.cond_mean_map = matrix_from_json(j.at("cond_mean_map"), p, p);
    model.cond_cov_factor = matrix_from_json(j.at("cond_cov_factor"), p, p);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace ixfdr
