#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "malbehave/classifiers.hpp"
#include "malbehave/error.hpp"
#include "malbehave/rng.hpp"

namespace malbehave {
namespace {

constexpr std::size_t kParams = kFeatureCount + 1;  // weights, then bias

// log(1 + exp(-t)) without overflow.
double log1p_exp_neg(double t) {
  return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

// 1 / (1 + exp(t))
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

void check_finite(const Dataset& data) {
  for (const auto& row : data.rows) {
    for (double v : row.values) {
      if (!std::isfinite(v)) {
        throw TrainingError("sample '" + row.sample_id + "' has a non-finite feature value");
      }
    }
  }
}

bool small_decrease(double before, double after, double tol) {
  return before - after <= tol * std::max(std::abs(before), 1e-300);
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Damped Newton with Armijo backtracking for the two smooth objectives.
class NewtonSolver {
 public:
  NewtonSolver(const LinearProblem& problem, LinearKind kind)
      : problem_(problem), kind_(kind), n_(problem.rows()), xa_(n_, kParams), y_(n_) {
    Eigen::Map<const RowMatrix> x(problem.design().data(), static_cast<Eigen::Index>(n_),
                                  static_cast<Eigen::Index>(kFeatureCount));
    xa_.leftCols(kFeatureCount) = x;
    xa_.col(kFeatureCount).setOnes();
    for (std::size_t i = 0; i < n_; ++i) y_[static_cast<Eigen::Index>(i)] = problem.labels()[i];
  }

  Eigen::VectorXd solve(const LinearOptions& opt) const {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(kParams);
    double f = objective(theta);
    if (opt.objective_trace) opt.objective_trace->push_back(f);

    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
      Eigen::VectorXd grad(kParams);
      Eigen::MatrixXd hess(kParams, kParams);
      derivatives(theta, grad, hess);
      if (grad.norm() <= 1e-12) break;

      hess.diagonal().array() += 1e-10;
      Eigen::VectorXd step = hess.ldlt().solve(-grad);
      const double slope = grad.dot(step);
      if (!(slope < 0.0)) break;

      double alpha = 1.0;
      double f_new = objective(theta + step);
      int halvings = 0;
      while (!(f_new <= f + 1e-4 * alpha * slope) && halvings < 60) {
        alpha *= 0.5;
        f_new = objective(theta + alpha * step);
        ++halvings;
      }
      if (!(f_new <= f)) break;

      theta += alpha * step;
      const double f_old = f;
      f = f_new;
      if (opt.objective_trace) opt.objective_trace->push_back(f);
      if (small_decrease(f_old, f, opt.tol)) break;
    }
    return theta;
  }

 private:
  double objective(const Eigen::VectorXd& theta) const {
    return problem_.objective(kind_, std::span<const double>(theta.data(), kFeatureCount),
                              theta[kFeatureCount]);
  }

  void derivatives(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& hess) const {
    const double c = problem_.cost();
    const Eigen::VectorXd z = xa_ * theta;
    Eigen::VectorXd coef(n_);   // d loss / d z_i
    Eigen::VectorXd curv(n_);   // d^2 loss / d z_i^2
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_); ++i) {
      const double yi = y_[i];
      if (kind_ == LinearKind::SvmL2L2) {
        const double margin = 1.0 - yi * z[i];
        coef[i] = margin > 0.0 ? -2.0 * c * yi * margin : 0.0;
        curv[i] = margin > 0.0 ? 2.0 * c : 0.0;
      } else {
        const double p = sigmoid_neg(yi * z[i]);
        coef[i] = -c * yi * p;
        curv[i] = c * p * (1.0 - p);
      }
    }
    grad = xa_.transpose() * coef;
    grad.head(kFeatureCount) += theta.head(kFeatureCount);
    hess = xa_.transpose() * curv.asDiagonal() * xa_;
    hess.diagonal().head(kFeatureCount).array() += 1.0;
  }

  const LinearProblem& problem_;
  LinearKind kind_;
  std::size_t n_;
  Eigen::MatrixXd xa_;
  Eigen::VectorXd y_;
};

// Coordinate descent with one-dimensional Newton steps, soft-thresholded
// for the L1 term, and a sufficient-decrease line search per coordinate.
class L1CoordinateSolver {
 public:
  explicit L1CoordinateSolver(const LinearProblem& problem)
      : problem_(problem), n_(problem.rows()), columns_(kParams, std::vector<double>(n_, 1.0)) {
    const auto x = problem.design();
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) columns_[j][i] = x[i * kFeatureCount + j];
    }
  }

  std::vector<double> solve(const LinearOptions& opt) const {
    const double c = problem_.cost();
    const auto y = problem_.labels();
    std::vector<double> theta(kParams, 0.0);
    std::vector<double> z(n_, 0.0);
    double loss = c * static_cast<double>(n_) * std::log(2.0);
    double f = loss;
    if (opt.objective_trace) opt.objective_trace->push_back(f);

    std::vector<std::size_t> order(kParams);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(opt.seed);
    std::vector<double> p(n_);

    for (std::size_t sweep = 0; sweep < opt.max_iter; ++sweep) {
      rng.shuffle(order.begin(), order.end());
      for (std::size_t j : order) {
        const bool penalized = j < kFeatureCount;
        const auto& col = columns_[j];
        double g = 0.0;
        double h = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
          const double pi = sigmoid_neg(y[i] * z[i]);
          g -= y[i] * pi * col[i];
          h += pi * (1.0 - pi) * col[i] * col[i];
        }
        g *= c;
        h = c * h + 1e-12;

        const double w = theta[j];
        double d;
        if (!penalized) {
          d = -g / h;
        } else if (g + 1.0 <= h * w) {
          d = -(g + 1.0) / h;
        } else if (g - 1.0 >= h * w) {
          d = -(g - 1.0) / h;
        } else {
          d = -w;
        }
        if (std::abs(d) < 1e-14) continue;

        const double penalty_now = penalized ? std::abs(w) : 0.0;
        const double predicted = g * d + (penalized ? std::abs(w + d) - penalty_now : 0.0);
        double lambda = 1.0;
        for (int tries = 0; tries < 40; ++tries, lambda *= 0.5) {
          const double step = lambda * d;
          double trial = 0.0;
          for (std::size_t i = 0; i < n_; ++i) trial += log1p_exp_neg(y[i] * (z[i] + step * col[i]));
          trial *= c;
          const double change =
              trial - loss + (penalized ? std::abs(w + step) - penalty_now : 0.0);
          if (change <= 0.01 * lambda * predicted && change <= 0.0) {
            for (std::size_t i = 0; i < n_; ++i) z[i] += step * col[i];
            theta[j] = w + step;
            loss = trial;
            break;
          }
        }
      }

      double l1 = 0.0;
      for (std::size_t j = 0; j < kFeatureCount; ++j) l1 += std::abs(theta[j]);
      const double f_old = f;
      f = l1 + loss;
      if (opt.objective_trace) opt.objective_trace->push_back(f);
      if (small_decrease(f_old, f, opt.tol)) break;
    }
    return theta;
  }

 private:
  const LinearProblem& problem_;
  std::size_t n_;
  std::vector<std::vector<double>> columns_;
};

LinearModel fit_linear(const Dataset& train, LinearKind kind, const LinearOptions& opt) {
  require_trainable(train);
  check_finite(train);
  if (!(opt.cost > 0.0) || !std::isfinite(opt.cost)) {
    throw TrainingError("cost must be a positive finite number");
  }
  if (!(opt.tol > 0.0)) throw TrainingError("tolerance must be positive");

  LinearModel model;
  model.kind = kind;
  model.cost = opt.cost;
  model.tol = opt.tol;
  model.seed = opt.seed;
  model.layout_fingerprint = train.layout_fingerprint;
  model.standardizer = fit_standardizer(train);
  LinearProblem problem(train, model.standardizer, opt.cost);

  if (kind == LinearKind::LogRegL1) {
    auto theta = L1CoordinateSolver(problem).solve(opt);
    std::copy_n(theta.begin(), kFeatureCount, model.weights.begin());
    model.bias = theta[kFeatureCount];
  } else {
    Eigen::VectorXd theta = NewtonSolver(problem, kind).solve(opt);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      model.weights[j] = theta[static_cast<Eigen::Index>(j)];
    }
    model.bias = theta[kFeatureCount];
  }
  return model;
}

}  // namespace

double LinearModel::decision(const FeatureValues& x) const {
  const FeatureValues s = standardizer.apply(x);
  double z = bias;
  for (std::size_t j = 0; j < kFeatureCount; ++j) z += weights[j] * s[j];
  return z;
}

LinearProblem::LinearProblem(const Dataset& train, const Standardizer& standardizer, double cost)
    : cost_(cost) {
  design_.reserve(train.size() * kFeatureCount);
  labels_.reserve(train.size());
  for (const auto& row : train.rows) {
    if (!row.label) throw DatasetError("sample '" + row.sample_id + "' has no label");
    const FeatureValues s = standardizer.apply(row.values);
    design_.insert(design_.end(), s.begin(), s.end());
    labels_.push_back(*row.label == Label::Target ? 1.0 : -1.0);
  }
}

double LinearProblem::objective(LinearKind kind, std::span<const double> w, double b) const {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    double z = b;
    for (std::size_t j = 0; j < kFeatureCount; ++j) z += w[j] * design_[i * kFeatureCount + j];
    const double t = labels_[i] * z;
    if (kind == LinearKind::SvmL2L2) {
      const double margin = 1.0 - t;
      if (margin > 0.0) loss += margin * margin;
    } else {
      loss += log1p_exp_neg(t);
    }
  }
  double reg = 0.0;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    reg += kind == LinearKind::LogRegL1 ? std::abs(w[j]) : 0.5 * w[j] * w[j];
  }
  return reg + cost_ * loss;
}

std::vector<double> LinearProblem::smooth_gradient(LinearKind kind, std::span<const double> w,
                                                   double b) const {
  std::vector<double> grad(kParams, 0.0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const double* x = design_.data() + i * kFeatureCount;
    double z = b;
    for (std::size_t j = 0; j < kFeatureCount; ++j) z += w[j] * x[j];
    const double y = labels_[i];
    double coef;
    if (kind == LinearKind::SvmL2L2) {
      const double margin = 1.0 - y * z;
      coef = margin > 0.0 ? -2.0 * y * margin : 0.0;
    } else {
      coef = -y * sigmoid_neg(y * z);
    }
    coef *= cost_;
    for (std::size_t j = 0; j < kFeatureCount; ++j) grad[j] += coef * x[j];
    grad[kFeatureCount] += coef;
  }
  if (kind != LinearKind::LogRegL1) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) grad[j] += w[j];
  }
  return grad;
}

LinearModel train_svm(const Dataset& train, const LinearOptions& options) {
  return fit_linear(train, LinearKind::SvmL2L2, options);
}

LinearModel train_logreg(const Dataset& train, Penalty penalty, const LinearOptions& options) {
  return fit_linear(train, penalty == Penalty::L1 ? LinearKind::LogRegL1 : LinearKind::LogRegL2,
                    options);
}

}  // namespace malbehave
