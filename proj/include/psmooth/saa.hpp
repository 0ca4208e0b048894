#pragma once

#include "psmooth/function_model.hpp"
#include "psmooth/ge.hpp"
#include "psmooth/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace psmooth {

/// Random smooth part phi(x) = E phi^(x; Z) of a stochastic GE. Samples are
/// stored as the columns of an n_z x k matrix.
class StochasticModel {
 public:
  virtual ~StochasticModel() = default;
  virtual std::string kind() const = 0;
  virtual Index dim() const = 0;
  virtual Index sample_dim() const = 0;
  virtual Vector sample(RandomStream& rng) const = 0;
  virtual Vector grad(const Vector& x, const Vector& z) const = 0;
  virtual Matrix hess(const Vector& x, const Vector& z) const = 0;
  virtual Vector mean_grad(const Vector& x) const = 0;
  virtual Matrix mean_hess(const Vector& x) const = 0;
  /// Var[grad(x; Z)] when known in closed form.
  virtual std::optional<Matrix> analytic_sigma(const Vector&) const { return std::nullopt; }
  /// Box containing the region of interest.
  virtual Vector lower_bounds() const { return Vector::Constant(dim(), -kInf); }
  virtual Vector upper_bounds() const { return Vector::Constant(dim(), kInf); }

  /// (1/k) sum_i grad(x; Z_i).
  virtual Vector average_grad(const Vector& x, const Matrix& samples) const;
  virtual Matrix average_hess(const Vector& x, const Matrix& samples) const;
};

using StochasticPtr = std::shared_ptr<const StochasticModel>;

/// grad phi^(x; Z) = A x - Z with Z ~ N(mu0, C). A = I gives the Gaussian shift model.
StochasticPtr make_gaussian_linear(Matrix a, Vector mu0, Matrix cov);
StochasticPtr make_gaussian_shift(Vector mu0, Matrix cov);

/// Draws k samples for replication `replication`; sample i uses counter i.
Matrix draw_samples(const StochasticModel& model, Index k, std::uint64_t seed, std::uint32_t replication);

struct SigmaEstimate {
  Matrix sigma;
  double standard_error = 0.0;  // Frobenius-norm standard error of the MC estimate; 0 if analytic
  bool analytic = false;
};

/// Var[grad(x; Z)], analytic when the model declares it (unless forced to Monte Carlo).
SigmaEstimate sigma(const StochasticModel& model, const Vector& x, Index mc_samples = 100000,
                    std::uint64_t seed = 1, bool force_mc = false);

/// 0 in psi(x) + df(x) with psi the sample-average gradient (or the mean when samples are empty).
GEProblem saa_ge(const StochasticPtr& model, const FunctionPtr& fm, const Matrix& samples);
GEProblem true_ge(const StochasticPtr& model, const FunctionPtr& fm);

struct SaaOptions {
  int warm_steps = 50;           // minimum proximal-gradient steps
  int warm_cap = 1000;           // hard cap on proximal-gradient steps
  int stable_window = 10;        // consecutive steps with the same active signature
  int power_iters = 50;          // for the Hessian norm estimate
  GeOptions ge{NewtonOptions{1e-12, 100}, kGeSolutionTol};
};

/// Reference solution of the true GE, from x0 by proximal gradient then Newton.
Vector reference_solution(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x0,
                          const SaaOptions& opt = {});

struct AsymptoticLaw {
  Vector xbar;
  Matrix tangent;
  Matrix reduced;           // B = T'(grad^2 phi + L'')T
  Matrix sigma;             // Var[grad(xbar; Z)]
  Matrix limit_covariance;  // T B^-1 T' Sigma T B^-T T'
  double ri_margin = 0.0;
};

AsymptoticLaw theoretical_law(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                              const SaaOptions& opt = {});
/// Same formula with a given Sigma.
Matrix limit_covariance(const Matrix& tangent, const Matrix& reduced, const Matrix& sigma);

/// SAA solution for replication `replication` from k samples, warm-started at x_start.
Vector run_saa(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x_start, Index k,
               std::uint64_t seed, std::uint32_t replication = 0, const SaaOptions& opt = {});
Vector run_saa(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x_start, const Matrix& samples,
               const SaaOptions& opt = {});

struct EmpiricalReport {
  Index k = 0;
  int replications = 0;
  std::vector<Vector> samples;       // sqrt(k)(x_k - xbar) per replication, empty vector on failure
  std::vector<bool> failed;
  std::vector<bool> on_manifold;
  std::map<std::string, int> failure_counts;
  int successes = 0;
  Vector mean;
  std::optional<Matrix> covariance;  // absent when fewer than two successes
  double on_manifold_fraction = 0.0;
};

/// R replications on up to `jobs` threads. Throws if more than 1% fail.
EmpiricalReport empirical_distribution(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                                       Index k, int replications, std::uint64_t seed, int jobs = 1,
                                       const SaaOptions& opt = {});

struct AsymptoticComparison {
  double frobenius_rel_error = 0.0;  // on tangent coordinates
  double ambient_rel_error = 0.0;    // full n x n matrices
  std::vector<double> z_scores;      // mean_i / (sd_i / sqrt(R)), 0 where sd_i = 0 and mean_i = 0
  double max_abs_z = 0.0;
};

AsymptoticComparison compare_asymptotics(const EmpiricalReport& emp, const AsymptoticLaw& law);

/// ||A - B|| / ||B||; when ||B|| = 0 the denominator is max(||A||, ||B||), so
/// a zero reference against a nonzero estimate gives 1.
double relative_frobenius(const Matrix& a, const Matrix& b);

struct ConsistencyReport {
  std::vector<Index> ks;
  std::vector<double> medians;  // median ||x_k - xbar||
  double loglog_slope = 0.0;
};

ConsistencyReport consistency_check(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                                    const std::vector<Index>& ks, int replications, std::uint64_t seed,
                                    int jobs = 1, const SaaOptions& opt = {});

/// Least-squares slope of log y against log x over positive pairs; 0 if undefined.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace psmooth
