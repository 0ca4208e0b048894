#include "psmooth/saa.hpp"

#include "psmooth/linalg.hpp"
#include "psmooth/parallel.hpp"
#include "psmooth/prox.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace psmooth {

namespace {

constexpr std::uint32_t kSampleTag = 0x73616100u;
constexpr std::uint32_t kSigmaTag = 0x73676d00u;

class GaussianLinear final : public StochasticModel {
 public:
  GaussianLinear(Matrix a, Vector mu0, Matrix cov) : a_(std::move(a)), mu0_(std::move(mu0)), cov_(std::move(cov)) {
    const Index n = mu0_.size();
    require(a_.rows() == n && a_.cols() == n && cov_.rows() == n && cov_.cols() == n,
            ErrorKind::DimensionMismatch, "gaussian model sizes");
    require((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + cov_.cwiseAbs().maxCoeff()),
            ErrorKind::ConfigInvalid, "covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov_));
    require(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()),
            ErrorKind::ConfigInvalid, "covariance must be positive semidefinite");
    factor_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::string kind() const override { return "gaussian_linear"; }
  Index dim() const override { return mu0_.size(); }
  Index sample_dim() const override { return mu0_.size(); }
  Vector sample(RandomStream& rng) const override { return mu0_ + factor_ * rng.normal_vector(dim()); }
  Vector grad(const Vector& x, const Vector& z) const override { return a_ * x - z; }
  Matrix hess(const Vector&, const Vector&) const override { return a_; }
  Vector mean_grad(const Vector& x) const override { return a_ * x - mu0_; }
  Matrix mean_hess(const Vector&) const override { return a_; }
  std::optional<Matrix> analytic_sigma(const Vector&) const override { return cov_; }
  Vector average_grad(const Vector& x, const Matrix& samples) const override {
    return a_ * x - samples.rowwise().mean();
  }
  Matrix average_hess(const Vector&, const Matrix&) const override { return a_; }

 private:
  Matrix a_;
  Vector mu0_;
  Matrix cov_;
  Matrix factor_;
};

double power_norm(const Matrix& h, int iters) {
  const Index n = h.rows();
  if (n == 0) return 0.0;
  Vector u = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Vector w = h.transpose() * (h * u);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    u = w / nw;
    est = std::sqrt(nw);
  }
  return est;
}

// Proximal gradient on 0 in psi(x) + df(x) until the active signature settles.
Vector prox_gradient_warm(const GEProblem& ge, const FunctionModel& fm, const Vector& x0, const Matrix& hess,
                          const SaaOptions& opt) {
  const Vector none(0);
  const double lhat = power_norm(hess, opt.power_iters);
  double r = lhat > 0.0 ? 1.0 / lhat : 1.0;
  const double rho = fm.prox_regularity_modulus();
  if (rho > 0.0) r = std::min(r, 0.49 / rho);
  Vector x = x0;
  std::string last;
  int same = 0;
  for (int it = 0; it < opt.warm_cap; ++it) {
    const ProxResult p = prox(fm, r, x - r * ge.psi(none, x));
    x = p.x;
    same = p.signature == last ? same + 1 : 1;
    last = p.signature;
    if (it + 1 >= opt.warm_steps && same >= opt.stable_window) return x;
  }
  throw Error(ErrorKind::ManifoldAmbiguous, "proximal gradient did not settle on one active structure");
}

Vector solve_from(const GEProblem& ge, const Matrix& hess_at_start, const Vector& x_start, const SaaOptions& opt) {
  const Vector xw = prox_gradient_warm(ge, *ge.fm, x_start, hess_at_start, opt);
  return solve_ge(ge, Vector(0), xw, opt.ge, ge.fm->active_manifold(xw));
}

}  // namespace

Vector StochasticModel::average_grad(const Vector& x, const Matrix& samples) const {
  Vector s = Vector::Zero(dim());
  for (Index i = 0; i < samples.cols(); ++i) s += grad(x, samples.col(i));
  return s / static_cast<double>(samples.cols());
}

Matrix StochasticModel::average_hess(const Vector& x, const Matrix& samples) const {
  Matrix s = Matrix::Zero(dim(), dim());
  for (Index i = 0; i < samples.cols(); ++i) s += hess(x, samples.col(i));
  return s / static_cast<double>(samples.cols());
}

StochasticPtr make_gaussian_linear(Matrix a, Vector mu0, Matrix cov) {
  return std::make_shared<GaussianLinear>(std::move(a), std::move(mu0), std::move(cov));
}

StochasticPtr make_gaussian_shift(Vector mu0, Matrix cov) {
  const Index n = mu0.size();
  return make_gaussian_linear(Matrix::Identity(n, n), std::move(mu0), std::move(cov));
}

Matrix draw_samples(const StochasticModel& model, Index k, std::uint64_t seed, std::uint32_t replication) {
  require(k >= 1, ErrorKind::ConfigInvalid, "sample count must be positive");
  Matrix z(model.sample_dim(), k);
  RandomStream rng(seed, replication, kSampleTag);
  for (Index i = 0; i < k; ++i) {
    rng.seek(static_cast<std::uint32_t>(i));
    z.col(i) = model.sample(rng);
  }
  return z;
}

SigmaEstimate sigma(const StochasticModel& model, const Vector& x, Index mc_samples, std::uint64_t seed,
                    bool force_mc) {
  SigmaEstimate out;
  if (!force_mc) {
    if (auto s = model.analytic_sigma(x)) {
      out.sigma = *s;
      out.analytic = true;
      return out;
    }
  }
  require(mc_samples >= 2, ErrorKind::ConfigInvalid, "need at least two Monte Carlo samples");
  const Index n = model.dim();
  Matrix g(n, mc_samples);
  RandomStream rng(seed, 0, kSigmaTag);
  for (Index i = 0; i < mc_samples; ++i) {
    rng.seek(static_cast<std::uint32_t>(i));
    g.col(i) = model.grad(x, model.sample(rng));
  }
  const Vector m = g.rowwise().mean();
  const Matrix c = g.colwise() - m;
  const double dn = static_cast<double>(mc_samples);
  out.sigma = symmetrized(c * c.transpose() / (dn - 1.0));
  // Standard error of each entry from the spread of the products c_j c_l.
  double se2 = 0.0;
  for (Index j = 0; j < n; ++j)
    for (Index l = 0; l < n; ++l) {
      const Vector prod = c.row(j).cwiseProduct(c.row(l)).transpose();
      const double var = (prod.array() - prod.mean()).square().sum() / (dn - 1.0);
      se2 += var / dn;
    }
  out.standard_error = std::sqrt(se2);
  return out;
}

GEProblem saa_ge(const StochasticPtr& model, const FunctionPtr& fm, const Matrix& samples) {
  require(model->dim() == fm->dim(), ErrorKind::DimensionMismatch, "model and function dimensions differ");
  const Index n = fm->dim();
  GEProblem ge;
  ge.fm = fm;
  ge.param_dim = 0;
  ge.dpsi_dp = [n](const Vector&, const Vector&) -> Matrix { return Matrix(n, 0); };
  if (samples.cols() == 0) {
    ge.psi = [model](const Vector&, const Vector& x) -> Vector { return model->mean_grad(x); };
    ge.dpsi_dx = [model](const Vector&, const Vector& x) -> Matrix { return model->mean_hess(x); };
    ge.family = "true";
  } else {
    require(samples.rows() == model->sample_dim(), ErrorKind::DimensionMismatch, "sample dimension");
    auto z = std::make_shared<const Matrix>(samples);
    ge.psi = [model, z](const Vector&, const Vector& x) -> Vector { return model->average_grad(x, *z); };
    ge.dpsi_dx = [model, z](const Vector&, const Vector& x) -> Matrix { return model->average_hess(x, *z); };
    ge.family = "saa";
  }
  return ge;
}

GEProblem true_ge(const StochasticPtr& model, const FunctionPtr& fm) { return saa_ge(model, fm, Matrix(0, 0)); }

Vector reference_solution(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x0,
                          const SaaOptions& opt) {
  const GEProblem ge = true_ge(model, fm);
  return solve_from(ge, model->mean_hess(x0), x0, opt);
}

Matrix limit_covariance(const Matrix& tangent, const Matrix& reduced, const Matrix& sig) {
  const Index n = tangent.rows();
  if (tangent.cols() == 0) return Matrix::Zero(n, n);
  const Matrix m = tangent * reduced.inverse() * tangent.transpose();
  return symmetrized(m * sig * m.transpose());
}

AsymptoticLaw theoretical_law(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                              const SaaOptions& opt) {
  const GEProblem ge = true_ge(model, fm);
  const RegularityReport rep = check_regularity(ge, xbar, Vector(0), opt.ge);
  require(rep.regular, ErrorKind::SingularReducedMap, "reduced map of the true GE is singular");
  AsymptoticLaw law;
  law.xbar = xbar;
  law.tangent = rep.tangent;
  law.reduced = rep.reduced;
  law.sigma = sigma(*model, xbar).sigma;
  law.limit_covariance = limit_covariance(law.tangent, law.reduced, law.sigma);
  law.ri_margin = relative_interior_test(fm->subdifferential(xbar), -model->mean_grad(xbar)).margin;
  return law;
}

Vector run_saa(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x_start, const Matrix& samples,
               const SaaOptions& opt) {
  require(samples.cols() >= 1, ErrorKind::ConfigInvalid, "sample count must be positive");
  const GEProblem ge = saa_ge(model, fm, samples);
  return solve_from(ge, model->average_hess(x_start, samples), x_start, opt);
}

Vector run_saa(const StochasticPtr& model, const FunctionPtr& fm, const Vector& x_start, Index k,
               std::uint64_t seed, std::uint32_t replication, const SaaOptions& opt) {
  return run_saa(model, fm, x_start, draw_samples(*model, k, seed, replication), opt);
}

EmpiricalReport empirical_distribution(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                                       Index k, int replications, std::uint64_t seed, int jobs,
                                       const SaaOptions& opt) {
  require(replications >= 1, ErrorKind::ConfigInvalid, "replications must be positive");
  const std::size_t reps = static_cast<std::size_t>(replications);
  const std::string ref_sig = fm->active_manifold(xbar).signature;
  const double scale = std::sqrt(static_cast<double>(k));
  EmpiricalReport out;
  out.k = k;
  out.replications = replications;
  out.samples.assign(reps, Vector());
  out.failed.assign(reps, false);
  out.on_manifold.assign(reps, false);
  std::vector<ErrorKind> why(reps);
  parallel_for(reps, jobs, [&](std::size_t r) {
    try {
      const Vector x = run_saa(model, fm, xbar, k, seed, static_cast<std::uint32_t>(r), opt);
      out.samples[r] = scale * (x - xbar);
      out.on_manifold[r] = fm->active_manifold(x).signature == ref_sig;
    } catch (const Error& e) {
      out.failed[r] = true;
      why[r] = e.kind();
    }
  });
  const Index n = fm->dim();
  out.mean = Vector::Zero(n);
  int on = 0;
  std::map<ErrorKind, int> by_kind;
  for (std::size_t r = 0; r < reps; ++r) {
    if (out.failed[r]) {
      ++by_kind[why[r]];
      ++out.failure_counts[to_string(why[r])];
      continue;
    }
    ++out.successes;
    out.mean += out.samples[r];
    if (out.on_manifold[r]) ++on;
  }
  const int failures = replications - out.successes;
  if (failures > 0.01 * replications) {
    auto worst = std::max_element(by_kind.begin(), by_kind.end(),
                                  [](const auto& a, const auto& b) { return a.second < b.second; });
    throw Error(worst->first,
                std::to_string(failures) + " of " + std::to_string(replications) + " replications failed");
  }
  out.on_manifold_fraction = static_cast<double>(on) / replications;
  if (out.successes > 0) out.mean /= out.successes;
  if (out.successes >= 2) {
    Matrix c = Matrix::Zero(n, n);
    for (std::size_t r = 0; r < reps; ++r) {
      if (out.failed[r]) continue;
      const Vector d = out.samples[r] - out.mean;
      c += d * d.transpose();
    }
    out.covariance = symmetrized(c / (out.successes - 1));
  }
  return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch, "matrix sizes differ");
  const double diff = (a - b).norm();
  if (diff == 0.0) return 0.0;
  const double nb = b.norm();
  return diff / (nb > 0.0 ? nb : std::max(a.norm(), nb));
}

AsymptoticComparison compare_asymptotics(const EmpiricalReport& emp, const AsymptoticLaw& law) {
  const Index n = law.limit_covariance.rows();
  require(emp.mean.size() == n, ErrorKind::DimensionMismatch, "empirical and limit dimensions differ");
  AsymptoticComparison out;
  if (emp.covariance) {
    const Matrix& t = law.tangent;
    out.frobenius_rel_error =
        relative_frobenius(t.transpose() * *emp.covariance * t, t.transpose() * law.limit_covariance * t);
    out.ambient_rel_error = relative_frobenius(*emp.covariance, law.limit_covariance);
  } else {
    out.frobenius_rel_error = out.ambient_rel_error = std::nan("");
  }
  for (Index i = 0; i < n; ++i) {
    const double m = emp.mean(i);
    const double sd = emp.covariance ? std::sqrt((*emp.covariance)(i, i)) : 0.0;
    double z = 0.0;
    if (sd > 0.0)
      z = m / (sd / std::sqrt(static_cast<double>(emp.successes)));
    else if (m != 0.0)
      z = kInf;
    out.z_scores.push_back(z);
    out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 2) return 0.0;
  const double den = cnt * sxx - sx * sx;
  return den != 0.0 ? (cnt * sxy - sx * sy) / den : 0.0;
}

ConsistencyReport consistency_check(const StochasticPtr& model, const FunctionPtr& fm, const Vector& xbar,
                                    const std::vector<Index>& ks, int replications, std::uint64_t seed, int jobs,
                                    const SaaOptions& opt) {
  ConsistencyReport out;
  out.ks = ks;
  std::vector<double> kx;
  for (Index k : ks) {
    const EmpiricalReport emp = empirical_distribution(model, fm, xbar, k, replications, seed, jobs, opt);
    std::vector<double> d;
    const double scale = std::sqrt(static_cast<double>(k));
    for (std::size_t r = 0; r < emp.samples.size(); ++r)
      if (!emp.failed[r]) d.push_back(emp.samples[r].norm() / scale);
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    out.medians.push_back(m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]));
    kx.push_back(static_cast<double>(k));
  }
  out.loglog_slope = loglog_slope(kx, out.medians);
  return out;
}

}  // namespace psmooth
