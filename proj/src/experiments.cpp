#include "psmooth/experiments.hpp"

#include "psmooth/catalog.hpp"
#include "psmooth/counterexamples.hpp"
#include "psmooth/cplq.hpp"
#include "psmooth/ge.hpp"
#include "psmooth/linalg.hpp"
#include "psmooth/parallel.hpp"
#include "psmooth/prox.hpp"
#include "psmooth/saa.hpp"
#include "psmooth/second_order.hpp"

#include <Eigen/Core>
#include <Eigen/QR>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace psmooth {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config reading

enum class Bound { Any, Positive, NonNegative };

class Section {
 public:
  Section(json in, std::string path) : in_(std::move(in)), path_(std::move(path)) {
    if (in_.is_null()) in_ = json::object();
    if (!in_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ConfigInvalid, (path_.empty() ? std::string("config") : path_) + ": " + msg);
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  bool has(const std::string& k) const { return in_.contains(k) && !in_.at(k).is_null(); }

  const json& peek(const std::string& k) const { return in_.at(k); }

  double number(const std::string& k, std::optional<double> def, Bound b = Bound::Any) {
    seen_.insert(k);
    double x;
    if (!has(k)) {
      if (!def) fail("missing required number '" + k + "'");
      x = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_number()) fail("'" + k + "' must be a number");
      x = j.get<double>();
    }
    check_bound(k, x, b);
    out_[k] = x;
    return x;
  }

  std::optional<double> optional_number(const std::string& k, Bound b = Bound::Any) {
    if (!has(k)) {
      seen_.insert(k);
      return std::nullopt;
    }
    return number(k, std::nullopt, b);
  }

  std::int64_t integer(const std::string& k, std::optional<std::int64_t> def, std::int64_t lo,
                       std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
    seen_.insert(k);
    std::int64_t x;
    if (!has(k)) {
      if (!def) fail("missing required integer '" + k + "'");
      x = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_number_integer()) fail("'" + k + "' must be an integer");
      x = j.get<std::int64_t>();
    }
    if (x < lo || x > hi) fail("'" + k + "' out of range");
    out_[k] = x;
    return x;
  }

  std::uint64_t seed(const std::string& k, std::uint64_t def) {
    seen_.insert(k);
    std::uint64_t x = def;
    if (has(k)) {
      const json& j = in_.at(k);
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        fail("'" + k + "' must be a nonnegative integer");
      x = j.get<std::uint64_t>();
    }
    out_[k] = x;
    return x;
  }

  std::string string(const std::string& k, std::optional<std::string> def,
                     const std::vector<std::string>& allowed = {}) {
    seen_.insert(k);
    std::string x;
    if (!has(k)) {
      if (!def) fail("missing required string '" + k + "'");
      x = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_string()) fail("'" + k + "' must be a string");
      x = j.get<std::string>();
    }
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), x) == allowed.end())
      fail("'" + k + "' has unsupported value '" + x + "'");
    out_[k] = x;
    return x;
  }

  bool boolean(const std::string& k, std::optional<bool> def) {
    seen_.insert(k);
    bool x;
    if (!has(k)) {
      if (!def) fail("missing required boolean '" + k + "'");
      x = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_boolean()) fail("'" + k + "' must be a boolean");
      x = j.get<bool>();
    }
    out_[k] = x;
    return x;
  }

  std::vector<double> numbers(const std::string& k, std::optional<std::vector<double>> def, Bound b = Bound::Any,
                              bool nonempty = true) {
    seen_.insert(k);
    std::vector<double> xs;
    if (!has(k)) {
      if (!def) fail("missing required list '" + k + "'");
      xs = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_array()) fail("'" + k + "' must be a list of numbers");
      for (const json& e : j) {
        if (!e.is_number()) fail("'" + k + "' must be a list of numbers");
        xs.push_back(e.get<double>());
      }
    }
    if (nonempty && xs.empty()) fail("'" + k + "' must not be empty");
    for (double x : xs) check_bound(k, x, b);
    out_[k] = xs;
    return xs;
  }

  std::vector<std::int64_t> integers(const std::string& k, std::optional<std::vector<std::int64_t>> def,
                                     std::int64_t lo) {
    seen_.insert(k);
    std::vector<std::int64_t> xs;
    if (!has(k)) {
      if (!def) fail("missing required list '" + k + "'");
      xs = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_array()) fail("'" + k + "' must be a list of integers");
      for (const json& e : j) {
        if (!e.is_number_integer()) fail("'" + k + "' must be a list of integers");
        xs.push_back(e.get<std::int64_t>());
      }
    }
    if (xs.empty()) fail("'" + k + "' must not be empty");
    for (auto x : xs)
      if (x < lo) fail("'" + k + "' out of range");
    out_[k] = xs;
    return xs;
  }

  Vector vector(const std::string& k, std::optional<Vector> def = std::nullopt, Index size = -1) {
    std::optional<std::vector<double>> d;
    if (def) d = std::vector<double>(def->data(), def->data() + def->size());
    const std::vector<double> xs = numbers(k, d, Bound::Any, false);
    if (size >= 0 && static_cast<Index>(xs.size()) != size)
      fail("'" + k + "' must have " + std::to_string(size) + " entries");
    Vector v(static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Index>(i)) = xs[i];
    return v;
  }

  Matrix matrix(const std::string& k, std::optional<Matrix> def = std::nullopt, Index rows = -1, Index cols = -1) {
    seen_.insert(k);
    Matrix m;
    if (!has(k)) {
      if (!def) fail("missing required matrix '" + k + "'");
      m = *def;
    } else {
      const json& j = in_.at(k);
      if (!j.is_array()) fail("'" + k + "' must be a list of rows");
      const Index r = static_cast<Index>(j.size());
      Index c = -1;
      for (const json& row : j) {
        if (!row.is_array()) fail("'" + k + "' must be a list of rows");
        if (c < 0) c = static_cast<Index>(row.size());
        if (static_cast<Index>(row.size()) != c) fail("'" + k + "' rows differ in length");
      }
      m = Matrix::Zero(r, std::max<Index>(c, 0));
      for (Index a = 0; a < r; ++a)
        for (Index b = 0; b < m.cols(); ++b) {
          const json& e = j[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
          if (!e.is_number()) fail("'" + k + "' entries must be numbers");
          m(a, b) = e.get<double>();
        }
    }
    if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols))
      fail("'" + k + "' must be " + std::to_string(rows) + " x " + std::to_string(cols));
    if (!m.allFinite()) fail("'" + k + "' entries must be finite");
    json out = json::array();
    for (Index a = 0; a < m.rows(); ++a) {
      json row = json::array();
      for (Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
      out.push_back(row);
    }
    out_[k] = out;
    return m;
  }

  Section child(const std::string& k) {
    seen_.insert(k);
    return Section(has(k) ? in_.at(k) : json::object(), at(k));
  }

  std::vector<Section> children(const std::string& k, bool required) {
    seen_.insert(k);
    std::vector<Section> out;
    if (!has(k)) {
      if (required) fail("missing required list '" + k + "'");
      out_[k] = json::array();
      return out;
    }
    const json& j = in_.at(k);
    if (!j.is_array()) fail("'" + k + "' must be a list of objects");
    for (std::size_t i = 0; i < j.size(); ++i) out.emplace_back(j[i], at(k) + "[" + std::to_string(i) + "]");
    return out;
  }

  void put(const std::string& k, json v) {
    seen_.insert(k);
    out_[k] = std::move(v);
  }

  void mark(const std::string& k) { seen_.insert(k); }

  json finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
    return out_;
  }

 private:
  void check_bound(const std::string& k, double x, Bound b) const {
    if (!std::isfinite(x)) fail("'" + k + "' must be finite");
    if (b == Bound::Positive && !(x > 0.0)) fail("'" + k + "' must be positive");
    if (b == Bound::NonNegative && !(x >= 0.0)) fail("'" + k + "' must be nonnegative");
  }

  json in_;
  std::string path_;
  std::set<std::string> seen_;
  json out_ = json::object();
};

json finish_all(const std::vector<Section>& ss) {
  json a = json::array();
  for (const Section& s : ss) a.push_back(s.finish());
  return a;
}

// ---------------------------------------------------------------------------
// Functions, points and subgradients

struct FunctionSpec {
  std::string kind;
  FunctionPtr f;
  std::optional<CplqFunction> cplq;
};

CplqFunction parse_cplq(Section& s) {
  if (s.has("name")) {
    const std::string name = s.string("name", std::nullopt, {"abs", "half_max_squared", "nonneg_indicator"});
    if (name == "abs") return cplq_abs();
    if (name == "half_max_squared") return cplq_half_max_squared();
    return cplq_nonneg_indicator();
  }
  CplqFunction f;
  f.dim = s.integer("dim", std::nullopt, 1, 16);
  std::vector<Section> ps = s.children("pieces", true);
  if (ps.empty()) s.fail("'pieces' must not be empty");
  for (Section& p : ps) {
    CplqPiece piece;
    std::vector<Section> cells = p.children("cell", false);
    for (Section& c : cells) {
      HalfSpace h;
      h.normal = c.vector("normal", std::nullopt, f.dim);
      h.offset = c.number("offset", 0.0);
      piece.cell.push_back(h);
    }
    p.put("cell", finish_all(cells));
    piece.a = p.matrix("a", Matrix::Zero(f.dim, f.dim), f.dim, f.dim);
    piece.lin = p.vector("lin", Vector::Zero(f.dim), f.dim);
    piece.alpha = p.number("alpha", 0.0);
    f.pieces.push_back(piece);
  }
  s.put("pieces", finish_all(ps));
  return f;
}

FunctionSpec parse_function(Section& parent, const std::string& key) {
  Section s = parent.child(key);
  if (!parent.has(key)) s.fail("missing required function spec");
  FunctionSpec spec;
  spec.kind = s.string("kind", std::nullopt,
                       {"l1", "l1_quadratic", "quadratic", "max_quadratics", "cplq", "dyadic", "abs_cubic"});
  try {
    if (spec.kind == "l1") {
      if (s.has("weights")) {
        const Vector w = s.vector("weights");
        if (w.size() == 0 || w.minCoeff() < 0.0) s.fail("'weights' must be nonempty and nonnegative");
        spec.f = make_l1(w);
      } else {
        const Index n = s.integer("dim", std::nullopt, 1, 1000);
        spec.f = make_l1(n, s.number("lambda", 1.0, Bound::NonNegative));
      }
    } else if (spec.kind == "l1_quadratic") {
      const Vector w = s.vector("weights");
      const Index n = w.size();
      if (n == 0 || w.minCoeff() < 0.0) s.fail("'weights' must be nonempty and nonnegative");
      const Matrix a = s.matrix("a", std::nullopt, n, n);
      spec.f = make_l1_quadratic(w, a, s.vector("b", Vector::Zero(n), n));
    } else if (spec.kind == "quadratic") {
      const Matrix a = s.matrix("a");
      if (a.rows() != a.cols() || a.rows() == 0) s.fail("'a' must be square");
      spec.f = make_quadratic(a, s.vector("b", Vector::Zero(a.rows()), a.rows()));
    } else if (spec.kind == "max_quadratics") {
      std::vector<Section> ps = s.children("pieces", true);
      if (ps.empty()) s.fail("'pieces' must not be empty");
      std::vector<QuadraticPiece> pieces;
      Index n = -1;
      for (Section& p : ps) {
        QuadraticPiece q;
        q.c = p.vector("c", std::nullopt, n);
        n = q.c.size();
        q.q = p.matrix("q", Matrix::Zero(n, n), n, n);
        q.d = p.number("d", 0.0);
        pieces.push_back(q);
      }
      s.put("pieces", finish_all(ps));
      spec.f = make_max_quadratics(pieces);
    } else if (spec.kind == "cplq") {
      spec.cplq = parse_cplq(s);
      spec.f = make_cplq(*spec.cplq);
    } else if (spec.kind == "dyadic") {
      spec.f = make_dyadic_antiderivative();
    } else {
      spec.f = make_abs_cubic();
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    s.fail(e.what());
  }
  parent.put(key, s.finish());
  return spec;
}

Vector ri_center(const SubdifferentialRep& rep) {
  Vector v = rep.base;
  for (const Matrix& b : rep.blocks) v += b.rowwise().mean();
  if (rep.rays.cols() > 0) v += rep.rays.rowwise().sum();
  return v;
}

/// "v": list of numbers, or "center" for a relative-interior point of df(x).
Vector parse_subgradient(Section& s, const std::string& key, const FunctionModel& f, const Vector& x) {
  if (s.has(key) && s.peek(key).is_string()) {
    s.string(key, std::nullopt, {"center"});
    const SubdifferentialRep rep = f.subdifferential(x);
    if (rep.empty) s.fail("df(x) is empty");
    return ri_center(rep);
  }
  return s.vector(key, std::nullopt, f.dim());
}

// ---------------------------------------------------------------------------
// Output

std::string vec_cell(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v(i));
  }
  return s;
}

std::string bool_cell(bool b) { return b ? "true" : "false"; }

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json out = json::array();
  for (Index a = 0; a < m.rows(); ++a) {
    json row = json::array();
    for (Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
    out.push_back(row);
  }
  return out;
}

// Non-finite doubles become strings so the summary stays valid JSON.
json num_json(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : os_(path, std::ios::binary) {
    if (!os_) throw Error(ErrorKind::ConfigInvalid, "cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << csv_field(cells[i]);
    }
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

struct Context {
  fs::path out;
  std::uint64_t seed = 0;
  int jobs = 1;
  json results = json::object();
  std::vector<Assertion> checks;
  std::vector<fs::path> files;

  CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
    files.push_back(out / name);
    return CsvWriter(out / name, header);
  }

  void check(const std::string& name, bool ok, double value, double threshold, const std::string& op,
             const std::string& detail = "") {
    checks.push_back({name, ok, value, threshold, op, detail});
  }
  void le(const std::string& name, double value, double threshold) {
    check(name, value <= threshold, value, threshold, "<=");
  }
  void ge(const std::string& name, double value, double threshold) {
    check(name, value >= threshold, value, threshold, ">=");
  }
  void fail(const std::string& name, const std::string& detail) { check(name, false, 0.0, 0.0, "error", detail); }
};

// Ordinary library errors inside one case become a failed assertion for that case.
template <class Fn>
void guarded(Context& ctx, const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    ctx.fail(name + ".error", e.what());
  }
}

// ---------------------------------------------------------------------------
// prox-jacobian

struct ProxCase {
  FunctionSpec fn;
  double r = 1.0;
  Vector z;
  double fd_step = 1e-5;
  double fd_tol = 1e-5;
  std::optional<Matrix> expect;
  double expect_tol = 1e-12;
};

struct ProxConfig {
  std::vector<ProxCase> cases;
};

ProxConfig parse_prox(Section& root) {
  ProxConfig cfg;
  std::vector<Section> cs = root.children("cases", true);
  for (Section& s : cs) {
    ProxCase c;
    c.fn = parse_function(s, "function");
    const Index n = c.fn.f->dim();
    c.r = s.number("r", std::nullopt, Bound::Positive);
    if (s.has("z")) {
      c.z = s.vector("z", std::nullopt, n);
    } else {
      const Vector x = s.vector("x", std::nullopt, n);
      c.z = x + c.r * parse_subgradient(s, "v", *c.fn.f, x);
    }
    c.fd_step = s.number("fd_step", 1e-5, Bound::Positive);
    c.fd_tol = s.number("fd_tol", 1e-5, Bound::Positive);
    if (s.has("expect")) c.expect = s.matrix("expect", std::nullopt, n, n);
    else s.mark("expect");
    c.expect_tol = s.number("expect_tol", 1e-12, Bound::NonNegative);
    cfg.cases.push_back(c);
  }
  root.put("cases", finish_all(cs));
  return cfg;
}

void run_prox(const ProxConfig& cfg, Context& ctx) {
  CsvWriter csv = ctx.csv("prox_jacobian.csv", {"case", "row", "col", "formula", "finite_difference", "abs_diff"});
  json cases = json::array();
  for (std::size_t i = 0; i < cfg.cases.size(); ++i) {
    const ProxCase& c = cfg.cases[i];
    const std::string name = "case" + std::to_string(i);
    guarded(ctx, name, [&] {
      const ProxResult p = prox(*c.fn.f, c.r, c.z);
      const Matrix j = prox_jacobian(*c.fn.f, c.r, c.z);
      const Matrix fd = prox_jacobian_fd(*c.fn.f, c.r, c.z, c.fd_step);
      for (Index a = 0; a < j.rows(); ++a)
        for (Index b = 0; b < j.cols(); ++b)
          csv.row({std::to_string(i), std::to_string(a), std::to_string(b), format_double(j(a, b)),
                   format_double(fd(a, b)), format_double(std::abs(j(a, b) - fd(a, b)))});
      const double dev = (j - fd).cwiseAbs().maxCoeff();
      ctx.le(name + ".fd_max_abs", dev, c.fd_tol);
      json r = {{"z", vec_json(c.z)}, {"x", vec_json(p.x)}, {"signature", p.signature},
                {"jacobian", mat_json(j)}, {"fd_max_abs", dev}};
      if (c.expect) {
        const double e = (j - *c.expect).cwiseAbs().maxCoeff();
        ctx.le(name + ".expect_max_abs", e, c.expect_tol);
        r["expect_max_abs"] = e;
      }
      cases.push_back(r);
    });
  }
  ctx.results["cases"] = cases;
}

// ---------------------------------------------------------------------------
// second-order

struct PointPair {
  Vector x;
  Vector v;
};

struct OracleGroup {
  FunctionSpec fn;
  std::vector<PointPair> points;
  double rel_tol = 1e-3;
  double normal_min = 1e6;
  int random_tangent = 1;
};

struct ProbeCase {
  FunctionSpec fn;
  Vector x;
  Vector v;
  bool expect_stable = true;
  ProbeOptions opt;
};

struct SecondOrderConfig {
  NumericD2Options oracle;
  std::vector<OracleGroup> groups;
  std::vector<ProbeCase> probes;
};

NumericD2Options parse_oracle(Section& parent) {
  Section s = parent.child("oracle");
  NumericD2Options o;
  o.t0 = s.number("t0", o.t0, Bound::Positive);
  o.levels = static_cast<int>(s.integer("levels", o.levels, 3, 50));
  o.ball_radius = s.number("ball_radius", o.ball_radius, Bound::Positive);
  o.ball_samples = static_cast<int>(s.integer("ball_samples", o.ball_samples, 0, 100000));
  o.refine_iters = static_cast<int>(s.integer("refine_iters", o.refine_iters, 0, 100000));
  o.rounding_rel = s.number("rounding_rel", o.rounding_rel, Bound::Positive);
  o.oracle_tol = s.number("oracle_tol", o.oracle_tol, Bound::Positive);
  parent.put("oracle", s.finish());
  return o;
}

ProbeOptions parse_probe_options(Section& s, const NumericD2Options& oracle, std::uint64_t seed) {
  ProbeOptions o;
  o.neighborhood_radius = s.number("neighborhood_radius", o.neighborhood_radius, Bound::Positive);
  o.radius_levels = static_cast<int>(s.integer("radius_levels", o.radius_levels, 0, 40));
  o.num_pairs = static_cast<int>(s.integer("num_pairs", o.num_pairs, 0, 10000));
  o.probe_tol = s.number("probe_tol", o.probe_tol, Bound::Positive);
  o.domain_threshold = s.number("domain_threshold", o.domain_threshold, Bound::Positive);
  o.oracle = oracle;
  o.seed = seed;
  return o;
}

std::vector<ProbeCase> parse_probes(Section& root, const NumericD2Options& oracle, std::uint64_t seed,
                                    const std::optional<FunctionSpec>& fixed = std::nullopt) {
  std::vector<ProbeCase> out;
  std::vector<Section> ps = root.children("probes", false);
  for (Section& s : ps) {
    ProbeCase p;
    p.fn = fixed ? *fixed : parse_function(s, "function");
    const Index n = p.fn.f->dim();
    p.x = s.vector("x", std::nullopt, n);
    if (fixed && !s.has("v")) {
      p.v = p.fn.f->subdifferential(p.x).anchor();
      s.mark("v");
    } else {
      p.v = parse_subgradient(s, "v", *p.fn.f, p.x);
    }
    p.expect_stable = s.string("expect", std::nullopt, {"stable", "unstable"}) == "stable";
    p.opt = parse_probe_options(s, oracle, seed);
    out.push_back(p);
  }
  root.put("probes", finish_all(ps));
  return out;
}

SecondOrderConfig parse_second_order(Section& root, std::uint64_t seed) {
  SecondOrderConfig cfg;
  cfg.oracle = parse_oracle(root);
  cfg.oracle.seed = seed;
  std::vector<Section> gs = root.children("groups", false);
  for (Section& s : gs) {
    OracleGroup g;
    g.fn = parse_function(s, "function");
    std::vector<Section> pts = s.children("points", true);
    for (Section& p : pts) {
      PointPair pp;
      pp.x = p.vector("x", std::nullopt, g.fn.f->dim());
      pp.v = parse_subgradient(p, "v", *g.fn.f, pp.x);
      g.points.push_back(pp);
    }
    s.put("points", finish_all(pts));
    g.rel_tol = s.number("rel_tol", g.rel_tol, Bound::Positive);
    g.normal_min = s.number("normal_min", g.normal_min, Bound::Positive);
    g.random_tangent = static_cast<int>(s.integer("random_tangent", g.random_tangent, 0, 100));
    cfg.groups.push_back(g);
  }
  root.put("groups", finish_all(gs));
  cfg.probes = parse_probes(root, cfg.oracle, seed);
  return cfg;
}

void run_probes(const std::vector<ProbeCase>& probes, Context& ctx) {
  if (probes.empty()) return;
  CsvWriter csv = ctx.csv("probes.csv", {"probe", "x", "v", "expected", "stable", "worst_discrepancy",
                                         "domain_jump", "pairs_tested"});
  std::vector<std::optional<ProbeReport>> reps(probes.size());
  std::vector<std::string> errors(probes.size());
  parallel_for(probes.size(), ctx.jobs, [&](std::size_t i) {
    try {
      reps[i] = strict_ted_probe(*probes[i].fn.f, probes[i].x, probes[i].v, probes[i].opt);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigInvalid) throw;
      errors[i] = e.what();
    }
  });
  json out = json::array();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const std::string name = "probe" + std::to_string(i);
    const ProbeCase& p = probes[i];
    if (!reps[i]) {
      ctx.fail(name + ".error", errors[i]);
      continue;
    }
    const ProbeReport& r = *reps[i];
    csv.row({std::to_string(i), vec_cell(p.x), vec_cell(p.v), p.expect_stable ? "stable" : "unstable",
             bool_cell(r.stable), format_double(r.worst_discrepancy), bool_cell(r.domain_jump),
             std::to_string(r.pairs_tested)});
    ctx.check(name + ".stable", r.stable == p.expect_stable, r.stable ? 1.0 : 0.0, p.expect_stable ? 1.0 : 0.0,
              "==");
    out.push_back({{"x", vec_json(p.x)}, {"v", vec_json(p.v)}, {"stable", r.stable},
                   {"expected_stable", p.expect_stable}, {"worst_discrepancy", num_json(r.worst_discrepancy)},
                   {"domain_jump", r.domain_jump}, {"pairs_tested", r.pairs_tested}});
  }
  ctx.results["probes"] = out;
}

void run_second_order(const SecondOrderConfig& cfg, Context& ctx) {
  struct Task {
    std::size_t group, point;
    std::string kind;
    int index;
    Vector w;
    LagrangianData lag;
    double formula = 0.0;
    NumericD2 numeric;
    std::string error;
  };
  std::vector<Task> tasks;
  json groups = json::array();
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    const OracleGroup& grp = cfg.groups[g];
    for (std::size_t p = 0; p < grp.points.size(); ++p) {
      const std::string name = "group" + std::to_string(g) + ".point" + std::to_string(p);
      guarded(ctx, name, [&] {
        const PointPair& pp = grp.points[p];
        // Rejects v outside ri df(x) before any oracle call.
        second_subderivative(*grp.fn.f, pp.x, pp.v, Vector::Zero(pp.x.size()));
        const LagrangianData lag = lagrangian_at(*grp.fn.f, pp.x, pp.v);
        const Matrix& t = lag.tangent.basis;
        int idx = 0;
        for (Index c = 0; c < t.cols(); ++c) tasks.push_back({g, p, "tangent", idx++, t.col(c), lag, 0, {}, ""});
        RandomStream rng(ctx.seed, static_cast<std::uint32_t>(g * 1000 + p), 0x74616e00u);
        for (int k = 0; k < grp.random_tangent && t.cols() > 0; ++k) {
          Vector u = rng.normal_vector(t.cols());
          u /= u.norm();
          tasks.push_back({g, p, "tangent", idx++, t * u, lag, 0, {}, ""});
        }
        const Matrix& nb = lag.normal;
        for (Index c = 0; c < nb.cols(); ++c)
          tasks.push_back({g, p, "normal", static_cast<int>(c), nb.col(c), lag, 0, {}, ""});
      });
    }
  }
  parallel_for(tasks.size(), ctx.jobs, [&](std::size_t i) {
    Task& t = tasks[i];
    const OracleGroup& grp = cfg.groups[t.group];
    const PointPair& pp = grp.points[t.point];
    try {
      t.formula = second_subderivative(t.lag, t.w);
      t.numeric = second_subderivative_numeric(*grp.fn.f, pp.x, pp.v, t.w, cfg.oracle);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigInvalid) throw;
      t.error = e.what();
    }
  });
  if (cfg.groups.empty()) {
    run_probes(cfg.probes, ctx);
    return;
  }
  CsvWriter csv = ctx.csv("second_order.csv", {"group", "point", "kind", "index", "direction", "formula",
                                               "numeric", "numeric_infinite", "rel_error"});
  json rows = json::array();
  for (const Task& t : tasks) {
    const OracleGroup& grp = cfg.groups[t.group];
    const std::string name = "group" + std::to_string(t.group) + ".point" + std::to_string(t.point) + "." +
                             t.kind + std::to_string(t.index);
    if (!t.error.empty()) {
      ctx.fail(name + ".error", t.error);
      continue;
    }
    double rel = kInf;
    if (t.kind == "tangent") {
      rel = std::abs(t.numeric.value - t.formula) / std::max(1.0, std::abs(t.formula));
      if (t.numeric.infinite) rel = kInf;
      ctx.le(name + ".rel_error", rel, grp.rel_tol);
    } else {
      ctx.check(name + ".formula_infinite", std::isinf(t.formula), t.formula, kInf, "==");
      ctx.ge(name + ".numeric", t.numeric.value, grp.normal_min);
    }
    csv.row({std::to_string(t.group), std::to_string(t.point), t.kind, std::to_string(t.index), vec_cell(t.w),
             format_double(t.formula), format_double(t.numeric.value), bool_cell(t.numeric.infinite),
             format_double(rel)});
    rows.push_back({{"group", t.group}, {"point", t.point}, {"kind", t.kind}, {"index", t.index},
                    {"formula", num_json(t.formula)}, {"numeric", num_json(t.numeric.value)},
                    {"rel_error", num_json(rel)}});
  }
  ctx.results["directions"] = rows;
  run_probes(cfg.probes, ctx);
}

// ---------------------------------------------------------------------------
// check-partly-smooth

struct CplqCase {
  FunctionSpec fn;
  Vector x;
  bool expect = true;
  std::optional<std::pair<double, double>> witness_range;
};

struct CplqConfig {
  std::vector<CplqCase> cases;
  int random_count = 0;
  int spot_samples = 200;
  double spot_box = 2.0;
};

CplqConfig parse_cplq_config(Section& root) {
  CplqConfig cfg;
  std::vector<Section> cs = root.children("cases", false);
  for (Section& s : cs) {
    CplqCase c;
    c.fn = parse_function(s, "function");
    if (!c.fn.cplq) s.fail("function kind must be 'cplq'");
    c.x = s.vector("x", std::nullopt, c.fn.f->dim());
    c.expect = s.boolean("expect_partly_smooth", std::nullopt);
    if (s.has("witness_range")) {
      const std::vector<double> r = s.numbers("witness_range", std::nullopt);
      if (r.size() != 2 || !(r[0] < r[1]) || c.x.size() != 1) s.fail("'witness_range' needs [lo, hi] in 1-D");
      c.witness_range = std::make_pair(r[0], r[1]);
    } else {
      s.mark("witness_range");
    }
    cfg.cases.push_back(c);
  }
  root.put("cases", finish_all(cs));
  Section r = root.child("random");
  cfg.random_count = static_cast<int>(r.integer("count", 0, 0, 100000));
  cfg.spot_samples = static_cast<int>(r.integer("spot_samples", 200, 1, 100000));
  cfg.spot_box = r.number("spot_box", 2.0, Bound::Positive);
  root.put("random", r.finish());
  return cfg;
}

void run_cplq(const CplqConfig& cfg, Context& ctx) {
  CsvWriter csv = ctx.csv("cplq.csv", {"source", "index", "dim", "x", "partly_smooth", "cond1_all", "cond2",
                                       "witness", "cond2_margin"});
  auto emit = [&](const std::string& src, std::size_t i, const CplqFunction& f, const Vector& x,
                  const CplqReport& rep) {
    bool c1 = true;
    for (bool b : rep.cond1_per_piece) c1 = c1 && b;
    csv.row({src, std::to_string(i), std::to_string(f.dim), vec_cell(x), bool_cell(rep.partly_smooth),
             bool_cell(c1), bool_cell(rep.cond2_witness.has_value()),
             rep.cond2_witness ? vec_cell(*rep.cond2_witness) : "", format_double(rep.cond2_margin)});
    json j = {{"x", vec_json(x)}, {"partly_smooth", rep.partly_smooth}, {"cond1_all", c1},
              {"cond2", rep.cond2_witness.has_value()}};
    if (rep.cond2_witness) j["witness"] = vec_json(*rep.cond2_witness);
    return j;
  };
  json named = json::array();
  for (std::size_t i = 0; i < cfg.cases.size(); ++i) {
    const CplqCase& c = cfg.cases[i];
    const std::string name = "case" + std::to_string(i);
    guarded(ctx, name, [&] {
      const CplqReport rep = cplq_check(*c.fn.cplq, c.x);
      named.push_back(emit("named", i, *c.fn.cplq, c.x, rep));
      ctx.check(name + ".partly_smooth", rep.partly_smooth == c.expect, rep.partly_smooth, c.expect, "==");
      if (c.witness_range) {
        const bool ok = rep.cond2_witness && (*rep.cond2_witness)(0) > c.witness_range->first &&
                        (*rep.cond2_witness)(0) < c.witness_range->second;
        ctx.check(name + ".witness", ok, rep.cond2_witness ? (*rep.cond2_witness)(0) : std::nan(""),
                  c.witness_range->second, "in",
                  "(" + format_double(c.witness_range->first) + ", " + format_double(c.witness_range->second) + ")");
      }
    });
  }
  json random = json::array();
  for (int t = 0; t < cfg.random_count; ++t) {
    const std::string name = "random" + std::to_string(t);
    guarded(ctx, name, [&] {
      RandomStream rng(ctx.seed, static_cast<std::uint32_t>(t), kCplqInstanceTag);
      const CplqInstance inst = random_cplq_instance(rng, t);
      const CplqSpotCheck spot = spot_check_cplq(inst.f, ctx.seed + static_cast<std::uint64_t>(t),
                                                 cfg.spot_samples, cfg.spot_box);
      ctx.check(name + ".valid_cplq", spot.well_defined && spot.midpoint_convex,
                std::max(spot.worst_overlap_gap, spot.worst_midpoint_violation), 0.0, "spot");
      random.push_back(emit("random", static_cast<std::size_t>(t), inst.f, inst.x, cplq_check(inst.f, inst.x)));
    });
  }
  ctx.results["cases"] = named;
  ctx.results["random"] = random;
}

// ---------------------------------------------------------------------------
// ge-sensitivity

struct GeCase {
  FunctionSpec fn;
  GEProblem ge;
  Vector xbar;
  Vector pbar;
  Vector q;
  std::vector<double> steps;
  std::optional<double> max_discrepancy;
  std::optional<double> slope_target;
  double slope_tol = 0.15;
};

struct GeConfig {
  std::vector<GeCase> cases;
};

GeConfig parse_ge(Section& root) {
  GeConfig cfg;
  std::vector<Section> cs = root.children("cases", true);
  for (Section& s : cs) {
    GeCase c;
    c.fn = parse_function(s, "function");
    const Index n = c.fn.f->dim();
    const std::string fam = s.string("family", std::nullopt, {"tilt", "linear", "cubic_tilt"});
    if (fam == "tilt") {
      c.ge = tilt_ge(c.fn.f);
    } else if (fam == "cubic_tilt") {
      c.ge = cubic_tilt_ge(c.fn.f, s.number("kappa", 0.1));
    } else {
      const Matrix a = s.matrix("a", std::nullopt, n, n);
      const Matrix cm = s.matrix("c", Matrix::Identity(n, n), n);
      c.ge = linear_ge(c.fn.f, a, cm, s.vector("b", Vector::Zero(n), n));
    }
    c.xbar = s.vector("xbar", std::nullopt, n);
    if (s.has("pbar")) {
      c.pbar = s.vector("pbar", std::nullopt, c.ge.param_dim);
      s.mark("v");
    } else {
      // Every family is affine in p: psi(p, x) = psi(0, x) + D_p psi p. Pick p with -psi(p, xbar) = v.
      s.mark("pbar");
      const Vector v = parse_subgradient(s, "v", *c.fn.f, c.xbar);
      const Vector zero = Vector::Zero(c.ge.param_dim);
      const Matrix dp = c.ge.dpsi_dp(zero, c.xbar);
      const Vector rhs = -v - c.ge.psi(zero, c.xbar);
      c.pbar = dp.completeOrthogonalDecomposition().solve(rhs);
      if ((dp * c.pbar - rhs).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + inf_norm(rhs)))
        s.fail("no parameter p gives -psi(p, xbar) = v");
    }
    c.q = s.vector("q", std::nullopt, c.ge.param_dim);
    c.steps = s.numbers("steps", std::vector<double>{1e-2, 1e-3, 1e-4}, Bound::Positive);
    c.max_discrepancy = s.optional_number("max_discrepancy", Bound::NonNegative);
    c.slope_target = s.optional_number("slope_target");
    c.slope_tol = s.number("slope_tol", c.slope_tol, Bound::Positive);
    cfg.cases.push_back(c);
  }
  root.put("cases", finish_all(cs));
  return cfg;
}

void run_ge(const GeConfig& cfg, Context& ctx) {
  CsvWriter csv = ctx.csv("ge_paths.csv", {"case", "step", "discrepancy"});
  json cases = json::array();
  for (std::size_t i = 0; i < cfg.cases.size(); ++i) {
    const GeCase& c = cfg.cases[i];
    const std::string name = "case" + std::to_string(i);
    guarded(ctx, name, [&] {
      const RegularityReport reg = check_regularity(c.ge, c.xbar, c.pbar);
      ctx.check(name + ".regular", reg.regular, reg.min_singular_value, 0.0, ">");
      const Vector ds = semiderivative(c.ge, c.xbar, c.pbar, c.q);
      const PathCheck pc = solution_path_check(c.ge, c.xbar, c.pbar, c.q, c.steps, {}, ctx.jobs);
      for (std::size_t k = 0; k < pc.steps.size(); ++k)
        csv.row({std::to_string(i), format_double(pc.steps[k]), format_double(pc.discrepancies[k])});
      if (c.max_discrepancy) ctx.le(name + ".max_discrepancy", pc.max_discrepancy, *c.max_discrepancy);
      if (c.slope_target)
        ctx.check(name + ".loglog_slope", std::abs(pc.loglog_slope - *c.slope_target) <= c.slope_tol,
                  pc.loglog_slope, *c.slope_target, "within", "tol " + format_double(c.slope_tol));
      cases.push_back({{"family", c.ge.family}, {"pbar", vec_json(c.pbar)}, {"semiderivative", vec_json(ds)},
                       {"min_singular_value", num_json(reg.min_singular_value)},
                       {"discrepancies", pc.discrepancies}, {"max_discrepancy", pc.max_discrepancy},
                       {"loglog_slope", pc.loglog_slope}});
    });
  }
  ctx.results["cases"] = cases;
}

// ---------------------------------------------------------------------------
// saa

struct SaaConfig {
  StochasticPtr model;
  FunctionSpec fn;
  std::optional<Vector> xbar;
  std::vector<Index> ks;
  int replications = 100;
  SaaOptions opt;
  std::optional<double> frobenius_max;
  std::optional<double> on_manifold_min;
  std::optional<double> z_max;
  std::optional<double> margin_min;
  std::optional<double> slope_target;
  double slope_tol = 0.1;
};

SaaConfig parse_saa(Section& root) {
  SaaConfig cfg;
  Section m = root.child("model");
  if (!root.has("model")) m.fail("missing required model spec");
  m.string("kind", std::nullopt, {"gaussian_linear"});
  const Vector mu0 = m.vector("mu0");
  const Index n = mu0.size();
  if (n == 0) m.fail("'mu0' must not be empty");
  const Matrix cov = m.matrix("cov", std::nullopt, n, n);
  const Matrix a = m.matrix("a", Matrix::Identity(n, n), n, n);
  try {
    cfg.model = make_gaussian_linear(a, mu0, cov);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    m.fail(e.what());
  }
  root.put("model", m.finish());
  cfg.fn = parse_function(root, "function");
  if (cfg.fn.f->dim() != n) root.fail("function and model dimensions differ");
  if (root.has("xbar")) cfg.xbar = root.vector("xbar", std::nullopt, n);
  else root.mark("xbar");
  for (auto k : root.integers("ks", std::nullopt, 1)) cfg.ks.push_back(static_cast<Index>(k));
  cfg.replications = static_cast<int>(root.integer("replications", cfg.replications, 1, 10000000));
  Section w = root.child("solver");
  cfg.opt.warm_steps = static_cast<int>(w.integer("warm_steps", cfg.opt.warm_steps, 0, 1000000));
  cfg.opt.warm_cap = static_cast<int>(w.integer("warm_cap", cfg.opt.warm_cap, 1, 10000000));
  cfg.opt.stable_window = static_cast<int>(w.integer("stable_window", cfg.opt.stable_window, 1, 1000000));
  cfg.opt.ge.newton.tol = w.number("newton_tol", cfg.opt.ge.newton.tol, Bound::Positive);
  cfg.opt.ge.newton.max_iter = static_cast<int>(w.integer("newton_max_iter", cfg.opt.ge.newton.max_iter, 1, 100000));
  if (cfg.opt.warm_cap < cfg.opt.warm_steps) w.fail("'warm_cap' must be at least 'warm_steps'");
  root.put("solver", w.finish());
  Section c = root.child("checks");
  cfg.frobenius_max = c.optional_number("frobenius_max", Bound::NonNegative);
  cfg.on_manifold_min = c.optional_number("on_manifold_min", Bound::NonNegative);
  cfg.z_max = c.optional_number("z_max", Bound::NonNegative);
  cfg.margin_min = c.optional_number("margin_min", Bound::NonNegative);
  cfg.slope_target = c.optional_number("slope_target");
  cfg.slope_tol = c.number("slope_tol", cfg.slope_tol, Bound::Positive);
  root.put("checks", c.finish());
  return cfg;
}

void run_saa_experiment(const SaaConfig& cfg, Context& ctx) {
  const Index n = cfg.model->dim();
  const Vector xbar = cfg.xbar ? *cfg.xbar : reference_solution(cfg.model, cfg.fn.f, Vector::Zero(n), cfg.opt);
  const AsymptoticLaw law = theoretical_law(cfg.model, cfg.fn.f, xbar, cfg.opt);
  ctx.results["xbar"] = vec_json(xbar);
  ctx.results["limit_covariance"] = mat_json(law.limit_covariance);
  ctx.results["ri_margin"] = law.ri_margin;
  ctx.results["tangent_dim"] = law.tangent.cols();
  if (cfg.margin_min) ctx.ge("ri_margin", law.ri_margin, *cfg.margin_min);

  std::vector<std::string> header{"k", "replication", "failed", "on_manifold"};
  for (Index i = 0; i < n; ++i) header.push_back("dev_" + std::to_string(i));
  CsvWriter reps = ctx.csv("saa_replications.csv", header);
  CsvWriter per_k = ctx.csv("saa_summary.csv", {"k", "successes", "frobenius_rel_error", "ambient_rel_error",
                                                "on_manifold_fraction", "max_abs_z", "median_error"});
  json levels = json::array();
  std::vector<double> kx, medians;
  for (Index k : cfg.ks) {
    const std::string name = "k" + std::to_string(k);
    guarded(ctx, name, [&] {
      const EmpiricalReport emp =
          empirical_distribution(cfg.model, cfg.fn.f, xbar, k, cfg.replications, ctx.seed, ctx.jobs, cfg.opt);
      const AsymptoticComparison cmp = compare_asymptotics(emp, law);
      std::vector<double> d;
      for (std::size_t r = 0; r < emp.samples.size(); ++r) {
        std::vector<std::string> row{std::to_string(k), std::to_string(r), bool_cell(emp.failed[r]),
                                     bool_cell(emp.on_manifold[r])};
        for (Index i = 0; i < n; ++i) row.push_back(emp.failed[r] ? "" : format_double(emp.samples[r](i)));
        reps.row(row);
        if (!emp.failed[r]) d.push_back(emp.samples[r].norm() / std::sqrt(static_cast<double>(k)));
      }
      std::sort(d.begin(), d.end());
      const double med = d.empty() ? std::nan("")
                                   : (d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]));
      kx.push_back(static_cast<double>(k));
      medians.push_back(med);
      per_k.row({std::to_string(k), std::to_string(emp.successes), format_double(cmp.frobenius_rel_error),
                 format_double(cmp.ambient_rel_error), format_double(emp.on_manifold_fraction),
                 format_double(cmp.max_abs_z), format_double(med)});
      if (cfg.frobenius_max) ctx.le(name + ".frobenius_rel_error", cmp.frobenius_rel_error, *cfg.frobenius_max);
      if (cfg.on_manifold_min) ctx.ge(name + ".on_manifold_fraction", emp.on_manifold_fraction, *cfg.on_manifold_min);
      if (cfg.z_max) ctx.le(name + ".max_abs_z", cmp.max_abs_z, *cfg.z_max);
      json lv = {{"k", k},
                 {"successes", emp.successes},
                 {"failure_counts", emp.failure_counts},
                 {"mean", vec_json(emp.mean)},
                 {"frobenius_rel_error", num_json(cmp.frobenius_rel_error)},
                 {"ambient_rel_error", num_json(cmp.ambient_rel_error)},
                 {"z_scores", json::array()},
                 {"on_manifold_fraction", emp.on_manifold_fraction},
                 {"median_error", num_json(med)}};
      for (double z : cmp.z_scores) lv["z_scores"].push_back(num_json(z));
      if (emp.covariance) lv["covariance"] = mat_json(*emp.covariance);
      levels.push_back(lv);
    });
  }
  ctx.results["levels"] = levels;
  if (kx.size() >= 2) {
    const double slope = loglog_slope(kx, medians);
    ctx.results["median_loglog_slope"] = slope;
    if (cfg.slope_target)
      ctx.check("median_loglog_slope", std::abs(slope - *cfg.slope_target) <= cfg.slope_tol, slope,
                *cfg.slope_target, "within", "tol " + format_double(cfg.slope_tol));
  } else if (cfg.slope_target) {
    ctx.fail("median_loglog_slope", "needs at least two sample sizes");
  }
}

// ---------------------------------------------------------------------------
// counterexample

struct CounterexampleConfig {
  int k_min = 5, k_max = 30, subdivisions = 8;
  std::vector<double> extra{-1e-3, -1e-5, 0.0};
  double quotient_max = 1.0;
  int i_min = -20, i_max = -1;
  double ratio = 2.0, ratio_tol = 1e-9;
  double integral_x = 2.0, integral_expect = 20.0 / 7.0, integral_tol = 1e-9;
  std::vector<ProbeCase> probes;
  std::vector<double> x1s{1e-1, 1e-2, 1e-3, 1e-4};
  int cubic_grid = 21;
};

CounterexampleConfig parse_counterexample(Section& root, std::uint64_t seed) {
  CounterexampleConfig cfg;
  Section b = root.child("bound");
  cfg.k_min = static_cast<int>(b.integer("k_min", cfg.k_min, -kDyadicMax, -kDyadicMin - 1));
  cfg.k_max = static_cast<int>(b.integer("k_max", cfg.k_max, cfg.k_min, -kDyadicMin - 1));
  cfg.subdivisions = static_cast<int>(b.integer("subdivisions", cfg.subdivisions, 1, 1024));
  cfg.extra = b.numbers("extra_points", cfg.extra, Bound::Any, false);
  for (double x : cfg.extra)
    if (x >= std::ldexp(1.0, kDyadicMax + 1)) b.fail("'extra_points' beyond the modelled dyadic range");
  cfg.quotient_max = b.number("quotient_max", cfg.quotient_max, Bound::Positive);
  root.put("bound", b.finish());

  Section k = root.child("kinks");
  cfg.i_min = static_cast<int>(k.integer("i_min", cfg.i_min, kDyadicMin + 1, kDyadicMax));
  cfg.i_max = static_cast<int>(k.integer("i_max", cfg.i_max, cfg.i_min, kDyadicMax));
  cfg.ratio = k.number("ratio", cfg.ratio, Bound::Positive);
  cfg.ratio_tol = k.number("tol", cfg.ratio_tol, Bound::Positive);
  root.put("kinks", k.finish());

  Section in = root.child("integral");
  cfg.integral_x = in.number("x", cfg.integral_x);
  if (cfg.integral_x >= std::ldexp(1.0, kDyadicMax + 1)) in.fail("'x' beyond the modelled dyadic range");
  cfg.integral_expect = in.number("expect", cfg.integral_expect);
  cfg.integral_tol = in.number("tol", cfg.integral_tol, Bound::Positive);
  root.put("integral", in.finish());

  const NumericD2Options oracle = parse_oracle(root);
  FunctionSpec dyadic{"dyadic", make_dyadic_antiderivative(), std::nullopt};
  if (!root.has("probes")) {
    json def = json::array();
    def.push_back({{"x", {0.0}}, {"expect", "stable"}});
    for (int e = 1; e <= 10; ++e) def.push_back({{"x", {std::ldexp(1.0, -e)}}, {"expect", "unstable"}});
    Section tmp(json{{"probes", def}}, root.path());
    cfg.probes = parse_probes(tmp, oracle, seed, dyadic);
    root.put("probes", tmp.finish()["probes"]);
  } else {
    cfg.probes = parse_probes(root, oracle, seed, dyadic);
  }
  for (auto& p : cfg.probes) p.opt.oracle.seed = seed;

  Section c = root.child("abs_cubic");
  cfg.x1s = c.numbers("x1", cfg.x1s, Bound::Positive);
  cfg.cubic_grid = static_cast<int>(c.integer("grid", cfg.cubic_grid, 2, 10000));
  root.put("abs_cubic", c.finish());
  return cfg;
}

double quadrature_f(double x) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  if (x <= 0.0) return 0.0;
  // One call per affine piece of g.
  const double floor_pt = std::ldexp(1.0, kDyadicMin);
  double total = 0.0;
  double hi = x;
  while (hi > floor_pt) {
    const int i = dyadic_index(hi);
    const double lo = std::max(std::ldexp(1.0, std::ldexp(1.0, i) == hi ? i - 1 : i), floor_pt);
    total += GK::integrate(g_eval, lo, hi, 0, 1e-15);
    hi = lo;
  }
  return total + GK::integrate(g_eval, 0.0, hi, 0, 1e-15);
}

void run_counterexample(const CounterexampleConfig& cfg, Context& ctx) {
  CsvWriter bound = ctx.csv("bound_check.csv", {"level", "points", "pairs", "max_quotient", "min_slope",
                                                "max_nonpositive_diff"});
  std::vector<double> grid;
  json levels = json::array();
  for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
    std::vector<double> lv;
    for (int m = 0; m < cfg.subdivisions; ++m) lv.push_back(std::ldexp(1.0 + static_cast<double>(m) / cfg.subdivisions, -k));
    grid.insert(grid.end(), lv.begin(), lv.end());
    const BoundReport r = strict_diff_bound_check(lv);
    bound.row({std::to_string(k), std::to_string(lv.size()), std::to_string(r.pairs), format_double(r.max_quotient),
               format_double(r.min_slope), format_double(r.max_nonpositive_diff)});
  }
  grid.insert(grid.end(), cfg.extra.begin(), cfg.extra.end());
  const BoundReport all = strict_diff_bound_check(grid);
  bound.row({"all", std::to_string(grid.size()), std::to_string(all.pairs), format_double(all.max_quotient),
             format_double(all.min_slope), format_double(all.max_nonpositive_diff)});
  ctx.le("bound.max_quotient", all.max_quotient, cfg.quotient_max);
  ctx.ge("bound.min_slope", all.min_slope, 0.0);
  ctx.le("bound.max_nonpositive_diff", all.max_nonpositive_diff, 0.0);
  ctx.results["bound"] = {{"pairs", all.pairs}, {"max_quotient", all.max_quotient}, {"min_slope", all.min_slope},
                          {"max_nonpositive_diff", all.max_nonpositive_diff}};

  CsvWriter kinks = ctx.csv("kink_slopes.csv", {"i", "left", "right", "ratio"});
  double worst = 0.0;
  for (int i = cfg.i_min; i <= cfg.i_max; ++i) {
    const KinkSlopes s = kink_slopes(i);
    const double ratio = s.right / s.left;
    worst = std::max(worst, std::abs(ratio - cfg.ratio));
    kinks.row({std::to_string(i), format_double(s.left), format_double(s.right), format_double(ratio)});
  }
  ctx.le("kinks.max_ratio_error", worst, cfg.ratio_tol);
  ctx.results["kinks"] = {{"max_ratio_error", worst}};

  const double closed = f_integral_eval(cfg.integral_x);
  const double quad = quadrature_f(cfg.integral_x);
  ctx.le("integral.closed_vs_expect", std::abs(closed - cfg.integral_expect), cfg.integral_tol);
  ctx.le("integral.quadrature_vs_expect", std::abs(quad - cfg.integral_expect), cfg.integral_tol);
  ctx.le("integral.closed_vs_quadrature", std::abs(closed - quad), cfg.integral_tol);
  ctx.results["integral"] = {{"x", cfg.integral_x}, {"closed_form", closed}, {"quadrature", quad}};

  run_probes(cfg.probes, ctx);

  guarded(ctx, "abs_cubic", [&] {
    const ContinuityReport c = abs_cubic_continuity(cfg.x1s, cfg.cubic_grid);
    CsvWriter cub = ctx.csv("abs_cubic.csv", {"x1", "max_discrepancy"});
    bool decreasing = true;
    for (std::size_t i = 0; i < c.x1_values.size(); ++i) {
      cub.row({format_double(c.x1_values[i]), format_double(c.max_discrepancy[i])});
      if (i > 0 && !(c.max_discrepancy[i] < c.max_discrepancy[i - 1])) decreasing = false;
    }
    ctx.check("abs_cubic.discrepancy_decreasing", decreasing, c.rate, 0.0, "monotone");
    ctx.results["abs_cubic"] = {{"max_discrepancy", c.max_discrepancy}, {"rate", c.rate}};
  });
}

// ---------------------------------------------------------------------------
// Dispatch

struct Parsed {
  json normalized;
  std::string subcommand;
  std::uint64_t seed = 42;
  int jobs = 1;
  fs::path out;
  std::optional<ProxConfig> prox;
  std::optional<SecondOrderConfig> second;
  std::optional<CplqConfig> cplq;
  std::optional<GeConfig> ge;
  std::optional<SaaConfig> saa;
  std::optional<CounterexampleConfig> counter;
};

Parsed parse(const json& config, const RunOverrides& ov) {
  Section root(config, "");
  Parsed p;
  p.subcommand = root.string("subcommand", std::nullopt, subcommands());
  p.seed = root.seed("seed", 42);
  if (ov.seed) root.put("seed", p.seed = *ov.seed);
  p.jobs = static_cast<int>(root.integer("jobs", 1, 1, 1024));
  if (ov.jobs) {
    if (*ov.jobs < 1) root.fail("'jobs' must be at least 1");
    root.put("jobs", p.jobs = *ov.jobs);
  }
  p.out = root.string("out", "results");
  if (ov.out_dir) root.put("out", (p.out = *ov.out_dir).string());
  root.string("name", p.subcommand);
  if (p.subcommand == "prox-jacobian") p.prox = parse_prox(root);
  else if (p.subcommand == "second-order") p.second = parse_second_order(root, p.seed);
  else if (p.subcommand == "check-partly-smooth") p.cplq = parse_cplq_config(root);
  else if (p.subcommand == "ge-sensitivity") p.ge = parse_ge(root);
  else if (p.subcommand == "saa") p.saa = parse_saa(root);
  else p.counter = parse_counterexample(root, p.seed);
  p.normalized = root.finish();
  return p;
}

json assertion_json(const Assertion& a) {
  json j = {{"name", a.name}, {"passed", a.passed}, {"value", num_json(a.value)},
            {"threshold", num_json(a.threshold)}, {"op", a.op}};
  if (!a.detail.empty()) j["detail"] = a.detail;
  return j;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"check-partly-smooth", "second-order", "prox-jacobian",
                                              "ge-sensitivity",      "saa",          "counterexample"};
  return names;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::ConfigInvalid, "cannot read config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
}

json normalize_config(const json& config, const RunOverrides& overrides) {
  return parse(config, overrides).normalized;
}

ExperimentResult run_experiment(const json& config, const RunOverrides& overrides) {
  const Parsed p = parse(config, overrides);
  Context ctx;
  ctx.out = p.out;
  ctx.seed = p.seed;
  ctx.jobs = p.jobs;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw Error(ErrorKind::ConfigInvalid, "cannot create output directory " + ctx.out.string());

  const auto t0 = std::chrono::steady_clock::now();
  guarded(ctx, "run", [&] {
    if (p.prox) run_prox(*p.prox, ctx);
    else if (p.second) run_second_order(*p.second, ctx);
    else if (p.cplq) run_cplq(*p.cplq, ctx);
    else if (p.ge) run_ge(*p.ge, ctx);
    else if (p.saa) run_saa_experiment(*p.saa, ctx);
    else run_counterexample(*p.counter, ctx);
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ExperimentResult res;
  res.assertions = ctx.checks;
  res.files = ctx.files;
  bool ok = true;
  json checks = json::array();
  json failures = json::array();
  for (const Assertion& a : ctx.checks) {
    ok = ok && a.passed;
    checks.push_back(assertion_json(a));
    if (!a.passed) failures.push_back(assertion_json(a));
  }
  res.exit_code = ok ? 0 : 1;
  json files = json::array();
  for (const auto& f : ctx.files) files.push_back(f.filename().string());
  res.summary = {{"schema_version", kSchemaVersion},
                 {"subcommand", p.subcommand},
                 {"seed", p.seed},
                 {"jobs", p.jobs},
                 {"config", p.normalized},
                 {"versions",
                  {{"psmooth", kPsmoothVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}}},
                 {"results", ctx.results},
                 {"assertions", checks},
                 {"failures", failures},
                 {"passed", ok},
                 {"files", files},
                 {"timing", {{"wall_seconds", wall}}}};
  std::ofstream os(ctx.out / "summary.json");
  os << res.summary.dump(2) << '\n';
  res.files.push_back(ctx.out / "summary.json");
  return res;
}

}  // namespace psmooth
