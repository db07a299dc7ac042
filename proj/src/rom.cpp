#include "klrom/rom.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <sstream>

#include "klrom/errors.hpp"
#include "klrom/parallel.hpp"
#include "klrom/pod.hpp"

namespace klrom {

Eigen::SparseMatrix<double> lower_triangle(const Eigen::SparseMatrix<double>& K) {
  Eigen::SparseMatrix<double> L = K.triangularView<Eigen::Lower>();
  L.makeCompressed();
  return L;
}

SparsityPattern SparsityPattern::union_of(const std::vector<Eigen::SparseMatrix<double>>& lowers) {
  SparsityPattern p;
  if (lowers.empty()) return p;
  p.size = static_cast<int>(lowers.front().rows());
  Eigen::SparseMatrix<double> acc(p.size, p.size);
  for (const auto& L : lowers) {
    Eigen::SparseMatrix<double> ones = L;
    for (int k = 0; k < ones.nonZeros(); ++k) ones.valuePtr()[k] = 1.0;
    acc += ones;
  }
  acc.makeCompressed();
  for (int c = 0; c < acc.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(acc, c); it; ++it) {
      p.rows.push_back(static_cast<int>(it.row()));
      p.cols.push_back(c);
    }
  return p;
}

Eigen::VectorXd SparsityPattern::gather(const Eigen::SparseMatrix<double>& lower) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nnz());
  int k = 0;
  for (int c = 0; c < lower.outerSize(); ++c) {
    while (k < nnz() && cols[k] < c) ++k;
    for (Eigen::SparseMatrix<double>::InnerIterator it(lower, c); it; ++it) {
      while (k < nnz() && cols[k] == c && rows[k] < it.row()) ++k;
      if (k < nnz() && cols[k] == c && rows[k] == it.row()) v[k] = it.value();
    }
  }
  return v;
}

Eigen::SparseMatrix<double> SparsityPattern::scatter(const Eigen::VectorXd& values) const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * rows.size());
  for (int k = 0; k < nnz(); ++k) {
    t.emplace_back(rows[k], cols[k], values[k]);
    if (rows[k] != cols[k]) t.emplace_back(cols[k], rows[k], values[k]);
  }
  Eigen::SparseMatrix<double> K(size, size);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

Eigen::MatrixXd latin_hypercube(const ParameterBox& box, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(box.dim(), n);
  for (int m = 0; m < box.dim(); ++m) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i)
      out(m, i) = box.lower[m] + (box.upper[m] - box.lower[m]) * (perm[i] + unit(rng)) / n;
  }
  return out;
}

Eigen::MatrixXd uniform_samples(const ParameterBox& box, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(box.dim(), n);
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < box.dim(); ++m) out(m, i) = box.lower[m] + (box.upper[m] - box.lower[m]) * unit(rng);
  return out;
}

Eigen::VectorXd extend_solution(const Eigen::VectorXd& values, const std::vector<int>& active, int size) {
  if (values.size() != static_cast<Eigen::Index>(active.size()))
    throw ContractError("extend_solution: " + std::to_string(values.size()) + " values for " +
                        std::to_string(active.size()) + " active positions");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i] < 0 || active[i] >= size) throw ContractError("extend_solution: index out of range");
    out[active[i]] = values[i];
  }
  return out;
}

Eigen::VectorXd restrict_solution(const Eigen::VectorXd& full, const std::vector<int>& active) {
  Eigen::VectorXd out(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) out[i] = full[active[i]];
  return out;
}

Eigen::SparseMatrix<double> extended_operator(const FomSystem& sys) {
  Eigen::SparseMatrix<double> L = lower_triangle(sys.stiffness);
  for (int i = 0; i < sys.size(); ++i)
    if (sys.eliminated(i)) L.coeffRef(i, i) = 0.0;
  L.prune(0.0);
  L.makeCompressed();
  return L;
}

namespace {

std::string fmt_mu(const Eigen::VectorXd& mu) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (int i = 0; i < mu.size(); ++i) os << (i ? ", " : "") << mu[i];
  os << ")";
  return os.str();
}

}  // namespace

SnapshotSet compute_snapshots(const Model& model, const Eigen::MatrixXd& parameters) {
  const int ns = static_cast<int>(parameters.cols());
  const int n = model.num_dofs();
  SnapshotSet s;
  s.parameters = parameters;
  s.solutions.resize(n, ns);
  s.loads.resize(n, ns);
  s.stiffness_lower.resize(ns);
  parallel_for(ns, [&](int j, int) {
    const Eigen::VectorXd mu = parameters.col(j);
    try {
      const FomSystem sys = assemble_fom(model, mu);
      const FomSolution sol = solve_fom(sys);
      s.solutions.col(j) = sol.u;
      s.loads.col(j) = sys.load;
      s.stiffness_lower[j] = lower_triangle(sys.stiffness);
    } catch (const Error& e) {
      throw Error("full-order solve failed at mu = " + fmt_mu(mu) + ": " + e.what());
    }
  });
  return s;
}

ClusterRom train_cluster(const SnapshotSet& snaps, const SparsityPattern& pattern,
                         const Eigen::SparseMatrix<double>& gram, const std::vector<int>& members,
                         const ParameterBox& box, const RomSettings& settings) {
  ClusterRom c;
  c.samples = members;
  const int nk = static_cast<int>(members.size());
  const int n = static_cast<int>(snaps.solutions.rows());

  Eigen::MatrixXd Su(n, nk), Sf(n, nk), Sa(pattern.nnz(), nk), P(box.dim(), nk);
  for (int j = 0; j < nk; ++j) {
    Su.col(j) = snaps.solutions.col(members[j]);
    Sf.col(j) = snaps.loads.col(members[j]);
    Sa.col(j) = pattern.gather(snaps.stiffness_lower[members[j]]);
    P.col(j) = snaps.parameters.col(members[j]);
  }
  const PodResult pr = pod(Su, &gram, settings.eps_pod, settings.max_basis);
  c.basis = pr.basis;
  c.singular_values = pr.singular_values;

  const double eps = settings.resolved_eps_deim();
  c.stiffness = deim_train(Sa, eps, settings.max_terms);
  c.load = deim_train(Sf, eps, settings.max_terms);

  Eigen::MatrixXd ta(nk, c.stiffness.size()), tf(nk, c.load.size());
  for (int j = 0; j < nk; ++j) {
    ta.row(j) = c.stiffness.theta_from_snapshot(Sa.col(j)).transpose();
    tf.row(j) = c.load.theta_from_snapshot(Sf.col(j)).transpose();
  }
  c.theta_a = RbfInterpolant::fit(P, ta, box.lower, box.upper);
  c.theta_f = RbfInterpolant::fit(P, tf, box.lower, box.upper);

  for (int q = 0; q < c.stiffness.size(); ++q) {
    const Eigen::SparseMatrix<double> Kq = pattern.scatter(c.stiffness.modes.col(q));
    const Eigen::MatrixXd KV = Kq * c.basis;
    Eigen::MatrixXd red = c.basis.transpose() * KV;
    c.reduced_a.push_back(0.5 * (red + red.transpose()));
  }
  c.reduced_f = c.basis.transpose() * c.load.modes;
  return c;
}

RomArtifact train_from_snapshots(const Model& model, const RomSettings& settings, const SnapshotSet& snaps) {
  RomArtifact art;
  art.parameters = model.parameters;
  art.settings = settings;
  art.num_dofs = model.num_dofs();
  art.training = snaps.parameters;
  art.pattern = SparsityPattern::union_of(snaps.stiffness_lower);
  art.gram = h2_gram(model, model.parameters.center());
  art.clusters = kmeans(snaps.parameters, settings.num_clusters, settings.seed);
  art.locals.resize(art.clusters.num_clusters());
  for (int k = 0; k < art.clusters.num_clusters(); ++k) {
    const auto members = art.clusters.members(k);
    art.locals[k] = train_cluster(snaps, art.pattern, art.gram, members, art.parameters, settings);
  }
  return art;
}

RomArtifact train(const Model& model, const RomSettings& settings, SnapshotSet* keep) {
  if (settings.num_samples < 1) throw ConfigError("rom.num_samples must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd params = latin_hypercube(model.parameters, settings.num_samples, settings.seed);
  SnapshotSet snaps = compute_snapshots(model, params);
  RomArtifact art = train_from_snapshots(model, settings, snaps);
  art.offline_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (keep) *keep = std::move(snaps);
  return art;
}

namespace {

struct ReducedSystem {
  int cluster = 0;
  Eigen::VectorXd theta_a, theta_f;
  Eigen::MatrixXd K;
  Eigen::VectorXd f;
};

ReducedSystem reduced_system(const RomArtifact& art, const ParamVector& mu) {
  if (mu.size() != art.parameters.dim())
    throw DomainError("parameter vector has " + std::to_string(mu.size()) + " entries, artifact expects " +
                      std::to_string(art.parameters.dim()));
  ReducedSystem r;
  r.cluster = art.clusters.nearest(mu);
  const ClusterRom& c = art.locals[r.cluster];
  r.theta_a = c.theta_a.eval(mu);
  r.theta_f = c.theta_f.eval(mu);
  r.K = Eigen::MatrixXd::Zero(c.dim(), c.dim());
  for (int q = 0; q < static_cast<int>(c.reduced_a.size()); ++q) r.K += r.theta_a[q] * c.reduced_a[q];
  r.f = c.reduced_f * r.theta_f;
  return r;
}

Eigen::VectorXd reduced_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& f) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || d.size() == 0 || !(d.minCoeff() > 1e-14 * d.maxCoeff()))
    throw ReducedSolveError("reduced stiffness matrix is singular");
  return ldlt.solve(f);
}

}  // namespace

RomSolution rom_solve(const RomArtifact& art, const ParamVector& mu, bool expand) {
  RomSolution s;
  s.extrapolated = !art.parameters.contains(mu);
  ReducedSystem r = reduced_system(art, mu);
  s.cluster = r.cluster;
  s.coeffs = reduced_solve(r.K, r.f);
  s.compliance = 0.5 * s.coeffs.dot(r.f);
  if (expand) s.full = art.locals[r.cluster].basis * s.coeffs;
  s.load = std::move(r.f);
  s.stiffness = std::move(r.K);
  return s;
}

double rom_compliance(const RomArtifact& art, const ParamVector& mu, Eigen::VectorXd* gradient) {
  const ReducedSystem r = reduced_system(art, mu);
  const Eigen::VectorXd u = reduced_solve(r.K, r.f);
  if (gradient) {
    const ClusterRom& c = art.locals[r.cluster];
    const Eigen::MatrixXd ga = c.theta_a.grad(mu);  // Q_a x M
    const Eigen::MatrixXd gf = c.theta_f.grad(mu);  // Q_f x M
    const Eigen::VectorXd uf = c.reduced_f.transpose() * u;  // u . f_q
    Eigen::VectorXd uku(c.reduced_a.size());
    for (std::size_t q = 0; q < c.reduced_a.size(); ++q) uku[q] = u.dot(c.reduced_a[q] * u);
    *gradient = gf.transpose() * uf - 0.5 * ga.transpose() * uku;
  }
  return 0.5 * u.dot(r.f);
}

double rom_error(const Eigen::VectorXd& rom, const Eigen::VectorXd& fom, const Eigen::SparseMatrix<double>& X) {
  const double ref = fom.dot(X * fom);
  if (!(ref > 0.0)) throw UndefinedRelativeError("relative error undefined for a zero reference solution");
  const Eigen::VectorXd e = rom - fom;
  return std::sqrt(std::max(0.0, e.dot(X * e)) / ref);
}

}  // namespace klrom
