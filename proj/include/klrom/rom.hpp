#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "klrom/deim.hpp"
#include "klrom/kmeans.hpp"
#include "klrom/model.hpp"
#include "klrom/rbf.hpp"

namespace klrom {

struct RomSettings {
  int num_samples = 100;
  int num_clusters = 1;
  double eps_pod = 1e-7;
  double eps_deim = 0.0;  // 0 means eps_pod / 100
  std::uint64_t seed = 1;
  int max_basis = 0;  // 0 means unlimited
  int max_terms = 0;

  double resolved_eps_deim() const { return eps_deim > 0.0 ? eps_deim : eps_pod / 100.0; }
};

/// Lower-triangular sparsity pattern shared by all operator snapshots, column-major.
struct SparsityPattern {
  int size = 0;  // matrix dimension
  std::vector<int> rows, cols;

  int nnz() const { return static_cast<int>(rows.size()); }
  /// Pattern union of the lower triangles of the given matrices.
  static SparsityPattern union_of(const std::vector<Eigen::SparseMatrix<double>>& lowers);
  /// Values of the lower triangle of a matrix on this pattern (entries outside are dropped).
  Eigen::VectorXd gather(const Eigen::SparseMatrix<double>& lower) const;
  /// Symmetric matrix from pattern values.
  Eigen::SparseMatrix<double> scatter(const Eigen::VectorXd& values) const;
};

/// Lower triangle of a symmetric sparse matrix.
Eigen::SparseMatrix<double> lower_triangle(const Eigen::SparseMatrix<double>& K);

struct ClusterRom {
  std::vector<int> samples;         // training sample indices in this cluster
  Eigen::MatrixXd basis;            // N_dofs x N, X-orthonormal
  Eigen::VectorXd singular_values;  // solution POD
  DeimApprox stiffness;             // modes on the sparsity pattern
  DeimApprox load;
  RbfInterpolant theta_a, theta_f;
  std::vector<Eigen::MatrixXd> reduced_a;  // V^T K_q V
  Eigen::MatrixXd reduced_f;               // columns V^T f_q

  int dim() const { return static_cast<int>(basis.cols()); }
};

struct RomArtifact {
  ParameterBox parameters;
  RomSettings settings;
  int num_dofs = 0;
  Eigen::MatrixXd training;  // M x N_s
  ClusterModel clusters;
  SparsityPattern pattern;
  Eigen::SparseMatrix<double> gram;
  std::vector<ClusterRom> locals;
  double offline_seconds = 0.0;
  std::string model_name;
};

Eigen::MatrixXd latin_hypercube(const ParameterBox& box, int n, std::uint64_t seed);
Eigen::MatrixXd uniform_samples(const ParameterBox& box, int n, std::uint64_t seed);

/// Lower triangle of the stiffness with eliminated rows and columns zeroed (no identity block).
Eigen::SparseMatrix<double> extended_operator(const FomSystem& sys);

/// Zero extension of values on `active` background positions.
Eigen::VectorXd extend_solution(const Eigen::VectorXd& values, const std::vector<int>& active, int size);
Eigen::VectorXd restrict_solution(const Eigen::VectorXd& full, const std::vector<int>& active);

/// Snapshots of one training run, kept for diagnostics and tests.
struct SnapshotSet {
  Eigen::MatrixXd parameters;  // M x N_s
  Eigen::MatrixXd solutions;   // N_dofs x N_s
  Eigen::MatrixXd loads;       // N_dofs x N_s
  std::vector<Eigen::SparseMatrix<double>> stiffness_lower;
};

SnapshotSet compute_snapshots(const Model& model, const Eigen::MatrixXd& parameters);

/// Offline stage: snapshots, clustering, per-cluster POD, DEIM, RBF and projected terms.
RomArtifact train(const Model& model, const RomSettings& settings, SnapshotSet* keep = nullptr);

/// Offline stage on precomputed snapshots.
RomArtifact train_from_snapshots(const Model& model, const RomSettings& settings, const SnapshotSet& snaps);

/// Trains the per-cluster quantities for given members.
ClusterRom train_cluster(const SnapshotSet& snaps, const SparsityPattern& pattern,
                         const Eigen::SparseMatrix<double>& gram, const std::vector<int>& members,
                         const ParameterBox& box, const RomSettings& settings);

struct RomSolution {
  int cluster = 0;
  Eigen::VectorXd coeffs;  // u_N
  Eigen::VectorXd full;    // V u_N (empty unless expanded)
  Eigen::VectorXd load;    // f_N
  Eigen::MatrixXd stiffness;  // K_N
  double compliance = 0.0;
  bool extrapolated = false;
};

RomSolution rom_solve(const RomArtifact& art, const ParamVector& mu, bool expand = true);

/// Reduced compliance and its exact parameter gradient from the affine decomposition.
double rom_compliance(const RomArtifact& art, const ParamVector& mu, Eigen::VectorXd* gradient = nullptr);

/// sqrt(e^T X e / u^T X u); throws UndefinedRelativeError for a zero reference.
double rom_error(const Eigen::VectorXd& rom, const Eigen::VectorXd& fom, const Eigen::SparseMatrix<double>& X);

}  // namespace klrom
