#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "fertsae/region_graph.hpp"

namespace fertsae {

enum class StructureKind { iid, rw1, rw2, icar, bym2, kronecker };

std::string to_string(StructureKind kind);

/// Sparse symmetric PSD structure matrix for one random-effect family, with
/// its eigendecomposition, null-space constraints, and generalized inverse.
///
/// Scaling follows the generalized-inverse convention: when `scaled`, the
/// geometric mean of the marginal variances (diagonal of the pseudo-inverse)
/// is 1, per connected component for ICAR kinds. Isolated ICAR nodes are
/// pinned to zero by their own constraint and excluded from scaling.
struct StructureMatrix {
  StructureKind kind = StructureKind::iid;
  int dim = 0;
  Eigen::SparseMatrix<double> Q;
  bool scaled = false;
  std::vector<double> component_scale;  // scaling factor(s) applied
  int rank = 0;

  /// Independent null-space-spanning constraint vectors in their natural form
  /// (component indicators, slice sums, centered linear trends).
  std::vector<Eigen::VectorXd> constraints;
  /// Orthonormal null-space basis (dim x nullity), from the eigendecomposition.
  Eigen::MatrixXd null_basis;

  Eigen::VectorXd eigenvalues;   // ascending, of the (scaled) matrix
  Eigen::MatrixXd eigenvectors;  // matching columns
  Eigen::MatrixXd gen_inverse;   // Moore-Penrose pseudo-inverse (dense)

  /// Connected component per node (single zero component unless ICAR).
  std::vector<int> component;

  int nullity() const { return dim - rank; }
  Eigen::VectorXd marginal_variances() const { return gen_inverse.diagonal(); }
};

/// RW1 (dim >= 2), RW2 (dim >= 3) and IID structures.
StructureMatrix build_structure(StructureKind kind, int dim, bool scale);

/// ICAR on a region adjacency: degree diagonal, -1 off-diagonal for
/// neighbors. Disconnected graphs get per-component sum-to-zero constraints
/// and per-component scaling.
StructureMatrix build_icar(const RegionGraph& graph, bool scale);

/// BYM2 carrier: dimension 2n, block diagonal [I_n ; scaled ICAR]. The first
/// half holds the IID component e, the second the structured component S.
StructureMatrix build_bym2(const RegionGraph& graph);

/// Type-IV interaction: Kronecker product A (x) B of two structured matrices,
/// row index = a * dim(B) + b. Constraints are the sum-to-zero slices spanning
/// the null space; output is unscaled (pass through scale_structure for model
/// use).
StructureMatrix build_interaction(const StructureMatrix& A, const StructureMatrix& B);

/// Rescales so the geometric mean of marginal variances is 1 (per component
/// for ICAR). No-op for IID.
StructureMatrix scale_structure(StructureMatrix s);

}  // namespace fertsae
