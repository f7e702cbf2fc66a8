#include "fertsae/structures.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fertsae/errors.hpp"

namespace fertsae {

namespace {

constexpr double kNullTolFactor = 1e-9;
constexpr int kKroneckerDimCap = 5000;  // dense eigendecomposition bound

double null_threshold(const Eigen::VectorXd& eigenvalues) {
  double max_ev = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return std::max(max_ev * kNullTolFactor, 1e-12);
}

// Eigendecomposition-derived fields: rank, null basis, generalized inverse.
void finalize_spectral(StructureMatrix& s) {
  Eigen::MatrixXd dense = Eigen::MatrixXd(s.Q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  require(eig.info() == Eigen::Success, ErrorCode::numeric,
          "eigendecomposition failed for " + to_string(s.kind));
  s.eigenvalues = eig.eigenvalues();
  s.eigenvectors = eig.eigenvectors();
  double tol = null_threshold(s.eigenvalues);

  int nullity = 0;
  for (int i = 0; i < s.dim; ++i)
    if (s.eigenvalues[i] < tol) ++nullity;
  s.rank = s.dim - nullity;
  s.null_basis = s.eigenvectors.leftCols(nullity);

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.dim);
  for (int i = 0; i < s.dim; ++i)
    if (s.eigenvalues[i] >= tol) inv[i] = 1.0 / s.eigenvalues[i];
  s.gen_inverse = s.eigenvectors * inv.asDiagonal() * s.eigenvectors.transpose();

  require(static_cast<int>(s.constraints.size()) == nullity, ErrorCode::numeric,
          to_string(s.kind) + ": constraint count " +
              std::to_string(s.constraints.size()) + " does not match nullity " +
              std::to_string(nullity));
}

Eigen::VectorXd ones(int n) { return Eigen::VectorXd::Ones(n); }

Eigen::VectorXd centered_linear(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = i - (n - 1) / 2.0;
  return v;
}

Eigen::SparseMatrix<double> difference_penalty(int dim, int order) {
  // Q = D' D with D the order-th difference operator.
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 0; k < order; ++k) {
    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(D.rows() - 1, D.rows());
    for (int i = 0; i < step.rows(); ++i) {
      step(i, i) = -1;
      step(i, i + 1) = 1;
    }
    D = (step * D).eval();
  }
  Eigen::MatrixXd Q = D.transpose() * D;
  return Q.sparseView(1.0, 1e-300);
}

}  // namespace

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::iid: return "iid";
    case StructureKind::rw1: return "rw1";
    case StructureKind::rw2: return "rw2";
    case StructureKind::icar: return "icar";
    case StructureKind::bym2: return "bym2";
    case StructureKind::kronecker: return "kronecker";
  }
  return "?";
}

StructureMatrix scale_structure(StructureMatrix s) {
  if (s.kind == StructureKind::iid || s.scaled) {
    s.scaled = true;
    if (s.component_scale.empty()) s.component_scale.assign(1, 1.0);
    return s;
  }
  require(s.eigenvalues.size() == s.dim, ErrorCode::invalid_argument,
          "scale_structure needs a finalized structure");

  int n_comp = 1;
  for (int c : s.component) n_comp = std::max(n_comp, c + 1);

  Eigen::VectorXd marginal = s.gen_inverse.diagonal();
  s.component_scale.assign(n_comp, 1.0);
  double tol = 1e-12;

  std::vector<double> log_sum(n_comp, 0.0);
  std::vector<int> count(n_comp, 0);
  for (int i = 0; i < s.dim; ++i) {
    int c = s.component.empty() ? 0 : s.component[i];
    if (marginal[i] > tol) {
      log_sum[c] += std::log(marginal[i]);
      count[c] += 1;
    }
  }
  for (int c = 0; c < n_comp; ++c)
    if (count[c] > 0) s.component_scale[c] = std::exp(log_sum[c] / count[c]);

  // Multiplying Q by the geometric mean of marginal variances divides the
  // marginal variances by it.
  if (n_comp == 1) {
    s.Q = (s.Q * s.component_scale[0]).eval();
  } else {
    Eigen::SparseMatrix<double> scaled = s.Q;
    for (int k = 0; k < scaled.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(scaled, k); it; ++it) {
        int c = s.component[it.row()];
        it.valueRef() *= s.component_scale[c];
      }
    s.Q = scaled;
  }
  s.scaled = true;
  finalize_spectral(s);
  return s;
}

StructureMatrix build_structure(StructureKind kind, int dim, bool scale) {
  StructureMatrix s;
  s.kind = kind;
  s.dim = dim;
  s.component.assign(static_cast<std::size_t>(std::max(dim, 0)), 0);
  switch (kind) {
    case StructureKind::iid: {
      require(dim >= 1, ErrorCode::invalid_argument, "iid structure needs dim >= 1");
      Eigen::SparseMatrix<double> Q(dim, dim);
      Q.setIdentity();
      s.Q = Q;
      break;
    }
    case StructureKind::rw1:
      require(dim >= 2, ErrorCode::invalid_argument, "rw1 needs dim >= 2");
      s.Q = difference_penalty(dim, 1);
      s.constraints.push_back(ones(dim));
      break;
    case StructureKind::rw2:
      require(dim >= 3, ErrorCode::invalid_argument, "rw2 needs dim >= 3");
      s.Q = difference_penalty(dim, 2);
      s.constraints.push_back(ones(dim));
      s.constraints.push_back(centered_linear(dim));
      break;
    default:
      fail(ErrorCode::invalid_argument,
           "build_structure handles iid/rw1/rw2; use the dedicated builders");
  }
  finalize_spectral(s);
  if (scale) s = scale_structure(std::move(s));
  return s;
}

StructureMatrix build_icar(const RegionGraph& graph, bool scale) {
  int n = graph.size();
  StructureMatrix s;
  s.kind = StructureKind::icar;
  s.dim = n;
  s.component = graph.components();

  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    const auto& nb = graph.neighbors(i);
    if (!nb.empty()) trips.emplace_back(i, i, static_cast<double>(nb.size()));
    for (int j : nb) trips.emplace_back(i, j, -1.0);
  }
  Eigen::SparseMatrix<double> Q(n, n);
  Q.setFromTriplets(trips.begin(), trips.end());
  s.Q = Q;

  int n_comp = 1;
  for (int c : s.component) n_comp = std::max(n_comp, c + 1);
  for (int c = 0; c < n_comp; ++c) {
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
      if (s.component[i] == c) ind[i] = 1.0;
    s.constraints.push_back(ind);
  }

  finalize_spectral(s);
  if (scale) s = scale_structure(std::move(s));
  return s;
}

StructureMatrix build_bym2(const RegionGraph& graph) {
  StructureMatrix icar = build_icar(graph, true);
  int n = graph.size();
  StructureMatrix s;
  s.kind = StructureKind::bym2;
  s.dim = 2 * n;
  s.component.assign(static_cast<std::size_t>(2 * n), 0);

  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
  for (int k = 0; k < icar.Q.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(icar.Q, k); it; ++it)
      trips.emplace_back(n + static_cast<int>(it.row()), n + static_cast<int>(it.col()),
                         it.value());
  Eigen::SparseMatrix<double> Q(2 * n, 2 * n);
  Q.setFromTriplets(trips.begin(), trips.end());
  s.Q = Q;

  for (const auto& c : icar.constraints) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * n);
    v.tail(n) = c;
    s.constraints.push_back(v);
  }
  s.scaled = true;  // ICAR half scaled, IID half unit by construction
  s.component_scale = icar.component_scale;
  finalize_spectral(s);
  return s;
}

StructureMatrix build_interaction(const StructureMatrix& A, const StructureMatrix& B) {
  require(A.kind != StructureKind::iid && B.kind != StructureKind::iid,
          ErrorCode::invalid_argument, "type-IV interaction needs two structured factors");
  require(A.kind != StructureKind::bym2 && B.kind != StructureKind::bym2,
          ErrorCode::invalid_argument, "interactions take the ICAR factor, not BYM2");
  long long dim = static_cast<long long>(A.dim) * B.dim;
  require(dim <= kKroneckerDimCap, ErrorCode::invalid_argument,
          "interaction dimension " + std::to_string(dim) + " exceeds the supported cap " +
              std::to_string(kKroneckerDimCap));

  StructureMatrix s;
  s.kind = StructureKind::kronecker;
  s.dim = static_cast<int>(dim);
  s.component.assign(static_cast<std::size_t>(dim), 0);

  std::vector<Eigen::Triplet<double>> trips;
  for (int ka = 0; ka < A.Q.outerSize(); ++ka)
    for (Eigen::SparseMatrix<double>::InnerIterator ia(A.Q, ka); ia; ++ia)
      for (int kb = 0; kb < B.Q.outerSize(); ++kb)
        for (Eigen::SparseMatrix<double>::InnerIterator ib(B.Q, kb); ib; ++ib)
          trips.emplace_back(static_cast<int>(ia.row()) * B.dim + static_cast<int>(ib.row()),
                             static_cast<int>(ia.col()) * B.dim + static_cast<int>(ib.col()),
                             ia.value() * ib.value());
  Eigen::SparseMatrix<double> Q(s.dim, s.dim);
  Q.setFromTriplets(trips.begin(), trips.end());
  s.Q = Q;

  // Null space = null(A) (x) R^m + R^n (x) null(B); keep an independent
  // subset of the natural slice constraints, dropping redundant candidates.
  std::vector<Eigen::VectorXd> candidates;
  for (const auto& a : A.constraints)
    for (int t = 0; t < B.dim; ++t) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(s.dim);
      for (int i = 0; i < A.dim; ++i) v[i * B.dim + t] = a[i];
      candidates.push_back(v);
    }
  for (const auto& b : B.constraints)
    for (int i = 0; i < A.dim; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(s.dim);
      for (int t = 0; t < B.dim; ++t) v[i * B.dim + t] = b[t];
      candidates.push_back(v);
    }
  std::vector<Eigen::VectorXd> ortho;
  for (const auto& cand : candidates) {
    Eigen::VectorXd r = cand;
    for (const auto& q : ortho) r -= q.dot(cand) * q;
    if (r.norm() > 1e-8 * std::max(1.0, cand.norm())) {
      s.constraints.push_back(cand);
      ortho.push_back(r / r.norm());
    }
  }

  finalize_spectral(s);
  return s;
}

}  // namespace fertsae
