#include "fertsae/sampler.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "fertsae/csv.hpp"
#include "fertsae/errors.hpp"
#include "fertsae/stats.hpp"

namespace fertsae {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Loadings {
  double e = 0;  // plain sigma, or bym2 sigma sqrt(1-phi)
  double s = 0;  // bym2 sigma sqrt(phi)
};

Loadings loadings_for(const EffectBlock& block, const std::vector<double>& hyper_nat) {
  double sigma = hyper_nat[block.sigma_slot];
  if (!block.is_bym2()) return {sigma, 0.0};
  double phi = hyper_nat[block.phi_slot];
  return {sigma * std::sqrt(std::max(1.0 - phi, 0.0)), sigma * std::sqrt(std::max(phi, 0.0))};
}

struct ChainState {
  std::vector<double> hyper_t;    // transformed
  std::vector<double> hyper_nat;  // natural
  std::vector<double> fixedv;
  std::vector<Eigen::VectorXd> z;
};

// Shared per-model precomputation: block groupings, null bases, and (for the
// Gaussian likelihood) the per-block marginal covariance contributions.
struct Workspace {
  const LatentModelSpec& spec;
  int n_data;
  std::vector<std::vector<int>> groups;  // block indices updated jointly
  std::vector<Eigen::MatrixXd> null_basis;        // per block (orthonormal)
  std::vector<Eigen::MatrixXd> unit_constraints;  // per block, natural unit-norm
  // Gaussian marginal pieces: per block, covariance of its contribution at
  // unit loading, as data x data matrices (e part and bym2 S part).
  std::vector<Eigen::MatrixXd> M_e, M_s;
  Eigen::VectorXd V;  // gaussian observation variances

  explicit Workspace(const LatentModelSpec& s) : spec(s), n_data(s.n_data()) {
    // Blocks sharing a datum map are updated as one Gibbs group.
    for (std::size_t b = 0; b < s.blocks.size(); ++b) {
      bool merged = false;
      for (auto& g : groups)
        if (s.blocks[g.front()].datum_level == s.blocks[b].datum_level) {
          g.push_back(static_cast<int>(b));
          merged = true;
          break;
        }
      if (!merged) groups.push_back({static_cast<int>(b)});
    }
    for (const auto& block : s.blocks) {
      null_basis.push_back(block.structure.null_basis);
      Eigen::MatrixXd A(block.structure.dim,
                        static_cast<int>(block.structure.constraints.size()));
      for (std::size_t c = 0; c < block.structure.constraints.size(); ++c)
        A.col(static_cast<int>(c)) =
            block.structure.constraints[c] / block.structure.constraints[c].norm();
      unit_constraints.push_back(A);
    }
    if (s.observation == ObservationModel::gaussian_known_variance) {
      V = Eigen::Map<const Eigen::VectorXd>(s.obs_variance.data(), n_data);
      for (const auto& block : s.blocks) {
        int n_lev = block.is_bym2() ? block.structure.dim / 2 : block.structure.dim;
        const Eigen::MatrixXd& G = block.structure.gen_inverse;
        Eigen::MatrixXd me = Eigen::MatrixXd::Zero(n_data, n_data);
        Eigen::MatrixXd ms;
        if (block.is_bym2()) ms = Eigen::MatrixXd::Zero(n_data, n_data);
        for (int k = 0; k < n_data; ++k) {
          int lk = block.datum_level[k];
          if (lk < 0) continue;
          for (int j = 0; j < n_data; ++j) {
            int lj = block.datum_level[j];
            if (lj < 0) continue;
            if (block.is_bym2()) {
              me(k, j) = G(lk, lj);  // identity sub-block of the bym2 carrier
              ms(k, j) = G(n_lev + lk, n_lev + lj);
            } else {
              me(k, j) = G(lk, lj);
            }
          }
        }
        M_e.push_back(std::move(me));
        M_s.push_back(std::move(ms));
      }
    }
  }
};

struct AdaptiveScalar {
  std::string name;
  double step = 0.3;  // proposal sd
  long proposals = 0;
  long accepts = 0;
  long post_burn_proposals = 0;
  long post_burn_accepts = 0;

  void record(bool accepted, bool in_burnin, long iter, bool adapt) {
    ++proposals;
    if (accepted) ++accepts;
    if (!in_burnin) {
      ++post_burn_proposals;
      if (accepted) ++post_burn_accepts;
    }
    if (adapt && in_burnin) {
      double gamma = 1.0 / std::sqrt(10.0 + static_cast<double>(iter));
      step *= std::exp(gamma * ((accepted ? 1.0 : 0.0) - 0.44));
      step = std::clamp(step, 1e-5, 20.0);
    }
  }
  double rate() const {
    return proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
  }
};

// Gaussian proposal machinery shared by the Gibbs groups and the joint
// Taylor-Metropolis update: build the (regularized) full-conditional,
// sample it, and enforce constraints by conditioning-by-correction.
struct GaussianProposal {
  Eigen::LLT<Eigen::MatrixXd> chol;     // of P + c N N'
  Eigen::VectorXd mu;                   // P~^{-1} b
  Eigen::MatrixXd S;                    // P~^{-1} N
  Eigen::LLT<Eigen::MatrixXd> M_chol;   // of N' P~^{-1} N
  Eigen::MatrixXd N;
  double half_logdet_P = 0;             // of P~
  double half_logdet_M = 0;
  int n = 0, k = 0;

  void build(const Eigen::MatrixXd& P_raw, const Eigen::VectorXd& b,
             const Eigen::MatrixXd& null_basis) {
    n = static_cast<int>(P_raw.rows());
    k = static_cast<int>(null_basis.cols());
    N = null_basis;
    Eigen::MatrixXd P = P_raw;
    if (k > 0) {
      double c = P.trace() / n + 1.0;
      P.noalias() += c * N * N.transpose();
    }
    chol.compute(P);
    require(chol.info() == Eigen::Success, ErrorCode::numeric,
            "full-conditional precision not positive definite");
    mu = chol.solve(b);
    half_logdet_P = 0;
    for (int i = 0; i < n; ++i) half_logdet_P += std::log(chol.matrixL()(i, i));
    if (k > 0) {
      S = chol.solve(N);
      Eigen::MatrixXd M = N.transpose() * S;
      M_chol.compute(M);
      require(M_chol.info() == Eigen::Success, ErrorCode::numeric,
              "constraint correction matrix not positive definite");
      half_logdet_M = 0;
      for (int i = 0; i < k; ++i) half_logdet_M += std::log(M_chol.matrixL()(i, i));
    }
  }

  Eigen::VectorXd sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi[i] = gauss(rng);
    Eigen::VectorXd x = mu + chol.matrixU().solve(xi);
    if (k > 0) x.noalias() -= S * M_chol.solve(N.transpose() * x);
    return x;
  }

  // Log density of the constrained (corrected) proposal at v with N'v = 0.
  double log_density(const Eigen::VectorXd& v) const {
    Eigen::VectorXd r = v - mu;
    Eigen::VectorXd Lr = chol.matrixL().solve(r);
    double lp = -0.5 * Lr.squaredNorm() + half_logdet_P - 0.5 * n * kLog2Pi;
    if (k > 0) {
      Eigen::VectorXd m = N.transpose() * mu;
      Eigen::VectorXd Mm = M_chol.solve(m);
      double lmarg = -0.5 * m.dot(Mm) - half_logdet_M - 0.5 * k * kLog2Pi;
      lp -= lmarg;
    }
    return lp;
  }
};

class Chain {
 public:
  Chain(const Workspace& ws, const SamplerSettings& settings, int chain_index)
      : ws_(ws),
        spec_(ws.spec),
        settings_(settings),
        rng_(make_rng(settings.seed, 1000 + static_cast<std::uint64_t>(chain_index))) {
    init_state();
    init_adaptive();
  }

  // Runs burn-in + draws; returns the draw rows.
  Eigen::MatrixXd run(int n_cols, const std::vector<int>& hyper_cols,
                      const std::vector<int>& fixed_cols, const std::vector<int>& block_off) {
    Eigen::MatrixXd out(settings_.draws, n_cols);
    long total = settings_.burnin + settings_.draws;
    if (spec_.observation == ObservationModel::negative_binomial) warm_start();
    for (long iter = 0; iter < total; ++iter) {
      bool burn = iter < settings_.burnin;
      step(iter, burn);
      if (!burn) {
        long s = iter - settings_.burnin;
        for (std::size_t h = 0; h < spec_.hypers.size(); ++h)
          out(s, hyper_cols[h]) = state_.hyper_nat[h];
        for (std::size_t j = 0; j < spec_.fixed.size(); ++j)
          out(s, fixed_cols[j]) = state_.fixedv[j];
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b)
          out.row(s).segment(block_off[b], spec_.blocks[b].n_latent()) =
              state_.z[b].transpose();
      }
      if (iter == settings_.burnin - 1) check_divergence();
    }
    return out;
  }

  const std::vector<AdaptiveScalar>& scalars() const { return scalars_; }
  double latent_rate() const {
    return latent_.proposals ? latent_.rate() : 1.0;
  }

 private:
  const Workspace& ws_;
  const LatentModelSpec& spec_;
  SamplerSettings settings_;
  std::mt19937_64 rng_;
  ChainState state_;
  std::vector<AdaptiveScalar> scalars_;  // free hypers then fixed effects
  AdaptiveScalar latent_{"latent"};
  // caches
  Eigen::VectorXd base_;  // offset + fixed-effect part of the predictor
  std::vector<Eigen::VectorXd> contrib_e_, contrib_s_;  // per block, z at datum level
  bool gauss_chol_valid_ = false;
  Eigen::LLT<Eigen::MatrixXd> gauss_chol_;  // of C(theta), gaussian path

  void init_state() {
    for (const auto& h : spec_.hypers) {
      double nat = h.initial_value();
      state_.hyper_nat.push_back(nat);
      state_.hyper_t.push_back(h.transform(nat));
    }
    for (const auto& f : spec_.fixed) state_.fixedv.push_back(f.prior.mean);
    // Intercept-style columns start at a data-informed value.
    for (std::size_t j = 0; j < spec_.fixed.size(); ++j) {
      bool all_ones = !spec_.fixed[j].column.empty();
      for (double v : spec_.fixed[j].column)
        if (v != 1.0) {
          all_ones = false;
          break;
        }
      if (!all_ones) continue;
      if (spec_.observation == ObservationModel::gaussian_known_variance) {
        double m = 0;
        for (double y : spec_.y) m += y;
        if (!spec_.y.empty()) state_.fixedv[j] = m / static_cast<double>(spec_.y.size());
      } else {
        double sy = 0, sn = 0;
        for (int k = 0; k < ws_.n_data; ++k) {
          sy += spec_.y[k];
          sn += std::exp(spec_.log_offset[k]);
        }
        if (sn > 0) state_.fixedv[j] = std::log((sy + 0.5) / sn);
      }
    }
    for (const auto& b : spec_.blocks)
      state_.z.push_back(Eigen::VectorXd::Zero(b.n_latent()));
    rebuild_caches();
  }

  void init_adaptive() {
    for (const auto& h : spec_.hypers)
      if (h.free()) scalars_.push_back({h.name, 0.3});
    for (const auto& f : spec_.fixed) scalars_.push_back({f.name, 0.1});
  }

  void rebuild_caches() {
    base_ = Eigen::VectorXd::Zero(ws_.n_data);
    if (spec_.observation == ObservationModel::negative_binomial)
      for (int k = 0; k < ws_.n_data; ++k) base_[k] = spec_.log_offset[k];
    for (std::size_t j = 0; j < spec_.fixed.size(); ++j)
      for (int k = 0; k < ws_.n_data; ++k)
        base_[k] += state_.fixedv[j] * spec_.fixed[j].column[k];
    contrib_e_.assign(spec_.blocks.size(), Eigen::VectorXd::Zero(ws_.n_data));
    contrib_s_.assign(spec_.blocks.size(), Eigen::VectorXd::Zero(ws_.n_data));
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) refresh_contrib(b);
  }

  void refresh_contrib(std::size_t b) {
    const EffectBlock& block = spec_.blocks[b];
    int n_lev = block.n_levels();
    for (int k = 0; k < ws_.n_data; ++k) {
      int lev = block.datum_level[k];
      contrib_e_[b][k] = lev >= 0 ? state_.z[b][lev] : 0.0;
      contrib_s_[b][k] = (lev >= 0 && block.is_bym2()) ? state_.z[b][n_lev + lev] : 0.0;
    }
  }

  Eigen::VectorXd predictor() const {
    Eigen::VectorXd eta = base_;
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      Loadings lam = loadings_for(spec_.blocks[b], state_.hyper_nat);
      eta.noalias() += lam.e * contrib_e_[b];
      if (spec_.blocks[b].is_bym2()) eta.noalias() += lam.s * contrib_s_[b];
    }
    return eta;
  }

  double nb_loglik_at(const Eigen::VectorXd& eta, double d) const {
    double ll = 0;
    for (int k = 0; k < ws_.n_data; ++k) {
      double mu = std::exp(eta[k]);
      ll += fertsae::nb_loglik(spec_.y[k], mu, d);
    }
    return ll;
  }

  // Gaussian path: log N(y | X f, C(theta)) with the latent field integrated
  // out; C = sum_b loadings^2 M_b + diag(V).
  double gaussian_marginal(const std::vector<double>& hyper_nat,
                           const std::vector<double>& fixedv, bool refresh_chol) {
    if (ws_.n_data == 0) return 0.0;
    if (refresh_chol || !gauss_chol_valid_) {
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ws_.n_data, ws_.n_data);
      for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
        Loadings lam = loadings_for(spec_.blocks[b], hyper_nat);
        C.noalias() += (lam.e * lam.e) * ws_.M_e[b];
        if (spec_.blocks[b].is_bym2()) C.noalias() += (lam.s * lam.s) * ws_.M_s[b];
      }
      C.diagonal() += ws_.V;
      gauss_chol_.compute(C);
      if (gauss_chol_.info() != Eigen::Success) return kNegInf;
      gauss_chol_valid_ = true;
    }
    Eigen::VectorXd r(ws_.n_data);
    for (int k = 0; k < ws_.n_data; ++k) {
      double m = 0;
      for (std::size_t j = 0; j < spec_.fixed.size(); ++j)
        m += fixedv[j] * spec_.fixed[j].column[k];
      r[k] = spec_.y[k] - m;
    }
    Eigen::VectorXd Lr = gauss_chol_.matrixL().solve(r);
    double half_logdet = 0;
    for (int i = 0; i < ws_.n_data; ++i)
      half_logdet += std::log(gauss_chol_.matrixL()(i, i));
    return -0.5 * Lr.squaredNorm() - half_logdet - 0.5 * ws_.n_data * kLog2Pi;
  }

  double hyper_log_prior(const std::vector<double>& hyper_t) const {
    double lp = 0;
    for (std::size_t h = 0; h < spec_.hypers.size(); ++h)
      if (spec_.hypers[h].free()) lp += spec_.hypers[h].log_prior_transformed(hyper_t[h]);
    return lp;
  }

  void step(long iter, bool burn) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool gaussian = spec_.observation == ObservationModel::gaussian_known_variance;

    // Hyperparameter and fixed-effect random-walk moves.
    int scalar_idx = 0;
    double cur_ll = gaussian ? gaussian_marginal(state_.hyper_nat, state_.fixedv, true)
                             : nb_loglik_at(predictor(), nb_d());
    for (std::size_t h = 0; h < spec_.hypers.size(); ++h) {
      if (!spec_.hypers[h].free()) continue;
      AdaptiveScalar& sc = scalars_[scalar_idx++];
      double t0 = state_.hyper_t[h];
      double t1 = t0 + sc.step * gauss(rng_);
      double lp0 = spec_.hypers[h].log_prior_transformed(t0);
      double lp1 = spec_.hypers[h].log_prior_transformed(t1);
      double ll1;
      std::vector<double> nat = state_.hyper_nat;
      nat[h] = spec_.hypers[h].untransform(t1);
      if (gaussian) {
        ll1 = gaussian_marginal(nat, state_.fixedv, true);
      } else {
        double d = spec_.d_slot == static_cast<int>(h) ? nat[h] : nb_d();
        Eigen::VectorXd eta = base_;
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
          Loadings lam = loadings_for(spec_.blocks[b], nat);
          eta.noalias() += lam.e * contrib_e_[b];
          if (spec_.blocks[b].is_bym2()) eta.noalias() += lam.s * contrib_s_[b];
        }
        ll1 = nb_loglik_at(eta, d);
      }
      double log_alpha = (lp1 + ll1) - (lp0 + cur_ll);
      bool accept = std::isfinite(log_alpha) && std::log(unif(rng_)) < log_alpha;
      if (accept) {
        state_.hyper_t[h] = t1;
        state_.hyper_nat[h] = nat[h];
        cur_ll = ll1;
      } else if (gaussian) {
        gauss_chol_valid_ = false;  // chol belongs to the rejected proposal
      }
      sc.record(accept, burn, iter, settings_.adapt);
    }
    if (gaussian && !gauss_chol_valid_)
      cur_ll = gaussian_marginal(state_.hyper_nat, state_.fixedv, true);

    for (std::size_t j = 0; j < spec_.fixed.size(); ++j) {
      AdaptiveScalar& sc = scalars_[scalar_idx++];
      double f0 = state_.fixedv[j];
      double f1 = f0 + sc.step * gauss(rng_);
      double lp0 = spec_.fixed[j].prior.log_density(f0);
      double lp1 = spec_.fixed[j].prior.log_density(f1);
      double ll1;
      if (gaussian) {
        std::vector<double> fv = state_.fixedv;
        fv[j] = f1;
        ll1 = gaussian_marginal(state_.hyper_nat, fv, false);
      } else {
        Eigen::VectorXd eta = predictor();
        for (int k = 0; k < ws_.n_data; ++k)
          eta[k] += (f1 - f0) * spec_.fixed[j].column[k];
        ll1 = nb_loglik_at(eta, nb_d());
      }
      double log_alpha = (lp1 + ll1) - (lp0 + cur_ll);
      bool accept = std::isfinite(log_alpha) && std::log(unif(rng_)) < log_alpha;
      if (accept) {
        state_.fixedv[j] = f1;
        cur_ll = ll1;
        for (int k = 0; k < ws_.n_data; ++k)
          base_[k] += (f1 - f0) * spec_.fixed[j].column[k];
      }
      sc.record(accept, burn, iter, settings_.adapt);
    }

    for (int sweep = 0; sweep < settings_.latent_sweeps; ++sweep) {
      if (gaussian) {
        for (const auto& g : ws_.groups) gibbs_group(g);
      } else {
        taylor_metropolis(iter, burn);
      }
    }
  }

  double nb_d() const {
    return spec_.d_slot >= 0 ? state_.hyper_nat[spec_.d_slot] : 1.0;
  }

  // Joint Gaussian full conditional for a group of blocks, with
  // conditioning-by-correction for the constraints.
  void gibbs_group(const std::vector<int>& group) {
    int n_g = 0, k_g = 0;
    std::vector<int> off;
    for (int b : group) {
      off.push_back(n_g);
      n_g += spec_.blocks[b].n_latent();
      k_g += static_cast<int>(ws_.null_basis[b].cols());
    }
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_g, n_g);
    for (std::size_t gi = 0; gi < group.size(); ++gi) {
      const auto& Q = spec_.blocks[group[gi]].structure.Q;
      for (int c = 0; c < Q.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Q, c); it; ++it)
          P(off[gi] + it.row(), off[gi] + it.col()) += it.value();
    }
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n_g, k_g);
    int kpos = 0;
    for (std::size_t gi = 0; gi < group.size(); ++gi) {
      const auto& nb = ws_.null_basis[group[gi]];
      N.block(off[gi], kpos, nb.rows(), nb.cols()) = nb;
      kpos += static_cast<int>(nb.cols());
    }

    // Residual without this group's contribution.
    Eigen::VectorXd r = Eigen::VectorXd::Zero(ws_.n_data);
    for (int k = 0; k < ws_.n_data; ++k) r[k] = spec_.y[k] - base_[k];
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      if (std::find(group.begin(), group.end(), static_cast<int>(b)) != group.end())
        continue;
      Loadings lam = loadings_for(spec_.blocks[b], state_.hyper_nat);
      r.noalias() -= lam.e * contrib_e_[b];
      if (spec_.blocks[b].is_bym2()) r.noalias() -= lam.s * contrib_s_[b];
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_g);
    std::vector<std::pair<int, double>> active;
    for (int k = 0; k < ws_.n_data; ++k) {
      double w = 1.0 / ws_.V[k];
      active.clear();
      for (std::size_t gi = 0; gi < group.size(); ++gi) {
        const EffectBlock& block = spec_.blocks[group[gi]];
        int lev = block.datum_level[k];
        if (lev < 0) continue;
        Loadings lam = loadings_for(block, state_.hyper_nat);
        active.emplace_back(off[gi] + lev, lam.e);
        if (block.is_bym2()) active.emplace_back(off[gi] + block.n_levels() + lev, lam.s);
      }
      for (const auto& [i, ai] : active) {
        rhs[i] += w * r[k] * ai;
        for (const auto& [j, aj] : active) P(i, j) += w * ai * aj;
      }
    }

    GaussianProposal prop;
    prop.build(P, rhs, N);
    Eigen::VectorXd x = prop.sample(rng_);
    for (std::size_t gi = 0; gi < group.size(); ++gi) {
      int b = group[gi];
      state_.z[b] = x.segment(off[gi], spec_.blocks[b].n_latent());
      refresh_contrib(b);
    }
  }

  // Negative binomial: Metropolis with a Gaussian proposal from the local
  // quadratic (Taylor) expansion of the log likelihood at the current state,
  // over the joint latent block.
  struct TaylorPieces {
    GaussianProposal prop;
  };

  void build_taylor(const std::vector<Eigen::VectorXd>& zs, TaylorPieces& out) {
    int n_tot = 0, k_tot = 0;
    std::vector<int> off;
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      off.push_back(n_tot);
      n_tot += spec_.blocks[b].n_latent();
      k_tot += static_cast<int>(ws_.null_basis[b].cols());
    }
    Eigen::VectorXd eta = base_;
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      const EffectBlock& block = spec_.blocks[b];
      Loadings lam = loadings_for(block, state_.hyper_nat);
      int n_lev = block.n_levels();
      for (int k = 0; k < ws_.n_data; ++k) {
        int lev = block.datum_level[k];
        if (lev < 0) continue;
        eta[k] += lam.e * zs[b][lev];
        if (block.is_bym2()) eta[k] += lam.s * zs[b][n_lev + lev];
      }
    }
    double d = nb_d();

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_tot, n_tot);
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      const auto& Q = spec_.blocks[b].structure.Q;
      for (int c = 0; c < Q.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Q, c); it; ++it)
          P(off[b] + it.row(), off[b] + it.col()) += it.value();
    }
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n_tot, k_tot);
    int kpos = 0;
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      const auto& nb = ws_.null_basis[b];
      N.block(off[b], kpos, nb.rows(), nb.cols()) = nb;
      kpos += static_cast<int>(nb.cols());
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_tot);
    std::vector<std::pair<int, double>> active;
    for (int k = 0; k < ws_.n_data; ++k) {
      double mu = std::exp(eta[k]);
      double y = spec_.y[k];
      double grad = y - (y + d) * mu / (d + mu);
      double w = (y + d) * d * mu / ((d + mu) * (d + mu));
      w = std::max(w, 1e-10);
      active.clear();
      double s0 = 0;  // current latent contribution at datum k
      for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
        const EffectBlock& block = spec_.blocks[b];
        int lev = block.datum_level[k];
        if (lev < 0) continue;
        Loadings lam = loadings_for(block, state_.hyper_nat);
        active.emplace_back(off[b] + lev, lam.e);
        s0 += lam.e * zs[b][lev];
        if (block.is_bym2()) {
          active.emplace_back(off[b] + block.n_levels() + lev, lam.s);
          s0 += lam.s * zs[b][block.n_levels() + lev];
        }
      }
      double target = grad + w * s0;
      for (const auto& [i, ai] : active) {
        rhs[i] += target * ai;
        for (const auto& [j, aj] : active) P(i, j) += w * ai * aj;
      }
    }
    out.prop.build(P, rhs, N);
  }

  double latent_log_target(const std::vector<Eigen::VectorXd>& zs) {
    Eigen::VectorXd eta = base_;
    double lp = 0;
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      const EffectBlock& block = spec_.blocks[b];
      Loadings lam = loadings_for(block, state_.hyper_nat);
      int n_lev = block.n_levels();
      for (int k = 0; k < ws_.n_data; ++k) {
        int lev = block.datum_level[k];
        if (lev < 0) continue;
        eta[k] += lam.e * zs[b][lev];
        if (block.is_bym2()) eta[k] += lam.s * zs[b][n_lev + lev];
      }
      lp += -0.5 * zs[b].dot(Eigen::VectorXd(block.structure.Q * zs[b]));
    }
    return lp + nb_loglik_at(eta, nb_d());
  }

  void taylor_metropolis(long iter, bool burn) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TaylorPieces fwd;
    build_taylor(state_.z, fwd);
    Eigen::VectorXd x_new = fwd.prop.sample(rng_);

    std::vector<Eigen::VectorXd> z_new;
    int pos = 0;
    for (const auto& block : spec_.blocks) {
      z_new.push_back(x_new.segment(pos, block.n_latent()));
      pos += block.n_latent();
    }
    Eigen::VectorXd x_old(pos);
    pos = 0;
    for (const auto& zb : state_.z) {
      x_old.segment(pos, zb.size()) = zb;
      pos += static_cast<int>(zb.size());
    }

    TaylorPieces rev;
    build_taylor(z_new, rev);
    double log_alpha = latent_log_target(z_new) - latent_log_target(state_.z) +
                       rev.prop.log_density(x_old) - fwd.prop.log_density(x_new);
    bool accept = std::isfinite(log_alpha) && std::log(unif(rng_)) < log_alpha;
    if (accept) {
      state_.z = std::move(z_new);
      for (std::size_t b = 0; b < spec_.blocks.size(); ++b) refresh_contrib(b);
    }
    latent_.record(accept, burn, iter, false);
  }

  // Fisher-scoring style warm start: walk the latent field to the mean of its
  // Taylor proposal a few times before sampling begins.
  void warm_start() {
    for (int it = 0; it < 10; ++it) {
      TaylorPieces t;
      build_taylor(state_.z, t);
      Eigen::VectorXd x = t.prop.mu;
      if (t.prop.k > 0)
        x.noalias() -= t.prop.S * t.prop.M_chol.solve(t.prop.N.transpose() * x);
      int pos = 0;
      for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
        state_.z[b] = x.segment(pos, spec_.blocks[b].n_latent());
        pos += spec_.blocks[b].n_latent();
      }
    }
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) refresh_contrib(b);
  }

  void check_divergence() const {
    for (const auto& sc : scalars_) {
      if (sc.proposals >= 200 && sc.rate() < 0.01)
        fail(ErrorCode::convergence,
             "divergent chain: sustained acceptance below 1% for " + sc.name);
    }
    if (spec_.observation == ObservationModel::negative_binomial &&
        latent_.proposals >= 200 && latent_.rate() < 0.01)
      fail(ErrorCode::convergence,
           "divergent chain: sustained acceptance below 1% for the latent block");
  }
};

double geyer_ess(const Eigen::VectorXd& x) {
  int n = static_cast<int>(x.size());
  if (n < 10) return static_cast<double>(n);
  double m = x.mean();
  Eigen::VectorXd c = x.array() - m;
  double var0 = c.squaredNorm() / n;
  if (var0 <= 0) return static_cast<double>(n);
  double sum = 0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int lag = 1; lag + 1 < std::min(n, 400); lag += 2) {
    double g1 = 0, g2 = 0;
    for (int i = 0; i + lag < n; ++i) g1 += c[i] * c[i + lag];
    for (int i = 0; i + lag + 1 < n; ++i) g2 += c[i] * c[i + lag + 1];
    g1 /= n * var0;
    g2 /= n * var0;
    double pair = g1 + g2;
    if (pair < 0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  double ess = n / (1.0 + 2.0 * sum);
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

}  // namespace

int PosteriorSamples::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  fail(ErrorCode::invalid_argument, "no such parameter: " + name);
}

Eigen::MatrixXd PosteriorSamples::effect_draws(int b) const {
  const BlockMeta& meta = blocks[b];
  int S = n_draws();
  Eigen::MatrixXd out(S, meta.n_levels);
  for (int s = 0; s < S; ++s) {
    double sigma = draws(s, meta.sigma_col);
    if (meta.bym2) {
      double phi = draws(s, meta.phi_col);
      double le = sigma * std::sqrt(std::max(1.0 - phi, 0.0));
      double ls = sigma * std::sqrt(std::max(phi, 0.0));
      for (int l = 0; l < meta.n_levels; ++l)
        out(s, l) = le * draws(s, meta.z_offset + l) +
                    ls * draws(s, meta.z_offset + meta.n_levels + l);
    } else {
      for (int l = 0; l < meta.n_levels; ++l)
        out(s, l) = sigma * draws(s, meta.z_offset + l);
    }
  }
  return out;
}

Eigen::MatrixXd PosteriorSamples::extract_predictors(
    const std::vector<ExtractionCell>& cells) const {
  int S = n_draws();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(S, static_cast<int>(cells.size()));
  std::vector<Eigen::MatrixXd> effects;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    effects.push_back(effect_draws(static_cast<int>(b)));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const ExtractionCell& cell = cells[c];
    for (std::size_t j = 0; j < fixed_cols.size(); ++j) {
      double w = cell.fixed_row[j];
      if (w != 0)
        out.col(static_cast<int>(c)) += w * draws.col(fixed_cols[j]);
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      int lev = cell.block_level[b];
      if (lev >= 0) out.col(static_cast<int>(c)) += effects[b].col(lev);
    }
  }
  return out;
}

double PosteriorSamples::constraint_residual() const {
  double worst = 0;
  for (const auto& meta : blocks) {
    if (meta.unit_constraints.cols() == 0) continue;
    for (int s = 0; s < n_draws(); ++s) {
      Eigen::VectorXd z = draws.row(s).segment(meta.z_offset, meta.n_latent).transpose();
      Eigen::VectorXd r = meta.unit_constraints.transpose() * z;
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

void PosteriorSamples::write_csv(const std::string& path) const {
  csv::Writer w(path);
  w.row({"draw", "parameter", "value"});
  int S = n_draws();
  for (std::size_t h = 0; h < hyper_cols.size(); ++h)
    for (int s = 0; s < S; ++s)
      w.row({csv::Writer::num(s), names[hyper_cols[h]],
             csv::Writer::num(draws(s, hyper_cols[h]))});
  for (std::size_t j = 0; j < fixed_cols.size(); ++j)
    for (int s = 0; s < S; ++s)
      w.row({csv::Writer::num(s), names[fixed_cols[j]],
             csv::Writer::num(draws(s, fixed_cols[j]))});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Eigen::MatrixXd eff = effect_draws(static_cast<int>(b));
    for (int l = 0; l < blocks[b].n_levels; ++l)
      for (int s = 0; s < S; ++s)
        w.row({csv::Writer::num(s), blocks[b].name + "[" + std::to_string(l) + "]",
               csv::Writer::num(eff(s, l))});
  }
}

PosteriorSamples sample_posterior(const LatentModelSpec& spec, const SamplerSettings& settings) {
  spec.validate();
  require(settings.chains >= 1 && settings.draws >= 1 && settings.burnin >= 0,
          ErrorCode::invalid_argument, "bad sampler settings");

  Workspace ws(spec);

  PosteriorSamples out;
  int col = 0;
  for (const auto& h : spec.hypers) {
    out.hyper_cols.push_back(col++);
    out.names.push_back(h.name);
  }
  for (const auto& f : spec.fixed) {
    out.fixed_cols.push_back(col++);
    out.names.push_back(f.name);
  }
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const EffectBlock& block = spec.blocks[b];
    PosteriorSamples::BlockMeta meta;
    meta.name = block.name;
    meta.z_offset = col;
    meta.n_latent = block.n_latent();
    meta.n_levels = block.n_levels();
    meta.bym2 = block.is_bym2();
    meta.sigma_col = out.hyper_cols[block.sigma_slot];
    meta.phi_col = block.is_bym2() ? out.hyper_cols[block.phi_slot] : -1;
    meta.unit_constraints = ws.unit_constraints[b];
    out.blocks.push_back(meta);
    for (int i = 0; i < block.n_latent(); ++i)
      out.names.push_back("z_" + block.name + "[" + std::to_string(i) + "]");
    col += block.n_latent();
  }

  std::vector<int> block_off;
  for (const auto& meta : out.blocks) block_off.push_back(meta.z_offset);

  out.draws.resize(static_cast<long>(settings.chains) * settings.draws, col);

  auto run_chain = [&](int chain) {
    Chain c(ws, settings, chain);
    Eigen::MatrixXd rows = c.run(col, out.hyper_cols, out.fixed_cols, block_off);
    return std::make_tuple(std::move(rows), c.scalars(), c.latent_rate());
  };

  std::vector<std::tuple<Eigen::MatrixXd, std::vector<AdaptiveScalar>, double>> results;
  if (settings.chains == 1) {
    results.push_back(run_chain(0));
  } else {
    std::vector<std::future<std::tuple<Eigen::MatrixXd, std::vector<AdaptiveScalar>, double>>> futs;
    for (int chain = 0; chain < settings.chains; ++chain)
      futs.push_back(std::async(std::launch::async, run_chain, chain));
    for (auto& f : futs) results.push_back(f.get());
  }

  for (int chain = 0; chain < settings.chains; ++chain)
    out.draws.middleRows(static_cast<long>(chain) * settings.draws, settings.draws) =
        std::get<0>(results[chain]);

  // Diagnostics pooled over chains.
  double latent_rate = 0;
  for (const auto& r : results) latent_rate += std::get<2>(r);
  out.diagnostics.acceptance["latent"] = latent_rate / settings.chains;
  if (!results.empty()) {
    const auto& scalars0 = std::get<1>(results[0]);
    for (std::size_t i = 0; i < scalars0.size(); ++i) {
      double rate = 0;
      for (const auto& r : results) rate += std::get<1>(r)[i].rate();
      out.diagnostics.acceptance[scalars0[i].name] = rate / settings.chains;
    }
  }
  for (std::size_t h = 0; h < spec.hypers.size(); ++h)
    if (spec.hypers[h].free())
      out.diagnostics.ess[spec.hypers[h].name] = geyer_ess(out.draws.col(out.hyper_cols[h]));
  for (std::size_t j = 0; j < spec.fixed.size(); ++j)
    out.diagnostics.ess[spec.fixed[j].name] = geyer_ess(out.draws.col(out.fixed_cols[j]));
  out.diagnostics.max_constraint_residual = out.constraint_residual();
  return out;
}

}  // namespace fertsae
