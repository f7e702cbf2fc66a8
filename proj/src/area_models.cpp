#include "fertsae/area_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fertsae/csv.hpp"
#include "fertsae/errors.hpp"
#include "fertsae/stats.hpp"

namespace fertsae {

Summary summarize(std::vector<double> draws) {
  Summary s;
  s.mean = fertsae::mean(draws);
  s.median = quantile(draws, 0.5);
  s.q025 = quantile(draws, 0.025);
  s.q05 = quantile(draws, 0.05);
  s.q95 = quantile(draws, 0.95);
  s.q975 = quantile(draws, 0.975);
  return s;
}

SmoothedEstimate summarize_key(const EstimateKey& key, const Eigen::VectorXd& log_draws,
                               bool observed) {
  SmoothedEstimate e;
  e.key = key;
  e.observed = observed;
  std::vector<double> logs(log_draws.data(), log_draws.data() + log_draws.size());
  e.log_scale = summarize(logs);
  double scale = key.is_tfr() ? 1.0 : 1000.0;
  std::vector<double> nat;
  nat.reserve(logs.size());
  for (double v : logs) nat.push_back(std::exp(v) * scale);
  e.natural = summarize(nat);
  return e;
}

int ModelFit::key_index(const EstimateKey& key) const {
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i] == key) return static_cast<int>(i);
  return -1;
}

int ModelFit::tfr_key_index(const EstimateKey& key) const {
  for (std::size_t i = 0; i < tfr_keys.size(); ++i)
    if (tfr_keys[i] == key) return static_cast<int>(i);
  return -1;
}

namespace {

// Centered covariate columns for the model areas; names from the table.
std::vector<std::vector<double>> centered_covariates(const CovariateTable& cov, int n_areas,
                                                     std::vector<std::string>& names) {
  std::vector<std::vector<double>> cols;
  if (cov.empty()) return cols;
  for (std::size_t j = 0; j < cov.names.size(); ++j) {
    std::vector<double> col(n_areas, 0.0);
    double m = 0;
    for (int i = 0; i < n_areas; ++i) {
      auto it = cov.by_area.find(i + 1);
      require(it != cov.by_area.end(), ErrorCode::invalid_argument,
              "covariate table missing area " + std::to_string(i + 1));
      col[i] = it->second[j];
      m += col[i];
    }
    m /= n_areas;
    for (double& v : col) v -= m;
    cols.push_back(col);
    names.push_back(cov.names[j]);
  }
  return cols;
}

struct GridLayout {
  // extraction cells spanning the full (area x second-index) grid
  std::vector<ExtractionCell> cells;
  std::vector<bool> observed;
};

}  // namespace

ModelFit fit_fh_asfr(const std::vector<DirectEstimate>& direct, const RegionGraph& graph,
                     const CovariateTable& covariates, Period period,
                     const AreaFitOptions& options) {
  const int n = graph.size();
  const int A = AgeGroup::count;

  LatentModelSpec spec;
  spec.observation = ObservationModel::gaussian_known_variance;

  // Keys with a usable log estimate and positive variance enter the
  // likelihood; everything else is predicted from the structure.
  std::vector<std::pair<int, int>> data_cells;  // (area0, age)
  for (const auto& d : direct) {
    if (d.key.is_tfr() || !d.log_point || !d.log_variance) continue;
    if (!(*d.log_variance > 0)) continue;
    require(d.key.area_id >= 1 && d.key.area_id <= n, ErrorCode::invalid_argument,
            "direct estimate area outside graph");
    data_cells.emplace_back(d.key.area_id - 1, d.key.age_index);
    spec.y.push_back(*d.log_point);
    spec.obs_variance.push_back(*d.log_variance);
  }
  require(!data_cells.empty(), ErrorCode::no_data, "no usable direct estimates");

  int sig_age = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_age_rw1",
                                PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                                std::nullopt, {}, std::nullopt});
  int sig_age_iid = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_age_iid",
                                    PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                                    std::nullopt, {}, std::nullopt});
  int sig_sp = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_space",
                               PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                               std::nullopt, {}, std::nullopt});
  StructureMatrix icar = build_icar(graph, true);
  int phi_sp = spec.add_hyper({Hyperparameter::Kind::phi_pc, "phi_space", {},
                               PcPhiPrior::make(icar, options.pc.phi_u, options.pc.phi_alpha),
                               {}, std::nullopt});
  int sig_int = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_space_age",
                                PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                                std::nullopt, {}, std::nullopt});

  auto levels = [&](auto&& f) {
    std::vector<int> v;
    v.reserve(data_cells.size());
    for (const auto& [i, a] : data_cells) v.push_back(f(i, a));
    return v;
  };

  spec.add_block({"age_rw1", build_structure(StructureKind::rw1, A, true), sig_age, -1,
                  levels([](int, int a) { return a; })});
  spec.add_block({"age_iid", build_structure(StructureKind::iid, A, true), sig_age_iid, -1,
                  levels([](int, int a) { return a; })});
  spec.add_block({"space_bym2", build_bym2(graph), sig_sp, phi_sp,
                  levels([](int i, int) { return i; })});
  StructureMatrix rw1_age = build_structure(StructureKind::rw1, A, true);
  spec.add_block({"space_age_iv", scale_structure(build_interaction(icar, rw1_age)), sig_int,
                  -1, levels([A](int i, int a) { return i * A + a; })});

  NormalPrior flat{0.0, options.fixed_effect_sd};
  spec.add_fixed({"alpha", flat, std::vector<double>(spec.y.size(), 1.0), true});
  std::vector<std::string> cov_names;
  std::vector<std::vector<double>> cov_cols;
  if (options.use_covariates)
    cov_cols = centered_covariates(covariates, n, cov_names);
  for (std::size_t j = 0; j < cov_cols.size(); ++j) {
    std::vector<double> col;
    for (const auto& [i, a] : data_cells) col.push_back(cov_cols[j][i]);
    spec.add_fixed({"beta_" + cov_names[j], flat, col, true});
  }

  PosteriorSamples samples = sample_posterior(spec, options.sampler);

  ModelFit fit;
  std::vector<ExtractionCell> cells;
  std::vector<bool> observed(static_cast<std::size_t>(n) * A, false);
  for (const auto& [i, a] : data_cells) observed[i * A + a] = true;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < A; ++a) {
      ExtractionCell cell;
      cell.fixed_row.push_back(1.0);  // alpha
      for (std::size_t j = 0; j < cov_cols.size(); ++j)
        cell.fixed_row.push_back(cov_cols[j][i]);
      cell.block_level = {a, a, i, i * A + a};
      cells.push_back(cell);
      fit.keys.push_back(
          {AreaLevel::admin1, i + 1, Urbanicity::both, period, a});
    }
  fit.log_rate_draws = samples.extract_predictors(cells);
  for (std::size_t k = 0; k < fit.keys.size(); ++k)
    fit.estimates.push_back(
        summarize_key(fit.keys[k], fit.log_rate_draws.col(k), observed[k]));

  // Derived TFR per draw: 5 * sum_a exp(eta_{i,a}).
  int S = fit.log_rate_draws.rows();
  fit.log_tfr_draws.resize(S, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd tfr = Eigen::VectorXd::Zero(S);
    for (int a = 0; a < A; ++a)
      tfr += fit.log_rate_draws.col(i * A + a).array().exp().matrix();
    fit.log_tfr_draws.col(i) = (5.0 * tfr.array()).log().matrix();
    EstimateKey key{AreaLevel::admin1, i + 1, Urbanicity::both, period, -1};
    fit.tfr_keys.push_back(key);
    fit.tfr_estimates.push_back(summarize_key(key, fit.log_tfr_draws.col(i), true));
  }
  fit.samples = std::move(samples);
  return fit;
}

ModelFit fit_fh_tfr(const std::vector<DirectEstimate>& direct, const RegionGraph& graph,
                    const CovariateTable& covariates, const std::vector<int>& years,
                    const AreaFitOptions& options) {
  const int n = graph.size();
  const int T = static_cast<int>(years.size());
  require(T >= 3, ErrorCode::invalid_argument,
          "temporal RW2 needs at least 3 years of estimates");

  std::map<int, int> year_index;
  for (int t = 0; t < T; ++t) year_index[years[t]] = t;

  LatentModelSpec spec;
  spec.observation = ObservationModel::gaussian_known_variance;
  std::vector<std::pair<int, int>> data_cells;  // (area0, t)
  for (const auto& d : direct) {
    if (!d.key.is_tfr() || !d.log_point || !d.log_variance) continue;
    if (!(*d.log_variance > 0)) continue;
    auto it = year_index.find(d.key.period.first);
    if (it == year_index.end() || d.key.period.first != d.key.period.last) continue;
    data_cells.emplace_back(d.key.area_id - 1, it->second);
    spec.y.push_back(*d.log_point);
    spec.obs_variance.push_back(*d.log_variance);
  }
  require(!data_cells.empty(), ErrorCode::no_data, "no usable yearly TFR estimates");

  int sig_t = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_time_rw2",
                              PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                              std::nullopt, {}, std::nullopt});
  int sig_t_iid = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_time_iid",
                                  PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                                  std::nullopt, {}, std::nullopt});
  int sig_sp = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_space",
                               PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                               std::nullopt, {}, std::nullopt});
  StructureMatrix icar = build_icar(graph, true);
  int phi_sp = spec.add_hyper({Hyperparameter::Kind::phi_pc, "phi_space", {},
                               PcPhiPrior::make(icar, options.pc.phi_u, options.pc.phi_alpha),
                               {}, std::nullopt});
  int sig_int = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_space_time",
                                PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                                std::nullopt, {}, std::nullopt});

  auto levels = [&](auto&& f) {
    std::vector<int> v;
    v.reserve(data_cells.size());
    for (const auto& [i, t] : data_cells) v.push_back(f(i, t));
    return v;
  };
  spec.add_block({"time_rw2", build_structure(StructureKind::rw2, T, true), sig_t, -1,
                  levels([](int, int t) { return t; })});
  spec.add_block({"time_iid", build_structure(StructureKind::iid, T, true), sig_t_iid, -1,
                  levels([](int, int t) { return t; })});
  spec.add_block({"space_bym2", build_bym2(graph), sig_sp, phi_sp,
                  levels([](int i, int) { return i; })});
  StructureMatrix rw2_time = build_structure(StructureKind::rw2, T, true);
  spec.add_block({"space_time_iv", scale_structure(build_interaction(icar, rw2_time)), sig_int,
                  -1, levels([T](int i, int t) { return i * T + t; })});

  NormalPrior flat{0.0, options.fixed_effect_sd};
  spec.add_fixed({"alpha", flat, std::vector<double>(spec.y.size(), 1.0), true});
  if (options.cutoff_adjustment) {
    require(options.survey_year > 0, ErrorCode::invalid_argument,
            "cutoff adjustment needs the survey year");
    std::vector<double> col;
    for (const auto& [i, t] : data_cells) {
      int year = years[t];
      double v = 0;
      if (year == options.survey_year - 6) v = 1.0;
      if (year == options.survey_year - 5) v = -1.0;
      col.push_back(v);
    }
    spec.add_fixed({"zeta", NormalPrior{options.zeta_mean, options.zeta_sd}, col, false});
  }
  std::vector<std::string> cov_names;
  std::vector<std::vector<double>> cov_cols;
  if (options.use_covariates)
    cov_cols = centered_covariates(covariates, n, cov_names);
  for (std::size_t j = 0; j < cov_cols.size(); ++j) {
    std::vector<double> col;
    for (const auto& [i, t] : data_cells) col.push_back(cov_cols[j][i]);
    spec.add_fixed({"beta_" + cov_names[j], flat, col, true});
  }

  PosteriorSamples samples = sample_posterior(spec, options.sampler);

  ModelFit fit;
  std::vector<ExtractionCell> cells;
  std::vector<bool> observed(static_cast<std::size_t>(n) * T, false);
  for (const auto& [i, t] : data_cells) observed[i * T + t] = true;
  std::size_t n_fixed = spec.fixed.size();
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      ExtractionCell cell;
      cell.fixed_row.assign(n_fixed, 0.0);
      cell.fixed_row[0] = 1.0;  // alpha; zeta column stays 0 (reported rates exclude it)
      std::size_t cov_start = options.cutoff_adjustment ? 2 : 1;
      for (std::size_t j = 0; j < cov_cols.size(); ++j)
        cell.fixed_row[cov_start + j] = cov_cols[j][i];
      cell.block_level = {t, t, i, i * T + t};
      cells.push_back(cell);
      fit.keys.push_back(
          {AreaLevel::admin1, i + 1, Urbanicity::both, Period::single(years[t]), -1});
    }
  fit.log_rate_draws = samples.extract_predictors(cells);
  for (std::size_t k = 0; k < fit.keys.size(); ++k)
    fit.estimates.push_back(
        summarize_key(fit.keys[k], fit.log_rate_draws.col(k), observed[k]));
  fit.tfr_keys = fit.keys;
  fit.log_tfr_draws = fit.log_rate_draws;
  fit.tfr_estimates = fit.estimates;
  fit.samples = std::move(samples);
  return fit;
}

CovariateFitResult fit_fh_covariate(const std::vector<ProportionDatum>& direct,
                                    const RegionGraph& graph, const AreaFitOptions& options) {
  const int n = graph.size();
  LatentModelSpec spec;
  spec.observation = ObservationModel::gaussian_known_variance;
  CovariateFitResult out;

  std::vector<int> data_area;
  for (const auto& d : direct) {
    require(d.area_id >= 1 && d.area_id <= n, ErrorCode::invalid_argument,
            "proportion datum outside graph");
    if (!(d.p_hat > 0) || !(d.p_hat < 1) || !(d.variance > 0)) {
      out.excluded_areas.push_back(d.area_id);
      continue;
    }
    double denom = d.p_hat * (1.0 - d.p_hat);
    spec.y.push_back(logit(d.p_hat));
    spec.obs_variance.push_back(d.variance / (denom * denom));
    data_area.push_back(d.area_id - 1);
  }
  require(!spec.y.empty(), ErrorCode::no_data, "no usable proportions");

  int sig_sp = spec.add_hyper({Hyperparameter::Kind::sigma_pc, "sigma_space",
                               PcSigmaPrior::make(options.pc.sigma_u, options.pc.sigma_alpha),
                               std::nullopt, {}, std::nullopt});
  StructureMatrix icar = build_icar(graph, true);
  int phi_sp = spec.add_hyper({Hyperparameter::Kind::phi_pc, "phi_space", {},
                               PcPhiPrior::make(icar, options.pc.phi_u, options.pc.phi_alpha),
                               {}, std::nullopt});
  spec.add_block({"space_bym2", build_bym2(graph), sig_sp, phi_sp, data_area});
  spec.add_fixed({"alpha", NormalPrior{0.0, options.fixed_effect_sd},
                  std::vector<double>(spec.y.size(), 1.0), true});

  PosteriorSamples samples = sample_posterior(spec, options.sampler);
  std::vector<ExtractionCell> cells;
  for (int i = 0; i < n; ++i) cells.push_back({{1.0}, {i}});
  Eigen::MatrixXd theta = samples.extract_predictors(cells);

  std::vector<bool> observed(n, false);
  for (int i : data_area) observed[i] = true;
  for (int i = 0; i < n; ++i) {
    SmoothedEstimate e;
    e.key = EstimateKey{AreaLevel::admin1, i + 1, Urbanicity::both, Period{0, 0}, -1};
    e.observed = observed[i];
    std::vector<double> logs(theta.col(i).data(), theta.col(i).data() + theta.rows());
    e.log_scale = summarize(logs);
    std::vector<double> nat;
    nat.reserve(logs.size());
    for (double v : logs) nat.push_back(expit(v));
    e.natural = summarize(nat);
    out.proportions.push_back(e);
  }
  out.samples = std::move(samples);
  return out;
}

PeriodTfr aggregate_tfr_periods(const std::vector<EstimateKey>& yearly_keys,
                                const Eigen::MatrixXd& log_tfr_draws,
                                const std::vector<Period>& periods,
                                const std::function<double(int, int)>& weight) {
  PeriodTfr out;
  int S = static_cast<int>(log_tfr_draws.rows());
  std::map<int, std::vector<int>> by_area;  // area -> column indices
  for (std::size_t k = 0; k < yearly_keys.size(); ++k) {
    require(yearly_keys[k].period.first == yearly_keys[k].period.last,
            ErrorCode::invalid_argument, "period aggregation needs yearly keys");
    by_area[yearly_keys[k].area_id].push_back(static_cast<int>(k));
  }
  for (const auto& [area, cols] : by_area) {
    for (const auto& p : periods) {
      std::vector<int> in_period;
      std::vector<double> w;
      double wsum = 0;
      for (int k : cols) {
        int year = yearly_keys[k].period.first;
        if (!p.contains(year)) continue;
        in_period.push_back(k);
        double wk = weight ? weight(area, year) : 1.0;
        require(wk >= 0, ErrorCode::invalid_argument, "negative aggregation weight");
        w.push_back(wk);
        wsum += wk;
      }
      if (in_period.empty()) continue;
      require(wsum > 0, ErrorCode::invalid_argument,
              "aggregation weights sum to zero in " + p.label());
      Eigen::VectorXd tfr = Eigen::VectorXd::Zero(S);
      for (std::size_t j = 0; j < in_period.size(); ++j)
        tfr += (w[j] / wsum) * log_tfr_draws.col(in_period[j]).array().exp().matrix();
      Eigen::VectorXd log_tfr = tfr.array().log().matrix();
      EstimateKey key = yearly_keys[in_period.front()];
      key.period = p;
      out.keys.push_back(key);
      out.log_tfr_draws.conservativeResize(S, static_cast<int>(out.keys.size()));
      out.log_tfr_draws.col(static_cast<int>(out.keys.size()) - 1) = log_tfr;
      out.estimates.push_back(summarize_key(key, log_tfr, true));
    }
  }
  return out;
}

void write_smoothed_csv(
    const std::vector<std::pair<std::string, std::vector<SmoothedEstimate>>>& groups,
    const std::string& path, bool log_scale) {
  csv::Writer w(path);
  w.row({"model", "level", "area_id", "period", "age_group", "median", "mean", "q025",
         "q05", "q95", "q975"});
  for (const auto& [model, estimates] : groups)
    for (const auto& e : estimates) {
      const Summary& s = log_scale ? e.log_scale : e.natural;
      w.row({model, to_string(e.key.level), csv::Writer::num(e.key.area_id),
             e.key.period.label(),
             e.key.is_tfr() ? "TFR" : AgeGroup{e.key.age_index}.label(),
             csv::Writer::num(s.median), csv::Writer::num(s.mean),
             csv::Writer::num(s.q025), csv::Writer::num(s.q05), csv::Writer::num(s.q95),
             csv::Writer::num(s.q975)});
    }
}

}  // namespace fertsae
