#include "firelp/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace firelp {

namespace {

// Compact group ids (0..G-1) from arbitrary integer labels, plus counts.
struct Groups {
  std::vector<int> id;      // per row
  std::vector<int> count;   // per group
  int n_groups = 0;
};

Groups compact_groups(const std::vector<int>& labels) {
  Groups g;
  g.id.resize(labels.size());
  std::unordered_map<int, int> lookup;
  lookup.reserve(labels.size() / 4 + 8);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto [it, inserted] = lookup.emplace(labels[r], g.n_groups);
    if (inserted) {
      ++g.n_groups;
      g.count.push_back(0);
    }
    g.id[r] = it->second;
    ++g.count[static_cast<std::size_t>(it->second)];
  }
  return g;
}

int count_singletons(const Groups& g) {
  return static_cast<int>(std::count(g.count.begin(), g.count.end(), 1));
}

// Subtract group means from one column; returns the largest |mean| removed.
double demean_column(double* v, int n, const Groups& g, std::vector<double>& mean_buf) {
  std::fill(mean_buf.begin(), mean_buf.end(), 0.0);
  for (int r = 0; r < n; ++r) mean_buf[static_cast<std::size_t>(g.id[static_cast<std::size_t>(r)])] += v[r];
  double max_mean = 0.0;
  for (int j = 0; j < g.n_groups; ++j) {
    mean_buf[static_cast<std::size_t>(j)] /= g.count[static_cast<std::size_t>(j)];
    max_mean = std::max(max_mean, std::abs(mean_buf[static_cast<std::size_t>(j)]));
  }
  for (int r = 0; r < n; ++r) v[r] -= mean_buf[static_cast<std::size_t>(g.id[static_cast<std::size_t>(r)])];
  return max_mean;
}

double column_scale(const double* v, int n) {
  double ss = 0.0;
  for (int r = 0; r < n; ++r) ss += v[r] * v[r];
  const double rms = std::sqrt(ss / std::max(1, n));
  return rms > 0.0 ? rms : 1.0;
}

}  // namespace

DemeanedSystem two_way_demean(Eigen::MatrixXd regressors, Eigen::VectorXd response,
                              const std::vector<int>& county, const std::vector<int>& period,
                              const DemeanOptions& options) {
  const int n = static_cast<int>(response.size());
  if (regressors.rows() != n || static_cast<int>(county.size()) != n ||
      static_cast<int>(period.size()) != n) {
    fail(ErrorKind::data, "demeaning inputs have mismatched row counts");
  }
  if (n == 0) fail(ErrorKind::data, "demeaning needs at least one row");
  if (options.max_sweeps < 1) fail(ErrorKind::config, "max_sweeps must be at least 1");
  const Groups gc = compact_groups(county);
  const Groups gp = compact_groups(period);
  const int k = static_cast<int>(regressors.cols());

  std::vector<double> scale(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j < k; ++j) scale[static_cast<std::size_t>(j)] = column_scale(regressors.col(j).data(), n);
  scale[static_cast<std::size_t>(k)] = column_scale(response.data(), n);

  std::vector<double> mean_buf(static_cast<std::size_t>(std::max(gc.n_groups, gp.n_groups)));
  DemeanedSystem out;
  out.info.singleton_counties = count_singletons(gc);
  out.info.singleton_periods = count_singletons(gp);

  double worst = 0.0;
  int sweep = 0;
  for (; sweep < options.max_sweeps; ++sweep) {
    worst = 0.0;
    for (int j = 0; j <= k; ++j) {
      double* v = j < k ? regressors.col(j).data() : response.data();
      const double s = scale[static_cast<std::size_t>(j)];
      const double m1 = demean_column(v, n, gc, mean_buf);
      const double m2 = demean_column(v, n, gp, mean_buf);
      worst = std::max(worst, std::max(m1, m2) / s);
    }
    if (worst <= options.tolerance) {
      ++sweep;
      break;
    }
  }
  if (worst > options.tolerance) {
    fail(ErrorKind::estimation,
         "fixed-effect absorption did not converge in " + std::to_string(options.max_sweeps) +
             " sweeps (residual group mean " + format_double(worst) + ")");
  }
  out.info.sweeps = sweep;
  out.info.max_residual_mean = worst;
  out.regressors = std::move(regressors);
  out.response = std::move(response);
  return out;
}

DemeanedSystem one_way_demean(Eigen::MatrixXd regressors, Eigen::VectorXd response,
                              const std::vector<int>& group) {
  const int n = static_cast<int>(response.size());
  if (regressors.rows() != n || static_cast<int>(group.size()) != n) {
    fail(ErrorKind::data, "demeaning inputs have mismatched row counts");
  }
  if (n == 0) fail(ErrorKind::data, "demeaning needs at least one row");
  const Groups g = compact_groups(group);
  std::vector<double> mean_buf(static_cast<std::size_t>(g.n_groups));
  const int k = static_cast<int>(regressors.cols());
  for (int j = 0; j < k; ++j) demean_column(regressors.col(j).data(), n, g, mean_buf);
  demean_column(response.data(), n, g, mean_buf);
  DemeanedSystem out;
  out.info.sweeps = 1;
  out.info.singleton_counties = count_singletons(g);
  out.regressors = std::move(regressors);
  out.response = std::move(response);
  return out;
}

OlsResult ols_fit(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& response,
                  const std::vector<std::string>* column_names, const OlsOptions& options) {
  const int n = static_cast<int>(regressors.rows());
  const int k = static_cast<int>(regressors.cols());
  if (static_cast<int>(response.size()) != n) {
    fail(ErrorKind::data, "regressor and response row counts differ");
  }
  if (n <= k) {
    fail(ErrorKind::estimation, "least squares needs more rows (" + std::to_string(n) +
                                    ") than columns (" + std::to_string(k) + ")");
  }
  OlsResult out;
  out.gram.setZero(k, k);
  out.gram.selfadjointView<Eigen::Lower>().rankUpdate(regressors.transpose());
  out.gram.triangularView<Eigen::StrictlyUpper>() = out.gram.transpose();

  // Pivoted Cholesky on a copy to detect (and name) dependent columns.
  Eigen::MatrixXd work = out.gram;
  std::vector<double> initial_diag(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    initial_diag[static_cast<std::size_t>(j)] = std::max(work(j, j), 0.0);
  }
  std::vector<char> pivoted(static_cast<std::size_t>(k), 0);
  for (int step = 0; step < k; ++step) {
    int pivot = -1;
    double best = 0.0;
    for (int j = 0; j < k; ++j) {
      if (pivoted[static_cast<std::size_t>(j)]) continue;
      if (pivot < 0 || work(j, j) > best) {
        pivot = j;
        best = work(j, j);
      }
    }
    const double threshold =
        options.rank_tolerance * options.rank_tolerance * std::max(initial_diag[static_cast<std::size_t>(pivot)], 1e-300);
    if (best <= threshold) break;  // remaining columns are dependent
    pivoted[static_cast<std::size_t>(pivot)] = 1;
    const double d = work(pivot, pivot);
    for (int i = 0; i < k; ++i) {
      if (pivoted[static_cast<std::size_t>(i)]) continue;
      const double f = work(i, pivot) / d;
      for (int j = 0; j < k; ++j) {
        if (pivoted[static_cast<std::size_t>(j)]) continue;
        work(i, j) -= f * work(pivot, j);
      }
    }
  }
  std::vector<int> dependent;
  for (int j = 0; j < k; ++j) {
    if (!pivoted[static_cast<std::size_t>(j)]) dependent.push_back(j);
  }
  if (!dependent.empty()) {
    std::string msg = "rank-deficient design; dependent column(s):";
    for (const int j : dependent) {
      msg += ' ';
      msg += column_names != nullptr ? (*column_names)[static_cast<std::size_t>(j)]
                                     : "#" + std::to_string(j);
    }
    fail(ErrorKind::estimation, msg);
  }

  const Eigen::VectorXd xty = regressors.transpose() * response;
  const Eigen::LLT<Eigen::MatrixXd> llt(out.gram);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::estimation, "normal equations are not positive definite");
  }
  out.coef = llt.solve(xty);
  out.residuals = response - regressors * out.coef;
  return out;
}

Eigen::MatrixXd dk_covariance(const Eigen::MatrixXd& regressors,
                              const Eigen::VectorXd& residuals,
                              const std::vector<int>& period, int bandwidth,
                              const DkOptions& options, const Eigen::MatrixXd* gram) {
  const int n = static_cast<int>(regressors.rows());
  const int k = static_cast<int>(regressors.cols());
  if (static_cast<int>(residuals.size()) != n || static_cast<int>(period.size()) != n) {
    fail(ErrorKind::data, "covariance inputs have mismatched row counts");
  }
  if (n == 0) fail(ErrorKind::data, "covariance needs at least one row");
  if (bandwidth < 0) fail(ErrorKind::data, "bandwidth must be non-negative");

  int min_code = period[0], max_code = period[0];
  for (const int p : period) {
    min_code = std::min(min_code, p);
    max_code = std::max(max_code, p);
  }
  const int span = max_code - min_code + 1;

  // Scores summed within periods, laid out over the dense period range so lag
  // j means a gap of j period codes.
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(span, k);
  std::vector<char> observed(static_cast<std::size_t>(span), 0);
  for (int r = 0; r < n; ++r) {
    const int slot = period[static_cast<std::size_t>(r)] - min_code;
    scores.row(slot) += residuals(r) * regressors.row(r);
    observed[static_cast<std::size_t>(slot)] = 1;
  }
  int t_obs = 0;
  for (const char o : observed) t_obs += o;
  if (bandwidth >= t_obs) {
    fail(ErrorKind::estimation, "HAC bandwidth " + std::to_string(bandwidth) +
                                    " must be smaller than the number of periods (" +
                                    std::to_string(t_obs) + ")");
  }

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  meat.selfadjointView<Eigen::Lower>().rankUpdate(scores.transpose());
  meat.triangularView<Eigen::StrictlyUpper>() = meat.transpose();
  for (int j = 1; j <= std::min(bandwidth, span - 1); ++j) {
    const double w =
        options.kernel == HacKernel::bartlett ? 1.0 - static_cast<double>(j) / (bandwidth + 1) : 1.0;
    const Eigen::MatrixXd omega =
        scores.bottomRows(span - j).transpose() * scores.topRows(span - j);
    meat.noalias() += w * (omega + omega.transpose());
  }
  if (options.small_sample) {
    if (t_obs < 2) fail(ErrorKind::estimation, "small-sample factor needs at least two periods");
    meat *= static_cast<double>(t_obs) / static_cast<double>(t_obs - 1);
  }

  Eigen::MatrixXd g;
  if (gram == nullptr) {
    g.setZero(k, k);
    g.selfadjointView<Eigen::Lower>().rankUpdate(regressors.transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  } else {
    g = *gram;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::estimation, "normal equations are not positive definite");
  }
  Eigen::MatrixXd vcov = llt.solve(meat);
  vcov = llt.solve(vcov.transpose()).transpose();
  vcov = ((vcov + vcov.transpose()) * 0.5).eval();
  return vcov;
}

int FitResult::column(const std::string& name) const {
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    if (column_names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

FitResult fit_design(const HorizonDesign& design, const FitOptions& options) {
  FitResult out;
  out.column_names = design.column_names;
  out.horizon = design.horizon;
  out.n_obs = design.n_rows();
  out.dk_bandwidth = options.dk_bandwidth;

  DemeanedSystem sys;
  if (design.county_effects && design.period_effects) {
    sys = two_way_demean(design.regressors, design.response, design.row_county,
                         design.row_period, options.demean);
  } else if (design.county_effects) {
    sys = one_way_demean(design.regressors, design.response, design.row_county);
  } else if (design.period_effects) {
    sys = one_way_demean(design.regressors, design.response, design.row_period);
  } else {
    sys.regressors = design.regressors;
    sys.response = design.response;
  }
  out.demean_info = sys.info;

  {
    std::vector<int> seen;
    seen = design.row_county;
    std::sort(seen.begin(), seen.end());
    out.n_counties = static_cast<int>(std::unique(seen.begin(), seen.end()) - seen.begin());
    seen = design.row_period;
    std::sort(seen.begin(), seen.end());
    out.n_periods = static_cast<int>(std::unique(seen.begin(), seen.end()) - seen.begin());
  }

  OlsResult ols = ols_fit(sys.regressors, sys.response, &design.column_names, options.ols);
  out.coef = std::move(ols.coef);
  out.vcov = dk_covariance(sys.regressors, ols.residuals, design.row_period,
                           options.dk_bandwidth, options.dk, &ols.gram);
  const int k = static_cast<int>(out.coef.size());
  out.se.resize(k);
  const double diag_scale = std::max(out.vcov.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (int j = 0; j < k; ++j) {
    const double v = out.vcov(j, j);
    if (v < -1e-9 * diag_scale) {
      if (j < design.n_shock_columns) {
        fail(ErrorKind::estimation,
             "covariance has a negative variance for '" + design.column_names[static_cast<std::size_t>(j)] +
                 "'; use the bartlett kernel or a smaller bandwidth");
      }
      ++out.clamped_variances;
    }
    out.se(j) = std::sqrt(std::max(v, 0.0));
  }
  out.residuals = std::move(ols.residuals);
  return out;
}

}  // namespace firelp
