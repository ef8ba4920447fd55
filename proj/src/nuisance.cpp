#include "polband/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace polband {

std::vector<double> silverman_bandwidth(const Features& x) {
  const std::size_t n = x.size();
  const std::size_t d = x.dim();
  const double factor =
      std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(n)),
               1.0 / (static_cast<double>(d) + 4.0));
  std::vector<double> h(d, 1.0);
  if (n < 2) return h;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.row(i)[k];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = x.row(i)[k] - mean;
      ss += c * c;
    }
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    // A constant coordinate contributes the same factor to every weight.
    if (sd > 0.0) h[k] = sd * factor;
  }
  return h;
}

KernelSmoother::KernelSmoother(Features x, std::vector<std::vector<double>> responses,
                               std::vector<double> bandwidth)
    : x_(std::move(x)), responses_(std::move(responses)), bandwidth_(std::move(bandwidth)) {
  if (x_.empty()) throw Error("kernel smoother needs at least one observation");
  if (bandwidth_.size() != x_.dim()) throw Error("bandwidth dimension mismatch");
  for (double h : bandwidth_) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error("bandwidth must be positive and finite");
    inv_h_.push_back(1.0 / h);
  }
  for (const auto& r : responses_) {
    if (r.size() != x_.size()) throw Error("response length does not match features");
  }
  const std::size_t n = x_.size(), d = x_.dim();
  scaled_x_.resize(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) scaled_x_[i * d + k] = x_.row(i)[k] * inv_h_[k];
}

void KernelSmoother::predict(std::span<const double> x, std::span<double> out) const {
  const std::size_t n = x_.size(), d = x_.dim();
  if (x.size() != d) {
    throw Error("kernel smoother expects dimension " + std::to_string(d) + ", got " +
                std::to_string(x.size()));
  }
  thread_local std::vector<double> dist;
  dist.resize(n);
  double z[8];
  std::vector<double> zbuf;
  double* zp = z;
  if (d > 8) {
    zbuf.resize(d);
    zp = zbuf.data();
  }
  for (std::size_t k = 0; k < d; ++k) zp[k] = x[k] * inv_h_[k];

  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scaled_x_.data() + i * d;
    double u = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double c = zp[k] - row[k];
      u += c * c;
    }
    dist[i] = u;
    dmin = std::min(dmin, u);
  }
  // Weights relative to the nearest point never all underflow.
  double wsum = 0.0;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = std::exp(-0.5 * (dist[i] - dmin));
    wsum += w;
    for (std::size_t c = 0; c < responses_.size(); ++c) out[c] += w * responses_[c][i];
  }
  for (double& v : out) v /= wsum;
}

double KernelSmoother::predict(std::span<const double> x, std::size_t column) const {
  double buf[4];
  std::vector<double> big;
  std::span<double> out(buf, responses_.size());
  if (responses_.size() > 4) {
    big.resize(responses_.size());
    out = big;
  }
  predict(x, out);
  return out[column];
}

namespace {

struct ArmSplit {
  std::array<std::vector<std::size_t>, 2> rows;
};

ArmSplit split_arms(const Dataset& data) {
  ArmSplit s;
  for (std::size_t i = 0; i < data.size(); ++i) s.rows[data.actions()[i]].push_back(i);
  return s;
}

std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::vector<double> resolve_bandwidth(const Features& x, Bandwidth bw) {
  if (bw.automatic) return silverman_bandwidth(x);
  if (!(bw.value > 0.0) || !std::isfinite(bw.value)) {
    throw Error("bandwidth must be positive, got " + std::to_string(bw.value));
  }
  return std::vector<double>(x.dim(), bw.value);
}

KernelSmoother arm_smoother(const Dataset& data, std::span<const std::size_t> rows,
                            std::vector<std::vector<double>> responses, Bandwidth bw) {
  Features x = data.features().subset(rows);
  auto h = resolve_bandwidth(x, bw);
  return KernelSmoother(std::move(x), std::move(responses), std::move(h));
}

void check_arms(const ArmSplit& s) {
  for (int a = 0; a < 2; ++a) {
    if (s.rows[a].empty()) {
      throw Error("no observations with action " + std::to_string(a) +
                  "; the regression for that arm cannot be estimated");
    }
  }
}

}  // namespace

RegressionFunction fit_kernel_regression(const Dataset& data, Outcome outcome,
                                         Bandwidth bandwidth) {
  ArmSplit s = split_arms(data);
  check_arms(s);
  auto y = data.outcome(outcome);
  return RegressionFunction(arm_smoother(data, s.rows[0], {pick(y, s.rows[0])}, bandwidth),
                            arm_smoother(data, s.rows[1], {pick(y, s.rows[1])}, bandwidth));
}

PropensityFunction::PropensityFunction(std::function<double(std::span<const double>)> p1,
                                       double clip)
    : known_(std::move(p1)), clip_(clip) {
  if (!(clip_ > 0.0 && clip_ < 0.5)) throw Error("propensity clip must lie in (0, 0.5)");
  if (!known_) throw Error("known propensity requires a function");
}

PropensityFunction::PropensityFunction(KernelSmoother smoother, double clip)
    : smoother_(std::move(smoother)), clip_(clip) {
  if (!(clip_ > 0.0 && clip_ < 0.5)) throw Error("propensity clip must lie in (0, 0.5)");
}

double PropensityFunction::treated(std::span<const double> x) const {
  double p = known_ ? known_(x) : smoother_->predict(x);
  if (!std::isfinite(p)) throw Error("propensity evaluated to a non-finite value");
  return std::clamp(p, clip_, 1.0 - clip_);
}

PropensityFunction fit_propensity(const Dataset& data, const PropensityMethod& method,
                                  double clip, Bandwidth bandwidth) {
  if (!(clip > 0.0 && clip < 0.5)) throw Error("propensity clip must lie in (0, 0.5)");
  if (method.kind == PropensityMethod::Kind::known) return PropensityFunction(method.p1, clip);
  if (data.count_action(1) == 0 || data.count_action(1) == data.size()) {
    throw Error("kernel propensity needs both actions present");
  }
  std::vector<double> a(data.actions().begin(), data.actions().end());
  auto h = resolve_bandwidth(data.features(), bandwidth);
  return PropensityFunction(KernelSmoother(data.features(), {std::move(a)}, std::move(h)), clip);
}

NuisanceModel::NuisanceModel(PropensityFunction propensity, KernelSmoother control,
                             KernelSmoother treated)
    : propensity_(std::move(propensity)), arms_{std::move(control), std::move(treated)} {}

NuisanceValues NuisanceModel::evaluate(std::span<const double> x) const {
  NuisanceValues v;
  v.p1 = propensity_.treated(x);
  double out[2];
  for (int a = 0; a < 2; ++a) {
    arms_[a].predict(x, out);
    v.primary[a] = out[0];
    v.subsidiary[a] = out[1];
  }
  return v;
}

NuisanceModel fit_nuisance_model(const Dataset& data, const NuisanceRecipe& recipe) {
  ArmSplit s = split_arms(data);
  check_arms(s);
  auto prop = fit_propensity(data, recipe.propensity, recipe.clip, recipe.bandwidth);
  std::array<KernelSmoother, 2> arms = {
      arm_smoother(data, s.rows[0],
                   {pick(data.y_star(), s.rows[0]), pick(data.y_dag(), s.rows[0])},
                   recipe.bandwidth),
      arm_smoother(data, s.rows[1],
                   {pick(data.y_star(), s.rows[1]), pick(data.y_dag(), s.rows[1])},
                   recipe.bandwidth)};
  return NuisanceModel(std::move(prop), std::move(arms[0]), std::move(arms[1]));
}

NuisanceFit::NuisanceFit(std::vector<NuisanceModel> models, std::vector<int> folds,
                         NuisanceTable table)
    : models_(std::move(models)), folds_(std::move(folds)), table_(std::move(table)) {
  if (models_.empty()) throw Error("nuisance fit needs at least one model");
}

NuisanceValues NuisanceFit::evaluate(std::span<const double> x) const {
  if (models_.size() == 1) return models_.front().evaluate(x);
  NuisanceValues acc{0.0, {0.0, 0.0}, {0.0, 0.0}};
  for (const auto& m : models_) {
    NuisanceValues v = m.evaluate(x);
    acc.p1 += v.p1;
    for (int a = 0; a < 2; ++a) {
      acc.primary[a] += v.primary[a];
      acc.subsidiary[a] += v.subsidiary[a];
    }
  }
  const double k = static_cast<double>(models_.size());
  acc.p1 /= k;
  for (int a = 0; a < 2; ++a) {
    acc.primary[a] /= k;
    acc.subsidiary[a] /= k;
  }
  return acc;
}

double NuisanceFit::propensity(int a, std::span<const double> x) const {
  double p = evaluate(x).p1;
  return a == 1 ? p : 1.0 - p;
}
double NuisanceFit::reg_primary(int a, std::span<const double> x) const {
  return evaluate(x).primary[a];
}
double NuisanceFit::reg_subsidiary(int a, std::span<const double> x) const {
  return evaluate(x).subsidiary[a];
}
double NuisanceFit::cate_primary(std::span<const double> x) const {
  auto v = evaluate(x);
  return v.primary[1] - v.primary[0];
}
double NuisanceFit::cate_subsidiary(std::span<const double> x) const {
  auto v = evaluate(x);
  return v.subsidiary[1] - v.subsidiary[0];
}

std::optional<std::span<const int>> NuisanceFit::fold_assignment() const {
  if (folds_.empty()) return std::nullopt;
  return std::span<const int>(folds_);
}

namespace {

NuisanceTable allocate_table(std::size_t n) {
  NuisanceTable t;
  t.p1.resize(n);
  for (int a = 0; a < 2; ++a) {
    t.primary[a].resize(n);
    t.subsidiary[a].resize(n);
  }
  return t;
}

void store(NuisanceTable& t, std::size_t i, const NuisanceValues& v) {
  t.p1[i] = v.p1;
  for (int a = 0; a < 2; ++a) {
    t.primary[a][i] = v.primary[a];
    t.subsidiary[a][i] = v.subsidiary[a];
  }
}

}  // namespace

NuisanceFit fit_nuisance(const Dataset& data, const NuisanceRecipe& recipe) {
  NuisanceModel model = fit_nuisance_model(data, recipe);
  const std::size_t n = data.size();
  NuisanceTable table = allocate_table(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) store(table, i, model.evaluate(data.x(i)));
  std::vector<NuisanceModel> models;
  models.push_back(std::move(model));
  return NuisanceFit(std::move(models), {}, std::move(table));
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("cross-fitting needs at least 2 folds");
  if (static_cast<std::size_t>(folds) > n) {
    throw Error("cannot split " + std::to_string(n) + " observations into " +
                std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

NuisanceFit cross_fit(const Dataset& data, int folds, const NuisanceRecipe& recipe,
                      std::uint64_t seed) {
  auto fold_of = assign_folds(data.size(), folds, seed);
  return cross_fit(data, fold_of, folds, recipe);
}

NuisanceFit cross_fit(const Dataset& data, std::span<const int> fold_of, int folds,
                      const NuisanceRecipe& recipe) {
  const std::size_t n = data.size();
  if (fold_of.size() != n) throw Error("fold assignment length does not match the data");
  std::vector<NuisanceModel> models;
  models.reserve(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] != f) train.push_back(i);
    }
    std::array<std::size_t, 2> count{0, 0};
    for (auto i : train) ++count[data.actions()[i]];
    if (count[0] == 0 || count[1] == 0) {
      throw Error("cross-fitting fold " + std::to_string(f) +
                  ": training complement has no observations with action " +
                  std::to_string(count[0] == 0 ? 0 : 1));
    }
    models.push_back(fit_nuisance_model(data.subset(train), recipe));
  }
  NuisanceTable table = allocate_table(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    store(table, i, models[static_cast<std::size_t>(fold_of[i])].evaluate(data.x(i)));
  }
  return NuisanceFit(std::move(models), {fold_of.begin(), fold_of.end()}, std::move(table));
}

}  // namespace polband
