#include "polband/model.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

namespace polband {

Features::Features(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw Error("feature dimension must be at least 1");
  if (values_.size() % dim_ != 0) {
    throw Error("feature buffer size is not a multiple of the dimension");
  }
}

Features Features::subset(std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Features(dim_, std::move(out));
}

Dataset::Dataset(std::span<const Observation> observations) {
  if (observations.empty()) throw Error("dataset must be nonempty");
  const std::size_t d = observations.front().x.size();
  std::vector<double> xs;
  xs.reserve(observations.size() * d);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (o.x.size() != d) {
      throw Error("observation " + std::to_string(i) + " has dimension " +
                  std::to_string(o.x.size()) + ", expected " + std::to_string(d));
    }
    if (o.a != 0 && o.a != 1) {
      throw Error("observation " + std::to_string(i) + ": action must be 0 or 1");
    }
    xs.insert(xs.end(), o.x.begin(), o.x.end());
    a_.push_back(static_cast<std::uint8_t>(o.a));
    y_star_.push_back(o.y_star);
    y_dag_.push_back(o.y_dag);
  }
  x_ = Features(d, std::move(xs));
  validate();
}

Dataset::Dataset(Features x, std::vector<std::uint8_t> a, std::vector<double> y_star,
                 std::vector<double> y_dag)
    : x_(std::move(x)), a_(std::move(a)), y_star_(std::move(y_star)), y_dag_(std::move(y_dag)) {
  validate();
}

void Dataset::validate() const {
  const std::size_t n = a_.size();
  if (n == 0) throw Error("dataset must be nonempty");
  if (x_.size() != n || y_star_.size() != n || y_dag_.size() != n) {
    throw Error("dataset columns have mismatched lengths");
  }
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a_[i] > 1) throw Error("observation " + std::to_string(i) + ": action must be 0 or 1");
    treated += a_[i];
    bool finite = std::isfinite(y_star_[i]) && std::isfinite(y_dag_[i]);
    for (double v : x_.row(i)) finite = finite && std::isfinite(v);
    if (!finite) throw Error("observation " + std::to_string(i) + " has a non-finite field");
  }
  if (treated == 0 || treated == n) {
    throw Error("dataset must contain both actions (found only a=" +
                std::to_string(treated == 0 ? 0 : 1) + ")");
  }
}

Observation Dataset::observation(std::size_t i) const {
  auto row = x_.row(i);
  return Observation{{row.begin(), row.end()}, a_[i], y_star_[i], y_dag_[i]};
}

std::size_t Dataset::count_action(int a) const {
  std::size_t c = 0;
  for (auto v : a_) c += (v == a);
  return c;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<std::uint8_t> a;
  std::vector<double> ys, yd;
  a.reserve(rows.size());
  ys.reserve(rows.size());
  yd.reserve(rows.size());
  for (std::size_t r : rows) {
    a.push_back(a_[r]);
    ys.push_back(y_star_[r]);
    yd.push_back(y_dag_[r]);
  }
  return Dataset(x_.subset(rows), std::move(a), std::move(ys), std::move(yd));
}

int Policy::decide(std::span<const double> x) const {
  if (const auto* t = std::get_if<ThresholdRule>(&rule_)) {
    if (x.empty()) throw Error("threshold policy needs a feature of dimension >= 1");
    return x[0] >= t->a ? 1 : 0;
  }
  if (const auto* b = std::get_if<BoxRule>(&rule_)) {
    if (x.size() < 3) {
      throw Error("box policy needs features of dimension 3, got " + std::to_string(x.size()));
    }
    return (x[0] >= b->a[0] && x[1] >= b->a[1] && x[2] >= b->a[2]) ? 1 : 0;
  }
  throw Error("explicit policies are defined only on their evaluation design");
}

std::string Policy::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (const auto* t = std::get_if<ThresholdRule>(&rule_)) {
    os << "threshold(" << t->a << ")";
  } else if (const auto* b = std::get_if<BoxRule>(&rule_)) {
    os << "box(" << b->a[0] << "," << b->a[1] << "," << b->a[2] << ")";
  } else {
    os << "explicit[" << std::get<ExplicitRule>(rule_).labels.size() << "]";
  }
  return os.str();
}

std::vector<std::uint8_t> evaluate_policy(const Policy& policy, const Features& xs) {
  if (xs.empty()) throw Error("cannot evaluate a policy on an empty design");
  const std::size_t n = xs.size();
  std::vector<std::uint8_t> out(n);
  if (const auto* e = std::get_if<ExplicitRule>(&policy.rule())) {
    if (e->labels.size() != n) {
      throw Error("explicit policy has " + std::to_string(e->labels.size()) +
                  " labels but the design has " + std::to_string(n) + " rows");
    }
    return e->labels;
  }
  if (std::holds_alternative<BoxRule>(policy.rule()) && xs.dim() < 3) {
    throw Error("box policy needs features of dimension 3, got " + std::to_string(xs.dim()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>(policy.decide(xs.row(i)));
  }
  return out;
}

PolicyGrid::PolicyGrid(std::vector<Policy> policies, std::string provenance)
    : policies_(std::move(policies)), provenance_(std::move(provenance)) {
  if (policies_.empty()) throw Error("policy grid must contain at least one policy");
  std::unordered_map<std::string, std::size_t> seen;
  seen.reserve(policies_.size());
  for (std::size_t k = 0; k < policies_.size(); ++k) {
    std::string key = policies_[k].describe();
    if (const auto* e = std::get_if<ExplicitRule>(&policies_[k].rule())) {
      key.append(e->labels.begin(), e->labels.end());
    }
    auto [it, fresh] = seen.emplace(std::move(key), k);
    if (!fresh) {
      throw Error("duplicate policy in grid at indices " + std::to_string(it->second) +
                  " and " + std::to_string(k) + ": " + policies_[k].describe());
    }
  }
}

PolicyGrid PolicyGrid::with_appended(Policy extra, std::string_view note) const {
  std::vector<Policy> ps = policies_;
  ps.push_back(std::move(extra));
  return PolicyGrid(std::move(ps), provenance_ + "; " + std::string(note));
}

PolicyGrid grid_threshold(double lo, double hi, int n_points) {
  if (n_points < 2) throw Error("threshold grid needs at least 2 points");
  if (!(lo < hi)) throw Error("threshold grid needs lo < hi");
  std::vector<Policy> ps;
  ps.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    double a = (i == n_points - 1) ? hi : lo + (hi - lo) * i / (n_points - 1);
    ps.push_back(Policy::threshold(a));
  }
  std::ostringstream os;
  os << "threshold grid: " << n_points << " evenly spaced cutoffs on [" << lo << ", " << hi
     << "]";
  return PolicyGrid(std::move(ps), os.str());
}

PolicyGrid grid_box(double lo, double hi, int per_axis) {
  if (per_axis < 2) throw Error("box grid needs at least 2 points per axis");
  if (!(lo < hi)) throw Error("box grid needs lo < hi");
  std::vector<double> axis(static_cast<std::size_t>(per_axis));
  for (int i = 0; i < per_axis; ++i) {
    axis[i] = (i == per_axis - 1) ? hi : lo + (hi - lo) * i / (per_axis - 1);
  }
  std::vector<Policy> ps;
  ps.reserve(axis.size() * axis.size() * axis.size());
  for (double a1 : axis)
    for (double a2 : axis)
      for (double a3 : axis) ps.push_back(Policy::box(a1, a2, a3));
  std::ostringstream os;
  os << "box grid: " << per_axis << "^3 componentwise cutoffs on [" << lo << ", " << hi << "]";
  return PolicyGrid(std::move(ps), os.str());
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::union_bound: return "union";
    case Method::joint: return "joint";
    case Method::one_step: return "one-step";
    case Method::os_split: return "os-split";
    case Method::oracle: return "oracle";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::union_bound, Method::joint, Method::one_step, Method::os_split,
                   Method::oracle}) {
    if (method_name(m) == name) return m;
  }
  throw Error("unknown method '" + std::string(name) +
              "' (expected union, joint, one-step, os-split, oracle)");
}

}  // namespace polband
