#pragma once

// Core domain types: samples, policies, per-policy estimates, intervals.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace polband {

/// Error raised for invalid inputs and violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome { primary, subsidiary };

struct Observation {
  std::vector<double> x;
  int a = 0;
  double y_star = 0.0;
  double y_dag = 0.0;
};

/// Row-major n x d feature matrix.
class Features {
 public:
  Features() = default;
  Features(std::size_t dim, std::vector<double> values);

  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const double> values() const { return values_; }

  Features subset(std::span<const std::size_t> rows) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// An i.i.d. sample of (X, A, Y*, Y†), stored column-wise.
///
/// Construction validates: nonempty, shared dimension, a in {0,1}, finite
/// fields, and both actions present.
class Dataset {
 public:
  explicit Dataset(std::span<const Observation> observations);
  Dataset(Features x, std::vector<std::uint8_t> a, std::vector<double> y_star,
          std::vector<double> y_dag);

  std::size_t size() const { return a_.size(); }
  std::size_t dim() const { return x_.dim(); }

  const Features& features() const { return x_; }
  std::span<const double> x(std::size_t i) const { return x_.row(i); }
  std::span<const std::uint8_t> actions() const { return a_; }
  std::span<const double> y_star() const { return y_star_; }
  std::span<const double> y_dag() const { return y_dag_; }
  std::span<const double> outcome(Outcome which) const {
    return which == Outcome::primary ? y_star() : y_dag();
  }

  Observation observation(std::size_t i) const;
  std::size_t count_action(int a) const;

  /// Rows in the given order; validated like any other Dataset.
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  void validate() const;

  Features x_;
  std::vector<std::uint8_t> a_;
  std::vector<double> y_star_;
  std::vector<double> y_dag_;
};

struct ThresholdRule {
  double a = 0.0;
  bool operator==(const ThresholdRule&) const = default;
};

struct BoxRule {
  std::array<double, 3> a{};
  bool operator==(const BoxRule&) const = default;
};

struct ExplicitRule {
  std::vector<std::uint8_t> labels;
  bool operator==(const ExplicitRule&) const = default;
};

/// A deterministic binary treatment rule.
///
/// Threshold: 1 iff x[0] >= a. Box: 1 iff x[k] >= a[k] for k = 0,1,2.
/// Explicit: a label per row of a fixed evaluation design.
class Policy {
 public:
  using Rule = std::variant<ThresholdRule, BoxRule, ExplicitRule>;

  Policy(Rule rule) : rule_(std::move(rule)) {}  // NOLINT(implicit)

  static Policy threshold(double a) { return Policy(ThresholdRule{a}); }
  static Policy box(double a1, double a2, double a3) {
    return Policy(BoxRule{{a1, a2, a3}});
  }
  static Policy explicit_labels(std::vector<std::uint8_t> labels) {
    return Policy(ExplicitRule{std::move(labels)});
  }

  const Rule& rule() const { return rule_; }
  bool is_explicit() const { return std::holds_alternative<ExplicitRule>(rule_); }

  /// Decision for a single feature vector; not defined for explicit rules.
  int decide(std::span<const double> x) const;

  std::string describe() const;

  bool operator==(const Policy&) const = default;

 private:
  Rule rule_;
};

/// Decision vector of `policy` on every row of `xs`.
std::vector<std::uint8_t> evaluate_policy(const Policy& policy, const Features& xs);

/// Ordered finite set of policies. Indices are stable and referenced by
/// estimates and band results.
class PolicyGrid {
 public:
  PolicyGrid(std::vector<Policy> policies, std::string provenance);

  std::size_t size() const { return policies_.size(); }
  const Policy& operator[](std::size_t k) const { return policies_[k]; }
  std::span<const Policy> policies() const { return policies_; }
  const std::string& provenance() const { return provenance_; }

  /// Copy of this grid with one more policy at the end.
  PolicyGrid with_appended(Policy extra, std::string_view note) const;

 private:
  std::vector<Policy> policies_;
  std::string provenance_;
};

/// Evenly spaced thresholds lo, ..., hi.
PolicyGrid grid_threshold(double lo, double hi, int n_points);

/// Tensor grid of boxes with `per_axis` thresholds per coordinate.
PolicyGrid grid_box(double lo, double hi, int per_axis);

/// Per-policy estimates and standardized influence matrices.
///
/// Influence matrices are n x K, row-major (observation-major), so that one
/// observation's values across all policies are contiguous.
struct PolicyEstimates {
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<double> omega_hat;
  std::vector<double> psi_hat;
  std::vector<double> sigma_hat;
  std::vector<double> kappa_hat;
  std::vector<std::uint8_t> degenerate;  // 1 if either SD hit the floor
  std::vector<double> influence_primary;     // D_pi / sigma_hat
  std::vector<double> influence_subsidiary;  // D~_pi / kappa_hat

  double f(std::size_t i, std::size_t k) const { return influence_primary[i * K + k]; }
  double ftilde(std::size_t i, std::size_t k) const {
    return influence_subsidiary[i * K + k];
  }
};

enum class Method { union_bound, joint, one_step, os_split, oracle };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  Method method = Method::union_bound;

  double width() const { return upper - lower; }
  bool contains(double lo, double hi) const { return lower <= lo && hi <= upper; }
};

struct Cutoffs {
  double t_beta = 0.0;
  double z_alpha_beta = 0.0;
  double s_dag = 0.0;
  double t_dag = 0.0;
  double u_dag = 0.0;
};

}  // namespace polband
