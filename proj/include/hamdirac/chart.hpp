#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hamdirac {

/// Role a variable plays in the jet/phase coordinates of one system.
enum class VarKind { Field, Velocity, Acceleration, Momentum, Multiplier };

/// Handle into a JetChart's registry. Registration order doubles as the
/// variable order used by the monomial ordering, so the handle is just an
/// index; names and kinds live in the chart.
struct VarId {
  std::uint32_t index = 0;
  friend constexpr auto operator<=>(const VarId&, const VarId&) = default;
};

class JetChart;
using ChartPtr = std::shared_ptr<const JetChart>;

/// Variable registry for one dynamical system: the fields q_i with their
/// first and second jet prolongations (q_i', q_i''), conjugate momenta
/// (p_<q_i>), and one Lagrange-multiplier symbol per field (lambda_k).
/// The evolution parameter is kept by name only; it never occurs inside
/// polynomial expressions.
///
/// Charts are immutable after construction. Expressions remember their chart
/// by pointer, so "same chart" means "same JetChart object".
///
/// Registration order (which fixes the monomial ordering) is: all fields in
/// declaration order, then all velocities, accelerations, momenta, and
/// multipliers, each block in field order.
class JetChart {
 public:
  /// `aliases` maps canonical names to display names (e.g. "p_f" -> "p");
  /// aliases resolve in find() and take precedence in display_name().
  explicit JetChart(std::vector<std::string> fields,
                    std::string parameter = "alpha",
                    std::map<std::string, std::string> aliases = {})
      : parameter_(std::move(parameter)), field_count_(fields.size()) {
    if (fields.empty()) {
      throw std::invalid_argument("JetChart: at least one field required");
    }
    validate_identifier(parameter_);
    for (const auto& f : fields) validate_identifier(f);

    names_.reserve(5 * field_count_);
    for (const auto& f : fields) register_name(f, VarKind::Field);
    for (const auto& f : fields) register_name(f + "'", VarKind::Velocity);
    for (const auto& f : fields) register_name(f + "''", VarKind::Acceleration);
    for (const auto& f : fields) register_name("p_" + f, VarKind::Momentum);
    for (std::size_t k = 0; k < field_count_; ++k) {
      register_name("lambda_" + std::to_string(k + 1), VarKind::Multiplier);
    }
    if (by_name_.count(parameter_) != 0) {
      throw std::invalid_argument("JetChart: parameter name '" + parameter_ +
                                  "' collides with a variable");
    }

    display_ = names_;
    for (const auto& [canonical, alias] : aliases) {
      auto it = by_name_.find(canonical);
      if (it == by_name_.end()) {
        throw std::invalid_argument("JetChart: alias for unknown variable '" +
                                    canonical + "'");
      }
      validate_identifier(alias);
      if (by_name_.count(alias) != 0) {
        throw std::invalid_argument("JetChart: alias '" + alias +
                                    "' collides with a variable");
      }
      display_[it->second] = alias;
      if (!by_alias_.emplace(alias, VarId{it->second}).second) {
        throw std::invalid_argument("JetChart: duplicate alias '" + alias + "'");
      }
    }
  }

  std::size_t size() const { return names_.size(); }
  std::size_t field_count() const { return field_count_; }
  const std::string& parameter() const { return parameter_; }

  VarId field(std::size_t i) const { return at_block(0, i); }
  VarId velocity(std::size_t i) const { return at_block(1, i); }
  VarId acceleration(std::size_t i) const { return at_block(2, i); }
  VarId momentum(std::size_t i) const { return at_block(3, i); }
  VarId multiplier(std::size_t k) const { return at_block(4, k); }

  VarKind kind(VarId v) const {
    check(v);
    return static_cast<VarKind>(v.index / field_count_);
  }

  /// Position of v inside its kind block (e.g. which field, which momentum).
  std::size_t position(VarId v) const {
    check(v);
    return v.index % field_count_;
  }

  VarId velocity_of(VarId field) const { return shifted(field, VarKind::Field, 1); }
  VarId acceleration_of(VarId v) const {
    return kind(v) == VarKind::Velocity ? shifted(v, VarKind::Velocity, 1)
                                        : shifted(v, VarKind::Field, 2);
  }
  VarId momentum_of(VarId field) const { return shifted(field, VarKind::Field, 3); }

  /// The field a velocity, acceleration, or momentum variable belongs to.
  VarId field_of(VarId v) const {
    if (kind(v) == VarKind::Multiplier) {
      throw std::invalid_argument("JetChart: multiplier has no base field");
    }
    return VarId{static_cast<std::uint32_t>(position(v))};
  }

  const std::string& name(VarId v) const {
    check(v);
    return names_[v.index];
  }

  const std::string& display_name(VarId v) const {
    check(v);
    return display_[v.index];
  }

  /// Resolves a canonical name or an alias.
  std::optional<VarId> find(std::string_view ident) const {
    auto it = by_name_.find(std::string(ident));
    if (it != by_name_.end()) return VarId{it->second};
    auto ai = by_alias_.find(std::string(ident));
    if (ai != by_alias_.end()) return ai->second;
    return std::nullopt;
  }

 private:
  static void validate_identifier(const std::string& s) {
    auto alpha = [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    };
    auto alnum = [&](char c) { return alpha(c) || (c >= '0' && c <= '9') || c == '_'; };
    bool ok = !s.empty() && alpha(s.front());
    for (char c : s) ok = ok && alnum(c);
    if (!ok) {
      throw std::invalid_argument("JetChart: invalid identifier '" + s + "'");
    }
  }

  void register_name(std::string n, VarKind kind) {
    (void)kind;
    auto idx = static_cast<std::uint32_t>(names_.size());
    if (!by_name_.emplace(n, idx).second) {
      throw std::invalid_argument("JetChart: duplicate variable name '" + n + "'");
    }
    names_.push_back(std::move(n));
  }

  void check(VarId v) const {
    if (v.index >= names_.size()) {
      throw std::out_of_range("JetChart: variable id out of range");
    }
  }

  VarId at_block(std::size_t block, std::size_t i) const {
    if (i >= field_count_) {
      throw std::out_of_range("JetChart: field index out of range");
    }
    return VarId{static_cast<std::uint32_t>(block * field_count_ + i)};
  }

  VarId shifted(VarId v, VarKind expected, std::size_t blocks) const {
    if (kind(v) != expected) {
      throw std::invalid_argument("JetChart: variable '" + name(v) +
                                  "' has the wrong kind for this lookup");
    }
    return VarId{static_cast<std::uint32_t>(v.index + blocks * field_count_)};
  }

  std::string parameter_;
  std::size_t field_count_;
  std::vector<std::string> names_;
  std::vector<std::string> display_;
  std::map<std::string, std::uint32_t> by_name_;
  std::map<std::string, VarId> by_alias_;
};

inline ChartPtr make_chart(std::vector<std::string> fields,
                           std::string parameter = "alpha",
                           std::map<std::string, std::string> aliases = {}) {
  return std::make_shared<const JetChart>(std::move(fields), std::move(parameter),
                                          std::move(aliases));
}

/// The chart used throughout the plane-rotation example: fields (f, g) with
/// the traditional momentum names p and s.
inline ChartPtr make_so2_chart() {
  return make_chart({"f", "g"}, "alpha", {{"p_f", "p"}, {"p_g", "s"}});
}

}  // namespace hamdirac
