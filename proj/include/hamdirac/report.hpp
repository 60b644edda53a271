#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chart.hpp"
#include "dirac.hpp"
#include "expr.hpp"
#include "parse.hpp"
#include "variational.hpp"

namespace hamdirac {

enum class Verdict { Pass, Fail, NotApplicable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    default:
      return "not-applicable";
  }
}

struct ReportItem {
  std::string label;
  std::string value;
};

struct ReportSection {
  std::string name;
  std::vector<ReportItem> items;
  std::optional<Verdict> verdict;
  std::optional<std::string> note;  // shown when there are no items
};

struct Report {
  std::string system_name;
  std::vector<ReportSection> sections;
};

namespace detail {

inline std::string class_name(ConstraintClass c) {
  return c == ConstraintClass::FirstClass ? "first-class" : "second-class";
}

}  // namespace detail

/// Assembles the full derivation report: momenta through Hamilton equations,
/// the energy remark on two-field charts, and — when generators are present —
/// the EL-vs-Lie and consistency verdicts.
inline Report build_report(const SystemDefinition& def,
                           const ConstrainedSystem& sys) {
  const ChartPtr& ch = sys.chart;
  Report rep{def.name, {}};

  ReportSection momenta{"momenta", {}, std::nullopt, std::nullopt};
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    momenta.items.push_back(
        {ch->display_name(ch->momentum(i)), render_expr(sys.momenta[i])});
  }
  rep.sections.push_back(std::move(momenta));

  ReportSection constraints{"constraints", {}, std::nullopt, std::nullopt};
  for (const Constraint& c : sys.constraints) {
    constraints.items.push_back(
        {"phi_" + std::to_string(c.index) +
             (c.primary ? " (primary)" : " (secondary)"),
         render_expr(c.expr)});
  }
  if (constraints.items.empty()) constraints.note = "no constraints";
  rep.sections.push_back(std::move(constraints));

  rep.sections.push_back(
      {"base hamiltonian",
       {{"H'", render_expr(sys.base_hamiltonian)}},
       std::nullopt,
       std::nullopt});
  rep.sections.push_back(
      {"total hamiltonian",
       {{"H", render_expr(sys.total_hamiltonian)},
        {"H (substituted)", render_expr(sys.hamiltonian_substituted)}},
       std::nullopt,
       std::nullopt});

  ReportSection matrix{"constraint matrix", {}, std::nullopt, std::nullopt};
  for (std::size_t a = 0; a < sys.constraint_matrix.size(); ++a) {
    for (std::size_t b = 0; b < sys.constraint_matrix[a].size(); ++b) {
      matrix.items.push_back(
          {"C[" + std::to_string(a + 1) + "][" + std::to_string(b + 1) + "]",
           render_expr(sys.constraint_matrix[a][b])});
    }
  }
  if (matrix.items.empty()) matrix.note = "none";
  rep.sections.push_back(std::move(matrix));

  ReportSection multipliers{"multipliers", {}, std::nullopt, std::nullopt};
  for (std::size_t b = 0; b < sys.multipliers.size(); ++b) {
    multipliers.items.push_back(
        {ch->display_name(ch->multiplier(b)),
         sys.multipliers[b] ? render_expr(*sys.multipliers[b])
                            : std::string("undetermined")});
  }
  if (multipliers.items.empty()) multipliers.note = "none";
  rep.sections.push_back(std::move(multipliers));

  ReportSection classification{"classification", {}, std::nullopt, std::nullopt};
  for (std::size_t a = 0; a < sys.constraints.size(); ++a) {
    classification.items.push_back(
        {"phi_" + std::to_string(sys.constraints[a].index),
         detail::class_name(sys.classification[a])});
  }
  if (classification.items.empty()) classification.note = "none";
  rep.sections.push_back(std::move(classification));

  ReportSection hamilton{"hamilton equations", {}, std::nullopt, std::nullopt};
  for (const auto& [v, rhs] : hamilton_equations(sys.hamiltonian_substituted)) {
    hamilton.items.push_back({ch->display_name(v) + "'", render_expr(rhs)});
  }
  rep.sections.push_back(std::move(hamilton));

  if (ch->field_count() == 2) {
    // Two presentations of the total energy: momenta squared plus velocities
    // squared, and the weakly reduced angular form plus velocities squared.
    // They are reported side by side, never asserted equal.
    Expr vel2(ch);
    for (std::size_t i = 0; i < 2; ++i) {
      Expr v = Expr::variable(ch, ch->velocity(i));
      vel2 = vel2 + v * v;
    }
    Expr mom2(ch);
    for (std::size_t i = 0; i < 2; ++i) {
      Expr p = Expr::variable(ch, ch->momentum(i));
      mom2 = mom2 + p * p;
    }
    Expr angular = Expr::variable(ch, ch->field(0)) *
                       Expr::variable(ch, ch->momentum(1)) -
                   Expr::variable(ch, ch->field(1)) *
                       Expr::variable(ch, ch->momentum(0));
    const Rational half = make_rational(1, 2);
    ReportSection energy{"energy remark", {}, std::nullopt, std::nullopt};
    energy.items.push_back(
        {"momentum form", render_expr(mom2 * half + vel2 * half)});
    energy.items.push_back(
        {"reduced form",
         render_expr(weak_reduce(angular * half, sys.constraints) +
                     vel2 * half)});
    rep.sections.push_back(std::move(energy));
  }

  ReportSection el_lie{"EL-vs-Lie verdict", {}, Verdict::NotApplicable,
                       std::nullopt};
  if (def.generators) {
    auto el = euler_lagrange(sys.lagrangian);
    auto cmp = verify_el_equals_lie(el, *def.generators);
    el_lie.verdict = cmp.equivalent ? Verdict::Pass : Verdict::Fail;
    for (std::size_t i = 0; i < cmp.residuals.size(); ++i) {
      el_lie.items.push_back(
          {"residual[" + ch->name(ch->field(i)) + "]",
           render_expr(cmp.residuals[i])});
    }
  } else {
    el_lie.note = "no generators given";
  }
  rep.sections.push_back(std::move(el_lie));

  ReportSection consistency{"consistency verdict", {}, Verdict::Pass,
                            std::nullopt};
  for (const Constraint& c : sys.constraints) {
    Expr drift = weak_reduce(
        poisson_bracket(c.expr, sys.hamiltonian_substituted), sys.constraints);
    if (!drift.is_zero()) consistency.verdict = Verdict::Fail;
    consistency.items.push_back(
        {"weak({phi_" + std::to_string(c.index) + ", H})", render_expr(drift)});
  }
  if (consistency.items.empty()) consistency.note = "no constraints to preserve";
  rep.sections.push_back(std::move(consistency));

  return rep;
}

/// Plain-text rendering: one block per section, two-space indented items.
inline std::string render_text(const Report& rep) {
  std::string out = "system: " + rep.system_name + "\n";
  for (const ReportSection& sec : rep.sections) {
    out += "\n" + sec.name;
    if (sec.verdict) {
      out += ": ";
      out += to_string(*sec.verdict);
    } else {
      out += ":";
    }
    out += "\n";
    for (const ReportItem& item : sec.items) {
      out += "  " + item.label + " = " + item.value + "\n";
    }
    if (sec.items.empty() && sec.note) {
      out += "  " + *sec.note + "\n";
    }
  }
  return out;
}

/// JSON rendering, mirroring the report one-to-one. Section and item order
/// is preserved through arrays; all Expr strings re-parse in the system's
/// chart.
inline nlohmann::json render_json(const Report& rep) {
  nlohmann::json sections = nlohmann::json::array();
  for (const ReportSection& sec : rep.sections) {
    nlohmann::json j;
    j["name"] = sec.name;
    nlohmann::json items = nlohmann::json::array();
    for (const ReportItem& item : sec.items) {
      items.push_back({{"label", item.label}, {"value", item.value}});
    }
    j["items"] = std::move(items);
    if (sec.verdict) j["verdict"] = to_string(*sec.verdict);
    if (sec.note) j["note"] = *sec.note;
    sections.push_back(std::move(j));
  }
  return nlohmann::json{{"system", rep.system_name},
                        {"sections", std::move(sections)}};
}

}  // namespace hamdirac
