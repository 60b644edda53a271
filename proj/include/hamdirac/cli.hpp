#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dirac.hpp"
#include "expr.hpp"
#include "flow.hpp"
#include "parse.hpp"
#include "report.hpp"
#include "variational.hpp"

namespace hamdirac {
namespace cli_detail {

inline std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Pretty one-error rendering with line/column and a caret under the span.
inline std::string format_parse_error(const std::string& label,
                                      const std::string& text,
                                      const ParseError& err) {
  std::size_t line = 1, line_start = 0;
  const std::size_t begin = std::min(err.span.begin, text.size());
  for (std::size_t i = 0; i < begin; ++i) {
    if (text[i] == '\n') {
      ++line;
      line_start = i + 1;
    }
  }
  std::size_t line_end = text.find('\n', line_start);
  if (line_end == std::string::npos) line_end = text.size();
  const std::size_t col = begin - line_start + 1;

  std::string out = label + ":" + std::to_string(line) + ":" +
                    std::to_string(col) + ": error: " + err.message + "\n";
  out += "  " + text.substr(line_start, line_end - line_start) + "\n";
  std::size_t width = err.span.end > err.span.begin ? err.span.end - err.span.begin : 1;
  width = std::min(width, line_end > begin ? line_end - begin : 1);
  if (width == 0) width = 1;
  out += "  " + std::string(col - 1, ' ') + std::string(width, '^') + "\n";
  return out;
}

inline std::optional<SystemDefinition> load_system(const std::string& path,
                                                   std::ostream& err) {
  auto text = read_file(path);
  if (!text) {
    err << path << ": error: cannot open file\n";
    return std::nullopt;
  }
  auto parsed = parse_system_file(*text);
  if (!parsed.ok()) {
    err << format_parse_error(path, *text, *parsed.error);
    return std::nullopt;
  }
  return std::move(*parsed.value);
}

/// Velocity-free expressions for every momentum in terms of the fields:
/// unconstrained momenta through the Legendre map with the velocities
/// replaced by the generators, constrained momenta through their solved
/// forms with any unsolved momenta substituted away. The map restricts
/// phase-space expressions onto the image of the generator flow.
inline std::map<VarId, Expr> momentum_field_exprs(const ConstrainedSystem& sys,
                                                  const std::optional<LieSystem>& gen) {
  const ChartPtr& ch = sys.chart;
  std::map<VarId, bool> constrained;
  for (const Constraint& c : sys.constraints) constrained[c.momentum] = true;

  std::map<VarId, Expr> velocity_images;
  std::map<VarId, Expr> out;
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    const VarId p = ch->momentum(i);
    if (constrained.count(p)) continue;
    if (!gen) {
      throw std::runtime_error(
          "momentum '" + ch->display_name(p) +
          "' is unconstrained and there are no [generators] to infer it; "
          "give a full phase-space initial state");
    }
    if (velocity_images.empty()) {
      for (std::size_t j = 0; j < ch->field_count(); ++j) {
        velocity_images.emplace(ch->velocity(j), gen->generator(j));
      }
    }
    out.emplace(p, substitute(sys.momenta[i], velocity_images));
  }
  for (const Constraint& c : sys.constraints) {
    out.emplace(c.momentum, substitute(c.solved, out));
  }
  return out;
}

inline std::optional<std::vector<double>> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(pos, comma - pos);
    // trim
    std::size_t b = item.find_first_not_of(" \t");
    std::size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos) return std::nullopt;
    item = item.substr(b, e - b + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) return std::nullopt;
    out.push_back(value);
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string fmt(double v) { return detail::format_double(v); }

struct GlobalFlags {
  bool json = false;
  bool quiet = false;
};

// ---------------------------------------------------------------------------
// derive

inline int cmd_derive(const std::string& path, const GlobalFlags& flags,
                      std::ostream& out, std::ostream& err) {
  auto def = load_system(path, err);
  if (!def) return 2;
  try {
    ConstrainedSystem sys = derive_constrained_system(def->lagrangian);
    Report rep = build_report(*def, sys);
    if (!flags.quiet) {
      if (flags.json) {
        out << render_json(rep).dump(2) << "\n";
      } else {
        out << render_text(rep);
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << path << ": error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// bracket

inline int cmd_bracket(const std::string& path, const std::string& a_text,
                       const std::string& b_text, bool weak,
                       const GlobalFlags& flags, std::ostream& out,
                       std::ostream& err) {
  auto def = load_system(path, err);
  if (!def) return 2;
  auto a = parse_expr(a_text, def->chart);
  if (!a.ok()) {
    err << format_parse_error("<expression A>", a_text, *a.error);
    return 2;
  }
  auto b = parse_expr(b_text, def->chart);
  if (!b.ok()) {
    err << format_parse_error("<expression B>", b_text, *b.error);
    return 2;
  }
  try {
    Expr bracket = poisson_bracket(*a.value, *b.value);
    std::optional<Expr> reduced;
    if (weak) {
      ConstrainedSystem sys = derive_constrained_system(def->lagrangian);
      reduced = weak_reduce(bracket, sys.constraints);
    }
    if (!flags.quiet) {
      if (flags.json) {
        nlohmann::json j{{"system", def->name},
                         {"a", render_expr(*a.value)},
                         {"b", render_expr(*b.value)},
                         {"bracket", render_expr(bracket)}};
        if (reduced) j["weak"] = render_expr(*reduced);
        out << j.dump(2) << "\n";
      } else {
        out << render_expr(bracket) << "\n";
        if (reduced) out << "weak: " << render_expr(*reduced) << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << path << ": error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// integrate

struct IntegrateFlags {
  std::string init;       // comma-separated, empty = use file/[integrate]
  double alpha_max = 0.0;
  bool has_alpha_max = false;
  double step = 0.0;
  bool has_step = false;
  std::string out_path;   // empty = no CSV
  bool reduced = false;
};

inline int cmd_integrate(const std::string& path, const IntegrateFlags& opts,
                         const GlobalFlags& flags, std::ostream& out,
                         std::ostream& err) {
  auto def = load_system(path, err);
  if (!def) return 2;

  const ChartPtr& ch = def->chart;
  const std::size_t n = ch->field_count();

  try {
    ConstrainedSystem sys = derive_constrained_system(def->lagrangian);
    auto eqs = hamilton_equations(sys.hamiltonian_substituted);

    // Build the compiled field (full phase space, or fields plus completed
    // momenta in reduced mode).
    std::optional<CompiledField> field;
    if (opts.reduced) {
      if (!def->generators) {
        err << path << ": error: --reduced needs a [generators] section\n";
        return 2;
      }
      std::vector<std::pair<VarId, Expr>> lie;
      for (std::size_t i = 0; i < n; ++i) {
        lie.emplace_back(ch->field(i), def->generators->generator(i));
      }
      auto momentum_map = momentum_field_exprs(sys, def->generators);
      std::vector<std::pair<VarId, Expr>> completion;
      for (std::size_t i = 0; i < n; ++i) {
        completion.emplace_back(ch->momentum(i),
                                momentum_map.at(ch->momentum(i)));
      }
      field = compile_field(lie, ch, std::move(completion),
                            make_monitors(sys, lie));
    } else {
      field = compile_field(eqs, ch, {}, make_monitors(sys, eqs));
    }

    // Initial state: --init beats the [integrate] section; a field-count
    // list has its momenta filled from the constraint surface / Legendre
    // map, a double-length list is taken as the full phase point.
    std::vector<double> given;
    if (!opts.init.empty()) {
      auto parsed = parse_double_list(opts.init);
      if (!parsed) {
        err << "hamdirac: error: --init expects comma-separated numbers\n";
        return 2;
      }
      given = std::move(*parsed);
    } else if (def->integrate.provided && !def->integrate.init.empty()) {
      given = def->integrate.init;
    } else {
      err << path
          << ": error: no initial state; pass --init or add an [integrate] "
             "section\n";
      return 2;
    }

    std::vector<double> full;
    if (given.size() == n) {
      full = given;
      full.resize(2 * n, 0.0);
      auto momentum_map = momentum_field_exprs(sys, def->generators);
      std::map<VarId, double> point;
      for (std::size_t i = 0; i < n; ++i) point[ch->field(i)] = given[i];
      for (std::size_t i = 0; i < n; ++i) {
        full[n + i] = eval_numeric(momentum_map.at(ch->momentum(i)), point);
      }
    } else if (given.size() == 2 * n) {
      full = given;
    } else {
      err << "hamdirac: error: --init needs " << n << " or " << 2 * n
          << " values, got " << given.size() << "\n";
      return 2;
    }

    double alpha_max = 0.0;
    if (opts.has_alpha_max) {
      alpha_max = opts.alpha_max;
    } else if (def->integrate.alpha_max) {
      alpha_max = *def->integrate.alpha_max;
    } else {
      err << path
          << ": error: no alpha_max; pass --alpha-max or add it to "
             "[integrate]\n";
      return 2;
    }
    double step = 1e-3;
    if (opts.has_step) {
      step = opts.step;
    } else if (def->integrate.step) {
      step = *def->integrate.step;
    }
    if (!(step > 0.0)) {
      err << "hamdirac: error: step must be positive\n";
      return 2;
    }
    if (!(alpha_max >= 0.0)) {
      err << "hamdirac: error: alpha_max must be nonnegative\n";
      return 2;
    }

    PhaseState init{0.0, {}};
    init.values.assign(full.begin(),
                       opts.reduced ? full.begin() + static_cast<long>(n)
                                    : full.end());

    Trajectory traj;
    try {
      traj = integrate(*field, init, alpha_max, step);
    } catch (const std::runtime_error& e) {
      err << path << ": integration failed: " << e.what() << "\n";
      return 1;
    }

    if (!opts.out_path.empty()) {
      std::ofstream csv(opts.out_path, std::ios::binary);
      if (!csv) {
        err << opts.out_path << ": error: cannot open for writing\n";
        return 2;
      }
      write_csv(csv, traj, *field);
    }

    MonitorReport rep = monitor_report(traj);
    const PhaseState& last = traj.states.back();
    auto layout = field->layout();
    if (!flags.quiet) {
      if (flags.json) {
        nlohmann::json final_state;
        for (std::size_t i = 0; i < layout.size(); ++i) {
          final_state[ch->display_name(layout[i])] = last.values[i];
        }
        nlohmann::json j{{"system", def->name},
                         {"states", traj.states.size()},
                         {"final_alpha", last.alpha},
                         {"final_state", final_state},
                         {"max_hamiltonian_drift", rep.max_hamiltonian_drift},
                         {"max_radius2_drift", rep.max_radius2_drift},
                         {"max_constraint", rep.max_constraint},
                         {"max_em_residual", rep.max_em_residual}};
        if (!opts.out_path.empty()) j["csv"] = opts.out_path;
        out << j.dump(2) << "\n";
      } else {
        out << "states: " << traj.states.size() << "\n";
        out << "final alpha: " << fmt(last.alpha) << "\n";
        for (std::size_t i = 0; i < layout.size(); ++i) {
          out << "final " << ch->display_name(layout[i]) << " = "
              << fmt(last.values[i]) << "\n";
        }
        out << "max |dH| = " << fmt(rep.max_hamiltonian_drift) << "\n";
        out << "max |dradius2| = " << fmt(rep.max_radius2_drift) << "\n";
        for (std::size_t a = 0; a < rep.max_constraint.size(); ++a) {
          out << "max |phi_" << (a + 1) << "| = " << fmt(rep.max_constraint[a])
              << "\n";
        }
        out << "max |em_residual| = " << fmt(rep.max_em_residual) << "\n";
        if (!opts.out_path.empty()) out << "csv: " << opts.out_path << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << path << ": error: " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  Verdict verdict;
};

inline int cmd_verify(const std::string& path, const GlobalFlags& flags,
                      std::ostream& out, std::ostream& err) {
  auto def = load_system(path, err);
  if (!def) return 2;

  const ChartPtr& ch = def->chart;
  const std::size_t n = ch->field_count();

  try {
    ConstrainedSystem sys = derive_constrained_system(def->lagrangian);
    std::vector<CheckResult> checks;
    auto add = [&](std::string name, bool ok) {
      checks.push_back({std::move(name), ok ? Verdict::Pass : Verdict::Fail});
    };
    auto add_na = [&](std::string name) {
      checks.push_back({std::move(name), Verdict::NotApplicable});
    };

    {
      bool ok = true;
      for (const Constraint& c : sys.constraints) {
        ok = ok && weak_reduce(c.expr, sys.constraints).is_zero();
      }
      add("constraints weakly vanish", ok);
    }
    {
      bool ok = true;
      for (VarId v : sys.base_hamiltonian.variables()) {
        VarKind k = ch->kind(v);
        ok = ok && k != VarKind::Velocity && k != VarKind::Acceleration;
      }
      add("base hamiltonian is velocity-free", ok);
    }
    add("total hamiltonian weakly reduces to the base",
        weak_reduce(sys.total_hamiltonian, sys.constraints) ==
            sys.base_hamiltonian);
    {
      bool ok = true;
      const auto& c = sys.constraint_matrix;
      for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
          ok = ok && c[i][j] == -c[j][i];
        }
      }
      add("constraint matrix is antisymmetric", ok);
    }
    {
      bool ok = true;
      for (const Constraint& c : sys.constraints) {
        Expr drift =
            weak_reduce(poisson_bracket(c.expr, sys.hamiltonian_substituted),
                        sys.constraints);
        ok = ok && drift.is_zero();
      }
      add("constraints preserved under the flow", ok);
    }
    {
      bool ok = true;
      auto roundtrips = [&](const Expr& e) {
        auto back = parse_expr(render_expr(e), ch);
        return back.ok() && *back.value == e;
      };
      for (const Expr& m : sys.momenta) ok = ok && roundtrips(m);
      for (const Constraint& c : sys.constraints) ok = ok && roundtrips(c.expr);
      ok = ok && roundtrips(sys.base_hamiltonian);
      ok = ok && roundtrips(sys.total_hamiltonian);
      for (const auto& row : sys.constraint_matrix) {
        for (const Expr& e : row) ok = ok && roundtrips(e);
      }
      for (const auto& [v, rhs] :
           hamilton_equations(sys.hamiltonian_substituted)) {
        ok = ok && roundtrips(rhs);
      }
      add("rendered expressions re-parse canonically", ok);
    }

    const bool determined =
        std::all_of(sys.multipliers.begin(), sys.multipliers.end(),
                    [](const std::optional<Expr>& m) { return m.has_value(); });

    if (def->generators) {
      auto el = euler_lagrange(sys.lagrangian);
      auto cmp = verify_el_equals_lie(el, *def->generators);
      add("EL equations match the Lie flow", cmp.equivalent);
    } else {
      add_na("EL equations match the Lie flow");
    }

    if (def->generators && determined) {
      auto momentum_map = momentum_field_exprs(sys, def->generators);
      auto restrict_to_flow = [&](const Expr& e) {
        return substitute(e, momentum_map);
      };
      bool ok = true;
      auto eqs = hamilton_equations(sys.hamiltonian_substituted);
      for (std::size_t i = 0; i < n; ++i) {
        ok = ok &&
             restrict_to_flow(eqs[i].second) == def->generators->generator(i);
      }
      for (std::size_t i = 0; i < n; ++i) {
        // transport of the momentum's restriction along the generators
        Expr restricted = momentum_map.at(ch->momentum(i));
        Expr transport(ch);
        for (std::size_t j = 0; j < n; ++j) {
          transport = transport + partial_derivative(restricted, ch->field(j)) *
                                      def->generators->generator(j);
        }
        ok = ok && restrict_to_flow(eqs[n + i].second) == transport;
      }
      add("hamilton equations restrict to the Lie flow", ok);
    } else {
      add_na("hamilton equations restrict to the Lie flow");
    }

    if (def->generators && determined) {
      auto eqs = hamilton_equations(sys.hamiltonian_substituted);
      CompiledField hamilton_field =
          compile_field(eqs, ch, {}, make_monitors(sys, eqs));
      std::vector<std::pair<VarId, Expr>> lie;
      for (std::size_t i = 0; i < n; ++i) {
        lie.emplace_back(ch->field(i), def->generators->generator(i));
      }
      auto momentum_map = momentum_field_exprs(sys, def->generators);
      std::vector<std::pair<VarId, Expr>> completion;
      for (std::size_t i = 0; i < n; ++i) {
        completion.emplace_back(ch->momentum(i),
                                momentum_map.at(ch->momentum(i)));
      }
      CompiledField lie_field = compile_field(lie, ch, std::move(completion),
                                              make_monitors(sys, lie));

      std::vector<double> fields_init(n, 0.0);
      if (def->integrate.provided && def->integrate.init.size() == n) {
        fields_init = def->integrate.init;
      } else {
        fields_init[0] = 1.0;
      }
      const double alpha_max = def->integrate.alpha_max
                                   ? *def->integrate.alpha_max
                                   : 6.283185307179586;
      const double step = def->integrate.step ? *def->integrate.step : 1e-3;

      std::map<VarId, double> point;
      for (std::size_t i = 0; i < n; ++i) point[ch->field(i)] = fields_init[i];
      std::vector<double> full = fields_init;
      for (std::size_t i = 0; i < n; ++i) {
        full.push_back(eval_numeric(momentum_map.at(ch->momentum(i)), point));
      }

      try {
        Trajectory ham =
            integrate(hamilton_field, PhaseState{0.0, full}, alpha_max, step);
        Trajectory lie_traj = integrate(
            lie_field, PhaseState{0.0, fields_init}, alpha_max, step);
        double max_diff = 0.0;
        for (std::size_t k = 0; k < ham.states.size(); ++k) {
          for (std::size_t i = 0; i < n; ++i) {
            max_diff = std::max(max_diff,
                                std::fabs(ham.states[k].values[i] -
                                          lie_traj.states[k].values[i]));
          }
        }
        add("numeric hamilton flow matches the generator flow", max_diff <= 1e-6);

        MonitorReport rep = monitor_report(ham);
        bool conserved = rep.max_hamiltonian_drift <= 1e-8;
        for (double d : rep.max_constraint) conserved = conserved && d <= 1e-8;
        add("numeric conservation along the hamilton flow", conserved);
      } catch (const std::runtime_error&) {
        add("numeric hamilton flow matches the generator flow", false);
        add("numeric conservation along the hamilton flow", false);
      }
    } else {
      add_na("numeric hamilton flow matches the generator flow");
      add_na("numeric conservation along the hamilton flow");
    }

    bool all_pass = true;
    for (const CheckResult& c : checks) {
      all_pass = all_pass && c.verdict != Verdict::Fail;
    }
    if (!flags.quiet) {
      if (flags.json) {
        nlohmann::json jchecks = nlohmann::json::array();
        for (const CheckResult& c : checks) {
          jchecks.push_back({{"name", c.name}, {"verdict", to_string(c.verdict)}});
        }
        nlohmann::json j{{"system", def->name},
                         {"checks", std::move(jchecks)},
                         {"result", all_pass ? "pass" : "fail"}};
        out << j.dump(2) << "\n";
      } else {
        for (const CheckResult& c : checks) {
          out << c.name << ": " << to_string(c.verdict) << "\n";
        }
        out << "result: " << (all_pass ? "pass" : "fail") << "\n";
      }
    }
    return all_pass ? 0 : 1;
  } catch (const std::exception& e) {
    err << path << ": error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace cli_detail

/// Parses and runs one command line (without the program name). Returns the
/// process exit code: 0 success / all checks pass, 1 verification or
/// integration failure, 2 usage, IO, parse, or pipeline errors.
inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Dirac constrained-Hamiltonian pipeline for polynomial "
               "Lagrangians"};
  app.name("hamdirac");
  cli_detail::GlobalFlags flags;
  app.add_flag("--json", flags.json, "machine-readable JSON output");
  app.add_flag("--quiet", flags.quiet, "suppress normal output");
  app.require_subcommand(1);

  std::string derive_path;
  CLI::App* derive = app.add_subcommand(
      "derive", "run the constraint pipeline and print the report");
  derive->add_option("path", derive_path, "system definition file")->required();

  std::string bracket_path, bracket_a, bracket_b;
  bool bracket_weak = false;
  CLI::App* bracket =
      app.add_subcommand("bracket", "Poisson bracket of two expressions");
  bracket->add_option("path", bracket_path, "system definition file")->required();
  bracket->add_option("exprA", bracket_a, "first expression")->required();
  bracket->add_option("exprB", bracket_b, "second expression")->required();
  bracket->add_flag("--weak", bracket_weak,
                    "also print the weakly reduced bracket");

  std::string int_path;
  cli_detail::IntegrateFlags int_flags;
  CLI::App* integrate_cmd =
      app.add_subcommand("integrate", "integrate the derived flow numerically");
  integrate_cmd->add_option("path", int_path, "system definition file")
      ->required();
  integrate_cmd->add_option("--init", int_flags.init,
                            "initial state, comma-separated (fields, or "
                            "fields plus momenta)");
  CLI::Option* alpha_opt = integrate_cmd->add_option(
      "--alpha-max", int_flags.alpha_max, "integrate from 0 to this parameter");
  CLI::Option* step_opt =
      integrate_cmd->add_option("--step", int_flags.step, "fixed step size");
  integrate_cmd->add_option("--out", int_flags.out_path,
                            "write the trajectory as CSV to this file");
  integrate_cmd->add_flag("--reduced", int_flags.reduced,
                          "integrate the generator flow on the fields only "
                          "and complete momenta pointwise");

  std::string verify_path;
  CLI::App* verify =
      app.add_subcommand("verify", "run the invariant suite against a system");
  verify->add_option("path", verify_path, "system definition file")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  int_flags.has_alpha_max = alpha_opt->count() > 0;
  int_flags.has_step = step_opt->count() > 0;

  if (*derive) return cli_detail::cmd_derive(derive_path, flags, out, err);
  if (*bracket) {
    return cli_detail::cmd_bracket(bracket_path, bracket_a, bracket_b,
                                   bracket_weak, flags, out, err);
  }
  if (*integrate_cmd) {
    return cli_detail::cmd_integrate(int_path, int_flags, flags, out, err);
  }
  if (*verify) return cli_detail::cmd_verify(verify_path, flags, out, err);
  err << "hamdirac: error: no command given\n";
  return 2;
}

}  // namespace hamdirac
