#include "sublab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sublab/cutoff.hpp"
#include "sublab/diagnostics.hpp"
#include "sublab/error.hpp"
#include "sublab/geometry.hpp"
#include "sublab/io.hpp"
#include "sublab/metric.hpp"
#include "sublab/svg.hpp"

namespace sublab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::string key(const std::string& family, const std::string& center, int k) {
  return family + "/" + center + "/" + std::to_string(k);
}

DegeneracyProfile make_profile(const ProfileConfig& p) {
  switch (p.kind) {
    case ProfileKind::constant: return DegeneracyProfile::constant(p.parameter);
    case ProfileKind::power: return DegeneracyProfile::power(p.parameter);
    case ProfileKind::exponential:
      return DegeneracyProfile::exponential(p.parameter);
    case ProfileKind::paper_model:
      return DegeneracyProfile::paper_model(p.parameter, p.cap);
  }
  throw ConfigError("profile.kind: unsupported");
}

bool reaches(Stage stage, Stage needed) {
  return static_cast<int>(stage) >= static_cast<int>(needed);
}

/// Flags combine by conjunction across centres and radii.
void set_flag(std::map<std::string, bool>& flags, const std::string& name,
              bool value) {
  auto [it, inserted] = flags.emplace(name, value);
  if (!inserted) it->second = it->second && value;
}

struct Artifact {
  std::filesystem::path path;
  std::string text;
};

struct SolveOutcome {
  QuasilinearResult result;
  std::vector<double> rhs;
  json report;
};

struct CenterOutcome {
  json report;
  std::map<std::string, bool> flags;
  std::map<std::string, double> constants;
  std::vector<std::string> notes;
  std::vector<Artifact> artifacts;
};

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, const RunOptions& options)
      : cfg_(config),
        opt_(options),
        profile_(make_profile(config.profile)),
        form_(assemble_form(profile_, config.grid)) {
    const auto& c = cfg_.chain;
    double r = c.R;
    for (int k = 0; k < c.count; ++k) {
      chain_.push_back(r);
      r *= cfg_.parameters.nu0;
    }
  }

  const QuadraticFormField& form() const { return form_; }
  const std::vector<double>& chain() const { return chain_; }

  SolveOutcome solve() const;
  CenterOutcome run_center(std::size_t index, const SolveOutcome* solved) const;

 private:
  void geometry_stage(const CenterConfig& center, const DistanceField& field,
                      BallAnalytics& analytics, CenterOutcome& out,
                      json& radii) const;
  void diagnose_stage(const CenterConfig& center, const DistanceField& field,
                      BallAnalytics& analytics, const SolveOutcome& solved,
                      CenterOutcome& out, json& radii) const;

  const ExperimentConfig& cfg_;
  const RunOptions& opt_;
  DegeneracyProfile profile_;
  QuadraticFormField form_;
  std::vector<double> chain_;
};

SolveOutcome Pipeline::solve() const {
  const auto& g = cfg_.grid;
  const auto& s = cfg_.solver;
  SolveConfig sc;
  sc.rhs.assign(g.size(), s.rhs);
  sc.boundary.resize(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    sc.boundary[n] = s.boundary(g.node_x(n), g.node_y(n));
  }
  sc.fixed_point = s.fixed_point;
  sc.linear_solver = s.linear;
  const QuasilinearEnvelope env(form_, s.modulation);
  SolveOutcome out;
  out.result = solve_quasilinear(env, sc);
  out.rhs = sc.rhs;
  const auto& u = out.result.solution.values;

  auto& rep = out.report;
  rep["iterations"] = out.result.iterations;
  rep["linear_iterations"] = out.result.linear_iterations;
  rep["decay_ratio"] = num(out.result.decay_ratio);
  rep["residual_history"] = nums(out.result.residual_history);
  const double final_residual = out.result.residual_history.empty()
                                    ? kNaN
                                    : out.result.residual_history.back();
  rep["final_residual"] = num(final_residual);

  if (s.boundary.exact_affine() && s.rhs == 0.0) {
    double err = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      err = std::max(err, std::fabs(u[n] - s.boundary(g.node_x(n), g.node_y(n))));
    }
    rep["exact_error"] = num(err);
  }
  if (s.rhs == 0.0) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (g.on_boundary(n)) {
        lo = std::min(lo, u[n]);
        hi = std::max(hi, u[n]);
      }
    }
    const double slack = 1e-10 * std::max({1.0, std::fabs(lo), std::fabs(hi)});
    std::size_t violations = 0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (!g.on_boundary(n) && (u[n] < lo - slack || u[n] > hi + slack)) {
        ++violations;
      }
    }
    rep["maximum_principle_violations"] = violations;
  }
  const auto [a11, a22] = frozen_coefficients(env, u);
  const auto system = assemble_linear(g, a11, a22, sc.rhs, sc.boundary);
  const auto eb = energy_balance(system, u, sc.rhs);
  rep["energy"] = {{"energy", num(eb.energy)},
                   {"source", num(eb.source)},
                   {"flux", num(eb.flux)},
                   {"defect", num(eb.defect)}};
  rep["structural_violation"] = num(structural_sandwich_violation(env, u));
  return out;
}

CenterOutcome Pipeline::run_center(std::size_t index,
                                   const SolveOutcome* solved) const {
  const auto& center = cfg_.centers[index];
  const auto& g = cfg_.grid;
  CenterOutcome out;
  const auto source = g.nearest_node(center.x, center.y);

  std::vector<DistanceField> ladder;
  json rungs = json::array();
  for (double eps : epsilon_ladder(cfg_.eps0, cfg_.rungs)) {
    ladder.push_back(solve_distance(form_, source, eps));
    rungs.push_back({{"epsilon", eps},
                     {"max_value", num(ladder.back().max_value())},
                     {"interior_radius", num(ladder.back().interior_radius())}});
  }
  const auto field = extrapolate_distance(ladder);
  ladder.clear();
  std::size_t unreached = 0;
  double err_max = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!field.reached[n]) {
      ++unreached;
    } else if (!field.error_bar.empty()) {
      err_max = std::max(err_max, std::fabs(field.error_bar[n]));
    }
  }
  const double r_max = field.interior_radius();

  auto& rep = out.report;
  rep["id"] = center.id;
  rep["x"] = center.x;
  rep["y"] = center.y;
  rep["node"] = source;
  rep["node_x"] = g.node_x(source);
  rep["node_y"] = g.node_y(source);
  rep["ladder"] = rungs;
  rep["r_max"] = num(r_max);
  rep["unreached_nodes"] = unreached;
  rep["max_error_bar"] = num(err_max);
  set_flag(out.flags, "scale_restriction",
           cfg_.chain.R < cfg_.parameters.eta * r_max);

  if (opt_.write_artifacts) {
    CsvTable t({"x", "y", "distance", "error_bar"});
    for (std::size_t n = 0; n < g.size(); ++n) {
      t.add_row({g.node_x(n), g.node_y(n), field.values[n],
                 field.error_bar.empty() ? 0.0 : field.error_bar[n]});
    }
    out.artifacts.push_back({"distances/" + center.id + ".csv", t.str()});
  }
  if (!reaches(opt_.stage, Stage::balls)) return out;

  std::vector<double> resolvable;
  for (std::size_t k = 0; k < chain_.size(); ++k) {
    const double r = chain_[k];
    if (r >= r_max) {
      out.notes.push_back(center.id + ": radius " + format_number(r) +
                          " reaches the grid boundary; skipped");
      continue;
    }
    resolvable.push_back(r);
  }
  BallAnalytics analytics;
  try {
    analytics = volume_curve(field, resolvable);
  } catch (const ResolutionError&) {
    // Retry without the unresolved tail of the chain.
    std::vector<double> kept;
    for (double r : resolvable) {
      std::size_t count = ball(field, r).size();
      if (count < GeometryOptions{}.min_nodes) {
        out.notes.push_back(center.id + ": radius " + format_number(r) +
                            " is below the resolution floor; skipped");
        continue;
      }
      kept.push_back(r);
    }
    analytics = volume_curve(field, kept);
  }
  if (analytics.radii.empty()) {
    throw GeometryError("centre " + center.id +
                        ": no radius of the chain is resolvable on the grid");
  }
  complete_analytics(analytics);

  json radii = json::array();
  for (std::size_t k = 0; k < analytics.radii.size(); ++k) {
    json row;
    row["r"] = analytics.radii[k];
    row["volume"] = num(analytics.volumes[k]);
    row["doubling_ratio"] = num(analytics.doubling_ratios[k]);
    row["delta"] = num(analytics.deltas[k]);
    row["delta_over_r"] = num(analytics.delta_over_r[k]);
    row["order_ratio"] = num(analytics.order_ratios[k]);
    row["doubling"] = analytics.doubling_flags[k] != 0;
    radii.push_back(row);
  }
  geometry_stage(center, field, analytics, out, radii);
  if (reaches(opt_.stage, Stage::diagnose) && solved != nullptr) {
    diagnose_stage(center, field, analytics, *solved, out, radii);
  }
  rep["C_doubling"] = num(analytics.C_doubling);
  rep["radii"] = radii;

  if (opt_.write_artifacts && opt_.stage == Stage::run) {
    std::vector<double> levels(analytics.radii.begin(), analytics.radii.end());
    std::vector<double> shown(field.values);
    for (auto& v : shown) {
      if (!std::isfinite(v)) v = kNaN;
    }
    out.artifacts.push_back(
        {"plots/distance_" + center.id + ".svg",
         heatmap(g, shown, "distance from " + center.id, levels)});
    std::vector<Series> vol{{"|B(r)|", analytics.radii, analytics.volumes}};
    out.artifacts.push_back(
        {"plots/volume_" + center.id + ".svg",
         line_plot({"ball volume at " + center.id, "r", "|B(r)|", true, true},
                   vol)});
  }
  return out;
}

void Pipeline::geometry_stage(const CenterConfig& center,
                              const DistanceField& field,
                              BallAnalytics& analytics, CenterOutcome& out,
                              json& radii) const {
  const auto& g = cfg_.grid;
  const auto& a = analytics;
  const auto& pr = cfg_.parameters;
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    out.constants[key("doubling", center.id, static_cast<int>(k))] =
        a.doubling_ratios[k];
    out.constants[key("delta_over_r", center.id, static_cast<int>(k))] =
        a.delta_over_r[k];
  }

  const bool on_axis = std::fabs(g.node_x(field.source)) <= 0.5 * g.hx();
  CsvTable box_csv({"r", "f_half", "inner_checked", "inner_violations",
                    "outer_violations", "volume", "volume_lower",
                    "volume_upper", "quantization_budget"});
  if (on_axis) {
    for (std::size_t k = 0; k < a.radii.size(); ++k) {
      const auto b = box_sandwich(field, a.radii[k], profile_);
      radii[k]["box"] = {{"f_half", num(b.f_half)},
                         {"inner_checked", b.inner_checked},
                         {"inner_violations", b.inner_violations},
                         {"outer_violations", b.outer_violations},
                         {"volume_lower", num(b.volume_lower)},
                         {"volume_upper", num(b.volume_upper)},
                         {"quantization_budget", num(b.quantization_budget)},
                         {"volume_within_bounds", b.volume_within_bounds}};
      set_flag(out.flags, "box_sandwich", b.passed());
      set_flag(out.flags, "volume_bounds", b.volume_within_bounds);
      box_csv.add_row({b.r, b.f_half, static_cast<double>(b.inner_checked),
                       static_cast<double>(b.inner_violations),
                       static_cast<double>(b.outer_violations), b.volume,
                       b.volume_lower, b.volume_upper, b.quantization_budget});
    }
  }

  const auto cont = containment_check(field, a.radii);
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    radii[k]["alpha"] = num(cont.alpha[k]);
    radii[k]["euclidean_reach"] = num(cont.euclidean_reach[k]);
  }
  set_flag(out.flags, "containment",
           cont.upper_violations == 0 && cont.alpha_positive);

  const auto bounds = chain_bounds(analytics);
  json cb = json::array();
  for (const auto& b : bounds) {
    cb.push_back({{"r", b.r},
                  {"ratio", num(b.ratio)},
                  {"lower", num(b.lower)},
                  {"upper", num(b.upper)},
                  {"holds", b.holds}});
    set_flag(out.flags, "chain_bounds", b.holds);
  }
  out.report["chain_bounds"] = cb;

  std::vector<double> gr;
  std::vector<double> gd;
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    if (std::isfinite(a.deltas[k])) {
      gr.push_back(a.radii[k]);
      gd.push_back(a.deltas[k]);
    }
  }
  if (gr.size() >= 3) {
    const auto growth =
        growth_condition_check(gr, gd, pr.lambda, analytics.C_doubling);
    out.report["growth"] = {{"radii", nums(growth.radii)},
                            {"g", nums(growth.g)},
                            {"first_third_mean", num(growth.first_third_mean)},
                            {"last_third_mean", num(growth.last_third_mean)},
                            {"increasing", growth.increasing}};
    set_flag(out.flags, "growth_increasing", growth.increasing);
  }

  if (opt_.write_artifacts) {
    CsvTable t({"r", "volume", "doubling_ratio", "delta", "delta_over_r",
                "order_ratio", "doubling"});
    for (std::size_t k = 0; k < a.radii.size(); ++k) {
      t.add_row({a.radii[k], a.volumes[k], a.doubling_ratios[k], a.deltas[k],
                 a.delta_over_r[k], a.order_ratios[k],
                 static_cast<double>(a.doubling_flags[k])});
    }
    out.artifacts.push_back({"balls/" + center.id + ".csv", t.str()});
    if (box_csv.rows() > 0) {
      out.artifacts.push_back({"balls/" + center.id + "_box.csv", box_csv.str()});
    }
  }
  if (!reaches(opt_.stage, Stage::cutoff)) return;

  const auto& cal = cfg_.calibration;
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    const double r = a.radii[k];
    const std::string tag = center.id + "_k" + std::to_string(k);
    double delta_nu = kNaN;
    try {
      delta_nu = nondoubling_order(analytics, pr.nu * r, 1.0 + 1e-9).delta;
    } catch (const Error& e) {
      out.notes.push_back(center.id + ": cutoffs at r = " + format_number(r) +
                          " skipped (" + e.what() + ")");
      continue;
    }
    json cj;
    cj["delta_nu_r"] = delta_nu;
    try {
      const auto seq = build_sequence(form_, field, r, pr.nu, delta_nu, pr.j_max);
      cj["size"] = seq.size();
      cj["terminated_early"] = seq.terminated_early;
      cj["support_ratio_max"] = num(seq.support_ratio_max);
      cj["grad_envelope_max"] = num(seq.grad_envelope_max);
      set_flag(out.flags, "cutoff_structure", true);
      set_flag(out.flags, "cutoff_support_ratio",
               seq.support_ratio_max <= cal.C_support);
      set_flag(out.flags, "cutoff_gradient_envelope",
               seq.grad_envelope_max <= cal.C_envelope);
      if (opt_.write_artifacts) {
        CsvTable t({"j", "r_j", "support_volume", "grad_bound", "grad_envelope"});
        for (std::size_t j = 0; j < seq.size(); ++j) {
          t.add_row({static_cast<double>(j + 1), seq.radii[j],
                     seq.support_volumes[j], seq.grad_bounds[j],
                     seq.grad_envelope[j]});
        }
        out.artifacts.push_back({"cutoffs/" + tag + ".csv", t.str()});
      }
    } catch (const GeometryError& e) {
      cj["error"] = e.what();
      set_flag(out.flags, "cutoff_structure", false);
    } catch (const RangeError& e) {
      cj["error"] = e.what();
      set_flag(out.flags, "cutoff_structure", false);
    }
    const double delta = a.deltas[k];
    if (std::isfinite(delta) && r + delta < a.r_max) {
      try {
        const auto sp = build_special_cutoff(form_, field, r, delta);
        cj["special_grad_scaled"] = num(sp.grad_scaled);
        cj["special_support_nodes"] = sp.support.size();
        cj["special_plateau_nodes"] = sp.plateau.size();
        set_flag(out.flags, "special_cutoff", sp.grad_scaled <= cal.C_special);
      } catch (const GeometryError& e) {
        cj["special_error"] = e.what();
        set_flag(out.flags, "special_cutoff", false);
      }
    }
    radii[k]["cutoff"] = cj;
  }
}

void Pipeline::diagnose_stage(const CenterConfig& center,
                              const DistanceField& field,
                              BallAnalytics& analytics,
                              const SolveOutcome& solved, CenterOutcome& out,
                              json& radii) const {
  const auto& pr = cfg_.parameters;
  const auto& cal = cfg_.calibration;
  const auto& u = solved.result.solution.values;
  const auto& f = solved.rhs;
  const auto& a = analytics;
  auto order = [&](double r) {
    try {
      return nondoubling_order(analytics, r, 1.0 + 1e-9).delta;
    } catch (const Error&) {
      return kNaN;
    }
  };

  CsvTable summary({"r", "m", "caccioppoli", "sobolev", "poincare",
                    "moser_observed", "moser_estimate", "harnack_quotient",
                    "log_C_har", "log_gradient", "log_upper", "log_lower",
                    "local_bound"});
  bool ladder_plotted = false;
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    const double r = a.radii[k];
    const int ki = static_cast<int>(k);
    const std::string id = center.id;
    const double m = lower_shift(r, f, u, pr.m);
    std::vector<double> ubar(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) ubar[n] = u[n] + m;
    json dj;
    dj["m"] = m;
    std::vector<double> row(13, kNaN);
    row[0] = r;
    row[1] = m;

    const double delta_nu = order(pr.nu * r);
    const double delta_nu0 = order(pr.nu0 * r);
    const double delta = a.deltas[k];
    const auto B = ball(field, r);

    if (std::isfinite(delta_nu)) {
      try {
        const auto seq =
            build_sequence(form_, field, r, pr.nu, delta_nu, pr.j_max);
        // Constants built from grad psi are tabulated only when the first
        // ramp spans at least one cell along x, where the metric is Euclidean.
        const double ramp_cells = (1.0 - pr.nu) * delta_nu *
                                  (1.0 - delta_nu / r) / cfg_.grid.hx();
        const bool ramp_resolved = ramp_cells >= 1.0;
        dj["ramp_cells"] = num(ramp_cells);
        const auto cac =
            caccioppoli_ratio(form_, ubar, seq.psi.front(), 1.0, f);
        dj["caccioppoli"] = {{"lhs", num(cac.lhs)},
                             {"gradient_term", num(cac.gradient_term)},
                             {"source_term", num(cac.source_term)},
                             {"ratio", num(cac.ratio)}};
        if (ramp_resolved) out.constants[key("caccioppoli", id, ki)] = cac.ratio;
        row[2] = cac.ratio;

        std::vector<double> w(u.size(), 0.0);
        for (std::size_t n = 0; n < u.size(); ++n) {
          w[n] = seq.psi.front()[n] * ubar[n];
        }
        const double sob = sobolev_functional(form_, w, B, r, pr.sigma);
        dj["sobolev"] = num(sob);
        if (ramp_resolved) out.constants[key("sobolev", id, ki)] = sob;
        row[3] = sob;

        MoserOptions mo;
        mo.gamma = pr.gamma;
        mo.sigma = pr.sigma;
        mo.m = pr.m;
        mo.C_sigma = cal.C_sigma;
        const auto mr = moser_iterate(u, f, field, seq, delta_nu, mo);
        bool finite = true;
        for (double v : mr.log_N) finite = finite && std::isfinite(v);
        dj["moser"] = {{"gamma", mr.schedule.gamma},
                       {"gamma_requested", mr.schedule.gamma_requested},
                       {"shifted", mr.schedule.shifted},
                       {"min_gap", num(mr.schedule.min_gap)},
                       {"required_gap", num(mr.schedule.required_gap)},
                       {"log_N", nums(mr.log_N)},
                       {"overflow_at", mr.overflow_at},
                       {"log_prefactor", num(mr.log_prefactor)},
                       {"log_sup_estimate", num(mr.log_sup_estimate)},
                       {"log_observed_sup", num(mr.log_observed_sup)},
                       {"passed", mr.passed}};
        set_flag(out.flags, "moser_finite", finite);
        set_flag(out.flags, "moser_bound", mr.passed);
        set_flag(out.flags, "exponent_gap",
                 mr.schedule.min_gap >= mr.schedule.required_gap);
        if (ramp_resolved) {
          out.constants[key("moser", id, ki)] =
              std::exp(mr.log_observed_sup - mr.log_sup_estimate);
        }
        row[5] = mr.log_observed_sup;
        row[6] = mr.log_sup_estimate;
        if (opt_.write_artifacts) {
          CsvTable t({"j", "beta", "log_N"});
          for (std::size_t j = 0; j < mr.log_N.size(); ++j) {
            t.add_row({static_cast<double>(j + 1), mr.schedule.betas[j],
                       mr.log_N[j]});
          }
          out.artifacts.push_back({"diagnostics/" + id + "_moser_k" +
                                       std::to_string(k) + ".csv",
                                   t.str()});
          if (!ladder_plotted && opt_.stage == Stage::run) {
            std::vector<double> js;
            for (std::size_t j = 0; j < mr.log_N.size(); ++j) {
              js.push_back(static_cast<double>(j + 1));
            }
            std::vector<Series> s{{"ln N_j", js, mr.log_N}};
            out.artifacts.push_back(
                {"plots/moser_" + id + ".svg",
                 line_plot({"Moser ladder at " + id + ", r = " + format_number(r),
                            "j", "ln N_j", false, false},
                           s)});
            ladder_plotted = true;
          }
        }

        const auto lb = local_bound_check(u, f, field, r, pr.nu, pr.sigma,
                                          delta_nu);
        dj["local_bound"] = {{"sup", num(lb.sup)},
                             {"l2_mean", num(lb.l2_mean)},
                             {"f_term", num(lb.f_term)},
                             {"empirical_C", num(lb.empirical_C)},
                             {"prefactor", num(lb.prefactor)},
                             {"scaled_C", num(lb.scaled_C)}};
        out.constants[key("local_bound", id, ki)] = lb.empirical_C;
        row[12] = lb.empirical_C;
      } catch (const Error& e) {
        dj["moser_error"] = e.what();
        set_flag(out.flags, "moser_finite", false);
        set_flag(out.flags, "moser_bound", false);
      }
    }

    try {
      const double poi = poincare_functional(form_, u, B, r);
      dj["poincare"] = num(poi);
      out.constants[key("poincare", id, ki)] = poi;
      row[4] = poi;
    } catch (const ZeroGradient& e) {
      dj["poincare_error"] = e.what();
    }

    if (std::isfinite(delta_nu0)) {
      const auto hr = harnack_check(u, f, field, r, pr.nu0, pr.sigma,
                                    delta_nu0, cal.C_har, pr.m);
      dj["harnack"] = {{"sup", num(hr.sup)},
                       {"inf", num(hr.inf)},
                       {"quotient", num(hr.quotient)},
                       {"delta", num(hr.delta)},
                       {"exponent", num(hr.exponent)},
                       {"log_C_har", num(hr.log_C_har)},
                       {"log_slack", num(hr.log_slack)},
                       {"passed", hr.passed}};
      set_flag(out.flags, "harnack", hr.passed);
      out.constants[key("harnack", id, ki)] = hr.quotient;
      row[7] = hr.quotient;
      row[8] = hr.log_C_har;
    }

    if (std::isfinite(delta) && r + delta < a.r_max) {
      try {
        const auto le = log_estimate(form_, u, f, field, r, delta, m);
        dj["log_estimate"] = {{"gradient_constant", num(le.gradient_constant)},
                              {"upper_constant", num(le.upper_constant)},
                              {"lower_constant", num(le.lower_constant)},
                              {"floor_ratio", num(le.floor_ratio)},
                              {"near_floor", le.near_floor}};
        const bool finite = std::isfinite(le.gradient_constant) &&
                            std::isfinite(le.upper_constant) &&
                            std::isfinite(le.lower_constant);
        set_flag(out.flags, "log_estimates_finite", finite);
        set_flag(out.flags, "log_floor_clear", !le.near_floor);
        out.constants[key("log_gradient", id, ki)] = le.gradient_constant;
        out.constants[key("log_upper", id, ki)] = le.upper_constant;
        out.constants[key("log_lower", id, ki)] = le.lower_constant;
        row[9] = le.gradient_constant;
        row[10] = le.upper_constant;
        row[11] = le.lower_constant;
      } catch (const PositivityError& e) {
        dj["log_estimate_error"] = e.what();
        set_flag(out.flags, "log_estimates_finite", false);
      }
    }
    radii[k]["diagnostics"] = dj;
    summary.add_row(row);
  }

  // Oscillation along the longest prefix of the chain with resolvable orders.
  std::vector<double> orad;
  std::vector<double> odel;
  for (double r : chain_) {
    if (r >= a.r_max) {
      if (orad.empty()) continue;
      break;
    }
    const double d = order(pr.nu0 * r);
    orad.push_back(r);
    odel.push_back(d);
    if (!std::isfinite(d)) break;
  }
  OscillationOptions oo;
  oo.nu0 = pr.nu0;
  oo.mu = pr.mu;
  oo.sigma = pr.sigma;
  oo.C_har = cal.C_har;
  oo.C_bound = cal.C_har;
  try {
    const auto oc = oscillation_curve(u, f, field, orad, odel, oo);
    json holds = json::array();
    for (auto h : oc.recursion_holds) holds.push_back(h != 0);
    json bholds = json::array();
    bool bound_all = true;
    for (std::size_t k = 0; k < oc.bound.size(); ++k) {
      bholds.push_back(oc.bound_holds[k] != 0);
      if (std::isfinite(oc.bound[k])) bound_all = bound_all && oc.bound_holds[k];
    }
    out.report["oscillation"] = {{"radii", nums(oc.radii)},
                                 {"omega", nums(oc.omega)},
                                 {"log_C_har", nums(oc.log_C_har)},
                                 {"log_gamma", nums(oc.log_gamma)},
                                 {"log_alpha", nums(oc.log_alpha)},
                                 {"log_product", nums(oc.log_product)},
                                 {"recursion_rhs", nums(oc.recursion_rhs)},
                                 {"recursion_holds", holds},
                                 {"bound", nums(oc.bound)},
                                 {"bound_holds", bholds},
                                 {"f_sup", num(oc.f_sup)},
                                 {"recursion_all", oc.recursion_all},
                                 {"nonincreasing", oc.nonincreasing}};
    set_flag(out.flags, "oscillation_recursion", oc.recursion_all);
    set_flag(out.flags, "oscillation_monotone", oc.nonincreasing);
    set_flag(out.flags, "oscillation_bound", bound_all);
    if (opt_.write_artifacts) {
      CsvTable t({"r", "omega", "log_C_har", "log_gamma", "log_alpha",
                  "log_product", "bound"});
      for (std::size_t k = 0; k < oc.radii.size(); ++k) {
        t.add_row({oc.radii[k], oc.omega[k], oc.log_C_har[k], oc.log_gamma[k],
                   oc.log_alpha[k], oc.log_product[k], oc.bound[k]});
      }
      out.artifacts.push_back(
          {"diagnostics/" + center.id + "_oscillation.csv", t.str()});
      if (opt_.stage == Stage::run) {
        std::vector<Series> s{{"omega(r)", oc.radii, oc.omega},
                              {"bound", oc.radii, oc.bound, false, true}};
        out.artifacts.push_back(
            {"plots/oscillation_" + center.id + ".svg",
             line_plot({"oscillation at " + center.id, "r", "omega", true, true},
                       s)});
      }
    }
  } catch (const ChainTooShort& e) {
    out.notes.push_back(center.id + ": oscillation skipped (" + e.what() + ")");
  }
  if (opt_.write_artifacts) {
    out.artifacts.push_back(
        {"diagnostics/" + center.id + "_radii.csv", summary.str()});
  }
}

std::vector<CenterOutcome> run_centers(const Pipeline& p,
                                       const ExperimentConfig& cfg,
                                       const SolveOutcome* solved,
                                       int threads) {
  const std::size_t n = cfg.centers.size();
  std::vector<CenterOutcome> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        out[k] = p.run_center(k, solved);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

const std::vector<std::string>& report_only_flags() {
  static const std::vector<std::string> names{
      "growth_increasing", "scale_restriction", "log_floor_clear",
      "oscillation_bound"};
  return names;
}

}  // namespace

Stage stage_from_string(const std::string& name) {
  if (name == "dist") return Stage::dist;
  if (name == "balls") return Stage::balls;
  if (name == "cutoff") return Stage::cutoff;
  if (name == "solve") return Stage::solve;
  if (name == "diagnose") return Stage::diagnose;
  if (name == "run") return Stage::run;
  throw ConfigError("unknown stage '" + name + "'");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::dist: return "dist";
    case Stage::balls: return "balls";
    case Stage::cutoff: return "cutoff";
    case Stage::solve: return "solve";
    case Stage::diagnose: return "diagnose";
    case Stage::run: return "run";
  }
  return "run";
}

RunOutcome run_experiment(const ExperimentConfig& config,
                          const RunOptions& options) {
  RunOutcome outcome;
  try {
    config.validate();
    const Pipeline pipeline(config, options);
    const auto& g = config.grid;
    std::vector<Artifact> artifacts;
    std::map<std::string, bool> flags;
    std::map<std::string, double> constants;
    std::vector<std::string> notes;
    json report;
    report["format"] = kReportFormat;
    report["schema_version"] = kReportSchemaVersion;
    report["generator"] = std::string("subunit-lab ") + kVersion;
    report["config"] = json::parse(serialize_config(config));
    report["stage"] = to_string(options.stage);
    report["chain"] = nums(pipeline.chain());
    report["form"] = {{"k_lower", num(pipeline.form().k_lower)},
                      {"K_upper", num(pipeline.form().K_upper)},
                      {"zero_columns", pipeline.form().zero_columns.size()},
                      {"underflow_radius", num(pipeline.form().underflow_radius)}};

    std::unique_ptr<SolveOutcome> solved;
    if (reaches(options.stage, Stage::solve)) {
      solved = std::make_unique<SolveOutcome>(pipeline.solve());
      const auto& sr = solved->report;
      const auto& fp = config.solver.fixed_point;
      set_flag(flags, "solver_converged", true);
      set_flag(flags, "quasilinear_consistency",
               !solved->result.residual_history.empty() &&
                   solved->result.residual_history.back() <= fp.tolerance);
      if (sr.contains("exact_error")) {
        set_flag(flags, "exact_solution", sr["exact_error"].get<double>() <= 1e-10);
      }
      if (sr.contains("maximum_principle_violations")) {
        set_flag(flags, "maximum_principle",
                 sr["maximum_principle_violations"].get<std::size_t>() == 0);
      }
      const auto& e = sr["energy"];
      const double scale = std::max({1.0, std::fabs(e["energy"].get<double>()),
                                     std::fabs(e["source"].get<double>()),
                                     std::fabs(e["flux"].get<double>())});
      set_flag(flags, "energy_identity",
               e["defect"].get<double>() <= 1e-6 * scale);
      set_flag(flags, "structural_sandwich",
               sr["structural_violation"].get<double>() <= 1e-12);
      report["solver"] = sr;
      if (options.write_artifacts) {
        const auto& u = solved->result.solution.values;
        CsvTable t({"x", "y", "u"});
        for (std::size_t n = 0; n < g.size(); ++n) {
          t.add_row({g.node_x(n), g.node_y(n), u[n]});
        }
        artifacts.push_back({"solutions/u.csv", t.str()});
        CsvTable h({"k", "residual"});
        const auto& hist = solved->result.residual_history;
        for (std::size_t k = 0; k < hist.size(); ++k) {
          h.add_row({static_cast<double>(k), hist[k]});
        }
        artifacts.push_back({"solutions/residuals.csv", h.str()});
        if (options.stage == Stage::run) {
          artifacts.push_back({"plots/solution.svg", heatmap(g, u, "solution u")});
        }
      }
    }

    auto centers = run_centers(pipeline, config, solved.get(),
                               std::max(1, options.threads));
    json cj = json::array();
    for (auto& c : centers) {
      c.report["flags"] = c.flags;
      cj.push_back(std::move(c.report));
      for (const auto& [k, v] : c.flags) set_flag(flags, k, v);
      constants.insert(c.constants.begin(), c.constants.end());
      notes.insert(notes.end(), c.notes.begin(), c.notes.end());
      for (auto& a : c.artifacts) artifacts.push_back(std::move(a));
    }
    report["centers"] = cj;

    std::vector<std::string> required = config.required;
    if (options.strict) {
      for (const auto& [k, v] : flags) required.push_back(k);
    }
    std::sort(required.begin(), required.end());
    required.erase(std::unique(required.begin(), required.end()), required.end());
    std::vector<std::string> failed;
    for (const auto& name : required) {
      const auto it = flags.find(name);
      if (it == flags.end()) {
        if (options.stage == Stage::run || options.stage == Stage::diagnose) {
          failed.push_back(name);
          notes.push_back("required flag '" + name + "' was not evaluated");
        }
      } else if (!it->second) {
        failed.push_back(name);
      }
    }

    json cjs = json::object();
    for (const auto& [k, v] : constants) cjs[k] = num(v);
    report["flags"] = flags;
    report["report_only"] = report_only_flags();
    report["required"] = required;
    report["failed_required"] = failed;
    report["constants"] = cjs;
    report["budgets"] = config.budgets;
    report["notes"] = notes;

    outcome.report = report.dump(2) + "\n";
    outcome.flags = flags;
    outcome.failed_required = failed;
    if (options.write_artifacts) {
      for (const auto& a : artifacts) write_text(options.out / a.path, a.text);
      write_text(options.out / "report.json", outcome.report);
    }
    if (!failed.empty()) {
      outcome.exit_code = exit_code::required_flag;
      std::string list;
      for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
      outcome.message = "required flags failed: " + list;
    } else {
      outcome.message = "ok";
    }
  } catch (const ConfigError& e) {
    outcome.exit_code = exit_code::config;
    outcome.message = std::string("config error: ") + e.what();
  } catch (const NoConvergence& e) {
    outcome.exit_code = exit_code::convergence;
    outcome.message = std::string("solver did not converge: ") + e.what();
  } catch (const SingularSystem& e) {
    outcome.exit_code = exit_code::convergence;
    outcome.message = std::string("singular system: ") + e.what();
  } catch (const DomainError& e) {
    outcome.exit_code = exit_code::config;
    outcome.message = std::string("domain error: ") + e.what();
  } catch (const Error& e) {
    outcome.exit_code = exit_code::geometry;
    outcome.message = std::string("geometry error: ") + e.what();
  }
  return outcome;
}

bool CompareResult::empty_diff() const {
  if (!only_a.empty() || !only_b.empty()) return false;
  return std::all_of(rows.begin(), rows.end(),
                     [](const DriftRow& r) { return r.drift == 0.0; });
}

std::string CompareResult::table() const {
  std::ostringstream os;
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto cell = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-14.6g", v);
    return std::string(buf);
  };
  os << pad("constant", width) << "  " << pad("a", 14) << pad("b", 14)
     << pad("drift", 14) << pad("budget", 10) << "flag\n";
  for (const auto& r : rows) {
    os << pad(r.name, width) << "  " << cell(r.a) << cell(r.b) << cell(r.drift)
       << pad(format_number(r.budget), 10) << (r.flagged ? "DRIFT" : "ok")
       << "\n";
  }
  for (const auto& n : only_a) os << pad(n, width) << "  only in a\n";
  for (const auto& n : only_b) os << pad(n, width) << "  only in b\n";
  os << rows.size() << " shared constants, " << flagged << " above budget\n";
  return os.str();
}

CompareResult compare_reports(const std::string& report_a,
                              const std::string& report_b,
                              const std::map<std::string, double>& budgets) {
  auto load = [](const std::string& text, const char* which) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw SchemaMismatch(std::string("report ") + which +
                           " is not valid JSON: " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kReportFormat) {
      throw SchemaMismatch(std::string("report ") + which +
                           " is not a subunit-lab report");
    }
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != kReportSchemaVersion) {
      throw SchemaMismatch(std::string("report ") + which +
                           " has an unsupported schema version");
    }
    if (!j.contains("constants") || !j["constants"].is_object()) {
      throw SchemaMismatch(std::string("report ") + which +
                           " has no constants table");
    }
    return j;
  };
  const auto a = load(report_a, "a");
  const auto b = load(report_b, "b");
  auto value = [](const json& v) {
    return v.is_number() ? v.get<double>() : kNaN;
  };
  auto budget_for = [&](const std::string& name) {
    const auto family = name.substr(0, name.find('/'));
    if (const auto it = budgets.find(family); it != budgets.end()) {
      return it->second;
    }
    if (a.contains("budgets") && a["budgets"].contains(family) &&
        a["budgets"][family].is_number()) {
      return a["budgets"][family].get<double>();
    }
    return 0.25;
  };
  CompareResult out;
  const auto& ca = a["constants"];
  const auto& cb = b["constants"];
  for (auto it = ca.begin(); it != ca.end(); ++it) {
    if (!cb.contains(it.key())) {
      out.only_a.push_back(it.key());
      continue;
    }
    DriftRow row;
    row.name = it.key();
    row.a = value(*it);
    row.b = value(cb[it.key()]);
    const bool na = std::isnan(row.a);
    const bool nb = std::isnan(row.b);
    if (na && nb) {
      row.drift = 0.0;
    } else if (na || nb) {
      row.drift = std::numeric_limits<double>::infinity();
    } else {
      const double scale = std::max(std::fabs(row.a), std::fabs(row.b));
      row.drift = scale == 0.0 ? 0.0 : std::fabs(row.a - row.b) / scale;
    }
    row.budget = budget_for(row.name);
    row.flagged = row.drift > row.budget;
    if (row.flagged) ++out.flagged;
    out.rows.push_back(row);
  }
  for (auto it = cb.begin(); it != cb.end(); ++it) {
    if (!ca.contains(it.key())) out.only_b.push_back(it.key());
  }
  return out;
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("SUBUNIT_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError(std::string("SUBUNIT_LAB_THREADS must be a positive "
                                    "integer, got '") + env + "'");
    }
    return static_cast<int>(v);
  }
  return std::max(1, requested);
}

}  // namespace sublab
