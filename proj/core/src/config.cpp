#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "json.hpp"

#include "sublab/error.hpp"
#include "sublab/experiment.hpp"
#include "sublab/io.hpp"

namespace sublab {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking the dotted path for error messages and
// rejecting keys that were never asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  ~Reader() = default;

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(key, "must be a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path(key) + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

FixedPointConfig read_fixed_point(const json& j, const std::string& path) {
  Reader r(j, path);
  FixedPointConfig c;
  c.max_iterations = static_cast<int>(r.integer("max_iterations", c.max_iterations));
  c.damping = r.number("damping", c.damping);
  c.tolerance = r.number("tolerance", c.tolerance);
  r.finish();
  return c;
}

LinearSolverConfig read_linear(const json& j, const std::string& path) {
  Reader r(j, path);
  LinearSolverConfig c;
  c.tolerance = r.number("tolerance", c.tolerance);
  c.max_iterations = static_cast<int>(r.integer("max_iterations", c.max_iterations));
  r.finish();
  return c;
}

Modulation read_modulation(const json& j, const std::string& path) {
  Reader r(j, path);
  const auto kind_name = r.text("kind", "constant");
  Modulation m;
  try {
    m.kind = modulation_kind_from_string(kind_name);
  } catch (const ConfigError&) {
    r.fail("kind", "unknown modulation '" + kind_name + "'");
  }
  switch (m.kind) {
    case ModulationKind::constant:
      m = Modulation::constant(r.number("a", 1.0));
      break;
    case ModulationKind::two_plus_tanh: m = Modulation::two_plus_tanh(); break;
    case ModulationKind::two_plus_sin: m = Modulation::two_plus_sin(); break;
    case ModulationKind::affine:
    case ModulationKind::step:
      break;
  }
  m.a = r.number("a", m.a);
  m.b = r.number("b", m.b);
  m.threshold = r.number("threshold", m.threshold);
  m.lower = r.number("lower", m.lower);
  m.upper = r.number("upper", m.upper);
  r.finish();
  return m;
}

json write_modulation(const Modulation& m) {
  return {{"kind", to_string(m.kind)}, {"a", m.a},         {"b", m.b},
          {"threshold", m.threshold},  {"lower", m.lower}, {"upper", m.upper}};
}

}  // namespace

double BoundaryConfig::operator()(double x, double y) const {
  double v = a * x + b * y + c;
  if (amplitude != 0.0) {
    v += amplitude * std::sin(std::numbers::pi * kx * x) *
         std::cos(std::numbers::pi * ky * y);
  }
  return v;
}

void ExperimentConfig::validate() const {
  require(!name.empty(), "name", "must not be empty");
  require(profile.parameter > 0.0 || profile.kind == ProfileKind::constant,
          "profile.parameter", "must be positive");
  if (profile.kind == ProfileKind::constant) {
    require(profile.parameter > 0.0, "profile.parameter", "must be positive");
  }
  if (profile.kind == ProfileKind::paper_model) {
    require(profile.parameter > 1.0, "profile.parameter",
            "lambda must exceed 1");
    require(profile.cap > 0.0 && profile.cap < 1.0, "profile.cap",
            "must lie in (0, 1)");
    require(std::max(std::fabs(grid.x0), std::fabs(grid.x1)) <= profile.cap,
            "grid", "x-range exceeds profile.cap");
  }
  require(grid.nx >= 3 && grid.ny >= 3, "grid", "needs at least 3 nodes per axis");
  require(grid.x1 > grid.x0, "grid.x1", "must exceed grid.x0");
  require(grid.y1 > grid.y0, "grid.y1", "must exceed grid.y0");
  require(eps0 > 0.0, "epsilon.eps0", "must be positive");
  require(rungs >= 3, "epsilon.rungs", "must be at least 3");
  require(!centers.empty(), "centers", "must list at least one centre");
  std::set<std::string> ids;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto& c = centers[k];
    const std::string p = "centers[" + std::to_string(k) + "]";
    require(!c.id.empty(), p + ".id", "must not be empty");
    require(c.id.find_first_of("/\\. ") == std::string::npos, p + ".id",
            "must not contain '/', '\\', '.' or spaces");
    require(ids.insert(c.id).second, p + ".id", "duplicate id '" + c.id + "'");
    require(c.x >= grid.x0 && c.x <= grid.x1 && c.y >= grid.y0 && c.y <= grid.y1,
            p, "lies outside the grid");
  }
  require(chain.R > 0.0, "chain.R", "must be positive");
  require(chain.count >= 1, "chain.count", "must be at least 1");
  const auto& pr = parameters;
  require(pr.sigma > 1.0, "parameters.sigma", "must exceed 1");
  require(pr.nu > 0.0 && pr.nu < 1.0, "parameters.nu", "must lie in (0, 1)");
  require(pr.nu0 > 0.0 && pr.nu0 < 1.0, "parameters.nu0", "must lie in (0, 1)");
  require(pr.mu > 0.0 && pr.mu < 1.0, "parameters.mu", "must lie in (0, 1)");
  require(pr.eta > 0.0 && pr.eta <= 1.0, "parameters.eta", "must lie in (0, 1]");
  require(pr.lambda > 1.0, "parameters.lambda", "must exceed 1");
  require(pr.gamma != 0.0 && std::fabs(pr.gamma) <= 2.0, "parameters.gamma",
          "must be nonzero with |gamma| <= 2");
  require(pr.m >= 0.0, "parameters.m", "must be nonnegative");
  require(pr.j_max >= 1 && pr.j_max <= 64, "parameters.j_max",
          "must lie in [1, 64]");
  const auto& s = solver;
  require(std::isfinite(s.rhs), "solver.rhs", "must be finite");
  require(s.fixed_point.damping > 0.0 && s.fixed_point.damping <= 1.0,
          "solver.fixed_point.damping", "must lie in (0, 1]");
  require(s.fixed_point.tolerance > 0.0, "solver.fixed_point.tolerance",
          "must be positive");
  require(s.fixed_point.max_iterations >= 1, "solver.fixed_point.max_iterations",
          "must be positive");
  require(s.linear.tolerance > 0.0, "solver.linear.tolerance", "must be positive");
  require(s.linear.max_iterations >= 1, "solver.linear.max_iterations",
          "must be positive");
  require(s.modulation.lower > 0.0 && s.modulation.lower <= 1.0 &&
              s.modulation.upper >= 1.0,
          "solver.modulation", "bounds must satisfy 0 < lower <= 1 <= upper");
  const auto& c = calibration;
  for (auto [v, key] : {std::pair{c.C_har, "C_har"}, {c.C_sigma, "C_sigma"},
                        {c.C_support, "C_support"}, {c.C_envelope, "C_envelope"},
                        {c.C_special, "C_special"}}) {
    require(v > 0.0, std::string("calibration.") + key, "must be positive");
  }
  for (const auto& [k, v] : budgets) {
    require(v >= 0.0, "budgets." + k, "must be nonnegative");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(j, "");
  c.name = r.text("name", c.name);
  if (const auto* p = r.child("profile")) {
    Reader pr(*p, "profile");
    const auto kind = pr.text("kind", to_string(c.profile.kind));
    try {
      c.profile.kind = profile_kind_from_string(kind);
    } catch (const ConfigError&) {
      pr.fail("kind", "unknown profile '" + kind + "'");
    }
    c.profile.parameter = pr.number("parameter", c.profile.parameter);
    c.profile.cap = pr.number("cap", c.profile.cap);
    pr.finish();
  }
  if (const auto* g = r.child("grid")) {
    Reader gr(*g, "grid");
    c.grid.x0 = gr.number("x0", c.grid.x0);
    c.grid.x1 = gr.number("x1", c.grid.x1);
    c.grid.y0 = gr.number("y0", c.grid.y0);
    c.grid.y1 = gr.number("y1", c.grid.y1);
    const auto nx = gr.integer("nx", static_cast<long long>(c.grid.nx));
    const auto ny = gr.integer("ny", static_cast<long long>(c.grid.ny));
    if (nx < 3) gr.fail("nx", "must be at least 3");
    if (ny < 3) gr.fail("ny", "must be at least 3");
    c.grid.nx = static_cast<std::size_t>(nx);
    c.grid.ny = static_cast<std::size_t>(ny);
    gr.finish();
  }
  if (const auto* e = r.child("epsilon")) {
    Reader er(*e, "epsilon");
    c.eps0 = er.number("eps0", c.eps0);
    c.rungs = static_cast<int>(er.integer("rungs", c.rungs));
    er.finish();
  }
  if (const auto* cs = r.child("centers")) {
    if (!cs->is_array()) r.fail("centers", "must be an array");
    for (std::size_t k = 0; k < cs->size(); ++k) {
      Reader cr((*cs)[k], "centers[" + std::to_string(k) + "]");
      CenterConfig cc;
      cc.id = cr.text("id", "c" + std::to_string(k));
      cc.x = cr.number("x", 0.0);
      cc.y = cr.number("y", 0.0);
      cr.finish();
      c.centers.push_back(cc);
    }
  }
  if (const auto* ch = r.child("chain")) {
    Reader cr(*ch, "chain");
    c.chain.R = cr.number("R", c.chain.R);
    c.chain.count = static_cast<int>(cr.integer("count", c.chain.count));
    cr.finish();
  }
  if (const auto* p = r.child("parameters")) {
    Reader pr(*p, "parameters");
    auto& q = c.parameters;
    q.sigma = pr.number("sigma", q.sigma);
    q.nu = pr.number("nu", q.nu);
    q.nu0 = pr.number("nu0", q.nu0);
    q.mu = pr.number("mu", q.mu);
    q.eta = pr.number("eta", q.eta);
    q.lambda = pr.number("lambda", q.lambda);
    q.gamma = pr.number("gamma", q.gamma);
    q.m = pr.number("m", q.m);
    q.j_max = static_cast<int>(pr.integer("j_max", q.j_max));
    pr.finish();
  }
  if (const auto* s = r.child("solver")) {
    Reader sr(*s, "solver");
    c.solver.rhs = sr.number("rhs", c.solver.rhs);
    if (const auto* b = sr.child("boundary")) {
      Reader br(*b, "solver.boundary");
      auto& bc = c.solver.boundary;
      bc.a = br.number("a", bc.a);
      bc.b = br.number("b", bc.b);
      bc.c = br.number("c", bc.c);
      bc.amplitude = br.number("amplitude", bc.amplitude);
      bc.kx = br.number("kx", bc.kx);
      bc.ky = br.number("ky", bc.ky);
      br.finish();
    }
    if (const auto* m = sr.child("modulation")) {
      c.solver.modulation = read_modulation(*m, "solver.modulation");
    }
    if (const auto* f = sr.child("fixed_point")) {
      c.solver.fixed_point = read_fixed_point(*f, "solver.fixed_point");
    }
    if (const auto* l = sr.child("linear")) {
      c.solver.linear = read_linear(*l, "solver.linear");
    }
    sr.finish();
  }
  if (const auto* cal = r.child("calibration")) {
    Reader cr(*cal, "calibration");
    auto& k = c.calibration;
    k.C_har = cr.number("C_har", k.C_har);
    k.C_sigma = cr.number("C_sigma", k.C_sigma);
    k.C_support = cr.number("C_support", k.C_support);
    k.C_envelope = cr.number("C_envelope", k.C_envelope);
    k.C_special = cr.number("C_special", k.C_special);
    cr.finish();
  }
  if (const auto* req = r.child("required")) {
    if (!req->is_array()) r.fail("required", "must be an array of flag names");
    for (const auto& v : *req) {
      if (!v.is_string()) r.fail("required", "must be an array of flag names");
      c.required.push_back(v.get<std::string>());
    }
  }
  if (const auto* b = r.child("budgets")) {
    if (!b->is_object()) r.fail("budgets", "must be an object");
    for (auto it = b->begin(); it != b->end(); ++it) {
      if (!it->is_number()) r.fail("budgets." + it.key(), "must be a number");
      c.budgets[it.key()] = it->get<double>();
    }
  }
  c.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long long>(c.seed)));
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& c) {
  json centers = json::array();
  for (const auto& cc : c.centers) {
    centers.push_back({{"id", cc.id}, {"x", cc.x}, {"y", cc.y}});
  }
  const auto& p = c.parameters;
  const auto& s = c.solver;
  const auto& k = c.calibration;
  json j = {
      {"name", c.name},
      {"profile",
       {{"kind", to_string(c.profile.kind)},
        {"parameter", c.profile.parameter},
        {"cap", c.profile.cap}}},
      {"grid",
       {{"x0", c.grid.x0}, {"x1", c.grid.x1}, {"y0", c.grid.y0},
        {"y1", c.grid.y1}, {"nx", c.grid.nx}, {"ny", c.grid.ny}}},
      {"epsilon", {{"eps0", c.eps0}, {"rungs", c.rungs}}},
      {"centers", centers},
      {"chain", {{"R", c.chain.R}, {"count", c.chain.count}}},
      {"parameters",
       {{"sigma", p.sigma}, {"nu", p.nu}, {"nu0", p.nu0}, {"mu", p.mu},
        {"eta", p.eta}, {"lambda", p.lambda}, {"gamma", p.gamma}, {"m", p.m},
        {"j_max", p.j_max}}},
      {"solver",
       {{"rhs", s.rhs},
        {"boundary",
         {{"a", s.boundary.a}, {"b", s.boundary.b}, {"c", s.boundary.c},
          {"amplitude", s.boundary.amplitude}, {"kx", s.boundary.kx},
          {"ky", s.boundary.ky}}},
        {"modulation", write_modulation(s.modulation)},
        {"fixed_point",
         {{"max_iterations", s.fixed_point.max_iterations},
          {"damping", s.fixed_point.damping},
          {"tolerance", s.fixed_point.tolerance}}},
        {"linear",
         {{"tolerance", s.linear.tolerance},
          {"max_iterations", s.linear.max_iterations}}}}},
      {"calibration",
       {{"C_har", k.C_har}, {"C_sigma", k.C_sigma}, {"C_support", k.C_support},
        {"C_envelope", k.C_envelope}, {"C_special", k.C_special}}},
      {"required", c.required},
      {"budgets", c.budgets},
      {"seed", c.seed}};
  return j.dump(2) + "\n";
}

}  // namespace sublab
