#include "mildsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mildsim/analysis.hpp"
#include "mildsim/format.hpp"
#include "mildsim/noise.hpp"

namespace mildsim::cli {

namespace {

constexpr std::size_t kMarginSamples = 10000;

enum class Kind { number, count, list, dyadic_list, text, scheme, schemes, equation };

struct KeySpec {
  const char* key;
  Kind kind;
};

const std::map<std::string, std::vector<KeySpec>>& experiment_keys() {
  static const std::map<std::string, std::vector<KeySpec>> table = {
      {"resolvent_algebra", {{"equation", Kind::equation}, {"samples", Kind::count}, {"tolerance", Kind::number}}},
      {"trotter_kato",
       {{"equation", Kind::equation},
        {"dt", Kind::number},
        {"epsilons", Kind::list},
        {"slope_min", Kind::number},
        {"slope_max", Kind::number}}},
      {"isometry",
       {{"equation", Kind::equation}, {"paths", Kind::count}, {"dt", Kind::number}, {"tolerance", Kind::number}}},
      {"compensator", {{"equation", Kind::equation}, {"paths", Kind::count}, {"dt", Kind::number}}},
      {"regularization_identity",
       {{"instances", Kind::count},
        {"n", Kind::count},
        {"epsilon", Kind::number},
        {"dt", Kind::number},
        {"tolerance", Kind::number}}},
      {"energy_identity",
       {{"equation", Kind::equation},
        {"dts", Kind::dyadic_list},
        {"epsilon", Kind::number},
        {"paths", Kind::count},
        {"min_order", Kind::number}}},
      {"coupling",
       {{"equation", Kind::equation},
        {"dts", Kind::dyadic_list},
        {"schemes", Kind::schemes},
        {"epsilon", Kind::number},
        {"min_order", Kind::number}}},
      {"contraction",
       {{"equation", Kind::equation},
        {"u0_a_modes", Kind::list},
        {"u0_b_modes", Kind::list},
        {"ensemble", Kind::count},
        {"dt", Kind::number},
        {"scheme", Kind::scheme},
        {"epsilon", Kind::number},
        {"rate_multiplier", Kind::number}}},
      {"stability",
       {{"equation", Kind::equation},
        {"equation2", Kind::equation},
        {"ensemble", Kind::count},
        {"dt", Kind::number},
        {"scheme", Kind::scheme},
        {"epsilon", Kind::number},
        {"jump_factor", Kind::number},
        {"noise_floor", Kind::number}}},
      {"generalized_solution",
       {{"equation", Kind::equation},
        {"mollify_epsilons", Kind::list},
        {"ensemble", Kind::count},
        {"dt", Kind::number},
        {"scheme", Kind::scheme},
        {"epsilon", Kind::number}}},
      {"weak_residual",
       {{"equation", Kind::equation},
        {"dts", Kind::dyadic_list},
        {"epsilon", Kind::number},
        {"k_max", Kind::count},
        {"paths", Kind::count},
        {"scheme", Kind::scheme},
        {"min_order", Kind::number}}},
      {"yosida_bound",
       {{"equation", Kind::equation},
        {"dt", Kind::number},
        {"run_epsilons", Kind::list},
        {"epsilon", Kind::number}}},
  };
  return table;
}

class Context {
 public:
  explicit Context(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& key, const std::string& message) const {
    std::ostringstream out;
    out << source_;
    if (node.IsDefined() && node.Mark().line >= 0) {
      out << ':' << node.Mark().line + 1;
    }
    out << ": " << key << ": " << message;
    throw ConfigError(out.str());
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(source_ + ": " + key + ": " + message);
  }

  double number(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) {
      fail(node, key, "expected a number");
    }
    try {
      const double v = node.as<double>();
      if (!std::isfinite(v)) {
        fail(node, key, "must be finite");
      }
      return v;
    } catch (const YAML::BadConversion&) {
      fail(node, key, "expected a number, got '" + node.Scalar() + "'");
    }
  }

  std::size_t count(const YAML::Node& node, const std::string& key) const {
    const double v = number(node, key);
    if (v < 1.0 || v != std::floor(v) || v > 1e15) {
      fail(node, key, "expected a positive integer");
    }
    return static_cast<std::size_t>(v);
  }

  std::vector<double> list(const YAML::Node& node, const std::string& key) const {
    if (node.IsScalar()) {
      return {number(node, key)};
    }
    if (!node.IsSequence()) {
      fail(node, key, "expected a list of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(number(node[i], key + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::string text(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) {
      fail(node, key, "expected a string");
    }
    return node.Scalar();
  }

  std::vector<std::string> words(const YAML::Node& node, const std::string& key) const {
    if (node.IsScalar()) {
      return {node.Scalar()};
    }
    if (!node.IsSequence()) {
      fail(node, key, "expected a list of names");
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(text(node[i], key + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  /// Rejects a mapping key that appears twice anywhere below `node`.
  void unique_keys(const YAML::Node& node, const std::string& where) const {
    if (node.IsMap()) {
      std::set<std::string> seen;
      for (const auto& item : node) {
        const std::string k = item.first.Scalar();
        const std::string path = where.empty() ? k : where + "." + k;
        if (!seen.insert(k).second) {
          fail(item.first, path, "duplicate key");
        }
        unique_keys(item.second, path);
      }
    } else if (node.IsSequence()) {
      for (const auto& item : node) {
        unique_keys(item, where);
      }
    }
  }

  void allowed_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& keys) const {
    if (!node.IsMap()) {
      fail(node, where, "expected a mapping");
    }
    for (const auto& item : node) {
      const std::string k = item.first.Scalar();
      if (keys.count(k) == 0) {
        fail(item.first, where.empty() ? k : where + "." + k, "unknown key");
      }
    }
  }

 private:
  std::string source_;
};

/// Two-layer lookup: a variant's overrides first, then the base equation.
/// Groups (noise, jumps) are replaced whole; a null group removes it.
class EquationSource {
 public:
  EquationSource(YAML::Node base, YAML::Node overrides, std::string prefix)
      : base_(std::move(base)), overrides_(std::move(overrides)), prefix_(std::move(prefix)) {}

  [[nodiscard]] YAML::Node find(const std::string& key) const {
    for (const YAML::Node* layer : {&overrides_, &base_}) {
      const YAML::Node& l = *layer;
      if (l.IsDefined() && l.IsMap()) {
        if (const YAML::Node v = l[key]; v.IsDefined()) {
          return v;
        }
      }
    }
    return YAML::Node(YAML::NodeType::Undefined);
  }
  [[nodiscard]] YAML::Node find(const std::string& group, const std::string& key) const {
    const YAML::Node g = group_node(group);
    return g.IsDefined() && g.IsMap() ? YAML::Node(g[key]) : YAML::Node(YAML::NodeType::Undefined);
  }
  [[nodiscard]] bool has_group(const std::string& group) const {
    const YAML::Node g = group_node(group);
    return g.IsDefined() && !g.IsNull();
  }
  [[nodiscard]] std::string name(const std::string& key, const std::string& group = "") const {
    return prefix_ + "." + (group.empty() ? key : group + "." + key);
  }

 private:
  [[nodiscard]] YAML::Node group_node(const std::string& group) const {
    const YAML::Node& o = overrides_;
    if (o.IsDefined() && o.IsMap() && o[group].IsDefined()) {
      return o[group];
    }
    const YAML::Node& b = base_;
    return b.IsDefined() && b.IsMap() ? YAML::Node(b[group]) : YAML::Node(YAML::NodeType::Undefined);
  }

  YAML::Node base_;
  YAML::Node overrides_;
  std::string prefix_;
};

const std::set<std::string> kEquationKeys = {"operator", "n", "diffusivity", "eigenvalues", "f", "eta",
                                             "alpha", "T", "u0_modes", "u0", "noise", "jumps"};
const std::set<std::string> kNoiseKeys = {"q", "b", "sigma"};
const std::set<std::string> kJumpKeys = {"labels", "weights", "scales", "shift_modes"};

void check_equation_keys(const Context& ctx, const YAML::Node& node, const std::string& where) {
  ctx.allowed_keys(node, where, kEquationKeys);
  if (node["noise"].IsDefined() && !node["noise"].IsNull()) {
    ctx.allowed_keys(node["noise"], where + ".noise", kNoiseKeys);
  }
  if (node["jumps"].IsDefined() && !node["jumps"].IsNull()) {
    ctx.allowed_keys(node["jumps"], where + ".jumps", kJumpKeys);
  }
}

EquationSpec build_equation(const Context& ctx, const EquationSource& src) {
  const YAML::Node op_node = src.find("operator");
  const std::string op = op_node.IsDefined() ? ctx.text(op_node, src.name("operator")) : "dirichlet_laplacian";
  std::optional<SpectralOperator> A;
  if (op == "dirichlet_laplacian") {
    const YAML::Node n_node = src.find("n");
    if (!n_node.IsDefined()) {
      ctx.fail(src.name("n"), "required for operator dirichlet_laplacian");
    }
    A = dirichlet_laplacian(ctx.count(n_node, src.name("n")));
  } else if (op == "diagonal") {
    const YAML::Node e_node = src.find("eigenvalues");
    if (!e_node.IsDefined()) {
      ctx.fail(src.name("eigenvalues"), "required for operator diagonal");
    }
    const auto eigs = ctx.list(e_node, src.name("eigenvalues"));
    for (std::size_t k = 0; k < eigs.size(); ++k) {
      if (eigs[k] < 0.0) {
        ctx.fail(e_node, src.name("eigenvalues") + "[" + std::to_string(k) + "]", "must be nonnegative");
      }
    }
    if (eigs.empty()) {
      ctx.fail(e_node, src.name("eigenvalues"), "must not be empty");
    }
    A = SpectralOperator::diagonal(Eigen::Map<const Vector>(eigs.data(), static_cast<Eigen::Index>(eigs.size())));
  } else {
    ctx.fail(op_node, src.name("operator"), "unknown operator '" + op + "' (dirichlet_laplacian or diagonal)");
  }
  if (const YAML::Node d = src.find("diffusivity"); d.IsDefined()) {
    const double nu = ctx.number(d, src.name("diffusivity"));
    if (!(nu >= 0.0)) {
      ctx.fail(d, src.name("diffusivity"), "must be nonnegative");
    }
    A = A->scaled(nu);
  }
  const std::size_t n = A->dim();

  auto optional_number = [&](const char* key, double fallback) {
    const YAML::Node node = src.find(key);
    return node.IsDefined() ? ctx.number(node, src.name(key)) : fallback;
  };
  auto mode_vector = [&](const YAML::Node& node, const std::string& key) {
    const auto c = ctx.list(node, key);
    if (c.size() > n) {
      ctx.fail(node, key, "has " + std::to_string(c.size()) + " modes but n = " + std::to_string(n));
    }
    return from_modes(*A, c);
  };

  std::vector<double> f_coefficients{0.0};
  if (const YAML::Node f = src.find("f"); f.IsDefined()) {
    f_coefficients = ctx.list(f, src.name("f"));
    if (f_coefficients.empty()) {
      ctx.fail(f, src.name("f"), "must list at least one coefficient");
    }
  }
  const double T = optional_number("T", 1.0);
  if (!(T > 0.0)) {
    ctx.fail(src.find("T"), src.name("T"), "horizon must be positive");
  }

  Vector u0 = Vector::Zero(static_cast<Eigen::Index>(n));
  const YAML::Node modes = src.find("u0_modes");
  const YAML::Node nodal = src.find("u0");
  if (modes.IsDefined() && nodal.IsDefined()) {
    ctx.fail(nodal, src.name("u0"), "give either u0 or u0_modes, not both");
  }
  if (modes.IsDefined()) {
    u0 = mode_vector(modes, src.name("u0_modes"));
  } else if (nodal.IsDefined()) {
    const auto v = ctx.list(nodal, src.name("u0"));
    if (v.size() != n) {
      ctx.fail(nodal, src.name("u0"), "needs " + std::to_string(n) + " values");
    }
    u0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(n));
  }

  std::optional<DiffusionCoefficient> B;
  if (src.has_group("noise")) {
    const YAML::Node q_node = src.find("noise", "q");
    if (!q_node.IsDefined()) {
      ctx.fail(src.name("q", "noise"), "required when a noise block is present");
    }
    const auto q = ctx.list(q_node, src.name("q", "noise"));
    if (q.empty() || q.size() > n) {
      ctx.fail(q_node, src.name("q", "noise"), "needs between 1 and n = " + std::to_string(n) + " weights");
    }
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (!(q[k] >= 0.0)) {
        ctx.fail(q_node, src.name("q", "noise") + "[" + std::to_string(k) + "]", "covariance weight must be >= 0");
      }
    }
    const auto d = static_cast<Eigen::Index>(q.size());
    std::vector<double> b(q.size(), 0.0);
    if (const YAML::Node b_node = src.find("noise", "b"); b_node.IsDefined()) {
      b = ctx.list(b_node, src.name("b", "noise"));
      if (b.size() != q.size()) {
        ctx.fail(b_node, src.name("b", "noise"), "needs one entry per covariance weight");
      }
    }
    double sigma = 0.0;
    if (const YAML::Node s = src.find("noise", "sigma"); s.IsDefined()) {
      sigma = ctx.number(s, src.name("sigma", "noise"));
    }
    const Matrix E = A->eigenvectors().leftCols(d);
    const Matrix base = E * Eigen::Map<const Vector>(b.data(), d).asDiagonal();
    B.emplace(base, Eigen::Map<const Vector>(q.data(), d), sigma, E);
  } else {
    B = DiffusionCoefficient::none(n);
  }

  std::optional<JumpCoefficient> G;
  if (src.has_group("jumps")) {
    const YAML::Node w_node = src.find("jumps", "weights");
    if (!w_node.IsDefined()) {
      ctx.fail(src.name("weights", "jumps"), "required when a jumps block is present");
    }
    MarkSpace marks;
    marks.weights = ctx.list(w_node, src.name("weights", "jumps"));
    if (marks.weights.empty()) {
      ctx.fail(w_node, src.name("weights", "jumps"), "needs at least one atom");
    }
    for (std::size_t j = 0; j < marks.weights.size(); ++j) {
      if (!(marks.weights[j] >= 0.0)) {
        ctx.fail(w_node, src.name("weights", "jumps") + "[" + std::to_string(j) + "]",
                 "mark weight must be >= 0");
      }
    }
    const std::size_t atoms = marks.weights.size();
    for (std::size_t j = 0; j < atoms; ++j) {
      marks.labels.push_back(static_cast<double>(j + 1));
    }
    if (const YAML::Node l = src.find("jumps", "labels"); l.IsDefined()) {
      marks.labels = ctx.list(l, src.name("labels", "jumps"));
      if (marks.labels.size() != atoms) {
        ctx.fail(l, src.name("labels", "jumps"), "needs one label per atom");
      }
    }
    std::vector<double> scales(atoms, 0.0);
    if (const YAML::Node s = src.find("jumps", "scales"); s.IsDefined()) {
      scales = ctx.list(s, src.name("scales", "jumps"));
      if (scales.size() != atoms) {
        ctx.fail(s, src.name("scales", "jumps"), "needs one scale per atom");
      }
    }
    std::vector<Vector> shifts(atoms, Vector::Zero(static_cast<Eigen::Index>(n)));
    if (const YAML::Node s = src.find("jumps", "shift_modes"); s.IsDefined()) {
      if (!s.IsSequence() || s.size() != atoms) {
        ctx.fail(s, src.name("shift_modes", "jumps"), "needs one list of mode coefficients per atom");
      }
      for (std::size_t j = 0; j < atoms; ++j) {
        shifts[j] = mode_vector(s[j], src.name("shift_modes", "jumps") + "[" + std::to_string(j) + "]");
      }
    }
    G.emplace(marks, shifts, scales);
  } else {
    G = JumpCoefficient::none(n);
  }

  EquationSpec spec{*A, Nonlinearity{Polynomial(f_coefficients), optional_number("eta", 0.0)}, *B, *G, u0, T,
                    optional_number("alpha", 0.0)};
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    ctx.fail(src.name("*"), e.what());
  }
  return spec;
}

void check_dt(const Context& ctx, const YAML::Node& node, const std::string& key, double dt, double T) {
  if (!(dt > 0.0)) {
    ctx.fail(node, key, "time step must be positive");
  }
  try {
    (void)TimeGrid::with_step(T, dt);
  } catch (const std::invalid_argument& e) {
    ctx.fail(node, key, e.what());
  }
}

ExperimentSettings parse_experiment(const Context& ctx, const std::string& name, const YAML::Node& node,
                                    const RunConfig& config) {
  ExperimentSettings out;
  out.name = name;
  const auto& keys = experiment_keys().at(name);
  const std::string where = "experiment." + name;
  if (!node.IsDefined() || node.IsNull()) {
    return out;
  }
  std::set<std::string> allowed;
  for (const auto& k : keys) {
    allowed.insert(k.key);
  }
  ctx.allowed_keys(node, where, allowed);
  for (const auto& spec : keys) {
    const YAML::Node value = node[spec.key];
    if (!value.IsDefined()) {
      continue;
    }
    const std::string key = where + "." + spec.key;
    switch (spec.kind) {
      case Kind::number:
        out.values[spec.key] = ctx.number(value, key);
        break;
      case Kind::count:
        out.values[spec.key] = static_cast<double>(ctx.count(value, key));
        break;
      case Kind::list:
        out.values[spec.key] = ctx.list(value, key);
        break;
      case Kind::dyadic_list: {
        auto dts = ctx.list(value, key);
        try {
          dts = dyadic_steps(dts, 2);
        } catch (const std::invalid_argument& e) {
          ctx.fail(value, key, e.what());
        }
        out.values[spec.key] = dts;
        break;
      }
      case Kind::text:
        out.values[spec.key] = ctx.text(value, key);
        break;
      case Kind::scheme: {
        const std::string s = ctx.text(value, key);
        try {
          (void)scheme_from_string(s);
        } catch (const std::invalid_argument& e) {
          ctx.fail(value, key, e.what());
        }
        out.values[spec.key] = s;
        break;
      }
      case Kind::schemes: {
        const auto s = ctx.words(value, key);
        if (s.size() != 2) {
          ctx.fail(value, key, "expected exactly two scheme names");
        }
        for (const auto& word : s) {
          try {
            (void)scheme_from_string(word);
          } catch (const std::invalid_argument& e) {
            ctx.fail(value, key, e.what());
          }
        }
        out.values[spec.key] = s;
        break;
      }
      case Kind::equation: {
        const std::string e = ctx.text(value, key);
        const bool known = std::any_of(config.equations.begin(), config.equations.end(),
                                       [&](const NamedEquation& eq) { return eq.name == e; });
        if (!known) {
          ctx.fail(value, key, "unknown equation '" + e + "'");
        }
        out.values[spec.key] = e;
        break;
      }
    }
  }
  const double T = config.equation(out.text("equation", "base")).spec.T;
  if (const YAML::Node dt = node["dt"]; dt.IsDefined()) {
    check_dt(ctx, dt, where + ".dt", std::get<double>(out.values["dt"]), T);
  }
  if (const YAML::Node dts = node["dts"]; dts.IsDefined()) {
    for (double dt : std::get<std::vector<double>>(out.values["dts"])) {
      check_dt(ctx, dts, where + ".dts", dt, T);
    }
  }
  return out;
}

}  // namespace

double ExperimentSettings::number(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : std::get<double>(it->second);
}

std::size_t ExperimentSettings::count(const std::string& key, std::size_t fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : static_cast<std::size_t>(std::get<double>(it->second));
}

std::vector<double> ExperimentSettings::list(const std::string& key, std::vector<double> fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : std::get<std::vector<double>>(it->second);
}

std::string ExperimentSettings::text(const std::string& key, std::string fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : std::get<std::string>(it->second);
}

std::vector<std::string> ExperimentSettings::words(const std::string& key, std::vector<std::string> fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : std::get<std::vector<std::string>>(it->second);
}

const NamedEquation& RunConfig::equation(std::string_view name) const {
  for (const auto& eq : equations) {
    if (eq.name == name) {
      return eq;
    }
  }
  throw std::invalid_argument("unknown equation '" + std::string(name) + "'");
}

const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, keys] : experiment_keys()) {
      out.push_back(name);
    }
    return out;
  }();
  return names;
}

Vector from_modes(const SpectralOperator& A, const std::vector<double>& coefficients) {
  if (coefficients.size() > A.dim()) {
    throw std::invalid_argument("from_modes: more coefficients than modes");
  }
  Vector c = Vector::Zero(static_cast<Eigen::Index>(A.dim()));
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    c[static_cast<Eigen::Index>(k)] = coefficients[k];
  }
  return A.synthesize(c);
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path.string() + ": cannot open config file");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& source) {
  const Context ctx(source.string());
  const YAML::Node root = [&] {
    try {
      return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
      throw ConfigError(source.string() + ":" + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg);
    }
  }();
  if (!root.IsMap()) {
    ctx.fail("<root>", "expected sections equation, variants, experiment, output");
  }
  ctx.unique_keys(root, "");
  ctx.allowed_keys(root, "", {"equation", "variants", "experiment", "output"});

  RunConfig config;
  config.source = source;
  config.text = text;

  const YAML::Node base = root["equation"];
  if (!base.IsDefined()) {
    ctx.fail("equation", "section is required");
  }
  check_equation_keys(ctx, base, "equation");
  config.equations.push_back(
      NamedEquation{"base", build_equation(ctx, EquationSource(base, YAML::Node(), "equation")), {}});
  if (const YAML::Node variants = root["variants"]; variants.IsDefined()) {
    if (!variants.IsMap()) {
      ctx.fail(variants, "variants", "expected a mapping of name to overrides");
    }
    for (const auto& item : variants) {
      const std::string name = item.first.Scalar();
      if (name == "base" || std::any_of(config.equations.begin(), config.equations.end(),
                                        [&](const NamedEquation& e) { return e.name == name; })) {
        ctx.fail(item.first, "variants." + name, "duplicate equation name");
      }
      check_equation_keys(ctx, item.second, "variants." + name);
      config.equations.push_back(
          NamedEquation{name, build_equation(ctx, EquationSource(base, item.second, "variants." + name)), {}});
    }
  }

  const YAML::Node experiment = root["experiment"];
  if (!experiment.IsDefined() || !experiment.IsMap()) {
    ctx.fail(experiment, "experiment", "section with an explicit seed is required");
  }
  const YAML::Node seed = experiment["seed"];
  if (!seed.IsDefined()) {
    ctx.fail(experiment, "experiment.seed", "an explicit seed is required");
  }
  try {
    config.seed = seed.as<std::uint64_t>();
  } catch (const YAML::BadConversion&) {
    ctx.fail(seed, "experiment.seed", "expected a nonnegative integer");
  }
  for (auto& eq : config.equations) {
    eq.margin = check_dissipativity_triplet(eq.spec, kMarginSamples, config.seed);
  }

  std::set<std::string> allowed{"seed", "run"};
  for (const auto& name : known_experiments()) {
    allowed.insert(name);
  }
  ctx.allowed_keys(experiment, "experiment", allowed);
  std::vector<std::string> run;
  if (const YAML::Node r = experiment["run"]; r.IsDefined() && !r.IsNull()) {
    run = ctx.words(r, "experiment.run");
    std::set<std::string> seen;
    for (const auto& name : run) {
      if (experiment_keys().count(name) == 0) {
        ctx.fail(r, "experiment.run", "unknown experiment '" + name + "'");
      }
      if (!seen.insert(name).second) {
        ctx.fail(r, "experiment.run", "experiment '" + name + "' listed twice");
      }
    }
  }
  std::map<std::string, ExperimentSettings> parsed;
  for (const auto& name : known_experiments()) {
    if (experiment[name].IsDefined()) {
      parsed.emplace(name, parse_experiment(ctx, name, experiment[name], config));
    }
  }
  for (const auto& name : run) {
    const auto it = parsed.find(name);
    config.experiments.push_back(it != parsed.end() ? it->second : parse_experiment(ctx, name, YAML::Node(), config));
  }

  if (const YAML::Node output = root["output"]; output.IsDefined()) {
    ctx.allowed_keys(output, "output", {"directory", "plots"});
    if (const YAML::Node d = output["directory"]; d.IsDefined()) {
      config.output_directory = ctx.text(d, "output.directory");
    }
    if (const YAML::Node p = output["plots"]; p.IsDefined()) {
      try {
        config.plots = p.as<bool>();
      } catch (const YAML::BadConversion&) {
        ctx.fail(p, "output.plots", "expected true or false");
      }
    }
  }
  return config;
}

}  // namespace mildsim::cli
