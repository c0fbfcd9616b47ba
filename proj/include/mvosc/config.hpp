#pragma once

// Run configuration: a TOML file with sections [model], [solver], [particles],
// [orbit], [isochron], [output]. Every key has a default; unknown keys and type
// mismatches are rejected.

#include "mvosc/core.hpp"
#include "mvosc/isochron.hpp"
#include "mvosc/model.hpp"
#include "mvosc/orbit.hpp"
#include "mvosc/particles.hpp"
#include "mvosc/pde.hpp"

#define TOML_EXCEPTIONS 1
#include <toml++/toml.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mvosc {

struct ModelConfig {
  std::string drift = "fhn";
  double a = 1.0 / 3.0, b = 1.0, c = 10.0;
  double delta = 0.05;
  std::vector<double> k{1.0, 1.0};
  std::vector<double> sigma{std::sqrt(0.2), std::sqrt(0.2)};
};

struct SolverSection {
  SolverConfig solver;
  double horizon = 200.0;  // fast time for the `pde` trajectory
  int stride = 10;
  bool coefficients = false;  // append flattened coefficients to trajectory CSVs
};

struct ParticleSection {
  SimConfig sim;
};

struct OrbitSection {
  OrbitConfig orbit;
  std::vector<double> z0{0.5, 0.1};
  double horizon = 100.0;  // slow time for the `reduced` trajectory
  double record_dt = 0.1;
  double pde_dt = 0.1;     // PDE step used for cycles and monodromy
};

struct IsochronSection {
  IsochronConfig iso;
  std::vector<double> window{-2.5, 2.5, -1.5, 1.5};  // x0, x1, y0, y1
  int nx = 41, ny = 41;
  int scan_states = 50;
  double scan_radius = 0.3;
  std::uint64_t seed = 7;
};

struct OutputSection {
  std::string dir;  // empty: $MVOSC_OUTPUT_DIR, else "."
  std::string prefix;
  bool plots = true;
};

struct RunConfig {
  ModelConfig model;
  SolverSection solver;
  ParticleSection particles;
  OrbitSection orbit;
  IsochronSection isochron;
  OutputSection output;

  /// sigma_i^2 / k_i
  double ratio(int i) const { return model.sigma[i] * model.sigma[i] / model.k[i]; }
  void set_ratio(int i, double r) {
    require(r >= 0.0 && std::isfinite(r), ErrorKind::config, "noise ratio must be >= 0");
    model.sigma[i] = std::sqrt(r * model.k[i]);
  }
  bool noiseless() const {
    return std::any_of(model.sigma.begin(), model.sigma.end(), [](double s) { return s == 0.0; });
  }

  FhnParams fhn() const { return FhnParams{model.a, model.b, model.c}; }

  ModelSpec model_spec() const {
    require(!noiseless(), ErrorKind::config,
            "this command needs sigma > 0 in every coordinate (set model.sigma or --ratio1 > 0)");
    return make_fhn_model(fhn(), ratio(0), ratio(1), model.delta, Eigen::Map<const Vec>(model.k.data(), 2));
  }

  /// Slow-time reduced flow; falls back to the closed form when a ratio is 0.
  ReducedFlow reduced_flow() const {
    if (noiseless()) return ReducedFlow::fhn_closed(fhn(), ratio(0), orbit.orbit);
    return ReducedFlow(model_spec(), orbit.orbit);
  }

  std::string output_dir() const {
    if (!output.dir.empty()) return output.dir;
    if (const char* env = std::getenv("MVOSC_OUTPUT_DIR"); env && *env) return env;
    return ".";
  }
};

namespace detail {

using Value = std::variant<double, std::int64_t, bool, std::string, std::vector<double>>;

struct Field {
  std::string section, key, type, doc;
  std::function<Value(const RunConfig&)> get;
  std::function<void(RunConfig&, const Value&)> set;
};

template <typename T>
Field num(std::string s, std::string k, std::string doc, T RunConfig::*sec, double T::*mem) {
  return {s, k, "number", doc, [=](const RunConfig& c) { return Value((c.*sec).*mem); },
          [=](RunConfig& c, const Value& v) { (c.*sec).*mem = std::get<double>(v); }};
}

template <typename T, typename I>
Field integer(std::string s, std::string k, std::string doc, T RunConfig::*sec, I T::*mem) {
  return {s, k, "integer", doc, [=](const RunConfig& c) { return Value(static_cast<std::int64_t>((c.*sec).*mem)); },
          [=](RunConfig& c, const Value& v) { (c.*sec).*mem = static_cast<I>(std::get<std::int64_t>(v)); }};
}

template <typename T>
Field boolean(std::string s, std::string k, std::string doc, T RunConfig::*sec, bool T::*mem) {
  return {s, k, "boolean", doc, [=](const RunConfig& c) { return Value((c.*sec).*mem); },
          [=](RunConfig& c, const Value& v) { (c.*sec).*mem = std::get<bool>(v); }};
}

template <typename T>
Field text(std::string s, std::string k, std::string doc, T RunConfig::*sec, std::string T::*mem) {
  return {s, k, "string", doc, [=](const RunConfig& c) { return Value((c.*sec).*mem); },
          [=](RunConfig& c, const Value& v) { (c.*sec).*mem = std::get<std::string>(v); }};
}

template <typename T>
Field array(std::string s, std::string k, std::string doc, T RunConfig::*sec, std::vector<double> T::*mem) {
  return {s, k, "array", doc, [=](const RunConfig& c) { return Value((c.*sec).*mem); },
          [=](RunConfig& c, const Value& v) { (c.*sec).*mem = std::get<std::vector<double>>(v); }};
}

// Nested structs (SolverConfig inside SolverSection, ...) need a two-level accessor.
template <typename T, typename U, typename M>
Field nested(std::string s, std::string k, std::string type, std::string doc, T RunConfig::*sec, U T::*sub,
             M U::*mem) {
  return {s, k, type, doc,
          [=](const RunConfig& c) {
            const M& x = ((c.*sec).*sub).*mem;
            if constexpr (std::is_same_v<M, double>) return Value(x);
            else if constexpr (std::is_same_v<M, bool>) return Value(x);
            else return Value(static_cast<std::int64_t>(x));
          },
          [=](RunConfig& c, const Value& v) {
            M& x = ((c.*sec).*sub).*mem;
            if constexpr (std::is_same_v<M, double>) x = std::get<double>(v);
            else if constexpr (std::is_same_v<M, bool>) x = std::get<bool>(v);
            else x = static_cast<M>(std::get<std::int64_t>(v));
          }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    using RC = RunConfig;
    std::vector<Field> v;
    v.push_back(text("model", "drift", "drift family (only \"fhn\")", &RC::model, &ModelConfig::drift));
    v.push_back(num("model", "a", "FitzHugh-Nagumo a", &RC::model, &ModelConfig::a));
    v.push_back(num("model", "b", "FitzHugh-Nagumo b", &RC::model, &ModelConfig::b));
    v.push_back(num("model", "c", "FitzHugh-Nagumo c (time-scale ratio)", &RC::model, &ModelConfig::c));
    v.push_back(num("model", "delta", "slow time-scale parameter", &RC::model, &ModelConfig::delta));
    v.push_back(array("model", "k", "interaction strengths k_i", &RC::model, &ModelConfig::k));
    v.push_back(array("model", "sigma", "noise amplitudes sigma_i", &RC::model, &ModelConfig::sigma));

    v.push_back(nested("solver", "dt", "number", "ETD2RK step (fast time)", &RC::solver, &SolverSection::solver,
                       &SolverConfig::dt));
    v.push_back(nested("solver", "n_max", "integer", "Hermite total-degree truncation", &RC::solver,
                       &SolverSection::solver, &SolverConfig::n_max));
    v.push_back(nested("solver", "quad_order", "integer", "Gauss-Hermite nodes per axis (0: automatic)",
                       &RC::solver, &SolverSection::solver, &SolverConfig::quad_order));
    v.push_back(nested("solver", "theta", "number", "basis weight parameter", &RC::solver, &SolverSection::solver,
                       &SolverConfig::theta));
    v.push_back(nested("solver", "r", "number", "order of the dual Sobolev norm", &RC::solver,
                       &SolverSection::solver, &SolverConfig::r));
    v.push_back(num("solver", "horizon", "trajectory length (fast time)", &RC::solver, &SolverSection::horizon));
    v.push_back(integer("solver", "stride", "record every stride steps", &RC::solver, &SolverSection::stride));
    v.push_back(boolean("solver", "coefficients", "append coefficients to trajectory CSV", &RC::solver,
                        &SolverSection::coefficients));

    v.push_back(nested("particles", "n", "integer", "ensemble size", &RC::particles, &ParticleSection::sim,
                       &SimConfig::n));
    v.push_back(nested("particles", "h", "number", "Euler-Maruyama step (fast time)", &RC::particles,
                       &ParticleSection::sim, &SimConfig::h));
    v.push_back(nested("particles", "seed", "integer", "RNG seed", &RC::particles, &ParticleSection::sim,
                       &SimConfig::seed));
    v.push_back(nested("particles", "horizon", "number", "simulated time (fast)", &RC::particles,
                       &ParticleSection::sim, &SimConfig::horizon));
    v.push_back(nested("particles", "stride", "integer", "record every stride steps", &RC::particles,
                       &ParticleSection::sim, &SimConfig::stride));
    v.push_back(nested("particles", "threads", "integer", "worker cap (0: default)", &RC::particles,
                       &ParticleSection::sim, &SimConfig::threads));

    v.push_back(nested("orbit", "dt", "number", "reduced RK4 step (slow time)", &RC::orbit, &OrbitSection::orbit,
                       &OrbitConfig::dt));
    v.push_back(nested("orbit", "quad_order", "integer", "Gauss-Hermite order for the effective drift",
                       &RC::orbit, &OrbitSection::orbit, &OrbitConfig::quad_order));
    v.push_back(nested("orbit", "samples", "integer", "phase samples per cycle", &RC::orbit, &OrbitSection::orbit,
                       &OrbitConfig::samples));
    v.push_back(nested("orbit", "transient", "number", "slow time discarded before the cycle search", &RC::orbit,
                       &OrbitSection::orbit, &OrbitConfig::transient));
    v.push_back(nested("orbit", "window", "number", "slow time scanned for the section anchor", &RC::orbit,
                       &OrbitSection::orbit, &OrbitConfig::window));
    v.push_back(nested("orbit", "tol", "number", "reduced shooting tolerance", &RC::orbit, &OrbitSection::orbit,
                       &OrbitConfig::tol));
    v.push_back(nested("orbit", "pde_tol", "number", "PDE shooting tolerance", &RC::orbit, &OrbitSection::orbit,
                       &OrbitConfig::pde_tol));
    v.push_back(nested("orbit", "max_newton", "integer", "Newton iteration cap", &RC::orbit, &OrbitSection::orbit,
                       &OrbitConfig::max_newton));
    v.push_back(nested("orbit", "pde_max_periods", "integer", "PDE return-map iteration cap", &RC::orbit,
                       &OrbitSection::orbit, &OrbitConfig::pde_max_periods));
    v.push_back(array("orbit", "z0", "initial mean for trajectories and cycle search", &RC::orbit,
                      &OrbitSection::z0));
    v.push_back(num("orbit", "horizon", "reduced trajectory length (slow time)", &RC::orbit, &OrbitSection::horizon));
    v.push_back(num("orbit", "record_dt", "reduced trajectory output spacing", &RC::orbit, &OrbitSection::record_dt));
    v.push_back(num("orbit", "pde_dt", "PDE step for cycles and monodromy", &RC::orbit, &OrbitSection::pde_dt));

    v.push_back(nested("isochron", "match_tol", "number", "landing distance accepted as on-cycle", &RC::isochron,
                       &IsochronSection::iso, &IsochronConfig::match_tol));
    v.push_back(nested("isochron", "max_periods", "integer", "cap on periods integrated per phase", &RC::isochron,
                       &IsochronSection::iso, &IsochronConfig::max_periods));
    v.push_back(nested("isochron", "fd_step", "number", "finite-difference displacement", &RC::isochron,
                       &IsochronSection::iso, &IsochronConfig::fd_step));
    v.push_back(array("isochron", "window", "grid rectangle [x0, x1, y0, y1]", &RC::isochron,
                      &IsochronSection::window));
    v.push_back(integer("isochron", "nx", "grid points along x", &RC::isochron, &IsochronSection::nx));
    v.push_back(integer("isochron", "ny", "grid points along y", &RC::isochron, &IsochronSection::ny));
    v.push_back(integer("isochron", "scan_states", "random states in a phase scan", &RC::isochron,
                        &IsochronSection::scan_states));
    v.push_back(num("isochron", "scan_radius", "perturbation size in a phase scan", &RC::isochron,
                    &IsochronSection::scan_radius));
    v.push_back(integer("isochron", "seed", "phase-scan seed", &RC::isochron, &IsochronSection::seed));

    v.push_back(text("output", "dir", "output directory (empty: $MVOSC_OUTPUT_DIR or .)", &RC::output,
                     &OutputSection::dir));
    v.push_back(text("output", "prefix", "file-name prefix", &RC::output, &OutputSection::prefix));
    v.push_back(boolean("output", "plots", "write plotting scripts next to CSVs", &RC::output,
                        &OutputSection::plots));
    return v;
  }();
  return f;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::string nearest(const std::string& word, const std::vector<std::string>& options) {
  std::string best;
  std::size_t bd = static_cast<std::size_t>(-1);
  for (const auto& o : options) {
    const std::size_t d = edit_distance(word, o);
    if (d < bd) {
      bd = d;
      best = o;
    }
  }
  return best;
}

inline std::vector<std::string> section_names() {
  return {"model", "solver", "particles", "orbit", "isochron", "output"};
}

inline std::vector<std::string> keys_of(const std::string& section) {
  std::vector<std::string> k;
  for (const Field& f : fields())
    if (f.section == section) k.push_back(f.key);
  return k;
}

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline Value convert(const Field& f, const toml::node& node) {
  const std::string where = f.section + "." + f.key;
  auto mismatch = [&](const char* got) -> Value {
    fail(ErrorKind::config, "type mismatch for " + where + ": expected " + f.type + ", got " + got);
  };
  if (f.type == "number") {
    if (auto d = node.value_exact<double>()) return *d;
    if (auto i = node.value_exact<std::int64_t>()) return static_cast<double>(*i);
    return mismatch(node.is_string() ? "string" : node.is_boolean() ? "boolean" : "other");
  }
  if (f.type == "integer") {
    if (auto i = node.value_exact<std::int64_t>()) return *i;
    return mismatch(node.is_floating_point() ? "number with a fraction" : node.is_string() ? "string" : "other");
  }
  if (f.type == "boolean") {
    if (auto b = node.value_exact<bool>()) return *b;
    return mismatch("non-boolean");
  }
  if (f.type == "string") {
    if (auto s = node.value_exact<std::string>()) return *s;
    return mismatch("non-string");
  }
  const toml::array* arr = node.as_array();
  if (!arr) return mismatch("scalar");
  std::vector<double> out;
  for (const toml::node& e : *arr) {
    if (auto d = e.value_exact<double>()) out.push_back(*d);
    else if (auto i = e.value_exact<std::int64_t>()) out.push_back(static_cast<double>(*i));
    else fail(ErrorKind::config, "type mismatch for " + where + ": expected an array of numbers");
  }
  return out;
}

}  // namespace detail

/// Checks every field against the invariants of the module that consumes it.
inline void validate(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::config, what); };
  const auto& m = c.model;
  check(m.drift == "fhn", "model.drift must be \"fhn\"");
  check(std::isfinite(m.a) && std::isfinite(m.b), "model.a and model.b must be finite");
  check(std::isfinite(m.c) && m.c != 0.0, "model.c must be finite and nonzero");
  check(std::isfinite(m.delta) && m.delta >= 0.0, "model.delta must be >= 0");
  check(m.k.size() == 2 && m.sigma.size() == 2, "model.k and model.sigma need 2 entries (d = 2)");
  for (double k : m.k) check(std::isfinite(k) && k > 0.0, "model.k entries must be > 0");
  for (double s : m.sigma) check(std::isfinite(s) && s >= 0.0, "model.sigma entries must be >= 0");

  const auto& s = c.solver;
  check(s.solver.dt > 0.0, "solver.dt must be > 0");
  check(s.solver.n_max >= 1 && s.solver.n_max <= 64, "solver.n_max must be in [1, 64]");
  check(s.solver.quad_order >= 0, "solver.quad_order must be >= 0");
  check(s.solver.theta > 0.0 && s.solver.theta <= 1.0, "solver.theta must be in (0, 1]");
  check(s.solver.r >= 0.0, "solver.r must be >= 0");
  check(s.horizon > 0.0, "solver.horizon must be > 0");
  check(s.stride >= 1, "solver.stride must be >= 1");

  const auto& p = c.particles.sim;
  check(p.n >= 1, "particles.n must be >= 1");
  check(p.h > 0.0, "particles.h must be > 0");
  check(p.horizon > 0.0, "particles.horizon must be > 0");
  check(p.stride >= 1, "particles.stride must be >= 1");
  check(p.threads >= 0, "particles.threads must be >= 0");

  const auto& o = c.orbit;
  check(o.orbit.dt > 0.0, "orbit.dt must be > 0");
  check(o.orbit.quad_order >= 1, "orbit.quad_order must be >= 1");
  check(o.orbit.samples >= 8, "orbit.samples must be >= 8");
  check(o.orbit.transient >= 0.0 && o.orbit.window > 0.0, "orbit.transient >= 0 and orbit.window > 0");
  check(o.orbit.tol > 0.0 && o.orbit.pde_tol > 0.0, "orbit tolerances must be > 0");
  check(o.orbit.max_newton >= 1 && o.orbit.pde_max_periods >= 1, "orbit iteration caps must be >= 1");
  check(o.z0.size() == 2, "orbit.z0 needs 2 entries");
  check(o.horizon > 0.0 && o.record_dt > 0.0, "orbit.horizon and orbit.record_dt must be > 0");
  check(o.pde_dt > 0.0, "orbit.pde_dt must be > 0");

  const auto& i = c.isochron;
  check(i.iso.match_tol > 0.0, "isochron.match_tol must be > 0");
  check(i.iso.max_periods >= 1, "isochron.max_periods must be >= 1");
  check(i.iso.fd_step > 0.0, "isochron.fd_step must be > 0");
  check(i.window.size() == 4 && i.window[0] < i.window[1] && i.window[2] < i.window[3],
        "isochron.window must be [x0, x1, y0, y1] with x0 < x1, y0 < y1");
  check(i.nx >= 2 && i.ny >= 2, "isochron.nx and isochron.ny must be >= 2");
  check(i.scan_states >= 1 && i.scan_radius > 0.0, "isochron.scan_states >= 1 and scan_radius > 0");
}

/// Applies "section.key = value" (TOML value syntax) on top of c.
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorKind::config, "override must look like section.key=value: " + assignment);
  std::string lhs = assignment.substr(0, eq);
  lhs.erase(std::remove_if(lhs.begin(), lhs.end(), ::isspace), lhs.end());
  const auto dot = lhs.find('.');
  require(dot != std::string::npos, ErrorKind::config, "override key must be section.key: " + lhs);
  const std::string sec = lhs.substr(0, dot), key = lhs.substr(dot + 1);
  const auto secs = detail::section_names();
  if (std::find(secs.begin(), secs.end(), sec) == secs.end())
    fail(ErrorKind::config, "unknown section [" + sec + "]; did you mean [" + detail::nearest(sec, secs) + "]?");
  const detail::Field* f = detail::find_field(sec, key);
  if (!f)
    fail(ErrorKind::config, "unknown key \"" + key + "\" in [" + sec + "]; did you mean \"" +
                                detail::nearest(key, detail::keys_of(sec)) + "\"?");
  toml::table t;
  try {
    t = toml::parse("v = " + assignment.substr(eq + 1));
  } catch (const toml::parse_error& e) {
    fail(ErrorKind::config, "cannot parse value in override " + assignment + ": " + std::string(e.description()));
  }
  f->set(c, detail::convert(*f, *t.get("v")));
}

inline RunConfig parse_config_text(std::string_view text, const std::string& source = "<inline>") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorKind::config, os.str());
  }
  RunConfig c;
  const auto secs = detail::section_names();
  for (const auto& [skey, snode] : root) {
    const std::string sec(skey.str());
    if (std::find(secs.begin(), secs.end(), sec) == secs.end())
      fail(ErrorKind::config, "unknown section [" + sec + "]; did you mean [" + detail::nearest(sec, secs) + "]?");
    const toml::table* tbl = snode.as_table();
    require(tbl != nullptr, ErrorKind::config, "[" + sec + "] must be a table");
    for (const auto& [kkey, knode] : *tbl) {
      const std::string key(kkey.str());
      const detail::Field* f = detail::find_field(sec, key);
      if (!f)
        fail(ErrorKind::config, "unknown key \"" + key + "\" in [" + sec + "]; did you mean \"" +
                                    detail::nearest(key, detail::keys_of(sec)) + "\"?");
      f->set(c, detail::convert(*f, knode));
    }
  }
  validate(c);
  return c;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

namespace detail {
// Shortest decimal that round-trips, always spelled as a TOML float.
inline std::string toml_float(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}
}  // namespace detail

/// TOML text with every field; parse_config_text(serialize(c)) reproduces c.
inline std::string serialize(const RunConfig& c) {
  std::ostringstream os;
  std::string current;
  for (const detail::Field& f : detail::fields()) {
    if (f.section != current) {
      if (!current.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = ";
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            os << detail::toml_float(v);
          } else if constexpr (std::is_same_v<T, std::int64_t>) {
            os << v;
          } else if constexpr (std::is_same_v<T, bool>) {
            os << (v ? "true" : "false");
          } else if constexpr (std::is_same_v<T, std::string>) {
            os << toml::value<std::string>(v);
          } else {
            os << "[";
            for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << detail::toml_float(v[i]);
            os << "]";
          }
        },
        f.get(c));
    os << "\n";
  }
  return os.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  for (const detail::Field& f : detail::fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

}  // namespace mvosc
