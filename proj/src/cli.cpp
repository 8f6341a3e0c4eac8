#include "l2ext/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "l2ext/curvature.hpp"
#include "l2ext/prekopa.hpp"
#include "l2ext/verify.hpp"

namespace l2ext::cli {

namespace {

// ---------------------------------------------------------------------------
// Option tables
// ---------------------------------------------------------------------------

enum class Type { Str, Num, Int, Flag };

struct OptSpec {
  std::string name;
  Type type;
  std::string fallback;  // default as text; empty means unset
  std::string help;
};

std::vector<OptSpec> common_options(const std::string& format) {
  return {
      {"config", Type::Str, "", "JSON file with option values (flags override it)"},
      {"output", Type::Str, "-", "output path, '-' for standard output"},
      {"format", Type::Str, format, "output format"},
      {"degree", Type::Int, "16", "basis degree N for discs"},
      {"resolution", Type::Str, "64x128", "disc quadrature n_rad x n_ang"},
      {"cylinder-degree", Type::Int, "10", "basis degree per variable for cylinders"},
      {"cylinder-resolution", Type::Str, "24x48", "cylinder quadrature per factor"},
      {"domain-radius", Type::Num, "", "radius of the ambient domain about 0"},
      {"seed", Type::Int, "0", "seed for sampled unitaries and fiber vectors"},
  };
}

std::vector<OptSpec> command_options(const std::string& cmd) {
  std::vector<OptSpec> o;
  if (cmd == "index" || cmd == "extend") {
    o = common_options("json");
    o.insert(o.end(), {
                          {"weight", Type::Str, "", "weight spec"},
                          {"metric", Type::Str, "", "metric spec"},
                          {"center", Type::Str, "0", "center a (first coordinate)"},
                          {"center2", Type::Str, "0", "second coordinate of a (cylinders)"},
                          {"radius", Type::Num, "0.5", "radius r"},
                          {"s", Type::Num, "", "second radius; selects a cylinder"},
                          {"xi", Type::Str, "", "fiber vector, e.g. 1,-1"},
                          {"random-unitary", Type::Flag, "", "seeded unitary instead of I"},
                      });
  } else if (cmd == "sweep") {
    o = common_options("csv");
    o.insert(o.end(), {
                          {"weight", Type::Str, "", "weight spec"},
                          {"metric", Type::Str, "", "metric spec"},
                          {"centers", Type::Str, "0", "comma-separated centers"},
                          {"center2", Type::Str, "0", "second coordinate (cylinders)"},
                          {"radii", Type::Str, "0.5", "comma-separated radii"},
                          {"s", Type::Str, "", "comma-separated second radii (cylinders)"},
                          {"xi", Type::Str, "", "fiber vectors separated by ';'"},
                          {"unitaries", Type::Int, "0", "seeded unitaries per cell (0: I)"},
                      });
  } else if (cmd == "curvature") {
    o = common_options("json");
    o.insert(o.end(), {
                          {"weight", Type::Str, "", "weight spec"},
                          {"metric", Type::Str, "", "metric spec"},
                          {"center", Type::Str, "0", "point a"},
                          {"xi", Type::Str, "", "fiber vectors for per-vector fits"},
                          {"r-min", Type::Num, "0.05", "fit window start"},
                          {"r-max", Type::Num, "0.3", "fit window end"},
                          {"ladder", Type::Int, "8", "radii on the fit ladder"},
                          {"g", Type::Num, "", "lower bound to check"},
                      });
  } else if (cmd == "prekopa") {
    o = common_options("json");
    o.insert(o.end(), {
                          {"weight", Type::Str, "", "weight in (tau, z)"},
                          {"fiber-center", Type::Str, "0", "fiber disc center"},
                          {"fiber-radius", Type::Num, "3", "fiber disc radius"},
                          {"fiber-resolution", Type::Str, "64x128", "fiber quadrature"},
                          {"tau", Type::Str, "0", "comma-separated tau values"},
                          {"g", Type::Str, "0", "g(tau) as an expression in tau"},
                          {"eps", Type::Num, "0.2", "epsilon for the index check"},
                          {"index-center", Type::Str, "0", "center of the index check"},
                          {"index-radii", Type::Str, "", "radii for the index check"},
                          {"index-degree", Type::Int, "12", "basis degree for the index of Phi"},
                          {"index-resolution", Type::Str, "32x64", "quadrature for Phi"},
                      });
  } else if (cmd == "verify") {
    o = common_options("json");
    o.insert(o.end(),
             {
                 {"suite", Type::Str, "", "index_to_curvature | equivalence | harmonic | flat | "
                                          "vector | cylinder | scaled"},
                 {"weight", Type::Str, "", "weight spec"},
                 {"metric", Type::Str, "", "metric spec"},
                 {"samples", Type::Str, "0", "comma-separated centers"},
                 {"center2", Type::Str, "0", "second coordinate (cylinder suite)"},
                 {"radii", Type::Str, "0.5", "comma-separated radii (harmonic grid)"},
                 {"radius", Type::Num, "0.5", "radius for the scaled suite"},
                 {"rs", Type::Str, "0.3:0.3,0.5:0.2", "r:s pairs for the cylinder suite"},
                 {"eps", Type::Str, "0.1,0.3,-0.1", "epsilon list; negatives are adversarial"},
                 {"xi", Type::Str, "", "fiber vectors separated by ';'"},
                 {"unitaries", Type::Int, "5", "seeded unitaries (cylinder suite)"},
                 {"m-max", Type::Int, "32", "largest scaling factor (scaled suite)"},
                 {"expect-fail", Type::Flag, "", "treat every bound row as adversarial"},
                 {"r-min", Type::Num, "0.05", "fit window start"},
                 {"r-max", Type::Num, "0.3", "fit window end"},
                 {"ladder", Type::Int, "8", "radii on the fit ladder"},
                 {"tolerance", Type::Num, "", "override the suite's main tolerance"},
                 {"fit-tolerance", Type::Num, "0.02", "relative fit tolerance"},
                 {"harmonic-tolerance", Type::Num, "1e-6", "|L - 1| and curvature tolerance"},
                 {"cylinder-tolerance", Type::Num, "1e-4", "|L - 1| tolerance on cylinders"},
                 {"mixed-tolerance", Type::Num, "1e-6", "mixed derivative tolerance"},
                 {"scaled-tolerance", Type::Num, "1e-9", "upper bound on log L_{m phi}/m"},
                 {"perturbation", Type::Num, "1e-3", "amplitude of the uniqueness probe"},
             });
  }
  return o;
}

const std::vector<std::string> kCommands = {"index", "extend", "sweep",
                                            "curvature", "prekopa", "verify"};

// ---------------------------------------------------------------------------
// Parsed parameters
// ---------------------------------------------------------------------------

Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }

class Params {
 public:
  Params(std::vector<OptSpec> specs, std::map<std::string, std::string> values,
         std::map<std::string, bool> flags)
      : specs_(std::move(specs)), values_(std::move(values)), flags_(std::move(flags)) {}

  bool has(const std::string& name) const { return !str(name).empty(); }

  std::string str(const std::string& name) const {
    const auto it = values_.find(name);
    return it == values_.end() ? std::string() : it->second;
  }

  double num(const std::string& name) const { return to_num(name, str(name)); }

  long long integer(const std::string& name) const {
    const std::string s = str(name);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw config_error("option --" + name + " expects an integer, got '" + s + "'");
  }

  bool flag(const std::string& name) const {
    const auto it = flags_.find(name);
    return it != flags_.end() && it->second;
  }

  cplx complex(const std::string& name) const { return to_complex(name, str(name)); }

  std::vector<double> num_list(const std::string& name) const {
    std::vector<double> out;
    for (const std::string& item : split(str(name), ',')) out.push_back(to_num(name, item));
    return out;
  }

  std::vector<cplx> complex_list(const std::string& name) const {
    std::vector<cplx> out;
    for (const std::string& item : split(str(name), ',')) out.push_back(to_complex(name, item));
    return out;
  }

  std::vector<Eigen::VectorXcd> vector_list(const std::string& name) const {
    std::vector<Eigen::VectorXcd> out;
    for (const std::string& vec : split(str(name), ';')) {
      const std::vector<std::string> parts = split(vec, ',');
      Eigen::VectorXcd v(static_cast<Eigen::Index>(parts.size()));
      for (std::size_t i = 0; i < parts.size(); ++i) v(i) = to_complex(name, parts[i]);
      out.push_back(v);
    }
    return out;
  }

  Resolution resolution(const std::string& name) const {
    const std::string s = str(name);
    const auto x = s.find('x');
    try {
      if (x != std::string::npos) {
        std::size_t u1 = 0;
        std::size_t u2 = 0;
        const int a = std::stoi(s.substr(0, x), &u1);
        const int b = std::stoi(s.substr(x + 1), &u2);
        if (u1 == x && u2 == s.size() - x - 1) return {a, b};
      }
    } catch (const std::exception&) {
    }
    throw config_error("option --" + name + " expects <n_rad>x<n_ang>, got '" + s + "'");
  }

  /// Effective configuration with defaults, typed, without I/O paths.
  json effective(const std::string& command) const {
    json j = json::object();
    j["command"] = command;
    for (const OptSpec& s : specs_) {
      if (s.name == "config" || s.name == "output") continue;
      if (s.type == Type::Flag) {
        j[s.name] = flag(s.name);
        continue;
      }
      if (!has(s.name)) continue;
      switch (s.type) {
        case Type::Num: j[s.name] = num(s.name); break;
        case Type::Int: j[s.name] = integer(s.name); break;
        default: j[s.name] = str(s.name); break;
      }
    }
    return j;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  }

  static double to_num(const std::string& name, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw config_error("option --" + name + " expects a number, got '" + s + "'");
  }

  static cplx to_complex(const std::string& name, const std::string& s) {
    try {
      return parse_complex(s);
    } catch (const Error&) {
      throw config_error("option --" + name + " expects a complex number, got '" + s + "'");
    }
  }

  std::vector<OptSpec> specs_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
};

// ---------------------------------------------------------------------------
// Config file merging
// ---------------------------------------------------------------------------

std::vector<std::string> config_tokens(const std::string& path, const std::string& command,
                                       const std::vector<OptSpec>& specs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw config_error("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "command") {
      if (!value.is_string() || value.get<std::string>() != command) {
        throw config_error("config file is for command " + value.dump() + ", not " + command);
      }
      continue;
    }
    const auto spec = std::find_if(specs.begin(), specs.end(),
                                   [&](const OptSpec& s) { return s.name == key; });
    if (spec == specs.end() || key == "config") {
      throw config_error("unknown config key '" + key + "' for command " + command);
    }
    if (spec->type == Type::Flag) {
      if (!value.is_boolean()) throw config_error("config key '" + key + "' must be a boolean");
      if (value.get<bool>()) tokens.push_back("--" + key);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number()) {
      text = value.dump();
    } else {
      throw config_error("config key '" + key + "' must be a string or a number");
    }
    tokens.push_back("--" + key);
    tokens.push_back(text);
  }
  return tokens;
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  return path;
}

// ---------------------------------------------------------------------------
// Formatting and output
// ---------------------------------------------------------------------------

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Eigen::MatrixXcd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(complex_json(M(i, j)));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v(i)));
  return out;
}

std::string xi_text(const Eigen::VectorXcd& xi) {
  std::string out;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (i) out += ";";
    out += format_complex(xi(i));
  }
  return out;
}

struct Output {
  std::string body;
  bool tabular = false;  // CSV or plot data: config goes to a sidecar
};

void emit(const Output& result, const Params& p, const json& config, std::ostream& out) {
  const std::string path = p.str("output");
  if (path.empty() || path == "-") {
    out << result.body;
    return;
  }
  auto write = [](const std::string& file, const std::string& text) {
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("cannot write output file '" + file + "'");
    f << text;
    f.flush();
    if (!f) throw config_error("failed writing output file '" + file + "'");
  };
  write(path, result.body);
  if (result.tabular) write(path + ".config.json", config.dump(2) + "\n");
}

std::string json_body(const std::string& command, const json& config, json result) {
  json j = json::object();
  j["command"] = command;
  j["config"] = config;
  j["result"] = std::move(result);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Shared input handling
// ---------------------------------------------------------------------------

IndexOptions index_options(const Params& p) {
  IndexOptions o;
  o.degree = static_cast<int>(p.integer("degree"));
  o.resolution = p.resolution("resolution");
  o.cylinder_degree = static_cast<int>(p.integer("cylinder-degree"));
  o.cylinder_resolution = p.resolution("cylinder-resolution");
  if (p.has("domain-radius")) o.domain_radius = p.num("domain-radius");
  return o;
}

std::uint64_t seed_of(const Params& p) {
  const long long s = p.integer("seed");
  if (s < 0) throw config_error("--seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

void require_one_source(const Params& p) {
  if (p.has("weight") == p.has("metric")) {
    throw config_error("give exactly one of --weight and --metric");
  }
}

void require_format(const Params& p, std::initializer_list<const char*> allowed) {
  const std::string f = p.str("format");
  for (const char* a : allowed) {
    if (f == a) return;
  }
  throw config_error("unsupported --format '" + f + "' for this command");
}

Eigen::VectorXcd default_xi(const MetricField& m, const Params& p) {
  if (!p.has("xi")) return Eigen::VectorXcd::Unit(m.rank(), 0);
  const auto xs = p.vector_list("xi");
  if (xs.size() != 1) throw config_error("--xi expects a single vector here");
  return xs.front();
}

json extension_json(const IndexResult& r) {
  const ExtensionResult& e = r.extension;
  json j{{"L", r.L},
         {"min_norm", e.min_norm},
         {"normalizer", r.normalizer},
         {"degree", e.degree},
         {"converged", e.converged},
         {"condition", e.condition}};
  if (r.xi.size() == 0) j["kernel_value"] = e.kernel_value;
  if (std::isfinite(e.previous_min_norm)) j["previous_min_norm"] = e.previous_min_norm;
  return j;
}

std::string csv_header(bool cylinder, bool vector) {
  std::string h = "a_re,a_im,r";
  if (cylinder) h += ",s";
  if (vector) h += ",xi";
  return h + ",L,N,converged,cond_estimate\n";
}

std::string csv_row(const ProfileRow& row, bool cylinder, bool vector) {
  std::string line = format_double(row.point.a[0].real()) + "," +
                     format_double(row.point.a[0].imag()) + "," + format_double(row.point.r);
  if (cylinder) line += "," + format_double(row.point.s);
  if (vector) line += "," + xi_text(row.point.xi);
  const double L = row.error ? std::nan("") : row.L;
  line += "," + format_double(L) + "," + std::to_string(row.degree) + "," +
          (row.converged ? "true" : "false") + "," + format_double(row.condition);
  return line + "\n";
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_index(const std::string& command, const Params& p, const json& config,
              std::ostream& out) {
  require_one_source(p);
  require_format(p, {"json", "csv"});
  const IndexOptions opts = index_options(p);
  const cplx a = p.complex("center");
  const double r = p.num("radius");
  IndexResult res;
  ProfileRow row;
  bool cylinder = false;
  bool vector = false;
  if (p.has("metric")) {
    vector = true;
    const MetricField m = parse_metric_spec(p.str("metric"));
    res = l2_index_vector(m, a, r, default_xi(m, p), opts);
    row.point.xi = res.xi;
  } else if (p.has("s")) {
    cylinder = true;
    const WeightField w = parse_weight_spec(p.str("weight"), Binding::Z1Z2);
    const Eigen::Matrix2cd A = p.flag("random-unitary") ? sample_unitaries(seed_of(p), 1).front()
                                                        : Eigen::Matrix2cd::Identity();
    row.point.s = p.num("s");
    res = l2_index_cylinder(w, {a, p.complex("center2")}, r, row.point.s, A, opts);
  } else {
    res = l2_index_line(parse_weight_spec(p.str("weight"), Binding::Z), a, r, opts);
  }
  Output o;
  if (p.str("format") == "csv") {
    row.point.a = {a, 0.0};
    row.point.r = r;
    row.L = res.L;
    row.degree = res.extension.degree;
    row.converged = res.extension.converged;
    row.condition = res.extension.condition;
    o.body = csv_header(cylinder, vector) + csv_row(row, cylinder, vector);
    o.tabular = true;
  } else {
    json result = extension_json(res);
    if (command == "extend") {
      json coef = json::array();
      const GramSystem& sys = *res.system;
      for (Eigen::Index i = 0; i < res.extension.coefficients.size(); ++i) {
        const auto [j, k] = sys.basis[static_cast<std::size_t>(i)];
        coef.push_back(json{{"basis", json::array({j, k})},
                            {"value", complex_json(res.extension.coefficients(i))}});
      }
      result["basis"] = cylinder ? "w1^j w2^k, w = A^H (z - a)"
                                 : (vector ? "(z - a)^j e_k" : "(z - a)^j");
      result["coefficients"] = coef;
    }
    o.body = json_body(command, config, result);
  }
  emit(o, p, config, out);
  return kOk;
}

int cmd_sweep(const Params& p, const json& config, std::ostream& out, std::ostream& err) {
  require_one_source(p);
  require_format(p, {"csv", "json", "plot"});
  const IndexOptions opts = index_options(p);
  const std::vector<cplx> centers = p.complex_list("centers");
  const std::vector<double> radii = p.num_list("radii");
  std::vector<ProfilePoint> grid;
  IndexProfile profile;
  bool cylinder = false;
  bool vector = false;
  if (p.has("metric")) {
    vector = true;
    const MetricField m = parse_metric_spec(p.str("metric"));
    const std::vector<Eigen::VectorXcd> xis =
        p.has("xi") ? p.vector_list("xi") : sample_fiber_vectors(m.rank(), seed_of(p), 0);
    for (cplx a : centers) {
      for (double r : radii) {
        for (const auto& xi : xis) {
          ProfilePoint pt;
          pt.a = {a, 0.0};
          pt.r = r;
          pt.xi = xi;
          grid.push_back(pt);
        }
      }
    }
    profile = index_profile(m, grid, opts);
  } else if (p.has("s")) {
    cylinder = true;
    const WeightField w = parse_weight_spec(p.str("weight"), Binding::Z1Z2);
    const long long n_u = p.integer("unitaries");
    const std::vector<Eigen::Matrix2cd> us =
        n_u > 0 ? sample_unitaries(seed_of(p), static_cast<int>(n_u))
                : std::vector<Eigen::Matrix2cd>{Eigen::Matrix2cd::Identity()};
    const cplx a2 = p.complex("center2");
    for (cplx a : centers) {
      for (double r : radii) {
        for (double s : p.num_list("s")) {
          for (const auto& A : us) {
            ProfilePoint pt;
            pt.a = {a, a2};
            pt.r = r;
            pt.s = s;
            pt.A = A;
            grid.push_back(pt);
          }
        }
      }
    }
    profile = index_profile_cylinder(w, grid, opts);
  } else {
    const WeightField w = parse_weight_spec(p.str("weight"), Binding::Z);
    for (cplx a : centers) {
      for (double r : radii) {
        ProfilePoint pt;
        pt.a = {a, 0.0};
        pt.r = r;
        grid.push_back(pt);
      }
    }
    profile = index_profile(w, grid, opts);
  }

  bool any_error = false;
  for (const ProfileRow& row : profile.rows) {
    if (row.error) {
      any_error = true;
      err << "row a=" << format_complex(row.point.a[0]) << " r=" << format_double(row.point.r)
          << ": " << to_string(*row.error) << ": " << row.message << "\n";
    }
  }

  Output o;
  const std::string format = p.str("format");
  if (format == "csv") {
    o.body = csv_header(cylinder, vector);
    for (const ProfileRow& row : profile.rows) o.body += csv_row(row, cylinder, vector);
    o.tabular = true;
  } else if (format == "plot") {
    o.body = "x,y\n";
    for (const ProfileRow& row : profile.rows) {
      if (row.error) continue;
      o.body += format_double(row.point.r * row.point.r) + "," + format_double(std::log(row.L)) +
                "\n";
    }
    o.tabular = true;
  } else {
    json rows = json::array();
    for (const ProfileRow& row : profile.rows) {
      json j{{"a", complex_json(row.point.a[0])}, {"r", row.point.r}};
      if (cylinder) {
        j["a2"] = complex_json(row.point.a[1]);
        j["s"] = row.point.s;
        j["A"] = matrix_json(row.point.A);
      }
      if (vector) j["xi"] = vector_json(row.point.xi);
      if (row.error) {
        j["error"] = std::string(to_string(*row.error));
        j["message"] = row.message;
      } else {
        j["L"] = row.L;
        j["N"] = row.degree;
        j["converged"] = row.converged;
        j["cond_estimate"] = row.condition;
      }
      rows.push_back(j);
    }
    o.body = json_body("sweep", config,
                       json{{"rows", rows}, {"partial", profile.partial}, {"source", profile.source}});
  }
  emit(o, p, config, out);
  return any_error ? kNumericalFailure : kOk;
}

json fit_json(const AsymptoticFit& fit) {
  json samples = json::array();
  for (std::size_t k = 0; k < fit.radii.size(); ++k) {
    samples.push_back(json::array({fit.radii[k], fit.log_L[k]}));
  }
  return json{{"g_hat", fit.g_hat},
              {"beta", fit.beta},
              {"residual", fit.residual},
              {"accepted", fit.accepted},
              {"all_converged", fit.all_converged},
              {"window", json::array({fit.window.r_min, fit.window.r_max})},
              {"samples_r_logL", samples}};
}

int cmd_curvature(const Params& p, const json& config, std::ostream& out) {
  require_one_source(p);
  require_format(p, {"json", "plot"});
  const IndexOptions opts = index_options(p);
  const cplx a = p.complex("center");
  FitWindow window{p.num("r-min"), p.num("r-max"), static_cast<int>(p.integer("ladder"))};
  json result = json::object();
  std::vector<AsymptoticFit> fits;
  CurvatureReport report;
  if (p.has("metric")) {
    const MetricField m = parse_metric_spec(p.str("metric"));
    report = curvature_form_vector(m, a);
    result["M"] = matrix_json(report.M);
    result["H"] = matrix_json(report.H);
    result["hermitian_defect"] = report.hermitian_defect;
    if (report.conformal_self_check) result["conformal_self_check"] = *report.conformal_self_check;
    json per_xi = json::array();
    if (p.has("xi")) {
      for (const auto& xi : p.vector_list("xi")) {
        fits.push_back(extract_index_curvature(m, xi, a, window, opts));
        json f = fit_json(fits.back());
        f["xi"] = vector_json(xi);
        per_xi.push_back(f);
      }
      result["fits"] = per_xi;
    }
  } else {
    const WeightField w = parse_weight_spec(p.str("weight"), Binding::Z);
    report = curvature_form_scalar(w, a);
    result["phi_zzbar"] = report.phi_zzbar;
    fits.push_back(extract_index_curvature(w, a, window, opts));
    result["fit"] = fit_json(fits.back());
  }
  json eig = json::array();
  for (double e : report.eigenvalues) eig.push_back(e);
  result["eigenvalues"] = eig;
  if (p.has("g")) {
    const BoundCheck check = griffiths_bound_check(report, p.num("g"));
    result["bound_check"] = json{{"g", p.num("g")}, {"ok", check.ok}, {"margin", check.margin}};
  }
  Output o;
  if (p.str("format") == "plot") {
    o.body = "x,y\n";
    for (const AsymptoticFit& f : fits) {
      for (std::size_t k = 0; k < f.radii.size(); ++k) {
        o.body += format_double(f.radii[k] * f.radii[k]) + "," + format_double(f.log_L[k]) + "\n";
      }
    }
    o.tabular = true;
  } else {
    o.body = json_body("curvature", config, result);
  }
  emit(o, p, config, out);
  return kOk;
}

int cmd_prekopa(const Params& p, const json& config, std::ostream& out) {
  require_format(p, {"json"});
  if (!p.has("weight")) throw config_error("prekopa needs --weight in (tau, z)");
  PrekopaSetup setup;
  setup.weight = parse_weight_spec(p.str("weight"), Binding::TauZ);
  setup.fiber_center = p.complex("fiber-center");
  setup.fiber_radius = p.num("fiber-radius");
  setup.fiber_resolution = p.resolution("fiber-resolution");
  setup.tau_grid = p.complex_list("tau");

  const WeightExpr g_expr = parse_weight(p.str("g"));
  for (Var v : g_expr.variables()) {
    if (v != Var::Tau) throw config_error("--g may only use the variable tau");
  }
  const WeightField g_field = WeightField::expression(g_expr, Binding::TauZ);
  auto g = [&](cplx tau) { return g_field(tau, 0.0); };

  const PrekopaReport report = prekopa_report(setup, g);
  json rows = json::array();
  for (const PrekopaTauRow& row : report.rows) {
    rows.push_back(json{{"tau", complex_json(row.tau)},
                        {"Phi", row.Phi},
                        {"curvature_fd", row.curvature_fd},
                        {"curvature_variance", row.curvature_variance},
                        {"g", row.G.g},
                        {"G", row.G.G},
                        {"variance_term", row.G.variance_term},
                        {"min_hypothesis", row.G.min_hypothesis},
                        {"hypothesis_violations", row.G.violations.size()}});
  }
  json result{{"rows", rows}, {"max_route_gap", report.max_route_gap}};
  if (p.has("index-radii")) {
    const cplx a = p.complex("index-center");
    const double G = prekopa_G(setup, a, g(a)).G;
    IndexOptions opts = prekopa_index_options();
    opts.degree = static_cast<int>(p.integer("index-degree"));
    opts.resolution = p.resolution("index-resolution");
    if (p.has("domain-radius")) opts.domain_radius = p.num("domain-radius");
    const double eps = p.num("eps");
    json checks = json::array();
    for (const PrekopaIndexRow& row :
         prekopa_index_check(setup, G, a, eps, p.num_list("index-radii"), opts)) {
      checks.push_back(json{{"r", row.r},
                            {"L", row.L},
                            {"bound", row.bound},
                            {"converged", row.converged},
                            {"pass", row.pass}});
    }
    result["index_check"] =
        json{{"center", complex_json(a)}, {"G", G}, {"eps", eps}, {"rows", checks}};
  }
  Output o;
  o.body = json_body("prekopa", config, result);
  emit(o, p, config, out);
  return kOk;
}

int cmd_verify(const Params& p, const json& config, std::ostream& out) {
  require_format(p, {"json"});
  require_one_source(p);
  VerifyOptions opts;
  opts.index = index_options(p);
  opts.window = {p.num("r-min"), p.num("r-max"), static_cast<int>(p.integer("ladder"))};
  opts.seed = seed_of(p);
  opts.fit_tolerance = p.num("fit-tolerance");
  opts.harmonic_tolerance = p.num("harmonic-tolerance");
  opts.cylinder_tolerance = p.num("cylinder-tolerance");
  opts.mixed_tolerance = p.num("mixed-tolerance");
  opts.scaled_tolerance = p.num("scaled-tolerance");
  opts.perturbation = p.num("perturbation");
  opts.config = config;

  std::string suite = p.str("suite");
  if (suite == "harmonic" && p.has("metric")) suite = "flat";
  if (p.has("tolerance")) {
    const double t = p.num("tolerance");
    if (suite == "harmonic" || suite == "flat") {
      opts.harmonic_tolerance = t;
    } else if (suite == "cylinder") {
      opts.cylinder_tolerance = t;
    } else if (suite == "scaled") {
      opts.scaled_tolerance = t;
    } else {
      opts.fit_tolerance = t;
    }
  }
  const bool expect = !p.flag("expect-fail");
  const std::vector<cplx> samples = p.complex_list("samples");

  auto need_weight = [&](Binding b) {
    if (!p.has("weight")) throw config_error("suite '" + suite + "' needs --weight");
    return parse_weight_spec(p.str("weight"), b);
  };
  auto need_metric = [&] {
    if (!p.has("metric")) throw config_error("suite '" + suite + "' needs --metric");
    return parse_metric_spec(p.str("metric"));
  };

  VerificationReport report;
  if (suite == "index_to_curvature") {
    report = verify_index_to_curvature(need_weight(Binding::Z), samples, opts);
  } else if (suite == "equivalence") {
    report = verify_equivalence_scalar(need_weight(Binding::Z), samples, p.num_list("eps"), opts);
  } else if (suite == "harmonic" || suite == "flat") {
    std::vector<ProfilePoint> grid;
    std::vector<Eigen::VectorXcd> xis{Eigen::VectorXcd()};
    std::optional<MetricField> metric;
    if (suite == "flat") {
      metric = need_metric();
      xis = p.has("xi") ? p.vector_list("xi") : sample_fiber_vectors(metric->rank(), opts.seed, 0);
    }
    for (cplx a : samples) {
      for (double r : p.num_list("radii")) {
        for (const auto& xi : xis) {
          ProfilePoint pt;
          pt.a = {a, 0.0};
          pt.r = r;
          pt.xi = xi;
          grid.push_back(pt);
        }
      }
    }
    report = metric ? verify_harmonic_flat(*metric, grid, expect, opts)
                    : verify_harmonic_flat(need_weight(Binding::Z), grid, expect, opts);
  } else if (suite == "vector") {
    const MetricField m = need_metric();
    const std::vector<Eigen::VectorXcd> xis =
        p.has("xi") ? p.vector_list("xi") : sample_fiber_vectors(m.rank(), opts.seed, 0);
    report = verify_vector_sharper(m, samples, xis, p.num_list("eps"), opts);
  } else if (suite == "cylinder") {
    std::vector<CylinderSample> cyl;
    const cplx a2 = p.complex("center2");
    for (cplx a : samples) {
      for (const std::string& pair : Params::split(p.str("rs"), ',')) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw config_error("--rs expects r:s pairs");
        Params tmp({}, {{"r", pair.substr(0, colon)}, {"s", pair.substr(colon + 1)}}, {});
        cyl.push_back({{a, a2}, tmp.num("r"), tmp.num("s")});
      }
    }
    report = verify_pluriharmonic_cylinder(need_weight(Binding::Z1Z2), cyl,
                                           static_cast<int>(p.integer("unitaries")), expect, opts);
  } else if (suite == "scaled") {
    if (samples.size() != 1) throw config_error("suite 'scaled' takes a single sample center");
    report = verify_scaled_index(need_weight(Binding::Z), samples.front(), p.num("radius"),
                                 static_cast<int>(p.integer("m-max")), expect, opts);
  } else {
    throw config_error("unknown --suite '" + suite + "'");
  }

  Output o;
  json j = to_json(report);
  j["command"] = "verify";
  o.body = j.dump(2) + "\n";
  emit(o, p, config, out);
  return report.overall ? kOk : kVerificationFailed;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public helpers
// ---------------------------------------------------------------------------

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalEvaluation:
    case ErrorKind::MetricNotPositive:
    case ErrorKind::IllConditioned:
      return kNumericalFailure;
    default:
      return kConfigError;
  }
}

WeightField parse_weight_spec(std::string_view text, std::optional<Binding> binding) {
  auto starts = [&](std::string_view prefix) { return text.substr(0, prefix.size()) == prefix; };
  WeightField w;
  if (text == "zero") {
    w = WeightField::zero(binding.value_or(Binding::Z));
  } else if (starts("gauss:")) {
    const std::string body(text.substr(6));
    const auto at = body.find('@');
    const std::string lam = body.substr(0, at);
    double lambda = 0.0;
    try {
      std::size_t used = 0;
      lambda = std::stod(lam, &used);
      if (used != lam.size()) throw std::invalid_argument(lam);
    } catch (const std::exception&) {
      throw config_error("bad gaussian parameter '" + lam + "'");
    }
    const cplx center = at == std::string::npos ? cplx(0.0) : parse_complex(body.substr(at + 1));
    w = WeightField::gaussian(lambda, center);
  } else if (starts("harm:")) {
    std::vector<cplx> c;
    for (const std::string& item : Params::split(std::string(text.substr(5)), ',')) {
      c.push_back(parse_complex(item));
    }
    if (c.empty()) throw config_error("harm: needs at least one coefficient");
    w = WeightField::harmonic_re_poly(std::move(c));
  } else if (starts("expr:")) {
    w = WeightField::expression(text.substr(5), binding);
  } else {
    w = WeightField::expression(text, binding);
  }
  if (binding && w.binding() != *binding) {
    throw Error(ErrorKind::InvalidParameter, "weight '" + std::string(text) +
                                                 "' does not match the variables of this command");
  }
  return w;
}

MetricField parse_metric_spec(std::string_view text) {
  const std::string_view prefix = "metric:";
  if (text.substr(0, prefix.size()) != prefix) {
    throw config_error("metric spec must start with 'metric:'");
  }
  const std::string body(text.substr(prefix.size()));
  // Split "[[a,b],[.,c]]" into rows at bracket depth 1, entries at depth 2
  // (parentheses inside entries are tracked so they never split).
  std::vector<std::vector<std::string>> rows;
  int depth = 0;
  int parens = 0;
  std::string cur;
  for (char c : body) {
    if (c == '(') ++parens;
    if (c == ')') --parens;
    if (parens == 0 && c == '[') {
      ++depth;
      if (depth == 2) rows.emplace_back();
      if (depth > 2) throw config_error("metric spec nests too deeply");
      continue;
    }
    if (parens == 0 && c == ']') {
      if (depth == 2) {
        if (rows.empty()) throw config_error("malformed metric spec");
        rows.back().push_back(cur);
        cur.clear();
      }
      --depth;
      if (depth < 0) throw config_error("unbalanced brackets in metric spec");
      continue;
    }
    if (depth == 2) {
      if (parens == 0 && c == ',') {
        rows.back().push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    } else if (c != ',' && c != ' ') {
      throw config_error("unexpected character in metric spec");
    }
  }
  if (depth != 0 || rows.empty()) throw config_error("malformed metric spec");
  const int rank = static_cast<int>(rows.size());
  std::vector<std::string> upper;
  for (int i = 0; i < rank; ++i) {
    if (static_cast<int>(rows[i].size()) != rank) {
      throw config_error("metric spec must be square");
    }
    for (int j = i; j < rank; ++j) upper.push_back(rows[i][j]);
  }
  return MetricField::from_entries(rank, upper);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || std::find(kCommands.begin(), kCommands.end(), args[0]) == kCommands.end()) {
    if (!args.empty() && (args[0] == "--help" || args[0] == "-h")) {
      out << "usage: l2ext <index|extend|sweep|curvature|prekopa|verify> [options]\n";
      return kOk;
    }
    err << "error: expected a subcommand: index | extend | sweep | curvature | prekopa | verify\n";
    return kConfigError;
  }
  const std::string command = args[0];
  const std::vector<OptSpec> specs = command_options(command);

  try {
    std::vector<std::string> argv{command};
    if (const auto path = find_config_path(args)) {
      const auto tokens = config_tokens(*path, command, specs);
      argv.insert(argv.end(), tokens.begin(), tokens.end());
    }
    argv.insert(argv.end(), args.begin() + 1, args.end());

    CLI::App app{"L2-extension indices, curvature and verification suites", "l2ext"};
    CLI::App* sub = app.add_subcommand(command, "");
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    for (const OptSpec& s : specs) {
      if (s.type == Type::Flag) {
        flags[s.name] = false;
        sub->add_flag("--" + s.name, flags[s.name], s.help);
      } else {
        values[s.name] = s.fallback;
        sub->add_option("--" + s.name, values[s.name], s.help)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kConfigError;
    }

    const Params params(specs, values, flags);
    const json config = params.effective(command);
    if (command == "index" || command == "extend") return cmd_index(command, params, config, out);
    if (command == "sweep") return cmd_sweep(params, config, out, err);
    if (command == "curvature") return cmd_curvature(params, config, out);
    if (command == "prekopa") return cmd_prekopa(params, config, out);
    return cmd_verify(params, config, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

}  // namespace l2ext::cli
