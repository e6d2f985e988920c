#include "parest/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "parest/errors.hpp"

namespace parest {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

void validate(const SchemaEntry& e, const std::string& value, int line) {
  auto fail = [&](const std::string& msg) { throw ConfigError(msg, line, e.key); };
  auto check_min = [&](double v) {
    if (!e.minimum || v >= *e.minimum) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", *e.minimum);
    fail("value " + value + " is below the minimum " + buf);
  };
  switch (e.type) {
    case ValueType::integer: {
      const auto v = parse_int(value);
      if (!v) fail("expected an integer, got '" + value + "'");
      check_min(static_cast<double>(*v));
      break;
    }
    case ValueType::real: {
      const auto v = parse_real(value);
      if (!v) fail("expected a number, got '" + value + "'");
      check_min(*v);
      break;
    }
    case ValueType::boolean:
      if (value != "true" && value != "false") fail("expected true or false, got '" + value + "'");
      break;
    case ValueType::choice:
      if (std::find(e.choices.begin(), e.choices.end(), value) == e.choices.end()) {
        std::string list;
        for (const auto& c : e.choices) list += (list.empty() ? "" : ", ") + c;
        fail("unknown value '" + value + "' (expected one of: " + list + ")");
      }
      break;
    case ValueType::real_list: {
      const auto items = split_list(value);
      if (items.empty()) fail("expected a comma separated list of numbers");
      for (const auto& item : items) {
        const auto v = parse_real(item);
        if (!v) fail("list entry '" + item + "' is not a number");
        check_min(*v);
      }
      break;
    }
    case ValueType::text_list: {
      const auto items = split_list(value);
      if (items.empty()) fail("expected a comma separated list");
      for (const auto& item : items)
        if (!e.choices.empty() && std::find(e.choices.begin(), e.choices.end(), item) == e.choices.end())
          fail("unknown list entry '" + item + "'");
      break;
    }
    case ValueType::text:
      if (value.empty()) fail("empty value");
      break;
  }
}

SchemaEntry entry(std::string key, ValueType type, std::string def, std::string desc, std::optional<double> min = {},
                  std::vector<std::string> choices = {}) {
  SchemaEntry e;
  e.key = std::move(key);
  e.type = type;
  e.default_value = std::move(def);
  e.description = std::move(desc);
  e.minimum = min;
  e.choices = std::move(choices);
  return e;
}

}  // namespace

const char* value_type_name(ValueType t) {
  switch (t) {
    case ValueType::integer: return "integer";
    case ValueType::real: return "real";
    case ValueType::text: return "text";
    case ValueType::choice: return "choice";
    case ValueType::real_list: return "real list";
    case ValueType::text_list: return "text list";
    case ValueType::boolean: return "boolean";
  }
  return "?";
}

const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> schema = [] {
    using V = ValueType;
    std::vector<SchemaEntry> s;
    auto exp = entry("experiment", V::choice, "", "experiment to run", {},
                     {"identity_suite", "convergence_study", "estimator_report", "inefficiency_study", "hypercircle_check"});
    exp.required = true;
    s.push_back(exp);
    s.push_back(entry("threads", V::integer, "1", "OpenMP threads (PAREST_THREADS overrides)", 1));
    s.push_back(entry("output.dir", V::text, "parest-out", "directory for the manifest and CSV files"));
    s.push_back(entry("output.prefix", V::text, "", "file name prefix (default: experiment name)"));
    s.push_back(entry("problem.kind", V::choice, "fourier_1d", "manufactured solution", {},
                      {"fourier_1d", "fourier_2d", "polynomial_in_time"}));
    s.push_back(entry("problem.kx", V::integer, "1", "mode index in x", 1));
    s.push_back(entry("problem.ky", V::integer, "1", "mode index in y", 1));
    s.push_back(entry("problem.decay", V::real, "", "temporal decay rate (default: the mode eigenvalue, zero forcing)"));
    s.push_back(entry("problem.data", V::choice, "exact", "exact: manufactured f and u0; discrete: f = f_h,tau and u0 = u_h,tau,0",
                      {}, {"exact", "discrete"}));
    s.push_back(entry("mesh.cells", V::integer, "8", "cells per direction on the coarsest level", 1));
    s.push_back(entry("mesh.degree", V::integer, "1", "polynomial degree p", 1));
    s.push_back(entry("time.steps", V::integer, "8", "time steps on the coarsest level", 1));
    s.push_back(entry("time.final", V::real, "1", "final time T", 1e-12));
    s.push_back(entry("time.grading", V::real, "1", "t_n = T (n/N)^grading", 1e-12));
    s.push_back(entry("flux.degree", V::integer, "", "flux degree (default: p + 1)", 1));
    s.push_back(entry("lift.refine", V::integer, "1", "uniform refinement factor of the Riesz lift space", 1));
    s.push_back(entry("reference.space_refine", V::integer, "4", "reference refinement in space", 1));
    s.push_back(entry("reference.time_refine", V::integer, "4", "reference refinement in time", 1));
    s.push_back(entry("identity.samples", V::integer, "20", "random discrete functions tested", 1));
    s.push_back(entry("identity.seed", V::integer, "20240607", "seed of the random samples", 0));
    s.push_back(entry("convergence.levels", V::integer, "4", "refinement levels (h and tau halved together)", 2));
    s.push_back(entry("convergence.check_orders", V::boolean, "true", "assert the observed orders on the last pair of levels"));
    s.push_back(entry("convergence.order_min", V::real, "0.9", "lower end of the accepted order range"));
    s.push_back(entry("convergence.order_max", V::real, "1.1", "upper end of the accepted order range"));
    s.push_back(entry("estimator.theorems", V::text_list, "all", "bounds to evaluate", {},
                      {"all", "Y_upper_4_1", "Y_lower_4_1", "osc_dominated_4_2", "X_upper_4_3", "energy_4_5",
                       "hypercircle_4_6", "Y_upper_5_1", "EY_5_2", "X_lower_5_3", "energy_5_5"}));
    s.push_back(entry("modal.lambdas", V::real_list, "1e-3,1e-2,1e-1,1,1e1,1e2,1e3", "single-mode eigenvalues", 1e-300));
    s.push_back(entry("hypercircle.space_refine", V::integer, "8", "trial mesh refinement emulating the time-only discretization", 1));
    s.push_back(entry("hypercircle.gap_sweep", V::boolean, "true", "also report references with finer time steps"));
    s.push_back(entry("tolerance.identity", V::real, "1e-10", "inf-sup identity residuals", 0));
    s.push_back(entry("tolerance.allowance", V::real, "0.02", "reference-gap allowance of guaranteed bounds", 0));
    s.push_back(entry("tolerance.hypercircle", V::real, "0.02", "relative gap of the hypercircle identity", 0));
    s.push_back(entry("tolerance.jump", V::real, "0.02", "relative gap between the residual surrogate and eta_J", 0));
    s.push_back(entry("tolerance.inefficiency", V::real, "0.1", "tail ratios of the single-mode sweep", 0));
    return s;
  }();
  return schema;
}

const SchemaEntry* find_schema_entry(std::string_view key) {
  for (const auto& e : config_schema())
    if (e.key == key) return &e;
  return nullptr;
}

Config Config::parse(std::string_view text) {
  Config c;
  std::stringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", number);
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key", number);
    const SchemaEntry* e = find_schema_entry(key);
    if (!e) throw ConfigError("unknown key", number, key);
    if (c.set_.count(key)) throw ConfigError("duplicate key (first set on line " + std::to_string(c.lines_[key]) + ")", number, key);
    validate(*e, value, number);
    c.set_[key] = value;
    c.lines_[key] = number;
  }
  for (const auto& e : config_schema())
    if (e.required && !c.set_.count(e.key)) throw ConfigError("required key is missing", 0, e.key);
  if (c.real("convergence.order_min") > c.real("convergence.order_max"))
    throw ConfigError("order range is empty", c.line_of("convergence.order_min"), "convergence.order_min");
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

int Config::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

void Config::set(const std::string& key, const std::string& value) {
  const SchemaEntry* e = find_schema_entry(key);
  if (!e) throw ConfigError("unknown key", 0, key);
  validate(*e, value, 0);
  set_[key] = value;
}

std::string Config::raw(const std::string& key) const {
  const auto it = set_.find(key);
  if (it != set_.end()) return it->second;
  const SchemaEntry* e = find_schema_entry(key);
  if (!e) throw ConfigError("unknown key", 0, key);
  if (e->default_value.empty()) throw ConfigError("no value and no default", 0, key);
  return e->default_value;
}

std::string Config::text(const std::string& key) const { return raw(key); }
int Config::integer(const std::string& key) const { return static_cast<int>(*parse_int(raw(key))); }
double Config::real(const std::string& key) const { return *parse_real(raw(key)); }
bool Config::boolean(const std::string& key) const { return raw(key) == "true"; }

std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key))) out.push_back(*parse_real(item));
  return out;
}

std::vector<std::string> Config::text_list(const std::string& key) const { return split_list(raw(key)); }

std::map<std::string, std::string> Config::effective() const {
  std::map<std::string, std::string> out;
  for (const auto& e : config_schema()) {
    const auto it = set_.find(e.key);
    if (it != set_.end()) out[e.key] = it->second;
    else if (!e.default_value.empty()) out[e.key] = e.default_value;
  }
  return out;
}

}  // namespace parest
