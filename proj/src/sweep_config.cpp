#include <cmath>
#include <fstream>
#include <sstream>

#include "oqm/experiments.hpp"

namespace oqm::experiments {
namespace {

using nlohmann::json;

const char* phase_name(scar::PhaseConvention p) {
  return p == scar::PhaseConvention::kReturnAmplitude ? "return-amplitude" : "action-only";
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

template <typename Fn>
void for_each_member(const json& obj, const std::string& key, Fn&& fn) {
  if (!obj.is_object()) throw ConfigError(key, "expected an object");
  for (const auto& [name, value] : obj.items()) fn(name, value, key.empty() ? name : key + "." + name);
}

IntRange parse_int_range(const json& v, const std::string& key) {
  IntRange r;
  for_each_member(v, key, [&](const std::string& name, const json& value, const std::string& path) {
    if (name == "first") {
      r.first = get_int(value, path);
    } else if (name == "last") {
      r.last = get_int(value, path);
    } else if (name == "step") {
      r.step = get_int(value, path);
    } else {
      throw ConfigError(path, "unknown key");
    }
  });
  return r;
}

std::vector<double> parse_real_grid(const json& v, const std::string& key) {
  if (v.is_array()) {
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }
  RealGrid g;
  bool has_first = false, has_last = false, has_step = false;
  for_each_member(v, key, [&](const std::string& name, const json& value, const std::string& path) {
    if (name == "first") {
      g.first = get_number(value, path);
      has_first = true;
    } else if (name == "last") {
      g.last = get_number(value, path);
      has_last = true;
    } else if (name == "step") {
      g.step = get_number(value, path);
      has_step = true;
    } else {
      throw ConfigError(path, "unknown key");
    }
  });
  if (!has_first || !has_last || !has_step) throw ConfigError(key, "needs first, last and step");
  if (!(g.step > 0.0) || g.last < g.first) throw ConfigError(key, "needs step > 0 and last >= first");
  return g.values();
}

OpeningSpec parse_opening(const json& v, const std::string& key) {
  if (v.is_string()) {
    try {
      return OpeningSpec::parse(v.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  }
  OpeningSpec spec;
  for_each_member(v, key, [&](const std::string& name, const json& value, const std::string& path) {
    if (name == "variant") {
      try {
        spec.variant = parse_variant(get_string(value, path));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
      }
    } else if (name == "q0") {
      spec.q0 = get_number(value, path);
    } else if (name == "delta_q") {
      spec.delta_q = get_number(value, path);
    } else {
      throw ConfigError(path, "unknown key");
    }
  });
  return spec;
}

}  // namespace

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::kOverlapVsN:
      return "overlap-vs-N";
    case Experiment::kOverlapVsWidth:
      return "overlap-vs-width";
    case Experiment::kWeylVsN:
      return "weyl-vs-N";
  }
  return "?";
}

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}

std::vector<int> IntRange::values() const {
  std::vector<int> out;
  if (step < 1) return out;
  for (int n = first; n <= last; n += step) out.push_back(n);
  return out;
}

std::vector<double> RealGrid::values() const {
  std::vector<double> out;
  if (!(step > 0.0) || last < first) return out;
  const long count = std::lround((last - first) / step);
  for (long k = 0; k <= count; ++k) {
    // Rounded to 12 decimals so that 0.1 + 2 * 0.05 prints as 0.2.
    out.push_back(std::round((first + k * step) * 1e12) / 1e12);
  }
  return out;
}

void SweepConfig::validate() const {
  if (n_range.step < 1) throw ConfigError("n_range.step", "must be >= 1");
  if (n_range.first < 1) throw ConfigError("n_range.first", "must be >= 1");
  if (n_range.last < n_range.first) throw ConfigError("n_range.last", "must be >= first");
  if (openings.empty()) throw ConfigError("openings", "at least one opening is required");
  for (std::size_t i = 0; i < openings.size(); ++i) {
    const std::string key = "openings[" + std::to_string(i) + "]";
    try {
      openings[i].validate();
      if (experiment == Experiment::kOverlapVsWidth) {
        for (double dq : delta_q_grid) {
          OpeningSpec s = openings[i];
          s.delta_q = dq;
          s.validate();
        }
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }
  if (!(orbit.q >= 0.0 && orbit.q < 1.0 && orbit.p >= 0.0 && orbit.p < 1.0)) {
    throw ConfigError("orbit", "point must lie in [0,1)^2");
  }
  if (!(gamma_f > 0.0)) throw ConfigError("gamma_f", "must be > 0");
  if (average_window < 1) throw ConfigError("average_window", "must be >= 1");
  if (truncation && *truncation < 0) throw ConfigError("truncation", "must be >= 0");
  if (experiment == Experiment::kOverlapVsWidth && delta_q_grid.empty()) {
    throw ConfigError("delta_q_grid", "width sweeps need at least one delta_q");
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

SweepConfig default_config(Experiment e) {
  SweepConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::kOverlapVsN:
      c.n_range = {100, 360, 1};
      c.openings = {{OpeningVariant::kSingle, 0.225, 0.25}};
      c.output_dir = "out/overlap";
      break;
    case Experiment::kOverlapVsWidth:
      c.n_range = {350, 360, 1};
      c.openings = {{OpeningVariant::kSingle, 0.225, 0.25}, {OpeningVariant::kSymmetric, 0.1625, 0.25}};
      c.delta_q_grid = RealGrid{0.025, 0.40, 0.025}.values();
      c.output_dir = "out/width";
      break;
    case Experiment::kWeylVsN:
      c.n_range = {100, 400, 10};
      c.openings = {{OpeningVariant::kSingle, 0.125, 0.05},
                    {OpeningVariant::kSingle, 0.225, 0.25},
                    {OpeningVariant::kSymmetric, 0.1625, 0.25}};
      c.output_dir = "out/weyl";
      break;
  }
  return c;
}

SweepConfig parse_config(const std::string& text, Experiment e) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError("<document>", err.what());
  }
  SweepConfig c = default_config(e);
  for_each_member(doc, "", [&](const std::string& name, const json& value, const std::string& path) {
    if (name == "experiment") {
      if (get_string(value, path) != to_string(e)) {
        throw ConfigError(path, std::string("config is for a different experiment (expected \"") + to_string(e) + "\")");
      }
    } else if (name == "n_range") {
      c.n_range = parse_int_range(value, path);
    } else if (name == "openings") {
      if (!value.is_array()) throw ConfigError(path, "expected a list");
      c.openings.clear();
      for (std::size_t i = 0; i < value.size(); ++i) {
        c.openings.push_back(parse_opening(value[i], path + "[" + std::to_string(i) + "]"));
      }
    } else if (name == "orbit") {
      if (!value.is_array() || value.size() != 2) throw ConfigError(path, "expected [q, p]");
      c.orbit = {get_number(value[0], path + "[0]"), get_number(value[1], path + "[1]")};
    } else if (name == "gamma_f") {
      c.gamma_f = get_number(value, path);
    } else if (name == "average_window") {
      c.average_window = get_int(value, path);
    } else if (name == "truncation") {
      if (value.is_null()) {
        c.truncation.reset();
      } else {
        c.truncation = get_int(value, path);
      }
    } else if (name == "phase") {
      const std::string p = get_string(value, path);
      if (p == "return-amplitude") {
        c.phase = scar::PhaseConvention::kReturnAmplitude;
      } else if (p == "action-only") {
        c.phase = scar::PhaseConvention::kActionOnly;
      } else {
        throw ConfigError(path, "expected \"return-amplitude\" or \"action-only\"");
      }
    } else if (name == "delta_q_grid") {
      c.delta_q_grid = parse_real_grid(value, path);
    } else if (name == "output_dir") {
      c.output_dir = get_string(value, path);
    } else if (name == "cache_decompositions") {
      if (!value.is_boolean()) throw ConfigError(path, "expected true or false");
      c.cache_decompositions = value.get<bool>();
    } else {
      throw ConfigError(path, "unknown key");
    }
  });
  c.validate();
  return c;
}

SweepConfig load_config(const std::filesystem::path& path, Experiment e) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), e);
}

json to_json(const SweepConfig& c) {
  json openings = json::array();
  for (const auto& o : c.openings) {
    openings.push_back({{"variant", to_string(o.variant)}, {"q0", o.q0}, {"delta_q", o.delta_q}});
  }
  json out = {{"experiment", to_string(c.experiment)},
              {"n_range", {{"first", c.n_range.first}, {"last", c.n_range.last}, {"step", c.n_range.step}}},
              {"openings", openings},
              {"orbit", {c.orbit.q, c.orbit.p}},
              {"gamma_f", c.gamma_f},
              {"average_window", c.average_window},
              {"truncation", c.truncation ? json(*c.truncation) : json(nullptr)},
              {"phase", phase_name(c.phase)},
              {"output_dir", c.output_dir.string()},
              {"cache_decompositions", c.cache_decompositions}};
  if (c.experiment == Experiment::kOverlapVsWidth) out["delta_q_grid"] = c.delta_q_grid;
  return out;
}

}  // namespace oqm::experiments
