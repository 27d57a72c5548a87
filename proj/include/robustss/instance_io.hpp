#pragma once

// JSON instance files: market (grid, options, calibration), ambiguity set
// and claim lists. Schema problems raise SchemaError, domain problems
// InvariantError.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustss/errors.hpp"
#include "robustss/market.hpp"
#include "robustss/measures.hpp"

namespace robustss {

using json = nlohmann::json;

namespace io_detail {

inline const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string(where) + ": missing field '" + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw SchemaError(what + ": expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw SchemaError(what + ": expected an integer");
  return j.get<int>();
}

inline std::vector<double> number_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw SchemaError(what + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

}  // namespace io_detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// {T, s0, levels, cap?, options?, time_zero_trading?}
inline Market parse_market(const json& j) {
  using namespace io_detail;
  MarketGrid g;
  g.periods = integer(require(j, "T", "market"), "market.T");
  g.spot = number(require(j, "s0", "market"), "market.s0");
  const json& levels = require(j, "levels", "market");
  if (!levels.is_array()) throw SchemaError("market.levels: expected an array of arrays");
  for (const auto& row : levels) g.levels.push_back(number_array(row, "market.levels"));
  if (j.contains("cap") && !j["cap"].is_null()) g.cap = number(j["cap"], "market.cap");
  bool time_zero = true;
  if (j.contains("time_zero_trading")) {
    if (!j["time_zero_trading"].is_boolean()) throw SchemaError("market.time_zero_trading: expected a boolean");
    time_zero = j["time_zero_trading"].get<bool>();
  }
  std::vector<OptionContract> options;
  if (j.contains("options")) {
    if (!j["options"].is_array()) throw SchemaError("market.options: expected an array");
    for (const auto& o : j["options"]) {
      OptionContract c;
      const json& kind = require(o, "kind", "option");
      if (!kind.is_string()) throw SchemaError("option.kind: expected a string");
      const std::string k = kind.get<std::string>();
      c.quoted_price = number(require(o, "price", "option"), "option.price");
      if (k == "call" || k == "put") {
        c.kind = k == "call" ? OptionKind::call : OptionKind::put;
        c.maturity = integer(require(o, "maturity", "option"), "option.maturity");
        c.strike = number(require(o, "strike", "option"), "option.strike");
      } else if (k == "table") {
        c.kind = OptionKind::table;
        c.table = number_array(require(o, "values", "option"), "option.values");
      } else {
        throw SchemaError("option.kind: unknown kind '" + k + "'");
      }
      options.push_back(c);
    }
  }
  g.validate();
  return Market(g, options, time_zero);
}

/// Optional `calibration` ("options" | "marginals") with per-period
/// {level: mass} maps under `marginals`.
inline CalibrationSpec parse_calibration(const json& j) {
  using namespace io_detail;
  CalibrationSpec spec;
  if (!j.contains("calibration")) return spec;
  const json& mode = j["calibration"];
  if (!mode.is_string()) throw SchemaError("market.calibration: expected \"options\" or \"marginals\"");
  if (mode == "options") return spec;
  if (mode != "marginals") throw SchemaError("market.calibration: unknown mode");
  spec.mode = CalibrationSpec::Mode::marginals;
  const json& m = require(j, "marginals", "market");
  if (!m.is_array()) throw SchemaError("market.marginals: expected one object per period");
  for (const auto& period : m) {
    if (!period.is_object()) throw SchemaError("market.marginals: expected {level: mass} objects");
    std::map<double, double> mu;
    for (const auto& [key, value] : period.items()) {
      double level = 0.0;
      try {
        std::size_t used = 0;
        level = std::stod(key, &used);
        if (used != key.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw SchemaError("market.marginals: level key '" + key + "' is not a number");
      }
      mu[level] += number(value, "market.marginals mass");
    }
    spec.marginals.push_back(std::move(mu));
  }
  return spec;
}

struct AmbiguitySpec {
  AmbiguityModel::Kind kind = AmbiguityModel::Kind::hull;
  std::vector<std::vector<double>> measures;
  double alpha = 0.0, beta = 0.0;
};

/// {type: "hull", measures: [...]} or {type: "density_band", alpha, beta}
inline AmbiguitySpec parse_ambiguity(const json& j) {
  using namespace io_detail;
  AmbiguitySpec spec;
  const json& type = require(j, "type", "ambiguity");
  if (type == "hull") {
    const json& ms = require(j, "measures", "ambiguity");
    if (!ms.is_array()) throw SchemaError("ambiguity.measures: expected an array of weight arrays");
    for (const auto& m : ms) spec.measures.push_back(number_array(m, "ambiguity.measures"));
  } else if (type == "density_band") {
    spec.kind = AmbiguityModel::Kind::density_band;
    spec.alpha = number(require(j, "alpha", "ambiguity"), "ambiguity.alpha");
    spec.beta = number(require(j, "beta", "ambiguity"), "ambiguity.beta");
  } else {
    throw SchemaError("ambiguity.type: expected \"hull\" or \"density_band\"");
  }
  return spec;
}

inline AmbiguityModel build_ambiguity(const AmbiguitySpec& spec, const MartingaleSystem& sys, const MarketGrid& grid) {
  if (spec.kind == AmbiguityModel::Kind::density_band)
    return AmbiguityModel::density_band(spec.alpha, spec.beta, sys, grid);
  std::vector<Measure> vertices;
  for (const auto& m : spec.measures) {
    if (static_cast<Index>(m.size()) != sys.path_count())
      throw InvariantError("ambiguity.hull", "measure length does not match the path count");
    vertices.emplace_back(m);
  }
  return AmbiguityModel::hull(std::move(vertices));
}

inline json market_to_json(const Market& m, const CalibrationSpec& cal = {}) {
  json j;
  j["T"] = m.grid.periods;
  j["s0"] = m.grid.spot;
  j["levels"] = m.grid.levels;
  if (m.grid.cap) j["cap"] = *m.grid.cap;
  j["time_zero_trading"] = m.time_zero_trading;
  json opts = json::array();
  for (const auto& o : m.options) {
    json oj;
    if (o.kind == OptionKind::table) {
      oj["kind"] = "table";
      oj["values"] = o.table;
    } else {
      oj["kind"] = o.kind == OptionKind::call ? "call" : "put";
      oj["maturity"] = o.maturity;
      oj["strike"] = o.strike;
    }
    oj["price"] = o.quoted_price;
    opts.push_back(oj);
  }
  j["options"] = opts;
  if (cal.mode == CalibrationSpec::Mode::marginals) {
    j["calibration"] = "marginals";
    json ms = json::array();
    for (const auto& mu : cal.marginals) {
      json period = json::object();
      for (const auto& [level, mass] : mu) {
        std::ostringstream key;
        key.precision(17);
        key << level;
        period[key.str()] = mass;
      }
      ms.push_back(period);
    }
    j["marginals"] = ms;
  }
  return j;
}

inline json ambiguity_to_json(const AmbiguitySpec& spec) {
  json j;
  if (spec.kind == AmbiguityModel::Kind::hull) {
    j["type"] = "hull";
    j["measures"] = spec.measures;
  } else {
    j["type"] = "density_band";
    j["alpha"] = spec.alpha;
    j["beta"] = spec.beta;
  }
  return j;
}

/// {"claims": [[...], ...]}, {"claim": [...]} or a bare array (of arrays).
inline std::vector<std::vector<double>> parse_claims(const json& j) {
  using namespace io_detail;
  std::vector<std::vector<double>> out;
  const json* list = &j;
  if (j.is_object()) {
    if (j.contains("claims")) {
      list = &j["claims"];
    } else if (j.contains("claim")) {
      out.push_back(number_array(j["claim"], "claim"));
      return out;
    } else {
      throw SchemaError("claim file: expected 'claims' or 'claim'");
    }
  }
  if (!list->is_array() || list->empty()) throw SchemaError("claim file: expected a nonempty array");
  if ((*list)[0].is_number()) {
    out.push_back(number_array(*list, "claim"));
  } else {
    for (const auto& c : *list) out.push_back(number_array(c, "claims"));
  }
  return out;
}

struct Instance {
  Market market;
  CalibrationSpec calibration;
  MartingaleSystem system;
  AmbiguitySpec ambiguity_spec;
  AmbiguityModel ambiguity;
};

inline Instance make_instance(const json& market_json, const json& ambiguity_json) {
  Instance inst;
  try {
    inst.market = parse_market(market_json);
    inst.calibration = parse_calibration(market_json);
    inst.ambiguity_spec = parse_ambiguity(ambiguity_json);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed instance: ") + e.what());
  }
  inst.system = build_martingale_system(inst.market, inst.calibration);
  inst.ambiguity = build_ambiguity(inst.ambiguity_spec, inst.system, inst.market.grid);
  return inst;
}

inline Instance load_instance(const std::string& market_path, const std::string& ambiguity_path) {
  return make_instance(read_json_file(market_path), read_json_file(ambiguity_path));
}

}  // namespace robustss
