#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "stagewise/instances/isotonic.hpp"
#include "stagewise/instances/network.hpp"
#include "stagewise/optim.hpp"

namespace stagewise {

/// Thrown on malformed input files; the CLI maps it to exit code 65.
struct DataFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataFormatError(path + ": " + e.what());
  }
  return doc;
}

inline void save_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw DataFormatError("cannot open file for writing: " + path);
  out << doc.dump(2) << "\n";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "none") return Activation::kNone;
  throw DataFormatError("unknown activation: " + name);
}

inline std::string activation_name(Activation act) {
  switch (act) {
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kNone: return "none";
  }
  return "none";
}

inline json to_json(const NetworkSpec& network) {
  json layers = json::array();
  for (const DenseLayer& layer : network.layers) {
    layers.push_back({{"weights", layer.weights},
                      {"bias", layer.bias},
                      {"activation", activation_name(layer.activation)}});
  }
  return {{"input_dim", network.input_dim}, {"layers", layers}};
}

inline NetworkSpec network_from_json(const json& doc) {
  NetworkSpec network;
  try {
    network.input_dim = doc.at("input_dim").get<int>();
    for (const json& item : doc.at("layers")) {
      DenseLayer layer;
      layer.weights = item.at("weights").get<std::vector<Vec>>();
      layer.bias = item.at("bias").get<Vec>();
      layer.activation =
          activation_from_name(item.at("activation").get<std::string>());
      network.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("network file: ") + e.what());
  }
  try {
    network.validate();
  } catch (const std::exception& e) {
    throw DataFormatError(std::string("network file: ") + e.what());
  }
  return network;
}

inline NetworkSpec load_network(const std::string& path) {
  return network_from_json(load_json_file(path));
}
inline void save_network(const std::string& path, const NetworkSpec& network) {
  save_json_file(path, to_json(network));
}

inline json to_json(const VerificationQuery& query) {
  json doc = {{"center", query.center},
              {"epsilon", query.epsilon},
              {"true_label", query.true_label}};
  doc["target_label"] =
      query.target_label < 0 ? json(nullptr) : json(query.target_label);
  doc["clamp"] = query.has_clamp
                     ? json::array({query.clamp.lo, query.clamp.hi})
                     : json(nullptr);
  return doc;
}

inline VerificationQuery query_from_json(const json& doc) {
  VerificationQuery query;
  try {
    query.center = doc.at("center").get<Vec>();
    query.epsilon = doc.at("epsilon").get<double>();
    query.true_label = doc.at("true_label").get<int>();
    if (doc.contains("target_label") && !doc["target_label"].is_null())
      query.target_label = doc["target_label"].get<int>();
    if (doc.contains("clamp") && !doc["clamp"].is_null()) {
      query.has_clamp = true;
      query.clamp = {doc["clamp"].at(0).get<double>(),
                     doc["clamp"].at(1).get<double>()};
    }
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("query file: ") + e.what());
  }
  if (query.epsilon < 0.0)
    throw DataFormatError("query file: epsilon must be nonnegative");
  return query;
}

inline VerificationQuery load_query(const std::string& path) {
  return query_from_json(load_json_file(path));
}
inline void save_query(const std::string& path,
                       const VerificationQuery& query) {
  save_json_file(path, to_json(query));
}

inline json to_json(const IsotonicSpec& spec) {
  json order = json::array();
  for (const auto& [j, i] : spec.order) order.push_back(json::array({j, i}));
  return {{"y", spec.y},
          {"order", order},
          {"lo", spec.lo},
          {"hi", spec.hi},
          {"temperature", spec.temperature}};
}

inline IsotonicSpec isotonic_from_json(const json& doc) {
  IsotonicSpec spec;
  try {
    spec.y = doc.at("y").get<Vec>();
    for (const json& pair : doc.at("order"))
      spec.order.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    spec.lo = doc.at("lo").get<double>();
    spec.hi = doc.at("hi").get<double>();
    spec.temperature = doc.at("temperature").get<double>();
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("isotonic file: ") + e.what());
  }
  return spec;
}

inline IsotonicSpec load_isotonic(const std::string& path) {
  return isotonic_from_json(load_json_file(path));
}
inline void save_isotonic(const std::string& path, const IsotonicSpec& spec) {
  save_json_file(path, to_json(spec));
}

/// Append-only iteration trace, flushed per row so interrupted runs keep
/// their partial output.
class TraceCsvWriter {
 public:
  explicit TraceCsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw DataFormatError("cannot open trace file: " + path);
    out_ << "iter,primal,dual,gap,step,wall_ms,fixdeg\n";
    out_.flush();
  }

  void operator()(const TraceRow& row) {
    out_ << row.iter << ',' << format(row.primal) << ',' << format(row.dual)
         << ',' << format(row.gap) << ',' << format(row.step_size) << ','
         << format(row.wall_ms) << ',' << (row.fixdeg_invoked ? 1 : 0) << '\n';
    out_.flush();
  }

 private:
  static std::string format(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
  }

  std::ofstream out_;
};

inline json to_json(const DualityCertificate& cert) {
  return {{"primal", cert.primal},
          {"dual", cert.dual},
          {"gap", cert.gap},
          {"relative_gap", cert.relative_gap}};
}

}  // namespace io
}  // namespace stagewise
