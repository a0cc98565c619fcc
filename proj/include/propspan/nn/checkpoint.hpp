#pragma once

// Checkpoint format (JSON):
//   {"format": "propspan-params", "version": 1,
//    "params": {"<name>": {"shape": [..], "values": [..row-major..]}, ...}}
// Names are emitted in sorted order and doubles round-trip exactly, so equal
// parameters always serialize to identical bytes.

#include <string>

#include "json.hpp"
#include "propspan/error.hpp"
#include "propspan/nn/params.hpp"

namespace propspan::nn {

inline constexpr int kParamFormatVersion = 1;

inline nlohmann::json params_to_json(const ParamStore& store) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, p] : store) {
    params[name] = {{"shape", p.value.shape()}, {"values", p.value.storage()}};
  }
  return {{"format", "propspan-params"}, {"version", kParamFormatVersion}, {"params", params}};
}

inline ParamStore params_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "propspan-params") throw DataError("not a propspan parameter blob");
  if (j.value("version", 0) != kParamFormatVersion) {
    throw DataError("unsupported parameter format version " + std::to_string(j.value("version", 0)));
  }
  ParamStore store;
  for (const auto& [name, entry] : j.at("params").items()) {
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto values = entry.at("values").get<std::vector<double>>();
    try {
      store.add(name, Tensor(std::move(shape), std::move(values)));
    } catch (const InternalError& e) {
      throw DataError("parameter '" + name + "': " + e.what());
    }
  }
  return store;
}

}  // namespace propspan::nn
