#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "dflux/flux.hpp"

namespace dflux {

/// Names of the built-in flux models.
const std::vector<std::string>& preset_names();

/// Built-in model by name; throws std::invalid_argument for unknown names.
PiecewiseFlux make_preset(const std::string& name);

/// Polynomial-in-lambda flux from its JSON description
/// {"d","a","b","interface","left":[...],"right":[...]}.
/// Throws std::invalid_argument naming the offending JSON pointer.
PiecewiseFlux flux_from_json(const nlohmann::json& spec, const std::string& pointer = "");

/// {"axis": 1-based, "zeta": {"kind": "zero|affine|poly", "coeffs": [...]}}.
Interface interface_from_json(const nlohmann::json& spec, int d, const std::string& pointer = "");
nlohmann::json interface_to_json(const Interface& iface);

/// The JSON description of a built-in preset.
nlohmann::json preset_json(const std::string& name);

}  // namespace dflux
