#include "dflux/presets.hpp"

#include <set>
#include <stdexcept>

namespace dflux {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw std::invalid_argument((pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void check_keys(const json& j, const std::string& pointer, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(pointer, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(pointer + "/" + key, "unknown key");
}

const json& require(const json& j, const std::string& pointer, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) fail(pointer + "/" + key, "missing required key");
  return *it;
}

double number(const json& j, const std::string& pointer) {
  if (!j.is_number()) fail(pointer, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& pointer) {
  if (!j.is_array()) fail(pointer, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], pointer + "/" + std::to_string(i)));
  return v;
}

std::vector<FluxComponent> side_from_json(const json& j, int d, const std::string& pointer) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    fail(pointer, "expected an array of " + std::to_string(d) + " components");
  std::vector<FluxComponent> out;
  for (int k = 0; k < d; ++k) {
    const std::string p = pointer + "/" + std::to_string(k);
    const json& c = j[k];
    check_keys(c, p, {"poly_lambda", "x_modulation", "x_coeffs"});
    auto poly = numbers(require(c, p, "poly_lambda"), p + "/poly_lambda");
    XModulation mod = XModulation::None;
    if (c.contains("x_modulation")) {
      if (!c["x_modulation"].is_string()) fail(p + "/x_modulation", "expected a string");
      const auto s = c["x_modulation"].get<std::string>();
      if (s == "affine")
        mod = XModulation::Affine;
      else if (s != "none")
        fail(p + "/x_modulation", "expected \"none\" or \"affine\"");
    }
    std::vector<double> xc;
    if (c.contains("x_coeffs")) {
      xc = numbers(c["x_coeffs"], p + "/x_coeffs");
      if (mod != XModulation::Affine) fail(p + "/x_coeffs", "x_coeffs requires x_modulation \"affine\"");
      if (xc.empty() || static_cast<int>(xc.size()) > d + 1)
        fail(p + "/x_coeffs", "expected 1 to d+1 coefficients");
    }
    out.push_back(polynomial_component(k, std::move(poly), mod, std::move(xc)));
  }
  return out;
}

const json& preset_table() {
  static const json table = json::parse(R"({
    "burgers": {
      "d": 1, "a": 0, "b": 1,
      "interface": {"axis": 1, "zeta": {"kind": "zero", "coeffs": []}},
      "left":  [{"poly_lambda": [0, 1, -1], "x_modulation": "none"}],
      "right": [{"poly_lambda": [0, 1, -1], "x_modulation": "none"}]
    },
    "two_flux": {
      "d": 1, "a": 0, "b": 1,
      "interface": {"axis": 1, "zeta": {"kind": "zero", "coeffs": []}},
      "left":  [{"poly_lambda": [0, 1, -1], "x_modulation": "none"}],
      "right": [{"poly_lambda": [0, 2, -2], "x_modulation": "none"}]
    },
    "sedimentation": {
      "d": 1, "a": 0, "b": 1,
      "interface": {"axis": 1, "zeta": {"kind": "zero", "coeffs": []}},
      "left":  [{"poly_lambda": [0, 1, -2, 1], "x_modulation": "affine", "x_coeffs": [1, 0.5]}],
      "right": [{"poly_lambda": [0, 0.5, -1, 0.5], "x_modulation": "none"}]
    },
    "two_flux_2d": {
      "d": 2, "a": 0, "b": 1,
      "interface": {"axis": 1, "zeta": {"kind": "affine", "coeffs": [0, 0.25]}},
      "left":  [{"poly_lambda": [0, 1, -1], "x_modulation": "none"},
                {"poly_lambda": [0, 0, 1, -1], "x_modulation": "none"}],
      "right": [{"poly_lambda": [0, 2, -2], "x_modulation": "none"},
                {"poly_lambda": [0, 0, 1, -1], "x_modulation": "none"}]
    }
  })");
  return table;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"burgers", "two_flux", "sedimentation", "two_flux_2d"};
  return names;
}

json preset_json(const std::string& name) {
  const auto& table = preset_table();
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown flux preset \"" + name + "\"");
  return *it;
}

PiecewiseFlux make_preset(const std::string& name) {
  auto model = flux_from_json(preset_json(name));
  model.set_name(name);
  return model;
}

Interface interface_from_json(const json& spec, int d, const std::string& pointer) {
  check_keys(spec, pointer, {"axis", "zeta"});
  const json& ax = require(spec, pointer, "axis");
  if (!ax.is_number_integer() || ax.get<int>() < 1 || ax.get<int>() > d)
    fail(pointer + "/axis", "expected an integer in 1.." + std::to_string(d));
  const json& z = require(spec, pointer, "zeta");
  const std::string zp = pointer + "/zeta";
  check_keys(z, zp, {"kind", "coeffs"});
  const json& kind = require(z, zp, "kind");
  if (!kind.is_string()) fail(zp + "/kind", "expected a string");
  std::vector<double> coeffs;
  if (z.contains("coeffs")) coeffs = numbers(z["coeffs"], zp + "/coeffs");
  const auto k = kind.get<std::string>();
  Interface::Kind kk;
  if (k == "zero") {
    kk = Interface::Kind::Zero;
    if (!coeffs.empty()) fail(zp + "/coeffs", "zero interface takes no coefficients");
  } else if (k == "affine") {
    kk = Interface::Kind::Affine;
    if (coeffs.empty() || coeffs.size() > static_cast<std::size_t>(d == 1 ? 1 : 2))
      fail(zp + "/coeffs", d == 1 ? "expected one coefficient" : "expected one or two coefficients");
  } else if (k == "poly") {
    kk = Interface::Kind::Poly;
    if (coeffs.empty()) fail(zp + "/coeffs", "expected at least one coefficient");
    if (d == 1 && coeffs.size() != 1) fail(zp + "/coeffs", "a one-dimensional interface is a constant");
  } else {
    fail(zp + "/kind", "expected \"zero\", \"affine\" or \"poly\"");
  }
  return Interface(d, ax.get<int>() - 1, kk, coeffs);
}

json interface_to_json(const Interface& iface) {
  const char* kind = iface.kind() == Interface::Kind::Zero     ? "zero"
                     : iface.kind() == Interface::Kind::Affine ? "affine"
                                                               : "poly";
  return {{"axis", iface.axis() + 1}, {"zeta", {{"kind", kind}, {"coeffs", iface.coeffs()}}}};
}

PiecewiseFlux flux_from_json(const json& spec, const std::string& pointer) {
  check_keys(spec, pointer, {"d", "a", "b", "interface", "left", "right"});
  const json& dj = require(spec, pointer, "d");
  if (!dj.is_number_integer() || dj.get<int>() < 1 || dj.get<int>() > kMaxDim)
    fail(pointer + "/d", "expected 1 or 2");
  const int d = dj.get<int>();
  const double a = number(require(spec, pointer, "a"), pointer + "/a");
  const double b = number(require(spec, pointer, "b"), pointer + "/b");
  if (!(a < b)) fail(pointer + "/b", "requires a < b");
  Interface iface = spec.contains("interface")
                        ? interface_from_json(spec["interface"], d, pointer + "/interface")
                        : Interface::zero(d);
  auto left = side_from_json(require(spec, pointer, "left"), d, pointer + "/left");
  auto right = side_from_json(require(spec, pointer, "right"), d, pointer + "/right");
  Box box;
  box.d = d;
  return PiecewiseFlux(d, std::move(left), std::move(right), std::move(iface), a, b, box);
}

}  // namespace dflux
