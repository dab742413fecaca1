#pragma once

// JSON form of MatchConfig. Recognised keys:
//   gamma_V, gamma_f, gamma_W,
//   deformation_kernel {family, terms [{weight, sigma}]},
//   fidelity {sigma_p, sigma_f, kt_mode},
//   metric {s, scheme},
//   n_steps, schedule [{scale_p, scale_f, iters}], step_init, grad_tol, fd_epsilon
// Unknown keys are rejected; missing keys keep the MatchConfig defaults.

#include "fshapes/matching.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

namespace fshapes {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidInput("config: " + where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw InvalidInput("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read_key(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidInput("config: key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

inline double single_gaussian_width(const RadialKernelSpec& k, const char* what) {
  if (k.family != RadialFamily::kGaussian || k.terms.size() != 1) {
    throw InvalidInput(std::string("config: ") + what + " must be a single Gaussian to be serialized");
  }
  return k.terms.front().sigma;
}

}  // namespace detail

inline Json to_json(const MatchConfig& c) {
  Json terms = Json::array();
  for (const auto& t : c.deformation_kernel.terms) terms.push_back({{"weight", t.weight}, {"sigma", t.sigma}});
  Json schedule = Json::array();
  for (const auto& s : c.schedule) schedule.push_back({{"scale_p", s.scale_p}, {"scale_f", s.scale_f}, {"iters", s.iters}});
  return Json{
      {"gamma_V", c.gamma_V},
      {"gamma_f", c.gamma_f},
      {"gamma_W", c.gamma_W},
      {"deformation_kernel", {{"family", to_string(c.deformation_kernel.family)}, {"terms", terms}}},
      {"fidelity",
       {{"sigma_p", detail::single_gaussian_width(c.fidelity_kernels.position, "fidelity position kernel")},
        {"sigma_f", detail::single_gaussian_width(c.fidelity_kernels.signal, "fidelity signal kernel")},
        {"kt_mode", to_string(c.fidelity_kernels.tangent.mode)}}},
      {"metric", {{"s", c.metric.order}, {"scheme", to_string(c.metric.scheme)}}},
      {"n_steps", c.n_steps},
      {"schedule", schedule},
      {"step_init", c.step_init},
      {"grad_tol", c.grad_tol},
      {"fd_epsilon", c.fd_epsilon},
  };
}

inline MatchConfig match_config_from_json(const Json& j) {
  detail::reject_unknown_keys(j,
                              {"gamma_V", "gamma_f", "gamma_W", "deformation_kernel", "fidelity", "metric", "n_steps",
                               "schedule", "step_init", "grad_tol", "fd_epsilon"},
                              "config");
  MatchConfig c;
  const std::string top = "config";
  detail::read_key(j, "gamma_V", c.gamma_V, top);
  detail::read_key(j, "gamma_f", c.gamma_f, top);
  detail::read_key(j, "gamma_W", c.gamma_W, top);
  detail::read_key(j, "n_steps", c.n_steps, top);
  detail::read_key(j, "step_init", c.step_init, top);
  detail::read_key(j, "grad_tol", c.grad_tol, top);
  detail::read_key(j, "fd_epsilon", c.fd_epsilon, top);

  if (j.contains("deformation_kernel")) {
    const Json& k = j.at("deformation_kernel");
    detail::reject_unknown_keys(k, {"family", "terms"}, "deformation_kernel");
    std::string family = to_string(c.deformation_kernel.family);
    detail::read_key(k, "family", family, "deformation_kernel");
    c.deformation_kernel.family = radial_family_from_string(family);
    if (k.contains("terms")) {
      if (!k.at("terms").is_array()) throw InvalidInput("config: deformation_kernel.terms must be an array");
      c.deformation_kernel.terms.clear();
      for (const Json& t : k.at("terms")) {
        detail::reject_unknown_keys(t, {"weight", "sigma"}, "deformation_kernel.terms");
        KernelTerm term;
        detail::read_key(t, "weight", term.weight, "deformation_kernel.terms");
        detail::read_key(t, "sigma", term.sigma, "deformation_kernel.terms");
        c.deformation_kernel.terms.push_back(term);
      }
    }
  }
  if (j.contains("fidelity")) {
    const Json& f = j.at("fidelity");
    detail::reject_unknown_keys(f, {"sigma_p", "sigma_f", "kt_mode"}, "fidelity");
    double sp = c.fidelity_kernels.position.terms.front().sigma;
    double sf = c.fidelity_kernels.signal.terms.front().sigma;
    std::string mode = to_string(c.fidelity_kernels.tangent.mode);
    detail::read_key(f, "sigma_p", sp, "fidelity");
    detail::read_key(f, "sigma_f", sf, "fidelity");
    detail::read_key(f, "kt_mode", mode, "fidelity");
    c.fidelity_kernels.position = RadialKernelSpec::gaussian(sp);
    c.fidelity_kernels.signal = RadialKernelSpec::gaussian(sf);
    c.fidelity_kernels.tangent.mode = grassmann_mode_from_string(mode);
  }
  if (j.contains("metric")) {
    const Json& m = j.at("metric");
    detail::reject_unknown_keys(m, {"s", "scheme"}, "metric");
    std::string scheme = to_string(c.metric.scheme);
    detail::read_key(m, "s", c.metric.order, "metric");
    detail::read_key(m, "scheme", scheme, "metric");
    c.metric.scheme = mass_scheme_from_string(scheme);
  }
  if (j.contains("schedule")) {
    if (!j.at("schedule").is_array()) throw InvalidInput("config: schedule must be an array");
    c.schedule.clear();
    for (const Json& s : j.at("schedule")) {
      detail::reject_unknown_keys(s, {"scale_p", "scale_f", "iters"}, "schedule");
      ScaleStage st;
      detail::read_key(s, "scale_p", st.scale_p, "schedule");
      detail::read_key(s, "scale_f", st.scale_f, "schedule");
      detail::read_key(s, "iters", st.iters, "schedule");
      c.schedule.push_back(st);
    }
  }
  c.validate();
  return c;
}

/// Reads a config file. A run manifest is also accepted, in which case its
/// "config" member is used.
inline MatchConfig read_match_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("manifest_version")) return match_config_from_json(j.at("config"));
  return match_config_from_json(j);
}

}  // namespace fshapes
