#include "dfn/params.hpp"

#include <algorithm>
#include <cmath>

namespace dfn {

double ScalarClosure::value(double x) const {
  const double u = x / x_ref;
  switch (family) {
    case Family::Constant:
      return coeffs.at(0);
    case Family::Polynomial: {
      double acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
      return acc;
    }
    case Family::PowerSeries: {
      double acc = 0.0;
      for (size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * std::pow(u, powers[i]);
      return acc;
    }
    case Family::ExpTanh: {
      double acc = b0 + b1 * u;
      for (const auto& [A, B] : exp_terms) acc += A * std::exp(B * u);
      for (const auto& [C, D, E] : tanh_terms) acc += C * std::tanh(D * (u - E));
      return acc;
    }
  }
  return 0.0;
}

double ScalarClosure::derivative(double x) const {
  const double u = x / x_ref;
  double du = 0.0;
  switch (family) {
    case Family::Constant:
      return 0.0;
    case Family::Polynomial: {
      for (size_t i = coeffs.size(); i-- > 1;) du = du * u + static_cast<double>(i) * coeffs[i];
      break;
    }
    case Family::PowerSeries: {
      for (size_t i = 0; i < coeffs.size(); ++i) {
        if (powers[i] != 0.0) du += coeffs[i] * powers[i] * std::pow(u, powers[i] - 1.0);
      }
      break;
    }
    case Family::ExpTanh: {
      du = b1;
      for (const auto& [A, B] : exp_terms) du += A * B * std::exp(B * u);
      for (const auto& [C, D, E] : tanh_terms) {
        const double th = std::tanh(D * (u - E));
        du += C * D * (1.0 - th * th);
      }
      break;
    }
  }
  return du / x_ref;
}

const std::map<std::string, ScalarClosure>& closure_presets() {
  static const std::map<std::string, ScalarClosure> presets = [] {
    std::map<std::string, ScalarClosure> m;

    // Electrolyte conductivity fit for LiPF6 in EC:EMC (Nyman-type power fit,
    // c in mol/m^3, result in S/m).
    ScalarClosure nyman;
    nyman.family = ScalarClosure::Family::PowerSeries;
    nyman.x_ref = 1000.0;
    nyman.coeffs = {0.1297, -2.51, 3.329};
    nyman.powers = {3.0, 1.5, 1.0};
    m["electrolyte_nyman"] = nyman;

    // Graphite negative-electrode OCP fit vs stoichiometry (LG M50 style).
    ScalarClosure gr;
    gr.family = ScalarClosure::Family::ExpTanh;
    gr.b0 = 0.2482;
    gr.exp_terms = {{1.9793, -39.3631}};
    gr.tanh_terms = {{-0.0909, 29.8538, 0.1234},
                     {-0.04478, 14.9159, 0.2769},
                     {-0.0205, 30.4444, 0.6103}};
    m["graphite_lgm50"] = gr;

    // NMC811 positive-electrode OCP fit vs stoichiometry (LG M50 style).
    ScalarClosure nmc;
    nmc.family = ScalarClosure::Family::ExpTanh;
    nmc.b0 = 4.4875;
    nmc.b1 = -0.8090;
    nmc.tanh_terms = {{-0.0428, 18.5138, 0.5542},
                      {-17.7326, 15.7890, 0.3117},
                      {17.5842, 15.9308, 0.3120}};
    m["nmc811_lgm50"] = nmc;

    return m;
  }();
  return presets;
}

double CurrentProgram::value_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t idx = (it == times.begin()) ? 0 : static_cast<size_t>(it - times.begin() - 1);
  return values.at(idx);
}

CoeffEval kappa1_eval(const ParameterSet& ps, SubdomainTag tag, double c1) {
  if (!(c1 > 0.0)) throw ChemistryDomainError("kappa1 requires c1 > 0");
  const ScalarClosure& f = ps.kappa1[static_cast<int>(tag)];
  return {f.value(c1), f.derivative(c1)};
}

CoeffEval kappa2_eval(const ParameterSet& ps, SubdomainTag tag, double c1) {
  const CoeffEval k1v = kappa1_eval(ps, tag, c1);
  const double s = 2.0 * ps.R * ps.T0 / ps.F * (1.0 - ps.t_plus);
  return {s * k1v.value, s * k1v.dc1};
}

double kappa2_of(const ParameterSet& ps, SubdomainTag tag, double c1) {
  return kappa2_eval(ps, tag, c1).value;
}

double ocp_value(const ParameterSet& ps, SubdomainTag tag, double c2_surf) {
  const int e = electrode_index(tag);
  if (!(c2_surf > 0.0 && c2_surf < ps.c2max[e]))
    throw ChemistryDomainError("ocp requires 0 < c2_surf < c2max in " + std::string(tag_name(tag)));
  return ps.ocp[e].value(c2_surf / ps.c2max[e]);
}

double ocp_derivative(const ParameterSet& ps, SubdomainTag tag, double c2_surf) {
  const int e = electrode_index(tag);
  if (!(c2_surf > 0.0 && c2_surf < ps.c2max[e]))
    throw ChemistryDomainError("ocp requires 0 < c2_surf < c2max in " + std::string(tag_name(tag)));
  return ps.ocp[e].derivative(c2_surf / ps.c2max[e]) / ps.c2max[e];
}

double overpotential(const ParameterSet& ps, SubdomainTag tag, double phi1, double phi2, double c2_surf) {
  return phi2 - phi1 - ocp_value(ps, tag, c2_surf);
}

BvEval butler_volmer(const ParameterSet& ps, SubdomainTag tag, double c1, double c2_surf, double eta) {
  const int e = electrode_index(tag);
  if (!(c1 > 0.0)) throw ChemistryDomainError("butler_volmer requires c1 > 0");
  if (!(c2_surf > 0.0 && c2_surf < ps.c2max[e]))
    throw ChemistryDomainError("butler_volmer requires 0 < c2_surf < c2max in " + std::string(tag_name(tag)));

  const double aa = ps.alpha_a[e];
  const double ac = ps.alpha_c[e];
  const double beta = ps.F / (ps.R * ps.T0);
  const double depleted = ps.c2max[e] - c2_surf;

  const double pref = ps.bv_k[e] * std::pow(c1, aa) * std::pow(depleted, aa) * std::pow(c2_surf, ac);
  const double ea = std::exp(aa * beta * eta);
  const double ec = std::exp(-ac * beta * eta);

  BvEval out;
  out.J = pref * (ea - ec);
  out.dJ_dc1 = pref * (ea - ec) * aa / c1;
  out.dJ_dc2s = pref * (ea - ec) * (ac / c2_surf - aa / depleted);
  out.dJ_deta = pref * beta * (aa * ea + ac * ec);
  return out;
}

namespace {

ScalarClosure load_closure(const ConfigMap& cfg, const std::string& prefix) {
  if (cfg.contains(prefix + ".preset")) {
    const std::string name = cfg.get_string(prefix + ".preset");
    const auto& presets = closure_presets();
    auto it = presets.find(name);
    if (it == presets.end()) throw ValidationError("unknown closure preset '" + name + "' at " + prefix);
    return it->second;
  }
  ScalarClosure c;
  const std::string family = cfg.get_string(prefix + ".family");
  c.x_ref = cfg.get_number_or(prefix + ".x_ref", 1.0);
  if (family == "constant") {
    c.family = ScalarClosure::Family::Constant;
    c.coeffs = {cfg.get_number(prefix + ".value")};
  } else if (family == "polynomial") {
    c.family = ScalarClosure::Family::Polynomial;
    c.coeffs = cfg.get_array(prefix + ".coeffs");
    if (c.coeffs.empty()) throw ValidationError("empty 'coeffs' at " + prefix);
  } else if (family == "power_series") {
    c.family = ScalarClosure::Family::PowerSeries;
    c.coeffs = cfg.get_array(prefix + ".coeffs");
    c.powers = cfg.get_array(prefix + ".powers");
    if (c.coeffs.size() != c.powers.size())
      throw ValidationError("'coeffs' and 'powers' differ in length at " + prefix);
  } else if (family == "exp_tanh") {
    c.family = ScalarClosure::Family::ExpTanh;
    c.b0 = cfg.get_number_or(prefix + ".b0", 0.0);
    c.b1 = cfg.get_number_or(prefix + ".b1", 0.0);
    const auto ea = cfg.get_array_or(prefix + ".exp_amplitudes", {});
    const auto er = cfg.get_array_or(prefix + ".exp_rates", {});
    if (ea.size() != er.size()) throw ValidationError("exp term arrays differ in length at " + prefix);
    for (size_t i = 0; i < ea.size(); ++i) c.exp_terms.push_back({ea[i], er[i]});
    const auto ta = cfg.get_array_or(prefix + ".tanh_amplitudes", {});
    const auto ts = cfg.get_array_or(prefix + ".tanh_slopes", {});
    const auto tc = cfg.get_array_or(prefix + ".tanh_centers", {});
    if (ta.size() != ts.size() || ta.size() != tc.size())
      throw ValidationError("tanh term arrays differ in length at " + prefix);
    for (size_t i = 0; i < ta.size(); ++i) c.tanh_terms.push_back({ta[i], ts[i], tc[i]});
  } else {
    throw ValidationError("unknown closure family '" + family + "' at " + prefix);
  }
  return c;
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ValidationError(what + " must be positive");
}

} // namespace

ParameterSet load_parameters(const ConfigMap& cfg) {
  ParameterSet ps;

  ps.F = cfg.get_number_or("cell.F", ps.F);
  ps.R = cfg.get_number_or("cell.R", ps.R);
  ps.T0 = cfg.get_number_or("cell.T0", ps.T0);
  ps.t_plus = cfg.get_number("cell.t_plus");
  require_positive(ps.F, "cell.F");
  require_positive(ps.R, "cell.R");
  require_positive(ps.T0, "cell.T0");
  if (!(ps.t_plus > 0.0 && ps.t_plus < 1.0)) throw ValidationError("cell.t_plus out of (0,1)");

  const std::array<SubdomainTag, 3> tags = {SubdomainTag::Negative, SubdomainTag::Separator,
                                            SubdomainTag::Positive};
  for (SubdomainTag tag : tags) {
    const std::string sec = tag_name(tag);
    const int i = static_cast<int>(tag);
    ps.eps1[i] = cfg.get_number(sec + ".eps1");
    ps.k1[i] = cfg.get_number(sec + ".k1");
    ps.c10[i] = cfg.get_number(sec + ".c10");
    require_positive(ps.eps1[i], sec + ".eps1");
    require_positive(ps.k1[i], sec + ".k1");
    if (!(ps.c10[i] > 0.0)) throw ValidationError(sec + ".c10 must satisfy c10 > 0");
    ps.kappa1[i] = load_closure(cfg, sec + ".kappa1");
    if (!(ps.kappa1[i].value(ps.c10[i]) > 0.0))
      throw ValidationError(sec + ".kappa1 must be positive at c10");
  }

  for (SubdomainTag tag : {SubdomainTag::Negative, SubdomainTag::Positive}) {
    const std::string sec = tag_name(tag);
    const int e = electrode_index(tag);
    ps.sigma[e] = cfg.get_number(sec + ".sigma");
    ps.k2[e] = cfg.get_number(sec + ".k2");
    ps.a1[e] = cfg.get_number(sec + ".a1");
    ps.a2[e] = cfg.get_number(sec + ".a2");
    ps.Rs[e] = cfg.get_number(sec + ".Rs");
    ps.c2max[e] = cfg.get_number(sec + ".c2max");
    ps.c20[e] = cfg.get_number(sec + ".c20");
    require_positive(ps.sigma[e], sec + ".sigma");
    require_positive(ps.k2[e], sec + ".k2");
    require_positive(ps.a1[e], sec + ".a1");
    require_positive(ps.a2[e], sec + ".a2");
    require_positive(ps.Rs[e], sec + ".Rs");
    require_positive(ps.c2max[e], sec + ".c2max");
    if (!(ps.c20[e] > 0.0 && ps.c20[e] < ps.c2max[e]))
      throw ValidationError(sec + ".c20 out of (0, c2max)");

    ps.bv_k[e] = cfg.get_number(sec + ".bv.k");
    ps.alpha_a[e] = cfg.get_number(sec + ".bv.alpha_a");
    ps.alpha_c[e] = cfg.get_number(sec + ".bv.alpha_c");
    require_positive(ps.bv_k[e], sec + ".bv.k");
    if (!(ps.alpha_a[e] > 0.0 && ps.alpha_a[e] < 1.0)) throw ValidationError(sec + ".bv.alpha_a out of (0,1)");
    if (!(ps.alpha_c[e] > 0.0 && ps.alpha_c[e] < 1.0)) throw ValidationError(sec + ".bv.alpha_c out of (0,1)");

    ps.ocp[e] = load_closure(cfg, sec + ".ocp");
  }

  if (cfg.contains("operating.current_times") || cfg.contains("operating.current_values")) {
    ps.current.times = cfg.get_array("operating.current_times");
    ps.current.values = cfg.get_array("operating.current_values");
    if (ps.current.times.size() != ps.current.values.size() || ps.current.times.empty())
      throw ValidationError("operating.current_times/current_values must be equal-length, nonempty");
    if (ps.current.times.front() != 0.0) throw ValidationError("operating.current_times must start at 0");
    if (!std::is_sorted(ps.current.times.begin(), ps.current.times.end()))
      throw ValidationError("operating.current_times must be ascending");
  } else {
    ps.current.times = {0.0};
    ps.current.values = {cfg.get_number("operating.current")};
  }

  return ps;
}

ParameterSet load_parameters(const std::string& path, const std::map<std::string, std::string>& overrides) {
  ConfigMap cfg = load_config(path);
  apply_overrides(cfg, overrides);
  ParameterSet ps = load_parameters(cfg);
  const auto leftover = cfg.unconsumed();
  if (!leftover.empty()) throw ValidationError("unknown config key '" + leftover.front() + "'");
  return ps;
}

} // namespace dfn
