#pragma once

#include "dfn/config.hpp"
#include "dfn/types.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace dfn {

enum class SubdomainTag : int { Negative = 0, Separator = 1, Positive = 2 };

inline const char* tag_name(SubdomainTag t) {
  switch (t) {
    case SubdomainTag::Negative: return "negative";
    case SubdomainTag::Separator: return "separator";
    case SubdomainTag::Positive: return "positive";
  }
  return "?";
}

inline bool is_electrode(SubdomainTag t) { return t != SubdomainTag::Separator; }

/// Electrode-only storage index: Negative -> 0, Positive -> 1.
inline int electrode_index(SubdomainTag t) {
  if (t == SubdomainTag::Negative) return 0;
  if (t == SubdomainTag::Positive) return 1;
  throw std::logic_error("electrode-only quantity requested on the separator");
}

/// A scalar function family with an exact analytic derivative. Covers every
/// closure shipped here: constants, polynomials, power series fits for
/// electrolyte conductivity, and exp/tanh fits for open-circuit potentials.
/// The input is scaled by x_ref before the fit is applied.
struct ScalarClosure {
  enum class Family { Constant, Polynomial, PowerSeries, ExpTanh };

  Family family = Family::Constant;
  double x_ref = 1.0;
  std::vector<double> coeffs;  // Constant: [c]; Polynomial: a0 + a1 u + ...; PowerSeries: a_i
  std::vector<double> powers;  // PowerSeries exponents p_i (u^p_i needs u > 0)
  // ExpTanh: b0 + b1 u + sum A_i exp(B_i u) + sum C_j tanh(D_j (u - E_j))
  double b0 = 0.0;
  double b1 = 0.0;
  std::vector<std::array<double, 2>> exp_terms;
  std::vector<std::array<double, 3>> tanh_terms;

  double value(double x) const;
  double derivative(double x) const;
};

/// Named closure presets (representative published fits; see README).
const std::map<std::string, ScalarClosure>& closure_presets();

/// Piecewise-constant applied current density program: value(t) holds from
/// times[i] (inclusive) to times[i+1] (exclusive); times[0] must be 0.
struct CurrentProgram {
  std::vector<double> times{0.0};
  std::vector<double> values{0.0};

  double value_at(double t) const;
};

struct ParameterSet {
  // Per-subdomain (index by SubdomainTag)
  std::array<double, 3> eps1{};
  std::array<double, 3> k1{};
  std::array<double, 3> c10{};
  std::array<ScalarClosure, 3> kappa1{};

  // Electrode-only (index by electrode_index)
  std::array<double, 2> sigma{};
  std::array<double, 2> k2{};
  std::array<double, 2> a1{};
  std::array<double, 2> a2{};
  std::array<double, 2> Rs{};
  std::array<double, 2> c2max{};
  std::array<double, 2> c20{};
  std::array<double, 2> bv_k{};
  std::array<double, 2> alpha_a{};
  std::array<double, 2> alpha_c{};
  std::array<ScalarClosure, 2> ocp{};

  double F = 96485.33212;
  double R = 8.31446;
  double T0 = 298.15;
  double t_plus = 0.4;

  CurrentProgram current;

  double eps1_of(SubdomainTag t) const { return eps1[static_cast<int>(t)]; }
  double k1_of(SubdomainTag t) const { return k1[static_cast<int>(t)]; }
  double c10_of(SubdomainTag t) const { return c10[static_cast<int>(t)]; }
  double sigma_of(SubdomainTag t) const { return sigma[electrode_index(t)]; }
  double k2_of(SubdomainTag t) const { return k2[electrode_index(t)]; }
  double a1_of(SubdomainTag t) const { return a1[electrode_index(t)]; }
  double a2_of(SubdomainTag t) const { return a2[electrode_index(t)]; }
  double Rs_of(SubdomainTag t) const { return Rs[electrode_index(t)]; }
  double c2max_of(SubdomainTag t) const { return c2max[electrode_index(t)]; }
  double c20_of(SubdomainTag t) const { return c20[electrode_index(t)]; }
};

/// Value/derivative pair of a coefficient evaluated at some c1.
struct CoeffEval {
  double value = 0.0;
  double dc1 = 0.0;
};

/// Butler-Volmer rate and its exact partials at (c1, c2_surf, eta). The
/// partial in c2_surf holds eta fixed; the OCP chain term is applied by the
/// assembler where eta itself depends on c2_surf.
struct BvEval {
  double J = 0.0;
  double dJ_dc1 = 0.0;
  double dJ_dc2s = 0.0;
  double dJ_deta = 0.0;
};

CoeffEval kappa1_eval(const ParameterSet& ps, SubdomainTag tag, double c1);
CoeffEval kappa2_eval(const ParameterSet& ps, SubdomainTag tag, double c1);

/// kappa2 = (2 R T0 / F) kappa1(c1) (1 - t_plus); domain error for c1 <= 0.
double kappa2_of(const ParameterSet& ps, SubdomainTag tag, double c1);

BvEval butler_volmer(const ParameterSet& ps, SubdomainTag tag, double c1, double c2_surf, double eta);

/// Open-circuit potential U_m(c2_surf) and its derivative in c2_surf.
double ocp_value(const ParameterSet& ps, SubdomainTag tag, double c2_surf);
double ocp_derivative(const ParameterSet& ps, SubdomainTag tag, double c2_surf);

/// eta = phi2 - phi1 - U_m(c2_surf); domain error unless 0 < c2_surf < c2max.
double overpotential(const ParameterSet& ps, SubdomainTag tag, double phi1, double phi2, double c2_surf);

/// Build a validated ParameterSet from the [cell]/[negative]/[separator]/
/// [positive]/[operating] sections of an already-parsed config.
ParameterSet load_parameters(const ConfigMap& config);

/// Spec surface: parse the file at `path` (TOML or JSON by extension), apply
/// overrides, validate every invariant, reject unknown keys.
ParameterSet load_parameters(const std::string& path,
                             const std::map<std::string, std::string>& overrides = {});

} // namespace dfn
