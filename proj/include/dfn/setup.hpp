#pragma once

#include "dfn/analysis.hpp"

namespace dfn {

/// Everything a simulate run needs, parsed from one config file.
struct Setup {
  ParameterSet ps;
  GeometrySpec geometry;
  RadialSpec radial_n, radial_p;
  SimulationPlan plan;
  SolverConfig solver_cfg;
};

Setup load_setup(const ConfigMap& cfg);
StudySetup load_study(const ConfigMap& cfg);
BenchSetup load_bench(const ConfigMap& cfg);

/// Fails on any key no loader consumed.
void reject_unknown_keys(const ConfigMap& cfg);

/// Serialize a config back to TOML (sections from dotted keys, full-precision
/// numbers) so a manifest's resolved config can be re-run bit-identically.
void write_config_toml(const ConfigMap& cfg, std::ostream& out);

} // namespace dfn
