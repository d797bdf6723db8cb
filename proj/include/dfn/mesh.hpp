#pragma once

#include "dfn/params.hpp"
#include "dfn/types.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace dfn {

enum class FacetTag : int { GammaN = 0, GammaP = 1, Insulated = 2 };

/// Boundary facet: a vertex in 1D (v[1] == -1), an edge in 2D.
struct BoundaryFacet {
  std::array<Index, 2> v{-1, -1};
  FacetTag tag = FacetTag::Insulated;
};

/// Conforming interface facet between the separator and an electrode.
struct InterfaceFacet {
  std::array<Index, 2> v{-1, -1};
  SubdomainTag electrode = SubdomainTag::Negative; // Gamma_sn or Gamma_sp
};

struct Element {
  std::array<Index, 3> v{-1, -1, -1}; // interval (v0,v1) in 1D, triangle in 2D
  SubdomainTag tag = SubdomainTag::Negative;
};

/// Laminated n|s|p cell mesh; 1D intervals or 2D triangles with matching
/// subdomain interfaces. Immutable after construction.
struct CellMesh {
  int dim = 1;
  Matrix vertices;                 // n_vertices x dim
  std::vector<Element> elements;
  std::vector<BoundaryFacet> boundary_facets;
  std::vector<InterfaceFacet> interface_facets;
  std::vector<Index> parent_of_element; // into the mesh this one was refined from; empty for a base mesh
  double max_shape_ratio = 1.0;

  Index n_vertices() const { return vertices.rows(); }
  Index n_elements() const { return static_cast<Index>(elements.size()); }
  int verts_per_element() const { return dim == 1 ? 2 : 3; }

  double element_volume(Index e) const;
  double element_diameter(Index e) const;
  Vector element_centroid(Index e) const;
  double facet_measure(const BoundaryFacet& f) const; // 1 in 1D (point convention)
  double subdomain_volume(SubdomainTag tag) const;
  double total_volume() const;

  /// Index of the containing element for a point, or -1. Brute force; meant
  /// for nested-mesh transfer at desk scale.
  Index locate(const Vector& x, double tol = 1e-12) const;
};

struct GeometrySpec {
  int dim = 1;
  double len_n = 0, len_s = 0, len_p = 0; // through-cell extents, m
  double height = 0;                      // 2D only
  int nx_n = 0, nx_s = 0, nx_p = 0;       // base element counts along x
  int ny = 0;                             // 2D only
};

/// Structured laminate mesh with GammaN at x=0 and GammaP at x=L.
CellMesh build_laminate(const GeometrySpec& spec);

/// `levels` rounds of uniform refinement: 1D bisection, 2D red (4-way).
/// Coarse vertices keep their indices and exact coordinates; the returned
/// parent map points into `mesh`.
CellMesh refine_uniform(const CellMesh& mesh, int levels);

/// Per-electrode radial grid on [0, Rs], ascending, first node 0.
struct RadialGrid {
  Vector nodes;
  SubdomainTag tag = SubdomainTag::Negative;

  Index n_intervals() const { return nodes.size() - 1; }
  double max_spacing() const;
};

struct RadialSpec {
  int uniform_intervals = 0;         // used when scaled_nodes is empty
  std::vector<double> scaled_nodes;  // in [0,1], scaled by Rs
};

RadialGrid build_radial(const ParameterSet& ps, SubdomainTag tag, const RadialSpec& spec);

/// Bisection refinement: every interval splits in two per level.
RadialGrid refine_radial(const RadialGrid& grid, int levels);

/// Plain-text dump/restore (debugging aid, not an exchange format).
void dump_mesh(const CellMesh& mesh, std::ostream& out);
CellMesh restore_mesh(std::istream& in);

} // namespace dfn
