#include "dfn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace dfn {

double CellMesh::element_volume(Index e) const {
  const Element& el = elements[e];
  if (dim == 1) return vertices(el.v[1], 0) - vertices(el.v[0], 0);
  const Vector2 a = vertices.row(el.v[0]);
  const Vector2 b = vertices.row(el.v[1]);
  const Vector2 c = vertices.row(el.v[2]);
  return 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double CellMesh::element_diameter(Index e) const {
  const Element& el = elements[e];
  if (dim == 1) return element_volume(e);
  const Vector2 a = vertices.row(el.v[0]);
  const Vector2 b = vertices.row(el.v[1]);
  const Vector2 c = vertices.row(el.v[2]);
  return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
}

Vector CellMesh::element_centroid(Index e) const {
  const Element& el = elements[e];
  const int nv = verts_per_element();
  Vector c = Vector::Zero(dim);
  for (int i = 0; i < nv; ++i) c += vertices.row(el.v[i]).transpose();
  return c / nv;
}

double CellMesh::facet_measure(const BoundaryFacet& f) const {
  if (dim == 1) return 1.0; // point-evaluation convention for Gamma in 1D
  return (vertices.row(f.v[1]) - vertices.row(f.v[0])).norm();
}

double CellMesh::subdomain_volume(SubdomainTag tag) const {
  double v = 0.0;
  for (Index e = 0; e < n_elements(); ++e)
    if (elements[e].tag == tag) v += element_volume(e);
  return v;
}

double CellMesh::total_volume() const {
  double v = 0.0;
  for (Index e = 0; e < n_elements(); ++e) v += element_volume(e);
  return v;
}

Index CellMesh::locate(const Vector& x, double tol) const {
  for (Index e = 0; e < n_elements(); ++e) {
    const Element& el = elements[e];
    if (dim == 1) {
      if (x(0) >= vertices(el.v[0], 0) - tol && x(0) <= vertices(el.v[1], 0) + tol) return e;
    } else {
      const Vector2 a = vertices.row(el.v[0]);
      const Vector2 b = vertices.row(el.v[1]);
      const Vector2 c = vertices.row(el.v[2]);
      const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
      const double l1 = ((x(0) - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (x(1) - a.y())) / det;
      const double l2 = ((b.x() - a.x()) * (x(1) - a.y()) - (x(0) - a.x()) * (b.y() - a.y())) / det;
      if (l1 >= -tol && l2 >= -tol && l1 + l2 <= 1.0 + tol) return e;
    }
  }
  return -1;
}

namespace {

double shape_ratio_1d() { return 1.0; }

double shape_ratio_tri(const Vector2& a, const Vector2& b, const Vector2& c) {
  const double ea = (b - a).norm(), eb = (c - b).norm(), ec = (a - c).norm();
  const double h = std::max({ea, eb, ec});
  const double area = 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
  const double inradius = 2.0 * area / (ea + eb + ec);
  return h / (2.0 * inradius);
}

constexpr double kShapeRatioLimit = 50.0;

void finalize_shape_ratio(CellMesh& mesh) {
  double worst = 0.0;
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    double r;
    if (mesh.dim == 1) {
      r = shape_ratio_1d();
    } else {
      const Element& el = mesh.elements[e];
      r = shape_ratio_tri(mesh.vertices.row(el.v[0]), mesh.vertices.row(el.v[1]),
                          mesh.vertices.row(el.v[2]));
    }
    worst = std::max(worst, r);
  }
  mesh.max_shape_ratio = worst;
  if (worst > kShapeRatioLimit)
    throw ValidationError("mesh shape-regularity ratio " + std::to_string(worst) + " exceeds limit");
}

CellMesh build_laminate_1d(const GeometrySpec& g) {
  CellMesh mesh;
  mesh.dim = 1;
  const std::array<double, 3> len = {g.len_n, g.len_s, g.len_p};
  const std::array<int, 3> cnt = {g.nx_n, g.nx_s, g.nx_p};
  const std::array<SubdomainTag, 3> tags = {SubdomainTag::Negative, SubdomainTag::Separator,
                                            SubdomainTag::Positive};
  Index n_elem = 0;
  for (int s = 0; s < 3; ++s) {
    if (!(len[s] > 0.0)) throw ValidationError("degenerate extent for subdomain");
    if (cnt[s] <= 0) throw ValidationError("zero element count for subdomain");
    n_elem += cnt[s];
  }
  mesh.vertices.resize(n_elem + 1, 1);
  double x0 = 0.0;
  Index v = 0;
  mesh.vertices(0, 0) = 0.0;
  for (int s = 0; s < 3; ++s) {
    for (int i = 1; i <= cnt[s]; ++i) {
      ++v;
      mesh.vertices(v, 0) = x0 + len[s] * static_cast<double>(i) / cnt[s];
    }
    x0 += len[s];
  }
  Index base = 0;
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < cnt[s]; ++i) {
      Element el;
      el.v = {base + i, base + i + 1, -1};
      el.tag = tags[s];
      mesh.elements.push_back(el);
    }
    base += cnt[s];
  }
  mesh.boundary_facets.push_back({{0, -1}, FacetTag::GammaN});
  mesh.boundary_facets.push_back({{mesh.n_vertices() - 1, -1}, FacetTag::GammaP});
  mesh.interface_facets.push_back({{g.nx_n, -1}, SubdomainTag::Negative});
  mesh.interface_facets.push_back({{g.nx_n + g.nx_s, -1}, SubdomainTag::Positive});
  return mesh;
}

CellMesh build_laminate_2d(const GeometrySpec& g) {
  CellMesh mesh;
  mesh.dim = 2;
  if (!(g.height > 0.0)) throw ValidationError("degenerate extent: height");
  if (g.ny <= 0) throw ValidationError("zero element count: ny");
  const std::array<double, 3> len = {g.len_n, g.len_s, g.len_p};
  const std::array<int, 3> cnt = {g.nx_n, g.nx_s, g.nx_p};
  for (int s = 0; s < 3; ++s) {
    if (!(len[s] > 0.0)) throw ValidationError("degenerate extent for subdomain");
    if (cnt[s] <= 0) throw ValidationError("zero element count for subdomain");
  }

  std::vector<double> xs;
  xs.push_back(0.0);
  double x0 = 0.0;
  for (int s = 0; s < 3; ++s) {
    for (int i = 1; i <= cnt[s]; ++i) xs.push_back(x0 + len[s] * static_cast<double>(i) / cnt[s]);
    x0 += len[s];
  }
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = g.ny;
  const double x_sn = g.len_n;
  const double x_sp = g.len_n + g.len_s;
  const double L = g.len_n + g.len_s + g.len_p;

  mesh.vertices.resize(static_cast<Index>((nx + 1) * (ny + 1)), 2);
  auto vid = [&](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices(vid(i, j), 0) = xs[i];
      mesh.vertices(vid(i, j), 1) = g.height * static_cast<double>(j) / ny;
    }

  auto tag_of_x = [&](double xc) {
    if (xc < x_sn) return SubdomainTag::Negative;
    if (xc < x_sp) return SubdomainTag::Separator;
    return SubdomainTag::Positive;
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Index a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      const SubdomainTag t = tag_of_x(0.5 * (xs[i] + xs[i + 1]));
      mesh.elements.push_back({{a, b, c}, t});
      mesh.elements.push_back({{a, c, d}, t});
    }

  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  for (int j = 0; j < ny; ++j) {
    mesh.boundary_facets.push_back({{vid(0, j), vid(0, j + 1)}, FacetTag::GammaN});
    mesh.boundary_facets.push_back({{vid(nx, j), vid(nx, j + 1)}, FacetTag::GammaP});
  }
  for (int i = 0; i < nx; ++i) {
    mesh.boundary_facets.push_back({{vid(i, 0), vid(i + 1, 0)}, FacetTag::Insulated});
    mesh.boundary_facets.push_back({{vid(i, ny), vid(i + 1, ny)}, FacetTag::Insulated});
  }
  for (int i = 0; i <= nx; ++i) {
    if (near(xs[i], x_sn) && !near(xs[i], 0.0) && !near(xs[i], L))
      for (int j = 0; j < ny; ++j)
        mesh.interface_facets.push_back({{vid(i, j), vid(i, j + 1)}, SubdomainTag::Negative});
    if (near(xs[i], x_sp) && !near(xs[i], 0.0) && !near(xs[i], L))
      for (int j = 0; j < ny; ++j)
        mesh.interface_facets.push_back({{vid(i, j), vid(i, j + 1)}, SubdomainTag::Positive});
  }
  return mesh;
}

CellMesh refine_once(const CellMesh& mesh) {
  CellMesh fine;
  fine.dim = mesh.dim;
  if (mesh.dim == 1) {
    const Index nv = mesh.n_vertices();
    const Index ne = mesh.n_elements();
    fine.vertices.resize(nv + ne, 1);
    fine.vertices.topRows(nv) = mesh.vertices;
    fine.elements.reserve(2 * ne);
    fine.parent_of_element.reserve(2 * ne);
    for (Index e = 0; e < ne; ++e) {
      const Element& el = mesh.elements[e];
      const Index m = nv + e;
      fine.vertices(m, 0) = 0.5 * (mesh.vertices(el.v[0], 0) + mesh.vertices(el.v[1], 0));
      fine.elements.push_back({{el.v[0], m, -1}, el.tag});
      fine.parent_of_element.push_back(e);
      fine.elements.push_back({{m, el.v[1], -1}, el.tag});
      fine.parent_of_element.push_back(e);
    }
    fine.boundary_facets = mesh.boundary_facets;
    fine.interface_facets = mesh.interface_facets;
    return fine;
  }

  const Index nv = mesh.n_vertices();
  std::map<std::pair<Index, Index>, Index> midpoint;
  std::vector<Vector2> new_coords;
  auto mid = [&](Index a, Index b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Index id = nv + static_cast<Index>(new_coords.size());
    new_coords.push_back(0.5 * (mesh.vertices.row(a) + mesh.vertices.row(b)));
    midpoint.emplace(key, id);
    return id;
  };

  fine.elements.reserve(4 * mesh.elements.size());
  fine.parent_of_element.reserve(4 * mesh.elements.size());
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Element& el = mesh.elements[e];
    const Index a = el.v[0], b = el.v[1], c = el.v[2];
    const Index ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    const std::array<std::array<Index, 3>, 4> kids = {{{a, ab, ca}, {ab, b, bc}, {ca, bc, c}, {ab, bc, ca}}};
    for (const auto& k : kids) {
      fine.elements.push_back({k, el.tag});
      fine.parent_of_element.push_back(e);
    }
  }
  fine.vertices.resize(nv + static_cast<Index>(new_coords.size()), 2);
  fine.vertices.topRows(nv) = mesh.vertices;
  for (size_t i = 0; i < new_coords.size(); ++i) fine.vertices.row(nv + static_cast<Index>(i)) = new_coords[i];

  for (const BoundaryFacet& f : mesh.boundary_facets) {
    const Index m = mid(f.v[0], f.v[1]);
    fine.boundary_facets.push_back({{f.v[0], m}, f.tag});
    fine.boundary_facets.push_back({{m, f.v[1]}, f.tag});
  }
  for (const InterfaceFacet& f : mesh.interface_facets) {
    const Index m = mid(f.v[0], f.v[1]);
    fine.interface_facets.push_back({{f.v[0], m}, f.electrode});
    fine.interface_facets.push_back({{m, f.v[1]}, f.electrode});
  }
  return fine;
}

} // namespace

CellMesh build_laminate(const GeometrySpec& spec) {
  CellMesh mesh = (spec.dim == 1) ? build_laminate_1d(spec) : build_laminate_2d(spec);
  finalize_shape_ratio(mesh);
  return mesh;
}

CellMesh refine_uniform(const CellMesh& mesh, int levels) {
  if (levels < 0) throw ValidationError("refine_uniform: levels must be >= 0");
  if (levels == 0) {
    CellMesh copy = mesh;
    copy.parent_of_element.clear();
    for (Index e = 0; e < copy.n_elements(); ++e) copy.parent_of_element.push_back(e);
    return copy;
  }
  CellMesh out = refine_once(mesh);
  for (int l = 1; l < levels; ++l) {
    CellMesh next = refine_once(out);
    for (Index e = 0; e < next.n_elements(); ++e)
      next.parent_of_element[e] = out.parent_of_element[next.parent_of_element[e]];
    out = std::move(next);
  }
  finalize_shape_ratio(out);
  return out;
}

double RadialGrid::max_spacing() const {
  double h = 0.0;
  for (Index i = 0; i + 1 < nodes.size(); ++i) h = std::max(h, nodes(i + 1) - nodes(i));
  return h;
}

RadialGrid build_radial(const ParameterSet& ps, SubdomainTag tag, const RadialSpec& spec) {
  const double Rs = ps.Rs_of(tag);
  RadialGrid g;
  g.tag = tag;
  if (!spec.scaled_nodes.empty()) {
    const auto& s = spec.scaled_nodes;
    if (s.front() != 0.0 || s.back() != 1.0)
      throw ValidationError("radial node list must start at 0 and end at 1");
    for (size_t i = 0; i + 1 < s.size(); ++i)
      if (!(s[i] < s[i + 1])) throw ValidationError("radial node list must be strictly increasing");
    g.nodes.resize(static_cast<Index>(s.size()));
    for (size_t i = 0; i < s.size(); ++i) g.nodes(static_cast<Index>(i)) = s[i] * Rs;
  } else {
    if (spec.uniform_intervals <= 0) throw ValidationError("radial interval count must be positive");
    const int n = spec.uniform_intervals;
    g.nodes.resize(n + 1);
    for (int i = 0; i <= n; ++i) g.nodes(i) = Rs * static_cast<double>(i) / n;
  }
  return g;
}

RadialGrid refine_radial(const RadialGrid& grid, int levels) {
  RadialGrid out = grid;
  for (int l = 0; l < levels; ++l) {
    Vector fine(2 * out.nodes.size() - 1);
    for (Index i = 0; i + 1 < out.nodes.size(); ++i) {
      fine(2 * i) = out.nodes(i);
      fine(2 * i + 1) = 0.5 * (out.nodes(i) + out.nodes(i + 1));
    }
    fine(fine.size() - 1) = out.nodes(out.nodes.size() - 1);
    out.nodes = std::move(fine);
  }
  return out;
}

void dump_mesh(const CellMesh& mesh, std::ostream& out) {
  out.precision(17);
  out << "dfn-mesh 1\n";
  out << "dim " << mesh.dim << "\n";
  out << "vertices " << mesh.n_vertices() << "\n";
  for (Index i = 0; i < mesh.n_vertices(); ++i) {
    for (int d = 0; d < mesh.dim; ++d) out << (d ? " " : "") << mesh.vertices(i, d);
    out << "\n";
  }
  out << "elements " << mesh.n_elements() << "\n";
  const int nv = mesh.verts_per_element();
  for (const Element& el : mesh.elements) {
    for (int i = 0; i < nv; ++i) out << el.v[i] << " ";
    out << static_cast<int>(el.tag) << "\n";
  }
  out << "boundary " << mesh.boundary_facets.size() << "\n";
  const int nf = mesh.dim; // facet vertex count
  for (const BoundaryFacet& f : mesh.boundary_facets) {
    for (int i = 0; i < nf; ++i) out << f.v[i] << " ";
    out << static_cast<int>(f.tag) << "\n";
  }
  out << "interface " << mesh.interface_facets.size() << "\n";
  for (const InterfaceFacet& f : mesh.interface_facets) {
    for (int i = 0; i < nf; ++i) out << f.v[i] << " ";
    out << static_cast<int>(f.electrode) << "\n";
  }
}

CellMesh restore_mesh(std::istream& in) {
  CellMesh mesh;
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "dfn-mesh" || version != 1) throw ValidationError("not a dfn-mesh dump");
  Index count = 0;
  in >> word >> mesh.dim;
  if (word != "dim" || (mesh.dim != 1 && mesh.dim != 2)) throw ValidationError("bad mesh dim");
  in >> word >> count;
  if (word != "vertices") throw ValidationError("bad mesh dump: vertices");
  mesh.vertices.resize(count, mesh.dim);
  for (Index i = 0; i < count; ++i)
    for (int d = 0; d < mesh.dim; ++d) in >> mesh.vertices(i, d);
  in >> word >> count;
  if (word != "elements") throw ValidationError("bad mesh dump: elements");
  const int nv = mesh.verts_per_element();
  for (Index e = 0; e < count; ++e) {
    Element el;
    int tag = 0;
    for (int i = 0; i < nv; ++i) in >> el.v[i];
    in >> tag;
    el.tag = static_cast<SubdomainTag>(tag);
    mesh.elements.push_back(el);
  }
  in >> word >> count;
  if (word != "boundary") throw ValidationError("bad mesh dump: boundary");
  for (Index f = 0; f < count; ++f) {
    BoundaryFacet bf;
    int tag = 0;
    for (int i = 0; i < mesh.dim; ++i) in >> bf.v[i];
    in >> tag;
    bf.tag = static_cast<FacetTag>(tag);
    mesh.boundary_facets.push_back(bf);
  }
  in >> word >> count;
  if (word != "interface") throw ValidationError("bad mesh dump: interface");
  for (Index f = 0; f < count; ++f) {
    InterfaceFacet itf;
    int tag = 0;
    for (int i = 0; i < mesh.dim; ++i) in >> itf.v[i];
    in >> tag;
    itf.electrode = static_cast<SubdomainTag>(tag);
    mesh.interface_facets.push_back(itf);
  }
  if (!in) throw ValidationError("truncated mesh dump");
  finalize_shape_ratio(mesh);
  return mesh;
}

} // namespace dfn
