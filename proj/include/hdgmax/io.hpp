#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "hdgmax/harness.hpp"

namespace hdgmax {

namespace io {

/// Shortest round-trip decimal form.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string num(const std::optional<real>& v) { return v ? num(*v) : std::string(); }

/// RFC 4180 quoting when the field needs it.
inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <class... T>
void row(std::ostream& out, const T&... cols) {
  bool first = true;
  ((out << (first ? "" : ",") << cols, first = false), ...);
  out << '\n';
}

} // namespace io

/// Columns of one ErrorReport row. Errors are L2(Omega) norms; rel_* divide by
/// the exact-solution norms; energy_rel is |identity residual| / (kappa^2
/// ||u_h||^2 + ||w_h||^2); solver_* come from the trace solve.
inline const char* report_csv_header() {
  return "case,convention,n,p,kappa,h,elements,faces,dofs,dofs_all_faces,err_u,err_w,rel_u,rel_w,norm_uh,norm_wh,curl_uh,div_uh,"
         "jump_t,jump_n,energy_re,energy_im,energy_rel,solver,solver_residual,solver_warning,lnz,flops,pivot_ratio,"
         "t_mesh,t_local,t_global,t_solve,t_recover,t_metrics,t_total";
}

inline void write_report_row(std::ostream& out, const ErrorReport& r) {
  using io::num;
  io::row(out, io::field(r.case_name), to_string(r.convention), r.n, r.p, num(r.kappa), num(r.h), r.elements, r.faces, r.dofs,
          r.dofs_all_faces, num(r.err_u), num(r.err_w), num(r.rel_u), num(r.rel_w), num(r.norm_uh), num(r.norm_wh), num(r.curl_uh),
          num(r.div_uh), num(r.jump_t), num(r.jump_n), num(r.energy_residual.real()), num(r.energy_residual.imag()),
          num(r.energy_relative()), r.solver.method, num(r.solver_residual), r.solver.residual_warning ? 1 : 0, num(r.solver.lnz),
          num(r.solver.flops), num(r.solver.rcond), num(r.timings.mesh), num(r.timings.local), num(r.timings.global),
          num(r.timings.solve), num(r.timings.recover), num(r.timings.metrics), num(r.timings.total()));
}

inline void write_report_csv(std::ostream& out, const ErrorReport& r) {
  out << report_csv_header() << '\n';
  write_report_row(out, r);
}

/// One row per study entry. Rates are empty on the first mesh of each
/// (kappa, p) group; failed rows keep their message in `failure`.
inline void write_study_csv(std::ostream& out, const StudyTable& t) {
  using io::num;
  out << "kappa,p,n,target_h,mesh_note,ok,h,dofs,dofs_all_faces,err_u,err_w,rel_u,rel_w,rate_u,rate_w,energy_rel,solver_residual,"
         "t_total,failure\n";
  for (const StudyRow& s : t.rows) {
    const ErrorReport& r = s.report;
    if (!s.ok) {
      io::row(out, num(s.kappa), s.p, s.n, num(s.target_h), io::field(s.mesh_note), 0, "", "", "", "", "", "", "", "", "", "", "", "",
              io::field(s.failure));
      continue;
    }
    io::row(out, num(s.kappa), s.p, s.n, num(s.target_h), io::field(s.mesh_note), 1, num(r.h), r.dofs, r.dofs_all_faces, num(r.err_u),
            num(r.err_w), num(r.rel_u), num(r.rel_w), num(s.rate_u), num(s.rate_w), num(r.energy_relative()), num(r.solver_residual),
            num(r.timings.total()), "");
  }
}

/// z, containing element, Re/Im of the first component of u_h, Re of the exact one.
inline void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples) {
  using io::num;
  out << "z,element,re_uh1,im_uh1,re_u1_exact\n";
  for (const TraceSample& t : samples)
    io::row(out, num(t.z), t.element, num(t.u_h(0).real()), num(t.u_h(0).imag()), num(t.u_exact(0).real()));
}

/// Legacy ASCII VTK unstructured grid of the broken field u_h: every element
/// gets its own four points so the discontinuity survives; point data
/// "Re_u" and "Im_u" hold u_h evaluated at the element's vertices.
inline void write_vtk(std::ostream& out, const DiscreteSolution& s, const std::string& title = "hdgmax u_h") {
  const Mesh& m = *s.mesh;
  const std::size_t ne = m.num_elements();
  out << "# vtk DataFile Version 3.0\n" << title.substr(0, 255) << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << 4 * ne << " double\n";
  std::vector<CVec3> values;
  values.reserve(4 * ne);
  for (std::size_t e = 0; e < ne; ++e)
    for (const Vec3& x : m.element_vertices(e)) {
      out << io::num(x.x()) << ' ' << io::num(x.y()) << ' ' << io::num(x.z()) << '\n';
      values.push_back(s.eval_u(e, x));
    }
  out << "CELLS " << ne << ' ' << 5 * ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) out << "4 " << 4 * e << ' ' << 4 * e + 1 << ' ' << 4 * e + 2 << ' ' << 4 * e + 3 << '\n';
  out << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) out << "10\n";
  out << "POINT_DATA " << 4 * ne << '\n';
  for (int part = 0; part < 2; ++part) {
    out << "VECTORS " << (part == 0 ? "Re_u" : "Im_u") << " double\n";
    for (const CVec3& v : values) {
      for (int a = 0; a < 3; ++a) out << (a ? " " : "") << io::num(part == 0 ? v(a).real() : v(a).imag());
      out << '\n';
    }
  }
}

} // namespace hdgmax
