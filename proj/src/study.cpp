#include "hdglab/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "hdglab/control_solver.hpp"
#include "hdglab/errors.hpp"
#include "hdglab/postprocess.hpp"
#include "hdglab/quadrature.hpp"

namespace hdglab {

const char* to_string(Problem p) {
  switch (p) {
    case Problem::example1_square: return "example1_square";
    case Problem::example1_lshape: return "example1_lshape";
    case Problem::example2_control: return "example2_control";
    case Problem::custom_manufactured: return "custom_manufactured";
  }
  return "unknown";
}

std::vector<std::string> problem_quantities(Problem p) {
  if (p == Problem::example2_control) return {"q_L2", "p_L2", "u_L2", "z_L2", "g_L2_boundary"};
  return {"q_Linf", "u_Linf", "ustar_Linf", "q_L2", "u_L2",
          "q_L2_boundary", "u_L2_boundary", "ustar_L2_boundary"};
}

void StudyConfig::validate() const {
  if (levels.empty()) fail(ErrorCode::invalid_config, "levels list is empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) fail(ErrorCode::invalid_config, "levels must be positive");
    if (i > 0 && levels[i] != 2 * levels[i - 1])
      fail(ErrorCode::invalid_config, "levels must double at each refinement");
  }
  if (degrees.empty()) fail(ErrorCode::invalid_config, "degrees list is empty");
  for (int k : degrees)
    if (k < 0 || k > 4) fail(ErrorCode::invalid_config, "degrees must lie in {0,...,4}");
  if (!(tau > 0.0)) fail(ErrorCode::invalid_config, "tau must be positive");
  if (!(gamma > 0.0)) fail(ErrorCode::invalid_config, "gamma must be positive");
  const auto available = problem_quantities(problem);
  for (const auto& n : norms)
    if (std::find(available.begin(), available.end(), n) == available.end())
      fail(ErrorCode::invalid_config, "unknown norm '" + n + "' for " + to_string(problem));
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      fail(ErrorCode::invalid_config, std::string("bad integer in ") + what + ": " + tok);
    }
  }
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    return std::stod(s);
  } catch (...) {
    fail(ErrorCode::invalid_config, std::string("bad number for ") + what + ": " + s);
  }
}

}  // namespace

void apply_override(StudyConfig& config, const std::string& key, const std::string& value) {
  if (key == "problem") {
    if (value == "example1_square") config.problem = Problem::example1_square;
    else if (value == "example1_lshape") config.problem = Problem::example1_lshape;
    else if (value == "example2_control") config.problem = Problem::example2_control;
    else if (value == "custom_manufactured") config.problem = Problem::custom_manufactured;
    else fail(ErrorCode::invalid_config, "unknown problem: " + value);
  } else if (key == "degrees" || key == "k") {
    config.degrees = parse_int_list(value, "degrees");
  } else if (key == "levels") {
    config.levels = parse_int_list(value, "levels");
  } else if (key == "tau") {
    config.tau = parse_double(value, "tau");
  } else if (key == "gamma") {
    config.gamma = parse_double(value, "gamma");
  } else if (key == "diagonal") {
    if (value == "right") config.diagonal = Diagonal::right;
    else if (value == "left") config.diagonal = Diagonal::left;
    else fail(ErrorCode::invalid_config, "diagonal must be right or left");
  } else if (key == "norms") {
    config.norms = split_list(value);
  } else if (key == "out") {
    config.out_dir = value;
  } else if (key == "svg") {
    config.svg = (value == "1" || value == "true" || value == "yes");
  } else {
    fail(ErrorCode::invalid_config, "unknown config key: " + key);
  }
}

StudyConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::invalid_config, "cannot open config file: " + path);
  StudyConfig config;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
      if (blank) continue;
      fail(ErrorCode::invalid_config, "expected key=value, got: " + line);
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

namespace {

struct ManufacturedPoisson {
  ScalarField u, f, g;
  VectorField q;
};

ManufacturedPoisson example1_fields() {
  ManufacturedPoisson m;
  m.u = [](double x, double) { return std::sin(10.0 * x); };
  m.g = m.u;
  m.f = [](double x, double) { return 100.0 * std::sin(10.0 * x); };
  m.q = [](double x, double) { return std::array<double, 2>{-10.0 * std::cos(10.0 * x), 0.0}; };
  return m;
}

ManufacturedPoisson custom_fields() {
  ManufacturedPoisson m;
  m.u = [](double x, double y) { return std::sin(3.0 * x) * std::cos(2.0 * y); };
  m.g = m.u;
  m.f = [](double x, double y) { return 13.0 * std::sin(3.0 * x) * std::cos(2.0 * y); };
  m.q = [](double x, double y) {
    return std::array<double, 2>{-3.0 * std::cos(3.0 * x) * std::cos(2.0 * y),
                                 2.0 * std::sin(3.0 * x) * std::sin(2.0 * y)};
  };
  return m;
}

ExactScalar example2_u() {
  const double pi = M_PI;
  return {
      [pi](double x, double y) { return -pi * (std::sin(pi * x) + std::sin(pi * y)); },
      [pi](double x, double y) {
        return std::array<double, 2>{-pi * pi * std::cos(pi * x), -pi * pi * std::cos(pi * y)};
      },
      [pi](double x, double y) { return pi * pi * pi * (std::sin(pi * x) + std::sin(pi * y)); }};
}

ExactScalar example2_z() {
  const double pi = M_PI;
  return {
      [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); },
      [pi](double x, double y) {
        return std::array<double, 2>{pi * std::cos(pi * x) * std::sin(pi * y),
                                     pi * std::sin(pi * x) * std::cos(pi * y)};
      },
      [pi](double x, double y) { return -2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y); }};
}

double g_l2_boundary_error(const Mesh& mesh, const ControlSolution& sol, const ControlExact& exact,
                           double gamma) {
  const ReferenceElement& ref = *sol.state.ref;
  const int nf = ref.edge_dim();
  const EdgeRule& eq = ref.edge_rule();
  const DenseMatrix& psi = ref.edge_basis_at_quad();
  double total = 0.0;
  for (std::size_t b = 0; b < mesh.boundary_faces.size(); ++b) {
    const int fidx = mesh.boundary_faces[b];
    const Face& face = mesh.faces[fidx];
    const auto& a = mesh.vertices[face.v0];
    const auto& bb = mesh.vertices[face.v1];
    for (int p = 0; p < eq.size(); ++p) {
      const double t = eq.t[p];
      const double px = a[0] + t * (bb[0] - a[0]);
      const double py = a[1] + t * (bb[1] - a[1]);
      double gh = 0.0;
      for (int j = 0; j < nf; ++j) gh += sol.g[b * nf + j] * psi(p, j);
      const double d = gh - exact_control_on_face(mesh, fidx, exact, gamma, px, py);
      total += eq.w[p] * face.length * d * d;
    }
  }
  return std::sqrt(total);
}

Mesh build_domain(Problem problem, int n, Diagonal diagonal) {
  if (problem == Problem::example1_lshape) return build_lshape(n, diagonal);
  return build_unit_square(n, diagonal);
}

std::vector<Segment> domain_boundary(Problem problem) {
  return problem == Problem::example1_lshape ? lshape_boundary_segments()
                                             : unit_square_boundary_segments();
}

LevelRecord run_poisson_level(const StudyConfig& config, int k, int n,
                              const std::vector<std::string>& quantities,
                              const std::shared_ptr<const ReferenceElement>& ref_star) {
  LevelRecord rec;
  rec.n = n;
  rec.h_over_sqrt2 = 1.0 / n;
  const ManufacturedPoisson fields =
      config.problem == Problem::custom_manufactured ? custom_fields() : example1_fields();
  const Mesh mesh = build_domain(config.problem, n, config.diagonal);

  ProblemData data;
  data.c = Coefficient::identity();
  data.f = fields.f;
  data.g = fields.g;
  data.tau = StabilizationSpec{config.tau};
  data.degree = k;
  FieldSolution sol = solve_poisson(mesh, data);
  postprocess(mesh, ref_star, sol, data.c);

  const std::vector<int> boundary = mark_interface(mesh, domain_boundary(config.problem));
  std::map<std::string, double> values;
  values["q_Linf"] = linf_error(mesh, qx_view(sol), qy_view(sol), fields.q);
  values["u_Linf"] = linf_error(mesh, u_view(sol), fields.u);
  values["ustar_Linf"] = linf_error(mesh, ustar_view(sol), fields.u);
  values["q_L2"] = l2_error(mesh, qx_view(sol), qy_view(sol), fields.q);
  values["u_L2"] = l2_error(mesh, u_view(sol), fields.u);
  values["q_L2_boundary"] = l2_error_interface(mesh, boundary, qx_view(sol), qy_view(sol), fields.q);
  values["u_L2_boundary"] = l2_error_interface(mesh, boundary, u_view(sol), fields.u);
  values["ustar_L2_boundary"] = l2_error_interface(mesh, boundary, ustar_view(sol), fields.u);
  for (const auto& q : quantities) rec.errors.push_back(values.at(q));
  return rec;
}

LevelRecord run_control_level(const StudyConfig& config, int k, int n,
                              const std::vector<std::string>& quantities) {
  LevelRecord rec;
  rec.n = n;
  rec.h_over_sqrt2 = 1.0 / n;
  const Mesh mesh = build_unit_square(n, config.diagonal);
  ControlProblemData data = manufactured_control_data(example2_u(), example2_z(), config.gamma);
  data.tau = StabilizationSpec{config.tau};
  data.degree = k;
  const ControlSolution sol = solve_control(mesh, data);
  const ControlExact& exact = *data.exact;

  const VectorField q_exact = [&exact](double x, double y) {
    const auto g = exact.grad_u(x, y);
    return std::array<double, 2>{-g[0], -g[1]};
  };
  const VectorField p_exact = [&exact](double x, double y) {
    const auto g = exact.grad_z(x, y);
    return std::array<double, 2>{-g[0], -g[1]};
  };

  std::map<std::string, double> values;
  values["q_L2"] = l2_error(mesh, qx_view(sol.state), qy_view(sol.state), q_exact);
  values["p_L2"] = l2_error(mesh, qx_view(sol.adjoint), qy_view(sol.adjoint), p_exact);
  values["u_L2"] = l2_error(mesh, u_view(sol.state), exact.u);
  values["z_L2"] = l2_error(mesh, u_view(sol.adjoint), exact.z);
  values["g_L2_boundary"] = g_l2_boundary_error(mesh, sol, exact, config.gamma);
  for (const auto& q : quantities) rec.errors.push_back(values.at(q));
  return rec;
}

std::string format_error(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4E", v);
  return buf;
}

std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const ErrorReport& report) {
  std::ostringstream out;
  out << "n,h_over_sqrt2";
  for (const auto& q : report.quantities) out << "," << q << "_error," << q << "_rate";
  out << "\n";
  for (std::size_t l = 0; l < report.levels.size(); ++l) {
    const LevelRecord& rec = report.levels[l];
    out << rec.n << "," << format_error(rec.h_over_sqrt2);
    const bool failed = !rec.failure.empty();
    const bool prev_ok = l > 0 && report.levels[l - 1].failure.empty();
    for (std::size_t q = 0; q < report.quantities.size(); ++q) {
      if (failed) {
        out << "," << rec.failure << "," << rec.failure;
        continue;
      }
      out << "," << format_error(rec.errors[q]);
      if (l == 0 || !prev_ok) {
        out << ",-";
      } else {
        out << "," << format_rate(std::log2(report.levels[l - 1].errors[q] / rec.errors[q]));
      }
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::invalid_parameter, "cannot open CSV: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cells.push_back(cur);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_convergence_svg(const ErrorReport& report, int degree, const std::string& path) {
  // Log-log polylines, one per quantity, with k+1 and k+2 slope guides.
  std::vector<std::pair<double, double>> extent{{1e300, -1e300}, {1e300, -1e300}};  // x then y
  std::vector<std::vector<std::array<double, 2>>> lines(report.quantities.size());
  for (const auto& rec : report.levels) {
    if (!rec.failure.empty()) continue;
    const double lx = std::log10(rec.h_over_sqrt2);
    for (std::size_t q = 0; q < report.quantities.size(); ++q) {
      if (!(rec.errors[q] > 0.0)) continue;
      const double ly = std::log10(rec.errors[q]);
      lines[q].push_back({lx, ly});
      extent[0] = {std::min(extent[0].first, lx), std::max(extent[0].second, lx)};
      extent[1] = {std::min(extent[1].first, ly), std::max(extent[1].second, ly)};
    }
  }
  const double W = 720, H = 540, ml = 80, mr = 160, mt = 30, mb = 60;
  auto sx = [&](double lx) {
    const double lo = extent[0].first, hi = extent[0].second;
    return ml + (W - ml - mr) * (hi == lo ? 0.5 : (lx - lo) / (hi - lo));
  };
  auto sy = [&](double ly) {
    const double lo = extent[1].first, hi = extent[1].second;
    return H - mb - (H - mt - mb) * (hi == lo ? 0.5 : (ly - lo) / (hi - lo));
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 20
      << "\" text-anchor=\"middle\" font-size=\"14\">log10 h/sqrt(2)</text>\n";
  svg << "<text x=\"20\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 "
      << (mt + H - mb) / 2 << ")\">log10 error</text>\n";
  for (std::size_t q = 0; q < lines.size(); ++q) {
    if (lines[q].empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << palette[q % 8] << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : lines[q]) svg << sx(p[0]) << "," << sy(p[1]) << " ";
    svg << "\"/>\n";
    for (const auto& p : lines[q])
      svg << "<circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"3\" fill=\""
          << palette[q % 8] << "\"/>\n";
    svg << "<text x=\"" << W - mr + 8 << "\" y=\"" << sy(lines[q].back()[1])
        << "\" font-size=\"12\" fill=\"" << palette[q % 8] << "\">" << report.quantities[q]
        << "</text>\n";
  }
  // Reference slopes anchored at the coarsest level of the first populated line.
  for (int extra = 1; extra <= 2; ++extra) {
    const double slope = degree + extra;
    for (const auto& line : lines) {
      if (line.size() < 2) continue;
      const auto& anchor = line.front();
      const double x1 = extent[0].first;
      const double y1 = anchor[1] + slope * (x1 - anchor[0]) - 0.3;
      svg << "<line x1=\"" << sx(anchor[0]) << "\" y1=\"" << sy(anchor[1] - 0.3) << "\" x2=\""
          << sx(x1) << "\" y2=\"" << sy(y1)
          << "\" stroke=\"#444\" stroke-dasharray=\"6 4\" stroke-width=\"1\"/>\n";
      svg << "<text x=\"" << sx(x1) + 4 << "\" y=\"" << sy(y1) - 4
          << "\" font-size=\"11\" fill=\"#444\">slope " << slope << "</text>\n";
      break;
    }
  }
  svg << "</svg>\n";
  std::ofstream out(path);
  out << svg.str();
}

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  StudyResult result;
  const std::vector<std::string> quantities =
      config.norms.empty() ? problem_quantities(config.problem) : config.norms;

  for (int k : config.degrees) {
    ErrorReport report;
    report.quantities = quantities;
    std::shared_ptr<const ReferenceElement> ref_star;
    if (config.problem != Problem::example2_control)
      ref_star = std::make_shared<ReferenceElement>(k + 1, 2 * (k + 1) + 3);
    for (int n : config.levels) {
      LevelRecord rec;
      try {
        rec = config.problem == Problem::example2_control
                  ? run_control_level(config, k, n, quantities)
                  : run_poisson_level(config, k, n, quantities, ref_star);
      } catch (const Error& e) {
        rec.n = n;
        rec.h_over_sqrt2 = 1.0 / n;
        rec.failure = std::string("FAILED:") + to_string(e.code());
        result.ok = false;
      }
      report.levels.push_back(std::move(rec));
    }
    const std::string base = std::string(to_string(config.problem)) + "_k" + std::to_string(k);
    const std::string csv_path = config.out_dir + "/" + base + ".csv";
    std::ofstream(csv_path) << report_to_csv(report);
    result.csv_paths.push_back(csv_path);
    if (config.svg) write_convergence_svg(report, k, config.out_dir + "/" + base + ".svg");
    result.reports.push_back(std::move(report));
  }
  return result;
}

namespace {

bool check(std::ostream& out, const std::string& name, bool ok, double value = 0.0) {
  out << (ok ? "[ok]   " : "[FAIL] ") << name;
  if (value != 0.0) out << "  (" << value << ")";
  out << "\n";
  return ok;
}

}  // namespace

int run_selftest(std::ostream& out) {
  int failures = 0;
  auto record = [&](const std::string& name, bool ok, double v = 0.0) {
    if (!check(out, name, ok, v)) ++failures;
  };

  // Quadrature exactness against the closed-form monomial integrals.
  {
    double worst = 0.0;
    const TriangleRule rule = triangle_quadrature(7);
    for (int a = 0; a + 0 <= 7; ++a)
      for (int b = 0; a + b <= 7; ++b) {
        double s = 0.0;
        for (int p = 0; p < rule.size(); ++p)
          s += rule.w[p] * std::pow(rule.x[p], a) * std::pow(rule.y[p], b);
        worst = std::max(worst, std::abs(s - triangle_monomial_integral(a, b)));
      }
    record("triangle quadrature exact to degree 7", worst < 1e-13, worst);
  }

  // Mesh invariants on both domains.
  for (const bool lshape : {false, true}) {
    const Mesh mesh = lshape ? build_lshape(4) : build_unit_square(4);
    double area = 0.0, perim = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) area += mesh.element_area(e);
    for (int f : mesh.boundary_faces) perim += mesh.faces[f].length;
    double closure = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      double cx = 0.0, cy = 0.0;
      for (int le = 0; le < 3; ++le) {
        const auto n = mesh.outward_normal(e, le);
        const double len = mesh.faces[mesh.element_faces[e][le]].length;
        cx += len * n[0];
        cy += len * n[1];
      }
      closure = std::max(closure, std::hypot(cx, cy));
    }
    const double area_ref = lshape ? 0.75 : 1.0;
    const std::string tag = lshape ? "lshape" : "square";
    record("mesh area (" + tag + ")", std::abs(area - area_ref) < 1e-12 * area_ref);
    record("mesh perimeter (" + tag + ")", std::abs(perim - 4.0) < 1e-12 * 4.0);
    record("element face closure (" + tag + ")", closure < 1e-12);
  }

  // Basis orthonormality and gradient consistency.
  {
    const ReferenceElement ref(3);
    const TriangleRule& tq = ref.triangle_rule();
    const DenseMatrix& B = ref.basis_at_quad();
    double worst = 0.0;
    for (int i = 0; i < ref.dim(); ++i)
      for (int j = 0; j < ref.dim(); ++j) {
        double s = 0.0;
        for (int p = 0; p < tq.size(); ++p) s += tq.w[p] * B(p, i) * B(p, j);
        worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    record("triangle basis Gram is identity (k=3)", worst < 1e-12, worst);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(0.05, 0.4);
    double gworst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const double x = unif(rng), y = unif(rng);
      const double h = 1e-6;
      const std::vector<double> xs{x, x + h, x - h, x, x};
      const std::vector<double> ys{y, y, y, y + h, y - h};
      const DenseMatrix v = ref.eval_basis(xs, ys);
      const auto [gx, gy] = ref.eval_grad_basis(std::vector<double>{x}, std::vector<double>{y});
      for (int i = 0; i < ref.dim(); ++i) {
        const double fdx = (v(1, i) - v(2, i)) / (2 * h);
        const double fdy = (v(3, i) - v(4, i)) / (2 * h);
        const double scale = std::max(1.0, std::abs(gx(0, i)) + std::abs(gy(0, i)));
        gworst = std::max(gworst, std::abs(fdx - gx(0, i)) / scale);
        gworst = std::max(gworst, std::abs(fdy - gy(0, i)) / scale);
      }
    }
    record("basis gradients match finite differences", gworst < 1e-5, gworst);
  }

  // HDG projection reproduces polynomial pairs.
  {
    const Mesh mesh = build_unit_square(2);
    const ReferenceElement ref(2);
    const VectorField q = [](double x, double y) {
      return std::array<double, 2>{x * x - y, 2.0 * x * y};
    };
    const ScalarField u = [](double x, double y) { return 1.0 + x - y + x * y; };
    double worst = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const HdgProjection proj = hdg_project(mesh, e, ref, q, u, 1.0);
      const auto verts = mesh.triangle_vertices(e);
      const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
      const DenseMatrix& B = ref.basis_at_quad();
      const TriangleRule& tq = ref.triangle_rule();
      for (int p = 0; p < tq.size(); ++p) {
        double qx = 0.0, qy = 0.0, uv = 0.0;
        for (int i = 0; i < ref.dim(); ++i) {
          qx += proj.q[i] * B(p, i);
          qy += proj.q[ref.dim() + i] * B(p, i);
          uv += proj.u[i] * B(p, i);
        }
        const auto xy = map.map(tq.x[p], tq.y[p]);
        const auto qe = q(xy[0], xy[1]);
        worst = std::max({worst, std::abs(qx - qe[0]), std::abs(qy - qe[1]),
                          std::abs(uv - u(xy[0], xy[1]))});
      }
    }
    record("HDG projection reproduces P^k pairs (k=2)", worst < 1e-12, worst);
  }

  // Solver polynomial exactness, conservation, and flux continuity.
  {
    const Mesh mesh = build_unit_square(4);
    ProblemData data;
    data.c = Coefficient::identity();
    data.f = [](double, double) { return 0.0; };
    data.g = [](double x, double y) { return x + 2.0 * y; };
    data.degree = 1;
    const FieldSolution sol = solve_poisson(mesh, data);
    const double e_u = linf_error(mesh, u_view(sol), data.g);
    const double e_q = linf_error(mesh, qx_view(sol), qy_view(sol), [](double, double) {
      return std::array<double, 2>{-1.0, -2.0};
    });
    record("solver reproduces linear solution (k=1)", e_u < 1e-10 && e_q < 1e-10,
           std::max(e_u, e_q));
    record("local conservation", max_local_conservation_residual(sol, data.f) < 1e-10);
    record("interior flux continuity", max_flux_continuity_residual(sol) < 1e-9);
  }

  // Postprocessing: exact for a quadratic given the exact flux and element
  // means, and mean preservation on a generic solve.
  {
    const Mesh mesh = build_unit_square(3);
    const ScalarField u_exact = [](double x, double y) { return x * x + y * y; };
    FieldSolution sol;
    sol.mesh = &mesh;
    sol.ref = std::make_shared<ReferenceElement>(1);
    sol.degree = 1;
    const int m = sol.m();
    sol.u.assign(static_cast<std::size_t>(mesh.n_elements()) * m, 0.0);
    sol.q.assign(static_cast<std::size_t>(mesh.n_elements()) * 2 * m, 0.0);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const auto uc = l2_project_element(u_exact, mesh, e, *sol.ref);
      const auto qx = l2_project_element([](double x, double) { return -2.0 * x; }, mesh, e, *sol.ref);
      const auto qy = l2_project_element([](double, double y) { return -2.0 * y; }, mesh, e, *sol.ref);
      std::copy(uc.begin(), uc.end(), sol.u.begin() + static_cast<std::size_t>(e) * m);
      std::copy(qx.begin(), qx.end(), sol.q.begin() + static_cast<std::size_t>(e) * 2 * m);
      std::copy(qy.begin(), qy.end(), sol.q.begin() + static_cast<std::size_t>(e) * 2 * m + m);
    }
    postprocess(mesh, nullptr, sol, Coefficient::identity());
    const double e_star = linf_error(mesh, ustar_view(sol), u_exact);
    record("postprocessed quadratic is exact given exact flux (k=1)", e_star < 1e-9, e_star);

    ProblemData data;
    data.c = Coefficient::identity();
    data.f = [](double, double) { return -4.0; };
    data.g = u_exact;
    data.degree = 1;
    sol = solve_poisson(mesh, data);
    postprocess(mesh, nullptr, sol, data.c);

    const ReferenceElement& rs = *sol.ref_star;
    const ReferenceElement& rk = *sol.ref;
    double worst = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const auto verts = mesh.triangle_vertices(e);
      const AffineMap map = AffineMap::from_triangle(verts[0], verts[1], verts[2]);
      const TriangleRule& tq = rs.triangle_rule();
      const DenseMatrix bk = rk.eval_basis(tq.x, tq.y);
      double mean = 0.0;
      for (int p = 0; p < tq.size(); ++p) {
        double us = 0.0, uh = 0.0;
        for (int i = 0; i < rs.dim(); ++i) us += sol.ustar_elem(e)[i] * rs.basis_at_quad()(p, i);
        for (int i = 0; i < rk.dim(); ++i) uh += sol.u_elem(e)[i] * bk(p, i);
        mean += tq.w[p] * map.det * (us - uh);
      }
      worst = std::max(worst, std::abs(mean));
    }
    record("postprocess preserves element means", worst < 1e-12, worst);
  }

  // Control problem sanity: zero data yields zero control; the optimality
  // residual is tight on manufactured data.
  {
    const Mesh mesh = build_unit_square(4);
    ControlProblemData data;
    data.f = [](double, double) { return 0.0; };
    data.u_d = [](double, double) { return 0.0; };
    data.gamma = 1.0;
    data.degree = 1;
    const ControlSolution sol = solve_control(mesh, data);
    double gmax = 0.0;
    for (double v : sol.g) gmax = std::max(gmax, std::abs(v));
    record("zero-data control is zero", gmax < 1e-10, gmax);

    ControlProblemData ex2 = manufactured_control_data(example2_u(), example2_z(), 1.0);
    ex2.degree = 1;
    const ControlSolution csol = solve_control(mesh, ex2);
    record("control optimality residual", csol.optimality_residual < 1e-9,
           csol.optimality_residual);
  }

  out << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures;
}

}  // namespace hdglab
