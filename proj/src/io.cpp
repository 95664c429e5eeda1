#include "kochfiber/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace kochfiber {

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw ConfigError("field '" + field + "': " + what);
}

const Json& member(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) bad_field(key, "missing");
  return j.at(key);
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Json polygon_json(const std::vector<ExactPoint>& poly) {
  Json a = Json::array();
  for (const auto& p : poly) a.push_back(to_json(p));
  return a;
}

// Outer triangle bounds in model coordinates.
constexpr double kXmin = -0.5, kXmax = 1.5, kYmin = -0.8660254037844386, kYmax = 0.8660254037844386;

struct Frame {
  double scale = 400.0;
  double pad = 10.0;
  double sx(double x) const { return pad + (x - kXmin) * scale; }
  double sy(double y) const { return pad + (kYmax - y) * scale; }
  double width() const { return 2 * pad + (kXmax - kXmin) * scale; }
  double height() const { return 2 * pad + (kYmax - kYmin) * scale; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string svg_header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " +
         fmt(w) + " " + fmt(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

Json to_json(const Rational& r) { return r.str(); }

Rational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (!j.is_string()) throw ConfigError("rational must be a string \"p/q\"");
  try {
    return Rational::parse(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError("bad rational '" + j.get<std::string>() + "': " + e.what());
  }
}

Json to_json(const QSqrt3& q) { return Json{{"a", to_json(q.a())}, {"b", to_json(q.b())}, {"value", q.to_double()}}; }

QSqrt3 qsqrt3_from_json(const Json& j) {
  return QSqrt3(rational_from_json(member(j, "a")), rational_from_json(member(j, "b")));
}

Json to_json(const ExactPoint& p) { return Json::array({to_json(p.x), to_json(p.y)}); }

ExactPoint point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("point must be a pair");
  return {qsqrt3_from_json(j[0]), qsqrt3_from_json(j[1])};
}

Json to_json(const DomainGeometry& g) {
  Json j;
  j["n"] = g.n;
  j["eps"] = to_json(g.eps);
  j["multiset"] = g.multiset;
  j["curve"] = polygon_json(g.curve.vertices);
  j["outer_box"] = polygon_json({g.outer_box.begin(), g.outer_box.end()});
  Json strips = Json::array();
  for (const auto& s : g.strips) {
    strips.push_back({{"start", to_json(s.start)},
                      {"end", to_json(s.end)},
                      {"exterior", s.exterior},
                      {"multiplicity", s.multiplicity},
                      {"first_cell", s.first_cell.str()},
                      {"inner", polygon_json(s.inner_trapezoid)},
                      {"outer", polygon_json(s.outer_trapezoid)}});
  }
  j["strips"] = std::move(strips);
  Json patches = Json::array();
  for (const auto& p : g.patches) {
    patches.push_back({{"cell", p.cell.str()},
                       {"side", p.side},
                       {"band", p.band == Band::Inner ? "inner" : "annulus"},
                       {"strip", p.strip},
                       {"polygon", polygon_json(p.polygon)}});
  }
  j["patches"] = std::move(patches);
  j["areas"] = {{"omega_n", to_json(g.area_omega_n())},
                {"inner_fibers", to_json(g.area_inner_fibers())},
                {"outer_fibers", to_json(g.area_outer_fibers())},
                {"domain", to_json(g.area_domain())}};
  return j;
}

DomainGeometry geometry_from_json(const Json& j) {
  const int n = member(j, "n").get<int>();
  const QSqrt3 eps = qsqrt3_from_json(member(j, "eps"));
  BuildOptions opts;
  opts.multiset = member(j, "multiset").get<bool>();
  DomainGeometry g = build_domain(n, eps, opts);
  const auto check_poly = [](const Json& a, const std::vector<ExactPoint>& ref, const std::string& field) {
    if (!a.is_array() || a.size() != ref.size()) bad_field(field, "size mismatch");
    for (std::size_t k = 0; k < ref.size(); ++k) {
      if (!(point_from_json(a[k]) == ref[k])) bad_field(field + "[" + std::to_string(k) + "]", "coordinate mismatch");
    }
  };
  check_poly(member(j, "curve"), g.curve.vertices, "curve");
  const Json& strips = member(j, "strips");
  if (strips.size() != g.strips.size()) bad_field("strips", "count mismatch");
  for (std::size_t k = 0; k < g.strips.size(); ++k) {
    const std::string f = "strips[" + std::to_string(k) + "]";
    if (!(point_from_json(member(strips[k], "start")) == g.strips[k].start) ||
        !(point_from_json(member(strips[k], "end")) == g.strips[k].end)) {
      bad_field(f, "endpoint mismatch");
    }
    check_poly(member(strips[k], "inner"), g.strips[k].inner_trapezoid, f + ".inner");
    check_poly(member(strips[k], "outer"), g.strips[k].outer_trapezoid, f + ".outer");
  }
  const Json& patches = member(j, "patches");
  if (patches.size() != g.patches.size()) bad_field("patches", "count mismatch");
  for (std::size_t k = 0; k < g.patches.size(); ++k) {
    check_poly(member(patches[k], "polygon"), g.patches[k].polygon, "patches[" + std::to_string(k) + "].polygon");
  }
  return g;
}

Json to_json(const EnergyBreakdown& b) {
  return {{"bulk_mass", b.bulk_mass},
          {"annulus_mass", b.annulus_mass},
          {"fiber_mass", b.fiber_mass},
          {"lp_mass", b.lp_mass},
          {"bulk_dirichlet", b.bulk_dirichlet},
          {"annulus_dirichlet", b.annulus_dirichlet},
          {"fiber_weighted", b.fiber_weighted},
          {"graph_energy", b.graph_energy},
          {"total", b.total}};
}

EnergyBreakdown breakdown_from_json(const Json& j) {
  EnergyBreakdown b;
  b.bulk_mass = member(j, "bulk_mass").get<double>();
  b.annulus_mass = member(j, "annulus_mass").get<double>();
  b.fiber_mass = member(j, "fiber_mass").get<double>();
  b.lp_mass = member(j, "lp_mass").get<double>();
  b.bulk_dirichlet = member(j, "bulk_dirichlet").get<double>();
  b.annulus_dirichlet = member(j, "annulus_dirichlet").get<double>();
  b.fiber_weighted = member(j, "fiber_weighted").get<double>();
  b.graph_energy = member(j, "graph_energy").get<double>();
  b.total = member(j, "total").get<double>();
  return b;
}

Json to_json(const IterationRecord& r) {
  return {{"stage", r.stage}, {"eta", r.eta},           {"iteration", r.iteration},
          {"functional", r.functional}, {"residual", r.residual}, {"step", r.step}};
}

Json to_json(const SolveResult& r, bool with_nodes) {
  Json j;
  j["kind"] = r.kind;
  j["level"] = r.level;
  j["eps"] = r.eps;
  j["p"] = r.p;
  j["converged"] = r.converged;
  j["residual"] = r.residual;
  j["functional"] = r.functional;
  j["breakdown"] = to_json(r.breakdown);
  Json trace = Json::array();
  for (const auto& t : r.trace) trace.push_back(to_json(t));
  j["iterations"] = std::move(trace);
  const Mesh& m = r.problem->mesh();
  char id[24];
  std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(m.id()));
  j["mesh"] = {{"id", id}, {"nodes", m.num_nodes()}, {"elements", m.num_elements()}};
  j["values"] = std::vector<double>(r.solution.values.data(), r.solution.values.data() + r.solution.values.size());
  if (with_nodes) {
    Json xy = Json::array();
    for (const auto& q : m.nodes) xy.push_back({q.x(), q.y()});
    j["nodes"] = std::move(xy);
  }
  return j;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw ConfigError("row has " + std::to_string(row.size()) + " cells, table has " + std::to_string(columns.size()) +
                      " columns");
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) bad_field(name, "no such column");
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, const std::string& name) const {
  const Cell& c = rows.at(row).at(column(name));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
  bad_field(name, "not numeric");
}

std::string to_csv(const Table& t) {
  std::ostringstream os;
  const auto cell = [](const Table::Cell& c) -> std::string {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << cell(r[k]);
    os << "\n";
  }
  return os.str();
}

Json to_json(const Table& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json row = Json::array();
    for (const auto& c : r) std::visit([&](const auto& v) { row.push_back(v); }, c);
    rows.push_back(std::move(row));
  }
  return {{"columns", t.columns}, {"rows", std::move(rows)}};
}

Table table_from_json(const Json& j) {
  Table t;
  t.columns = member(j, "columns").get<std::vector<std::string>>();
  for (const auto& r : member(j, "rows")) {
    std::vector<Table::Cell> row;
    for (const auto& c : r) {
      if (c.is_number_integer()) row.emplace_back(c.get<long long>());
      else if (c.is_number()) row.emplace_back(c.get<double>());
      else if (c.is_null()) row.emplace_back(std::nan(""));
      else row.emplace_back(c.get<std::string>());
    }
    t.add_row(std::move(row));
  }
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

std::string to_off(const Mesh& m) {
  std::ostringstream os;
  os << "OFF\n" << m.num_nodes() << " " << m.num_elements() << " 0\n";
  for (const auto& q : m.nodes) os << format_number(q.x()) << " " << format_number(q.y()) << " 0\n";
  for (const auto& t : m.tris) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  return os.str();
}

std::string domain_svg(const DomainGeometry& g) {
  const Frame f;
  std::ostringstream os;
  os << svg_header(f.width(), f.height());
  const auto path = [&](const std::vector<ExactPoint>& poly, const std::string& style) {
    os << "<polygon points=\"";
    for (const auto& p : poly) {
      const Eigen::Vector2d q = p.to_vec();
      os << fmt(f.sx(q.x())) << "," << fmt(f.sy(q.y())) << " ";
    }
    os << "\" " << style << "/>\n";
  };
  path({g.outer_box.begin(), g.outer_box.end()}, "fill=\"none\" stroke=\"#999\" stroke-width=\"0.5\"");
  path(g.curve.vertices, "fill=\"#eef3fb\" stroke=\"none\"");
  for (const auto& p : g.patches) {
    path(p.polygon, p.band == Band::Inner ? "fill=\"#d95f02\" fill-opacity=\"0.8\" stroke=\"none\""
                                          : "fill=\"#7570b3\" fill-opacity=\"0.5\" stroke=\"none\"");
  }
  path(g.curve.vertices, "fill=\"none\" stroke=\"black\" stroke-width=\"0.6\"");
  os << "</svg>\n";
  return os.str();
}

std::string mesh_svg(const Mesh& m) {
  const Frame f;
  std::ostringstream os;
  os << svg_header(f.width(), f.height());
  const auto color = [](Region r) {
    switch (r) {
      case Region::InnerFiber: return "#fdd0a2";
      case Region::Annulus: return "#dadaeb";
      case Region::Bulk: return "#f0f0f0";
      default: return "white";
    }
  };
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto& t = m.tris[e];
    os << "<polygon points=\"";
    for (int k = 0; k < 3; ++k) os << fmt(f.sx(m.nodes[t[k]].x())) << "," << fmt(f.sy(m.nodes[t[k]].y())) << " ";
    os << "\" fill=\"" << color(e < m.region.size() ? m.region[e] : Region::Bulk)
       << "\" stroke=\"#555\" stroke-width=\"0.1\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, bool log_y) {
  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  const double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  const auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.y[k]) || (log_y && s.y[k] <= 0.0)) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  std::ostringstream os;
  os << svg_header(W, H);
  os << "<text x=\"" << fmt(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  const auto label = [&](double x, double y, const std::string& s, const char* anchor) {
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor << "\" font-size=\"11\">"
       << escape_xml(s) << "</text>\n";
  };
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x0);
  label(L, H - B + 15, buf, "middle");
  std::snprintf(buf, sizeof buf, "%g", x1);
  label(W - R, H - B + 15, buf, "middle");
  std::snprintf(buf, sizeof buf, "%.3g", log_y ? std::pow(10.0, y0) : y0);
  label(L - 5, H - B, buf, "end");
  std::snprintf(buf, sizeof buf, "%.3g", log_y ? std::pow(10.0, y1) : y1);
  label(L - 5, T + 4, buf, "end");
  label((L + W - R) / 2, H - 12, xlabel, "middle");
  label(14, T - 10, ylabel + (log_y ? " (log)" : ""), "start");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = palette[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size() && k < series[s].y.size(); ++k) {
      if (!std::isfinite(series[s].y[k]) || (log_y && series[s].y[k] <= 0.0)) continue;
      os << fmt(px(series[s].x[k])) << "," << fmt(py(series[s].y[k])) << " ";
    }
    os << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(s);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << fmt(ly) << "\" x2=\"" << W - R + 30 << "\" y2=\"" << fmt(ly)
       << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    label(W - R + 35, ly + 4, series[s].label, "start");
  }
  os << "</svg>\n";
  return os.str();
}

Config Config::parse(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Config c;
  c.origin_ = origin;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      c.values_[name] = trim(node.data());
    } else {
      for (const auto& [key, leaf] : node) c.values_[name + "." + key] = trim(leaf.data());
    }
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> k;
  for (const auto& kv : values_) k.push_back(kv.first);
  return k;
}

void Config::fail(const std::string& key, const std::string& message) const {
  throw ConfigError(origin_ + ": field '" + key + "': " + message);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = values_.at(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected a number, got '" + s + "'");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = values_.at(key);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = values_.at(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(key, "expected a boolean, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
  return has(key) ? split_list(values_.at(key)) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& s : split_list(values_.at(key))) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected numbers, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (const auto& s : split_list(values_.at(key))) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected integers, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(key, "unknown key");
  }
}

}  // namespace kochfiber
