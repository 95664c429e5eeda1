#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kochfiber/geometry.hpp"
#include "kochfiber/mesh.hpp"
#include "kochfiber/solver.hpp"

namespace kochfiber {

using Json = nlohmann::json;

// Exact values: rationals as "p/q" strings, a + b sqrt3 as {"a", "b", "value"}.
Json to_json(const Rational& r);
Rational rational_from_json(const Json& j);
Json to_json(const QSqrt3& q);
QSqrt3 qsqrt3_from_json(const Json& j);
Json to_json(const ExactPoint& p);
ExactPoint point_from_json(const Json& j);

Json to_json(const DomainGeometry& g);
// Rebuilds the domain from (n, eps, multiset) and checks every stored exact coordinate against it.
DomainGeometry geometry_from_json(const Json& j);

Json to_json(const EnergyBreakdown& b);
EnergyBreakdown breakdown_from_json(const Json& j);
Json to_json(const IterationRecord& r);
Json to_json(const SolveResult& r, bool with_nodes = true);

// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);
Json read_json_file(const std::filesystem::path& path);

// %.17g, with nan/inf spelled out.
std::string format_number(double x);

struct Table {
  using Cell = std::variant<double, long long, std::string>;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);  // ConfigError on a width mismatch
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};
std::string to_csv(const Table& t);
Json to_json(const Table& t);
Table table_from_json(const Json& j);

// Writes atomically enough for reports: parent directories are created; failures throw Error.
void write_text(const std::filesystem::path& path, const std::string& content);

std::string to_off(const Mesh& m);
std::string domain_svg(const DomainGeometry& g);
std::string mesh_svg(const Mesh& m);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, bool log_y = false);

// Flat key-value file with [sections]; keys are addressed as "section.key".
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::vector<std::string> keys() const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
  // ConfigError naming the first key outside the allowed set.
  void require_known(const std::vector<std::string>& allowed) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace kochfiber
