#include "otflow/csv_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace otflow {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_comma(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || errno == ERANGE) fail(path, line, "bad number '" + s + "'");
  while (*end == ' ' || *end == '\r') ++end;
  if (*end != '\0') fail(path, line, "trailing characters in '" + s + "'");
  return v;
}

long parse_int(const std::string& s, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || errno == ERANGE) fail(path, line, "bad integer '" + s + "'");
  while (*end == ' ' || *end == '\r') ++end;
  if (*end != '\0') fail(path, line, "trailing characters in '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed on " + path);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& mu) {
  std::ostringstream out;
  for (int d = 0; d < mu.dim(); ++d) out << "x" << d << ",";
  out << "w\n";
  for (int i = 0; i < mu.size(); ++i) {
    const Eigen::VectorXd& x = mu.atom(i);
    for (int d = 0; d < mu.dim(); ++d) out << format_double(x[d]) << ",";
    out << format_double(mu.weight(i)) << "\n";
  }
  write_text(path, out.str());
}

DiscreteMeasure read_measure_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  const std::vector<std::string> header = split_comma(lines[0]);
  if (header.size() < 2 || header.back() != "w")
    fail(path, 1, "expected header x0,...,w");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int d = 0; d < dim; ++d)
    if (header[static_cast<std::size_t>(d)] != "x" + std::to_string(d))
      fail(path, 1, "expected header x0,...,w");

  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    const std::vector<std::string> cells = split_comma(lines[l]);
    if (static_cast<int>(cells.size()) != dim + 1)
      fail(path, l + 1, "expected " + std::to_string(dim + 1) + " columns");
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d)
      x[d] = parse_double(cells[static_cast<std::size_t>(d)], path, l + 1);
    atoms.push_back(std::move(x));
    weights.push_back(parse_double(cells.back(), path, l + 1));
  }
  if (atoms.empty()) throw std::runtime_error(path + ": no atoms");
  return DiscreteMeasure(std::move(atoms), std::move(weights));
}

void write_plan_csv(const std::string& path, const CouplingPlan& plan) {
  std::ostringstream out;
  out << "i,j,mass\n";
  for (const PlanEntry& p : plan.entries())
    out << p.i << "," << p.j << "," << format_double(p.mass) << "\n";
  write_text(path, out.str());
}

CouplingPlan read_plan_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  if (lines[0] != "i,j,mass") fail(path, 1, "expected header i,j,mass");
  std::vector<PlanEntry> entries;
  int n1 = 0, n2 = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    const std::vector<std::string> cells = split_comma(lines[l]);
    if (cells.size() != 3) fail(path, l + 1, "expected 3 columns");
    PlanEntry p;
    p.i = static_cast<int>(parse_int(cells[0], path, l + 1));
    p.j = static_cast<int>(parse_int(cells[1], path, l + 1));
    p.mass = parse_double(cells[2], path, l + 1);
    n1 = std::max(n1, p.i + 1);
    n2 = std::max(n2, p.j + 1);
    entries.push_back(p);
  }
  if (entries.empty()) throw std::runtime_error(path + ": no entries");
  return CouplingPlan(n1, n2, std::move(entries));
}

}  // namespace otflow
