#include "mapcover/field_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace mapcover {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

namespace {

double parse_double(const std::string& tok, const std::filesystem::path& path,
                    int line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e)
    throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                             ": bad numeric value '" + tok + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  return f;
}

}  // namespace

void write_field_csv(const std::filesystem::path& path, const ScalarField& f) {
  auto out = open_out(path);
  const Grid& g = f.grid();
  out << g.nx() << ',' << g.ny() << ',' << format_double(g.extent().x_lo) << ','
      << format_double(g.extent().x_hi) << ',' << format_double(g.extent().y_lo)
      << ',' << format_double(g.extent().y_hi) << '\n';
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (i) out << ',';
      out << format_double(f.at(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ScalarField read_field_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path.string() + ":1: missing header");
  auto head = split_csv(line);
  if (head.size() != 6)
    throw std::runtime_error(path.string() + ":1: header needs 6 fields");
  const int nx = static_cast<int>(parse_double(head[0], path, 1));
  const int ny = static_cast<int>(parse_double(head[1], path, 1));
  Grid grid(Extent{parse_double(head[2], path, 1), parse_double(head[3], path, 1),
                   parse_double(head[4], path, 1), parse_double(head[5], path, 1)},
            nx, ny);
  ScalarField f(grid);
  for (int j = 0; j < ny; ++j) {
    if (!std::getline(in, line))
      throw std::runtime_error(path.string() + ": truncated after " +
                               std::to_string(j) + " rows");
    auto toks = split_csv(line);
    if (static_cast<int>(toks.size()) != nx)
      throw std::runtime_error(path.string() + ":" + std::to_string(j + 2) +
                               ": expected " + std::to_string(nx) + " values");
    for (int i = 0; i < nx; ++i) f.at(i, j) = parse_double(toks[i], path, j + 2);
  }
  return f;
}

void write_series_csv(const std::filesystem::path& path,
                      const ObservationSeries& s, const std::string& value_name) {
  if (s.t.size() != s.value.size())
    throw std::invalid_argument("series: t/value length mismatch");
  auto out = open_out(path);
  out << "t," << value_name << '\n';
  for (std::size_t i = 0; i < s.t.size(); ++i)
    out << format_double(s.t[i]) << ',' << format_double(s.value[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ObservationSeries read_series_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path.string() + ":1: missing header");
  ObservationSeries s;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto toks = split_csv(line);
    if (toks.size() != 2)
      throw std::runtime_error(path.string() + ":" + std::to_string(n) +
                               ": expected 2 values");
    s.t.push_back(parse_double(toks[0], path, n));
    s.value.push_back(parse_double(toks[1], path, n));
  }
  return s;
}

}  // namespace mapcover
