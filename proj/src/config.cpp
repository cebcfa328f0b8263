#include "mapcover/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mapcover/field_io.hpp"

namespace mapcover {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

std::string trim(std::string_view s) {
  const char* ws = " \t";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(ws);
  return std::string(s.substr(a, b - a + 1));
}

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct RawSection {
  int line = 0;  // of the [header]
  std::map<std::string, Entry> kv;
};

// Typed access to one section's key=value pairs. Every key must be consumed;
// finish() reports leftovers as unknown keys at their own line.
class Reader {
 public:
  Reader(RawSection* s, std::string name) : s_(s), name_(std::move(name)) {}

  bool present() const { return s_ != nullptr; }
  int section_line() const { return s_ ? s_->line : 0; }

  Entry* find(const std::string& key) {
    if (!s_) return nullptr;
    auto it = s_->kv.find(key);
    if (it == s_->kv.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  std::string str(const std::string& key) {
    Entry* e = find(key);
    if (!e)
      fail(section_line(), "[" + name_ + "] is missing required key '" + key + "'");
    return e->value;
  }
  std::string str_or(const std::string& key, std::string def) {
    Entry* e = find(key);
    return e ? e->value : std::move(def);
  }

  double num(const std::string& key) { return to_num(str(key), line(key)); }
  double num_or(const std::string& key, double def) {
    Entry* e = find(key);
    return e ? to_num(e->value, e->line) : def;
  }

  int integer(const std::string& key) { return to_int(str(key), line(key)); }
  int integer_or(const std::string& key, int def) {
    Entry* e = find(key);
    return e ? to_int(e->value, e->line) : def;
  }

  std::uint64_t u64_or(const std::string& key, std::uint64_t def) {
    Entry* e = find(key);
    if (!e) return def;
    std::uint64_t v = 0;
    if (!full_parse(e->value, v))
      fail(e->line, "expected an unsigned integer, got '" + e->value + "'");
    return v;
  }

  bool flag_or(const std::string& key, bool def) {
    Entry* e = find(key);
    if (!e) return def;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    fail(e->line, "expected true or false, got '" + e->value + "'");
  }

  int line(const std::string& key) const {
    auto it = s_->kv.find(key);
    return it == s_->kv.end() ? section_line() : it->second.line;
  }

  void finish() {
    if (!s_) return;
    for (const auto& [key, e] : s_->kv)
      if (!e.used) fail(e.line, "unknown key '" + key + "' in [" + name_ + "]");
  }

 private:
  template <typename T>
  static bool full_parse(const std::string& s, T& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, out);
    return r.ec == std::errc() && r.ptr == e;
  }

  static double to_num(const std::string& s, int line) {
    double v = 0.0;
    if (!full_parse(s, v)) fail(line, "expected a number, got '" + s + "'");
    return v;
  }
  static int to_int(const std::string& s, int line) {
    int v = 0;
    if (!full_parse(s, v)) fail(line, "expected an integer, got '" + s + "'");
    return v;
  }

  RawSection* s_;
  std::string name_;
};

std::map<std::string, RawSection> tokenize(const std::string& text) {
  static const char* kKnown[] = {"domain",   "grid",  "physics", "mapping",
                                 "coverage", "micro", "output"};
  std::map<std::string, RawSection> sections;
  std::istringstream in(text);
  std::string raw;
  std::string current;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const char* k : kKnown) known = known || name == k;
      if (!known) fail(line_no, "unknown section [" + name + "]");
      if (sections.count(name)) fail(line_no, "duplicate section [" + name + "]");
      sections[name].line = line_no;
      current = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(line_no, "expected 'key = value' or a [section] header");
    if (current.empty()) fail(line_no, "key before any [section] header");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    auto [it, inserted] = sections[current].kv.emplace(key, Entry{value, line_no});
    if (!inserted)
      fail(line_no, "duplicate key '" + key + "' in [" + current + "] (first at line " +
                        std::to_string(it->second.line) + ")");
  }
  return sections;
}

Reader reader_for(std::map<std::string, RawSection>& sections,
                  const std::string& name, bool required) {
  auto it = sections.find(name);
  if (it == sections.end()) {
    if (required)
      throw std::runtime_error("missing required section [" + name + "]");
    return Reader(nullptr, name);
  }
  return Reader(&it->second, name);
}

}  // namespace

Grid ScenarioConfig::make_grid() const {
  return Grid(extent(), grid.nx, grid.ny);
}

double ScenarioConfig::mapping_D() const {
  return (mapping && mapping->D >= 0.0) ? mapping->D : physics.D;
}

double ScenarioConfig::coverage_D() const {
  return (coverage && coverage->D >= 0.0) ? coverage->D : physics.D;
}

ScenarioConfig parse_config(const std::string& text) {
  auto sections = tokenize(text);
  ScenarioConfig cfg;

  {
    Reader r = reader_for(sections, "domain", true);
    cfg.domain.x_lo = r.num("x_lo");
    cfg.domain.x_hi = r.num("x_hi");
    cfg.domain.y_lo = r.num("y_lo");
    cfg.domain.y_hi = r.num("y_hi");
    if (!(cfg.domain.x_hi > cfg.domain.x_lo) ||
        !(cfg.domain.y_hi > cfg.domain.y_lo))
      fail(r.section_line(), "[domain] extents must satisfy lo < hi");
    r.finish();
  }
  {
    Reader r = reader_for(sections, "grid", true);
    cfg.grid.nx = r.integer("nx");
    cfg.grid.ny = r.integer("ny");
    if (cfg.grid.nx < 1 || cfg.grid.ny < 1)
      fail(r.section_line(), "[grid] nx and ny must be >= 1");
    r.finish();
  }
  {
    Reader r = reader_for(sections, "physics", true);
    cfg.physics.D = r.num("D");
    cfg.physics.k_o = r.num("k_o");
    cfg.physics.k_f = r.num("k_f");
    cfg.physics.start_x = r.num_or("start_x", cfg.physics.start_x);
    cfg.physics.start_y = r.num_or("start_y", cfg.physics.start_y);
    cfg.physics.sigma = r.num_or("sigma", cfg.physics.sigma);
    if (cfg.physics.D < 0.0 || cfg.physics.k_o < 0.0 || cfg.physics.k_f < 0.0)
      fail(r.section_line(), "[physics] rates and D must be nonnegative");
    if (!(cfg.physics.sigma > 0.0))
      fail(r.line("sigma"), "[physics] sigma must be positive");
    if (!cfg.extent().contains(cfg.physics.start_x, cfg.physics.start_y))
      fail(r.section_line(), "[physics] start point lies outside the domain");
    r.finish();
  }
  {
    Reader r = reader_for(sections, "mapping", false);
    if (r.present()) {
      ScenarioConfig::Mapping m;
      m.lanes = r.integer("lanes");
      m.speed = r.num("speed");
      m.truth = r.str("truth");
      m.lambda = r.num_or("lambda", m.lambda);
      m.max_iters = r.integer_or("max_iters", m.max_iters);
      m.snapshots = r.integer_or("snapshots", m.snapshots);
      m.D = r.num_or("D", m.D);
      m.data = r.str_or("data", m.data);
      if (m.lanes < 1) fail(r.line("lanes"), "[mapping] lanes must be >= 1");
      if (!(m.speed > 0.0)) fail(r.line("speed"), "[mapping] speed must be positive");
      if (m.max_iters < 1) fail(r.line("max_iters"), "[mapping] max_iters must be >= 1");
      if (m.snapshots < 0) fail(r.line("snapshots"), "[mapping] snapshots must be >= 0");
      if (m.data != "micro" && m.data != "macro")
        fail(r.line("data"), "[mapping] data must be micro or macro");
      cfg.mapping = std::move(m);
      r.finish();
    }
  }
  {
    Reader r = reader_for(sections, "coverage", false);
    if (r.present()) {
      ScenarioConfig::Coverage c;
      c.T = r.num("T");
      c.C = r.num("C");
      c.M = r.integer_or("M", c.M);
      c.lambda = r.num_or("lambda", c.lambda);
      c.P = r.integer_or("P", c.P);
      c.vmax = r.num_or("vmax", c.vmax);
      c.kmax = r.num_or("kmax", c.kmax);
      c.max_iters = r.integer_or("max_iters", c.max_iters);
      c.D = r.num_or("D", c.D);
      c.mask_y_min = r.num_or("mask_y_min", c.mask_y_min);
      c.map_file = r.str_or("map_file", c.map_file);
      if (!(c.T > 0.0)) fail(r.line("T"), "[coverage] T must be positive");
      if (!(c.C > 0.0)) fail(r.line("C"), "[coverage] C must be positive");
      if (c.M < 1) fail(r.line("M"), "[coverage] M must be >= 1");
      if (c.lambda < 0.0) fail(r.line("lambda"), "[coverage] lambda must be >= 0");
      if (c.P < 1) fail(r.line("P"), "[coverage] P must be >= 1");
      if (!(c.vmax > 0.0)) fail(r.line("vmax"), "[coverage] vmax must be positive");
      if (c.kmax < 0.0) fail(r.line("kmax"), "[coverage] kmax must be >= 0");
      if (c.max_iters < 0) fail(r.line("max_iters"), "[coverage] max_iters must be >= 0");
      cfg.coverage = std::move(c);
      r.finish();
    }
  }
  {
    Reader r = reader_for(sections, "micro", false);
    if (r.present()) {
      ScenarioConfig::Micro m;
      m.N = r.integer("N");
      m.dt = r.num_or("dt", m.dt);
      m.seed = r.u64_or("seed", m.seed);
      if (m.N < 1) fail(r.line("N"), "[micro] N must be >= 1");
      if (m.dt < 0.0) fail(r.line("dt"), "[micro] dt must be >= 0");
      cfg.micro = m;
      r.finish();
    }
  }
  {
    Reader r = reader_for(sections, "output", false);
    if (r.present()) {
      cfg.output.dir = r.str_or("dir", cfg.output.dir);
      cfg.output.dump_trajectories =
          r.flag_or("dump_trajectories", cfg.output.dump_trajectories);
      r.finish();
    }
  }

  if (cfg.mapping && cfg.mapping->data == "micro" && !cfg.micro)
    throw std::runtime_error(
        "[mapping] data = micro requires a [micro] section");
  if (cfg.coverage && !cfg.mapping && cfg.coverage->map_file.empty())
    throw std::runtime_error(
        "[coverage] needs a region source: either a [mapping] section or map_file");
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string render_config(const ScenarioConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return format_double(v); };
  out << "[domain]\n"
      << "x_lo = " << num(c.domain.x_lo) << "\n"
      << "x_hi = " << num(c.domain.x_hi) << "\n"
      << "y_lo = " << num(c.domain.y_lo) << "\n"
      << "y_hi = " << num(c.domain.y_hi) << "\n\n";
  out << "[grid]\n"
      << "nx = " << c.grid.nx << "\n"
      << "ny = " << c.grid.ny << "\n\n";
  out << "[physics]\n"
      << "D = " << num(c.physics.D) << "\n"
      << "k_o = " << num(c.physics.k_o) << "\n"
      << "k_f = " << num(c.physics.k_f) << "\n"
      << "start_x = " << num(c.physics.start_x) << "\n"
      << "start_y = " << num(c.physics.start_y) << "\n"
      << "sigma = " << num(c.physics.sigma) << "\n";
  if (c.mapping) {
    const auto& m = *c.mapping;
    out << "\n[mapping]\n"
        << "lanes = " << m.lanes << "\n"
        << "speed = " << num(m.speed) << "\n"
        << "truth = " << m.truth << "\n"
        << "lambda = " << num(m.lambda) << "\n"
        << "max_iters = " << m.max_iters << "\n"
        << "snapshots = " << m.snapshots << "\n"
        << "D = " << num(m.D) << "\n"
        << "data = " << m.data << "\n";
  }
  if (c.coverage) {
    const auto& v = *c.coverage;
    out << "\n[coverage]\n"
        << "T = " << num(v.T) << "\n"
        << "M = " << v.M << "\n"
        << "lambda = " << num(v.lambda) << "\n"
        << "C = " << num(v.C) << "\n"
        << "P = " << v.P << "\n"
        << "vmax = " << num(v.vmax) << "\n"
        << "kmax = " << num(v.kmax) << "\n"
        << "max_iters = " << v.max_iters << "\n"
        << "D = " << num(v.D) << "\n"
        << "mask_y_min = " << num(v.mask_y_min) << "\n";
    if (!v.map_file.empty()) out << "map_file = " << v.map_file << "\n";
  }
  if (c.micro) {
    out << "\n[micro]\n"
        << "N = " << c.micro->N << "\n"
        << "dt = " << num(c.micro->dt) << "\n"
        << "seed = " << c.micro->seed << "\n";
  }
  out << "\n[output]\n"
      << "dir = " << c.output.dir << "\n"
      << "dump_trajectories = " << (c.output.dump_trajectories ? "true" : "false")
      << "\n";
  return out.str();
}

IndicatorField truth_indicator(const std::string& spec, const Grid& grid) {
  if (trim(spec).empty())
    throw std::invalid_argument("truth_indicator: empty region list");

  ScalarField acc(grid, 0.0);
  std::string_view rest = spec;
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const std::string term = trim(rest.substr(0, semi));
    rest = (semi == std::string_view::npos) ? std::string_view{}
                                            : rest.substr(semi + 1);
    if (term.empty()) continue;

    const auto colon = term.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("truth_indicator: expected kind:args in '" +
                                  term + "'");
    const std::string kind = trim(std::string_view(term).substr(0, colon));
    std::vector<double> args;
    std::string_view tail = std::string_view(term).substr(colon + 1);
    while (true) {
      const auto comma = tail.find(',');
      const std::string tok = trim(tail.substr(0, comma));
      double v = 0.0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
        throw std::invalid_argument("truth_indicator: bad number '" + tok +
                                    "' in '" + term + "'");
      args.push_back(v);
      if (comma == std::string_view::npos) break;
      tail = tail.substr(comma + 1);
    }

    IndicatorField prim = IndicatorField::zeros(grid);
    if (kind == "disk") {
      if (args.size() != 3 || !(args[2] > 0.0))
        throw std::invalid_argument("truth_indicator: disk needs cx,cy,r with r > 0");
      prim = disk_indicator(grid, args[0], args[1], args[2]);
    } else if (kind == "rect") {
      if (args.size() != 4)
        throw std::invalid_argument("truth_indicator: rect needs x_lo,x_hi,y_lo,y_hi");
      prim = rect_indicator(grid, {args[0], args[1], args[2], args[3]});
    } else {
      throw std::invalid_argument("truth_indicator: unknown primitive '" + kind + "'");
    }
    for (std::size_t c = 0; c < acc.size(); ++c)
      acc[c] = std::max(acc[c], prim[c]);
  }
  return IndicatorField(std::move(acc));
}

ScenarioConfig make_case_config(const std::string& name) {
  // Shared study parameters: 100 m square, 50x50 mesh, slow diffusion, fast
  // observation rate, recovery rate 0.1/s, swarm released near the corner.
  ScenarioConfig cfg;
  cfg.domain = {0.0, 100.0, 0.0, 100.0};
  cfg.grid = {50, 50};
  cfg.physics.D = 1e-4;
  cfg.physics.k_o = 100.0;
  cfg.physics.k_f = 0.1;
  cfg.physics.start_x = 10.0;
  cfg.physics.start_y = 10.0;
  cfg.physics.sigma = 0.02;
  cfg.output.dir = "runs";

  // Sweep geometry is not part of the study parameters; 20 lanes at
  // 2.61875 m/s make the full sweep last exactly 800 s.
  ScenarioConfig::Mapping map;
  map.lanes = 20;
  map.speed = 2.61875;
  map.truth = "disk:50,50,20";
  map.max_iters = 4000;
  map.snapshots = 400;

  ScenarioConfig::Micro micro;
  micro.N = 1000;
  micro.seed = 1;

  ScenarioConfig::Coverage cov;
  cov.T = 300.0;
  cov.M = 40;
  cov.P = 20;
  cov.D = 5e-4;
  cov.max_iters = 40;

  if (name == "mapping-demo") {
    micro.N = 30;  // small sensing ensemble; reconstruction from sparse counts
    cfg.mapping = map;
    cfg.micro = micro;
  } else if (name == "case1a") {
    cov.C = 450.0;
    cfg.mapping = map;
    cfg.micro = micro;
    cfg.coverage = cov;
  } else if (name == "case1b") {
    cov.C = 3600.0;
    cfg.mapping = map;
    cfg.micro = micro;
    cfg.coverage = cov;
  } else if (name == "case3") {
    cov.C = 1800.0;
    cov.mask_y_min = 60.0;
    cfg.mapping = map;
    cfg.micro = micro;
    cfg.coverage = cov;
  } else {
    throw std::invalid_argument("unknown case '" + name +
                                "' (expected case1a, case1b, case3 or mapping-demo)");
  }
  return cfg;
}

}  // namespace mapcover
