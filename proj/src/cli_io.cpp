#include "leafpeel/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "leafpeel/error.hpp"

namespace leafpeel::io {

namespace {

using json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + num(v[k]);
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

bool to_double(std::string_view s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

struct LineError {
  std::string source;
  std::size_t line;
  [[noreturn]] void operator()(const std::string& msg) const {
    fail(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + msg);
  }
};

double parse_num(const std::string& s, const LineError& err) {
  double v = 0.0;
  if (!to_double(s, v)) err("not a number: '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s, const LineError& err) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& t : split(s, ',')) out.push_back(parse_num(t, err));
  return out;
}

std::string describe(const PotentialProfile& q) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, PotentialProfile::Zero>)
          return "zero";
        else if constexpr (std::is_same_v<T, PotentialProfile::Constant>)
          return "const " + num(r.value);
        else if constexpr (std::is_same_v<T, PotentialProfile::PiecewiseConstant>)
          return "pwc " + (r.breakpoints.empty() ? std::string("-") : join(r.breakpoints)) + " " + join(r.values);
        else
          return "sampled " + num(r.step) + " " + join(r.values);
      },
      q.representation());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string entry_stem(std::size_t i, std::size_t j) { return "R_" + std::to_string(i) + "_" + std::to_string(j); }

// Writes every file into a fresh sibling directory, then swaps it in.
void write_directory(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !fs::exists(dir / "manifest.json"))
    fail(ErrorCode::IncompatibleBundles, dir.string() + " exists and is not a bundle");
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  for (const auto& [name, content] : files) {
    std::ofstream out(tmp / name, std::ios::binary);
    out << content;
    if (!out) fail(ErrorCode::ParseError, "cannot write " + (tmp / name).string());
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

std::string content_hash(const std::vector<std::pair<std::string, std::string>>& files) {
  std::uint64_t h = fnv1a("");
  for (const auto& [name, content] : files) {
    h = fnv1a(name, h);
    h = fnv1a(content, h);
  }
  return hex64(h);
}

json info_json(const BundleInfo& info) {
  json tol = json::object();
  for (const auto& [k, v] : info.tolerances) tol[k] = v;
  return json{{"tree_hash", info.tree_hash}, {"origin", info.origin}, {"tolerances", tol}};
}

BundleInfo info_from(const json& m) {
  BundleInfo info;
  info.tree_hash = m.value("tree_hash", "");
  info.origin = m.value("origin", "");
  if (m.contains("tolerances"))
    for (const auto& [k, v] : m["tolerances"].items()) info.tolerances.emplace_back(k, v.get<double>());
  return info;
}

json read_manifest(const fs::path& dir, std::string_view format) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, (dir / "manifest.json").string() + ": " + e.what());
  }
  if (m.value("format", "") != format)
    fail(ErrorCode::IncompatibleBundles, dir.string() + " is not a " + std::string(format) + " bundle");
  if (m.value("sign_convention", "") != kSignConvention)
    fail(ErrorCode::IncompatibleBundles, dir.string() + " uses another derivative sign convention");
  return m;
}

std::vector<std::pair<std::string, std::string>> read_listed(const fs::path& dir, const json& m) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& name : m.at("files")) files.emplace_back(name.get<std::string>(), read_file(dir / name.get<std::string>()));
  if (content_hash(files) != m.value("content_hash", ""))
    fail(ErrorCode::IncompatibleBundles, dir.string() + ": manifest hash does not match content");
  return files;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& content, const std::string& source, std::size_t width) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) continue;  // header
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    if (cells.size() != width) LineError{source, n}("expected " + std::to_string(width) + " columns");
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

MetricTree parse_tree(std::string_view text, const std::string& source) {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> boundary;
  std::optional<std::size_t> root;
  std::vector<std::tuple<std::string, std::string, std::string, double, PotentialProfile, std::size_t>> pending;
  std::size_t line_no = 0;
  bool header = false;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const LineError err{source, line_no};
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != kTreeHeader) err("expected header '" + std::string(kTreeHeader) + "'");
      header = true;
      continue;
    }
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(t);
    if (kind == "vertex") {
      if (tok.size() != 2 || (tok[1] != "boundary" && tok[1] != "internal")) err("vertex <label> boundary|internal");
      if (index.count(tok[0])) err("duplicate vertex '" + tok[0] + "'");
      index[tok[0]] = vertices.size();
      if (tok[1] == "boundary") boundary.push_back(vertices.size());
      vertices.push_back({tok[0], tok[1] == "boundary"});
    } else if (kind == "edge") {
      if (tok.size() < 5) err("edge <label> <from> <to> <length> <potential>");
      const double length = parse_num(tok[3], err);
      const std::string& pk = tok[4];
      PotentialProfile q;
      try {
        if (pk == "zero" && tok.size() == 5) {
          q = PotentialProfile::zero();
        } else if (pk == "const" && tok.size() == 6) {
          q = PotentialProfile::constant(parse_num(tok[5], err));
        } else if (pk == "pwc" && tok.size() == 7) {
          q = PotentialProfile::piecewise(tok[5] == "-" ? std::vector<double>{} : parse_list(tok[5], err),
                                          parse_list(tok[6], err));
        } else if (pk == "sampled" && tok.size() == 7) {
          q = PotentialProfile::sampled(parse_num(tok[5], err), parse_list(tok[6], err));
        } else {
          err("potential must be zero | const <v> | pwc <breaks> <values> | sampled <step> <values>");
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw;
        err(e.what());
      }
      pending.emplace_back(tok[0], tok[1], tok[2], length, std::move(q), line_no);
    } else if (kind == "root") {
      if (tok.size() != 1) err("root <label>");
      if (root) err("root given twice");
      auto it = index.find(tok[0]);
      if (it == index.end()) fail(ErrorCode::UnknownVertex, source + ":" + std::to_string(line_no) + ": unknown vertex '" + tok[0] + "'");
      root = it->second;
    } else {
      err("unknown record '" + kind + "'");
    }
  }
  if (!header) LineError{source, line_no}("empty tree description");
  if (!root) LineError{source, line_no}("missing root");
  for (auto& [label, from, to, length, q, ln] : pending) {
    auto f = index.find(from), t = index.find(to);
    if (f == index.end() || t == index.end())
      fail(ErrorCode::UnknownVertex, source + ":" + std::to_string(ln) + ": edge '" + label + "' names an unknown vertex");
    edges.push_back({label, f->second, t->second, length, std::move(q)});
  }
  try {
    return MetricTree::build(std::move(vertices), std::move(edges), std::move(boundary), *root);
  } catch (const Error& e) {
    const std::string what = e.what();
    fail(e.code(), source + ": " + what.substr(what.find(": ") + 2));
  }
}

std::string serialize_tree(const MetricTree& tree) {
  std::string out(kTreeHeader);
  out += "\n";
  for (const auto& v : tree.vertices()) out += "vertex " + v.label + (v.boundary ? " boundary\n" : " internal\n");
  for (const auto& e : tree.edges())
    out += "edge " + e.label + " " + tree.vertices()[e.from].label + " " + tree.vertices()[e.to].label + " " +
           num(e.length) + " " + describe(e.potential) + "\n";
  out += "root " + tree.vertices()[tree.root()].label + "\n";
  return out;
}

MetricTree read_tree(const fs::path& path) { return parse_tree(read_file(path), path.string()); }

void write_tree(const MetricTree& tree, const fs::path& path) { write_atomic(path, serialize_tree(tree)); }

std::string tree_hash(const MetricTree& tree) { return hex64(fnv1a(serialize_tree(tree))); }

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) fail(ErrorCode::ParseError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_response(const ResponseMatrix& R, const BundleInfo& info, const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = 0; j < R.size(); ++j) {
      const auto& e = R.at(i, j);
      std::string train = "time,coeff,order\n";
      for (const auto& a : e.train.atoms()) train += num(a.time) + "," + num(a.coeff) + "," + std::to_string(a.order) + "\n";
      std::string regular = "t,value\n";
      for (std::size_t k = 0; k < e.regular.size(); ++k)
        regular += num(R.dt * static_cast<double>(k)) + "," + num(e.regular[k]) + "\n";
      std::string jumps = "k,left\n";
      for (const auto& [k, left] : e.regular.breaks()) jumps += std::to_string(k) + "," + num(left) + "\n";
      const auto stem = entry_stem(i, j);
      files.emplace_back(stem + ".train.csv", std::move(train));
      files.emplace_back(stem + ".regular.csv", std::move(regular));
      files.emplace_back(stem + ".jumps.csv", std::move(jumps));
    }
  json names = json::array();
  for (const auto& f : files) names.push_back(f.first);
  json m{{"format", kResponseFormat},
         {"version", kVersion},
         {"sign_convention", kSignConvention},
         {"labels", R.labels},
         {"T", R.horizon()},
         {"dt", R.dt},
         {"dx", R.dx},
         {"samples", R.samples()},
         {"window", R.horizon()}};
  m.update(info_json(info));
  m["files"] = names;
  m["content_hash"] = content_hash(files);
  files.emplace_back("manifest.json", m.dump(2) + "\n");
  write_directory(dir, files);
}

ResponseMatrix read_response(const fs::path& dir, BundleInfo* info) {
  const json m = read_manifest(dir, kResponseFormat);
  const auto files = read_listed(dir, m);
  std::map<std::string, const std::string*> by_name;
  for (const auto& [name, content] : files) by_name[name] = &content;
  ResponseMatrix R;
  R.labels = m.at("labels").get<std::vector<std::string>>();
  R.dt = m.at("dt").get<double>();
  R.dx = m.at("dx").get<double>();
  const auto n = m.at("samples").get<std::size_t>();
  const std::size_t size = R.labels.size();
  R.entries.assign(size, std::vector<DynFunction>(size));
  auto content = [&](const std::string& name) -> const std::string& {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorCode::IncompatibleBundles, dir.string() + ": missing " + name);
    return *it->second;
  };
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const auto stem = entry_stem(i, j);
      std::vector<Atom> atoms;
      const auto tsrc = (dir / (stem + ".train.csv")).string();
      std::size_t row = 1;
      for (const auto& r : csv_rows(content(stem + ".train.csv"), tsrc, 3)) {
        const LineError err{tsrc, ++row};
        const Atom a{parse_num(r[0], err), parse_num(r[1], err), static_cast<int>(parse_num(r[2], err))};
        if (a.order != 0 && a.order != 1) err("atom order must be 0 or 1");
        if (!atoms.empty() && !(a.time > atoms.back().time || (a.time == atoms.back().time && a.order > atoms.back().order)))
          err("atom times must increase");
        atoms.push_back(a);
      }
      const auto rsrc = (dir / (stem + ".regular.csv")).string();
      const auto rows = csv_rows(content(stem + ".regular.csv"), rsrc, 2);
      if (rows.size() != n) fail(ErrorCode::IncompatibleBundles, rsrc + ": expected " + std::to_string(n) + " samples");
      std::vector<double> values;
      row = 1;
      for (const auto& r : rows) values.push_back(parse_num(r[1], LineError{rsrc, ++row}));
      SampledFunction reg(R.dt, std::move(values));
      const auto jsrc = (dir / (stem + ".jumps.csv")).string();
      row = 1;
      for (const auto& r : csv_rows(content(stem + ".jumps.csv"), jsrc, 2)) {
        const LineError err{jsrc, ++row};
        const double k = parse_num(r[0], err);
        if (!(k >= 0 && k < static_cast<double>(n)) || k != std::floor(k)) err("break index out of range");
        reg.set_left(static_cast<std::size_t>(k), parse_num(r[1], err));
      }
      R.at(i, j) = {SingularTrain(std::move(atoms), 0.0, 0.0), std::move(reg)};
    }
  if (info) *info = info_from(m);
  return R;
}

void write_tw(const TWMatrix& M, const BundleInfo& info, const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  const std::size_t size = M.labels.size();
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      std::string c = "lambda_re,lambda_im,valid,re,im\n";
      for (std::size_t s = 0; s < M.lambdas.size(); ++s) {
        const auto v = M.values[s](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        c += num(M.lambdas[s].real()) + "," + num(M.lambdas[s].imag()) + "," + (M.valid[s] ? "1" : "0") + "," +
             num(v.real()) + "," + num(v.imag()) + "\n";
      }
      files.emplace_back("M_" + std::to_string(i) + "_" + std::to_string(j) + ".csv", std::move(c));
    }
  json lambdas = json::array();
  for (const auto& l : M.lambdas) lambdas.push_back({l.real(), l.imag()});
  json names = json::array();
  for (const auto& f : files) names.push_back(f.first);
  json m{{"format", kTWFormat}, {"version", kVersion}, {"sign_convention", kSignConvention},
         {"labels", M.labels},  {"lambdas", lambdas}};
  m.update(info_json(info));
  m["files"] = names;
  m["content_hash"] = content_hash(files);
  files.emplace_back("manifest.json", m.dump(2) + "\n");
  write_directory(dir, files);
}

TWMatrix read_tw(const fs::path& dir, BundleInfo* info) {
  const json m = read_manifest(dir, kTWFormat);
  const auto files = read_listed(dir, m);
  TWMatrix M;
  M.labels = m.at("labels").get<std::vector<std::string>>();
  for (const auto& l : m.at("lambdas")) M.lambdas.emplace_back(l.at(0).get<double>(), l.at(1).get<double>());
  const auto size = static_cast<Eigen::Index>(M.labels.size());
  M.values.assign(M.lambdas.size(), Eigen::MatrixXcd::Zero(size, size));
  M.valid.assign(M.lambdas.size(), true);
  std::size_t f = 0;
  for (Eigen::Index i = 0; i < size; ++i)
    for (Eigen::Index j = 0; j < size; ++j, ++f) {
      const auto src = (dir / files[f].first).string();
      const auto rows = csv_rows(files[f].second, src, 5);
      if (rows.size() != M.lambdas.size()) fail(ErrorCode::IncompatibleBundles, src + ": lambda grid size differs");
      std::size_t row = 1;
      for (std::size_t s = 0; s < rows.size(); ++s) {
        const LineError err{src, ++row};
        M.values[s](i, j) = cplx(parse_num(rows[s][3], err), parse_num(rows[s][4], err));
        if (rows[s][2] == "0") M.valid[s] = false;
      }
    }
  if (info) *info = info_from(m);
  return M;
}

std::vector<cplx> parse_lambda_grid(std::string_view text) {
  const LineError err{"--lambda-grid", 1};
  std::vector<cplx> out;
  const std::string t = trim(text);
  if (t.find(';') != std::string::npos || t.find('i') != std::string::npos) {
    for (const auto& item : split(t, ';')) {
      const std::string s = trim(item);
      if (s.empty()) continue;
      double re = 0.0, im = 0.0;
      // a, a+bi, a-bi
      const auto pos = s.find_first_of("+-", 1);
      if (s.back() == 'i' && pos != std::string::npos) {
        re = parse_num(s.substr(0, pos), err);
        im = parse_num(s.substr(pos + (s[pos] == '+' ? 1 : 0), s.size() - 1 - pos - (s[pos] == '+' ? 1 : 0)), err);
      } else {
        re = parse_num(s, err);
      }
      out.emplace_back(re, im);
    }
    if (out.empty()) err("empty lambda list");
    return out;
  }
  const auto p = parse_list(t, err);
  if (p.size() != 6) err("expected re_min,re_max,n_re,im_min,im_max,n_im");
  const auto nre = static_cast<int>(p[2]), nim = static_cast<int>(p[5]);
  if (nre < 1 || nim < 1) err("grid sizes must be positive");
  for (int a = 0; a < nim; ++a)
    for (int b = 0; b < nre; ++b) {
      const double re = nre == 1 ? p[0] : p[0] + (p[1] - p[0]) * b / (nre - 1);
      const double im = nim == 1 ? p[3] : p[3] + (p[4] - p[3]) * a / (nim - 1);
      out.emplace_back(re, im);
    }
  return out;
}

VerifyReport verify(const ResponseMatrix& a, const ResponseMatrix& b, const VerifyOptions& opt) {
  if (a.labels != b.labels) fail(ErrorCode::IncompatibleBundles, "boundary orders differ");
  if (std::abs(a.dt - b.dt) > 1e-12 * std::max(a.dt, b.dt)) fail(ErrorCode::IncompatibleBundles, "time steps differ");
  VerifyReport rep;
  rep.labels = a.labels;
  rep.tolerances = opt;
  const std::size_t n = std::min(a.samples(), b.samples());
  if (n == 0) fail(ErrorCode::IncompatibleBundles, "no common window");
  rep.window = a.dt * static_cast<double>(n - 1);
  const double t_max = rep.window + 0.5 * a.dt;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      EntryDiff d{i, j};
      const auto ta = a.at(i, j).train.restricted(t_max).atoms(), tb = b.at(i, j).train.restricted(t_max).atoms();
      // Pair atoms of equal order closer than half a step; unpaired atoms count against zero.
      std::vector<bool> used(tb.size(), false);
      for (const auto& x : ta) {
        std::size_t best = tb.size();
        for (std::size_t k = 0; k < tb.size(); ++k)
          if (!used[k] && tb[k].order == x.order && std::abs(tb[k].time - x.time) < 0.5 * a.dt &&
              (best == tb.size() || std::abs(tb[k].time - x.time) < std::abs(tb[best].time - x.time)))
            best = k;
        if (best == tb.size()) {
          d.coeff = std::max(d.coeff, std::abs(x.coeff));
          continue;
        }
        used[best] = true;
        d.time = std::max(d.time, std::abs(tb[best].time - x.time));
        d.coeff = std::max(d.coeff, std::abs(tb[best].coeff - x.coeff));
      }
      for (std::size_t k = 0; k < tb.size(); ++k)
        if (!used[k]) d.coeff = std::max(d.coeff, std::abs(tb[k].coeff));
      const auto& ra = a.at(i, j).regular;
      const auto& rb = b.at(i, j).regular;
      double num2 = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        num2 += std::pow(ra[k] - rb[k], 2);
        na += ra[k] * ra[k];
        nb += rb[k] * rb[k];
      }
      // Relative to the larger entry, but never to less than a unit kernel over the window.
      const double scale = std::max({na, nb, static_cast<double>(n)});
      d.l2 = std::sqrt(num2 / scale);
      d.pass = d.time <= opt.eps_time && d.coeff <= opt.eps_coeff && d.l2 <= opt.l2_rel;
      rep.pass = rep.pass && d.pass;
      rep.entries.push_back(d);
    }
  return rep;
}

std::string VerifyReport::text() const {
  std::ostringstream out;
  out << "window " << num(window) << " eps_time " << num(tolerances.eps_time) << " eps_coeff " << num(tolerances.eps_coeff)
      << " l2_rel " << num(tolerances.l2_rel) << "\n";
  for (const auto& e : entries) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "R[%s,%s] time %.3e coeff %.3e l2 %.3e %s\n", labels[e.i].c_str(), labels[e.j].c_str(),
                  e.time, e.coeff, e.l2, e.pass ? "ok" : "FAIL");
    out << buf;
  }
  out << (pass ? "PASS" : "FAIL") << "\n";
  return out.str();
}

}  // namespace leafpeel::io
