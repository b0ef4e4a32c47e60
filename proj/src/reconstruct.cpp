#include "leafpeel/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include <Eigen/Cholesky>

#include "leafpeel/error.hpp"

namespace leafpeel {

namespace {

double significance(const DynFunction& f, const ReconstructOptions& opt) {
  return opt.eps_c * std::max(1.0, f.train.max_abs_coeff());
}

// First atom strictly after t_min (any order), ignoring negligible coefficients.
std::optional<Atom> first_atom(const DynFunction& f, double t_min, const ReconstructOptions& opt) {
  const double tol = significance(f, opt);
  for (const auto& a : f.train.atoms())
    if (a.time > t_min && std::abs(a.coeff) > tol) return a;
  return std::nullopt;
}

// delta' coefficient of f at time t (0 when absent).
double dprime_at(const DynFunction& f, double t, const ReconstructOptions& opt) {
  double c = 0.0;
  for (const auto& a : f.train.atoms())
    if (a.order == 1 && std::abs(a.time - t) <= opt.eps_t) c += a.coeff;
  return c;
}

double degree_from_transmission(double c) { return 4.0 / std::abs(c); }
double degree_from_reflection(double c) { return 4.0 / (2.0 + c); }

void check_degree(double n, const std::string& what, const ReconstructOptions& opt) {
  if (!std::isfinite(n) || n < 1.5 || std::abs(n - std::round(n)) > opt.degree_tol)
    fail(ErrorCode::NonIntegerDegree, what + " gives degree " + std::to_string(n));
}

[[noreturn]] void stage_failure(std::size_t stage, const Error& e) {
  fail(ErrorCode::WindowEmpty, "stage " + std::to_string(stage) + ": " + e.what());
}

double l2(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

std::vector<double> boundary_edge_lengths(const ResponseMatrix& R, const ReconstructOptions& opt) {
  std::vector<double> out;
  for (std::size_t i = 0; i < R.size(); ++i) {
    auto a = first_atom(R.at(i, i), opt.eps_t, opt);
    if (!a) fail(ErrorCode::NoReflection, "no reflection in R_" + R.labels[i] + " within T = " + std::to_string(R.horizon()));
    out.push_back(0.5 * a->time);
  }
  return out;
}

EdgePotential potential_on_edge(const DynFunction& entry, double length, const ReconstructOptions& opt) {
  const double h = entry.dt();
  const std::size_t n = grid_index(length, h);
  if (n < 3) fail(ErrorCode::IllConditioned, "edge shorter than three grid cells");
  // Only t <= 2l enters; later samples see the far vertex.
  const std::size_t K = 2 * n;
  if (entry.size() < K + 1)
    fail(ErrorCode::HorizonTooShort, "potential on an edge of length " + std::to_string(length) + " needs T >= 2l");
  for (const auto& a : entry.train.atoms())
    if (a.time > opt.eps_t && a.time < 2.0 * length - opt.eps_t && std::abs(a.coeff) > significance(entry, opt))
      fail(ErrorCode::InconsistentSheafData, "boundary entry has an atom before the first reflection");

  const SampledFunction r = entry.regular.truncated(K + 1);
  const SampledFunction rhat = cumulative_integral(r);
  // Connecting operator in control time, symmetrized with trapezoid weights. The end
  // weight of each leading block is restored by a rank-one term below.
  std::vector<double> sw(n + 1, std::sqrt(h));
  sw[0] = std::sqrt(0.5 * h);
  Eigen::MatrixXd S(n + 1, n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t k = 0; k <= i; ++k) {
      const double c = 0.5 * (rhat[i + k] - rhat[i - k]);
      S(i, k) = S(k, i) = (i == k ? 1.0 : 0.0) + sw[i] * sw[k] * c;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) fail(ErrorCode::IllConditioned, "connecting operator is not positive definite");
  const double rcond = llt.rcond();
  if (!(rcond * opt.cond_max > 1.0))
    fail(ErrorCode::IllConditioned, "connecting operator condition number " + std::to_string(1.0 / rcond));

  // The Gelfand-Levitan system on [0, x] is the leading block of size x / h + 1;
  // its solution at the end point is half the integral of q over (0, x).
  const Eigen::MatrixXd L = llt.matrixL();
  std::vector<double> Q(n + 1, 0.0);
  for (std::size_t m = 1; m <= n; ++m) {
    const double y = (1.0 - 1.0 / (L(m, m) * L(m, m))) / h;
    Q[m] = -2.0 * y / (1.0 - 0.5 * h * y);
  }
  SampledFunction dq = derivative(SampledFunction(h, Q));
  std::vector<double> q(dq.values());

  EdgePotential out;
  double sup = 0.0;
  for (double v : q) sup = std::max(sup, std::abs(v));
  out.q = sup <= opt.q_zero ? PotentialProfile::zero() : PotentialProfile::sampled(h, std::move(q));
  out.condition = 1.0 / rcond;
  if (opt.residuals) {
    auto sim = response_matrix(single_edge_tree(length, out.q), h * static_cast<double>(K - 1), h, {{}, false});
    const auto& rs = sim.at(0, 0).regular;
    std::vector<double> diff(K), ref(K);
    for (std::size_t k = 0; k < K; ++k) {
      diff[k] = rs[k] - r[k];
      ref[k] = r[k];
    }
    out.residual = l2(diff) / std::max(l2(ref), 1.0 / std::sqrt(h));
  }
  return out;
}

std::vector<PreSheafGroup> presheaf_groups(const ResponseMatrix& R, const std::vector<double>& lengths,
                                           const ReconstructOptions& opt) {
  const std::size_t m = R.size();
  if (lengths.size() != m) fail(ErrorCode::InconsistentSheafData, "one length per boundary vertex expected");
  std::vector<std::vector<char>> linked(m, std::vector<char>(m, 0));
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i) {
    linked[i][i] = 1;
    for (std::size_t j = i + 1; j < m; ++j) {
      auto a = first_atom(R.at(i, j), -1.0, opt);
      if (!a) continue;
      const double gap = a->time - (lengths[i] + lengths[j]);
      if (gap < -opt.eps_t)
        fail(ErrorCode::AmbiguousGrouping, "R_" + R.labels[i] + "," + R.labels[j] + " arrives before l_i + l_j");
      if (gap <= opt.eps_t) {
        linked[i][j] = linked[j][i] = 1;
        parent[find(i)] = find(j);
      } else if (gap <= 10.0 * opt.eps_t) {
        fail(ErrorCode::AmbiguousGrouping, "arrival time of R_" + R.labels[i] + "," + R.labels[j] + " within tolerance band");
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < m; ++i) by_root[find(i)].push_back(i);
  std::vector<PreSheafGroup> out;
  for (auto& [root, members] : by_root) {
    for (auto i : members)
      for (auto j : members)
        if (!linked[i][j]) fail(ErrorCode::AmbiguousGrouping, "grouping of " + R.labels[i] + " and " + R.labels[j] + " is not transitive");
    const std::size_t first = members.front();
    const double refl = dprime_at(R.at(first, first), 2.0 * lengths[first], opt);
    double n = degree_from_reflection(refl);
    check_degree(n, "reflection at " + R.labels[first], opt);
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const auto i = members[a], j = members[b];
        const double nt = degree_from_transmission(dprime_at(R.at(i, j), lengths[i] + lengths[j], opt));
        check_degree(nt, "transmission " + R.labels[i] + " -> " + R.labels[j], opt);
        if (std::round(nt) != std::round(n))
          fail(ErrorCode::NonIntegerDegree, "transmission and reflection disagree on the degree at " + R.labels[i]);
      }
    PreSheafGroup g;
    g.members = members;
    g.degree = static_cast<std::size_t>(std::round(n));
    g.sheaf = members.size() + 1 == g.degree;
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.members.front() < b.members.front(); });
  return out;
}

Sheaf detect_sheaf(const ResponseMatrix& R, const ReconstructOptions& opt) {
  if (R.size() < 2) fail(ErrorCode::NoCertifiedSheaf, "a single boundary edge has no sheaf to peel");
  const auto lengths = boundary_edge_lengths(R, opt);
  const auto groups = presheaf_groups(R, lengths, opt);
  auto it = std::find_if(groups.begin(), groups.end(), [](const auto& g) { return g.sheaf; });
  if (it == groups.end()) fail(ErrorCode::NoCertifiedSheaf, "no pre-sheaf is a sheaf");
  Sheaf sheaf;
  sheaf.members = it->members;
  for (auto p : sheaf.members) {
    auto q = potential_on_edge(R.at(p, p), lengths[p], opt).q;
    sheaf.edges.push_back({lengths[p], q.reversed(lengths[p])});
  }
  return sheaf;
}

RecoveredTree reconstruct_tree(const ResponseMatrix& R, const std::string& root_label, const ReconstructOptions& opt) {
  if (R.size() == 0) fail(ErrorCode::InvalidTree, "empty response matrix");
  struct Known {
    double length = 0.0;
    EdgePotential potential;
  };
  std::map<std::string, Known> known;
  std::vector<std::string> centers;
  RecoveredTree out;
  ResponseMatrix cur = R;

  auto fresh_label = [&](std::size_t stage) {
    std::string base = "v" + std::to_string(stage), label = base;
    auto taken = [&](const std::string& s) {
      return s == root_label || std::find(R.labels.begin(), R.labels.end(), s) != R.labels.end() ||
             std::find(centers.begin(), centers.end(), s) != centers.end();
    };
    for (std::size_t k = 1; taken(label); ++k) label = base + "_" + std::to_string(k);
    return label;
  };

  for (std::size_t stage = 1;; ++stage) {
    out.stages = stage;
    try {
      const auto lengths = boundary_edge_lengths(cur, opt);
      auto geometry = [&](std::size_t i) -> const Known& {
        auto it = known.find(cur.labels[i]);
        if (it == known.end())
          it = known.emplace(cur.labels[i], Known{lengths[i], potential_on_edge(cur.at(i, i), lengths[i], opt)}).first;
        return it->second;
      };
      if (cur.size() == 1) {
        const auto& g = geometry(0);
        out.edges.push_back({cur.labels[0], root_label, g.length, g.potential.q, stage, 0.0, g.potential.residual});
        break;
      }
      const auto groups = presheaf_groups(cur, lengths, opt);
      auto it = std::find_if(groups.begin(), groups.end(), [](const auto& g) { return g.sheaf; });
      if (it == groups.end()) fail(ErrorCode::NoCertifiedSheaf, "stage " + std::to_string(stage) + ": no pre-sheaf is a sheaf");

      Sheaf sheaf;
      sheaf.members = it->members;
      const std::string center = fresh_label(stage);
      std::vector<RecoveredEdge> recovered;
      for (auto p : sheaf.members) {
        const auto& g = geometry(p);
        sheaf.edges.push_back({g.length, g.potential.q.reversed(g.length)});
        double lres = 0.0;
        for (auto o : sheaf.members)
          if (o != p) {
            auto a = first_atom(cur.at(p, o), -1.0, opt);
            lres = std::max(lres, std::abs(a->time - lengths[p] - lengths[o]));
          }
        recovered.push_back({cur.labels[p], center, g.length, g.potential.q, stage, lres, g.potential.residual});
      }
      auto peeled = peel_response(cur, sheaf, center, opt.dynamical);
      centers.push_back(center);
      out.edges.insert(out.edges.end(), recovered.begin(), recovered.end());
      cur = std::move(peeled.matrix);
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::NoReflection:
        case ErrorCode::HorizonTooShort:
        case ErrorCode::WindowEmpty:
          stage_failure(stage, e);
        default:
          throw;
      }
    }
  }

  std::vector<Vertex> vertices;
  std::map<std::string, std::size_t> index;
  auto add_vertex = [&](const std::string& label, bool boundary) {
    index[label] = vertices.size();
    vertices.push_back({label, boundary});
  };
  for (const auto& l : R.labels) add_vertex(l, true);
  for (const auto& c : centers) add_vertex(c, false);
  add_vertex(root_label, true);
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < out.edges.size(); ++k) {
    const auto& e = out.edges[k];
    edges.push_back({"e" + std::to_string(k + 1), index.at(e.from), index.at(e.to), e.length, e.potential});
  }
  std::vector<std::size_t> boundary(R.size() + 1);
  std::iota(boundary.begin(), boundary.end() - 1, 0);
  boundary.back() = index.at(root_label);
  out.tree = MetricTree::build(std::move(vertices), std::move(edges), std::move(boundary), index.at(root_label));
  return out;
}

}  // namespace leafpeel
