#include "leafpeel/forward_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "leafpeel/error.hpp"

namespace leafpeel {

namespace {

// Linear system for the Cauchy data (u(0), u'(0)) of every edge.
struct EdgeSystem {
  Eigen::MatrixXcd A;
  std::vector<Eigen::Matrix2cd> transfer;
  std::vector<std::size_t> boundary_row;  // per tree.boundary() position
};

// Coefficients of the value and the outward derivative at one end of edge e.
struct EndForm {
  Eigen::Vector2cd value, outward;
};

EndForm end_form(const MetricTree& tree, const std::vector<Eigen::Matrix2cd>& tm, std::size_t e, std::size_t v) {
  EndForm f;
  if (tree.edges()[e].from == v) {
    f.value << 1.0, 0.0;
    f.outward << 0.0, 1.0;
  } else {
    f.value << tm[e](0, 0), tm[e](0, 1);
    f.outward << -tm[e](1, 0), -tm[e](1, 1);
  }
  return f;
}

EdgeSystem assemble(const MetricTree& tree, cplx lambda, const TransferOptions& opt) {
  const auto ne = tree.edges().size();
  EdgeSystem s;
  s.A = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(2 * ne), static_cast<Eigen::Index>(2 * ne));
  for (const auto& e : tree.edges()) s.transfer.push_back(transfer_matrix(e.length, e.potential, lambda, opt));
  s.boundary_row.assign(tree.boundary().size(), 0);
  Eigen::Index row = 0;
  auto put = [&](Eigen::Index r, std::size_t e, const Eigen::Vector2cd& coeff, double sign) {
    s.A(r, static_cast<Eigen::Index>(2 * e)) += sign * coeff(0);
    s.A(r, static_cast<Eigen::Index>(2 * e + 1)) += sign * coeff(1);
  };
  for (std::size_t v = 0; v < tree.vertices().size(); ++v) {
    const auto& inc = tree.incident(v);
    if (tree.vertices()[v].boundary) {
      const auto pos = std::find(tree.boundary().begin(), tree.boundary().end(), v) - tree.boundary().begin();
      s.boundary_row[static_cast<std::size_t>(pos)] = static_cast<std::size_t>(row);
      put(row++, inc[0], end_form(tree, s.transfer, inc[0], v).value, 1.0);
      continue;
    }
    const auto first = end_form(tree, s.transfer, inc[0], v);
    for (std::size_t k = 1; k < inc.size(); ++k) {
      put(row, inc[0], first.value, 1.0);
      put(row++, inc[k], end_form(tree, s.transfer, inc[k], v).value, -1.0);
    }
    for (auto e : inc) put(row, e, end_form(tree, s.transfer, e, v).outward, 1.0);
    ++row;
  }
  return s;
}

cplx outward_at(const MetricTree& tree, const EdgeSystem& s, const Eigen::VectorXcd& x, std::size_t boundary_pos) {
  const auto v = tree.boundary()[boundary_pos];
  const auto e = tree.incident(v)[0];
  const auto f = end_form(tree, s.transfer, e, v);
  return f.outward(0) * x(static_cast<Eigen::Index>(2 * e)) + f.outward(1) * x(static_cast<Eigen::Index>(2 * e + 1));
}

Eigen::MatrixXcd row_equilibrated(Eigen::MatrixXcd A) {
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).cwiseAbs().maxCoeff();
    if (m > 0.0) A.row(r) /= m;
  }
  return A;
}

}  // namespace

std::vector<std::string> boundary_labels(const MetricTree& tree, bool reduced) {
  std::vector<std::string> out;
  for (auto b : tree.boundary())
    if (!reduced || b != tree.root()) out.push_back(tree.vertices()[b].label);
  return out;
}

Eigen::MatrixXcd tw_matrix(const MetricTree& tree, cplx lambda, bool reduced, const TransferOptions& opt) {
  auto sys = assemble(tree, lambda, opt);
  const auto m = tree.boundary().size();
  Eigen::MatrixXcd scaled = row_equilibrated(sys.A);
  Eigen::VectorXd row_scale = sys.A.rowwise().lpNorm<Eigen::Infinity>();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(scaled);
  if (!(lu.rcond() > 1e-10))
    fail(ErrorCode::SpectrumHit, "Dirichlet system is singular near lambda = " + std::to_string(lambda.real()) + " + " +
                                     std::to_string(lambda.imag()) + "i");
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(sys.A.rows(), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(sys.boundary_row[i]);
    rhs(r, static_cast<Eigen::Index>(i)) = 1.0 / row_scale(r);
  }
  Eigen::MatrixXcd sol = lu.solve(rhs);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < m; ++k)
    if (!reduced || tree.boundary()[k] != tree.root()) keep.push_back(k);
  Eigen::MatrixXcd M(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b)
      M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          outward_at(tree, sys, sol.col(static_cast<Eigen::Index>(keep[a])), keep[b]);
  return M;
}

TWMatrix tw_samples(const MetricTree& tree, const std::vector<cplx>& lambdas, bool reduced, const TransferOptions& opt) {
  TWMatrix out;
  out.labels = boundary_labels(tree, reduced);
  out.lambdas = lambdas;
  for (auto lambda : lambdas) {
    out.values.push_back(tw_matrix(tree, lambda, reduced, opt));
    out.valid.push_back(true);
  }
  return out;
}

double dirichlet_conditioning(const MetricTree& tree, double lambda, const TransferOptions& opt) {
  auto sys = assemble(tree, lambda, opt);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(row_equilibrated(sys.A));
  const auto& s = svd.singularValues();
  return s(s.size() - 1) / s(0);
}

namespace {

double dirichlet_det(const MetricTree& tree, double lambda, const TransferOptions& opt) {
  auto sys = assemble(tree, lambda, opt);
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(sys.A).determinant().real();
}

std::vector<double> locate_eigenvalues(const MetricTree& tree, double lambda_max, double dk, double q_min,
                                       const TransferOptions& opt, std::vector<std::size_t>& multiplicity) {
  std::vector<double> roots;
  multiplicity.clear();
  if (lambda_max <= q_min) return roots;
  const double k_max = std::sqrt(lambda_max - q_min);
  std::vector<double> lam, det, cond;
  for (double k = 0.5 * dk; k <= k_max + dk; k += dk) {
    const double l = q_min + k * k;
    lam.push_back(l);
    det.push_back(dirichlet_det(tree, l, opt));
    cond.push_back(dirichlet_conditioning(tree, l, opt));
  }
  auto tol = [](double a, double b) { return std::abs(a - b) <= 1e-13 * std::max(1.0, std::abs(a)); };
  std::vector<std::pair<double, bool>> found;  // (lambda, from sign change)
  for (std::size_t i = 0; i + 1 < lam.size(); ++i) {
    if (det[i] == 0.0) {
      found.emplace_back(lam[i], true);
    } else if (std::signbit(det[i]) != std::signbit(det[i + 1])) {
      std::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve([&](double x) { return dirichlet_det(tree, x, opt); }, lam[i],
                                                 lam[i + 1], det[i], det[i + 1], tol, iters);
      found.emplace_back(0.5 * (r.first + r.second), true);
    }
  }
  for (std::size_t i = 1; i + 1 < lam.size(); ++i) {
    if (!(cond[i] <= cond[i - 1] && cond[i] <= cond[i + 1])) continue;
    if (std::signbit(det[i - 1]) != std::signbit(det[i + 1])) continue;
    auto r = boost::math::tools::brent_find_minima([&](double x) { return dirichlet_conditioning(tree, x, opt); },
                                                   lam[i - 1], lam[i + 1], 52);
    if (r.second >= 1e-7) continue;
    // Brent stops at half precision; the conditioning is V-shaped at a multiple root.
    auto f = [&](double x) { return dirichlet_conditioning(tree, x, opt); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = r.first * (1 - 1e-6), b = r.first * (1 + 1e-6);
    double c = b - g * (b - a), d = a + g * (b - a), fc = f(c), fd = f(d);
    while (b - a > 4e-16 * std::abs(b)) {
      if (fc < fd) {
        b = d, d = c, fd = fc, c = b - g * (b - a), fc = f(c);
      } else {
        a = c, c = d, fc = fd, d = a + g * (b - a), fd = f(d);
      }
    }
    found.emplace_back(0.5 * (a + b), false);
  }
  std::sort(found.begin(), found.end());
  for (const auto& [l, sign] : found) {
    if (l > lambda_max) continue;
    if (!roots.empty() && std::abs(l - roots.back()) < 1e-8 * std::max(1.0, std::abs(l))) continue;
    auto sys = assemble(tree, l, opt);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(row_equilibrated(sys.A));
    const auto& s = svd.singularValues();
    std::size_t null = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) null += s(k) < 1e-6 * s(0);
    roots.push_back(l);
    multiplicity.push_back(std::max<std::size_t>(null, 1));
  }
  return roots;
}

}  // namespace

SpectralData dirichlet_spectrum(const MetricTree& tree, double lambda_max, const SpectrumOptions& opt) {
  double q_min = 0.0;
  bool first = true;
  for (const auto& e : tree.edges()) {
    const double m = e.potential.min_value(e.length);
    q_min = first ? m : std::min(q_min, m);
    first = false;
  }
  const double dk = std::numbers::pi / (opt.steps_per_mode * tree.total_length());
  std::vector<std::size_t> mult, mult_fine;
  auto roots = locate_eigenvalues(tree, lambda_max, dk, q_min, opt.transfer, mult);
  auto fine = locate_eigenvalues(tree, lambda_max, 0.5 * dk, q_min, opt.transfer, mult_fine);
  std::size_t total = 0, total_fine = 0;
  for (auto m : mult) total += m;
  for (auto m : mult_fine) total_fine += m;
  if (total != total_fine)
    fail(ErrorCode::ClusterUnresolved, "eigenvalue count changes under scan refinement (" + std::to_string(total) +
                                           " vs " + std::to_string(total_fine) + ")");

  SpectralData out;
  const auto nc = opt.quadrature_cells + (opt.quadrature_cells % 2);
  for (std::size_t r = 0; r < roots.size(); ++r) {
    const double lambda = roots[r];
    auto sys = assemble(tree, lambda, opt.transfer);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(row_equilibrated(sys.A), Eigen::ComputeFullV);
    const auto cols = svd.matrixV().cols();
    // Sampled eigenfunctions on each edge for the L2 inner product (Simpson).
    std::vector<std::vector<std::vector<double>>> prof;
    std::vector<Eigen::VectorXd> vecs;
    for (std::size_t m = 0; m < mult[r]; ++m) {
      Eigen::VectorXcd v = svd.matrixV().col(cols - 1 - static_cast<Eigen::Index>(m));
      // Real eigenvectors: rotate away the arbitrary complex phase.
      Eigen::Index big;
      v.cwiseAbs().maxCoeff(&big);
      v *= std::abs(v(big)) / v(big);
      vecs.push_back(v.real());
    }
    auto sample_fn = [&](const Eigen::VectorXd& v) {
      std::vector<std::vector<double>> p;
      for (std::size_t e = 0; e < tree.edges().size(); ++e) {
        const auto& edge = tree.edges()[e];
        std::vector<double> xs(nc + 1);
        for (std::size_t i = 0; i <= nc; ++i) xs[i] = edge.length * static_cast<double>(i) / static_cast<double>(nc);
        auto vals = schrodinger_profile(edge.length, edge.potential, lambda,
                                        {v(static_cast<Eigen::Index>(2 * e)), v(static_cast<Eigen::Index>(2 * e + 1))},
                                        xs, opt.transfer);
        std::vector<double> re(nc + 1);
        for (std::size_t i = 0; i <= nc; ++i) re[i] = vals[i].real();
        p.push_back(std::move(re));
      }
      return p;
    };
    auto inner = [&](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
      double acc = 0.0;
      for (std::size_t e = 0; e < a.size(); ++e) {
        const double h = tree.edges()[e].length / static_cast<double>(nc);
        double s = 0.0;
        for (std::size_t i = 0; i <= nc; ++i) {
          const double w = (i == 0 || i == nc) ? 1.0 : (i % 2 ? 4.0 : 2.0);
          s += w * a[e][i] * b[e][i];
        }
        acc += s * h / 3.0;
      }
      return acc;
    };
    std::vector<Eigen::VectorXd> ortho;
    for (auto v : vecs) {
      for (const auto& o : ortho) v -= inner(sample_fn(v), sample_fn(o)) * o;
      const auto p = sample_fn(v);
      v /= std::sqrt(inner(p, p));
      ortho.push_back(v);
    }
    for (const auto& v : ortho) {
      std::vector<double> kap;
      std::vector<cplx> al;
      const cplx root = std::sqrt(cplx(lambda));
      for (std::size_t j = 0; j < tree.boundary().size(); ++j) {
        const double d = outward_at(tree, sys, v.cast<cplx>(), j).real();
        kap.push_back(d);
        al.push_back(d / root);
      }
      out.eigenvalues.push_back(lambda);
      out.kappa.push_back(std::move(kap));
      out.alpha.push_back(std::move(al));
    }
  }
  return out;
}

SingularTrain ray_singular_train(const MetricTree& tree, std::size_t i, std::size_t j, double T, const RayOptions& opt) {
  const auto& boundary = tree.boundary();
  if (i >= boundary.size() || j >= boundary.size()) fail(ErrorCode::UnknownVertex, "boundary index out of range");
  const auto target = boundary[j];
  std::vector<double> Q(tree.edges().size());
  for (std::size_t e = 0; e < Q.size(); ++e) Q[e] = tree.edges()[e].potential.integral(0.0, tree.edges()[e].length);

  // A wave front: delta amplitude c and step amplitude s, about to arrive at `vertex` through `edge`.
  struct Front {
    std::size_t vertex, edge;
    double time, c, s;
  };
  std::vector<Atom> atoms;
  if (i == j) atoms.push_back({0.0, -1.0, 1});
  std::vector<Front> stack;
  auto launch = [&](std::size_t from, std::size_t e, double t, double c, double s) {
    const double te = t + tree.edges()[e].length;
    if (te > T + opt.eps_t) return;
    stack.push_back({tree.other_end(e, from), e, te, c, s - 0.5 * c * Q[e]});
  };
  launch(boundary[i], tree.incident(boundary[i])[0], 0.0, 1.0, 0.0);
  std::size_t work = 0;
  while (!stack.empty()) {
    const Front f = stack.back();
    stack.pop_back();
    if (++work > opt.budget) fail(ErrorCode::TooManyRays, "ray budget exhausted before T = " + std::to_string(T));
    if (tree.vertices()[f.vertex].boundary) {
      if (f.vertex == target) {
        atoms.push_back({f.time, 2.0 * f.c, 1});
        atoms.push_back({f.time, 2.0 * f.s, 0});
      }
      launch(f.vertex, f.edge, f.time, -f.c, -f.s);
      continue;
    }
    const double n = static_cast<double>(tree.degree(f.vertex));
    for (auto e : tree.incident(f.vertex)) {
      const double sigma = e == f.edge ? 2.0 / n - 1.0 : 2.0 / n;
      if (std::abs(sigma * f.c) <= opt.eps_c && std::abs(sigma * f.s) <= opt.eps_c) continue;
      launch(f.vertex, e, f.time, sigma * f.c, sigma * f.s);
    }
  }
  return SingularTrain(std::move(atoms), opt.eps_t, opt.eps_c);
}

std::vector<double> ray_break_times(const MetricTree& tree, std::size_t i, std::size_t j, double T,
                                    const RayOptions& opt) {
  const auto& boundary = tree.boundary();
  if (i >= boundary.size() || j >= boundary.size()) fail(ErrorCode::UnknownVertex, "boundary index out of range");
  const auto target = boundary[j];
  std::vector<std::vector<double>> jumps(tree.edges().size());
  bool any = false;
  for (std::size_t e = 0; e < jumps.size(); ++e) {
    const auto& edge = tree.edges()[e];
    if (!edge.potential.piecewise_constant()) continue;
    jumps[e] = edge.potential.breakpoints(edge.length);
    any = any || !jumps[e].empty();
  }
  std::vector<double> out;
  if (!any) return out;

  struct Front {
    std::size_t vertex, edge;
    double time, c;
    bool weak;
  };
  std::vector<Front> stack;
  std::size_t work = 0;
  auto launch = [&](std::size_t from, std::size_t e, double t, double c, bool weak) {
    const auto& edge = tree.edges()[e];
    if (!weak) {
      // Each jump sends a weak front back to `from`.
      for (double x : jumps[e]) {
        const double d = edge.from == from ? x : edge.length - x;
        if (t + 2.0 * d <= T + opt.eps_t) stack.push_back({from, e, t + 2.0 * d, 0.0, true});
      }
    }
    const double te = t + edge.length;
    if (te > T + opt.eps_t) return;
    stack.push_back({tree.other_end(e, from), e, te, c, weak});
  };
  launch(boundary[i], tree.incident(boundary[i])[0], 0.0, 1.0, false);
  while (!stack.empty()) {
    const Front f = stack.back();
    stack.pop_back();
    if (++work > opt.budget) fail(ErrorCode::TooManyRays, "ray budget exhausted before T = " + std::to_string(T));
    if (tree.vertices()[f.vertex].boundary) {
      if (f.vertex == target && f.weak) out.push_back(f.time);
      launch(f.vertex, f.edge, f.time, -f.c, f.weak);
      continue;
    }
    const double n = static_cast<double>(tree.degree(f.vertex));
    for (auto e : tree.incident(f.vertex)) {
      const double sigma = e == f.edge ? 2.0 / n - 1.0 : 2.0 / n;
      if (sigma == 0.0 || (!f.weak && std::abs(sigma * f.c) <= opt.eps_c)) continue;
      launch(f.vertex, e, f.time, sigma * f.c, f.weak);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [&](double a, double b) { return b - a <= opt.eps_t; }), out.end());
  return out;
}

ResponseMatrix response_matrix(const MetricTree& tree, double T, double dx, const ResponseOptions& opt) {
  const auto& boundary = tree.boundary();
  std::vector<std::size_t> pos;
  for (std::size_t k = 0; k < boundary.size(); ++k)
    if (!opt.reduced || boundary[k] != tree.root()) pos.push_back(k);
  ResponseMatrix R;
  R.labels = boundary_labels(tree, opt.reduced);
  R.dt = dx;
  R.dx = dx;
  const auto n = static_cast<std::size_t>(std::llround(T / dx)) + 1;
  R.entries.assign(pos.size(), std::vector<DynFunction>(pos.size()));
  for (std::size_t a = 0; a < pos.size(); ++a) {
    std::vector<SampledFunction> controls(boundary.size(), SampledFunction::zeros(dx, n));
    controls[pos[a]] = ramp(dx, n);
    auto traces = td_wave_solve(tree, controls, T, dx);
    for (std::size_t b = 0; b < pos.size(); ++b) {
      auto train = ray_singular_train(tree, pos[a], pos[b], T, opt.rays);
      auto& entry = R.entries[a][b];
      std::vector<std::size_t> breaks;
      for (double t : ray_break_times(tree, pos[a], pos[b], T, opt.rays)) {
        const auto k = static_cast<std::size_t>(std::llround(t / dx));
        if (k > 0 && k < n) breaks.push_back(k);
      }
      entry.regular = regular_from_ramp(traces.deriv[pos[b]], train, breaks);
      entry.train = std::move(train);
    }
  }
  return R;
}

FourierValue fourier_of_response(const DynFunction& entry, cplx k, double T) {
  if (!(k.imag() > 0.0)) fail(ErrorCode::NonDecaying, "Fourier transform needs Im k > 0");
  const cplx I(0.0, 1.0);
  FourierValue out{0.0, 0.0};
  for (const auto& a : entry.train.atoms()) {
    if (a.time > T) continue;
    const cplx e = std::exp(I * k * a.time);
    out.value += a.order == 1 ? a.coeff * (-I * k) * e : a.coeff * e;
  }
  const auto& r = entry.regular;
  const double h = r.dt();
  const auto n = std::min(r.size(), static_cast<std::size_t>(std::floor(T / h + 1e-9)) + 1);
  for (std::size_t m = 0; m + 1 < n; ++m) {
    const double t0 = h * static_cast<double>(m), t1 = t0 + h;
    out.value += 0.5 * h * (r.right(m) * std::exp(I * k * t0) + r.left(m + 1) * std::exp(I * k * t1));
  }
  // Largest mass carried by a unit window of the data, used for the tail.
  double rho = 0.0;
  const double horizon = std::min(T, h * static_cast<double>(n - 1));
  for (double w = 0.0; w + 1.0 <= horizon + 1e-12; w += 0.5) {
    double mass = 0.0;
    for (const auto& a : entry.train.atoms())
      if (a.time >= w && a.time < w + 1.0) mass += std::abs(a.coeff) * (a.order == 1 ? std::abs(k) : 1.0);
    for (std::size_t m = 0; m + 1 < n; ++m) {
      const double t0 = h * static_cast<double>(m);
      if (t0 >= w && t0 < w + 1.0) mass += 0.5 * h * (std::abs(r.right(m)) + std::abs(r.left(m + 1)));
    }
    rho = std::max(rho, mass);
  }
  const double decay = std::exp(-k.imag());
  out.bound = std::exp(-k.imag() * T) * rho / (1.0 - decay);
  return out;
}

}  // namespace leafpeel
