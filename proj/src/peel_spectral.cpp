#include "leafpeel/peel_spectral.hpp"

#include <algorithm>
#include <cmath>

#include "leafpeel/error.hpp"

namespace leafpeel {

SpectralVertexTrace vertex_trace_spectral(const Sheaf& sheaf, const std::vector<cplx>& values,
                                          const std::vector<cplx>& derivs, cplx lambda,
                                          const PeelSpectralOptions& opt) {
  const std::size_t m0 = sheaf.size();
  if (m0 == 0 || values.size() != m0 || derivs.size() != m0 || sheaf.edges.size() != m0)
    fail(ErrorCode::InconsistentSheafData, "sheaf data and boundary row sizes differ");
  SpectralVertexTrace out;
  out.lambda = lambda;
  std::vector<cplx> centre(m0);
  cplx sum{0.0};
  double scale = 0.0;
  const double kscale = std::max(1.0, std::sqrt(std::abs(lambda)));
  for (std::size_t k = 0; k < m0; ++k) {
    const auto& e = sheaf.edges[k];
    // x runs from the center to the boundary, so the outward derivative is -u'(l).
    auto c = schrodinger_transfer(e.length, e.potential, lambda, Sweep::Backward, {values[k], -derivs[k]},
                                  opt.transfer);
    centre[k] = c.u;
    sum += c.du;
    scale = std::max({scale, std::abs(c.u), std::abs(c.du) / kscale});
  }
  out.u0 = centre[0];
  out.du0 = -sum;
  double dev = 0.0;
  for (std::size_t k = 1; k < m0; ++k) dev = std::max(dev, std::abs(centre[k] - centre[0]));
  out.residual = scale > 0.0 ? dev / scale : dev;
  if (out.residual > opt.consistency_tol)
    fail(ErrorCode::ConsistencyFailure,
         "sheaf edges disagree at the center (relative residual " + std::to_string(out.residual) + ")");
  return out;
}

namespace {

SpectralVertexTrace row_trace(const Sheaf& sheaf, const Eigen::MatrixXcd& M, std::size_t row, cplx lambda,
                              const PeelSpectralOptions& opt) {
  std::vector<cplx> values, derivs;
  for (auto p : sheaf.members) {
    if (p >= static_cast<std::size_t>(M.rows())) fail(ErrorCode::InconsistentSheafData, "sheaf member out of range");
    values.push_back(p == row ? cplx(1.0) : cplx(0.0));
    derivs.push_back(M(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(p)));
  }
  return vertex_trace_spectral(sheaf, values, derivs, lambda, opt);
}

}  // namespace

SpectralVertexTrace vertex_trace_spectral(const Sheaf& sheaf, const Eigen::MatrixXcd& M, cplx lambda,
                                          const PeelSpectralOptions& opt) {
  if (sheaf.members.empty()) fail(ErrorCode::InconsistentSheafData, "empty sheaf");
  return row_trace(sheaf, M, sheaf.members.front(), lambda, opt);
}

Eigen::MatrixXcd peel_tw(const Eigen::MatrixXcd& M, const Sheaf& sheaf, cplx lambda,
                         const PeelSpectralOptions& opt) {
  if (M.rows() != M.cols()) fail(ErrorCode::InconsistentSheafData, "TW matrix must be square");
  const std::size_t n = static_cast<std::size_t>(M.rows());
  const auto order = peeled_order(n, sheaf.members);
  const std::size_t first = *std::min_element(sheaf.members.begin(), sheaf.members.end());

  auto head = row_trace(sheaf, M, first, lambda, opt);
  const double kscale = std::max(1.0, std::sqrt(std::abs(lambda)));
  if (std::abs(head.u0) <= opt.singular_tol * std::max(1.0, std::abs(head.du0) / kscale))
    fail(ErrorCode::PeelSingularity, "u(0) vanishes: lambda is a Dirichlet eigenvalue of the sheaf");

  const auto N = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXcd out(N, N);
  std::size_t zero_slot = 0;
  for (std::size_t a = 0; a < order.size(); ++a)
    if (!order[a]) zero_slot = a;
  const auto z = static_cast<Eigen::Index>(zero_slot);

  const cplx m00 = head.du0 / head.u0;
  out(z, z) = m00;
  for (std::size_t b = 0; b < order.size(); ++b) {
    if (!order[b]) continue;
    out(z, static_cast<Eigen::Index>(b)) =
        M(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(*order[b])) / head.u0;
  }
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (!order[a]) continue;
    const auto ia = static_cast<Eigen::Index>(a);
    auto tr = row_trace(sheaf, M, *order[a], lambda, opt);
    out(ia, z) = tr.du0 - tr.u0 * m00;
    for (std::size_t b = 0; b < order.size(); ++b) {
      if (!order[b]) continue;
      const auto ib = static_cast<Eigen::Index>(b);
      out(ia, ib) = M(static_cast<Eigen::Index>(*order[a]), static_cast<Eigen::Index>(*order[b])) - tr.u0 * out(z, ib);
    }
  }
  return out;
}

TWMatrix peel_tw(const TWMatrix& M, const Sheaf& sheaf, const std::string& center_label,
                 const PeelSpectralOptions& opt) {
  const auto order = peeled_order(M.labels.size(), sheaf.members);
  TWMatrix out;
  for (const auto& o : order) out.labels.push_back(o ? M.labels[*o] : center_label);
  const auto n = static_cast<Eigen::Index>(order.size());
  for (std::size_t s = 0; s < M.lambdas.size(); ++s) {
    out.lambdas.push_back(M.lambdas[s]);
    const bool ok_in = s >= M.valid.size() || M.valid[s];
    if (ok_in) {
      try {
        out.values.push_back(peel_tw(M.values[s], sheaf, M.lambdas[s], opt));
        out.valid.push_back(true);
        continue;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PeelSingularity) throw;
      }
    }
    out.values.push_back(Eigen::MatrixXcd::Constant(n, n, cplx(std::nan(""), std::nan(""))));
    out.valid.push_back(false);
  }
  return out;
}

}  // namespace leafpeel
