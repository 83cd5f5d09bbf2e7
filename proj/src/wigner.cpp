#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "spincat/lindblad.hpp"

namespace spincat {

namespace {

void require_fock_basis(const DensityMatrix& rho) {
    if (rho.basis.kind == BasisKind::full) {
        throw ConfigError("wigner: needs the collective or bosonic basis");
    }
}

} // namespace

// W(beta) = (2/pi) Tr[rho D(g) Pi], g = 2 beta, x = |g|^2, with the untruncated
// elements <n+k|D(g)|n> = e^{i k arg g} f_n^k,
//   f_n^k = e^{-x/2} sqrt(n!/(n+k)!) x^{k/2} L_n^(k)(x),
//   f_{n+1}^k = ((2n+1+k-x) f_n^k - sqrt(n(n+k)) f_{n-1}^k) / sqrt((n+1)(n+k+1)).
// Hermitian rho: W = (2/pi) sum_n (-1)^n [rho_nn f_n^0 + 2 sum_k Re(rho_{n,n+k} e^{ik arg g}) f_n^k].
WignerGrid wigner(const DensityMatrix& rho, const std::vector<double>& re_axis,
                  const std::vector<double>& im_axis, Execution exec) {
    require_fock_basis(rho);
    if (re_axis.empty() || im_axis.empty()) {
        throw ConfigError("wigner: empty axis");
    }
    const auto d = rho.rho.rows();

    WignerGrid out;
    out.re_axis = re_axis;
    out.im_axis = im_axis;
    out.values.resize(static_cast<Eigen::Index>(im_axis.size()), static_cast<Eigen::Index>(re_axis.size()));
    const double limit = 0.5 * static_cast<double>(d - 1);
    for (double x : re_axis) {
        for (double y : im_axis) {
            if (x * x + y * y > limit) {
                out.window_exceeds_truncation = true;
            }
        }
    }

    const std::size_t nre = re_axis.size();
    const std::size_t total = nre * im_axis.size();
    for_each_index(total, exec, [&](std::size_t idx) {
        const std::size_t iy = idx / nre;
        const std::size_t ix = idx % nre;
        const cplx g = 2.0 * cplx(re_axis[ix], im_axis[iy]);
        const double x = std::norm(g);
        const double th = std::arg(g);
        double w = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            const double kd = static_cast<double>(k);
            double f_prev = 0.0;
            double f = (x > 0.0) ? std::exp(0.5 * (kd * std::log(x) - x - std::lgamma(kd + 1.0)))
                                 : (k == 0 ? 1.0 : 0.0);
            const cplx phase = std::polar(1.0, kd * th);
            double diag = 0.0;
            for (Eigen::Index n = 0; n + k < d; ++n) {
                const double r = (k == 0) ? std::real(rho.rho(n, n)) : std::real(rho.rho(n, n + k) * phase);
                diag += (n % 2 == 0) ? r * f : -r * f;
                const double nd = static_cast<double>(n);
                const double f_next =
                    ((2.0 * nd + 1.0 + kd - x) * f - std::sqrt(nd * (nd + kd)) * f_prev) /
                    std::sqrt((nd + 1.0) * (nd + kd + 1.0));
                f_prev = f;
                f = f_next;
            }
            w += (k == 0) ? diag : 2.0 * diag;
        }
        out.values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix)) = 2.0 / std::numbers::pi * w;
    });
    return out;
}

double wigner_point_reference(const DensityMatrix& rho, cplx beta) {
    require_fock_basis(rho);
    const auto d = rho.rho.rows();
    // zero-pad so the displaced support stays well inside the truncation
    const double reach = std::sqrt(static_cast<double>(d)) + 2.0 * std::abs(beta) + 8.0;
    const auto big = d + static_cast<Eigen::Index>(std::ceil(reach * reach));
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(big, big);
    r.topLeftCorner(d, d) = rho.rho;
    const Eigen::MatrixXcd a = Eigen::MatrixXcd(truncated_annihilation(static_cast<int>(big)));
    const Eigen::MatrixXcd gen = beta * a.adjoint() - std::conj(beta) * a;
    const Eigen::MatrixXcd disp = gen.exp();
    Eigen::VectorXcd parity(big);
    for (Eigen::Index i = 0; i < big; ++i) {
        parity(i) = (i % 2 == 0) ? 1.0 : -1.0;
    }
    const Eigen::MatrixXcd op = disp * parity.asDiagonal() * disp.adjoint();
    return 2.0 / std::numbers::pi * std::real((r * op).trace());
}

} // namespace spincat
