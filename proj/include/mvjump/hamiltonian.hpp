#pragma once

// Hamiltonians of the constrained LQ problem and their minimization over the
// nonnegative orthant.
//
// With s = +1 (plus side) or s = -1 (minus side), P_s the same-side weight and
// P_o the opposite one, u = v^T beta and q = 1 + s u:
//
//   H_s(v) = P_s |v^T sigma|^2 + 2 s P_s v^T mu
//          + sum_marks w ( P_s [ (q^+)^2 - 1 - 2 s u ] + P_o (q^-)^2 ).
//
// H_s is C^1, convex and piecewise quadratic with kinks on the hyperplanes
// q = 0; its Hessian is bounded below by 2 min(P_+, P_-) Sigma.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "mvjump/errors.hpp"
#include "mvjump/market_model.hpp"

namespace mvjump {

enum class Side { plus, minus };

inline const char* to_string(Side s) { return s == Side::plus ? "plus" : "minus"; }

struct HamiltonianResult {
    double value = 0.0;      // inf over v >= 0
    Eigen::VectorXd argmin;  // the unique minimizer
    int iterations = 0;
    double kkt_residual = 0.0;
};

inline constexpr double kDefaultHamiltonianTol = 1e-10;
inline constexpr int kDefaultHamiltonianMaxIter = 100000;

namespace detail {

/// H_s restricted to one coefficient segment.
class HamiltonianOnSegment {
public:
    HamiltonianOnSegment(const MarketModel& model, std::size_t seg, Side side, double p_plus,
                         double p_minus)
        : cov_(model.diffusion_cov(seg)),
          mu_(model.segment(seg).mu),
          marks_(model.flat_marks(seg)),
          s_(side == Side::plus ? 1.0 : -1.0),
          p_same_(side == Side::plus ? p_plus : p_minus),
          p_other_(side == Side::plus ? p_minus : p_plus) {}

    Eigen::Index dim() const { return mu_.size(); }

    double value(const Eigen::VectorXd& v) const {
        double h = p_same_ * v.dot(cov_ * v) + 2.0 * s_ * p_same_ * v.dot(mu_);
        for (const auto& mk : marks_) {
            const double u = v.dot(mk.beta);
            const double q = 1.0 + s_ * u;
            // (q^+)^2 - 1 - 2su collapses to u^2 when q >= 0
            const double term =
                q >= 0.0 ? p_same_ * u * u : p_same_ * (-1.0 - 2.0 * s_ * u) + p_other_ * q * q;
            h += mk.weight * term;
        }
        return h;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& v) const {
        Eigen::VectorXd g = 2.0 * p_same_ * (cov_ * v) + 2.0 * s_ * p_same_ * mu_;
        for (const auto& mk : marks_) {
            const double u = v.dot(mk.beta);
            const double q = 1.0 + s_ * u;
            const double c = q >= 0.0 ? 2.0 * p_same_ * u : 2.0 * s_ * (p_other_ * q - p_same_);
            g += (mk.weight * c) * mk.beta;
        }
        return g;
    }

    /// Right-hand Hessian: on a kink (q == 0) the same-side branch is used.
    Eigen::MatrixXd hessian(const Eigen::VectorXd& v) const {
        Eigen::MatrixXd h = 2.0 * p_same_ * cov_;
        for (const auto& mk : marks_) {
            const double q = 1.0 + s_ * v.dot(mk.beta);
            const double p = q >= 0.0 ? p_same_ : p_other_;
            h.noalias() += (2.0 * mk.weight * p) * mk.beta * mk.beta.transpose();
        }
        return h;
    }

private:
    const Eigen::MatrixXd& cov_;
    const Eigen::VectorXd& mu_;
    const std::vector<FlatMark>& marks_;
    double s_;
    double p_same_;
    double p_other_;
};

inline void check_weights(double p_plus, double p_minus) {
    if (!(p_plus > 0.0) || !(p_minus > 0.0)) {
        std::ostringstream os;
        os << "Hamiltonian weights must be positive, got P+=" << p_plus << ", P-=" << p_minus;
        throw DomainError(os.str());
    }
}

inline void check_nonnegative(const Eigen::VectorXd& v, Eigen::Index m) {
    if (v.size() != m) throw StructuralError("portfolio vector has wrong dimension");
    if ((v.array() < 0.0).any()) throw DomainError("portfolio vector has a negative component");
}

}  // namespace detail

/// Projected-KKT residual: |g_i| on free components, max(0, -g_i) at the bound.
inline double kkt_residual(const Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        r = std::max(r, v[i] > 0.0 ? std::abs(g[i]) : std::max(0.0, -g[i]));
    return r;
}

inline double hamiltonian(Side side, double t, const Eigen::VectorXd& v, double p_plus,
                          double p_minus, const MarketModel& model) {
    detail::check_weights(p_plus, p_minus);
    detail::check_nonnegative(v, model.m());
    return detail::HamiltonianOnSegment(model, model.segment_index(t), side, p_plus, p_minus)
        .value(v);
}

inline double h_plus(double t, const Eigen::VectorXd& v, double p_plus, double p_minus,
                     const MarketModel& model) {
    return hamiltonian(Side::plus, t, v, p_plus, p_minus, model);
}

inline double h_minus(double t, const Eigen::VectorXd& v, double p_plus, double p_minus,
                      const MarketModel& model) {
    return hamiltonian(Side::minus, t, v, p_plus, p_minus, model);
}

/// Minimizes H_side over v >= 0 on coefficient segment `seg`.
///
/// Projected Newton iteration with an Armijo backtracking search along the
/// projection arc: components pinned at zero with a positive gradient take a
/// diagonally scaled gradient step, free components a Newton step. Because
/// H is piecewise quadratic, the iteration terminates exactly once the right
/// piece is found. A plain projected-gradient step is the fallback whenever
/// the Newton step fails to descend.
inline HamiltonianResult minimize_on_segment(Side side, std::size_t seg, double p_plus,
                                             double p_minus, const MarketModel& model,
                                             double tol = kDefaultHamiltonianTol,
                                             const std::optional<Eigen::VectorXd>& warm_start = {},
                                             int max_iterations = kDefaultHamiltonianMaxIter) {
    detail::check_weights(p_plus, p_minus);
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    const detail::HamiltonianOnSegment H(model, seg, side, p_plus, p_minus);
    const Eigen::Index m = H.dim();

    Eigen::VectorXd v;
    if (warm_start && warm_start->size() == m) {
        v = warm_start->cwiseMax(0.0);
    } else {
        // exact when there are no jumps
        Eigen::VectorXd x = model.big_sigma_segment(seg).ldlt().solve(model.segment(seg).mu);
        v = (side == Side::minus ? x : Eigen::VectorXd(-x)).cwiseMax(0.0);
        if (!v.allFinite()) v.setZero();
    }

    auto project = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.cwiseMax(0.0); };
    constexpr double armijo = 1e-4;
    constexpr double eps = std::numeric_limits<double>::epsilon();

    double f = H.value(v);
    Eigen::VectorXd g = H.gradient(v);
    double res = kkt_residual(v, g);
    int it = 0;
    for (; it < max_iterations && res > tol; ++it) {
        const double eps_bind = std::min(1e-8, (v - project(v - g)).norm());
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index i = 0; i < m; ++i)
            if (!(v[i] <= eps_bind && g[i] > 0.0)) free_idx.push_back(i);

        const Eigen::MatrixXd hess = H.hessian(v);
        Eigen::VectorXd d(m);
        for (Eigen::Index i = 0; i < m; ++i) d[i] = -g[i] / hess(i, i);
        if (!free_idx.empty()) {
            const auto nf = static_cast<Eigen::Index>(free_idx.size());
            Eigen::MatrixXd hff(nf, nf);
            Eigen::VectorXd gf(nf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                gf[a] = g[free_idx[a]];
                for (Eigen::Index b = 0; b < nf; ++b) hff(a, b) = hess(free_idx[a], free_idx[b]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(hff);
            if (llt.info() != Eigen::Success)
                throw InvariantError("Hamiltonian Hessian is not positive definite");
            const Eigen::VectorXd df = llt.solve(-gf);
            for (Eigen::Index a = 0; a < nf; ++a) d[free_idx[a]] = df[a];
        }

        auto try_arc = [&](auto&& point_at, double step0) -> bool {
            for (double step = step0; step > 1e-30; step *= 0.5) {
                Eigen::VectorXd cand = point_at(step);
                const double fc = H.value(cand);
                const double decrease = g.dot(cand - v);
                const bool sufficient = fc <= f + armijo * decrease;
                bool roundoff_ok = false;
                Eigen::VectorXd gc;
                if (!sufficient && fc <= f + 16.0 * eps * (1.0 + std::abs(f))) {
                    gc = H.gradient(cand);
                    roundoff_ok = kkt_residual(cand, gc) < res;
                }
                if (sufficient || roundoff_ok) {
                    v = std::move(cand);
                    f = fc;
                    g = roundoff_ok ? gc : H.gradient(v);
                    res = kkt_residual(v, g);
                    return true;
                }
            }
            return false;
        };

        if (try_arc([&](double s) { return project(v + s * d); }, 1.0)) continue;
        const double lip = std::max(hess.norm(), eps);
        if (try_arc([&](double s) { return project(v - s * g); }, 1.0 / lip)) continue;
        break;  // no descent possible at machine precision
    }

    // H(0) = 0 is always attainable
    if (f > 0.0) {
        v.setZero();
        f = 0.0;
        g = H.gradient(v);
        res = kkt_residual(v, g);
    }
    if (res > tol) {
        std::ostringstream os;
        os << "Hamiltonian minimization (" << to_string(side) << ") stalled after " << it
           << " iterations with KKT residual " << res;
        throw NumericError(os.str(), v, res);
    }
    return {f, std::move(v), it, res};
}

/// H*_side(t, P+, P-) and its minimizer.
inline HamiltonianResult minimize(Side side, double t, double p_plus, double p_minus,
                                  const MarketModel& model, double tol = kDefaultHamiltonianTol,
                                  const std::optional<Eigen::VectorXd>& warm_start = {}) {
    return minimize_on_segment(side, model.segment_index(t), p_plus, p_minus, model, tol,
                               warm_start);
}

/// Radius outside which H_side(t, v, P+, P-) > 0 for every t. From
/// H >= c1 |v|^2 - b |v| - c with c1 = min(P) lambda_min(Sigma),
/// b = 2 P_s |mu| + 2 (P_s - min P) sum w |beta|, c = (P_s - min P) sum w.
inline double coercivity_radius(Side side, double p_plus, double p_minus, const MarketModel& model) {
    detail::check_weights(p_plus, p_minus);
    const double p_same = side == Side::plus ? p_plus : p_minus;
    const double p_min = std::min(p_plus, p_minus);
    double radius = 0.0;
    for (std::size_t k = 0; k < model.num_segments(); ++k) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.big_sigma_segment(k),
                                                          Eigen::EigenvaluesOnly);
        const double c1 = p_min * es.eigenvalues().minCoeff();
        if (!(c1 > 0.0)) throw NumericError("Sigma_t is not positive definite");
        double wb = 0.0;
        double w = 0.0;
        for (const auto& mk : model.flat_marks(k)) {
            wb += mk.weight * mk.beta.norm();
            w += mk.weight;
        }
        const double b = 2.0 * p_same * model.segment(k).mu.norm() + 2.0 * (p_same - p_min) * wb;
        const double c = (p_same - p_min) * w;
        radius = std::max(radius, (b + std::sqrt(b * b + 4.0 * c1 * c)) / (2.0 * c1));
    }
    return radius;
}

/// Exhaustive grid search over [0, radius]^m followed by two refinement passes,
/// each on a box 10x narrower centred on the incumbent. Test oracle for small m.
inline HamiltonianResult minimize_brute(Side side, double t, double p_plus, double p_minus,
                                        const MarketModel& model, double radius, int grid_points) {
    detail::check_weights(p_plus, p_minus);
    const Eigen::Index m = model.m();
    if (m > 3) throw DomainError("brute-force oracle supports at most 3 assets");
    if (grid_points < 3) throw DomainError("brute-force oracle needs at least 3 points per axis");
    if (!(radius > 0.0)) throw DomainError("search radius must be positive");
    const detail::HamiltonianOnSegment H(model, model.segment_index(t), side, p_plus, p_minus);

    Eigen::VectorXd best = Eigen::VectorXd::Zero(m);
    double best_val = H.value(best);
    int evaluations = 1;

    Eigen::VectorXd lo = Eigen::VectorXd::Zero(m);
    double width = radius;
    for (int pass = 0; pass < 3; ++pass) {
        const double h = width / (grid_points - 1);
        Eigen::VectorXi idx = Eigen::VectorXi::Zero(m);
        const Eigen::VectorXd base = lo;
        while (true) {
            Eigen::VectorXd v = base + h * idx.cast<double>();
            const double val = H.value(v);
            ++evaluations;
            if (val < best_val) {
                best_val = val;
                best = v;
            }
            Eigen::Index a = 0;
            while (a < m && ++idx[a] == grid_points) idx[a++] = 0;
            if (a == m) break;
        }
        width /= 10.0;
        lo = (best.array() - 0.5 * width).cwiseMax(0.0).matrix();
    }
    return {best_val, best, evaluations, kkt_residual(best, H.gradient(best))};
}

}  // namespace mvjump
