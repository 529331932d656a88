#pragma once

// Backward solver for the coupled system
//
//   dP+/dt = -H+*(t, g(P+), g(P-)),   dP-/dt = -H-*(t, g(P+), g(P-)),
//   P+(T) = P-(T) = 1,
//
// with the truncation g(P) = alpha v (P ^ 1). The exact solution stays inside
// [alpha, 1], so a truncation that actually clips is reported as a failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "mvjump/errors.hpp"
#include "mvjump/hamiltonian.hpp"
#include "mvjump/market_model.hpp"

namespace mvjump {

struct RiccatiSolution {
    std::vector<double> grid;  // 0 = t_0 < ... < t_N = T, uniform
    std::vector<double> p_plus;
    std::vector<double> p_minus;
    std::vector<Eigen::VectorXd> vhat_plus;
    std::vector<Eigen::VectorXd> vhat_minus;
    double alpha = 0.0;
    int step_count = 0;
    double tol = kDefaultHamiltonianTol;
    bool truncation_active = false;  // only ever true when solve() was told not to throw
    MarketModel model;

    double p_plus0() const { return p_plus.front(); }
    double p_minus0() const { return p_minus.front(); }
    double horizon() const { return grid.back(); }
};

struct SolveOptions {
    int steps = 2000;
    double tol = kDefaultHamiltonianTol;
    double terminal_plus = 1.0;
    double terminal_minus = 1.0;
    bool throw_on_truncation = true;
};

namespace detail {

struct RiccatiRhs {
    const MarketModel& model;
    double alpha;
    double upper;
    double tol;
    Eigen::VectorXd warm_plus;
    Eigen::VectorXd warm_minus;
    bool clipped = false;
    double clipped_at = 0.0;

    double truncate(double p, double t) {
        const double g = std::clamp(p, alpha, upper);
        if (g != p && !clipped) {
            clipped = true;
            clipped_at = t;
        }
        return g;
    }

    // returns (dP+/dt, dP-/dt)
    Eigen::Vector2d operator()(std::size_t seg, double t, const Eigen::Vector2d& p) {
        const double pp = truncate(p[0], t);
        const double pm = truncate(p[1], t);
        auto hp = minimize_on_segment(Side::plus, seg, pp, pm, model, tol, warm_plus);
        auto hm = minimize_on_segment(Side::minus, seg, pp, pm, model, tol, warm_minus);
        warm_plus = std::move(hp.argmin);
        warm_minus = std::move(hm.argmin);
        return {-hp.value, -hm.value};
    }
};

}  // namespace detail

/// Integrates the coupled backward ODE with classical RK4 on `steps` uniform
/// intervals and tabulates the minimizers at every grid point.
inline RiccatiSolution solve(const MarketModel& model, const SolveOptions& opt = {}) {
    if (opt.steps < 16) throw DomainError("Riccati solve needs at least 16 steps");
    const double alpha = alpha_bound(model);
    const double upper = std::max({1.0, opt.terminal_plus, opt.terminal_minus});
    const int N = opt.steps;
    const double T = model.horizon();
    const double h = T / N;

    RiccatiSolution sol{.grid = std::vector<double>(N + 1),
                        .p_plus = std::vector<double>(N + 1),
                        .p_minus = std::vector<double>(N + 1),
                        .vhat_plus = std::vector<Eigen::VectorXd>(N + 1),
                        .vhat_minus = std::vector<Eigen::VectorXd>(N + 1),
                        .alpha = alpha,
                        .step_count = N,
                        .tol = opt.tol,
                        .truncation_active = false,
                        .model = model};
    for (int i = 0; i <= N; ++i) sol.grid[i] = i == N ? T : i * h;

    detail::RiccatiRhs rhs{model, alpha, upper, opt.tol, {}, {}};
    auto record = [&](int i, const Eigen::Vector2d& p) {
        sol.p_plus[i] = p[0];
        sol.p_minus[i] = p[1];
        const std::size_t seg = model.segment_index(sol.grid[i]);
        const double pp = rhs.truncate(p[0], sol.grid[i]);
        const double pm = rhs.truncate(p[1], sol.grid[i]);
        sol.vhat_plus[i] = minimize_on_segment(Side::plus, seg, pp, pm, model, opt.tol, rhs.warm_plus).argmin;
        sol.vhat_minus[i] = minimize_on_segment(Side::minus, seg, pp, pm, model, opt.tol, rhs.warm_minus).argmin;
    };

    Eigen::Vector2d p(opt.terminal_plus, opt.terminal_minus);
    record(N, p);
    for (int i = N - 1; i >= 0; --i) {
        const double t1 = sol.grid[i + 1];
        // coefficients in force on the open step interval
        const std::size_t seg = model.segment_index(0.5 * (sol.grid[i] + t1));
        const Eigen::Vector2d k1 = rhs(seg, t1, p);
        const Eigen::Vector2d k2 = rhs(seg, t1 - 0.5 * h, p - 0.5 * h * k1);
        const Eigen::Vector2d k3 = rhs(seg, t1 - 0.5 * h, p - 0.5 * h * k2);
        const Eigen::Vector2d k4 = rhs(seg, t1 - h, p - h * k3);
        p -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        record(i, p);
    }

    sol.truncation_active = rhs.clipped;
    if (rhs.clipped && opt.throw_on_truncation) {
        std::ostringstream os;
        os << "truncation became active at t=" << rhs.clipped_at
           << " (P left [alpha, 1]); use a smaller step";
        throw IntegrationError(os.str(), rhs.clipped_at);
    }
    return sol;
}

inline RiccatiSolution solve(const MarketModel& model, int steps, double tol = kDefaultHamiltonianTol) {
    SolveOptions opt;
    opt.steps = steps;
    opt.tol = tol;
    return solve(model, opt);
}

/// Closed-form P- for diffusion-only markets in which the unconstrained
/// minimizer Sigma^{-1} mu is already nonnegative: exp(-int_t^T mu^T Sigma^{-1} mu).
inline std::function<double(double)> analytic_diffusion_p_minus(const MarketModel& model) {
    for (std::size_t k = 0; k < model.num_segments(); ++k) {
        if (!model.flat_marks(k).empty() && model.total_intensity(k) > 0.0)
            throw DomainError("analytic P- oracle requires a model without jumps");
        const Eigen::VectorXd x = model.big_sigma_segment(k).ldlt().solve(model.segment(k).mu);
        if ((x.array() < 0.0).any())
            throw DomainError("analytic P- oracle requires Sigma^{-1} mu >= 0 on every segment");
    }
    return [model](double t) {
        model.segment_index(t);  // domain check
        return std::exp(-sharpe_integral(model, t));
    };
}

struct RiccatiPoint {
    double p_plus;
    double p_minus;
    Eigen::VectorXd vhat_plus;
    Eigen::VectorXd vhat_minus;
};

namespace detail {

// Index i with grid[i] <= t <= grid[i+1]; `exact` set when t is a grid point.
inline std::size_t locate(const RiccatiSolution& sol, double t, bool& exact) {
    if (!(t >= 0.0 && t <= sol.horizon())) {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << sol.horizon() << "]";
        throw DomainError(os.str());
    }
    const auto it = std::upper_bound(sol.grid.begin(), sol.grid.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(sol.grid.begin(), it));
    i = i == 0 ? 0 : i - 1;
    exact = sol.grid[i] == t;
    if (i + 1 >= sol.grid.size()) i = sol.grid.size() - 2, exact = false;
    if (!exact && sol.grid[i + 1] == t) {
        ++i;
        exact = true;
    }
    return i;
}

}  // namespace detail

/// Linearly interpolated (P+, P-) at t.
inline std::pair<double, double> interpolate_p(const RiccatiSolution& sol, double t) {
    bool exact = false;
    const std::size_t i = detail::locate(sol, t, exact);
    if (exact) return {sol.p_plus[i], sol.p_minus[i]};
    const double w = (t - sol.grid[i]) / (sol.grid[i + 1] - sol.grid[i]);
    return {(1.0 - w) * sol.p_plus[i] + w * sol.p_plus[i + 1],
            (1.0 - w) * sol.p_minus[i] + w * sol.p_minus[i + 1]};
}

/// Minimizer of one side at t; stored value on grid points, otherwise
/// re-solved at the interpolated (P+, P-).
inline Eigen::VectorXd vhat_at(const RiccatiSolution& sol, Side side, double t) {
    bool exact = false;
    const std::size_t i = detail::locate(sol, t, exact);
    if (exact) return side == Side::plus ? sol.vhat_plus[i] : sol.vhat_minus[i];
    const auto [pp, pm] = interpolate_p(sol, t);
    const auto& warm = side == Side::plus ? sol.vhat_plus[i] : sol.vhat_minus[i];
    return minimize(side, t, pp, pm, sol.model, sol.tol, warm).argmin;
}

inline RiccatiPoint interpolate(const RiccatiSolution& sol, double t) {
    const auto [pp, pm] = interpolate_p(sol, t);
    return {pp, pm, vhat_at(sol, Side::plus, t), vhat_at(sol, Side::minus, t)};
}

/// Largest |difference| of (P+, P-) between a solution and one on a grid
/// refined by an integer factor, compared at the coarse grid points.
inline double max_grid_difference(const RiccatiSolution& coarse, const RiccatiSolution& fine) {
    const auto n_c = coarse.grid.size() - 1;
    const auto n_f = fine.grid.size() - 1;
    if (n_f % n_c != 0) throw DomainError("fine grid must refine the coarse grid");
    const auto r = n_f / n_c;
    double d = 0.0;
    for (std::size_t i = 0; i <= n_c; ++i) {
        d = std::max(d, std::abs(coarse.p_plus[i] - fine.p_plus[i * r]));
        d = std::max(d, std::abs(coarse.p_minus[i] - fine.p_minus[i * r]));
    }
    return d;
}

/// CSV with header t,p_plus,p_minus,vhat_plus_1..m,vhat_minus_1..m.
inline void write_csv(std::ostream& os, const RiccatiSolution& sol) {
    const Eigen::Index m = sol.model.m();
    os << "t,p_plus,p_minus";
    for (Eigen::Index a = 1; a <= m; ++a) os << ",vhat_plus_" << a;
    for (Eigen::Index a = 1; a <= m; ++a) os << ",vhat_minus_" << a;
    os << '\n';
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << buf;
    };
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        put(sol.grid[i]);
        os << ',';
        put(sol.p_plus[i]);
        os << ',';
        put(sol.p_minus[i]);
        for (Eigen::Index a = 0; a < m; ++a) os << ',', put(sol.vhat_plus[i][a]);
        for (Eigen::Index a = 0; a < m; ++a) os << ',', put(sol.vhat_minus[i][a]);
        os << '\n';
    }
}

}  // namespace mvjump
