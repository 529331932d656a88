#pragma once

// Explicit solutions for one asset, one Brownian motion and a single jump mark
// of unit intensity with time-invariant coefficients.

#include <cmath>
#include <functional>
#include <vector>

#include "mvjump/errors.hpp"
#include "mvjump/market_model.hpp"
#include "mvjump/riccati.hpp"

namespace mvjump {

struct ScalarCaseParams {
    double mu = 0.0;
    double sigma = 0.0;
    double beta = 0.0;
    double horizon = 1.0;

    /// sigma^2 + beta^2 - beta mu; negative means the sign-flipping regime.
    double discriminant() const { return sigma * sigma + beta * beta - beta * mu; }

    MarketModel model() const { return one_asset_model(mu, sigma, {{beta, 1.0}}, horizon); }
};

namespace detail {
inline void require_beta_pos(const ScalarCaseParams& p) {
    if (!(p.mu > 0.0 && p.sigma > 0.0 && p.beta > 0.0))
        throw DomainError("case requires mu, sigma, beta > 0");
}
inline void require_pm(double pm) {
    if (!(pm > 0.0 && pm <= 1.0)) throw DomainError("P- must lie in (0, 1]");
}
}  // namespace detail

/// Minimizer of H- for beta > 0 (with P+ = 1).
inline double vhat_minus_beta_pos(const ScalarCaseParams& p, double p_minus) {
    detail::require_beta_pos(p);
    detail::require_pm(p_minus);
    const double s2 = p.sigma * p.sigma;
    const double b2 = p.beta * p.beta;
    if (p.discriminant() <= 0.0)
        return (p_minus * p.mu - p_minus * p.beta + p.beta) / (p_minus * s2 + b2);
    return p.mu / (s2 + b2);
}

/// Minimum of H- for beta > 0 (with P+ = 1).
inline double hstar_minus_beta_pos(const ScalarCaseParams& p, double p_minus) {
    detail::require_beta_pos(p);
    detail::require_pm(p_minus);
    const double s2 = p.sigma * p.sigma;
    const double b2 = p.beta * p.beta;
    if (p.discriminant() <= 0.0) {
        const double a = p.mu * p_minus - p.beta * p_minus + p.beta;
        return -a * a / (s2 * p_minus + b2) + 1.0 - p_minus;
    }
    return -p.mu * p.mu * p_minus / (s2 + b2);
}

/// P-(t) on a uniform grid of `steps` intervals from RK4 applied to the scalar
/// equation dP-/dt = -H-*(P-), P-(T) = 1. Index i corresponds to t = i T / steps.
inline std::vector<double> p_minus_beta_pos(const ScalarCaseParams& p, int steps) {
    detail::require_beta_pos(p);
    if (steps < 1) throw DomainError("steps must be positive");
    const double h = p.horizon / steps;
    auto f = [&](double pm) { return -hstar_minus_beta_pos(p, std::min(pm, 1.0)); };
    std::vector<double> out(static_cast<std::size_t>(steps) + 1);
    double y = 1.0;
    out.back() = y;
    for (int i = steps - 1; i >= 0; --i) {
        const double k1 = f(y);
        const double k2 = f(y - 0.5 * h * k1);
        const double k3 = f(y - 0.5 * h * k2);
        const double k4 = f(y - h * k3);
        y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out[static_cast<std::size_t>(i)] = y;
    }
    return out;
}

struct PlusSideCheck {
    double max_p_plus_deviation;  // max |P+ - 1|
    double max_vhat_plus;         // max |vhat+|
    bool passed;
};

/// For beta >= 0 and mu >= 0, H+* vanishes identically, so P+ = 1 and vhat+ = 0.
/// Solves the full system and reports how closely that holds.
inline PlusSideCheck case_beta_pos_p_plus(const ScalarCaseParams& p, int steps = 2000,
                                          double tol = 1e-10) {
    if (!(p.beta >= 0.0 && p.mu >= 0.0 && p.sigma > 0.0))
        throw DomainError("P+ = 1 check requires beta >= 0, mu >= 0, sigma > 0");
    const auto sol = solve(p.model(), steps);
    PlusSideCheck r{0.0, 0.0, false};
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        r.max_p_plus_deviation = std::max(r.max_p_plus_deviation, std::abs(sol.p_plus[i] - 1.0));
        r.max_vhat_plus = std::max(r.max_vhat_plus, sol.vhat_plus[i].cwiseAbs().maxCoeff());
    }
    r.passed = r.max_p_plus_deviation <= tol && r.max_vhat_plus <= tol;
    return r;
}

struct BetaNegCase {
    double vhat_minus;
    double p_plus;  // identically 1
    double rate;    // mu^2 / (sigma^2 + beta^2)
    double horizon;

    double p_minus(double t) const {
        if (!(t >= 0.0 && t <= horizon)) throw DomainError("time outside [0, T]");
        return std::exp(-rate * (horizon - t));
    }
};

/// -1 < beta <= 0, mu > 0: vhat- = mu / (sigma^2 + beta^2), P+ = 1,
/// P-(t) = exp(-mu^2 / (sigma^2 + beta^2) (T - t)).
inline BetaNegCase case_beta_neg(const ScalarCaseParams& p) {
    if (!(p.beta > -1.0 && p.beta <= 0.0)) throw DomainError("case requires -1 < beta <= 0");
    if (!(p.mu > 0.0 && p.sigma > 0.0)) throw DomainError("case requires mu, sigma > 0");
    const double s = p.sigma * p.sigma + p.beta * p.beta;
    return {p.mu / s, 1.0, p.mu * p.mu / s, p.horizon};
}

/// log L_{s,t} = -(mu v - beta v + sigma^2 v^2 / 2)(t - s) - sigma v (W_t - W_s).
inline double log_factor_L(const ScalarCaseParams& p, double vhat, double s, double t,
                           double brownian_increment) {
    if (s > t) throw DomainError("L_{s,t} requires s <= t");
    return -(p.mu * vhat - p.beta * vhat + 0.5 * p.sigma * p.sigma * vhat * vhat) * (t - s) -
           p.sigma * vhat * brownian_increment;
}

inline double factor_L(const ScalarCaseParams& p, double vhat, double s, double t,
                       double brownian_increment) {
    return std::exp(log_factor_L(p, vhat, s, t, brownian_increment));
}

/// Brownian path and jump times on which an explicit solution is evaluated.
/// dw[i] is W(times[i+1]) - W(times[i]); every jump time must be a grid time.
struct NoisePath {
    std::vector<double> times;
    std::vector<double> dw;
    std::vector<double> jump_times;
};

struct ExplicitPoint {
    double t;
    double y;  // X_t - d*
    bool is_jump;
};

namespace detail {

inline void check_noise(const NoisePath& noise) {
    if (noise.times.size() < 2 || noise.dw.size() + 1 != noise.times.size())
        throw DomainError("noise path needs one increment per grid interval");
}

}  // namespace detail

/// X - d* for beta > 0 and sigma^2 + beta^2 < beta mu, evaluated on the noise
/// grid. The path carries factor L over intervals [tau_{2k}, tau_{2k+1}), is
/// frozen over [tau_{2k+1}, tau_{2k+2}) and picks up (1 - beta vhat-) at every
/// jump. vhat(t) gives the minimizer in force at t; L is accumulated interval
/// by interval with vhat at the left endpoint.
inline std::vector<ExplicitPoint> explicit_path_sign_flip(const ScalarCaseParams& p, double d_star,
                                                          double x0, const NoisePath& noise,
                                                          const std::function<double(double)>& vhat) {
    detail::require_beta_pos(p);
    if (!(p.discriminant() < 0.0)) throw DomainError("sign-flip path requires sigma^2 + beta^2 < beta mu");
    if (!(x0 < d_star)) throw DomainError("sign-flip path requires x0 < d*");
    detail::check_noise(noise);

    std::vector<ExplicitPoint> out;
    double y = x0 - d_star;
    std::size_t jumps = 0;
    std::size_t next = 0;
    out.push_back({noise.times.front(), y, false});
    for (std::size_t i = 0; i + 1 < noise.times.size(); ++i) {
        const double s = noise.times[i];
        const double t = noise.times[i + 1];
        if (jumps % 2 == 0) y *= factor_L(p, vhat(s), s, t, noise.dw[i]);
        out.push_back({t, y, false});
        while (next < noise.jump_times.size() && noise.jump_times[next] <= t) {
            y *= 1.0 - p.beta * vhat(t);
            ++jumps;
            ++next;
            out.push_back({t, y, true});
        }
    }
    return out;
}

/// X - d* for sigma^2 + beta^2 >= beta mu (either sign of beta): L over the
/// whole horizon times (1 - beta vhat-) at every jump; never positive.
inline std::vector<ExplicitPoint> explicit_path_nonpositive(const ScalarCaseParams& p, double d_star,
                                                            double x0, const NoisePath& noise,
                                                            const std::function<double(double)>& vhat) {
    if (!(p.discriminant() >= 0.0))
        throw DomainError("path requires sigma^2 + beta^2 >= beta mu");
    if (!(x0 <= d_star)) throw DomainError("path requires x0 <= d*");
    detail::check_noise(noise);

    std::vector<ExplicitPoint> out;
    double y = x0 - d_star;
    std::size_t next = 0;
    out.push_back({noise.times.front(), y, false});
    for (std::size_t i = 0; i + 1 < noise.times.size(); ++i) {
        const double s = noise.times[i];
        const double t = noise.times[i + 1];
        y *= factor_L(p, vhat(s), s, t, noise.dw[i]);
        out.push_back({t, y, false});
        while (next < noise.jump_times.size() && noise.jump_times[next] <= t) {
            y *= 1.0 - p.beta * vhat(t);
            ++next;
            out.push_back({t, y, true});
        }
    }
    return out;
}

/// Noise grid and jump times read off a recorded simulation path of a
/// one-factor model, for matched-noise comparisons.
template <class Record>
NoisePath noise_from_record(const Record& path) {
    NoisePath np;
    if (path.empty()) return np;
    np.times.push_back(path.front().t);
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (path[i].is_jump) {
            np.jump_times.push_back(path[i].t);
            continue;
        }
        np.times.push_back(path[i].t);
        np.dw.push_back(path[i].dw.size() > 0 ? path[i].dw[0] : 0.0);
    }
    return np;
}

}  // namespace mvjump
