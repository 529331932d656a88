#pragma once

// Value function, Lagrangian value, vertex d*, the optimal feedback map and the
// efficient frontier, all read off a solved RiccatiSolution.

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "mvjump/errors.hpp"
#include "mvjump/riccati.hpp"

namespace mvjump {

struct PolicySpec {
    double x0 = 0.0;
    double z = 0.0;
    double d_star = 0.0;
    std::shared_ptr<const RiccatiSolution> solution;
};

/// P+(t) (x+)^2 + P-(t) (x-)^2.
inline double value_function(double t, double x, const RiccatiSolution& sol) {
    const auto [pp, pm] = interpolate_p(sol, t);
    const double xp = std::max(x, 0.0);
    const double xm = std::max(-x, 0.0);
    return pp * xp * xp + pm * xm * xm;
}

/// Optimal value of the unconstrained quadratic problem with vertex d,
/// started from x at time 0.
inline double lagrangian_value(double x, double d, const RiccatiSolution& sol) {
    return value_function(0.0, x - d, sol);
}

/// d -> V(0, x0; d) - (d - z)^2.
inline double dual_objective(double x0, double z, double d, const RiccatiSolution& sol) {
    return lagrangian_value(x0, d, sol) - (d - z) * (d - z);
}

/// Vertex (z - x0 P-(0)) / (1 - P-(0)). Also checks that it maximizes the
/// dual objective against its neighbours.
inline double d_star(double x0, double z, const RiccatiSolution& sol) {
    if (z < x0) throw DomainError("target mean z must be at least x0");
    const double pm = sol.p_minus0();
    if (!(pm < 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "P-(0) = " << pm << " is not below 1; the solve is broken or the market infeasible";
        throw InvariantError(os.str());
    }
    const double d = (z - x0 * pm) / (1.0 - pm);
    const double h = 1e-3 * std::max(1.0, std::abs(d));
    const double f = dual_objective(x0, z, d, sol);
    if (dual_objective(x0, z, d - h, sol) > f || dual_objective(x0, z, d + h, sol) > f)
        throw InvariantError("d* is not a maximizer of the dual objective");
    return d;
}

inline PolicySpec make_policy(double x0, double z, std::shared_ptr<const RiccatiSolution> sol) {
    const double d = d_star(x0, z, *sol);
    return {x0, z, d, std::move(sol)};
}

/// vhat+(t) (x - d*)+ + vhat-(t) (x - d*)-, with x the pre-jump wealth.
inline Eigen::VectorXd feedback(double t, double x_pre_jump, const PolicySpec& policy) {
    const RiccatiSolution& sol = *policy.solution;
    const double y = x_pre_jump - policy.d_star;
    if (y > 0.0) return y * vhat_at(sol, Side::plus, t);
    if (y < 0.0) return -y * vhat_at(sol, Side::minus, t);
    sol.model.segment_index(t);
    return Eigen::VectorXd::Zero(sol.model.m());
}

struct FrontierPoint {
    double z;
    double variance;
    double std;
};

inline std::vector<FrontierPoint> frontier(double x0, const std::vector<double>& z_values,
                                           const RiccatiSolution& sol) {
    const double pm = sol.p_minus0();
    if (!(pm < 1.0)) throw InvariantError("P-(0) is not below 1");
    const double k = pm / (1.0 - pm);
    std::vector<FrontierPoint> out;
    out.reserve(z_values.size());
    for (double z : z_values) {
        if (z < x0) throw DomainError("frontier requires z >= x0");
        const double var = k * (z - x0) * (z - x0);
        out.push_back({z, var, std::sqrt(var)});
    }
    return out;
}

inline double frontier_variance(double x0, double z, const RiccatiSolution& sol) {
    return frontier(x0, {z}, sol).front().variance;
}

}  // namespace mvjump
