#pragma once

// Monte Carlo for the controlled wealth equation
//
//   dX = pi^T (mu - sum w beta) dt + pi^T sigma dW + pi^T beta dN
//
// Jump times are drawn exactly from exponential clocks (redrawn at coefficient
// knots); only the diffusion is Euler-discretized. The control is evaluated at
// the left limit of the wealth at every step and at every jump.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mvjump/errors.hpp"
#include "mvjump/market_model.hpp"
#include "mvjump/policy.hpp"
#include "mvjump/riccati.hpp"

namespace mvjump {

struct SimConfig {
    std::size_t n_paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240601;
    std::size_t record_paths = 0;  // the first record_paths paths are kept in full
    unsigned threads = 1;
    bool keep_terminal = false;    // keep X_T of every path (paired comparisons)
};

struct PathPoint {
    double t;
    double x;
    bool is_jump;
    Eigen::VectorXd dw;  // Brownian increment of the step ending here (zero at jumps)
};

using PathRecord = std::vector<PathPoint>;

struct SignChangeReport {
    std::size_t paths = 0;
    std::size_t sign_changes = 0;
    std::size_t at_jumps = 0;   // at a jump or within the Euler step right after it
    std::size_t off_jumps = 0;
    std::size_t jump_events = 0;
    std::size_t flipping_jumps = 0;
    std::size_t non_flipping_jumps = 0;
};

struct SimulationStats {
    std::size_t n_paths = 0;  // paths used (overflowed paths excluded)
    std::size_t overflow_paths = 0;
    double reference = 0.0;   // the level d in E[(X_T - d)^2]
    double mean_XT = 0.0;
    double se_mean = 0.0;
    double var_XT = 0.0;
    double se_var = 0.0;
    double second_moment_about_d = 0.0;
    double se_second_moment = 0.0;
    double jump_count_mean = 0.0;
    SignChangeReport sign_changes;  // over all paths, against `reference`
    std::vector<PathRecord> paths;
    std::vector<double> terminal;   // filled when keep_terminal
};

inline void check_config(const SimConfig& cfg, double horizon) {
    if (cfg.n_paths < 1) throw DomainError("n_paths must be at least 1");
    if (!(cfg.dt > 0.0) || cfg.dt > horizon) throw DomainError("dt must lie in (0, T]");
    if (cfg.threads < 1) throw DomainError("threads must be at least 1");
}

/// Independent stream for one path, keyed by (seed, path index).
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                      0x6d766a75u};
    return std::mt19937_64(seq);
}

inline constexpr double kOverflowBound = 1e12;

namespace detail {

struct PathOutcome {
    double x_T = 0.0;
    std::size_t jumps = 0;
    bool overflow = false;
    SignChangeReport signs;
};

inline bool positive_side(double x, double d) { return x - d > 0.0; }

template <class Policy>
PathOutcome simulate_path(const MarketModel& model, Policy& policy, double x0, double d,
                          const SimConfig& cfg, std::uint64_t path, PathRecord* record) {
    auto rng = path_engine(cfg.seed, path);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo;

    const Eigen::Index m = model.m();
    const Eigen::Index n = model.n();
    const double T = model.horizon();
    const auto& knots = model.grid();
    Eigen::VectorXd pi(m);
    Eigen::VectorXd xi(n);
    Eigen::VectorXd sig_pi(n);

    PathOutcome out;
    double x = x0;
    double t = 0.0;
    std::size_t step = 0;
    std::size_t seg = 0;
    bool prev_jump = false;

    auto next_jump = [&](double from) {
        const double lam = model.total_intensity(seg);
        return lam > 0.0 ? from + expo(rng) / lam : std::numeric_limits<double>::infinity();
    };
    std::vector<std::discrete_distribution<std::size_t>> pick(model.num_segments());
    for (std::size_t k = 0; k < model.num_segments(); ++k) {
        std::vector<double> w;
        for (const auto& mk : model.flat_marks(k)) w.push_back(mk.weight);
        if (!w.empty()) pick[k] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }
    double t_jump = next_jump(0.0);

    if (record) record->push_back({0.0, x, false, Eigen::VectorXd::Zero(n)});

    while (t < T) {
        const double t_grid = std::min(static_cast<double>(step + 1) * cfg.dt, T);
        const double t_knot = knots[seg + 1];
        const double t_end = std::min({t_grid, t_knot, t_jump});
        const double h = t_end - t;
        if (h > 0.0) {
            policy(t, x, pi);
            const Segment& s = model.segment(seg);
            const Eigen::VectorXd& comp = model.compensator(seg);
            double drift = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) drift += pi[i] * (s.mu[i] - comp[i]);
            const double sq = std::sqrt(h);
            for (Eigen::Index c = 0; c < n; ++c) xi[c] = sq * normal(rng);
            double noise = 0.0;
            for (Eigen::Index c = 0; c < n; ++c) {
                double col = 0.0;
                for (Eigen::Index i = 0; i < m; ++i) col += pi[i] * s.sigma(i, c);
                noise += col * xi[c];
            }
            const bool before = positive_side(x, d);
            x += drift * h + noise;
            const bool after = positive_side(x, d);
            if (before != after) {
                ++out.signs.sign_changes;
                ++(prev_jump ? out.signs.at_jumps : out.signs.off_jumps);
            }
            if (record) record->push_back({t_end, x, false, xi});
        }
        prev_jump = false;
        t = t_end;

        if (t == t_jump) {
            policy(t, x, pi);
            const auto& marks = model.flat_marks(seg);
            const auto& mk = marks[pick[seg](rng)];
            const bool before = positive_side(x, d);
            x += pi.dot(mk.beta);
            const bool after = positive_side(x, d);
            ++out.jumps;
            ++out.signs.jump_events;
            if (before != after) {
                ++out.signs.sign_changes;
                ++out.signs.at_jumps;
                ++out.signs.flipping_jumps;
            } else {
                ++out.signs.non_flipping_jumps;
            }
            prev_jump = true;
            t_jump = next_jump(t);
            if (record) record->push_back({t, x, true, Eigen::VectorXd::Zero(n)});
        }
        if (t == t_grid) ++step;
        if (t == t_knot && seg + 1 < model.num_segments()) {
            ++seg;
            t_jump = next_jump(t);
        }
        if (!std::isfinite(x) || std::abs(x) > kOverflowBound) {
            out.overflow = true;
            break;
        }
    }
    out.x_T = x;
    return out;
}

}  // namespace detail

/// Runs cfg.n_paths independent paths from x0 under `policy`, a callable
/// policy(t, x_pre, Eigen::VectorXd& pi_out). Copies of the policy are made
/// per worker thread. Statistics are merged in path order, so the result does
/// not depend on the thread count.
template <class Policy>
SimulationStats simulate(const MarketModel& model, const Policy& policy, double x0, double d,
                         const SimConfig& cfg) {
    check_config(cfg, model.horizon());
    const std::size_t N = cfg.n_paths;
    std::vector<detail::PathOutcome> outcomes(N);
    SimulationStats st;
    st.reference = d;
    const std::size_t n_rec = std::min(cfg.record_paths, N);
    st.paths.resize(n_rec);

    auto work = [&](std::size_t begin, std::size_t end) {
        Policy local = policy;
        for (std::size_t p = begin; p < end; ++p)
            outcomes[p] = detail::simulate_path(model, local, x0, d, cfg, p,
                                                p < n_rec ? &st.paths[p] : nullptr);
    };
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(cfg.threads, N));
    if (nt <= 1) {
        work(0, N);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (N + nt - 1) / nt;
        for (unsigned k = 0; k < nt; ++k) {
            const std::size_t b = k * chunk;
            const std::size_t e = std::min(N, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    // two-pass moments in path order
    double sum = 0.0, jumps = 0.0;
    std::size_t used = 0;
    for (const auto& o : outcomes) {
        if (o.overflow) {
            ++st.overflow_paths;
            continue;
        }
        ++used;
        sum += o.x_T;
        jumps += static_cast<double>(o.jumps);
        auto& s = st.sign_changes;
        s.sign_changes += o.signs.sign_changes;
        s.at_jumps += o.signs.at_jumps;
        s.off_jumps += o.signs.off_jumps;
        s.jump_events += o.signs.jump_events;
        s.flipping_jumps += o.signs.flipping_jumps;
        s.non_flipping_jumps += o.signs.non_flipping_jumps;
    }
    st.n_paths = used;
    st.sign_changes.paths = used;
    if (used == 0) return st;
    const double nd = static_cast<double>(used);
    const double mean = sum / nd;
    double m2 = 0.0, m4 = 0.0, y1 = 0.0;
    for (const auto& o : outcomes) {
        if (o.overflow) continue;
        const double c = o.x_T - mean;
        m2 += c * c;
        m4 += c * c * c * c;
        y1 += (o.x_T - d) * (o.x_T - d);
    }
    m2 /= nd;
    m4 /= nd;
    y1 /= nd;
    double yv = 0.0;
    for (const auto& o : outcomes) {
        if (o.overflow) continue;
        const double y = (o.x_T - d) * (o.x_T - d) - y1;
        yv += y * y;
    }
    const double denom = used > 1 ? nd - 1.0 : 1.0;
    st.mean_XT = mean;
    st.var_XT = used > 1 ? m2 * nd / denom : 0.0;
    st.se_mean = std::sqrt(st.var_XT / nd);
    st.se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / nd);
    st.second_moment_about_d = y1;
    st.se_second_moment = std::sqrt(yv / denom / nd);
    st.jump_count_mean = jumps / nd;
    if (cfg.keep_terminal) {
        st.terminal.reserve(N);
        for (const auto& o : outcomes) st.terminal.push_back(o.x_T);
    }
    return st;
}

/// The optimal feedback vhat+(t) (x - d)+ + vhat-(t) (x - d)- with the
/// minimizers tabulated once on the simulation grid k*dt and held constant
/// over each grid cell. Scale factors perturb either side for optimality-gap
/// checks.
class OptimalFeedback {
public:
    OptimalFeedback(const RiccatiSolution& sol, double d, double dt, double scale_plus = 1.0,
                    double scale_minus = 1.0)
        : d_(d), dt_(dt), m_(sol.model.m()) {
        const double T = sol.horizon();
        const auto cells = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
        plus_.resize((cells + 1) * static_cast<std::size_t>(m_));
        minus_.resize(plus_.size());
        for (std::size_t k = 0; k <= cells; ++k) {
            const double t = std::min(static_cast<double>(k) * dt, T);
            const Eigen::VectorXd vp = scale_plus * vhat_at(sol, Side::plus, t);
            const Eigen::VectorXd vm = scale_minus * vhat_at(sol, Side::minus, t);
            for (Eigen::Index i = 0; i < m_; ++i) {
                plus_[k * m_ + i] = vp[i];
                minus_[k * m_ + i] = vm[i];
            }
        }
        last_ = cells;
    }

    void operator()(double t, double x, Eigen::VectorXd& pi) const {
        const double y = x - d_;
        const std::size_t k = std::min(last_, static_cast<std::size_t>(t / dt_ + 1e-9));
        const double* row = y > 0.0 ? &plus_[k * m_] : &minus_[k * m_];
        const double w = std::abs(y);
        for (Eigen::Index i = 0; i < m_; ++i) pi[i] = row[i] * w;
    }

    double vertex() const { return d_; }

    /// vhat- tabulated at cell k.
    double vhat_minus_cell(std::size_t k, Eigen::Index i = 0) const { return minus_[k * m_ + i]; }

private:
    double d_;
    double dt_;
    Eigen::Index m_;
    std::size_t last_ = 0;
    std::vector<double> plus_;
    std::vector<double> minus_;
};

/// pi = 0.
struct ZeroPolicy {
    void operator()(double, double, Eigen::VectorXd& pi) const { pi.setZero(); }
};

/// pi = v * (x - d), a linear rule used for martingale checks.
struct LinearPolicy {
    Eigen::VectorXd v;
    double d;
    void operator()(double, double x, Eigen::VectorXd& pi) const { pi = v * (x - d); }
};

struct ValueReport {
    double estimate;
    double se;
    double target;
    double z_score;
};

struct FrontierReport {
    double mean;
    double se_mean;
    double target_mean;
    double z_mean;
    double variance;
    double se_variance;
    double target_variance;
    double z_variance;
};

namespace detail {
inline double z_of(double est, double target, double se) {
    const double diff = std::abs(est - target);
    if (se > 0.0) return diff / se;
    return diff <= 1e-12 * std::max(1.0, std::abs(target)) ? 0.0
                                                            : std::numeric_limits<double>::infinity();
}
}  // namespace detail

/// Simulates the optimal feedback with vertex d and compares E[(X_T - d)^2]
/// with the Lagrangian value.
inline ValueReport verify_value(const MarketModel& model, const RiccatiSolution& sol, double d,
                                double x0, const SimConfig& cfg, double scale_plus = 1.0,
                                double scale_minus = 1.0) {
    const OptimalFeedback fb(sol, d, cfg.dt, scale_plus, scale_minus);
    const auto st = simulate(model, fb, x0, d, cfg);
    const double target = lagrangian_value(x0, d, sol);
    return {st.second_moment_about_d, st.se_second_moment, target,
            detail::z_of(st.second_moment_about_d, target, st.se_second_moment)};
}

/// Simulates the efficient strategy for target z and compares the terminal
/// mean and variance with the frontier.
inline FrontierReport verify_frontier(const MarketModel& model, const RiccatiSolution& sol,
                                      double x0, double z, const SimConfig& cfg) {
    const double d = d_star(x0, z, sol);
    const OptimalFeedback fb(sol, d, cfg.dt);
    const auto st = simulate(model, fb, x0, d, cfg);
    const double tv = frontier_variance(x0, z, sol);
    return {st.mean_XT, st.se_mean, z, detail::z_of(st.mean_XT, z, st.se_mean),
            st.var_XT, st.se_var, tv, detail::z_of(st.var_XT, tv, st.se_var)};
}

/// Recounts sign changes of X - d along recorded paths. A change counts as
/// occurring at a jump when it happens at the jump itself or in the Euler
/// step right after it.
inline SignChangeReport sign_change_audit(const std::vector<PathRecord>& paths, double d) {
    SignChangeReport r;
    for (const auto& path : paths) {
        ++r.paths;
        for (std::size_t i = 1; i < path.size(); ++i) {
            const bool before = detail::positive_side(path[i - 1].x, d);
            const bool after = detail::positive_side(path[i].x, d);
            if (path[i].is_jump) {
                ++r.jump_events;
                ++(before != after ? r.flipping_jumps : r.non_flipping_jumps);
            }
            if (before == after) continue;
            ++r.sign_changes;
            ++(path[i].is_jump || path[i - 1].is_jump ? r.at_jumps : r.off_jumps);
        }
    }
    return r;
}

}  // namespace mvjump
