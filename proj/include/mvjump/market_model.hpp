#pragma once

// Jump-diffusion market with no interest rate: m risky assets driven by an
// n-dimensional Brownian motion and l independent Poisson sources with finite
// mark lists. Coefficients are piecewise constant on a knot grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvjump/errors.hpp"

namespace mvjump {

/// One point of a jump-mark distribution: the relative jump sizes of all m
/// assets and the intensity (events per year) carried by this mark.
struct JumpMark {
    Eigen::VectorXd beta;
    double weight = 0.0;
};

/// A single Poisson source. Its total intensity is the sum of mark weights.
struct JumpSource {
    std::vector<JumpMark> marks;

    double total_intensity() const {
        double s = 0.0;
        for (const auto& mk : marks) s += mk.weight;
        return s;
    }
};

/// Coefficients in force on one interval [t_k, t_{k+1}) of the knot grid.
struct Segment {
    Eigen::VectorXd mu;               // m drift rates
    Eigen::MatrixXd sigma;            // m x n diffusion matrix
    std::vector<JumpSource> sources;  // l sources
};

/// A mark flattened out of its source, used in the inner loops.
struct FlatMark {
    Eigen::VectorXd beta;
    double weight;
    std::size_t source;
};

class MarketModel {
public:
    /// `grid` holds the knots 0 = t_0 < ... < t_K = T; `segments[k]` applies on
    /// [t_k, t_{k+1}) (the last one also at t = T).
    MarketModel(std::vector<double> grid, std::vector<Segment> segments)
        : grid_(std::move(grid)), segments_(std::move(segments)) {
        check_structure();
        build_caches();
    }

    double horizon() const { return grid_.back(); }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<Segment>& segments() const { return segments_; }
    std::size_t num_segments() const { return segments_.size(); }
    Eigen::Index m() const { return m_; }
    Eigen::Index n() const { return n_; }
    std::size_t ell() const { return ell_; }

    double segment_length(std::size_t k) const { return grid_[k + 1] - grid_[k]; }

    /// Index of the segment whose coefficients are in force at t.
    std::size_t segment_index(double t) const {
        if (!(t >= 0.0 && t <= horizon())) {
            std::ostringstream os;
            os << "time " << t << " outside [0, " << horizon() << "]";
            throw DomainError(os.str());
        }
        auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
        auto k = static_cast<std::size_t>(std::distance(grid_.begin(), it));
        return std::min(k == 0 ? 0 : k - 1, segments_.size() - 1);
    }

    const Segment& segment(std::size_t k) const { return segments_.at(k); }
    const Segment& segment_at(double t) const { return segments_[segment_index(t)]; }

    /// sigma sigma^T + sum_j sum_k weight * beta beta^T on segment k.
    const Eigen::MatrixXd& big_sigma_segment(std::size_t k) const { return big_sigma_.at(k); }
    /// Jump compensator sum_j sum_k weight * beta on segment k.
    const Eigen::VectorXd& compensator(std::size_t k) const { return compensator_.at(k); }
    /// Total jump intensity over all sources on segment k.
    double total_intensity(std::size_t k) const { return total_intensity_.at(k); }
    const std::vector<FlatMark>& flat_marks(std::size_t k) const { return flat_marks_.at(k); }
    /// sigma sigma^T on segment k.
    const Eigen::MatrixXd& diffusion_cov(std::size_t k) const { return diffusion_cov_.at(k); }

private:
    void check_structure() const {
        if (grid_.size() < 2) throw StructuralError("time grid needs at least two knots");
        if (grid_.front() != 0.0) throw StructuralError("time grid must start at 0");
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            if (!(grid_[i] > grid_[i - 1]))
                throw StructuralError("time grid must be strictly increasing");
        }
        if (segments_.size() != grid_.size() - 1) {
            std::ostringstream os;
            os << "expected " << grid_.size() - 1 << " coefficient segments for " << grid_.size()
               << " knots, got " << segments_.size();
            throw StructuralError(os.str());
        }
        const auto& first = segments_.front();
        const Eigen::Index m = first.mu.size();
        const Eigen::Index n = first.sigma.cols();
        if (m == 0) throw StructuralError("model has no assets");
        if (n == 0) throw StructuralError("diffusion matrix has no columns");
        for (std::size_t k = 0; k < segments_.size(); ++k) {
            const auto& s = segments_[k];
            if (s.mu.size() != m || s.sigma.rows() != m || s.sigma.cols() != n) {
                std::ostringstream os;
                os << "segment " << k << ": mu/sigma dimensions inconsistent with m=" << m
                   << ", n=" << n;
                throw StructuralError(os.str());
            }
            if (s.sources.size() != first.sources.size()) {
                std::ostringstream os;
                os << "segment " << k << ": " << s.sources.size() << " jump sources, expected "
                   << first.sources.size();
                throw StructuralError(os.str());
            }
            for (const auto& src : s.sources) {
                for (const auto& mk : src.marks) {
                    if (mk.beta.size() != m) {
                        std::ostringstream os;
                        os << "segment " << k << ": jump mark has " << mk.beta.size()
                           << " components, expected " << m;
                        throw StructuralError(os.str());
                    }
                }
            }
        }
    }

    void build_caches() {
        const auto& first = segments_.front();
        m_ = first.mu.size();
        n_ = first.sigma.cols();
        ell_ = first.sources.size();
        for (const auto& s : segments_) {
            Eigen::MatrixXd bs = s.sigma * s.sigma.transpose();
            diffusion_cov_.push_back(bs);
            Eigen::VectorXd comp = Eigen::VectorXd::Zero(m_);
            double lambda = 0.0;
            std::vector<FlatMark> flat;
            for (std::size_t j = 0; j < s.sources.size(); ++j) {
                for (const auto& mk : s.sources[j].marks) {
                    bs.noalias() += mk.weight * mk.beta * mk.beta.transpose();
                    comp += mk.weight * mk.beta;
                    lambda += mk.weight;
                    flat.push_back({mk.beta, mk.weight, j});
                }
            }
            big_sigma_.push_back(std::move(bs));
            compensator_.push_back(std::move(comp));
            total_intensity_.push_back(lambda);
            flat_marks_.push_back(std::move(flat));
        }
    }

    std::vector<double> grid_;
    std::vector<Segment> segments_;
    Eigen::Index m_ = 0;
    Eigen::Index n_ = 0;
    std::size_t ell_ = 0;
    std::vector<Eigen::MatrixXd> diffusion_cov_;
    std::vector<Eigen::MatrixXd> big_sigma_;
    std::vector<Eigen::VectorXd> compensator_;
    std::vector<double> total_intensity_;
    std::vector<std::vector<FlatMark>> flat_marks_;
};

/// Time-invariant single-asset, single-Brownian model on [0, horizon] with one
/// Poisson source carrying the given (beta, weight) marks.
inline MarketModel one_asset_model(double mu, double sigma,
                                   const std::vector<std::pair<double, double>>& marks,
                                   double horizon = 1.0) {
    Segment seg;
    seg.mu = Eigen::VectorXd::Constant(1, mu);
    seg.sigma = Eigen::MatrixXd::Constant(1, 1, sigma);
    if (!marks.empty()) {
        JumpSource src;
        for (const auto& [beta, weight] : marks)
            src.marks.push_back({Eigen::VectorXd::Constant(1, beta), weight});
        seg.sources.push_back(std::move(src));
    }
    return MarketModel({0.0, horizon}, {std::move(seg)});
}

/// Smallest eigenvalue of Sigma_t that still counts as positive definite.
inline constexpr double kMinCovarianceEigenvalue = 1e-12;

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    std::vector<double> min_eigenvalues;  // smallest eigenvalue of Sigma per segment
    double delta_witness = 0.0;           // min over segments
    double min_jump_size = std::numeric_limits<double>::infinity();
    double feasibility_integral = 0.0;    // sum_i int_0^T mu_i dt

    bool valid() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
};

/// Runs every standing-assumption check on the model and records the
/// witnesses. Never throws on a failed check; the report says what failed.
inline ValidationReport validate(const MarketModel& model) {
    ValidationReport rep;

    bool finite = true;
    bool weights_ok = true;
    for (const auto& s : model.segments()) {
        finite = finite && s.mu.allFinite() && s.sigma.allFinite();
        for (const auto& src : s.sources) {
            for (const auto& mk : src.marks) {
                finite = finite && mk.beta.allFinite() && std::isfinite(mk.weight);
                weights_ok = weights_ok && mk.weight >= 0.0;
                if (mk.beta.size() > 0)
                    rep.min_jump_size = std::min(rep.min_jump_size, mk.beta.minCoeff());
            }
        }
    }

    {
        std::ostringstream os;
        os << "min beta = " << rep.min_jump_size;
        rep.checks.push_back({"jump_sizes_above_minus_one", rep.min_jump_size > -1.0, os.str()});
    }
    rep.checks.push_back({"weights_nonnegative", weights_ok, weights_ok ? "ok" : "negative weight"});
    rep.checks.push_back({"coefficients_bounded", finite, finite ? "all finite" : "non-finite entry"});

    rep.delta_witness = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < model.num_segments(); ++k) {
        const Eigen::MatrixXd& bs = model.big_sigma_segment(k);
        double lmin = -std::numeric_limits<double>::infinity();
        if (bs.allFinite()) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bs, Eigen::EigenvaluesOnly);
            lmin = es.eigenvalues().minCoeff();
        }
        rep.min_eigenvalues.push_back(lmin);
        rep.delta_witness = std::min(rep.delta_witness, lmin);
    }
    {
        std::ostringstream os;
        os.precision(17);
        os << "delta = " << rep.delta_witness;
        rep.checks.push_back(
            {"covariance_uniformly_positive", rep.delta_witness > kMinCovarianceEigenvalue, os.str()});
    }

    for (std::size_t k = 0; k < model.num_segments(); ++k)
        rep.feasibility_integral += model.segment(k).mu.sum() * model.segment_length(k);
    {
        std::ostringstream os;
        os.precision(17);
        os << "sum_i int mu_i dt = " << rep.feasibility_integral;
        rep.checks.push_back({"feasibility", rep.feasibility_integral > 0.0, os.str()});
    }
    return rep;
}

/// sigma sigma^T plus the jump second-moment matrix at time t.
inline Eigen::MatrixXd big_sigma(const MarketModel& model, double t) {
    return model.big_sigma_segment(model.segment_index(t));
}

/// int_0^T mu^T Sigma^{-1} mu dt, exact for piecewise-constant coefficients.
inline double sharpe_integral(const MarketModel& model, double from = 0.0) {
    double total = 0.0;
    for (std::size_t k = 0; k < model.num_segments(); ++k) {
        const double a = std::max(model.grid()[k], from);
        const double b = model.grid()[k + 1];
        if (b <= a) continue;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(model.big_sigma_segment(k));
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 0.0)
            throw NumericError("Sigma_t is singular on segment " + std::to_string(k));
        const Eigen::VectorXd& mu = model.segment(k).mu;
        total += mu.dot(ldlt.solve(mu)) * (b - a);
    }
    return total;
}

/// Lower bound alpha = exp(-int mu^T Sigma^{-1} mu dt) / 2 for the truncation.
inline double alpha_bound(const MarketModel& model) {
    return 0.5 * std::exp(-sharpe_integral(model));
}

}  // namespace mvjump
