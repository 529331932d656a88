#include <cmath>

#include <gtest/gtest.h>

#include "mvjump/market_io.hpp"
#include "mvjump/market_model.hpp"

using namespace mvjump;

namespace {

const ValidationCheck& find_check(const ValidationReport& rep, const std::string& name) {
    for (const auto& c : rep.checks)
        if (c.name == name) return c;
    throw std::runtime_error("missing check " + name);
}

MarketModel two_asset_identity() {
    Segment s;
    s.mu = Eigen::Vector2d(0.1, 0.05);
    s.sigma = Eigen::Matrix2d::Identity();
    return MarketModel({0.0, 1.0}, {s});
}

}  // namespace

TEST(Validate, OneAssetExampleIsValid) {
    const auto rep = validate(one_asset_model(0.2, 0.3, {{0.4, 1.0}}, 2.0));
    EXPECT_TRUE(rep.valid());
    EXPECT_NEAR(rep.delta_witness, 0.3 * 0.3 + 0.4 * 0.4, 1e-15);
    EXPECT_NEAR(rep.feasibility_integral, 0.2 * 2.0, 1e-15);
}

TEST(Validate, ZeroDriftFailsFeasibility) {
    const auto rep = validate(one_asset_model(0.0, 0.3, {{0.4, 1.0}}));
    EXPECT_FALSE(rep.valid());
    EXPECT_FALSE(find_check(rep, "feasibility").passed);
    EXPECT_TRUE(find_check(rep, "covariance_uniformly_positive").passed);
}

TEST(Validate, JumpOfMinusOneRejected) {
    const auto rep = validate(one_asset_model(0.2, 0.3, {{-1.0, 1.0}}));
    EXPECT_FALSE(find_check(rep, "jump_sizes_above_minus_one").passed);
}

TEST(Validate, NegativeWeightRejected) {
    const auto rep = validate(one_asset_model(0.2, 0.3, {{0.1, -0.5}}));
    EXPECT_FALSE(find_check(rep, "weights_nonnegative").passed);
}

TEST(Validate, SingularCovarianceRejected) {
    Segment s;
    s.mu = Eigen::Vector2d(0.1, 0.1);
    s.sigma = Eigen::MatrixXd::Ones(2, 1);
    const auto rep = validate(MarketModel({0.0, 1.0}, {s}));
    EXPECT_FALSE(find_check(rep, "covariance_uniformly_positive").passed);
}

TEST(Validate, NonFiniteRejected) {
    const auto rep = validate(one_asset_model(std::nan(""), 0.3, {}));
    EXPECT_FALSE(find_check(rep, "coefficients_bounded").passed);
}

TEST(Validate, Deterministic) {
    const auto model = one_asset_model(0.15, 0.25, {{0.4, 0.5}, {-0.4, 0.5}});
    const auto a = validate(model);
    const auto b = validate(model);
    ASSERT_EQ(a.checks.size(), b.checks.size());
    for (std::size_t i = 0; i < a.checks.size(); ++i) {
        EXPECT_EQ(a.checks[i].passed, b.checks[i].passed);
        EXPECT_EQ(a.checks[i].detail, b.checks[i].detail);
    }
    EXPECT_EQ(a.delta_witness, b.delta_witness);
}

TEST(Structure, BadGridsThrow) {
    Segment s;
    s.mu = Eigen::VectorXd::Constant(1, 0.1);
    s.sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
    EXPECT_THROW(MarketModel({0.0}, {}), StructuralError);
    EXPECT_THROW(MarketModel({0.1, 1.0}, {s}), StructuralError);
    EXPECT_THROW(MarketModel({0.0, 0.5, 0.5}, {s, s}), StructuralError);
    EXPECT_THROW(MarketModel({0.0, 0.5, 1.0}, {s}), StructuralError);
}

TEST(Structure, DimensionMismatchThrows) {
    Segment a;
    a.mu = Eigen::VectorXd::Constant(1, 0.1);
    a.sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
    Segment b = a;
    b.sigma = Eigen::MatrixXd::Constant(1, 2, 0.2);
    EXPECT_THROW(MarketModel({0.0, 0.5, 1.0}, {a, b}), StructuralError);
    Segment c = a;
    c.sources.push_back({{{Eigen::Vector2d(0.1, 0.1), 1.0}}});
    EXPECT_THROW(MarketModel({0.0, 1.0}, {c}), StructuralError);
}

TEST(BigSigma, NegativeJump) {
    const auto model = one_asset_model(0.2, 0.3, {{-0.5, 1.0}});
    EXPECT_NEAR(big_sigma(model, 0.5)(0, 0), 0.09 + 0.25, 1e-15);
}

TEST(BigSigma, DiffusionOnly) {
    EXPECT_NEAR(big_sigma(one_asset_model(0.2, 0.3, {}), 0.0)(0, 0), 0.09, 1e-15);
}

TEST(BigSigma, IdentityCase) {
    EXPECT_TRUE(big_sigma(two_asset_identity(), 1.0).isApprox(Eigen::Matrix2d::Identity()));
}

TEST(BigSigma, OutsideHorizonThrows) {
    const auto model = one_asset_model(0.2, 0.3, {});
    EXPECT_THROW(big_sigma(model, -0.1), DomainError);
    EXPECT_THROW(big_sigma(model, 1.1), DomainError);
}

TEST(BigSigma, SymmetricAndAboveWitnessAtEveryKnot) {
    Segment s0, s1;
    s0.mu = Eigen::Vector2d(0.1, 0.2);
    s0.sigma = (Eigen::Matrix2d() << 0.3, 0.1, 0.0, 0.2).finished();
    s0.sources.push_back({{{Eigen::Vector2d(0.2, -0.3), 0.7}, {Eigen::Vector2d(-0.1, 0.4), 0.2}}});
    s1 = s0;
    s1.sigma(1, 0) = 0.05;
    s1.sources[0].marks[0].weight = 1.3;
    const MarketModel model({0.0, 0.4, 1.0}, {s0, s1});
    const auto rep = validate(model);
    for (double t : model.grid()) {
        const Eigen::MatrixXd S = big_sigma(model, t);
        EXPECT_TRUE(S.isApprox(S.transpose(), 1e-15));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        EXPECT_GE(es.eigenvalues().minCoeff(), rep.delta_witness - 1e-15);
    }
}

TEST(SegmentIndex, PiecewiseConstantConvention) {
    Segment s;
    s.mu = Eigen::VectorXd::Constant(1, 0.1);
    s.sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
    const MarketModel model({0.0, 0.25, 1.0}, {s, s});
    EXPECT_EQ(model.segment_index(0.0), 0u);
    EXPECT_EQ(model.segment_index(0.2499), 0u);
    EXPECT_EQ(model.segment_index(0.25), 1u);
    EXPECT_EQ(model.segment_index(1.0), 1u);
}

TEST(AlphaBound, DiffusionOnly) {
    // mu^2/sigma^2 = 0.04/0.09 = 4/9
    EXPECT_NEAR(alpha_bound(one_asset_model(0.2, 0.3, {})), 0.5 * std::exp(-4.0 / 9.0), 1e-15);
    EXPECT_NEAR(alpha_bound(one_asset_model(0.2, 0.3, {})), 0.320590, 5e-7);
}

TEST(AlphaBound, ZeroDriftIsHalf) {
    EXPECT_DOUBLE_EQ(alpha_bound(one_asset_model(0.0, 0.3, {})), 0.5);
}

TEST(AlphaBound, AdditiveOverKnots) {
    // each segment: mu^2/sigma^2 * 0.5 = 0.1 -> mu^2 = 0.2 * 0.09
    Segment s;
    s.mu = Eigen::VectorXd::Constant(1, std::sqrt(0.2 * 0.09));
    s.sigma = Eigen::MatrixXd::Constant(1, 1, 0.3);
    const MarketModel model({0.0, 0.5, 1.0}, {s, s});
    EXPECT_NEAR(alpha_bound(model), 0.5 * std::exp(-0.2), 1e-14);
}

TEST(AlphaBound, StrictlyInsideInterval) {
    const auto model = one_asset_model(0.15, 0.25, {{0.4, 0.5}, {-0.4, 0.5}});
    const double a = alpha_bound(model);
    const double bound = std::exp(-sharpe_integral(model));
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, bound);
}

TEST(Json, RoundTripOfSingleSegmentConfig) {
    const auto j = nlohmann::json::parse(R"({
      "horizon": 1.0,
      "assets": [{"mu": 0.15, "sigma": [0.25]}],
      "jump_sources": [{"marks": [{"beta": [0.4], "weight": 0.5}, {"beta": [-0.4], "weight": 0.5}]}],
      "run": {"steps": 100}
    })");
    const auto model = model_from_json(j);
    EXPECT_EQ(model.m(), 1);
    EXPECT_EQ(model.n(), 1);
    EXPECT_EQ(model.ell(), 1u);
    EXPECT_NEAR(model.big_sigma_segment(0)(0, 0), 0.0625 + 0.16, 1e-15);
    EXPECT_NEAR(model.compensator(0)[0], 0.0, 1e-15);
}

TEST(Json, PerSegmentCoefficients) {
    const auto j = nlohmann::json::parse(R"({
      "horizon": 1.0, "grid": [0.0, 0.5, 1.0],
      "assets": [{"mu": [-1.5, 3.0], "sigma": [[0.3], [0.3]]}],
      "jump_sources": [{"segments": [{"marks": [{"beta": [-0.95], "weight": 1.0}]},
                                     {"marks": [{"beta": [0.8], "weight": 1.0}]}]}]
    })");
    const auto model = model_from_json(j);
    EXPECT_EQ(model.num_segments(), 2u);
    EXPECT_DOUBLE_EQ(model.segment_at(0.7).mu[0], 3.0);
    EXPECT_DOUBLE_EQ(model.flat_marks(0)[0].beta[0], -0.95);
}

TEST(Json, MalformedInputsThrow) {
    EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"assets": []})")), StructuralError);
    EXPECT_THROW(model_from_json(nlohmann::json::parse(
                     R"({"horizon": 1, "assets": [{"mu": [0.1, 0.2], "sigma": [0.2]}]})")),
                 StructuralError);
    EXPECT_THROW(model_from_json(nlohmann::json::parse(
                     R"({"horizon": 1, "assets": [{"mu": 0.1, "sigma": [0.2]}],
                         "jump_sources": [{"marks": [{"beta": [0.1, 0.2], "weight": 1}]}]})")),
                 StructuralError);
    EXPECT_THROW(load_model("/nonexistent/market.json"), StructuralError);
}
