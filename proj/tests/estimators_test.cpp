#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "shrinklogit/errors.hpp"
#include "shrinklogit/estimators.hpp"
#include "shrinklogit/simulation.hpp"
#include "support/oracles.hpp"

namespace sl = shrinklogit;
using sl::Matrix;
using sl::Vector;

namespace {

double max_abs(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

// A synthetic problem: random SPD X'VX and X'Vz, no data set required.
struct Instance {
    sl::NormalEquations eq;
    sl::SpectralDecomposition decomp;
};

Instance random_instance(Eigen::Index p, std::mt19937_64& rng) {
    Instance inst;
    inst.eq.xtvx = sl::testing::random_spd(p, rng);
    inst.eq.xtvz = sl::testing::random_normal_vector(p, rng, 3.0);
    inst.decomp = sl::spectral_decompose(inst.eq.xtvx);
    return inst;
}

sl::ShrinkageParams params(double k, double d) {
    return {k, d, sl::ParamSource::user, sl::ParamSource::user, false};
}

// Converged fit on a logistic sample, for the fit-based overloads.
struct Fitted {
    Matrix x;
    sl::LogisticFit fit;
};

Fitted fitted_sample(std::mt19937_64& rng, Eigen::Index n = 300, Eigen::Index p = 4) {
    Fitted f;
    f.x = sl::testing::random_normal_matrix(n, p, rng);
    const Vector beta = sl::testing::random_normal_vector(p, rng, 0.5);
    const Vector y = sl::testing::bernoulli_response(f.x, beta, rng);
    f.fit = sl::irls_fit({f.x, y});
    return f;
}

}  // namespace

TEST(SpectralDecompose, IdentityKeepsIdentityBasis) {
    const sl::SpectralDecomposition d = sl::spectral_decompose(Matrix::Identity(3, 3));
    EXPECT_LE((d.values - Vector::Ones(3)).lpNorm<Eigen::Infinity>(), 1e-15);
    EXPECT_LE((d.vectors - Matrix::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(SpectralDecompose, DiagonalOrderedDescendingWithPositiveLeadingEntries) {
    Matrix m = Vector{{1.0, 4.0}}.asDiagonal();
    const sl::SpectralDecomposition d = sl::spectral_decompose(m);
    EXPECT_DOUBLE_EQ(d.values(0), 4.0);
    EXPECT_DOUBLE_EQ(d.values(1), 1.0);
    EXPECT_LE((d.vectors - Matrix{{0.0, 1.0}, {1.0, 0.0}}).lpNorm<Eigen::Infinity>(), 1e-15);

    m = Vector{{4.0, 1.0}}.asDiagonal();
    EXPECT_LE((sl::spectral_decompose(m).vectors - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(SpectralDecompose, RandomSpdInvariants) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix m = sl::testing::random_spd(5, rng);
        const sl::SpectralDecomposition d = sl::spectral_decompose(m);
        const Matrix& t = d.vectors;
        EXPECT_LE((t.transpose() * t - Matrix::Identity(5, 5)).lpNorm<Eigen::Infinity>(), 1e-10);
        const Matrix rebuilt = t * d.values.asDiagonal() * t.transpose();
        EXPECT_LE((rebuilt - m).norm() / m.norm(), 1e-8);
        for (Eigen::Index j = 1; j < 5; ++j) EXPECT_GE(d.values(j - 1), d.values(j));
        for (Eigen::Index j = 0; j < 5; ++j) {
            Eigen::Index lead = 0;
            t.col(j).cwiseAbs().maxCoeff(&lead);
            EXPECT_GT(t(lead, j), 0.0);
        }
    }
}

TEST(SpectralDecompose, FromDesignAndWeights) {
    std::mt19937_64 rng(12);
    const Matrix x = sl::testing::random_normal_matrix(30, 3, rng);
    const Vector v = Vector::Constant(30, 0.2);
    const sl::SpectralDecomposition a = sl::spectral_decompose(x, v);
    const sl::SpectralDecomposition b = sl::spectral_decompose(Matrix(0.2 * x.transpose() * x));
    EXPECT_LE((a.values - b.values).norm(), 1e-10);
}

TEST(SpectralDecompose, RejectsIndefiniteAndNonFinite) {
    const Matrix indefinite{{1.0, 0.0}, {0.0, -2.0}};
    try {
        sl::spectral_decompose(indefinite);
        FAIL() << "expected DecompositionError";
    } catch (const sl::DecompositionError& e) {
        EXPECT_DOUBLE_EQ(e.smallest_eigenvalue(), -2.0);
    }
    Matrix nan = Matrix::Identity(2, 2);
    nan(0, 1) = nan(1, 0) = std::nan("");
    EXPECT_THROW(sl::spectral_decompose(nan), sl::DecompositionError);
}

TEST(SelectComponents, Examples) {
    EXPECT_EQ(sl::select_components(Vector{{3.0, 1.0}}, 0.75), 1);
    EXPECT_EQ(sl::select_components(Vector{{1.0, 1.0, 1.0, 1.0}}, 0.75), 3);
    EXPECT_EQ(sl::select_components(Vector{{1.0, 1.0, 1.0, 1.0}}, 1.0), 4);
    EXPECT_EQ(sl::select_components(Vector{{5.0, 1.0}}, 0.01), 1);
    EXPECT_THROW(sl::select_components(Vector{{1.0}}, 0.0), sl::InvalidArgument);
    EXPECT_THROW(sl::select_components(Vector{{1.0}}, 1.5), sl::InvalidArgument);
}

TEST(SelectComponents, MatchesBruteForceOnSimulatedSpectra) {
    // Cumulative-share scan written independently of select_components.
    auto brute = [](const Vector& lam, double threshold) {
        for (Eigen::Index r = 1; r <= lam.size(); ++r) {
            if (lam.head(r).sum() >= threshold * lam.sum() - 1e-12 * lam.sum()) return r;
        }
        return lam.size();
    };
    int typical = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        sl::Rng rng(seed);
        const Matrix x = sl::generate_design(200, 4, 0.99, rng);
        const Vector beta = sl::newhouse_oman_beta(x);
        const Vector y = sl::generate_response(x, beta, rng);
        const sl::LogisticFit fit = sl::irls_fit({x, y});
        const sl::SpectralDecomposition d = sl::spectral_decompose(x, fit.v_diag);
        const auto r = sl::select_components(d.values, 0.75);
        EXPECT_EQ(r, brute(d.values, 0.75));
        if (r == 1) ++typical;
    }
    EXPECT_GE(typical, 18);
}

TEST(ComponentSplit, Views) {
    std::mt19937_64 rng(13);
    const sl::SpectralDecomposition d = sl::spectral_decompose(sl::testing::random_spd(4, rng));
    const sl::ComponentSplit split(d, 3);
    EXPECT_EQ(split.retained(), 3);
    EXPECT_EQ(split.dropped(), 1);
    Matrix joined(4, 4);
    joined << split.retained_vectors(), split.dropped_vectors();
    EXPECT_EQ(joined, d.vectors);
    EXPECT_THROW(sl::ComponentSplit(d, 0), sl::InvalidArgument);
    EXPECT_THROW(sl::ComponentSplit(d, 5), sl::InvalidArgument);
}

TEST(ShrinkageParams, RejectsNonPositiveK) {
    try {
        params(0.0, 0.1).validate();
        FAIL();
    } catch (const sl::InvalidArgument& e) {
        EXPECT_STREQ(e.what(), "k must be positive");
    }
    EXPECT_THROW(params(1.0, std::nan("")).validate(), sl::InvalidArgument);
    EXPECT_NO_THROW(params(1.0, -50.0).validate());
}

TEST(EstimatorSpec, ValidatesFieldsAgainstKind) {
    EXPECT_NO_THROW(sl::EstimatorSpec::ml().validate(3));
    EXPECT_NO_THROW(sl::EstimatorSpec::pcltl(2, params(1, 0)).validate(3));
    EXPECT_THROW(sl::EstimatorSpec::pclr(4).validate(3), sl::InvalidArgument);
    sl::EstimatorSpec bad = sl::EstimatorSpec::ml();
    bad.params = params(1, 0);
    EXPECT_THROW(bad.validate(3), sl::InvalidArgument);
    bad = sl::EstimatorSpec::ltl(params(1, 0));
    bad.params.reset();
    EXPECT_THROW(bad.validate(3), sl::InvalidArgument);
}

TEST(EstimatorKind, ParsesNames) {
    for (sl::EstimatorKind kind : sl::kAllEstimators) {
        EXPECT_EQ(sl::parse_estimator_kind(sl::to_string(kind)), kind);
    }
    EXPECT_EQ(sl::parse_estimator_kind("mle"), sl::EstimatorKind::ml);
    EXPECT_FALSE(sl::parse_estimator_kind("ridge"));
}

TEST(MleEstimate, EqualsFitCoefficients) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const Fitted f = fitted_sample(rng);
        ASSERT_TRUE(f.fit.converged);
        EXPECT_LE(max_abs(sl::mle_estimate(f.fit, f.x) - f.fit.beta), 1e-8);
    }
}

TEST(MleEstimate, InterceptOnlyBalanced) {
    const Matrix x = Matrix::Ones(8, 1);
    Vector y = Vector::Zero(8);
    y.head(4).setOnes();
    const sl::LogisticFit fit = sl::irls_fit({x, y});
    EXPECT_NEAR(sl::mle_estimate(fit, x)(0), 0.0, 1e-12);
}

TEST(MleEstimate, MatchesIndependentLikelihoodMaximizer) {
    std::mt19937_64 rng(15);
    const Matrix x = sl::testing::random_normal_matrix(50, 2, rng);
    const Vector y = sl::testing::bernoulli_response(x, Vector{{1.0, -1.0}}, rng);
    const sl::LogisticFit fit = sl::irls_fit({x, y});
    EXPECT_LE(max_abs(sl::mle_estimate(fit, x) - sl::testing::coordinate_ascent_mle(x, y)), 1e-6);
}

TEST(LtlEstimate, OneDimensionalArithmetic) {
    // X'VX = 2, X'Vz = 4 => beta_ML = 2; k = d = 1 => (4 - 2) / 3.
    const sl::NormalEquations eq{Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 4.0)};
    EXPECT_NEAR(sl::ltl_estimate(eq, params(1.0, 1.0))(0), 2.0 / 3.0, 1e-15);
}

TEST(LtlEstimate, ApproachesMleAsBiasingVanishes) {
    std::mt19937_64 rng(16);
    const Fitted f = fitted_sample(rng);
    EXPECT_LE(max_abs(sl::ltl_estimate(f.fit, f.x, params(1e-12, 0.0)) - f.fit.beta), 1e-6);
}

TEST(LtlEstimate, SpectralFormMatchesDirectFormula) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const Instance inst = random_instance(2 + trial % 7, rng);
        const sl::ShrinkageParams sp = params(0.05 + trial * 0.1, -0.5 + trial * 0.02);
        const Vector direct = sl::ltl_estimate(inst.eq, sp);
        const Vector spectral = sl::spectral::ltl(inst.decomp, inst.eq.xtvz, sp);
        EXPECT_LE(max_abs(direct - spectral), 1e-10);
    }
}

TEST(PclrEstimate, FullRankEqualsMle) {
    std::mt19937_64 rng(18);
    const Fitted f = fitted_sample(rng);
    const sl::SpectralDecomposition d = sl::spectral_decompose(f.x, f.fit.v_diag);
    EXPECT_LE(max_abs(sl::pclr_estimate(f.fit, f.x, sl::ComponentSplit(d, 4)) -
                      sl::mle_estimate(f.fit, f.x)),
              1e-10);
}

TEST(PclrEstimate, DropsTrailingCoordinateUnderIdentityBasis) {
    // X'VX = diag(4, 1), beta_ML = (a, b) => PCLR with r = 1 is (a, 0).
    const double a = 0.7;
    const double b = -1.3;
    const sl::NormalEquations eq{Matrix(Vector{{4.0, 1.0}}.asDiagonal()), Vector{{4.0 * a, b}}};
    const sl::ComponentSplit split(sl::spectral_decompose(eq.xtvx), 1);
    const Vector out = sl::pclr_estimate(eq, split);
    EXPECT_NEAR(out(0), a, 1e-15);
    EXPECT_NEAR(out(1), 0.0, 1e-15);
}

TEST(PclrEstimate, TwoExpressionsAgree) {
    // T_r (T_r'X'VXT_r)^{-1} T_r'X'Vz versus T_r T_r' beta_ML.
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index p = 2 + trial % 7;
        const Instance inst = random_instance(p, rng);
        const sl::ComponentSplit split(inst.decomp, 1 + trial % p);
        const Vector direct = sl::pclr_estimate(inst.eq, split);
        const Vector beta_ml = inst.eq.xtvx.ldlt().solve(inst.eq.xtvz);
        const auto tr = split.retained_vectors();
        const Vector projected = tr * (tr.transpose() * beta_ml);
        EXPECT_LE(max_abs(direct - projected), 1e-10);
        EXPECT_LE(max_abs(direct - sl::spectral::pclr(split, inst.eq.xtvz)), 1e-10);
        if (split.dropped() > 0) {
            EXPECT_LE(max_abs(split.dropped_vectors().transpose() * direct), 1e-10);
        }
    }
}

TEST(PcltlEstimate, ReductionIdentities) {
    std::mt19937_64 rng(20);
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Index p = 2 + trial % 7;
        const Instance inst = random_instance(p, rng);
        const sl::ShrinkageParams sp = params(0.3 + 0.05 * trial, 0.1 - 0.01 * trial);
        const sl::ComponentSplit full(inst.decomp, p);
        const sl::ComponentSplit part(inst.decomp, 1 + trial % p);

        EXPECT_LE(max_abs(sl::pcltl_estimate(inst.eq, full, sp) - sl::ltl_estimate(inst.eq, sp)),
                  1e-10);
        const sl::ShrinkageParams vanishing = params(1e-10, 0.0);
        EXPECT_LE(max_abs(sl::pcltl_estimate(inst.eq, part, vanishing) -
                          sl::pclr_estimate(inst.eq, part)),
                  1e-6);
        EXPECT_LE(max_abs(sl::pcltl_estimate(inst.eq, full, vanishing) - sl::mle_estimate(inst.eq)),
                  1e-6);
    }
}

TEST(PcltlEstimate, DenseMatrixFormAgrees) {
    // T_r (M + kI)^{-1} (M - dI) M^{-1} T_r'X'Vz with M = T_r'X'VXT_r formed densely.
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index p = 2 + trial % 7;
        const Instance inst = random_instance(p, rng);
        const Eigen::Index r = 1 + trial % p;
        const sl::ComponentSplit split(inst.decomp, r);
        const sl::ShrinkageParams sp = params(0.2 + 0.1 * trial, -0.3 + 0.02 * trial);
        const Matrix tr = split.retained_vectors();
        const Matrix m = tr.transpose() * inst.eq.xtvx * tr;
        const Matrix id = Matrix::Identity(r, r);
        const Vector dense = tr * (m + sp.k * id).inverse() * (m - sp.d * id) * m.inverse() *
                             tr.transpose() * inst.eq.xtvz;
        EXPECT_LE(max_abs(sl::pcltl_estimate(inst.eq, split, sp) - dense), 1e-10);
    }
}

TEST(PcltlEstimate, LinearTransformationOfPclr) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index p = 2 + trial % 7;
        const Instance inst = random_instance(p, rng);
        const sl::ComponentSplit split(inst.decomp, 1 + trial % p);
        const sl::ShrinkageParams sp = params(0.5 + 0.1 * trial, 0.2);
        const auto tr = split.retained_vectors();
        const auto lambda = split.retained_values().array();
        const Vector scale = (lambda - sp.d) / (lambda + sp.k);
        const Vector via_pclr =
            tr * scale.asDiagonal() * tr.transpose() * sl::pclr_estimate(inst.eq, split);
        EXPECT_LE(max_abs(sl::pcltl_estimate(inst.eq, split, sp) - via_pclr), 1e-10);
    }
}

TEST(PcltlEstimate, FitOverloadsAgreeWithNormalEquations) {
    std::mt19937_64 rng(23);
    const Fitted f = fitted_sample(rng);
    const sl::NormalEquations eq = sl::NormalEquations::from_fit(f.fit, f.x);
    const sl::ComponentSplit split(sl::spectral_decompose(eq.xtvx), 2);
    const sl::ShrinkageParams sp = params(1.0, 0.2);
    EXPECT_EQ(sl::pcltl_estimate(f.fit, f.x, split, sp), sl::pcltl_estimate(eq, split, sp));
    EXPECT_EQ(sl::ltl_estimate(f.fit, f.x, sp), sl::ltl_estimate(eq, sp));
}

TEST(Estimate, DispatchesOnKind) {
    std::mt19937_64 rng(24);
    const Instance inst = random_instance(4, rng);
    const sl::ShrinkageParams sp = params(0.7, 0.1);
    EXPECT_EQ(sl::estimate(sl::EstimatorSpec::ml(), inst.eq, inst.decomp),
              sl::mle_estimate(inst.eq));
    EXPECT_EQ(sl::estimate(sl::EstimatorSpec::ltl(sp), inst.eq, inst.decomp),
              sl::ltl_estimate(inst.eq, sp));
    EXPECT_EQ(sl::estimate(sl::EstimatorSpec::pclr(2), inst.eq, inst.decomp),
              sl::pclr_estimate(inst.eq, sl::ComponentSplit(inst.decomp, 2)));
    EXPECT_EQ(sl::estimate(sl::EstimatorSpec::pcltl(3, sp), inst.eq, inst.decomp),
              sl::pcltl_estimate(inst.eq, sl::ComponentSplit(inst.decomp, 3), sp));
    EXPECT_THROW(sl::estimate(sl::EstimatorSpec::ltl(params(-1.0, 0.0)), inst.eq, inst.decomp),
                 sl::InvalidArgument);
}

TEST(ChooseD, Examples) {
    EXPECT_DOUBLE_EQ(sl::choose_d(Vector{{1.0, 1.0}}), 0.25);
    EXPECT_DOUBLE_EQ(sl::choose_d(Vector{{4.0, 1.0}}), 0.25);
    EXPECT_NEAR(sl::choose_d(Vector{{9.0, 3.0, 0.01}}), 0.5 * 0.01 / 1.01, 1e-16);
    EXPECT_NEAR(sl::choose_d(Vector{{9.0, 3.0, 0.01}}), 0.0049505, 1e-7);
    EXPECT_THROW(sl::choose_d(Vector{{1.0, 0.0}}), sl::InvalidArgument);
}

TEST(ChooseD, StaysInsideOpenHalfInterval) {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> unif(1e-6, 1e6);
    for (int trial = 0; trial < 200; ++trial) {
        Vector lam(4);
        for (int j = 0; j < 4; ++j) lam(j) = unif(rng);
        const double d = sl::choose_d(lam);
        EXPECT_GT(d, 0.0);
        EXPECT_LT(d, 0.5);
    }
}

TEST(ChooseK, Examples) {
    sl::KChoice k = sl::choose_k(Vector{{1.0}}, Vector{{1.0}}, 0.25);
    EXPECT_DOUBLE_EQ(k.k, 0.5);
    EXPECT_FALSE(k.clamped);

    k = sl::choose_k(Vector{{2.0, 1.0}}, Vector{{1.0, 1.0}}, 0.0);
    EXPECT_DOUBLE_EQ(k.k, 1.0);
    EXPECT_FALSE(k.clamped);

    // (1 - 2 (1 + 1)) / 1 < 0.
    k = sl::choose_k(Vector{{1.0}}, Vector{{1.0}}, 2.0);
    EXPECT_DOUBLE_EQ(k.k, sl::kMinK);
    EXPECT_TRUE(k.clamped);
}

TEST(ChooseK, FloorsTinyAlpha) {
    const sl::KChoice k = sl::choose_k(Vector{{1.0}}, Vector{{0.0}}, 0.0);
    EXPECT_DOUBLE_EQ(k.k, 1.0 / (sl::kAlphaFloor * sl::kAlphaFloor));
    EXPECT_TRUE(std::isfinite(k.k));
}

TEST(SelectShrinkage, UsesEigencoordinatesOfMle) {
    const sl::SpectralDecomposition d{Matrix::Identity(2, 2), Vector{{2.0, 1.0}}};
    const sl::ShrinkageParams sp = sl::select_shrinkage(d, Vector{{1.0, 1.0}});
    const double expected_d = 0.5 * (1.0 / 2.0);
    EXPECT_DOUBLE_EQ(sp.d, expected_d);
    const double expected_k =
        0.5 * ((2.0 - expected_d * 3.0) / 2.0 + (1.0 - expected_d * 2.0) / 1.0);
    EXPECT_DOUBLE_EQ(sp.k, expected_k);
    EXPECT_EQ(sp.k_source, sl::ParamSource::rule);
    EXPECT_EQ(sp.d_source, sl::ParamSource::rule);
}
