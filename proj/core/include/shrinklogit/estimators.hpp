#pragma once

#include <optional>
#include <string_view>

#include "shrinklogit/model.hpp"
#include "shrinklogit/types.hpp"

namespace shrinklogit {

/// Eigenpairs of X'VX: X'VX = T diag(lambdas) T'.
///
/// lambdas are sorted descending (stable, ties keep their solver order) and
/// each column of T is flipped so its largest-magnitude entry is positive.
struct SpectralDecomposition {
    Matrix vectors;  // T, columns t_1..t_p
    Vector values;   // lambda_1 >= ... >= lambda_p > 0

    Index dimension() const noexcept { return values.size(); }
};

/// Splits T and Lambda into the first r retained components and the p - r dropped ones.
class ComponentSplit {
public:
    ComponentSplit(SpectralDecomposition decomp, Index retained);

    Index retained() const noexcept { return r_; }
    Index dimension() const noexcept { return decomp_.dimension(); }
    Index dropped() const noexcept { return dimension() - r_; }

    const SpectralDecomposition& decomposition() const noexcept { return decomp_; }
    auto retained_vectors() const { return decomp_.vectors.leftCols(r_); }
    auto dropped_vectors() const { return decomp_.vectors.rightCols(dropped()); }
    auto retained_values() const { return decomp_.values.head(r_); }
    auto dropped_values() const { return decomp_.values.tail(dropped()); }

private:
    SpectralDecomposition decomp_;
    Index r_;
};

enum class ParamSource { user, rule };

/// Biasing parameters k > 0 and finite d.
struct ShrinkageParams {
    double k = 1.0;
    double d = 0.0;
    ParamSource k_source = ParamSource::user;
    ParamSource d_source = ParamSource::user;
    // Set when the k rule produced a nonpositive value and was clamped.
    bool k_clamped = false;

    /// Throws InvalidArgument("k must be positive") / on non-finite d.
    void validate() const;
};

enum class EstimatorKind { ml, ltl, pclr, pcltl };

inline constexpr EstimatorKind kAllEstimators[] = {
    EstimatorKind::ml, EstimatorKind::ltl, EstimatorKind::pclr, EstimatorKind::pcltl};

std::string_view to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator_kind(std::string_view name);

/// Which estimator to evaluate: params only for LTL/PCLTL, components only for PCLR/PCLTL.
struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::ml;
    std::optional<ShrinkageParams> params;
    std::optional<Index> components;

    static EstimatorSpec ml();
    static EstimatorSpec ltl(const ShrinkageParams& params);
    static EstimatorSpec pclr(Index components);
    static EstimatorSpec pcltl(Index components, const ShrinkageParams& params);

    void validate(Index dimension) const;
};

/// X'VX and X'Vz at a fixed V and z. Every estimator is a function of these two.
struct NormalEquations {
    Matrix xtvx;
    Vector xtvz;

    static NormalEquations from_fit(const LogisticFit& fit, const Matrix& x);
};

SpectralDecomposition spectral_decompose(const Matrix& x, const Vector& v_diag);
/// Decomposes an already-formed symmetric positive definite matrix.
SpectralDecomposition spectral_decompose(const Matrix& symmetric);

/// Smallest r with sum_{j<=r} lambda_j / sum_j lambda_j >= ptv_threshold.
Index select_components(const Vector& lambdas, double ptv_threshold);

// Matrix-form estimators.
Vector mle_estimate(const LogisticFit& fit, const Matrix& x);
Vector ltl_estimate(const LogisticFit& fit, const Matrix& x, const ShrinkageParams& params);
Vector pclr_estimate(const LogisticFit& fit, const Matrix& x, const ComponentSplit& split);
Vector pcltl_estimate(const LogisticFit& fit, const Matrix& x, const ComponentSplit& split,
                      const ShrinkageParams& params);

Vector mle_estimate(const NormalEquations& eq);
/// (X'VX + kI)^{-1} (X'Vz - d beta_ML)
Vector ltl_estimate(const NormalEquations& eq, const ShrinkageParams& params);
/// T_r (T_r'X'VXT_r)^{-1} T_r'X'Vz
Vector pclr_estimate(const NormalEquations& eq, const ComponentSplit& split);
/// T_r S_r(k)^{-1} S_r(d) Lambda_r^{-1} T_r'X'Vz, with the reduced r x r system taken as
/// the diagonal Lambda_r.
Vector pcltl_estimate(const NormalEquations& eq, const ComponentSplit& split,
                      const ShrinkageParams& params);

/// Estimators written in eigencoordinates alpha = T'beta, where every inverse is diagonal.
namespace spectral {

Vector ml(const SpectralDecomposition& decomp, const Vector& xtvz);
Vector ltl(const SpectralDecomposition& decomp, const Vector& xtvz, const ShrinkageParams& params);
Vector pclr(const ComponentSplit& split, const Vector& xtvz);
Vector pcltl(const ComponentSplit& split, const Vector& xtvz, const ShrinkageParams& params);

}  // namespace spectral

/// Dispatches on spec.kind. The split is rebuilt from decomp when spec.components is set.
Vector estimate(const EstimatorSpec& spec, const NormalEquations& eq,
                const SpectralDecomposition& decomp);

inline constexpr double kAlphaFloor = 1e-8;
inline constexpr double kMinK = 1e-4;

/// d = 1/2 min_j lambda_j / (1 + lambda_j).
double choose_d(const Vector& lambdas);

struct KChoice {
    double k;
    bool clamped;
};

/// Arithmetic-mean rule
///   k = (1/p) sum_j (lambda_j - d (1 + lambda_j alpha_j^2)) / (lambda_j alpha_j^2)
/// with |alpha_j| floored at kAlphaFloor and the result clamped below at kMinK.
KChoice choose_k(const Vector& lambdas, const Vector& alpha_hat, double d);

/// d then k by the rules above, using alpha_hat = T'beta_ml.
ShrinkageParams select_shrinkage(const SpectralDecomposition& decomp, const Vector& beta_ml);

}  // namespace shrinklogit
