#pragma once

#include <optional>
#include <string_view>

#include "shrinklogit/estimators.hpp"
#include "shrinklogit/types.hpp"

namespace shrinklogit {

// Whether the coefficient vector in an MSEM is the data-generating beta or the
// ML plug-in estimate. Every closed form below depends on the unknown beta.
enum class BetaSource { true_beta, plug_in_mle };

std::string_view to_string(BetaSource source);

/// Asymptotic mean squared error matrix of one estimator: msem = covariance + bias bias'.
struct MsemReport {
    EstimatorSpec estimator;
    Vector bias;
    Matrix covariance;
    Matrix msem;
    double smse = 0.0;
    BetaSource beta_source = BetaSource::plug_in_mle;
};

enum class Comparison { versus_ml, versus_pclr, versus_ltl, direct_psd };

std::string_view to_string(Comparison comparison);

struct DominanceVerdict {
    Comparison comparison = Comparison::direct_psd;
    // Scalar the condition is judged on; for direct_psd the minimum eigenvalue
    // of the symmetrized MSEM difference.
    double condition_value = 0.0;
    bool holds = false;
    // False when the d < k, d + k > 0 assumptions of the condition are violated.
    bool precondition_met = true;
    // Filled by the condition evaluators: the direct eigenvalue check of the same difference.
    std::optional<double> oracle_min_eigenvalue;
    std::optional<bool> oracle_holds;
    std::optional<bool> psd_oracle_agrees;
    // The MSEM difference is zero to tolerance (equal rather than strictly better).
    std::optional<bool> msem_equal;
};

inline constexpr double kPsdTolerance = 1e-8;
inline constexpr double kZeroConditionTolerance = 1e-10;

/// (-T_{p-r} T_{p-r}' - (d + k) T_r S_r(k)^{-1} T_r') beta
Vector pcltl_bias(const Vector& beta, const ComponentSplit& split, const ShrinkageParams& params);

/// T_r S_r(k)^{-1} S_r(d) Lambda_r^{-1} S_r(d) S_r(k)^{-1} T_r', where S_r(k) = Lambda_r + kI
/// and S_r(d) = Lambda_r - dI.
Matrix pcltl_covariance(const ComponentSplit& split, const ShrinkageParams& params);

/// Closed-form asymptotic MSEM for any of the four estimators.
///
/// ML: (X'VX)^{-1} = T Lambda^{-1} T', unbiased.
/// PCLR: T_r Lambda_r^{-1} T_r' + (T_r T_r' - I) beta beta' (T_r T_r' - I).
/// LTL: T S(k)^{-1} S(d) Lambda^{-1} S(d) S(k)^{-1} T' + (k + d)^2 T S(k)^{-1} T' beta beta' T S(k)^{-1} T'.
/// PCLTL: pcltl_covariance + pcltl_bias pcltl_bias'.
MsemReport asymptotic_msem(const EstimatorSpec& spec, const SpectralDecomposition& decomp,
                           const Vector& beta, BetaSource source = BetaSource::plug_in_mle);

double smse(const MsemReport& report);

/// Direct check that msem_a - msem_b is nonnegative definite, i.e. the estimator
/// behind msem_b is at least as good as the one behind msem_a in the MSEM order.
/// holds when the minimum eigenvalue of the symmetrized difference is
/// >= -tol * (spectral norm of the difference).
DominanceVerdict psd_dominates(const Matrix& msem_a, const Matrix& msem_b,
                               double tol = kPsdTolerance);

// Which weight the dropped-component block carries in the PCLTL-vs-ML condition.
// as_printed uses Lambda_{p-r}; inverse uses Lambda_{p-r}^{-1}.
enum class DroppedBlockWeight { as_printed, inverse };

/// PCLTL vs ML: requires d < k, d + k > 0 and evaluates
///   (k + d)^2 beta'T_r [2(k + d) I + (k^2 - d^2) Lambda_r^{-1}]^{-1} T_r'beta
///     + beta'T_{p-r} Lambda_{p-r} T_{p-r}'beta <= 1.
DominanceVerdict ml_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                        const ShrinkageParams& params,
                                        DroppedBlockWeight weight = DroppedBlockWeight::as_printed);

/// PCLTL vs PCLR: holds iff T_r'beta = 0 (max-norm <= kZeroConditionTolerance).
DominanceVerdict pclr_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                          const ShrinkageParams& params);

/// PCLTL vs LTL: holds iff T_{p-r}'beta = 0 (max-norm <= kZeroConditionTolerance).
DominanceVerdict ltl_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                         const ShrinkageParams& params);

}  // namespace shrinklogit
