#include "shrinklogit/msem.hpp"

#include <cmath>
#include <string>

#include "shrinklogit/errors.hpp"

namespace shrinklogit {

namespace {

// Slack on the "<= 1" comparison of the PCLTL-vs-ML quadratic form.
constexpr double kBoundarySlack = 1e-12;

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool shrinkage_preconditions(const ShrinkageParams& params) {
    return params.d < params.k && params.d + params.k > 0.0;
}

MsemReport make_report(const EstimatorSpec& spec, Vector bias, Matrix covariance, Matrix msem,
                       BetaSource source) {
    MsemReport report{spec, std::move(bias), symmetrize(covariance), symmetrize(msem), 0.0,
                      source};
    report.smse = report.msem.trace();
    return report;
}

Matrix ml_msem(const SpectralDecomposition& decomp) {
    return decomp.vectors * decomp.values.cwiseInverse().asDiagonal() *
           decomp.vectors.transpose();
}

// T diag(scale) T' for the full basis.
Matrix rotate_diagonal(const Matrix& t, const Vector& scale) {
    return t * scale.asDiagonal() * t.transpose();
}

// Shared by the dominance conditions: finishes the verdict with the direct oracle.
void attach_oracle(DominanceVerdict& verdict, const Matrix& worse, const Matrix& better) {
    const DominanceVerdict oracle = psd_dominates(worse, better);
    verdict.oracle_min_eigenvalue = oracle.condition_value;
    verdict.oracle_holds = oracle.holds;
    verdict.msem_equal = oracle.msem_equal;
    if (verdict.precondition_met) {
        verdict.psd_oracle_agrees = oracle.holds == verdict.holds;
    }
}

Matrix pcltl_msem_matrix(const Vector& beta, const ComponentSplit& split,
                         const ShrinkageParams& params) {
    const Vector bias = pcltl_bias(beta, split, params);
    return pcltl_covariance(split, params) + bias * bias.transpose();
}

}  // namespace

std::string_view to_string(BetaSource source) {
    return source == BetaSource::true_beta ? "true_beta" : "plug_in_mle";
}

std::string_view to_string(Comparison comparison) {
    switch (comparison) {
        case Comparison::versus_ml: return "pcltl_vs_ml";
        case Comparison::versus_pclr: return "pcltl_vs_pclr";
        case Comparison::versus_ltl: return "pcltl_vs_ltl";
        case Comparison::direct_psd: return "direct_psd";
    }
    return "unknown";
}

Vector pcltl_bias(const Vector& beta, const ComponentSplit& split, const ShrinkageParams& params) {
    params.validate();
    if (beta.size() != split.dimension()) {
        throw InvalidArgument("pcltl_bias: beta length does not match the decomposition");
    }
    const auto tr = split.retained_vectors();
    const auto tp = split.dropped_vectors();
    const Vector retained_scale =
        (params.d + params.k) / (split.retained_values().array() + params.k);
    const Vector gamma_r = tr.transpose() * beta;
    const Vector gamma_p = tp.transpose() * beta;
    return -(tp * gamma_p) - tr * retained_scale.cwiseProduct(gamma_r);
}

Matrix pcltl_covariance(const ComponentSplit& split, const ShrinkageParams& params) {
    params.validate();
    const auto lambda = split.retained_values().array();
    if (!((lambda + params.k) > 0.0).all()) {
        throw InvalidArgument("pcltl_covariance: lambda_j + k must be positive");
    }
    const Vector scale = (lambda - params.d).square() / (lambda * (lambda + params.k).square());
    const auto tr = split.retained_vectors();
    return symmetrize(tr * scale.asDiagonal() * tr.transpose());
}

MsemReport asymptotic_msem(const EstimatorSpec& spec, const SpectralDecomposition& decomp,
                           const Vector& beta, BetaSource source) {
    const Index p = decomp.dimension();
    spec.validate(p);
    if (beta.size() != p) {
        throw InvalidArgument("asymptotic_msem: beta length does not match the decomposition");
    }
    const Matrix& t = decomp.vectors;

    switch (spec.kind) {
        case EstimatorKind::ml: {
            Matrix cov = ml_msem(decomp);
            Matrix msem = cov;
            return make_report(spec, Vector::Zero(p), std::move(cov), std::move(msem), source);
        }
        case EstimatorKind::pclr: {
            const ComponentSplit split(decomp, *spec.components);
            const auto tr = split.retained_vectors();
            Matrix cov = tr * split.retained_values().cwiseInverse().asDiagonal() * tr.transpose();
            const Matrix off_projector = tr * tr.transpose() - Matrix::Identity(p, p);
            Vector bias = off_projector * beta;
            Matrix msem = cov + off_projector * beta * beta.transpose() * off_projector;
            return make_report(spec, std::move(bias), std::move(cov), std::move(msem), source);
        }
        case EstimatorKind::ltl: {
            const ShrinkageParams& sp = *spec.params;
            const auto lambda = decomp.values.array();
            const Vector inv_sk = (lambda + sp.k).inverse();
            const Vector cov_scale = (lambda - sp.d).square() / lambda * inv_sk.array().square();
            Matrix cov = rotate_diagonal(t, cov_scale);
            const Matrix sk_inv = rotate_diagonal(t, inv_sk);
            const double kd = sp.k + sp.d;
            Vector bias = -kd * (sk_inv * beta);
            Matrix msem = cov + kd * kd * sk_inv * beta * beta.transpose() * sk_inv;
            return make_report(spec, std::move(bias), std::move(cov), std::move(msem), source);
        }
        case EstimatorKind::pcltl: {
            const ComponentSplit split(decomp, *spec.components);
            Vector bias = pcltl_bias(beta, split, *spec.params);
            Matrix cov = pcltl_covariance(split, *spec.params);
            Matrix msem = cov + bias * bias.transpose();
            return make_report(spec, std::move(bias), std::move(cov), std::move(msem), source);
        }
    }
    throw InvalidArgument("asymptotic_msem: unknown estimator kind");
}

double smse(const MsemReport& report) { return report.msem.trace(); }

DominanceVerdict psd_dominates(const Matrix& msem_a, const Matrix& msem_b, double tol) {
    if (msem_a.rows() != msem_a.cols() || msem_b.rows() != msem_b.cols() ||
        msem_a.rows() != msem_b.rows()) {
        throw InvalidArgument("psd_dominates: matrices must be square with equal dimension");
    }
    const Matrix diff = symmetrize(msem_a - msem_b);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(diff, Eigen::EigenvaluesOnly);
    const Vector& eig = solver.eigenvalues();
    const double min_eig = eig.size() > 0 ? eig.minCoeff() : 0.0;
    const double norm = eig.size() > 0 ? eig.cwiseAbs().maxCoeff() : 0.0;
    const double scale = std::max(msem_a.norm(), msem_b.norm());

    DominanceVerdict verdict;
    verdict.comparison = Comparison::direct_psd;
    verdict.condition_value = min_eig;
    verdict.holds = min_eig >= -tol * norm;
    verdict.msem_equal = diff.norm() <= tol * scale;
    return verdict;
}

DominanceVerdict ml_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                        const ShrinkageParams& params, DroppedBlockWeight weight) {
    params.validate();
    if (beta.size() != split.dimension()) {
        throw InvalidArgument("ml_dominance_condition: beta length does not match");
    }
    const double k = params.k;
    const double d = params.d;
    const auto lambda_r = split.retained_values().array();
    const Vector gamma_r = split.retained_vectors().transpose() * beta;
    const Vector gamma_p = split.dropped_vectors().transpose() * beta;

    const Vector middle = 2.0 * (k + d) + (k * k - d * d) / lambda_r;
    const double retained_term =
        (k + d) * (k + d) * (gamma_r.array().square() / middle.array()).sum();
    const Vector dropped_weight = weight == DroppedBlockWeight::as_printed
                                      ? Vector(split.dropped_values())
                                      : Vector(split.dropped_values().cwiseInverse());
    const double dropped_term = (gamma_p.array().square() * dropped_weight.array()).sum();

    DominanceVerdict verdict;
    verdict.comparison = Comparison::versus_ml;
    verdict.precondition_met = shrinkage_preconditions(params);
    verdict.condition_value = retained_term + dropped_term;
    verdict.holds = verdict.precondition_met && verdict.condition_value <= 1.0 + kBoundarySlack;

    attach_oracle(verdict, ml_msem(split.decomposition()), pcltl_msem_matrix(beta, split, params));
    return verdict;
}

DominanceVerdict pclr_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                          const ShrinkageParams& params) {
    params.validate();
    if (beta.size() != split.dimension()) {
        throw InvalidArgument("pclr_dominance_condition: beta length does not match");
    }
    DominanceVerdict verdict;
    verdict.comparison = Comparison::versus_pclr;
    verdict.precondition_met = shrinkage_preconditions(params);
    verdict.condition_value =
        (split.retained_vectors().transpose() * beta).lpNorm<Eigen::Infinity>();
    verdict.holds = verdict.precondition_met && verdict.condition_value <= kZeroConditionTolerance;

    const MsemReport pclr = asymptotic_msem(EstimatorSpec::pclr(split.retained()),
                                            split.decomposition(), beta);
    attach_oracle(verdict, pclr.msem, pcltl_msem_matrix(beta, split, params));
    return verdict;
}

DominanceVerdict ltl_dominance_condition(const Vector& beta, const ComponentSplit& split,
                                         const ShrinkageParams& params) {
    params.validate();
    if (beta.size() != split.dimension()) {
        throw InvalidArgument("ltl_dominance_condition: beta length does not match");
    }
    DominanceVerdict verdict;
    verdict.comparison = Comparison::versus_ltl;
    verdict.condition_value =
        split.dropped() == 0
            ? 0.0
            : (split.dropped_vectors().transpose() * beta).lpNorm<Eigen::Infinity>();
    verdict.holds = verdict.condition_value <= kZeroConditionTolerance;

    const MsemReport ltl =
        asymptotic_msem(EstimatorSpec::ltl(params), split.decomposition(), beta);
    attach_oracle(verdict, ltl.msem, pcltl_msem_matrix(beta, split, params));
    return verdict;
}

}  // namespace shrinklogit
