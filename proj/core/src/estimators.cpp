#include "shrinklogit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "shrinklogit/errors.hpp"

namespace shrinklogit {

namespace {

// Slack when comparing a cumulative eigenvalue share against the PTV threshold.
constexpr double kPtvSlack = 1e-12;

void require_dimension(const NormalEquations& eq, Index p, const char* what) {
    if (eq.xtvx.rows() != p || eq.xtvx.cols() != p || eq.xtvz.size() != p) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch");
    }
}

Eigen::LLT<Matrix> factor_or_throw(const Matrix& m, const char* what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
        throw SingularSystemError(std::string(what) + ": X'VX is singular", 0);
    }
    return llt;
}

}  // namespace

ComponentSplit::ComponentSplit(SpectralDecomposition decomp, Index retained)
    : decomp_(std::move(decomp)), r_(retained) {
    if (r_ < 1 || r_ > decomp_.dimension()) {
        throw InvalidArgument("ComponentSplit: r must lie in [1, " +
                              std::to_string(decomp_.dimension()) + "], got " +
                              std::to_string(r_));
    }
}

void ShrinkageParams::validate() const {
    if (!(k > 0.0) || !std::isfinite(k)) {
        throw InvalidArgument("k must be positive");
    }
    if (!std::isfinite(d)) {
        throw InvalidArgument("d must be finite");
    }
}

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::ml: return "ml";
        case EstimatorKind::ltl: return "ltl";
        case EstimatorKind::pclr: return "pclr";
        case EstimatorKind::pcltl: return "pcltl";
    }
    return "unknown";
}

std::optional<EstimatorKind> parse_estimator_kind(std::string_view name) {
    for (EstimatorKind kind : kAllEstimators) {
        if (to_string(kind) == name) return kind;
    }
    if (name == "mle") return EstimatorKind::ml;
    return std::nullopt;
}

EstimatorSpec EstimatorSpec::ml() { return {EstimatorKind::ml, std::nullopt, std::nullopt}; }

EstimatorSpec EstimatorSpec::ltl(const ShrinkageParams& params) {
    return {EstimatorKind::ltl, params, std::nullopt};
}

EstimatorSpec EstimatorSpec::pclr(Index components) {
    return {EstimatorKind::pclr, std::nullopt, components};
}

EstimatorSpec EstimatorSpec::pcltl(Index components, const ShrinkageParams& params) {
    return {EstimatorKind::pcltl, params, components};
}

void EstimatorSpec::validate(Index dimension) const {
    const bool wants_params = kind == EstimatorKind::ltl || kind == EstimatorKind::pcltl;
    const bool wants_components = kind == EstimatorKind::pclr || kind == EstimatorKind::pcltl;
    if (wants_params != params.has_value()) {
        throw InvalidArgument(std::string("EstimatorSpec: shrinkage parameters ") +
                              (wants_params ? "required" : "not allowed") + " for " +
                              std::string(to_string(kind)));
    }
    if (wants_components != components.has_value()) {
        throw InvalidArgument(std::string("EstimatorSpec: component count ") +
                              (wants_components ? "required" : "not allowed") + " for " +
                              std::string(to_string(kind)));
    }
    if (params) params->validate();
    if (components && (*components < 1 || *components > dimension)) {
        throw InvalidArgument("EstimatorSpec: r must lie in [1, " + std::to_string(dimension) +
                              "]");
    }
}

NormalEquations NormalEquations::from_fit(const LogisticFit& fit, const Matrix& x) {
    if (x.rows() != fit.v_diag.size() || x.rows() != fit.z.size()) {
        throw InvalidArgument("NormalEquations: X rows do not match the fit");
    }
    const Matrix xtv = x.transpose() * fit.v_diag.asDiagonal();
    return {xtv * x, xtv * fit.z};
}

SpectralDecomposition spectral_decompose(const Matrix& x, const Vector& v_diag) {
    if (x.rows() != v_diag.size()) {
        throw InvalidArgument("spectral_decompose: X rows do not match weight length");
    }
    return spectral_decompose(Matrix(x.transpose() * v_diag.asDiagonal() * x));
}

SpectralDecomposition spectral_decompose(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols() || symmetric.rows() < 1) {
        throw InvalidArgument("spectral_decompose: matrix must be square and nonempty");
    }
    if (!symmetric.allFinite()) {
        throw DecompositionError("spectral_decompose: matrix has non-finite entries",
                                 std::nan(""));
    }
    const Index p = symmetric.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
    if (solver.info() != Eigen::Success) {
        throw DecompositionError("spectral_decompose: eigensolver failed", std::nan(""));
    }
    const Vector& ascending = solver.eigenvalues();
    const double smallest = ascending(0);
    if (!(smallest > 0.0)) {
        throw DecompositionError(
            "spectral_decompose: matrix is not positive definite (smallest eigenvalue " +
                std::to_string(smallest) + ")",
            smallest);
    }

    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return ascending(a) > ascending(b); });

    SpectralDecomposition out{Matrix(p, p), Vector(p)};
    for (Index j = 0; j < p; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        out.values(j) = ascending(src);
        Vector col = solver.eigenvectors().col(src);
        Index lead = 0;
        col.cwiseAbs().maxCoeff(&lead);
        if (col(lead) < 0.0) col = -col;
        out.vectors.col(j) = col;
    }
    return out;
}

Index select_components(const Vector& lambdas, double ptv_threshold) {
    if (lambdas.size() < 1) {
        throw InvalidArgument("select_components: empty spectrum");
    }
    if (!(ptv_threshold > 0.0 && ptv_threshold <= 1.0)) {
        throw InvalidArgument("select_components: threshold must lie in (0, 1]");
    }
    const double total = lambdas.sum();
    double running = 0.0;
    for (Index r = 1; r <= lambdas.size(); ++r) {
        running += lambdas(r - 1);
        if (running / total >= ptv_threshold - kPtvSlack) return r;
    }
    return lambdas.size();
}

Vector mle_estimate(const NormalEquations& eq) {
    require_dimension(eq, eq.xtvx.rows(), "mle_estimate");
    return factor_or_throw(eq.xtvx, "mle_estimate").solve(eq.xtvz);
}

Vector ltl_estimate(const NormalEquations& eq, const ShrinkageParams& params) {
    params.validate();
    const Index p = eq.xtvx.rows();
    require_dimension(eq, p, "ltl_estimate");
    const Vector beta_ml = mle_estimate(eq);
    const Matrix ridged = eq.xtvx + params.k * Matrix::Identity(p, p);
    return ridged.llt().solve(eq.xtvz - params.d * beta_ml);
}

Vector pclr_estimate(const NormalEquations& eq, const ComponentSplit& split) {
    require_dimension(eq, split.dimension(), "pclr_estimate");
    const Matrix tr = split.retained_vectors();
    const Matrix reduced = tr.transpose() * eq.xtvx * tr;
    const Vector rhs = tr.transpose() * eq.xtvz;
    return tr * factor_or_throw(reduced, "pclr_estimate").solve(rhs);
}

Vector pcltl_estimate(const NormalEquations& eq, const ComponentSplit& split,
                      const ShrinkageParams& params) {
    require_dimension(eq, split.dimension(), "pcltl_estimate");
    return spectral::pcltl(split, eq.xtvz, params);
}

Vector mle_estimate(const LogisticFit& fit, const Matrix& x) {
    return mle_estimate(NormalEquations::from_fit(fit, x));
}

Vector ltl_estimate(const LogisticFit& fit, const Matrix& x, const ShrinkageParams& params) {
    return ltl_estimate(NormalEquations::from_fit(fit, x), params);
}

Vector pclr_estimate(const LogisticFit& fit, const Matrix& x, const ComponentSplit& split) {
    return pclr_estimate(NormalEquations::from_fit(fit, x), split);
}

Vector pcltl_estimate(const LogisticFit& fit, const Matrix& x, const ComponentSplit& split,
                      const ShrinkageParams& params) {
    return pcltl_estimate(NormalEquations::from_fit(fit, x), split, params);
}

namespace spectral {

Vector ml(const SpectralDecomposition& decomp, const Vector& xtvz) {
    const Vector alpha = (decomp.vectors.transpose() * xtvz).cwiseQuotient(decomp.values);
    return decomp.vectors * alpha;
}

Vector ltl(const SpectralDecomposition& decomp, const Vector& xtvz, const ShrinkageParams& params) {
    params.validate();
    const auto& lambda = decomp.values.array();
    const Vector alpha = (decomp.vectors.transpose() * xtvz).array() / lambda;
    const Vector shrunk = alpha.array() * (lambda - params.d) / (lambda + params.k);
    return decomp.vectors * shrunk;
}

Vector pclr(const ComponentSplit& split, const Vector& xtvz) {
    const Vector alpha_r =
        (split.retained_vectors().transpose() * xtvz).cwiseQuotient(split.retained_values());
    return split.retained_vectors() * alpha_r;
}

Vector pcltl(const ComponentSplit& split, const Vector& xtvz, const ShrinkageParams& params) {
    params.validate();
    const auto lambda = split.retained_values().array();
    const Vector alpha_r = (split.retained_vectors().transpose() * xtvz).array() / lambda;
    const Vector shrunk = alpha_r.array() * (lambda - params.d) / (lambda + params.k);
    return split.retained_vectors() * shrunk;
}

}  // namespace spectral

Vector estimate(const EstimatorSpec& spec, const NormalEquations& eq,
                const SpectralDecomposition& decomp) {
    spec.validate(decomp.dimension());
    switch (spec.kind) {
        case EstimatorKind::ml:
            return mle_estimate(eq);
        case EstimatorKind::ltl:
            return ltl_estimate(eq, *spec.params);
        case EstimatorKind::pclr:
            return pclr_estimate(eq, ComponentSplit(decomp, *spec.components));
        case EstimatorKind::pcltl:
            return pcltl_estimate(eq, ComponentSplit(decomp, *spec.components), *spec.params);
    }
    throw InvalidArgument("estimate: unknown estimator kind");
}

double choose_d(const Vector& lambdas) {
    if (lambdas.size() < 1 || !(lambdas.minCoeff() > 0.0)) {
        throw InvalidArgument("choose_d: eigenvalues must be positive");
    }
    const double ratio = (lambdas.array() / (1.0 + lambdas.array())).minCoeff();
    return 0.5 * ratio;
}

KChoice choose_k(const Vector& lambdas, const Vector& alpha_hat, double d) {
    if (lambdas.size() < 1 || lambdas.size() != alpha_hat.size()) {
        throw InvalidArgument("choose_k: eigenvalue and alpha lengths differ");
    }
    if (!std::isfinite(d)) {
        throw InvalidArgument("choose_k: d must be finite");
    }
    double total = 0.0;
    for (Index j = 0; j < lambdas.size(); ++j) {
        const double a = std::max(std::abs(alpha_hat(j)), kAlphaFloor);
        const double a2 = a * a;
        const double lam = lambdas(j);
        total += (lam - d * (1.0 + lam * a2)) / (lam * a2);
    }
    const double k = total / static_cast<double>(lambdas.size());
    if (!(k > kMinK)) {
        // NaN (overflowed terms) also lands here.
        return {kMinK, true};
    }
    return {k, false};
}

ShrinkageParams select_shrinkage(const SpectralDecomposition& decomp, const Vector& beta_ml) {
    if (beta_ml.size() != decomp.dimension()) {
        throw InvalidArgument("select_shrinkage: beta length does not match decomposition");
    }
    const double d = choose_d(decomp.values);
    const Vector alpha_hat = decomp.vectors.transpose() * beta_ml;
    const KChoice k = choose_k(decomp.values, alpha_hat, d);
    return {k.k, d, ParamSource::rule, ParamSource::rule, k.clamped};
}

}  // namespace shrinklogit
