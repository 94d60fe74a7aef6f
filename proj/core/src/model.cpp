#include "shrinklogit/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shrinklogit/errors.hpp"

namespace shrinklogit {

namespace {

// Below this reciprocal condition estimate X'VX is treated as singular.
constexpr double kMinReciprocalCondition = 1e-14;

void require_same_rows(const Matrix& x, const Vector& v, const char* what) {
    if (x.rows() != v.size()) {
        throw InvalidArgument(std::string(what) + ": X has " + std::to_string(x.rows()) +
                              " rows but vector has length " + std::to_string(v.size()));
    }
}

}  // namespace

Dataset::Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.cols() < 1) {
        throw InvalidArgument("Dataset: X must have at least one column");
    }
    if (x_.rows() < x_.cols()) {
        throw InvalidArgument("Dataset: need n >= p, got n=" + std::to_string(x_.rows()) +
                              ", p=" + std::to_string(x_.cols()));
    }
    require_same_rows(x_, y_, "Dataset");
    if (!x_.allFinite()) {
        throw InvalidArgument("Dataset: X contains non-finite entries");
    }
    for (Index i = 0; i < y_.size(); ++i) {
        if (y_(i) != 0.0 && y_(i) != 1.0) {
            throw InvalidArgument("Dataset: response entry " + std::to_string(i) +
                                  " is not 0 or 1");
        }
    }
}

void FitConfig::validate() const {
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
        throw InvalidArgument("FitConfig: tolerance must be positive");
    }
    if (max_iterations < 1) {
        throw InvalidArgument("FitConfig: max_iterations must be >= 1");
    }
    if (!(probability_clip > 0.0 && probability_clip < 0.5)) {
        throw InvalidArgument("FitConfig: probability_clip must lie in (0, 1/2)");
    }
    if (max_step_halvings < 0) {
        throw InvalidArgument("FitConfig: max_step_halvings must be >= 0");
    }
}

Vector predict_probabilities(const Matrix& x, const Vector& beta, double clip) {
    if (x.cols() != beta.size()) {
        throw InvalidArgument("predict_probabilities: X has " + std::to_string(x.cols()) +
                              " columns but beta has length " + std::to_string(beta.size()));
    }
    if (!x.allFinite() || !beta.allFinite()) {
        throw InvalidArgument("predict_probabilities: non-finite input");
    }
    const Vector eta = x * beta;
    Vector pi(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        // exp(-eta) overflows to +inf for very negative eta, giving pi = 0 before clipping.
        const double p = 1.0 / (1.0 + std::exp(-eta(i)));
        pi(i) = std::clamp(p, clip, 1.0 - clip);
    }
    return pi;
}

double log_likelihood(const Vector& y, const Vector& pi) {
    if (y.size() != pi.size()) {
        throw InvalidArgument("log_likelihood: length mismatch");
    }
    double total = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double p = pi(i);
        if (!(p > 0.0 && p < 1.0)) {
            throw DomainError("log_likelihood: probability " + std::to_string(i) +
                              " is outside (0, 1)");
        }
        total += y(i) * std::log(p) + (1.0 - y(i)) * std::log1p(-p);
    }
    return total;
}

Vector weight_diagonal(const Vector& pi) {
    return pi.array() * (1.0 - pi.array());
}

Vector working_response(const Matrix& x, const Vector& beta, const Vector& y, double clip) {
    require_same_rows(x, y, "working_response");
    const Vector pi = predict_probabilities(x, beta, clip);
    const Vector v = weight_diagonal(pi);
    return (x * beta).array() + (y - pi).array() / v.array();
}

LogisticFit irls_fit(const Dataset& data, const FitConfig& config) {
    config.validate();
    const Matrix& x = data.x();
    const Vector& y = data.y();
    const double clip = config.probability_clip;

    LogisticFit fit;
    fit.beta = Vector::Zero(data.cols());
    Vector pi = predict_probabilities(x, fit.beta, clip);
    double loglik = log_likelihood(y, pi);
    fit.log_likelihood_trace.push_back(loglik);

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        const Vector v = weight_diagonal(pi);
        const Matrix xtvx = x.transpose() * v.asDiagonal() * x;
        const Vector score = x.transpose() * (y - pi);

        Eigen::LLT<Matrix> llt(xtvx);
        if (llt.info() != Eigen::Success || !(llt.rcond() > kMinReciprocalCondition)) {
            throw SingularSystemError(
                "irls_fit: X'VX is singular at iteration " + std::to_string(iter), iter);
        }
        const Vector step = llt.solve(score);
        if (!step.allFinite()) {
            throw SingularSystemError(
                "irls_fit: non-finite IRLS step at iteration " + std::to_string(iter), iter);
        }
        const double step_norm = step.lpNorm<Eigen::Infinity>();

        double scale = 1.0;
        bool accepted = false;
        Vector candidate;
        Vector candidate_pi;
        double candidate_loglik = loglik;
        // A step already below tolerance is taken in full: the log-likelihood
        // cannot resolve it, and the closed-form estimate expects the fixed point.
        const bool final_step = step_norm <= config.tolerance;
        for (int h = 0; h <= config.max_step_halvings; ++h) {
            candidate = fit.beta + scale * step;
            candidate_pi = predict_probabilities(x, candidate, clip);
            candidate_loglik = log_likelihood(y, candidate_pi);
            if (final_step || candidate_loglik >= loglik) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }

        fit.iterations = iter;
        fit.final_step_norm = step_norm;
        if (!accepted) break;
        fit.beta = std::move(candidate);
        pi = std::move(candidate_pi);
        loglik = candidate_loglik;
        fit.log_likelihood_trace.push_back(loglik);

        if (step_norm <= config.tolerance) {
            fit.converged = true;
            break;
        }
    }

    fit.v_diag = weight_diagonal(pi);
    fit.z = (x * fit.beta).array() + (y - pi).array() / fit.v_diag.array();
    fit.log_likelihood = loglik;
    return fit;
}

}  // namespace shrinklogit
