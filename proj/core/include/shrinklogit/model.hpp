#pragma once

#include <vector>

#include "shrinklogit/types.hpp"

namespace shrinklogit {

inline constexpr double kDefaultProbabilityClip = 1e-10;

/// Design matrix X (n x p) with a binary response y.
///
/// Construction validates n >= p >= 1, finite X and y in {0, 1}; instances are
/// immutable afterwards.
class Dataset {
public:
    Dataset(Matrix x, Vector y);

    const Matrix& x() const noexcept { return x_; }
    const Vector& y() const noexcept { return y_; }
    Index rows() const noexcept { return x_.rows(); }
    Index cols() const noexcept { return x_.cols(); }

private:
    Matrix x_;
    Vector y_;
};

struct FitConfig {
    double tolerance = 1e-6;
    int max_iterations = 100;
    double probability_clip = kDefaultProbabilityClip;
    // Step halvings tried when a full IRLS step lowers the log-likelihood.
    int max_step_halvings = 10;

    void validate() const;
};

/// Result of an IRLS run. v_diag and z are evaluated at the returned beta.
struct LogisticFit {
    Vector beta;
    Vector v_diag;
    Vector z;
    int iterations = 0;
    bool converged = false;
    double final_step_norm = 0.0;
    double log_likelihood = 0.0;
    // Log-likelihood after each accepted iteration, starting with beta = 0.
    std::vector<double> log_likelihood_trace;
};

/// Logistic mean pi_i = 1 / (1 + exp(-x_i'beta)), clipped to [clip, 1 - clip].
Vector predict_probabilities(const Matrix& x, const Vector& beta,
                             double clip = kDefaultProbabilityClip);

/// Bernoulli log-likelihood sum y log(pi) + (1 - y) log(1 - pi).
/// Throws DomainError when some pi is outside (0, 1).
double log_likelihood(const Vector& y, const Vector& pi);

/// pi_i (1 - pi_i).
Vector weight_diagonal(const Vector& pi);

/// z_i = x_i'beta + (y_i - pi_i) / (pi_i (1 - pi_i)) using clipped pi.
Vector working_response(const Matrix& x, const Vector& beta, const Vector& y,
                        double clip = kDefaultProbabilityClip);

/// Maximum-likelihood fit by iteratively reweighted least squares.
///
/// Starts at beta = 0 and iterates beta += (X'VX)^{-1} X'(y - pi), halving the
/// step while it lowers the log-likelihood. Stops once the max-norm of the full
/// Newton step is <= tolerance. Running out of iterations is not an error: the
/// fit comes back with converged = false. A singular X'VX throws
/// SingularSystemError carrying the iteration index.
LogisticFit irls_fit(const Dataset& data, const FitConfig& config = {});

}  // namespace shrinklogit
