#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shrinklogit/estimators.hpp"
#include "shrinklogit/model.hpp"
#include "shrinklogit/types.hpp"

namespace shrinklogit {

/// Random engine for every simulated draw. Normals come from
/// std::normal_distribution and Bernoulli draws from std::bernoulli_distribution.
using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t value);

/// Deterministic child seed: folds each part into the parent with mix64.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> parts);

/// PTV threshold for a given number of explanatory variables: 0.83 when p = 6, else 0.75.
double default_ptv_threshold(Index p);

struct SimulationConfig {
    Index n = 200;
    Index p = 4;
    double rho = 0.9;
    int replications = 2000;
    std::uint64_t seed = 20170101;
    double ptv_threshold = 0.75;
    FitConfig fit{};

    void validate() const;
};

/// Per-estimator simulated MSE plus protocol diagnostics for one (n, p, rho) cell.
struct CellResult {
    SimulationConfig config;
    std::array<double, 4> mse{};  // indexed by EstimatorKind
    int converged_replications = 0;
    int divergent_replications = 0;
    int k_clamped_replications = 0;
    double mean_r = 0.0;
    double mean_k = 0.0;
    double mean_d = 0.0;
    // Average trace((X'VX)^{-1}) over converged replications.
    double mean_ml_smse = 0.0;
    Vector true_beta;
    // Set by run_study when the cell failed and failures are recorded instead of thrown.
    std::optional<std::string> failure;

    double mse_of(EstimatorKind kind) const { return mse[static_cast<std::size_t>(kind)]; }
};

/// Per-replication estimates, kept only when SimulationOptions::record_replications is set.
struct ReplicationRecord {
    bool converged = false;
    std::array<Vector, 4> estimates;
    Index r = 0;
    double k = 0.0;
    double d = 0.0;
};

struct SimulationOptions {
    // Worker threads; 0 picks std::thread::hardware_concurrency().
    unsigned threads = 1;
    bool record_replications = false;
};

/// Running sum of squared errors (b - beta)'(b - beta) divided by the number of terms.
class MseAccumulator {
public:
    void add(const Vector& estimate, const Vector& truth);
    double mse() const;
    int count() const noexcept { return count_; }

private:
    double sum_ = 0.0;
    int count_ = 0;
};

/// x_ij = sqrt(1 - rho^2) z_ij + rho z_{i,q+1} with z iid N(0, 1); the common
/// factor z_{i,q+1} is shared across the row. Draws are taken row by row,
/// z_i1..z_iq first and then z_{i,q+1}.
Matrix generate_design(Index n, Index q, double rho, Rng& rng);

/// Unit-norm eigenvector of X'X for its largest eigenvalue, largest-magnitude entry positive.
Vector newhouse_oman_beta(const Matrix& x);

/// y_i ~ Bernoulli(1 / (1 + exp(-x_i'beta))), independently.
Vector generate_response(const Matrix& x, const Vector& beta, Rng& rng);

/// One Monte Carlo cell.
///
/// X and beta are drawn once from the stream derive_seed(seed, {0}); replication c
/// (1-based) draws y from derive_seed(seed, {c}). Each replication fits ML by IRLS,
/// keeps r components by the PTV rule, picks d and k by the rules in
/// estimators.hpp and accumulates (b - beta)'(b - beta) for ML, LTL, PCLR and
/// PCLTL. Replications whose IRLS fails or does not converge are counted as
/// divergent and left out of the denominator. Throws CellFailure when all diverge.
CellResult simulate_cell(const SimulationConfig& config, const SimulationOptions& options = {},
                         std::vector<ReplicationRecord>* records = nullptr);

struct StudyGrid {
    std::vector<Index> p_values{4, 6, 8, 12};
    std::vector<Index> n_values{200, 500, 1000};
    std::vector<double> rho_values{0.8, 0.9, 0.99, 0.999};
    // Replaces the per-p PTV rule when set.
    std::optional<double> ptv_override;

    void validate() const;
    std::size_t cell_count() const {
        return p_values.size() * n_values.size() * rho_values.size();
    }
};

enum class FailurePolicy { propagate, record };

/// Seed of the (p, n, rho) cell under a master seed. Depends on the coordinates
/// only, so a cell has the same draws whatever grid it is part of.
std::uint64_t cell_seed(std::uint64_t master_seed, Index p, Index n, double rho);

/// Runs every (p, n, rho) cell, ordered p-major, then n, then rho. base supplies
/// replications, seed (as the master seed) and the fit configuration. Cells run
/// on options.threads workers; results do not depend on the thread count.
std::vector<CellResult> run_study(const StudyGrid& grid, const SimulationConfig& base,
                                  const SimulationOptions& options = {},
                                  FailurePolicy on_failure = FailurePolicy::propagate);

}  // namespace shrinklogit
