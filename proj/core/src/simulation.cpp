#include "shrinklogit/simulation.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "shrinklogit/errors.hpp"

namespace shrinklogit {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. fn must not throw.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
}

struct ReplicationOutcome {
    bool converged = false;
    std::array<double, 4> squared_error{};
    Index r = 0;
    double k = 0.0;
    double d = 0.0;
    bool k_clamped = false;
    double ml_smse = 0.0;
    std::array<Vector, 4> estimates;
};

ReplicationOutcome run_replication(const SimulationConfig& config, const Matrix& x,
                                   const Vector& beta, std::uint64_t stream_seed) {
    ReplicationOutcome out;
    Rng rng(stream_seed);
    try {
        Dataset data(x, generate_response(x, beta, rng));
        const LogisticFit fit = irls_fit(data, config.fit);
        if (!fit.converged) return out;

        const NormalEquations eq = NormalEquations::from_fit(fit, x);
        SpectralDecomposition decomp = spectral_decompose(eq.xtvx);
        const Index r = select_components(decomp.values, config.ptv_threshold);
        const ShrinkageParams params = select_shrinkage(decomp, fit.beta);
        out.ml_smse = decomp.values.cwiseInverse().sum();
        const ComponentSplit split(std::move(decomp), r);

        out.estimates[static_cast<std::size_t>(EstimatorKind::ml)] = fit.beta;
        out.estimates[static_cast<std::size_t>(EstimatorKind::ltl)] =
            spectral::ltl(split.decomposition(), eq.xtvz, params);
        out.estimates[static_cast<std::size_t>(EstimatorKind::pclr)] =
            spectral::pclr(split, eq.xtvz);
        out.estimates[static_cast<std::size_t>(EstimatorKind::pcltl)] =
            spectral::pcltl(split, eq.xtvz, params);

        for (std::size_t e = 0; e < out.estimates.size(); ++e) {
            if (!out.estimates[e].allFinite()) return ReplicationOutcome{};
            out.squared_error[e] = (out.estimates[e] - beta).squaredNorm();
        }
        out.r = r;
        out.k = params.k;
        out.d = params.d;
        out.k_clamped = params.k_clamped;
        out.converged = true;
    } catch (const std::exception&) {
        // Singular X'VX along the IRLS path, separation, or a non-PD cross product.
        return ReplicationOutcome{};
    }
    return out;
}

}  // namespace

std::uint64_t mix64(std::uint64_t value) {
    value += kGolden;
    value = (value ^ (value >> 30)) * 0xBF58476D1CE4E5B9ULL;
    value = (value ^ (value >> 27)) * 0x94D049BB133111EBULL;
    return value ^ (value >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = mix64(parent);
    for (std::uint64_t part : parts) h = mix64(h ^ mix64(part));
    return h;
}

double default_ptv_threshold(Index p) { return p == 6 ? 0.83 : 0.75; }

void SimulationConfig::validate() const {
    if (p < 2 || n <= p) {
        throw InvalidArgument("SimulationConfig: need n > p >= 2, got n=" + std::to_string(n) +
                              ", p=" + std::to_string(p));
    }
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw InvalidArgument("SimulationConfig: rho must lie in [0, 1)");
    }
    if (replications < 1) {
        throw InvalidArgument("SimulationConfig: replications must be >= 1");
    }
    if (!(ptv_threshold > 0.0 && ptv_threshold <= 1.0)) {
        throw InvalidArgument("SimulationConfig: ptv_threshold must lie in (0, 1]");
    }
    fit.validate();
}

void MseAccumulator::add(const Vector& estimate, const Vector& truth) {
    sum_ += (estimate - truth).squaredNorm();
    ++count_;
}

double MseAccumulator::mse() const {
    return count_ == 0 ? std::nan("") : sum_ / static_cast<double>(count_);
}

Matrix generate_design(Index n, Index q, double rho, Rng& rng) {
    if (n < 1 || q < 1) {
        throw InvalidArgument("generate_design: n and q must be positive");
    }
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw InvalidArgument("generate_design: rho must lie in [0, 1)");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double own = std::sqrt(1.0 - rho * rho);
    Matrix x(n, q);
    Vector row(q);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < q; ++j) row(j) = normal(rng);
        const double common = normal(rng);
        for (Index j = 0; j < q; ++j) x(i, j) = own * row(j) + rho * common;
    }
    return x;
}

Vector newhouse_oman_beta(const Matrix& x) {
    if (x.cols() < 1 || x.rows() < x.cols()) {
        throw InvalidArgument("newhouse_oman_beta: X must have n >= p >= 1");
    }
    const Matrix xtx = x.transpose() * x;
    const SpectralDecomposition decomp = spectral_decompose(xtx);
    const double largest = decomp.values(0);
    const double smallest = decomp.values(decomp.dimension() - 1);
    if (smallest <= largest * 1e-13) {
        throw DecompositionError("newhouse_oman_beta: X is rank deficient", smallest);
    }
    Vector beta = decomp.vectors.col(0);
    return beta / beta.norm();
}

Vector generate_response(const Matrix& x, const Vector& beta, Rng& rng) {
    if (x.cols() != beta.size()) {
        throw InvalidArgument("generate_response: dimension mismatch");
    }
    const Vector eta = x * beta;
    Vector y(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        std::bernoulli_distribution draw(1.0 / (1.0 + std::exp(-eta(i))));
        y(i) = draw(rng) ? 1.0 : 0.0;
    }
    return y;
}

CellResult simulate_cell(const SimulationConfig& config, const SimulationOptions& options,
                         std::vector<ReplicationRecord>* records) {
    config.validate();

    Rng design_rng(derive_seed(config.seed, {0}));
    const Matrix x = generate_design(config.n, config.p, config.rho, design_rng);
    const Vector beta = newhouse_oman_beta(x);

    const auto reps = static_cast<std::size_t>(config.replications);
    std::vector<ReplicationOutcome> outcomes(reps);
    parallel_for(reps, options.threads, [&](std::size_t c) {
        outcomes[c] = run_replication(config, x, beta, derive_seed(config.seed, {c + 1}));
    });

    CellResult result;
    result.config = config;
    result.true_beta = beta;
    std::array<double, 4> sums{};
    double sum_r = 0.0;
    double sum_k = 0.0;
    double sum_d = 0.0;
    double sum_ml_smse = 0.0;
    for (const ReplicationOutcome& o : outcomes) {
        if (!o.converged) {
            ++result.divergent_replications;
            continue;
        }
        ++result.converged_replications;
        for (std::size_t e = 0; e < sums.size(); ++e) sums[e] += o.squared_error[e];
        sum_r += static_cast<double>(o.r);
        sum_k += o.k;
        sum_d += o.d;
        sum_ml_smse += o.ml_smse;
        if (o.k_clamped) ++result.k_clamped_replications;
    }
    if (records != nullptr) {
        records->clear();
        records->reserve(reps);
        for (ReplicationOutcome& o : outcomes) {
            records->push_back({o.converged, std::move(o.estimates), o.r, o.k, o.d});
        }
    }
    if (result.converged_replications == 0) {
        throw CellFailure("simulate_cell: all " + std::to_string(config.replications) +
                          " replications diverged");
    }
    const auto count = static_cast<double>(result.converged_replications);
    for (std::size_t e = 0; e < sums.size(); ++e) result.mse[e] = sums[e] / count;
    result.mean_r = sum_r / count;
    result.mean_k = sum_k / count;
    result.mean_d = sum_d / count;
    result.mean_ml_smse = sum_ml_smse / count;
    return result;
}

void StudyGrid::validate() const {
    if (p_values.empty() || n_values.empty() || rho_values.empty()) {
        throw InvalidArgument("StudyGrid: p, n and rho lists must be nonempty");
    }
}

std::uint64_t cell_seed(std::uint64_t master_seed, Index p, Index n, double rho) {
    return derive_seed(master_seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(n),
                                     std::bit_cast<std::uint64_t>(rho)});
}

std::vector<CellResult> run_study(const StudyGrid& grid, const SimulationConfig& base,
                                  const SimulationOptions& options, FailurePolicy on_failure) {
    grid.validate();
    std::vector<SimulationConfig> configs;
    configs.reserve(grid.cell_count());
    for (Index p : grid.p_values) {
        for (Index n : grid.n_values) {
            for (double rho : grid.rho_values) {
                SimulationConfig cfg = base;
                cfg.p = p;
                cfg.n = n;
                cfg.rho = rho;
                cfg.ptv_threshold = grid.ptv_override.value_or(default_ptv_threshold(p));
                cfg.seed = cell_seed(base.seed, p, n, rho);
                configs.push_back(cfg);
            }
        }
    }

    std::vector<CellResult> results(configs.size());
    std::vector<std::string> errors(configs.size());
    const SimulationOptions cell_options{1, false};
    parallel_for(configs.size(), options.threads, [&](std::size_t i) {
        try {
            results[i] = simulate_cell(configs[i], cell_options);
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "cell p=" << configs[i].p << " n=" << configs[i].n << " rho=" << configs[i].rho
                << ": " << e.what();
            errors[i] = msg.str();
        }
    });

    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (errors[i].empty()) continue;
        if (on_failure == FailurePolicy::propagate) throw CellFailure(errors[i]);
        results[i] = CellResult{};
        results[i].config = configs[i];
        results[i].failure = errors[i];
    }
    return results;
}

}  // namespace shrinklogit
