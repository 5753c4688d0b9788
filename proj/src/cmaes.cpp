#include "scratch/es/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scratch::es {
namespace {

// Tutorial-default strategy constants, derived from dimension and population.
struct Constants {
    int mu;
    Vector weights;  // length mu, sums to 1
    double mueff;
    double c_sigma, d_sigma, c_cov, c_one, c_mu, chi_n;

    Constants(Index n, int lambda) {
        mu = lambda / 2;
        weights.resize(mu);
        for (int i = 0; i < mu; ++i)
            weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
        weights /= weights.sum();
        mueff = 1.0 / weights.squaredNorm();
        double nd = static_cast<double>(n);
        c_sigma = (mueff + 2.0) / (nd + mueff + 5.0);
        d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
        c_cov = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
        c_one = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
        c_mu = std::min(1.0 - c_one,
                        2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
        chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
    }
};

Eigen::SelfAdjointEigenSolver<Matrix> factorize(const Matrix& covariance) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance);
    if (solver.info() != Eigen::Success)
        throw FactorizationError(std::numeric_limits<double>::quiet_NaN());
    double min_ev = solver.eigenvalues().minCoeff();
    if (min_ev <= 0.0) throw FactorizationError(min_ev);
    return solver;
}

std::vector<int> ascending_order(const Vector& fitnesses) {
    for (Index i = 0; i < fitnesses.size(); ++i)
        if (std::isnan(fitnesses[i]))
            throw ValueError("NaN fitness at sample " + std::to_string(i) +
                             "; ranking is undefined");
    std::vector<int> order(fitnesses.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitnesses[a] < fitnesses[b]; });
    return order;
}

}  // namespace

CMAState CMAState::initial(const Vector& mean0, double sigma0) {
    CMAState s;
    s.mean = mean0;
    s.sigma = sigma0;
    s.covariance = Matrix::Identity(mean0.size(), mean0.size());
    s.path_sigma = Vector::Zero(mean0.size());
    s.path_cov = Vector::Zero(mean0.size());
    return s;
}

Matrix cma_ask(const CMAState& state, int lambda, Rng& rng) {
    const Index n = state.dimension();
    auto solver = factorize(state.covariance);
    Vector scale = solver.eigenvalues().cwiseSqrt();
    const Matrix& basis = solver.eigenvectors();

    Matrix samples(lambda, n);
    Vector z(n);
    for (int i = 0; i < lambda; ++i) {
        for (Index k = 0; k < n; ++k) z[k] = rng.normal();
        samples.row(i) =
            (state.mean + state.sigma * (basis * scale.cwiseProduct(z).matrix())).transpose();
    }
    return samples;
}

CMAState cma_tell(const CMAState& state, const Matrix& samples, const Vector& fitnesses) {
    const Index n = state.dimension();
    const int lambda = static_cast<int>(samples.rows());
    if (lambda < 2) throw ValueError("cma_tell needs at least 2 samples");
    if (samples.cols() != n)
        throw DimensionError("sample dimension disagrees with strategy state");
    if (fitnesses.size() != lambda)
        throw DimensionError("fitness vector length disagrees with sample count");

    const Constants k(n, lambda);
    const auto order = ascending_order(fitnesses);

    Vector mean = Vector::Zero(n);
    for (int i = 0; i < k.mu; ++i) mean += k.weights[i] * samples.row(order[i]).transpose();
    Vector y = (mean - state.mean) / state.sigma;

    auto solver = factorize(state.covariance);
    Matrix inv_sqrt = solver.eigenvectors() *
                      solver.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                      solver.eigenvectors().transpose();

    CMAState next;
    next.mean = mean;
    next.generation = state.generation + 1;

    next.path_sigma = (1.0 - k.c_sigma) * state.path_sigma +
                      std::sqrt(k.c_sigma * (2.0 - k.c_sigma) * k.mueff) * (inv_sqrt * y);

    double norm_ps = next.path_sigma.norm();
    double expected = std::sqrt(1.0 - std::pow(1.0 - k.c_sigma, 2.0 * next.generation));
    bool h_sigma = norm_ps / expected < (1.4 + 2.0 / (n + 1.0)) * k.chi_n;

    next.path_cov = (1.0 - k.c_cov) * state.path_cov;
    if (h_sigma) next.path_cov += std::sqrt(k.c_cov * (2.0 - k.c_cov) * k.mueff) * y;

    Matrix rank_mu = Matrix::Zero(n, n);
    for (int i = 0; i < k.mu; ++i) {
        Vector yi = (samples.row(order[i]).transpose() - state.mean) / state.sigma;
        rank_mu += k.weights[i] * yi * yi.transpose();
    }
    double stall = h_sigma ? 0.0 : k.c_cov * (2.0 - k.c_cov);
    next.covariance = (1.0 - k.c_one - k.c_mu) * state.covariance +
                      k.c_one * (next.path_cov * next.path_cov.transpose() +
                                 stall * state.covariance) +
                      k.c_mu * rank_mu;
    next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();

    next.sigma = state.sigma * std::exp((k.c_sigma / k.d_sigma) * (norm_ps / k.chi_n - 1.0));
    return next;
}

OptimizationOutcome cma_optimize(const FitnessFn& fitness, const CMAConfig& config,
                                 const StopFn& stop, const GenerationObserver& observer) {
    config.validate();
    const int lambda = config.population;

    Rng rng(config.seed);
    CMAState state = CMAState::initial(config.mean0, config.sigma0);

    Vector best = config.mean0;
    double best_fitness = std::numeric_limits<double>::infinity();
    std::int64_t evaluations = 0;
    bool early = false;

    for (int gen = 1; gen <= config.iterations && !early; ++gen) {
        Matrix samples = cma_ask(state, lambda, rng);
        Vector fitnesses(lambda);
        try {
            for (int i = 0; i < lambda; ++i) {
                fitnesses[i] = fitness(samples.row(i).transpose());
                ++evaluations;
            }
        } catch (...) {
            std::throw_with_nested(CallbackError(evaluations));
        }
        for (int i = 0; i < lambda; ++i) {
            if (fitnesses[i] < best_fitness) {
                best_fitness = fitnesses[i];
                best = samples.row(i).transpose();
            }
        }
        if (observer) observer(gen, best_fitness);
        early = stop && stop(best_fitness);
        if (!early) state = cma_tell(state, samples, fitnesses);
    }

    return {best, best_fitness, evaluations, early};
}

}  // namespace scratch::es
