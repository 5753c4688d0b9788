#include "scratch/es/de.hpp"

namespace scratch::es {
namespace {

Index best_index(const Vector& fitnesses) {
    Index best = 0;
    for (Index j = 1; j < fitnesses.size(); ++j)
        if (fitnesses[j] < fitnesses[best]) best = j;  // ties keep the lowest index
    return best;
}

// One generation sweep; callback exceptions propagate raw, `evaluations`
// counts completed fitness calls.
void step_impl(Matrix& population, Vector& fitnesses, const DEConfig& config,
               const Bounds& bounds, const FitnessFn& fitness, Rng& rng,
               std::int64_t& evaluations) {
    const int lambda = config.population;
    const Index n = bounds.dimension();
    Vector trial(n);
    for (int j = 0; j < lambda; ++j) {
        int a = rng.below(lambda);
        int b = rng.below(lambda);
        while (b == a) b = rng.below(lambda);
        int c = rng.below(lambda);
        while (c == a || c == b) c = rng.below(lambda);

        Vector mutant = bounds.clip(population.row(a).transpose() +
                                    config.mutation * (population.row(b).transpose() -
                                                       population.row(c).transpose()));
        for (Index k = 0; k < n; ++k)
            trial[k] = rng.uniform() <= config.crossover ? mutant[k] : population(j, k);

        double f = fitness(trial);
        ++evaluations;
        if (f <= fitnesses[j]) {
            population.row(j) = trial.transpose();
            fitnesses[j] = f;
        }
    }
}

void check_shapes(const Matrix& population, const Vector& fitnesses, const DEConfig& config,
                  const Bounds& bounds) {
    if (population.rows() != config.population || population.cols() != bounds.dimension())
        throw DimensionError("population is " + std::to_string(population.rows()) + "x" +
                             std::to_string(population.cols()) + ", expected " +
                             std::to_string(config.population) + "x" +
                             std::to_string(bounds.dimension()));
    if (fitnesses.size() != population.rows())
        throw DimensionError("fitness vector length disagrees with population");
}

}  // namespace

void de_step(Matrix& population, Vector& fitnesses, const DEConfig& config,
             const Bounds& bounds, const FitnessFn& fitness, Rng& rng) {
    config.validate();
    bounds.validate();
    check_shapes(population, fitnesses, config, bounds);
    std::int64_t evaluations = 0;
    try {
        step_impl(population, fitnesses, config, bounds, fitness, rng, evaluations);
    } catch (...) {
        std::throw_with_nested(CallbackError(evaluations));
    }
}

OptimizationOutcome de_optimize(const FitnessFn& fitness, const Bounds& bounds,
                                const DEConfig& config, const StopFn& stop,
                                const GenerationObserver& observer) {
    config.validate();
    bounds.validate();
    const int lambda = config.population;
    const Index n = bounds.dimension();

    Rng rng(config.seed);
    Matrix population(lambda, n);
    Vector fitnesses(lambda);
    std::int64_t evaluations = 0;
    bool early = false;
    Index best = 0;

    try {
        for (int j = 0; j < lambda; ++j) {
            for (Index k = 0; k < n; ++k)
                population(j, k) =
                    bounds.lower[k] + rng.uniform() * (bounds.upper[k] - bounds.lower[k]);
            fitnesses[j] = fitness(population.row(j).transpose());
            ++evaluations;
        }

        best = best_index(fitnesses);
        if (observer) observer(0, fitnesses[best]);
        early = stop && stop(fitnesses[best]);

        for (int gen = 1; gen <= config.iterations && !early; ++gen) {
            step_impl(population, fitnesses, config, bounds, fitness, rng, evaluations);
            best = best_index(fitnesses);
            if (observer) observer(gen, fitnesses[best]);
            early = stop && stop(fitnesses[best]);
        }
    } catch (...) {
        std::throw_with_nested(CallbackError(evaluations));
    }

    return {population.row(best).transpose(), fitnesses[best], evaluations, early};
}

}  // namespace scratch::es
