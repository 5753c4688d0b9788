#include "scratch/fitness.hpp"

#include <cmath>

namespace scratch {
namespace {
constexpr double kLogEps = 1e-12;
}

void validate_probs(const ProbVector& p) {
    if (p.size() < 2) throw DimensionError("probability vector needs at least 2 classes");
    if ((p.array() < 0.0).any()) throw ValueError("negative class probability");
    double sum = p.sum();
    if (std::abs(sum - 1.0) > 1e-6)
        throw ValueError("class probabilities sum to " + std::to_string(sum));
}

double targeted_fitness(const ProbVector& p, const TargetedSpec& spec) {
    validate_probs(p);
    if (spec.target < 0 || spec.target >= p.size())
        throw ValueError("target class out of range");
    if (spec.source < 0 || spec.source >= p.size())
        throw ValueError("source class out of range");
    if (spec.target == spec.source)
        throw ValueError("target class equals source class");
    return -(spec.alpha * std::log(p[spec.target] + kLogEps) -
             spec.beta * std::log(p[spec.source] + kLogEps));
}

double untargeted_fitness(const ProbVector& p) {
    validate_probs(p);
    double acc = 0.0;
    for (Index i = 0; i < p.size(); ++i) acc += p[i] * std::log(p[i] + kLogEps);
    return acc;
}

double confidence_fitness(std::optional<double> confidence) {
    if (!confidence) return 0.0;
    if (*confidence < 0.0 || *confidence > 1.0)
        throw ValueError("confidence " + std::to_string(*confidence) + " outside [0,1]");
    return *confidence;
}

}  // namespace scratch
