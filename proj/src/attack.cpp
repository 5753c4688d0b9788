#include "scratch/attack.hpp"

#include <atomic>
#include <mutex>
#include <cmath>
#include <thread>

namespace scratch {
namespace {

// Control-flow signal thrown from inside a fitness callback the moment a
// queried candidate satisfies the success condition.
struct SuccessFound {
    Vector params;
    Image image;
    int prediction = -1;
    std::optional<std::string> caption;
};

constexpr std::uint64_t kStreamTarget = 1;
constexpr std::uint64_t kStreamMask = 2;
constexpr std::uint64_t kStreamOptimizer = 3;

double finite_or_throw(double f) {
    if (!std::isfinite(f)) throw ValueError("fitness is not finite");
    return f;
}

// Walks the nested-exception chain looking for a SuccessFound payload.
bool unwrap_success(const CallbackError& e, SuccessFound& out) {
    try {
        std::rethrow_if_nested(e);
    } catch (SuccessFound& s) {
        out = std::move(s);
        return true;
    } catch (const CallbackError& inner) {
        return unwrap_success(inner, out);
    } catch (...) {
    }
    return false;
}

[[noreturn]] void rethrow_cause(const CallbackError& e) {
    try {
        std::rethrow_if_nested(e);
    } catch (const CallbackError& inner) {
        rethrow_cause(inner);
    }
    throw e;
}

ScratchShape random_shape(ShapeKind kind, Index h, Index w, Rng& rng) {
    auto point = [&] { return Point{rng.uniform(0.0, double(w)), rng.uniform(0.0, double(h))}; };
    if (kind == ShapeKind::line) return LineShape{point(), point()};
    return BezierShape{point(), point(), point(), rng.uniform(0.0, 7.0)};
}

struct FixedSupport {
    std::vector<PixelCoord> pixels;  // union in scratch order, first hit wins
    std::vector<Mask> masks;
};

FixedSupport sample_fixed_support(const AttackConfig& config, Index h, Index w, Rng& rng) {
    FixedSupport support;
    std::vector<char> seen(static_cast<size_t>(h * w), 0);
    for (int s = 0; s < config.scratches; ++s) {
        ScratchShape shape = random_shape(config.shape, h, w, rng);
        auto pixels = rasterize_pixels(shape, h, w);
        support.masks.push_back(pixels_to_mask(pixels, h, w));
        for (const auto& px : pixels) {
            char& flag = seen[static_cast<size_t>(px.row) * w + px.col];
            if (!flag) {
                flag = 1;
                support.pixels.push_back(px);
            }
        }
    }
    return support;
}

PixelField colors_to_field(const FixedSupport& support, const Vector& genome) {
    PixelField field;
    field.pixels = support.pixels;
    field.colors.resize(support.pixels.size());
    for (size_t i = 0; i < support.pixels.size(); ++i)
        field.colors[i] = {genome[3 * i], genome[3 * i + 1], genome[3 * i + 2]};
    return field;
}

}  // namespace

void AttackConfig::validate() const {
    if (scratches < 1) throw ValueError("attack needs at least one scratch");
    if (restarts < 1) throw ValueError("restarts must be at least 1");
    if (domain == Domain::image &&
        (optimizer != OptimizerKind::de || location != Location::variable))
        throw ValueError("image-domain attacks use DE with variable scratch locations");
    if (location == Location::fixed && domain != Domain::network)
        throw ValueError("fixed-location attacks run in the network domain");
    if (location == Location::fixed && optimizer != OptimizerKind::cmaes)
        throw ValueError("fixed-location attacks use CMA-ES");
    if (location == Location::variable && optimizer != OptimizerKind::de)
        throw ValueError("variable-location attacks use DE");
    if (objective == Objective::caption && domain != Domain::image)
        throw ValueError("caption attacks run in the image domain");
    if (budget < population())
        throw ValueError("query budget must cover at least one generation (population " +
                         std::to_string(population()) + ")");
    if (optimizer == OptimizerKind::de) de.validate();
}

AttackResult run_attack(const Image& x, int source, int target, const AttackConfig& config,
                        const Classifier& classifier, QueryLedger& ledger,
                        const std::optional<std::string>& baseline_caption) {
    config.validate();
    if (config.objective == Objective::targeted) {
        if (target < 0 || target >= classifier.num_classes())
            throw ValueError("target class out of range");
        if (target == source) throw ValueError("target class equals source class");
    }

    const Index h = x.height, w = x.width;
    AttackResult result;
    result.source = source;
    result.target = config.objective == Objective::targeted ? target : -1;

    auto observer = [&](int, double best) { result.trace.push_back(best); };

    // Classification objectives share the success rule: targeted wants the
    // argmax to reach the target, untargeted wants it away from the source.
    auto classify = [&](const Image& adv, const Vector& params) -> double {
        ProbVector p = predict(classifier, ledger, adv);
        int pred;
        p.maxCoeff(&pred);
        bool ok = config.objective == Objective::targeted ? pred == target : pred != source;
        if (ok) throw SuccessFound{params, adv, pred, std::nullopt};
        return finite_or_throw(config.objective == Objective::targeted
                                   ? targeted_fitness(p, {target, source})
                                   : untargeted_fitness(p));
    };

    auto caption_objective = [&](const Image& adv, const Vector& params) -> double {
        CaptionResult res = caption_predict(classifier, ledger, adv);
        bool ok = !res.caption.has_value() ||
                  (baseline_caption && *res.caption != *baseline_caption);
        if (ok) throw SuccessFound{params, adv, -1, res.caption ? *res.caption : std::string()};
        return finite_or_throw(confidence_fitness(res.confidence));
    };

    try {
        if (config.location == Location::variable) {
            es::Bounds bounds = encoding_bounds(config.shape, config.scratches, h, w,
                                                config.domain, config.network_color_limit);
            es::DEConfig de = config.de;
            de.seed = derive_seed(config.seed, kStreamOptimizer);
            auto fitness = [&](const Vector& v) {
                auto scratches =
                    decode_candidate(v, config.shape, config.scratches, h, w, config.domain);
                Image adv = apply_scratches(x, scratches, config.domain);
                return config.objective == Objective::caption ? caption_objective(adv, v)
                                                              : classify(adv, v);
            };
            auto outcome = es::de_optimize(fitness, bounds, de, nullptr, observer);
            // Budget outlasted the optimizer without a success.
            result.queries = ledger.used();
            result.final_params = outcome.best;
            auto scratches = decode_candidate(outcome.best, config.shape, config.scratches, h,
                                              w, config.domain);
            result.final_image = apply_scratches(x, scratches, config.domain);
            result.coverage = coverage(scratch_masks(scratches, h, w), h, w);
        } else {
            Rng mask_rng(derive_seed(config.seed, kStreamMask));
            FixedSupport support = sample_fixed_support(config, h, w, mask_rng);
            const Index genome = 3 * static_cast<Index>(support.pixels.size());

            es::CMAConfig cma = config.cma;
            cma.mean0 = Vector::Zero(genome);
            cma.seed = derive_seed(config.seed, kStreamOptimizer);
            auto fitness = [&](const Vector& v) {
                Image adv = apply_pixel_field(x, colors_to_field(support, v), config.domain);
                return classify(adv, v);
            };
            auto outcome = es::cma_optimize(fitness, cma, nullptr, observer);
            result.queries = ledger.used();
            result.final_params = outcome.best;
            result.final_image =
                apply_pixel_field(x, colors_to_field(support, outcome.best), config.domain);
            result.coverage = coverage(support.masks, h, w);
        }
    } catch (const CallbackError& e) {
        SuccessFound found;
        if (unwrap_success(e, found)) {
            result.success = true;
            result.queries = ledger.used();
            result.final_params = std::move(found.params);
            result.final_image = std::move(found.image);
            result.final_prediction = found.prediction;
            result.final_caption = std::move(found.caption);
            if (config.location == Location::variable) {
                auto scratches = decode_candidate(result.final_params, config.shape,
                                                  config.scratches, h, w, config.domain);
                result.coverage = coverage(scratch_masks(scratches, h, w), h, w);
            } else {
                Rng mask_rng(derive_seed(config.seed, kStreamMask));
                result.coverage =
                    coverage(sample_fixed_support(config, h, w, mask_rng).masks, h, w);
            }
            return result;
        }
        try {
            rethrow_cause(e);
        } catch (const BudgetExhausted&) {
            result.success = false;
            result.queries = ledger.used();
            result.final_image = x;
            result.coverage = 0.0;
            return result;
        }
    }
    return result;
}

BatchOutcome run_batch(const std::vector<DatasetItem>& dataset,
                       const std::vector<AttackConfig>& configs, const Classifier& classifier,
                       int jobs) {
    if (dataset.empty()) throw ValueError("dataset is empty");
    if (configs.empty()) throw ValueError("no attack configuration given");
    for (const auto& c : configs) c.validate();

    BatchOutcome outcome;
    for (int config_index = 0; config_index < static_cast<int>(configs.size()); ++config_index) {
        const auto& config = configs[config_index];
        // Eligibility pass: attacks start from correctly classified images
        // (caption attacks need a baseline caption instead). These probe
        // calls sit outside the per-attack budgets.
        struct Case {
            int image_index;
            int restart;
            int source;
            int target;
            std::optional<std::string> baseline;
        };
        std::vector<Case> cases;
        for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
            const auto& item = dataset[i];
            int source = item.label;
            std::optional<std::string> baseline;
            if (config.objective == Objective::caption) {
                CaptionResult base = classifier.caption_raw(item.image);
                if (!base.caption) continue;
                baseline = base.caption;
            } else {
                int pred;
                classifier.predict_raw(item.image).maxCoeff(&pred);
                if (pred != item.label) continue;
            }
            int target = -1;
            if (config.objective == Objective::targeted) {
                if (config.target >= 0) {
                    if (config.target == source) continue;  // no valid target
                    target = config.target;
                } else {
                    Rng trng(derive_seed(config.seed, i, kStreamTarget));
                    int k = classifier.num_classes();
                    target = (source + 1 + trng.below(k - 1)) % k;
                }
            }
            int repeats = config.location == Location::fixed ? config.restarts : 1;
            for (int r = 0; r < repeats; ++r) cases.push_back({i, r, source, target, baseline});
        }

        std::vector<AttackRecord> records(cases.size());
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&](std::atomic<size_t>& next) {
            try {
                for (size_t k = next.fetch_add(1); k < cases.size(); k = next.fetch_add(1)) {
                    const Case& cs = cases[k];
                    AttackConfig per = config;
                    per.seed = derive_seed(config.seed, cs.image_index, 1000 + cs.restart);
                    QueryLedger ledger(config.budget);
                    AttackRecord rec;
                    rec.config_index = config_index;
                    rec.image_index = cs.image_index;
                    rec.restart = cs.restart;
                    rec.name = dataset[cs.image_index].name;
                    rec.result = run_attack(dataset[cs.image_index].image, cs.source,
                                            cs.target, per, classifier, ledger, cs.baseline);
                    records[k] = std::move(rec);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(cases.size());  // drain remaining work
            }
        };
        std::atomic<size_t> next{0};
        int threads = std::max(1, jobs);
        if (threads == 1) {
            worker(next);
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) pool.emplace_back([&] { worker(next); });
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);

        ReportRow row;
        row.config_name = (config.shape == ShapeKind::bezier ? "bezier" : "line") + std::string(" x") +
                          std::to_string(config.scratches);
        row.scratches = config.scratches;
        row.eligible = static_cast<int>(records.size());
        double sum_q = 0.0, sum_cov = 0.0;
        for (const auto& rec : records) {
            if (rec.result.success) {
                ++row.successes;
                sum_q += static_cast<double>(rec.result.queries);
                sum_cov += rec.result.coverage;
            }
        }
        if (row.eligible > 0) row.success_rate = 100.0 * row.successes / row.eligible;
        if (row.successes > 0) {
            row.mean_queries = sum_q / row.successes;
            row.mean_coverage = sum_cov / row.successes;
        }
        outcome.table.rows.push_back(row);
        for (auto& rec : records) outcome.records.push_back(std::move(rec));
    }
    return outcome;
}

SourceTargetMatrix source_target_analysis(const std::vector<AttackRecord>& records,
                                          int classes) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SourceTargetMatrix m;
    m.classes = classes;
    Matrix sums = Matrix::Zero(classes, classes);
    Matrix counts = Matrix::Zero(classes, classes);
    Vector row_sums = Vector::Zero(classes), row_counts = Vector::Zero(classes);
    Vector col_sums = Vector::Zero(classes), col_counts = Vector::Zero(classes);

    for (const auto& rec : records) {
        const auto& r = rec.result;
        if (!r.success || r.target < 0) continue;
        if (r.source < 0 || r.source >= classes || r.target >= classes)
            throw ValueError("result labels exceed the class count");
        sums(r.source, r.target) += static_cast<double>(r.queries);
        counts(r.source, r.target) += 1.0;
        row_sums[r.source] += static_cast<double>(r.queries);
        row_counts[r.source] += 1.0;
        col_sums[r.target] += static_cast<double>(r.queries);
        col_counts[r.target] += 1.0;
    }

    m.mean_queries = Matrix::Constant(classes, classes, nan);
    for (int s = 0; s < classes; ++s)
        for (int t = 0; t < classes; ++t)
            if (counts(s, t) > 0) m.mean_queries(s, t) = sums(s, t) / counts(s, t);
    m.row_means = Vector::Constant(classes, nan);
    m.col_means = Vector::Constant(classes, nan);
    for (int k = 0; k < classes; ++k) {
        if (row_counts[k] > 0) m.row_means[k] = row_sums[k] / row_counts[k];
        if (col_counts[k] > 0) m.col_means[k] = col_sums[k] / col_counts[k];
    }
    return m;
}

bool audit_success(const AttackRecord& record, const Classifier& classifier) {
    const auto& r = record.result;
    if (!r.success) return false;
    int pred;
    classifier.predict_raw(r.final_image).maxCoeff(&pred);
    return r.target >= 0 ? pred == r.target : pred != r.source;
}

}  // namespace scratch
