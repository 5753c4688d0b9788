#include "scratch/manifest.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>

namespace scratch {
namespace {

using nlohmann::json;

// FNV-1a 64-bit over the canonical JSON text; hex string.
std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string iso_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string config_to_json(const AttackConfig& c) {
    json j;
    j["domain"] = c.domain == Domain::image ? "image" : "network";
    j["location"] = c.location == Location::variable ? "variable" : "fixed";
    j["optimizer"] = c.optimizer == OptimizerKind::de ? "de" : "cmaes";
    j["shape"] = c.shape == ShapeKind::bezier ? "bezier" : "line";
    j["scratches"] = c.scratches;
    j["objective"] = c.objective == Objective::targeted
                         ? "targeted"
                         : (c.objective == Objective::untargeted ? "untargeted" : "caption");
    j["target"] = c.target;
    j["budget"] = c.budget;
    j["seed"] = c.seed;
    j["restarts"] = c.restarts;
    j["network_color_limit"] = c.network_color_limit;
    j["de"] = {{"population", c.de.population},
               {"iterations", c.de.iterations},
               {"mutation", c.de.mutation},
               {"crossover", c.de.crossover}};
    j["cma"] = {{"population", c.cma.population},
                {"iterations", c.cma.iterations},
                {"sigma0", c.cma.sigma0}};
    return j.dump();
}

std::string RunManifest::to_json() const {
    json j;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["toolkit_version"] = toolkit_version;
    j["classifier"] = classifier_identity;
    j["created_at"] = created_at;
    return j.dump(2) + "\n";
}

RunManifest make_manifest(const std::vector<AttackConfig>& configs,
                          const std::vector<DatasetItem>& dataset,
                          const std::string& classifier_identity) {
    std::string canonical;
    for (const auto& c : configs) canonical += config_to_json(c) + "\n";
    canonical += "classifier:" + classifier_identity + "\n";
    for (const auto& item : dataset) {
        Vector flat = item.image.flatten();
        canonical += item.name + ":" + std::to_string(item.label) + ":" +
                     fnv1a_hex(std::string(reinterpret_cast<const char*>(flat.data()),
                                           flat.size() * sizeof(double))) +
                     "\n";
    }

    RunManifest m;
    m.config_digest = fnv1a_hex(canonical);
    m.seed = configs.empty() ? 0 : configs.front().seed;
    m.classifier_identity = classifier_identity;
    m.created_at = iso_now();
    return m;
}

}  // namespace scratch
