// Command-line front end: attack / defend / report / predict.
#include "scratch/attack.hpp"
#include "scratch/defense.hpp"
#include "scratch/io.hpp"
#include "scratch/manifest.hpp"
#include "scratch/remote.hpp"
#include "scratch/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitBackend = 3;

struct BackendFlags {
    std::string model_path;
    std::string remote;  // host:port
    int classes = 0;
    bool caption = false;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& flags) {
    cmd->add_option("--model", flags.model_path, "Builtin classifier weight file (SCR1)");
    cmd->add_option("--remote", flags.remote, "Remote backend as host:port");
    cmd->add_option("--classes", flags.classes, "Class count of a remote classifier");
    cmd->add_flag("--caption-backend", flags.caption, "Remote backend is a caption API");
}

std::shared_ptr<scratch::Classifier> make_backend(const BackendFlags& flags) {
    if (!flags.model_path.empty()) return scratch::load_builtin(flags.model_path);
    if (!flags.remote.empty()) {
        auto colon = flags.remote.rfind(':');
        if (colon == std::string::npos)
            throw scratch::ValueError("--remote expects host:port");
        std::string host = flags.remote.substr(0, colon);
        int port = std::stoi(flags.remote.substr(colon + 1));
        if (flags.caption) return std::make_shared<scratch::RemoteCaptioner>(host, port);
        if (flags.classes < 2)
            throw scratch::ValueError("--classes is required for a remote classifier");
        return std::make_shared<scratch::RemoteClassifier>(host, port, flags.classes);
    }
    throw scratch::ValueError("no classifier given; use --model or --remote");
}

std::vector<scratch::DatasetItem> load_dataset(const std::string& dir) {
    fs::path labels = fs::path(dir) / "labels.csv";
    std::ifstream in(labels);
    if (!in) throw scratch::Error("cannot open " + labels.string());
    std::vector<scratch::DatasetItem> items;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw scratch::Error("malformed labels.csv line: " + line);
        scratch::DatasetItem item;
        item.name = line.substr(0, comma);
        item.label = std::stoi(line.substr(comma + 1));
        item.image = scratch::load_image((fs::path(dir) / item.name).string());
        items.push_back(std::move(item));
    }
    if (items.empty()) throw scratch::Error("dataset " + dir + " lists no images");
    return items;
}

struct AttackFlags {
    std::string domain = "image";
    std::string location = "variable";
    std::string optimizer = "de";
    std::string shape = "bezier";
    std::string objective = "targeted";
    int scratches = 1;
    int target = -1;
    std::int64_t budget = 2500;
    std::uint64_t seed = 0;
    int restarts = 1;
    int population = 50;
    int iterations = 50;
    double mutation = 0.8;
    double crossover = 0.7;
    double sigma0 = 0.5;
    double color_limit = 10.0;
    int jobs = 1;
};

scratch::AttackConfig to_config(const AttackFlags& f) {
    scratch::AttackConfig c;
    if (f.domain == "image") c.domain = scratch::Domain::image;
    else if (f.domain == "network") c.domain = scratch::Domain::network;
    else throw scratch::ValueError("unknown domain '" + f.domain + "'");
    if (f.location == "variable") c.location = scratch::Location::variable;
    else if (f.location == "fixed") c.location = scratch::Location::fixed;
    else throw scratch::ValueError("unknown location '" + f.location + "'");
    if (f.optimizer == "de") c.optimizer = scratch::OptimizerKind::de;
    else if (f.optimizer == "cmaes") c.optimizer = scratch::OptimizerKind::cmaes;
    else throw scratch::ValueError("unknown optimizer '" + f.optimizer + "'");
    if (f.shape == "bezier") c.shape = scratch::ShapeKind::bezier;
    else if (f.shape == "line") c.shape = scratch::ShapeKind::line;
    else throw scratch::ValueError("unknown shape '" + f.shape + "'");
    if (f.objective == "targeted") c.objective = scratch::Objective::targeted;
    else if (f.objective == "untargeted") c.objective = scratch::Objective::untargeted;
    else if (f.objective == "caption") c.objective = scratch::Objective::caption;
    else throw scratch::ValueError("unknown objective '" + f.objective + "'");
    c.scratches = f.scratches;
    c.target = f.target;
    c.budget = f.budget;
    c.seed = f.seed;
    c.restarts = f.restarts;
    c.network_color_limit = f.color_limit;
    c.de.population = f.population;
    c.de.iterations = f.iterations;
    c.de.mutation = f.mutation;
    c.de.crossover = f.crossover;
    c.cma.population = f.population;
    c.cma.iterations = f.iterations;
    c.cma.sigma0 = f.sigma0;
    c.validate();
    return c;
}

int cmd_attack(const AttackFlags& flags, const BackendFlags& backend,
               const std::string& images_dir, const std::string& out_dir) {
    auto classifier = make_backend(backend);
    auto dataset = load_dataset(images_dir);
    scratch::AttackConfig config = to_config(flags);

    fs::create_directories(fs::path(out_dir) / "adv");
    auto outcome = scratch::run_batch(dataset, {config}, *classifier, flags.jobs);

    std::ofstream results(fs::path(out_dir) / "results.jsonl");
    for (const auto& rec : outcome.records) results << scratch::record_to_jsonl(rec) << '\n';
    results.close();

    scratch::write_file((fs::path(out_dir) / "report.csv").string(),
                        scratch::report_csv(outcome.table));
    scratch::write_file((fs::path(out_dir) / "configs.json").string(),
                        "[" + scratch::config_to_json(config) + "]\n");

    auto manifest = scratch::make_manifest({config}, dataset, classifier->identity());
    scratch::write_file((fs::path(out_dir) / "manifest.json").string(), manifest.to_json());

    int saved = 0;
    for (const auto& rec : outcome.records) {
        if (!rec.result.success) continue;
        fs::path stem = fs::path(rec.name).stem();
        std::string suffix = config.domain == scratch::Domain::image ? ".ppm" : ".scrt";
        fs::path file = fs::path(out_dir) / "adv" /
                        (stem.string() + "_r" + std::to_string(rec.restart) + suffix);
        scratch::save_image(rec.result.final_image, file.string());
        ++saved;
    }

    const auto& row = outcome.table.rows.front();
    std::cout << "attacked " << row.eligible << " cases: " << row.successes << " successes ("
              << row.success_rate << "%)";
    if (row.successes > 0)
        std::cout << ", mean queries " << row.mean_queries << ", mean coverage "
                  << row.mean_coverage << "%";
    std::cout << "\nwrote " << out_dir << "/results.jsonl, report.csv, manifest.json and "
              << saved << " adversarial images\n";
    return kExitOk;
}

std::vector<scratch::AttackRecord> load_records(const std::string& run_dir) {
    std::ifstream in(fs::path(run_dir) / "results.jsonl");
    if (!in) throw scratch::Error("cannot open " + run_dir + "/results.jsonl");
    std::vector<scratch::AttackRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) records.push_back(scratch::record_from_jsonl(line));
    if (records.empty()) throw scratch::Error(run_dir + "/results.jsonl is empty");
    return records;
}

int cmd_defend(const std::string& run_dir, const std::string& defense_name, int quality,
               const BackendFlags& backend, const std::string& images_dir,
               const std::string& out_dir) {
    auto classifier = make_backend(backend);
    auto spec = scratch::parse_defense(defense_name, quality);
    auto records = load_records(run_dir);

    std::vector<std::pair<int, scratch::Image>> adversarials;
    for (const auto& rec : records)
        if (rec.result.success) adversarials.emplace_back(rec.result.source, rec.result.final_image);
    if (adversarials.empty()) throw scratch::Error("run has no successful attacks to defend");

    std::vector<std::pair<int, scratch::Image>> benign;
    if (!images_dir.empty())
        for (const auto& item : load_dataset(images_dir)) benign.emplace_back(item.label, item.image);

    auto report = scratch::recovery_eval(adversarials, spec, *classifier, benign);

    fs::create_directories(out_dir);
    scratch::write_file((fs::path(out_dir) / "recovery.csv").string(),
                        scratch::recovery_csv(report));
    scratch::write_file((fs::path(out_dir) / "recovery_log.jsonl").string(),
                        scratch::recovery_log_jsonl(report));
    json summary;
    summary["defense"] = spec.name();
    summary["evaluated"] = report.evaluated;
    summary["rejected"] = report.rejected;
    summary["recovery_rate"] = report.recovery_rate;
    summary["network_domain_rate"] = report.network_domain_rate;
    summary["image_domain_rate"] = report.image_domain_rate;
    summary["clean_accuracy"] = report.clean_accuracy;
    summary["clean_accuracy_drop"] = report.clean_accuracy_drop;
    scratch::write_file((fs::path(out_dir) / "recovery.json").string(), summary.dump(2) + "\n");

    std::cout << spec.name() << ": recovery rate " << report.recovery_rate << "% over "
              << report.evaluated << " adversarials";
    if (!benign.empty())
        std::cout << ", clean accuracy drop " << report.clean_accuracy_drop << " points";
    std::cout << "\nwrote " << out_dir << "/recovery.csv\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir, bool matrix, int classes) {
    auto records = load_records(run_dir);

    // Rebuild the table from the raw records, grouped by config.
    json configs = json::array();
    std::ifstream cfg(fs::path(run_dir) / "configs.json");
    if (cfg) configs = json::parse(cfg);

    int max_config = 0;
    for (const auto& rec : records) max_config = std::max(max_config, rec.config_index);
    scratch::ReportTable table;
    for (int ci = 0; ci <= max_config; ++ci) {
        scratch::ReportRow row;
        row.scratches = ci < static_cast<int>(configs.size())
                            ? configs[ci].value("scratches", 0)
                            : 0;
        double sum_q = 0, sum_cov = 0;
        for (const auto& rec : records) {
            if (rec.config_index != ci) continue;
            ++row.eligible;
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
        table.rows.push_back(row);
    }
    std::cout << scratch::report_csv(table);

    if (matrix) {
        if (classes <= 0)
            for (const auto& rec : records)
                classes = std::max({classes, rec.result.source + 1, rec.result.target + 1});
        auto m = scratch::source_target_analysis(records, classes);
        std::cout << scratch::matrix_csv(m, {});
    }
    return kExitOk;
}

int cmd_predict(const BackendFlags& backend, const std::string& image_path) {
    auto classifier = make_backend(backend);
    scratch::Image img = scratch::load_image(image_path);
    scratch::QueryLedger ledger(1);
    if (backend.caption) {
        auto res = scratch::caption_predict(*classifier, ledger, img);
        if (res.caption)
            std::cout << "caption: " << *res.caption << "\n";
        else
            std::cout << "caption: (none)\n";
        if (res.confidence) std::cout << "confidence: " << *res.confidence << "\n";
        return kExitOk;
    }
    auto probs = scratch::predict(*classifier, ledger, img);
    int argmax;
    probs.maxCoeff(&argmax);
    for (int i = 0; i < probs.size(); ++i)
        std::cout << classifier->labels()[i] << ": " << probs[i] << "\n";
    std::cout << "prediction: " << argmax << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolution-based scratch attacks against black-box image classifiers"};
    app.require_subcommand(1);

    AttackFlags attack_flags;
    BackendFlags backend;
    std::string images_dir, out_dir = "runs/out", run_dir, defense_name = "clip",
                image_path;
    int quality = 90, classes = 0;
    bool matrix = false;

    auto* attack = app.add_subcommand("attack", "Evolve scratches against a dataset");
    attack->set_config("--config", "", "Config file (key=value, flags take precedence)")
        ->check(CLI::ExistingFile);
    attack->add_option("--images", images_dir, "Dataset directory with labels.csv")->required();
    attack->add_option("--out", out_dir, "Output directory");
    attack->add_option("--domain", attack_flags.domain, "image|network");
    attack->add_option("--location", attack_flags.location, "variable|fixed");
    attack->add_option("--optimizer", attack_flags.optimizer, "de|cmaes");
    attack->add_option("--shape", attack_flags.shape, "bezier|line");
    attack->add_option("--objective", attack_flags.objective, "targeted|untargeted|caption");
    attack->add_option("--scratches", attack_flags.scratches, "Scratches per candidate");
    attack->add_option("--target", attack_flags.target, "Fixed target class (-1: random)");
    attack->add_option("--budget", attack_flags.budget, "Query budget per attack");
    attack->add_option("--seed", attack_flags.seed, "Base seed");
    attack->add_option("--restarts", attack_flags.restarts, "Fixed-location mask redraws");
    attack->add_option("--population", attack_flags.population, "Optimizer population");
    attack->add_option("--iterations", attack_flags.iterations, "Optimizer iterations");
    attack->add_option("--mutation", attack_flags.mutation, "DE mutation rate");
    attack->add_option("--crossover", attack_flags.crossover, "DE crossover rate");
    attack->add_option("--sigma0", attack_flags.sigma0, "CMA-ES initial step size");
    attack->add_option("--color-limit", attack_flags.color_limit,
                       "Network-domain color bound for DE");
    attack->add_option("--jobs", attack_flags.jobs, "Parallel attacks");
    add_backend_flags(attack, backend);

    auto* defend = app.add_subcommand("defend", "Evaluate a defense on a finished run");
    defend->add_option("--run", run_dir, "Attack run directory")->required();
    defend->add_option("--defense", defense_name, "clip|median|jpeg");
    defend->add_option("--quality", quality, "JPEG quality factor");
    defend->add_option("--images", images_dir, "Benign dataset for the clean-accuracy drop");
    defend->add_option("--out", out_dir, "Output directory");
    add_backend_flags(defend, backend);

    auto* report = app.add_subcommand("report", "Re-aggregate a results.jsonl");
    report->add_option("--run", run_dir, "Attack run directory")->required();
    report->add_flag("--matrix", matrix, "Also print the source-target query matrix");
    report->add_option("--classes", classes, "Class count for the matrix");

    auto* predict = app.add_subcommand("predict", "Probe the classifier with one image");
    predict->add_option("image", image_path, "Image file (.ppm or .scrt)")->required();
    add_backend_flags(predict, backend);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (attack->parsed()) return cmd_attack(attack_flags, backend, images_dir, out_dir);
        if (defend->parsed())
            return cmd_defend(run_dir, defense_name, quality, backend, images_dir, out_dir);
        if (report->parsed()) return cmd_report(run_dir, matrix, classes);
        if (predict->parsed()) return cmd_predict(backend, image_path);
    } catch (const scratch::TransportError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const scratch::MalformedResponse& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
