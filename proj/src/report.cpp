#include "scratch/report.hpp"

#include "scratch/defense.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace scratch {
namespace {

using nlohmann::json;

std::string format_percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v);
    return buf;
}

std::string format_queries(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

std::string record_to_jsonl(const AttackRecord& record) {
    const auto& r = record.result;
    json j;
    j["config_index"] = record.config_index;
    j["image_index"] = record.image_index;
    j["restart"] = record.restart;
    j["name"] = record.name;
    j["success"] = r.success;
    j["queries"] = r.queries;
    j["coverage"] = r.coverage;
    j["source"] = r.source;
    j["target"] = r.target;
    j["prediction"] = r.final_prediction;
    if (r.final_caption) j["caption"] = *r.final_caption;
    j["params"] = std::vector<double>(r.final_params.data(),
                                      r.final_params.data() + r.final_params.size());
    j["trace"] = r.trace;
    j["image"] = {{"shape", {r.final_image.height, r.final_image.width, 3}},
                  {"pixels", [&] {
                       Vector flat = r.final_image.flatten();
                       return std::vector<double>(flat.data(), flat.data() + flat.size());
                   }()}};
    return j.dump();
}

AttackRecord record_from_jsonl(const std::string& line) {
    json j = json::parse(line);
    AttackRecord rec;
    rec.config_index = j.value("config_index", 0);
    rec.image_index = j.at("image_index").get<int>();
    rec.restart = j.at("restart").get<int>();
    rec.name = j.at("name").get<std::string>();
    auto& r = rec.result;
    r.success = j.at("success").get<bool>();
    r.queries = j.at("queries").get<std::int64_t>();
    r.coverage = j.at("coverage").get<double>();
    r.source = j.at("source").get<int>();
    r.target = j.at("target").get<int>();
    r.final_prediction = j.at("prediction").get<int>();
    if (j.contains("caption")) r.final_caption = j["caption"].get<std::string>();
    auto params = j.at("params").get<std::vector<double>>();
    r.final_params = Eigen::Map<const Vector>(params.data(), params.size());
    r.trace = j.at("trace").get<std::vector<double>>();
    auto shape = j.at("image").at("shape").get<std::vector<Index>>();
    auto pixels = j.at("image").at("pixels").get<std::vector<double>>();
    r.final_image = Image::from_flat(shape.at(0), shape.at(1),
                                     Eigen::Map<const Vector>(pixels.data(), pixels.size()));
    return rec;
}

std::string report_csv(const ReportTable& table) {
    std::ostringstream out;
    out << "Scratches,Success Rate,Queries,Coverage\n";
    for (const auto& row : table.rows) {
        out << row.scratches << ',' << format_percent(row.success_rate) << ',';
        if (row.successes > 0)
            out << format_queries(row.mean_queries) << ',' << format_percent(row.mean_coverage);
        else if (row.eligible == 0)
            out << "no eligible images,";
        else
            out << ',';
        out << '\n';
    }
    return out.str();
}

std::string matrix_csv(const SourceTargetMatrix& m, const std::vector<std::string>& labels) {
    auto label = [&](int i) {
        return i < static_cast<int>(labels.size()) ? labels[i] : "class_" + std::to_string(i);
    };
    auto cell = [](double v) { return std::isnan(v) ? std::string() : format_queries(v); };

    std::ostringstream out;
    out << "Source\\Target";
    for (int t = 0; t < m.classes; ++t) out << ',' << label(t);
    out << ",Mean\n";
    for (int s = 0; s < m.classes; ++s) {
        out << label(s);
        for (int t = 0; t < m.classes; ++t) out << ',' << cell(m.mean_queries(s, t));
        out << ',' << cell(m.row_means[s]) << '\n';
    }
    out << "Mean";
    for (int t = 0; t < m.classes; ++t) out << ',' << cell(m.col_means[t]);
    out << ",\n";
    return out.str();
}

std::string recovery_csv(const RecoveryReport& report) {
    std::ostringstream out;
    out << "Method,Recovery Rate,Network Domain,Image Domain\n";
    out << report.defense.name() << ',' << format_percent(report.recovery_rate) << ','
        << (report.network_domain_count > 0 ? format_percent(report.network_domain_rate)
                                            : std::string())
        << ','
        << (report.image_domain_count > 0 ? format_percent(report.image_domain_rate)
                                          : std::string())
        << '\n';
    return out.str();
}

std::string recovery_log_jsonl(const RecoveryReport& report) {
    std::ostringstream out;
    for (const auto& rec : report.per_image) {
        json j;
        j["index"] = rec.index;
        j["original_label"] = rec.original_label;
        j["pre_defense_prediction"] = rec.pre_defense_prediction;
        j["post_defense_prediction"] = rec.post_defense_prediction;
        j["image_domain"] = rec.image_domain;
        j["recovered"] = rec.recovered;
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace scratch
