#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace etdpc::evalrep {

using nlohmann::json;

namespace {

std::string two_dec(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
    json cats = json::array();
    for (const auto& c : report.categories)
        cats.push_back({{"name", c.name},
                        {"precision", c.precision},
                        {"recall", c.recall},
                        {"f1", c.f1},
                        {"support", c.support},
                        {"predicted", c.predicted}});
    return json{{"categories", cats},
                {"macro_precision", report.macro_precision},
                {"macro_recall", report.macro_recall},
                {"macro_f1", report.macro_f1},
                {"accuracy", report.accuracy},
                {"confusion", report.confusion},
                {"total", report.total},
                {"test_set_hash", report.test_set_hash},
                {"flags", report.flags}};
}

MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    for (const auto& c : j.at("categories")) {
        CategoryMetrics m;
        m.name = c.at("name").get<std::string>();
        m.precision = c.at("precision").get<double>();
        m.recall = c.at("recall").get<double>();
        m.f1 = c.at("f1").get<double>();
        m.support = c.at("support").get<int64_t>();
        m.predicted = c.at("predicted").get<int64_t>();
        r.categories.push_back(std::move(m));
    }
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<int64_t>>>();
    r.total = j.at("total").get<int64_t>();
    r.test_set_hash = j.at("test_set_hash").get<std::string>();
    r.flags = j.at("flags").get<std::vector<std::string>>();
    return r;
}

json history_to_json(const train::TrainHistory& h) {
    return json{{"train_loss", h.train_loss},
                {"val_loss", h.val_loss},
                {"val_macro_f1", h.val_macro_f1},
                {"best_epoch", h.best_epoch},
                {"stop_reason", h.stop_reason}};
}

std::string case_comparison_csv(const NamedReports& cases) {
    if (cases.empty()) throw ConfigError("case comparison needs at least one report");
    std::ostringstream out;
    out << "Category";
    for (const auto& [name, _] : cases) out << ",P_" << name << ",R_" << name << ",F1_" << name;
    out << "\n";
    const size_t rows = cases.front().second->categories.size();
    for (size_t r = 0; r < rows; ++r) {
        out << cases.front().second->categories[r].name;
        for (const auto& [_, rep] : cases) {
            const auto& c = rep->categories.at(r);
            out << ',' << c.precision << ',' << c.recall << ',' << c.f1;
        }
        out << "\n";
    }
    out << "macro";
    for (const auto& [_, rep] : cases)
        out << ',' << rep->macro_precision << ',' << rep->macro_recall << ',' << rep->macro_f1;
    out << "\n";
    return out.str();
}

std::string case_comparison_markdown(const NamedReports& cases, const json* reference) {
    if (cases.empty()) throw ConfigError("case comparison needs at least one report");
    const json* per_cat = nullptr;
    if (reference && reference->contains("per_category")) per_cat = &reference->at("per_category");

    std::ostringstream out;
    out << "| Category |";
    for (const auto& [name, _] : cases) {
        out << " P_" << name << " | R_" << name << " | F1_" << name << " |";
        if (per_cat) out << " F1_" << name << " (ref) |";
    }
    out << "\n|---|";
    for (const auto& [name, _] : cases) {
        out << "---|---|---|";
        if (per_cat) out << "---|";
    }
    out << "\n";
    const size_t rows = cases.front().second->categories.size();
    for (size_t r = 0; r < rows; ++r) {
        const std::string& cat = cases.front().second->categories[r].name;
        out << "| " << cat << " |";
        for (const auto& [name, rep] : cases) {
            const auto& c = rep->categories.at(r);
            out << ' ' << two_dec(c.precision) << " | " << two_dec(c.recall) << " | " << two_dec(c.f1)
                << " |";
            if (per_cat) {
                std::string ref = "-";
                if (per_cat->contains(cat) && per_cat->at(cat).contains(name))
                    ref = two_dec(per_cat->at(cat).at(name).at("f1").get<double>());
                out << ' ' << ref << " |";
            }
        }
        out << "\n";
    }
    out << "| macro |";
    for (const auto& [name, rep] : cases) {
        out << ' ' << two_dec(rep->macro_precision) << " | " << two_dec(rep->macro_recall) << " | "
            << two_dec(rep->macro_f1) << " |";
        if (per_cat) {
            std::string ref = "-";
            if (per_cat->contains("macro") && per_cat->at("macro").contains(name))
                ref = two_dec(per_cat->at("macro").at(name).at("f1").get<double>());
            out << ' ' << ref << " |";
        }
    }
    out << "\n";
    return out.str();
}

std::string baseline_comparison_markdown(const std::string& run_name, double accuracy,
                                         double macro_f1, const json* reference) {
    std::ostringstream out;
    out << "| Model | Accuracy | macro F1 |\n|---|---|---|\n";
    if (reference && reference->contains("baselines")) {
        for (const auto& row : reference->at("baselines")) {
            out << "| " << row.at("model").get<std::string>() << " | "
                << two_dec(row.at("accuracy").get<double>()) << " | ";
            if (row.contains("macro_f1") && !row.at("macro_f1").is_null())
                out << two_dec(row.at("macro_f1").get<double>());
            else
                out << "-";
            out << " |\n";
        }
    }
    out << "| " << run_name << " | " << two_dec(accuracy) << " | " << two_dec(macro_f1) << " |\n";
    return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
    std::ostringstream out;
    out << "fraction";
    for (const auto& c : sweep.categories) out << ',' << c;
    out << "\n";
    for (size_t fi = 0; fi < sweep.fractions.size(); ++fi) {
        out << sweep.fractions[fi];
        for (size_t ci = 0; ci < sweep.categories.size(); ++ci) {
            const auto& cell = sweep.cells.at(fi * sweep.categories.size() + ci);
            out << ',';
            if (!cell.skipped) out << cell.f1;
        }
        out << "\n";
    }
    return out.str();
}

json sweep_to_json(const SweepResult& sweep) {
    json cells = json::array();
    for (const auto& c : sweep.cells)
        cells.push_back({{"category", c.category},
                         {"fraction", c.fraction},
                         {"f1", c.f1},
                         {"pool_size", c.pool_size},
                         {"train_seed", c.train_seed},
                         {"skipped", c.skipped}});
    return json{{"fractions", sweep.fractions},
                {"categories", sweep.categories},
                {"cells", cells},
                {"full_macro_f1", sweep.full_macro_f1}};
}

json ablation_to_json(const AblationResult& ablation) {
    json variants = json::array();
    for (const auto& v : ablation.variants)
        variants.push_back({{"name", v.name},
                            {"report", report_to_json(v.report)},
                            {"history", history_to_json(v.history)}});
    return json{{"experiment", ablation_name(ablation.experiment)}, {"variants", variants}};
}

std::string ablation_markdown(const AblationResult& ablation) {
    NamedReports reports;
    for (const auto& v : ablation.variants) reports.push_back({v.name, &v.report});
    return case_comparison_markdown(reports);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("short write on file: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open JSON file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace etdpc::evalrep
