// Command-line front end. Builds an options JSON from a config file plus flag
// overrides and drives everything through the public C API (etdpc.h).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "etdpc/etdpc.h"

namespace {

using nlohmann::json;

struct CommonOpts {
    std::string config_file;
    std::string manifest, augmented_manifest, dataset_dir, out_dir, checkpoint_dir;
    std::string checkpoint, level1_checkpoint, level2_checkpoint, reference_file;
    int64_t seed = -1;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_file, "run configuration file (JSON)");
    cmd->add_option("--seed", o.seed, "master seed (overrides the config file)");
    cmd->add_option("--jobs", o.jobs, "worker threads");
    cmd->add_option("--out", o.out_dir, "output directory");
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open config file: " << path << "\n";
        std::exit(ETDPC_ERROR_CONFIG);
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::parse_error& e) {
        std::cerr << "error: config file " << path << " is not valid JSON: " << e.what() << "\n";
        std::exit(ETDPC_ERROR_CONFIG);
    }
}

void set_path(json& j, const char* key, const std::string& value) {
    if (!value.empty()) j["paths"][key] = value;
}

json build_options(const CommonOpts& o) {
    json j = load_config(o.config_file);
    set_path(j, "manifest", o.manifest);
    set_path(j, "augmented_manifest", o.augmented_manifest);
    set_path(j, "dataset_dir", o.dataset_dir);
    set_path(j, "out_dir", o.out_dir);
    set_path(j, "checkpoint_dir", o.checkpoint_dir);
    set_path(j, "checkpoint", o.checkpoint);
    set_path(j, "level1_checkpoint", o.level1_checkpoint);
    set_path(j, "level2_checkpoint", o.level2_checkpoint);
    set_path(j, "reference_file", o.reference_file);
    if (o.seed >= 0) j["seed"] = static_cast<uint64_t>(o.seed);
    if (o.jobs > 0) j["jobs"] = o.jobs;
    return j;
}

using ApiFn = etdpc_status (*)(const char*, char**);

int run(ApiFn fn, const json& options) {
    char* summary = nullptr;
    const etdpc_status status = fn(options.dump().c_str(), &summary);
    if (status != ETDPC_OK) {
        std::cerr << "error: " << etdpc_last_error() << "\n";
        return static_cast<int>(status);
    }
    if (summary) {
        std::cout << summary << "\n";
        etdpc_string_free(summary);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etdpc — scanned-page classification pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(etdpc_version()));

    CommonOpts o;

    auto* prepare = app.add_subcommand("prepare", "validate records, build vocabulary and splits");
    add_common(prepare, o);
    prepare->add_option("--manifest", o.manifest, "input manifest (JSON lines)");
    int64_t synthetic_pages = 0;
    prepare->add_option("--synthetic", synthetic_pages, "generate a synthetic corpus (pages per category)");

    auto* augment = app.add_subcommand("augment", "generate pseudo pages for minority categories");
    add_common(augment, o);
    augment->add_option("--manifest", o.manifest, "input manifest");
    augment->add_option("--dataset", o.dataset_dir, "prepared dataset directory");
    int64_t floor = 0;
    augment->add_option("--floor", floor, "per-category sample floor (default 1000)");

    auto* train = app.add_subcommand("train", "train case a, b or c");
    add_common(train, o);
    std::string case_sel;
    train->add_option("--case", case_sel, "a | b | c")->required();
    train->add_option("--dataset", o.dataset_dir, "prepared dataset directory");
    train->add_option("--augmented-manifest", o.augmented_manifest, "augmented fragment (case c)");

    auto* eval = app.add_subcommand("eval", "evaluate a trained case on the test split");
    add_common(eval, o);
    eval->add_option("--case", case_sel, "a | b | c")->required();
    eval->add_option("--dataset", o.dataset_dir, "prepared dataset directory");
    eval->add_option("--checkpoints", o.checkpoint_dir, "checkpoint directory");
    eval->add_option("--checkpoint", o.checkpoint, "one-level checkpoint (case a)");
    eval->add_option("--level1", o.level1_checkpoint, "level-1 checkpoint");
    eval->add_option("--level2", o.level2_checkpoint, "level-2 checkpoint");
    eval->add_option("--reference", o.reference_file, "published scores for comparison display");

    auto* ablate = app.add_subcommand("ablate", "encoder or modality ablation");
    add_common(ablate, o);
    std::string experiment;
    ablate->add_option("--experiment", experiment, "encoder | modality")->required();
    ablate->add_option("--dataset", o.dataset_dir, "prepared dataset directory");

    auto* sweep = app.add_subcommand("sweep", "data-efficiency sweep over minority categories");
    add_common(sweep, o);
    std::string categories;
    sweep->add_option("--categories", categories, "comma-separated category list");
    sweep->add_option("--dataset", o.dataset_dir, "prepared dataset directory");

    auto* predict = app.add_subcommand("predict", "classify pages from a manifest");
    add_common(predict, o);
    predict->add_option("--manifest", o.manifest, "pages to classify")->required();
    predict->add_option("--checkpoint", o.checkpoint, "one-level checkpoint");
    predict->add_option("--level1", o.level1_checkpoint, "level-1 checkpoint");
    predict->add_option("--level2", o.level2_checkpoint, "level-2 checkpoint");

    auto* e2e = app.add_subcommand("end-to-end", "prepare + augment + train + eval for cases a/b/c");
    add_common(e2e, o);
    std::string cases;
    e2e->add_option("--cases", cases, "comma-separated case list (default a,b,c)");
    e2e->add_option("--manifest", o.manifest, "input manifest");
    e2e->add_option("--reference", o.reference_file, "published scores for comparison display");

    CLI11_PARSE(app, argc, argv);

    json options = build_options(o);
    if (!case_sel.empty()) options["case"] = case_sel;
    if (!experiment.empty()) options["ablation"]["experiment"] = experiment;
    if (floor > 0) options["augment"]["floor"] = floor;
    if (prepare->parsed() && synthetic_pages > 0)
        options["synthetic"]["pages_per_category"] = synthetic_pages;
    auto split_csv = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    };
    if (!categories.empty()) options["sweep"]["categories"] = split_csv(categories);
    if (!cases.empty()) options["cases"] = split_csv(cases);

    if (prepare->parsed()) return run(&etdpc_prepare, options);
    if (augment->parsed()) return run(&etdpc_augment, options);
    if (train->parsed()) return run(&etdpc_train, options);
    if (eval->parsed()) return run(&etdpc_evaluate, options);
    if (ablate->parsed()) return run(&etdpc_ablate, options);
    if (sweep->parsed()) return run(&etdpc_sweep, options);
    if (predict->parsed()) return run(&etdpc_predict, options);
    if (e2e->parsed()) return run(&etdpc_end_to_end, options);
    return ETDPC_ERROR_CONFIG;
}
