#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "augmentor.hpp"
#include "evaluate.hpp"
#include "model.hpp"
#include "split.hpp"
#include "synthetic.hpp"
#include "trainer.hpp"

namespace etdpc::pipeline {

// One structured run description: paths + seeds + per-module sections.
// Parsed strictly (unknown keys are rejected). The ETDPC_SEED environment
// variable overrides the master seed.
struct RunConfig {
    // paths
    std::string manifest;
    std::string augmented_manifest;
    std::string dataset_dir;
    std::string out_dir;
    std::string checkpoint_dir;  // defaults to out_dir
    std::string checkpoint;      // one-level checkpoint (predict/eval case a)
    std::string level1_checkpoint;
    std::string level2_checkpoint;
    std::string reference_file;

    uint64_t seed = 42;
    int jobs = 4;
    std::string eval_case = "a";
    std::vector<std::string> cases;  // end-to-end; defaults to {"a","b","c"}

    bool use_synthetic = false;
    corpus::SyntheticCorpusSpec synthetic;
    corpus::SplitSpec split;
    model::ModelConfig model;
    train::TrainConfig train;
    augment::NoiseParams noise;
    augment::RenderSpec render;

    int64_t max_vocab = 4000;
    int64_t augment_floor = 1000;
    std::vector<std::string> sweep_categories{"Abstract", "Dedication", "ListofFigures",
                                              "ListofTables", "TitlePage"};
    std::vector<double> sweep_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
    std::string ablation_experiment = "modality";
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_string(const std::string& options_json);

// A prepared dataset directory: records.jsonl + pages/ + ocr/ + vocab.json +
// splits.json + dataset.json.
struct Dataset {
    std::vector<corpus::PageRecord> records;
    corpus::Vocabulary vocab;
    corpus::SplitResult split;
    uint64_t split_hash_value = 0;
    std::string dir;

    std::vector<const corpus::PageRecord*> part(train::SplitKind kind) const;
};

Dataset load_dataset(const std::string& dir);

// Commands. Each returns a machine-readable summary.
nlohmann::json cmd_prepare(const RunConfig& cfg);
nlohmann::json cmd_augment(const RunConfig& cfg);
nlohmann::json cmd_train(const RunConfig& cfg);
nlohmann::json cmd_evaluate(const RunConfig& cfg);
nlohmann::json cmd_ablate(const RunConfig& cfg);
nlohmann::json cmd_sweep(const RunConfig& cfg);
nlohmann::json cmd_predict(const RunConfig& cfg);
nlohmann::json cmd_end_to_end(const RunConfig& cfg);

}  // namespace etdpc::pipeline
