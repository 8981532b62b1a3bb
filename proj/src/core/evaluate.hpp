#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace etdpc::evalrep {

enum class EvalCase { kA, kB, kC };

const char* eval_case_name(EvalCase c);
EvalCase eval_case_from(const std::string& name);

struct EvalOutcome {
    MetricsReport report;             // 13 taxonomy rows for every case
    int64_t routing_violations = 0;   // hierarchical cases: label==Chapters XOR level-1 says chapter
    std::string test_set_hash;
    std::vector<int> true_labels;     // taxonomy indices, test order
    std::vector<int> predicted_labels;
};

// Order-independent hash of the evaluation set; pins "same test set" across
// cases within a run.
std::string test_set_hash(const std::vector<const corpus::PageRecord*>& test_set);

// Case a: the one-level 13-way bundle. Augmented records in the test set are
// a hard error.
EvalOutcome evaluate_one_level(model::Bundle& bundle,
                               const std::vector<const corpus::PageRecord*>& test_set);

// Cases b/c: hierarchical routing; the routing audit runs on every page.
EvalOutcome evaluate_hierarchical(model::HierarchicalClassifier& clf,
                                  const std::vector<const corpus::PageRecord*>& test_set);

enum class AblationExperiment { kTextEncoderSwap, kModality };

const char* ablation_name(AblationExperiment e);
AblationExperiment ablation_from(const std::string& name);

struct AblationVariant {
    std::string name;
    MetricsReport report;
    train::TrainHistory history;
};

struct AblationResult {
    AblationExperiment experiment;
    std::vector<AblationVariant> variants;
};

// TEXT_ENCODER_SWAP trains multi-head vs talking-heads one-level models;
// MODALITY trains image-only, text-only and full multimodal one-level models.
// All variants share data, seeds and budget.
AblationResult run_ablation(AblationExperiment experiment,
                            const std::vector<const corpus::PageRecord*>& train_set,
                            const std::vector<const corpus::PageRecord*>& val_set,
                            const std::vector<const corpus::PageRecord*>& test_set,
                            const model::ModelConfig& base_config, const corpus::Vocabulary& vocab,
                            const train::TrainConfig& tcfg);

struct SweepCell {
    std::string category;
    double fraction = 0.0;
    double f1 = 0.0;
    int64_t pool_size = 0;   // subsampled train pool for this category
    uint64_t train_seed = 0; // derived per fraction; recorded for replay
    bool skipped = false;
};

struct SweepResult {
    std::vector<double> fractions;
    std::vector<std::string> categories;
    std::vector<SweepCell> cells;  // fraction-major order
    double full_macro_f1 = 0.0;    // macro-F1 of the fraction-1.0 run
};

// Nested data-efficiency sweep: one seeded permutation per category defines
// the subsets (prefixes, restored to pool order) so the 20% pool is contained
// in the 40% pool and the 1.0 pool equals the unmodified training set. One
// one-level model is retrained from scratch per fraction with a seed derived
// from (master seed, fraction index).
SweepResult data_efficiency_sweep(const std::vector<std::string>& categories,
                                  const std::vector<const corpus::PageRecord*>& train_set,
                                  const std::vector<const corpus::PageRecord*>& val_set,
                                  const std::vector<const corpus::PageRecord*>& test_set,
                                  const model::ModelConfig& base_config,
                                  const corpus::Vocabulary& vocab, const train::TrainConfig& tcfg,
                                  uint64_t master_seed,
                                  const std::vector<double>& fractions = {0.2, 0.4, 0.6, 0.8, 1.0});

// The nested subsample used by the sweep, exposed for its own tests.
std::vector<const corpus::PageRecord*> subsample_categories(
    const std::vector<const corpus::PageRecord*>& train_set, const std::vector<std::string>& categories,
    double fraction, uint64_t master_seed);

}  // namespace etdpc::evalrep
