#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace etdpc::train {

enum class TrainTarget { kOneLevel, kLevel1, kLevel2 };
enum class SplitKind { kTrain, kVal, kTest };

const char* train_target_name(TrainTarget t);
TrainTarget train_target_from(const std::string& name);

struct TrainConfig {
    int64_t batch_size = 32;
    int64_t max_epochs = 40;
    double learning_rate = 0.001;
    double weight_decay = 0.004;
    double epsilon = 1e-7;
    double clip_value = 2.0;
    double dropout = 0.8;
    double focal_gamma = 2.0;
    int64_t patience = 5;
    uint64_t seed = 0;
    TrainTarget target = TrainTarget::kOneLevel;

    void validate() const;
    nn::AdamConfig adam() const {
        return {learning_rate, weight_decay, epsilon, clip_value, 0.9, 0.999};
    }
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_macro_f1;
    int64_t best_epoch = -1;  // 1-based
    std::string stop_reason;
};

// Epoch-seeded shuffled batches; the short final batch is kept. AUGMENTED
// records are rejected outside the TRAIN split (provenance guard).
std::vector<std::vector<const corpus::PageRecord*>> make_batches(
    const std::vector<const corpus::PageRecord*>& records, int64_t batch_size, uint64_t seed,
    int64_t epoch, SplitKind kind);

// Maps a record's taxonomy label onto the bundle's class index; throws
// DataError when the record's category is outside the bundle's class set.
int bundle_class_of(const model::Bundle& bundle, const corpus::PageRecord& rec);

struct TrainResult {
    model::Bundle bundle;  // weights of the best (minimum validation loss) epoch
    TrainHistory history;
    nn::Adam optimizer;    // state as of the final trained epoch, for resuming
};

// Focal-loss training with Adam, early stopping on validation loss, and
// best-epoch weight restoration. Optionally writes the best checkpoint to
// `checkpoint_path` whenever it improves.
TrainResult train_model(model::Bundle bundle, const std::vector<const corpus::PageRecord*>& train_set,
                        const std::vector<const corpus::PageRecord*>& val_set, const TrainConfig& cfg,
                        const std::string& checkpoint_path = "");

struct HierarchicalResult {
    model::HierarchicalClassifier classifier;
    TrainHistory level1_history;
    TrainHistory level2_history;
};

// Level 1 trains on all original pages relabeled {Chapters, NonChapters};
// level 2 on non-chapter pages. Augmented records (case c) join the level-2
// train pool only.
HierarchicalResult train_hierarchical(const std::vector<const corpus::PageRecord*>& train_set,
                                      const std::vector<const corpus::PageRecord*>& val_set,
                                      const model::ModelConfig& base_config,
                                      const corpus::Vocabulary& vocab, const TrainConfig& level1_cfg,
                                      const TrainConfig& level2_cfg,
                                      const std::string& checkpoint_dir = "");

// Level-2 pool assembly, exposed for data-volume checks: non-chapter pages,
// originals always, augmented only when include_augmented is set.
std::vector<const corpus::PageRecord*> assemble_level2_pool(
    const std::vector<const corpus::PageRecord*>& pool, bool include_augmented);

}  // namespace etdpc::train
