#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "metrics.hpp"

namespace etdpc::train {

using corpus::PageRecord;
using corpus::Provenance;
using corpus::Taxonomy;
using model::Bundle;

const char* train_target_name(TrainTarget t) {
    switch (t) {
        case TrainTarget::kOneLevel: return "one_level";
        case TrainTarget::kLevel1: return "level1";
        case TrainTarget::kLevel2: return "level2";
    }
    return "one_level";
}

TrainTarget train_target_from(const std::string& name) {
    if (name == "one_level") return TrainTarget::kOneLevel;
    if (name == "level1") return TrainTarget::kLevel1;
    if (name == "level2") return TrainTarget::kLevel2;
    throw ConfigError("unknown train target: '" + name + "'");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("early-stop patience must be >= 1");
    if (learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
    if (focal_gamma < 0.0) throw ConfigError("focal gamma must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
    if (clip_value <= 0.0) throw ConfigError("clip value must be > 0");
}

std::vector<std::vector<const PageRecord*>> make_batches(const std::vector<const PageRecord*>& records,
                                                         int64_t batch_size, uint64_t seed,
                                                         int64_t epoch, SplitKind kind) {
    if (records.empty()) throw ConfigError("make_batches: empty record set");
    if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
    if (kind != SplitKind::kTrain) {
        for (const PageRecord* r : records)
            if (r->provenance == Provenance::kAugmented)
                throw DataError("augmented record " + r->key() +
                                " found outside the train split (provenance guard)");
    }
    std::vector<const PageRecord*> order = records;
    Rng rng(derive_seed(seed, "batches", static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<const PageRecord*>> batches;
    for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(order.size(), i + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(i),
                             order.begin() + static_cast<ptrdiff_t>(end));
    }
    return batches;
}

int bundle_class_of(const Bundle& bundle, const PageRecord& rec) {
    const Taxonomy& tax = Taxonomy::standard();
    if (bundle.class_labels == model::level1_class_labels())
        return rec.label == tax.chapters_index() ? 0 : 1;
    const std::string& name = tax.label(rec.label);
    for (size_t i = 0; i < bundle.class_labels.size(); ++i)
        if (bundle.class_labels[i] == name) return static_cast<int>(i);
    throw DataError("record " + rec.key() + " labeled '" + name +
                    "' is outside this classifier's class set");
}

namespace {

struct EvalPass {
    double loss = 0.0;
    double macro_f1 = 0.0;
};

model::Batch labeled_batch(const std::vector<const PageRecord*>& pages, Bundle& bundle) {
    model::Batch batch = model::make_batch(pages, bundle);
    batch.labels.reserve(pages.size());
    for (const PageRecord* r : pages)
        batch.labels.push_back(bundle_class_of(bundle, *r));
    return batch;
}

EvalPass evaluate_pass(Bundle& bundle, const std::vector<const PageRecord*>& records,
                       const TrainConfig& cfg) {
    EvalPass out;
    std::vector<int> truth, pred;
    double weighted = 0.0;
    const auto batches =
        make_batches(records, cfg.batch_size, derive_seed(cfg.seed, "val-order"), 0, SplitKind::kVal);
    for (const auto& pages : batches) {
        model::Batch batch = labeled_batch(pages, bundle);
        nn::Tape tape;
        const int logits = model::forward_logits(tape, bundle, batch, model::ForwardMode{});
        const int loss = tape.focal_loss(logits, batch.labels, cfg.focal_gamma);
        weighted += tape.val(loss)[0] * static_cast<double>(batch.size);
        const nn::Tensor& lv = tape.val(logits);
        for (int64_t i = 0; i < batch.size; ++i) {
            const double* row = lv.data() + i * bundle.config.class_count;
            int best = 0;
            for (int64_t j = 1; j < bundle.config.class_count; ++j)
                if (row[j] > row[best]) best = static_cast<int>(j);
            pred.push_back(best);
            truth.push_back(batch.labels[static_cast<size_t>(i)]);
        }
    }
    out.loss = weighted / static_cast<double>(records.size());
    out.macro_f1 = evalrep::compute_metrics(truth, pred, bundle.class_labels).macro_f1;
    return out;
}

std::vector<nn::Tensor> snapshot_params(const nn::ParamStore& ps) {
    std::vector<nn::Tensor> snap;
    snap.reserve(ps.size());
    for (const auto& e : ps.entries()) snap.push_back(e.value);
    return snap;
}

void restore_params(nn::ParamStore& ps, const std::vector<nn::Tensor>& snap) {
    for (size_t i = 0; i < ps.size(); ++i) ps.entries()[i].value = snap[i];
}

}  // namespace

TrainResult train_model(Bundle bundle, const std::vector<const PageRecord*>& train_set,
                        const std::vector<const PageRecord*>& val_set, const TrainConfig& cfg,
                        const std::string& checkpoint_path) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (val_set.empty()) throw ConfigError("validation set is empty");
    bundle.config.dropout = cfg.dropout;

    nn::Adam adam(bundle.params, cfg.adam());
    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<nn::Tensor> best_snapshot = snapshot_params(bundle.params);
    int64_t epochs_without_improvement = 0;

    for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto batches = make_batches(train_set, cfg.batch_size, cfg.seed, epoch, SplitKind::kTrain);
        double weighted_loss = 0.0;
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            model::Batch batch = labeled_batch(batches[bi], bundle);
            Rng dropout_rng(
                derive_seed(cfg.seed, "dropout", static_cast<uint64_t>(epoch) * 1000003ULL + bi));
            nn::Tape tape;
            const int logits = model::forward_logits(
                tape, bundle, batch, model::ForwardMode{/*training=*/true, &dropout_rng});
            const int loss = tape.focal_loss(logits, batch.labels, cfg.focal_gamma);
            const double loss_value = tape.val(loss)[0];
            if (!std::isfinite(loss_value))
                throw InternalError("non-finite training loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(bi));
            weighted_loss += loss_value * static_cast<double>(batch.size);
            bundle.params.zero_grad();
            tape.backward(loss);
            adam.step(bundle.params);
        }
        history.train_loss.push_back(weighted_loss / static_cast<double>(train_set.size()));

        const EvalPass val = evaluate_pass(bundle, val_set, cfg);
        if (!std::isfinite(val.loss))
            throw InternalError("non-finite validation loss at epoch " + std::to_string(epoch));
        history.val_loss.push_back(val.loss);
        history.val_macro_f1.push_back(val.macro_f1);

        if (val.loss < best_val) {
            best_val = val.loss;
            history.best_epoch = epoch;
            best_snapshot = snapshot_params(bundle.params);
            epochs_without_improvement = 0;
            if (!checkpoint_path.empty()) model::save_bundle(checkpoint_path, bundle, &adam);
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= cfg.patience) {
                history.stop_reason = "early_stop(no validation improvement for " +
                                      std::to_string(cfg.patience) + " epochs)";
                break;
            }
        }
    }
    if (history.stop_reason.empty()) history.stop_reason = "max_epochs";

    restore_params(bundle.params, best_snapshot);
    return TrainResult{std::move(bundle), std::move(history), std::move(adam)};
}

std::vector<const PageRecord*> assemble_level2_pool(const std::vector<const PageRecord*>& pool,
                                                    bool include_augmented) {
    const int chapters = Taxonomy::standard().chapters_index();
    std::vector<const PageRecord*> out;
    for (const PageRecord* r : pool) {
        if (r->label == chapters) continue;
        if (r->provenance == Provenance::kAugmented && !include_augmented) continue;
        out.push_back(r);
    }
    return out;
}

HierarchicalResult train_hierarchical(const std::vector<const PageRecord*>& train_set,
                                      const std::vector<const PageRecord*>& val_set,
                                      const model::ModelConfig& base_config,
                                      const corpus::Vocabulary& vocab, const TrainConfig& level1_cfg,
                                      const TrainConfig& level2_cfg, const std::string& checkpoint_dir) {
    namespace fs = std::filesystem;
    const Taxonomy& tax = Taxonomy::standard();

    // Level 1: every original page, relabeled chapter / non-chapter.
    std::vector<const PageRecord*> l1_train;
    for (const PageRecord* r : train_set)
        if (r->provenance == Provenance::kOriginal) l1_train.push_back(r);
    std::vector<const PageRecord*> l1_val;
    for (const PageRecord* r : val_set)
        if (r->provenance == Provenance::kOriginal) l1_val.push_back(r);

    model::ModelConfig cfg1 = base_config;
    cfg1.class_count = 2;
    Bundle level1 = model::make_bundle(cfg1, vocab, model::level1_class_labels(),
                                       derive_seed(level1_cfg.seed, "level1-init"));
    const std::string ck1 =
        checkpoint_dir.empty() ? "" : (fs::path(checkpoint_dir) / "level1.etdpc").string();
    TrainResult r1 = train_model(std::move(level1), l1_train, l1_val, level1_cfg, ck1);

    // Level 2: non-chapter pages; augmented records join the train pool only.
    std::vector<const PageRecord*> l2_train = assemble_level2_pool(train_set, /*include_augmented=*/true);
    std::vector<const PageRecord*> l2_val;
    for (const PageRecord* r : val_set)
        if (r->provenance == Provenance::kOriginal && r->label != tax.chapters_index())
            l2_val.push_back(r);

    model::ModelConfig cfg2 = base_config;
    cfg2.class_count = Taxonomy::kCategoryCount - 1;
    Bundle level2 = model::make_bundle(cfg2, vocab, tax.non_chapter_labels(),
                                       derive_seed(level2_cfg.seed, "level2-init"));
    const std::string ck2 =
        checkpoint_dir.empty() ? "" : (fs::path(checkpoint_dir) / "level2.etdpc").string();
    TrainResult r2 = train_model(std::move(level2), l2_train, l2_val, level2_cfg, ck2);

    HierarchicalResult out{
        model::HierarchicalClassifier{std::move(r1.bundle), std::move(r2.bundle)},
        std::move(r1.history), std::move(r2.history)};
    out.classifier.validate();
    return out;
}

}  // namespace etdpc::train
