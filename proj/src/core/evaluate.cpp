#include "evaluate.hpp"

#include <algorithm>
#include <cmath>

namespace etdpc::evalrep {

using corpus::PageRecord;
using corpus::Provenance;
using corpus::Taxonomy;
using model::Bundle;

namespace {

constexpr int64_t kEvalBatch = 32;

void reject_augmented(const std::vector<const PageRecord*>& test_set) {
    for (const PageRecord* r : test_set)
        if (r->provenance == Provenance::kAugmented)
            throw DataError("augmented record " + r->key() + " found in the evaluation set");
}

}  // namespace

const char* eval_case_name(EvalCase c) {
    switch (c) {
        case EvalCase::kA: return "a";
        case EvalCase::kB: return "b";
        case EvalCase::kC: return "c";
    }
    return "a";
}

EvalCase eval_case_from(const std::string& name) {
    if (name == "a") return EvalCase::kA;
    if (name == "b") return EvalCase::kB;
    if (name == "c") return EvalCase::kC;
    throw ConfigError("unknown evaluation case: '" + name + "' (expected a, b or c)");
}

std::string test_set_hash(const std::vector<const PageRecord*>& test_set) {
    std::vector<std::string> keys;
    keys.reserve(test_set.size());
    for (const PageRecord* r : test_set) keys.push_back(r->key());
    std::sort(keys.begin(), keys.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& k : keys) h = fnv1a64(k + ";", h);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EvalOutcome evaluate_one_level(Bundle& bundle, const std::vector<const PageRecord*>& test_set) {
    reject_augmented(test_set);
    if (bundle.config.class_count != Taxonomy::kCategoryCount)
        throw ConfigError("case-a evaluation requires the 13-way one-level bundle");
    const Taxonomy& tax = Taxonomy::standard();

    EvalOutcome out;
    out.test_set_hash = test_set_hash(test_set);
    for (size_t i = 0; i < test_set.size(); i += kEvalBatch) {
        const size_t end = std::min(test_set.size(), i + kEvalBatch);
        std::vector<const PageRecord*> chunk(test_set.begin() + static_cast<ptrdiff_t>(i),
                                             test_set.begin() + static_cast<ptrdiff_t>(end));
        const model::Batch batch = model::make_batch(chunk, bundle);
        const nn::Tensor probs = model::predict_probs(bundle, batch);
        for (int64_t r = 0; r < batch.size; ++r) {
            const double* row = probs.data() + r * bundle.config.class_count;
            int best = 0;
            for (int64_t j = 1; j < bundle.config.class_count; ++j)
                if (row[j] > row[best]) best = static_cast<int>(j);
            out.predicted_labels.push_back(tax.index_of(bundle.class_labels[static_cast<size_t>(best)]));
        }
    }
    for (const PageRecord* r : test_set) out.true_labels.push_back(r->label);
    out.report = compute_metrics(out.true_labels, out.predicted_labels, tax.labels());
    out.report.test_set_hash = out.test_set_hash;
    return out;
}

EvalOutcome evaluate_hierarchical(model::HierarchicalClassifier& clf,
                                  const std::vector<const PageRecord*>& test_set) {
    reject_augmented(test_set);
    const Taxonomy& tax = Taxonomy::standard();

    EvalOutcome out;
    out.test_set_hash = test_set_hash(test_set);
    for (size_t i = 0; i < test_set.size(); i += kEvalBatch) {
        const size_t end = std::min(test_set.size(), i + kEvalBatch);
        std::vector<const PageRecord*> chunk(test_set.begin() + static_cast<ptrdiff_t>(i),
                                             test_set.begin() + static_cast<ptrdiff_t>(end));
        const auto preds = model::hierarchical_predict(clf, chunk);
        for (const auto& p : preds) {
            out.predicted_labels.push_back(p.label);
            const bool says_chapter = p.level1_probs[0] >= p.level1_probs[1];
            if (says_chapter != (p.label == tax.chapters_index())) ++out.routing_violations;
        }
    }
    for (const PageRecord* r : test_set) out.true_labels.push_back(r->label);
    out.report = compute_metrics(out.true_labels, out.predicted_labels, tax.labels());
    out.report.test_set_hash = out.test_set_hash;
    return out;
}

const char* ablation_name(AblationExperiment e) {
    return e == AblationExperiment::kTextEncoderSwap ? "encoder" : "modality";
}

AblationExperiment ablation_from(const std::string& name) {
    if (name == "encoder") return AblationExperiment::kTextEncoderSwap;
    if (name == "modality") return AblationExperiment::kModality;
    throw ConfigError("unknown ablation experiment: '" + name + "' (expected encoder or modality)");
}

namespace {

AblationVariant train_and_score(const std::string& name, const model::ModelConfig& cfg,
                                const corpus::Vocabulary& vocab, const train::TrainConfig& tcfg,
                                const std::vector<const PageRecord*>& train_set,
                                const std::vector<const PageRecord*>& val_set,
                                const std::vector<const PageRecord*>& test_set) {
    Bundle bundle = model::make_bundle(cfg, vocab, Taxonomy::standard().labels(),
                                       derive_seed(tcfg.seed, "ablation-" + name));
    train::TrainResult r = train::train_model(std::move(bundle), train_set, val_set, tcfg);
    EvalOutcome e = evaluate_one_level(r.bundle, test_set);
    return AblationVariant{name, std::move(e.report), std::move(r.history)};
}

}  // namespace

AblationResult run_ablation(AblationExperiment experiment,
                            const std::vector<const PageRecord*>& train_set,
                            const std::vector<const PageRecord*>& val_set,
                            const std::vector<const PageRecord*>& test_set,
                            const model::ModelConfig& base_config, const corpus::Vocabulary& vocab,
                            const train::TrainConfig& tcfg) {
    AblationResult out;
    out.experiment = experiment;
    if (experiment == AblationExperiment::kTextEncoderSwap) {
        model::ModelConfig plain = base_config;
        plain.head_mixing = false;
        model::ModelConfig talking = base_config;
        talking.head_mixing = true;
        out.variants.push_back(
            train_and_score("multi_head", plain, vocab, tcfg, train_set, val_set, test_set));
        out.variants.push_back(
            train_and_score("talking_heads", talking, vocab, tcfg, train_set, val_set, test_set));
    } else {
        for (const model::Modality m :
             {model::Modality::kImageOnly, model::Modality::kTextOnly, model::Modality::kMultimodal}) {
            model::ModelConfig cfg = base_config;
            cfg.modality = m;
            out.variants.push_back(train_and_score(model::modality_name(m), cfg, vocab, tcfg,
                                                   train_set, val_set, test_set));
        }
    }
    return out;
}

std::vector<const PageRecord*> subsample_categories(const std::vector<const PageRecord*>& train_set,
                                                    const std::vector<std::string>& categories,
                                                    double fraction, uint64_t master_seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("sweep fraction must lie in (0,1]");
    const Taxonomy& tax = Taxonomy::standard();
    std::vector<bool> listed(static_cast<size_t>(Taxonomy::kCategoryCount), false);
    for (const auto& name : categories) listed[static_cast<size_t>(tax.index_of(name))] = true;

    // Per category: one seeded permutation; a fraction keeps the prefix,
    // restored to original order so the 1.0 subset is the untouched pool.
    std::vector<bool> keep(train_set.size(), true);
    for (int label = 0; label < Taxonomy::kCategoryCount; ++label) {
        if (!listed[static_cast<size_t>(label)]) continue;
        std::vector<size_t> pool;
        for (size_t i = 0; i < train_set.size(); ++i)
            if (train_set[i]->label == label) pool.push_back(i);
        if (pool.empty()) continue;
        std::vector<size_t> perm(pool.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        Rng rng(derive_seed(master_seed, "sweep-subsample", static_cast<uint64_t>(label)));
        rng.shuffle(perm);
        const size_t take = static_cast<size_t>(
            std::min<double>(static_cast<double>(pool.size()),
                             std::ceil(fraction * static_cast<double>(pool.size()))));
        std::vector<bool> selected(pool.size(), false);
        for (size_t i = 0; i < take; ++i) selected[perm[i]] = true;
        for (size_t i = 0; i < pool.size(); ++i)
            if (!selected[i]) keep[pool[i]] = false;
    }
    std::vector<const PageRecord*> out;
    for (size_t i = 0; i < train_set.size(); ++i)
        if (keep[i]) out.push_back(train_set[i]);
    return out;
}

SweepResult data_efficiency_sweep(const std::vector<std::string>& categories,
                                  const std::vector<const PageRecord*>& train_set,
                                  const std::vector<const PageRecord*>& val_set,
                                  const std::vector<const PageRecord*>& test_set,
                                  const model::ModelConfig& base_config,
                                  const corpus::Vocabulary& vocab, const train::TrainConfig& tcfg,
                                  uint64_t master_seed, const std::vector<double>& fractions) {
    if (categories.empty()) throw ConfigError("sweep needs at least one category");
    const Taxonomy& tax = Taxonomy::standard();
    SweepResult out;
    out.fractions = fractions;
    out.categories = categories;

    for (size_t fi = 0; fi < fractions.size(); ++fi) {
        const double fraction = fractions[fi];
        const auto subset = subsample_categories(train_set, categories, fraction, master_seed);

        std::map<int, int64_t> pool_sizes;
        for (const auto& name : categories) pool_sizes[tax.index_of(name)] = 0;
        for (const PageRecord* r : subset)
            if (pool_sizes.count(r->label)) ++pool_sizes[r->label];

        train::TrainConfig cell_cfg = tcfg;
        cell_cfg.seed = derive_seed(master_seed, "sweep-train", static_cast<uint64_t>(fi));

        Bundle bundle = model::make_bundle(base_config, vocab, tax.labels(),
                                           derive_seed(cell_cfg.seed, "sweep-init"));
        train::TrainResult r = train::train_model(std::move(bundle), subset, val_set, cell_cfg);
        EvalOutcome e = evaluate_one_level(r.bundle, test_set);
        if (fraction == 1.0) out.full_macro_f1 = e.report.macro_f1;
        for (const auto& name : categories) {
            SweepCell cell;
            cell.category = name;
            cell.fraction = fraction;
            cell.pool_size = pool_sizes[tax.index_of(name)];
            cell.train_seed = cell_cfg.seed;
            if (cell.pool_size == 0) {
                cell.skipped = true;  // fraction yields no samples for this category
            } else {
                cell.f1 = e.report.categories[static_cast<size_t>(tax.index_of(name))].f1;
            }
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

}  // namespace etdpc::evalrep
