#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "checkpoint.hpp"
#include "report.hpp"

namespace etdpc::pipeline {

namespace fs = std::filesystem;
using corpus::PageRecord;
using corpus::Provenance;
using corpus::Taxonomy;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + key + "' in " + where);
}

void apply_jobs(int jobs) {
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
#ifdef _OPENMP
    omp_set_num_threads(jobs);
#endif
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory " + path + ": " + ec.message());
    if (!fs::is_directory(path)) throw DataError("not a directory: " + path);
}

// Textract-shaped OCR JSON for generated pages, so the same parser ingests
// real and synthetic data.
json blocks_to_ocr_json(const std::vector<corpus::OcrBlock>& blocks) {
    json arr = json::array();
    for (const auto& b : blocks) {
        arr.push_back({{"BlockType", b.block_type == corpus::BlockType::kLine ? "LINE" : "WORD"},
                       {"Id", b.id},
                       {"Text", b.text},
                       {"Confidence", b.confidence * 100.0},
                       {"Geometry",
                        {{"BoundingBox",
                          {{"Left", b.left}, {"Top", b.top}, {"Width", b.width}, {"Height", b.height}}}}}});
    }
    return json{{"Blocks", arr}};
}

void write_page_files(const std::string& dir, PageRecord& rec) {
    const std::string stem = rec.etd_id + "_" + std::to_string(rec.page_number);
    rec.image_path = "pages/" + stem + ".png";
    rec.ocr_path = "ocr/" + stem + ".json";
    corpus::write_png((fs::path(dir) / rec.image_path).string(), rec.image);
    std::ofstream out((fs::path(dir) / rec.ocr_path).string(), std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write OCR file for " + rec.key());
    out << blocks_to_ocr_json(rec.blocks).dump();
}

corpus::SyntheticCorpusSpec synthetic_from_json(const json& j) {
    corpus::SyntheticCorpusSpec s;
    check_keys(j,
               {"pages_per_category", "image_height", "image_width", "cue_modes",
                "noise_gaussian_sigma", "noise_salt_pepper_p"},
               "synthetic");
    s.pages_per_category = j.value("pages_per_category", s.pages_per_category);
    s.image_height = j.value("image_height", s.image_height);
    s.image_width = j.value("image_width", s.image_width);
    s.noise_gaussian_sigma = j.value("noise_gaussian_sigma", s.noise_gaussian_sigma);
    s.noise_salt_pepper_p = j.value("noise_salt_pepper_p", s.noise_salt_pepper_p);
    if (j.contains("cue_modes"))
        for (const auto& [name, mode] : j.at("cue_modes").items())
            s.cue_modes[name] = corpus::cue_mode_from(mode.get<std::string>());
    return s;
}

corpus::SplitSpec split_from_json(const json& j) {
    corpus::SplitSpec s;
    check_keys(j, {"train_fraction", "val_fraction", "test_fraction", "stratified", "group_by_etd"},
               "split");
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.val_fraction = j.value("val_fraction", s.val_fraction);
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    s.stratified = j.value("stratified", s.stratified);
    s.group_by_etd = j.value("group_by_etd", s.group_by_etd);
    return s;
}

model::ModelConfig model_from_json(const json& j) {
    model::ModelConfig c;
    check_keys(j,
               {"image_height", "image_width", "vision_stages", "pool_grid_h", "pool_grid_w",
                "text_layers", "text_heads", "text_dim", "text_ffn_dim", "seq_len", "head_mixing",
                "projection_dim", "dropout", "cross_attention_dim", "bidirectional_cross_attention",
                "modality"},
               "model");
    c.image_height = j.value("image_height", c.image_height);
    c.image_width = j.value("image_width", c.image_width);
    if (j.contains("vision_stages")) {
        c.vision_stages.clear();
        for (const auto& s : j.at("vision_stages")) {
            check_keys(s, {"channels", "blocks", "stride"}, "model.vision_stages[]");
            c.vision_stages.push_back({s.at("channels").get<int64_t>(), s.value("blocks", int64_t{2}),
                                       s.value("stride", int64_t{1})});
        }
    }
    c.pool_grid_h = j.value("pool_grid_h", c.pool_grid_h);
    c.pool_grid_w = j.value("pool_grid_w", c.pool_grid_w);
    c.text_layers = j.value("text_layers", c.text_layers);
    c.text_heads = j.value("text_heads", c.text_heads);
    c.text_dim = j.value("text_dim", c.text_dim);
    c.text_ffn_dim = j.value("text_ffn_dim", c.text_ffn_dim);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.head_mixing = j.value("head_mixing", c.head_mixing);
    c.projection_dim = j.value("projection_dim", c.projection_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.cross_attention_dim = j.value("cross_attention_dim", c.cross_attention_dim);
    c.bidirectional_cross_attention =
        j.value("bidirectional_cross_attention", c.bidirectional_cross_attention);
    if (j.contains("modality")) c.modality = model::modality_from(j.at("modality").get<std::string>());
    return c;
}

train::TrainConfig train_from_json(const json& j) {
    train::TrainConfig c;
    check_keys(j,
               {"batch_size", "max_epochs", "learning_rate", "weight_decay", "epsilon", "clip_value",
                "dropout", "focal_gamma", "patience"},
               "train");
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.clip_value = j.value("clip_value", c.clip_value);
    c.dropout = j.value("dropout", c.dropout);
    c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
    c.patience = j.value("patience", c.patience);
    return c;
}

augment::NoiseParams noise_from_json(const json& j) {
    augment::NoiseParams n;
    check_keys(j,
               {"gaussian_sigma_min", "gaussian_sigma_max", "salt_pepper_p", "blur_sigma",
                "contrast_alpha"},
               "noise");
    n.gaussian_sigma_min = j.value("gaussian_sigma_min", n.gaussian_sigma_min);
    n.gaussian_sigma_max = j.value("gaussian_sigma_max", n.gaussian_sigma_max);
    n.salt_pepper_p = j.value("salt_pepper_p", n.salt_pepper_p);
    n.blur_sigma = j.value("blur_sigma", n.blur_sigma);
    n.contrast_alpha = j.value("contrast_alpha", n.contrast_alpha);
    return n;
}

augment::RenderSpec render_from_json(const json& j) {
    augment::RenderSpec r;
    check_keys(j,
               {"page_height", "page_width", "font_families", "font_size_min", "font_size_max",
                "margin_jitter", "line_spacing"},
               "render");
    r.page_height = j.value("page_height", r.page_height);
    r.page_width = j.value("page_width", r.page_width);
    if (j.contains("font_families"))
        r.font_families = j.at("font_families").get<std::vector<std::string>>();
    r.font_size_min = j.value("font_size_min", r.font_size_min);
    r.font_size_max = j.value("font_size_max", r.font_size_max);
    r.margin_jitter = j.value("margin_jitter", r.margin_jitter);
    r.line_spacing = j.value("line_spacing", r.line_spacing);
    return r;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    check_keys(j,
               {"paths", "seed", "jobs", "case", "cases", "synthetic", "split", "model", "train",
                "noise", "render", "vocab", "augment", "sweep", "ablation"},
               "config");
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        check_keys(p,
                   {"manifest", "augmented_manifest", "dataset_dir", "out_dir", "checkpoint_dir",
                    "checkpoint", "level1_checkpoint", "level2_checkpoint", "reference_file"},
                   "paths");
        cfg.manifest = p.value("manifest", "");
        cfg.augmented_manifest = p.value("augmented_manifest", "");
        cfg.dataset_dir = p.value("dataset_dir", "");
        cfg.out_dir = p.value("out_dir", "");
        cfg.checkpoint_dir = p.value("checkpoint_dir", "");
        cfg.checkpoint = p.value("checkpoint", "");
        cfg.level1_checkpoint = p.value("level1_checkpoint", "");
        cfg.level2_checkpoint = p.value("level2_checkpoint", "");
        cfg.reference_file = p.value("reference_file", "");
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (const char* env = std::getenv("ETDPC_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("ETDPC_SEED must be an unsigned integer, got '" + std::string(env) + "'");
        }
    }
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.eval_case = j.value("case", cfg.eval_case);
    if (j.contains("cases")) cfg.cases = j.at("cases").get<std::vector<std::string>>();
    if (j.contains("synthetic")) {
        cfg.use_synthetic = true;
        cfg.synthetic = synthetic_from_json(j.at("synthetic"));
    }
    if (j.contains("split")) cfg.split = split_from_json(j.at("split"));
    if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("noise")) cfg.noise = noise_from_json(j.at("noise"));
    if (j.contains("render")) cfg.render = render_from_json(j.at("render"));
    if (j.contains("vocab")) {
        check_keys(j.at("vocab"), {"max_vocab"}, "vocab");
        cfg.max_vocab = j.at("vocab").value("max_vocab", cfg.max_vocab);
    }
    if (j.contains("augment")) {
        check_keys(j.at("augment"), {"floor"}, "augment");
        cfg.augment_floor = j.at("augment").value("floor", cfg.augment_floor);
    }
    if (j.contains("sweep")) {
        check_keys(j.at("sweep"), {"categories", "fractions"}, "sweep");
        if (j.at("sweep").contains("categories"))
            cfg.sweep_categories = j.at("sweep").at("categories").get<std::vector<std::string>>();
        if (j.at("sweep").contains("fractions"))
            cfg.sweep_fractions = j.at("sweep").at("fractions").get<std::vector<double>>();
    }
    if (j.contains("ablation")) {
        check_keys(j.at("ablation"), {"experiment"}, "ablation");
        cfg.ablation_experiment = j.at("ablation").value("experiment", cfg.ablation_experiment);
    }
    // Derived per-stage seeds.
    cfg.split.seed = derive_seed(cfg.seed, "split");
    cfg.synthetic.seed = derive_seed(cfg.seed, "synthetic");
    cfg.train.seed = derive_seed(cfg.seed, "train");
    cfg.noise.seed = derive_seed(cfg.seed, "augment");
    cfg.render.seed = derive_seed(cfg.seed, "render");
    return cfg;
}

RunConfig run_config_from_string(const std::string& options_json) {
    json j;
    try {
        j = json::parse(options_json);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("options are not valid JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

std::vector<const PageRecord*> Dataset::part(train::SplitKind kind) const {
    const std::vector<size_t>* idx = nullptr;
    switch (kind) {
        case train::SplitKind::kTrain: idx = &split.train; break;
        case train::SplitKind::kVal: idx = &split.val; break;
        case train::SplitKind::kTest: idx = &split.test; break;
    }
    std::vector<const PageRecord*> out;
    out.reserve(idx->size());
    for (size_t i : *idx) out.push_back(&records.at(i));
    return out;
}

Dataset load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir);
    Dataset ds;
    ds.dir = dir;
    corpus::Manifest m = corpus::read_manifest((fs::path(dir) / "records.jsonl").string());
    ds.records = std::move(m.records);
    for (auto& rec : ds.records) corpus::materialize(rec, dir);

    const json vj = evalrep::read_json_file((fs::path(dir) / "vocab.json").string());
    ds.vocab = corpus::Vocabulary(vj.at("tokens").get<std::vector<std::string>>());

    const json sj = evalrep::read_json_file((fs::path(dir) / "splits.json").string());
    std::map<std::string, size_t> by_key;
    for (size_t i = 0; i < ds.records.size(); ++i) by_key[ds.records[i].key()] = i;
    auto load_part = [&](const char* name, std::vector<size_t>& part) {
        for (const auto& key : sj.at(name).get<std::vector<std::string>>()) {
            auto it = by_key.find(key);
            if (it == by_key.end())
                throw DataError("splits.json names unknown record '" + key + "' in " + dir);
            part.push_back(it->second);
        }
    };
    load_part("train", ds.split.train);
    load_part("val", ds.split.val);
    load_part("test", ds.split.test);
    ds.split_hash_value = std::stoull(sj.at("hash").get<std::string>(), nullptr, 16);
    return ds;
}

namespace {

void save_splits(const std::string& dir, const std::vector<PageRecord>& records,
                 const corpus::SplitResult& split, const corpus::SplitSpec& spec, uint64_t hash) {
    auto keys_of = [&](const std::vector<size_t>& part) {
        std::vector<std::string> keys;
        keys.reserve(part.size());
        for (size_t i : part) keys.push_back(records[i].key());
        return keys;
    };
    json j{{"seed", spec.seed},
           {"fractions", {spec.train_fraction, spec.val_fraction, spec.test_fraction}},
           {"stratified", spec.stratified},
           {"group_by_etd", spec.group_by_etd},
           {"hash", hex64(hash)},
           {"train", keys_of(split.train)},
           {"val", keys_of(split.val)},
           {"test", keys_of(split.test)},
           {"warnings", split.warnings}};
    evalrep::write_json_file((fs::path(dir) / "splits.json").string(), j);
}

json counts_to_json(const std::vector<PageRecord>& records) {
    const Taxonomy& tax = Taxonomy::standard();
    json out = json::object();
    for (const auto& [label, count] : corpus::class_counts(records)) out[tax.label(label)] = count;
    return out;
}

}  // namespace

json cmd_prepare(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.out_dir.empty()) throw ConfigError("prepare requires an output directory");
    if (cfg.manifest.empty() && !cfg.use_synthetic)
        throw ConfigError("prepare requires either a manifest or a synthetic corpus spec");
    ensure_dir(cfg.out_dir);

    std::vector<PageRecord> records;
    if (cfg.use_synthetic) {
        corpus::SyntheticCorpusSpec spec = cfg.synthetic;
        spec.seed = derive_seed(cfg.seed, "synthetic");
        records = corpus::generate_synthetic_corpus(spec);
        ensure_dir((fs::path(cfg.out_dir) / "pages").string());
        ensure_dir((fs::path(cfg.out_dir) / "ocr").string());
        for (auto& rec : records) write_page_files(cfg.out_dir, rec);
    } else {
        corpus::Manifest m = corpus::read_manifest(cfg.manifest);
        records = std::move(m.records);
        for (auto& rec : records) {
            corpus::materialize(rec, m.base_dir);
            // Re-anchor paths so the dataset dir is self-contained.
            auto absolute = [&](const std::string& p) {
                fs::path fp(p);
                return fp.is_absolute() ? fp.string() : fs::absolute(fs::path(m.base_dir) / fp).string();
            };
            if (!rec.image_path.empty()) rec.image_path = absolute(rec.image_path);
            if (!rec.ocr_path.empty()) rec.ocr_path = absolute(rec.ocr_path);
        }
    }
    if (records.empty()) throw DataError("prepare: no records found");

    std::set<std::string> seen;
    for (const auto& rec : records)
        if (!seen.insert(rec.key()).second)
            throw DataError("duplicate record key in input: " + rec.key());

    corpus::SplitSpec split_spec = cfg.split;
    split_spec.seed = derive_seed(cfg.seed, "split");
    const corpus::SplitResult split = corpus::split_dataset(records, split_spec);
    std::vector<std::string> keys;
    keys.reserve(records.size());
    for (const auto& r : records) keys.push_back(r.key());
    const uint64_t hash = corpus::split_hash(keys, split);

    // Vocabulary from the train split only (no token leakage from val/test).
    std::vector<PageRecord> train_records;
    for (size_t i : split.train) train_records.push_back(records[i]);
    const corpus::Vocabulary vocab = corpus::Vocabulary::build(train_records, cfg.max_vocab);

    corpus::write_manifest((fs::path(cfg.out_dir) / "records.jsonl").string(), records);
    evalrep::write_json_file((fs::path(cfg.out_dir) / "vocab.json").string(),
                             json{{"tokens", vocab.tokens()}});
    save_splits(cfg.out_dir, records, split, split_spec, hash);

    json summary{{"status", "ok"},
                 {"records", records.size()},
                 {"split_hash", hex64(hash)},
                 {"train", split.train.size()},
                 {"val", split.val.size()},
                 {"test", split.test.size()},
                 {"vocab_size", vocab.size()},
                 {"counts", counts_to_json(records)},
                 {"warnings", split.warnings},
                 {"dataset_dir", cfg.out_dir}};
    evalrep::write_json_file((fs::path(cfg.out_dir) / "dataset.json").string(), summary);
    return summary;
}

json cmd_augment(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.out_dir.empty()) throw ConfigError("augment requires an output directory");
    ensure_dir(cfg.out_dir);
    ensure_dir((fs::path(cfg.out_dir) / "pages").string());
    ensure_dir((fs::path(cfg.out_dir) / "ocr").string());

    // Source pool: train-split originals when a prepared dataset is given,
    // otherwise every record of a bare manifest.
    std::vector<PageRecord> storage;
    std::vector<const PageRecord*> pool;
    if (!cfg.dataset_dir.empty()) {
        Dataset ds = load_dataset(cfg.dataset_dir);
        std::set<std::string> train_keys;
        for (size_t i : ds.split.train) train_keys.insert(ds.records[i].key());
        storage = std::move(ds.records);
        for (const auto& rec : storage)
            if (train_keys.count(rec.key()) && rec.provenance == Provenance::kOriginal)
                pool.push_back(&rec);
    } else if (!cfg.manifest.empty()) {
        corpus::Manifest m = corpus::read_manifest(cfg.manifest);
        storage = std::move(m.records);
        for (auto& rec : storage) corpus::materialize(rec, m.base_dir);
        for (const auto& rec : storage)
            if (rec.provenance == Provenance::kOriginal) pool.push_back(&rec);
    } else {
        throw ConfigError("augment requires a manifest or a prepared dataset directory");
    }

    std::map<int, int64_t> counts;
    for (int i = 0; i < Taxonomy::kCategoryCount; ++i) counts[i] = 0;
    for (const PageRecord* r : pool) ++counts[r->label];
    const augment::BalancePlan plan = augment::make_balance_plan(counts, cfg.augment_floor);

    augment::NoiseParams noise = cfg.noise;
    noise.seed = derive_seed(cfg.seed, "augment");
    const augment::ParaphraseHook hook = augment::default_hook();

    std::vector<PageRecord> generated;
    const Taxonomy& tax = Taxonomy::standard();
    for (const auto& [label, extra] : plan.additional) {
        if (extra == 0) continue;
        auto recs = augment::augment_category(pool, label, extra, noise, cfg.render, hook);
        for (auto& r : recs) generated.push_back(std::move(r));
    }

    for (auto& rec : generated) {
        // Single-line OCR so the fragment round-trips through the same parser.
        corpus::OcrBlock blk;
        blk.id = rec.key() + "-l0";
        blk.block_type = corpus::BlockType::kLine;
        blk.text = rec.full_text;
        blk.confidence = 0.99;
        blk.left = 0.05;
        blk.top = 0.05;
        blk.width = 0.9;
        blk.height = 0.9;
        rec.blocks = {blk};
        write_page_files(cfg.out_dir, rec);
    }
    corpus::write_manifest((fs::path(cfg.out_dir) / "augmented.jsonl").string(), generated);

    json plan_json = json::object();
    for (const auto& [label, extra] : plan.additional) plan_json[tax.label(label)] = extra;
    return json{{"status", "ok"},
                {"plan", plan_json},
                {"generated", generated.size()},
                {"augmented_manifest", (fs::path(cfg.out_dir) / "augmented.jsonl").string()},
                {"out_dir", cfg.out_dir}};
}

namespace {

struct LoadedData {
    Dataset dataset;
    std::vector<PageRecord> augmented;  // storage for case-c extra records
};

LoadedData load_training_data(const RunConfig& cfg, bool with_augmented) {
    if (cfg.dataset_dir.empty()) throw ConfigError("this command requires paths.dataset_dir");
    LoadedData data{load_dataset(cfg.dataset_dir), {}};
    if (with_augmented) {
        if (cfg.augmented_manifest.empty())
            throw ConfigError("case c requires paths.augmented_manifest (run augment first)");
        corpus::Manifest m = corpus::read_manifest(cfg.augmented_manifest);
        data.augmented = std::move(m.records);
        for (auto& rec : data.augmented) {
            corpus::materialize(rec, m.base_dir);
            if (rec.provenance != Provenance::kAugmented)
                throw DataError("augmented manifest contains a non-augmented record: " + rec.key());
        }
    }
    return data;
}

std::string checkpoint_dir_of(const RunConfig& cfg) {
    std::string dir = cfg.checkpoint_dir.empty() ? cfg.out_dir : cfg.checkpoint_dir;
    if (dir.empty()) throw ConfigError("no output/checkpoint directory configured");
    ensure_dir(dir);
    return dir;
}

}  // namespace

json cmd_train(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    const evalrep::EvalCase ecase = evalrep::eval_case_from(cfg.eval_case);
    LoadedData data = load_training_data(cfg, ecase == evalrep::EvalCase::kC);
    const std::string ckdir = checkpoint_dir_of(cfg);

    const auto train_part = data.dataset.part(train::SplitKind::kTrain);
    const auto val_part = data.dataset.part(train::SplitKind::kVal);

    train::TrainConfig tcfg = cfg.train;
    tcfg.seed = derive_seed(cfg.seed, "train");

    json summary{{"status", "ok"}, {"case", cfg.eval_case}, {"checkpoint_dir", ckdir}};
    if (ecase == evalrep::EvalCase::kA) {
        tcfg.target = train::TrainTarget::kOneLevel;
        model::Bundle bundle =
            model::make_bundle(cfg.model, data.dataset.vocab, Taxonomy::standard().labels(),
                               derive_seed(tcfg.seed, "one-level-init"));
        const std::string ck = (fs::path(ckdir) / "one_level.etdpc").string();
        train::TrainResult r = train::train_model(std::move(bundle), train_part, val_part, tcfg, ck);
        model::save_bundle(ck, r.bundle, &r.optimizer);
        evalrep::write_json_file((fs::path(ckdir) / "history_one_level.json").string(),
                                 evalrep::history_to_json(r.history));
        summary["checkpoint"] = ck;
        summary["best_epoch"] = r.history.best_epoch;
        summary["epochs"] = r.history.val_loss.size();
    } else {
        std::vector<const PageRecord*> train_pool = train_part;
        if (ecase == evalrep::EvalCase::kC)
            for (const auto& rec : data.augmented) train_pool.push_back(&rec);
        train::TrainConfig cfg1 = tcfg;
        cfg1.target = train::TrainTarget::kLevel1;
        cfg1.seed = derive_seed(tcfg.seed, "level1");
        train::TrainConfig cfg2 = tcfg;
        cfg2.target = train::TrainTarget::kLevel2;
        cfg2.seed = derive_seed(tcfg.seed, "level2");
        train::HierarchicalResult r = train::train_hierarchical(
            train_pool, val_part, cfg.model, data.dataset.vocab, cfg1, cfg2, ckdir);
        model::save_bundle((fs::path(ckdir) / "level1.etdpc").string(), r.classifier.level1);
        model::save_bundle((fs::path(ckdir) / "level2.etdpc").string(), r.classifier.level2);
        evalrep::write_json_file((fs::path(ckdir) / "history_level1.json").string(),
                                 evalrep::history_to_json(r.level1_history));
        evalrep::write_json_file((fs::path(ckdir) / "history_level2.json").string(),
                                 evalrep::history_to_json(r.level2_history));
        summary["level1_checkpoint"] = (fs::path(ckdir) / "level1.etdpc").string();
        summary["level2_checkpoint"] = (fs::path(ckdir) / "level2.etdpc").string();
        summary["level2_train_pool"] =
            train::assemble_level2_pool(train_pool, ecase == evalrep::EvalCase::kC).size();
    }
    return summary;
}

namespace {

json eval_outcome_summary(const evalrep::EvalOutcome& outcome, const std::string& case_name) {
    return json{{"status", "ok"},
                {"case", case_name},
                {"macro_f1", outcome.report.macro_f1},
                {"accuracy", outcome.report.accuracy},
                {"routing_violations", outcome.routing_violations},
                {"test_set_hash", outcome.test_set_hash},
                {"total", outcome.report.total}};
}

void write_eval_reports(const RunConfig& cfg, const std::string& case_name,
                        const evalrep::MetricsReport& report) {
    if (cfg.out_dir.empty()) return;
    ensure_dir(cfg.out_dir);
    const json* ref = nullptr;
    json ref_data;
    if (!cfg.reference_file.empty()) {
        ref_data = evalrep::read_json_file(cfg.reference_file);
        ref = &ref_data;
    }
    evalrep::NamedReports cases{{case_name, &report}};
    evalrep::write_json_file((fs::path(cfg.out_dir) / ("report_case_" + case_name + ".json")).string(),
                             evalrep::report_to_json(report));
    evalrep::write_text_file((fs::path(cfg.out_dir) / ("report_case_" + case_name + ".csv")).string(),
                             evalrep::case_comparison_csv(cases));
    std::string md = evalrep::case_comparison_markdown(cases, ref);
    if (ref)
        md += "\n" + evalrep::baseline_comparison_markdown("this run (case " + case_name + ")",
                                                           report.accuracy, report.macro_f1, ref);
    evalrep::write_text_file((fs::path(cfg.out_dir) / ("report_case_" + case_name + ".md")).string(), md);
}

}  // namespace

json cmd_evaluate(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    const evalrep::EvalCase ecase = evalrep::eval_case_from(cfg.eval_case);
    if (cfg.dataset_dir.empty()) throw ConfigError("evaluate requires paths.dataset_dir");
    Dataset ds = load_dataset(cfg.dataset_dir);
    const auto test_part = ds.part(train::SplitKind::kTest);

    evalrep::EvalOutcome outcome;
    const std::string ckdir = cfg.checkpoint_dir.empty() ? cfg.out_dir : cfg.checkpoint_dir;
    if (ecase == evalrep::EvalCase::kA) {
        std::string ck = cfg.checkpoint;
        if (ck.empty()) ck = (fs::path(ckdir) / "one_level.etdpc").string();
        model::LoadedBundle lb = model::load_bundle(ck);
        outcome = evalrep::evaluate_one_level(lb.bundle, test_part);
    } else {
        std::string ck1 = cfg.level1_checkpoint;
        std::string ck2 = cfg.level2_checkpoint;
        if (ck1.empty()) ck1 = (fs::path(ckdir) / "level1.etdpc").string();
        if (ck2.empty()) ck2 = (fs::path(ckdir) / "level2.etdpc").string();
        model::HierarchicalClassifier clf{model::load_bundle(ck1).bundle,
                                          model::load_bundle(ck2).bundle};
        outcome = evalrep::evaluate_hierarchical(clf, test_part);
    }
    write_eval_reports(cfg, cfg.eval_case, outcome.report);
    return eval_outcome_summary(outcome, cfg.eval_case);
}

json cmd_ablate(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.dataset_dir.empty()) throw ConfigError("ablate requires paths.dataset_dir");
    Dataset ds = load_dataset(cfg.dataset_dir);
    train::TrainConfig tcfg = cfg.train;
    tcfg.seed = derive_seed(cfg.seed, "ablate");
    const evalrep::AblationResult result = evalrep::run_ablation(
        evalrep::ablation_from(cfg.ablation_experiment), ds.part(train::SplitKind::kTrain),
        ds.part(train::SplitKind::kVal), ds.part(train::SplitKind::kTest), cfg.model, ds.vocab, tcfg);
    json summary{{"status", "ok"}, {"experiment", cfg.ablation_experiment}};
    json variants = json::object();
    for (const auto& v : result.variants) variants[v.name] = v.report.macro_f1;
    summary["macro_f1"] = variants;
    if (!cfg.out_dir.empty()) {
        ensure_dir(cfg.out_dir);
        evalrep::write_json_file((fs::path(cfg.out_dir) / "ablation.json").string(),
                                 evalrep::ablation_to_json(result));
        evalrep::write_text_file((fs::path(cfg.out_dir) / "ablation.md").string(),
                                 evalrep::ablation_markdown(result));
        summary["out_dir"] = cfg.out_dir;
    }
    return summary;
}

json cmd_sweep(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.dataset_dir.empty()) throw ConfigError("sweep requires paths.dataset_dir");
    Dataset ds = load_dataset(cfg.dataset_dir);
    train::TrainConfig tcfg = cfg.train;
    const evalrep::SweepResult result = evalrep::data_efficiency_sweep(
        cfg.sweep_categories, ds.part(train::SplitKind::kTrain), ds.part(train::SplitKind::kVal),
        ds.part(train::SplitKind::kTest), cfg.model, ds.vocab, tcfg, derive_seed(cfg.seed, "sweep"),
        cfg.sweep_fractions);
    json summary{{"status", "ok"},
                 {"fractions", result.fractions},
                 {"categories", result.categories},
                 {"full_macro_f1", result.full_macro_f1}};
    if (!cfg.out_dir.empty()) {
        ensure_dir(cfg.out_dir);
        evalrep::write_json_file((fs::path(cfg.out_dir) / "sweep.json").string(),
                                 evalrep::sweep_to_json(result));
        evalrep::write_text_file((fs::path(cfg.out_dir) / "sweep.csv").string(),
                                 evalrep::sweep_csv(result));
        summary["out_dir"] = cfg.out_dir;
    }
    return summary;
}

json cmd_predict(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.manifest.empty()) throw ConfigError("predict requires paths.manifest");
    if (cfg.out_dir.empty()) throw ConfigError("predict requires paths.out_dir");
    ensure_dir(cfg.out_dir);

    const bool hierarchical = !cfg.level1_checkpoint.empty();
    std::optional<model::LoadedBundle> one_level;
    std::optional<model::HierarchicalClassifier> clf;
    if (hierarchical) {
        if (cfg.level2_checkpoint.empty())
            throw ConfigError("hierarchical predict requires both level1 and level2 checkpoints");
        clf.emplace(model::HierarchicalClassifier{model::load_bundle(cfg.level1_checkpoint).bundle,
                                                  model::load_bundle(cfg.level2_checkpoint).bundle});
    } else {
        if (cfg.checkpoint.empty())
            throw ConfigError("predict requires paths.checkpoint (or level1/level2 checkpoints)");
        one_level.emplace(model::load_bundle(cfg.checkpoint));
    }

    corpus::Manifest m = corpus::read_manifest(cfg.manifest);
    const std::string out_path = (fs::path(cfg.out_dir) / "predictions.jsonl").string();
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write predictions: " + out_path);

    const Taxonomy& tax = Taxonomy::standard();
    const auto t0 = std::chrono::steady_clock::now();
    int64_t ok_count = 0, error_count = 0;
    constexpr size_t kChunk = 32;
    for (size_t i = 0; i < m.records.size(); i += kChunk) {
        const size_t end = std::min(m.records.size(), i + kChunk);
        std::vector<PageRecord*> chunk;
        std::vector<json> errors(end - i);
        std::vector<const PageRecord*> loaded;
        std::vector<size_t> loaded_pos;
        for (size_t r = i; r < end; ++r) {
            try {
                corpus::materialize(m.records[r], m.base_dir);
                if (m.records[r].ocr_path.empty() && m.records[r].full_text.empty())
                    throw DataError("no OCR available for " + m.records[r].key());
                loaded.push_back(&m.records[r]);
                loaded_pos.push_back(r - i);
            } catch (const std::exception& e) {
                errors[r - i] = json{{"etd_id", m.records[r].etd_id},
                                     {"page_number", m.records[r].page_number},
                                     {"error", e.what()}};
            }
        }
        std::vector<json> lines(end - i);
        for (size_t r = 0; r < end - i; ++r)
            if (!errors[r].is_null()) lines[r] = errors[r];

        if (!loaded.empty()) {
            if (hierarchical) {
                const auto preds = model::hierarchical_predict(*clf, loaded);
                for (size_t r = 0; r < loaded.size(); ++r) {
                    const auto& p = preds[r];
                    json line{{"etd_id", loaded[r]->etd_id},
                              {"page_number", loaded[r]->page_number},
                              {"label", tax.label(p.label)},
                              {"level1_probs", p.level1_probs}};
                    line["level2_probs"] = p.level2_probs.empty() ? json(nullptr) : json(p.level2_probs);
                    lines[loaded_pos[r]] = std::move(line);
                }
            } else {
                const model::Batch batch = model::make_batch(loaded, one_level->bundle);
                const nn::Tensor probs = model::predict_probs(one_level->bundle, batch);
                const int64_t k = one_level->bundle.config.class_count;
                for (size_t r = 0; r < loaded.size(); ++r) {
                    const double* row = probs.data() + static_cast<int64_t>(r) * k;
                    int best = 0;
                    for (int64_t j = 1; j < k; ++j)
                        if (row[j] > row[best]) best = static_cast<int>(j);
                    json line{{"etd_id", loaded[r]->etd_id},
                              {"page_number", loaded[r]->page_number},
                              {"label", one_level->bundle.class_labels[static_cast<size_t>(best)]},
                              {"probs", std::vector<double>(row, row + k)},
                              {"level1_probs", nullptr},
                              {"level2_probs", nullptr}};
                    lines[loaded_pos[r]] = std::move(line);
                }
            }
        }
        for (auto& line : lines) {
            if (line.is_null()) continue;
            out << line.dump() << '\n';
            if (line.contains("error"))
                ++error_count;
            else
                ++ok_count;
        }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return json{{"status", "ok"},
                {"predictions", out_path},
                {"pages", ok_count},
                {"errors", error_count},
                {"pages_per_second", seconds > 0.0 ? static_cast<double>(ok_count) / seconds : 0.0}};
}

json cmd_end_to_end(const RunConfig& cfg) {
    apply_jobs(cfg.jobs);
    if (cfg.out_dir.empty()) throw ConfigError("end-to-end requires paths.out_dir");
    ensure_dir(cfg.out_dir);
    std::vector<std::string> cases = cfg.cases;
    if (cases.empty()) cases = {"a", "b", "c"};

    json summary{{"status", "ok"}, {"stages", json::array()}};
    auto stage = [&](const std::string& name, auto&& fn) -> json {
        try {
            json r = fn();
            summary["stages"].push_back(json{{"stage", name}, {"status", "ok"}});
            return r;
        } catch (const std::exception& e) {
            throw InternalError("stage '" + name + "' failed (partial artifacts kept in " +
                                cfg.out_dir + "): " + e.what());
        }
    };

    // prepare
    RunConfig prep = cfg;
    prep.out_dir = (fs::path(cfg.out_dir) / "dataset").string();
    const json prep_summary = stage("prepare", [&] { return cmd_prepare(prep); });
    summary["split_hash"] = prep_summary.at("split_hash");

    // augment (only when case c is requested)
    std::string augmented_manifest;
    if (std::find(cases.begin(), cases.end(), "c") != cases.end()) {
        RunConfig aug = cfg;
        aug.dataset_dir = prep.out_dir;
        aug.out_dir = (fs::path(cfg.out_dir) / "augmented").string();
        const json aug_summary = stage("augment", [&] { return cmd_augment(aug); });
        augmented_manifest = aug_summary.at("augmented_manifest").get<std::string>();
        summary["augmented"] = aug_summary.at("generated");
    }

    std::vector<std::pair<std::string, evalrep::MetricsReport>> case_reports;
    for (const std::string& c : cases) {
        RunConfig tr = cfg;
        tr.eval_case = c;
        tr.dataset_dir = prep.out_dir;
        tr.out_dir = (fs::path(cfg.out_dir) / ("case_" + c)).string();
        tr.checkpoint_dir = tr.out_dir;
        tr.augmented_manifest = augmented_manifest;
        stage("train case " + c, [&] { return cmd_train(tr); });
        const json ev = stage("eval case " + c, [&] { return cmd_evaluate(tr); });
        summary["case_" + c] = ev;
        case_reports.emplace_back(
            c, evalrep::report_from_json(evalrep::read_json_file(
                   (fs::path(tr.out_dir) / ("report_case_" + c + ".json")).string())));
    }

    evalrep::NamedReports named;
    for (const auto& [name, rep] : case_reports) named.emplace_back(name, &rep);
    evalrep::write_text_file((fs::path(cfg.out_dir) / "comparison.csv").string(),
                             evalrep::case_comparison_csv(named));
    const json* ref = nullptr;
    json ref_data;
    if (!cfg.reference_file.empty()) {
        ref_data = evalrep::read_json_file(cfg.reference_file);
        ref = &ref_data;
    }
    evalrep::write_text_file((fs::path(cfg.out_dir) / "comparison.md").string(),
                             evalrep::case_comparison_markdown(named, ref));
    return summary;
}

}  // namespace etdpc::pipeline
