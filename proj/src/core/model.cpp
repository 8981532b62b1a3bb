#include "model.hpp"

#include <algorithm>
#include <cmath>

namespace etdpc::model {

using corpus::PageRecord;
using corpus::Taxonomy;
using corpus::Vocabulary;
using nn::ParamStore;
using nn::Tape;
using nn::Tensor;

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::kMultimodal: return "multimodal";
        case Modality::kImageOnly: return "image_only";
        case Modality::kTextOnly: return "text_only";
    }
    return "multimodal";
}

Modality modality_from(const std::string& name) {
    if (name == "multimodal") return Modality::kMultimodal;
    if (name == "image_only") return Modality::kImageOnly;
    if (name == "text_only") return Modality::kTextOnly;
    throw ConfigError("unknown modality: '" + name + "'");
}

void ModelConfig::validate() const {
    if (image_height < 32 || image_width < 32) throw ConfigError("model image input must be at least 32x32");
    if (vision_stages.empty() && modality != Modality::kTextOnly)
        throw ConfigError("vision stream requires at least one stage");
    for (const auto& s : vision_stages) {
        if (s.channels < 1 || s.blocks < 1 || s.stride < 1)
            throw ConfigError("vision stage fields must be positive");
    }
    if (pool_grid_h < 1 || pool_grid_w < 1) throw ConfigError("pool grid must be positive");
    if (text_layers < 1 || text_heads < 1 || text_dim < 1 || text_ffn_dim < 1)
        throw ConfigError("text encoder dimensions must be positive");
    if (text_dim % text_heads != 0) throw ConfigError("text_dim must be divisible by text_heads");
    if (seq_len < 3) throw ConfigError("sequence length must be at least 3");
    if (projection_dim < 1 || cross_attention_dim < 1) throw ConfigError("projection dims must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
    if (class_count < 2) throw ConfigError("class count must be at least 2");
}

int64_t ModelConfig::head_input_dim() const {
    switch (modality) {
        case Modality::kImageOnly:
        case Modality::kTextOnly:
            return projection_dim;
        case Modality::kMultimodal:
            return 2 * projection_dim +
                   cross_attention_dim * (bidirectional_cross_attention ? 2 : 1);
    }
    return projection_dim;
}

namespace {

std::string stage_prefix(size_t s, size_t b) {
    return "vision.stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
}

void add_bn(ParamStore& ps, const std::string& prefix, int64_t channels) {
    ps.add(prefix + "gamma", Tensor::full({channels}, 1.0));
    ps.add(prefix + "beta", Tensor::zeros({channels}));
    ps.add(prefix + "running_mean", Tensor::zeros({channels}), /*trainable=*/false);
    ps.add(prefix + "running_var", Tensor::full({channels}, 1.0), /*trainable=*/false);
}

struct BnIds {
    int gamma, beta, rmean, rvar;
};

BnIds find_bn(ParamStore& ps, const std::string& prefix) {
    return {ps.find(prefix + "gamma"), ps.find(prefix + "beta"), ps.find(prefix + "running_mean"),
            ps.find(prefix + "running_var")};
}

int bn_relu(Tape& tape, Bundle& b, int x, const std::string& prefix, const ForwardMode& mode) {
    const BnIds ids = find_bn(b.params, prefix);
    const int y = tape.batch_norm2d(x, tape.param(b.params, ids.gamma), tape.param(b.params, ids.beta),
                                    b.params, ids.rmean, ids.rvar, mode.training);
    return tape.relu(y);
}

}  // namespace

Bundle make_bundle(ModelConfig config, Vocabulary vocab, std::vector<std::string> class_labels,
                   uint64_t init_seed) {
    config.vocab_size = vocab.size();
    config.validate();
    if (static_cast<int64_t>(class_labels.size()) != config.class_count)
        throw ConfigError("class label list does not match configured class count");

    Bundle b{std::move(config), std::move(vocab), std::move(class_labels), ParamStore{}};
    const ModelConfig& cfg = b.config;
    ParamStore& ps = b.params;
    Rng rng(derive_seed(init_seed, "model-init"));

    if (cfg.modality != Modality::kTextOnly) {
        const int64_t c0 = cfg.vision_stages.front().channels;
        ps.add("vision.stem.conv", ParamStore::fan_in_normal({c0, 1, 3, 3}, 9, rng));
        int64_t cin = c0;
        for (size_t s = 0; s < cfg.vision_stages.size(); ++s) {
            const VisionStage& st = cfg.vision_stages[s];
            for (int64_t blk = 0; blk < st.blocks; ++blk) {
                const std::string p = stage_prefix(s, static_cast<size_t>(blk));
                const int64_t stride = blk == 0 ? st.stride : 1;
                add_bn(ps, p + "bn1.", cin);
                ps.add(p + "conv1", ParamStore::fan_in_normal({st.channels, cin, 3, 3}, cin * 9, rng));
                add_bn(ps, p + "bn2.", st.channels);
                // Zero-initialized closing conv: every block starts as identity.
                ps.add(p + "conv2", Tensor::zeros({st.channels, st.channels, 3, 3}));
                if (stride != 1 || cin != st.channels)
                    ps.add(p + "proj", ParamStore::fan_in_normal({st.channels, cin, 1, 1}, cin, rng));
                cin = st.channels;
            }
        }
        add_bn(ps, "vision.final_bn.", cin);
        ps.add("proj.visual.w", ParamStore::fan_in_normal({cin, cfg.projection_dim}, cin, rng));
        ps.add("proj.visual.b", Tensor::zeros({cfg.projection_dim}));
    }

    if (cfg.modality != Modality::kImageOnly) {
        const int64_t d = cfg.text_dim;
        auto emb_init = [&](std::vector<int64_t> shape) {
            Tensor t(std::move(shape));
            for (auto& x : t.v) x = rng.gaussian(0.0, 0.02);
            return t;
        };
        ps.add("text.emb.word", emb_init({cfg.vocab_size, d}));
        ps.add("text.emb.pos", emb_init({cfg.seq_len, d}));
        ps.add("text.emb.type", emb_init({2, d}));
        for (int64_t l = 0; l < cfg.text_layers; ++l) {
            const std::string p = "text.layer" + std::to_string(l) + ".";
            ps.add(p + "attn.wq", ParamStore::fan_in_normal({d, d}, d, rng));
            ps.add(p + "attn.wk", ParamStore::fan_in_normal({d, d}, d, rng));
            ps.add(p + "attn.wv", ParamStore::fan_in_normal({d, d}, d, rng));
            if (cfg.head_mixing) {
                ps.add(p + "attn.p_logit", ParamStore::identity(cfg.text_heads));
                ps.add(p + "attn.p_weight", ParamStore::identity(cfg.text_heads));
            }
            ps.add(p + "attn.wo", ParamStore::fan_in_normal({d, d}, d, rng));
            ps.add(p + "ln1.gamma", Tensor::full({d}, 1.0));
            ps.add(p + "ln1.beta", Tensor::zeros({d}));
            ps.add(p + "ffn.w_in", ParamStore::fan_in_normal({d, cfg.text_ffn_dim}, d, rng));
            ps.add(p + "ffn.w_gate", ParamStore::fan_in_normal({d, cfg.text_ffn_dim}, d, rng));
            ps.add(p + "ffn.w_out", ParamStore::fan_in_normal({cfg.text_ffn_dim, d}, cfg.text_ffn_dim, rng));
            ps.add(p + "ln2.gamma", Tensor::full({d}, 1.0));
            ps.add(p + "ln2.beta", Tensor::zeros({d}));
        }
        ps.add("proj.text.w", ParamStore::fan_in_normal({d, cfg.projection_dim}, d, rng));
        ps.add("proj.text.b", Tensor::zeros({cfg.projection_dim}));
    }

    if (cfg.modality == Modality::kMultimodal) {
        const int64_t cv = cfg.visual_channels();
        const int64_t da = cfg.cross_attention_dim;
        ps.add("cross.wq", ParamStore::fan_in_normal({cfg.text_dim, da}, cfg.text_dim, rng));
        ps.add("cross.wk", ParamStore::fan_in_normal({cv, da}, cv, rng));
        ps.add("cross.wv", ParamStore::fan_in_normal({cv, da}, cv, rng));
        ps.add("cross.wo", ParamStore::fan_in_normal({da, da}, da, rng));
        if (cfg.bidirectional_cross_attention) {
            ps.add("cross_rev.wq", ParamStore::fan_in_normal({cv, da}, cv, rng));
            ps.add("cross_rev.wk", ParamStore::fan_in_normal({cfg.text_dim, da}, cfg.text_dim, rng));
            ps.add("cross_rev.wv", ParamStore::fan_in_normal({cfg.text_dim, da}, cfg.text_dim, rng));
            ps.add("cross_rev.wo", ParamStore::fan_in_normal({da, da}, da, rng));
        }
    }

    ps.add("head.w", ParamStore::fan_in_normal({cfg.head_input_dim(), cfg.class_count},
                                               cfg.head_input_dim(), rng));
    ps.add("head.b", Tensor::zeros({cfg.class_count}));
    return b;
}

Batch make_batch(const std::vector<const PageRecord*>& pages, const Bundle& bundle) {
    const ModelConfig& cfg = bundle.config;
    Batch batch;
    batch.size = static_cast<int64_t>(pages.size());
    const int64_t hw = static_cast<int64_t>(cfg.image_height) * cfg.image_width;
    batch.images = Tensor({batch.size, 1, cfg.image_height, cfg.image_width});
    batch.token_ids.reserve(static_cast<size_t>(batch.size * cfg.seq_len));
    batch.token_mask = Tensor({batch.size, cfg.seq_len});

    for (int64_t i = 0; i < batch.size; ++i) {
        const PageRecord& rec = *pages[static_cast<size_t>(i)];
        if (cfg.modality != Modality::kTextOnly) {
            if (rec.image.size() == 0)
                throw DataError("record " + rec.key() + " has no image loaded");
            const corpus::Raster img =
                corpus::resize_bilinear(rec.image, cfg.image_height, cfg.image_width);
            double* dst = batch.images.data() + i * hw;
            for (int64_t p = 0; p < hw; ++p)
                dst[p] = static_cast<double>(img.px[static_cast<size_t>(p)]) / 255.0;
        }
        const corpus::TokenFeatures f = corpus::tokenize(rec.full_text, bundle.vocab, cfg.seq_len);
        batch.token_ids.insert(batch.token_ids.end(), f.input_word_ids.begin(), f.input_word_ids.end());
        for (int64_t j = 0; j < cfg.seq_len; ++j)
            batch.token_mask[i * cfg.seq_len + j] = static_cast<double>(f.input_mask[static_cast<size_t>(j)]);
    }
    return batch;
}

int vision_encode(Tape& tape, Bundle& b, int images_node, const ForwardMode& mode) {
    const ModelConfig& cfg = b.config;
    const Tensor& img = tape.val(images_node);
    require_rank(img, 4, "vision input");
    if (img.shape[1] != 1 || img.shape[2] != cfg.image_height || img.shape[3] != cfg.image_width)
        throw ShapeError("vision input " + img.shape_str() + " does not match configured " +
                         std::to_string(cfg.image_height) + "x" + std::to_string(cfg.image_width));

    int x = tape.conv2d(images_node, tape.param(b.params, b.params.find("vision.stem.conv")), 1, 1);
    for (size_t s = 0; s < cfg.vision_stages.size(); ++s) {
        const VisionStage& st = cfg.vision_stages[s];
        for (int64_t blk = 0; blk < st.blocks; ++blk) {
            const std::string p = stage_prefix(s, static_cast<size_t>(blk));
            const int stride = static_cast<int>(blk == 0 ? st.stride : 1);
            int h = bn_relu(tape, b, x, p + "bn1.", mode);
            h = tape.conv2d(h, tape.param(b.params, b.params.find(p + "conv1")), stride, 1);
            h = bn_relu(tape, b, h, p + "bn2.", mode);
            h = tape.conv2d(h, tape.param(b.params, b.params.find(p + "conv2")), 1, 1);
            int shortcut = x;
            const int proj = b.params.find(p + "proj");
            if (proj >= 0) shortcut = tape.conv2d(x, tape.param(b.params, proj), stride, 0);
            x = tape.add(shortcut, h);
        }
    }
    x = bn_relu(tape, b, x, "vision.final_bn.", mode);
    x = tape.avg_pool_grid(x, cfg.pool_grid_h, cfg.pool_grid_w);
    return tape.grid_to_sequence(x);  // (N, gh*gw, C)
}

int text_encode(Tape& tape, Bundle& b, const Batch& batch, const ForwardMode& mode) {
    const ModelConfig& cfg = b.config;
    ParamStore& ps = b.params;
    const int64_t n = batch.size, L = cfg.seq_len;

    int x = tape.embedding(tape.param(ps, ps.find("text.emb.word")), batch.token_ids, n, L);
    x = tape.add_broadcast(x, tape.rows_head(tape.param(ps, ps.find("text.emb.pos")), L));
    x = tape.add_broadcast(x, tape.rows_head(tape.param(ps, ps.find("text.emb.type")), 1));

    const int mask = tape.constant(batch.token_mask);
    for (int64_t l = 0; l < cfg.text_layers; ++l) {
        const std::string p = "text.layer" + std::to_string(l) + ".";
        const int q = tape.linear(x, tape.param(ps, ps.find(p + "attn.wq")));
        const int k = tape.linear(x, tape.param(ps, ps.find(p + "attn.wk")));
        const int v = tape.linear(x, tape.param(ps, ps.find(p + "attn.wv")));
        int logits = tape.attention_logits(q, k, cfg.text_heads);
        if (cfg.head_mixing) logits = tape.head_mix(logits, tape.param(ps, ps.find(p + "attn.p_logit")));
        int w = tape.masked_softmax_keys(logits, mask);
        if (cfg.head_mixing) w = tape.head_mix(w, tape.param(ps, ps.find(p + "attn.p_weight")));
        int att = tape.attention_apply(w, v, cfg.text_heads);
        att = tape.linear(att, tape.param(ps, ps.find(p + "attn.wo")));
        x = tape.layer_norm(tape.add(x, att), tape.param(ps, ps.find(p + "ln1.gamma")),
                            tape.param(ps, ps.find(p + "ln1.beta")));
        const int gate = tape.linear(x, tape.param(ps, ps.find(p + "ffn.w_gate")));
        const int inner = tape.gelu(tape.linear(x, tape.param(ps, ps.find(p + "ffn.w_in"))));
        const int ff = tape.linear(tape.mul(inner, gate), tape.param(ps, ps.find(p + "ffn.w_out")));
        x = tape.layer_norm(tape.add(x, ff), tape.param(ps, ps.find(p + "ln2.gamma")),
                            tape.param(ps, ps.find(p + "ln2.beta")));
    }
    return x;  // (N, L, d)
}

namespace {

int cross_attend(Tape& tape, ParamStore& ps, const std::string& prefix, int query_seq, int key_seq,
                 int query_mask, int key_mask) {
    const int q = tape.linear(query_seq, tape.param(ps, ps.find(prefix + "wq")));
    const int k = tape.linear(key_seq, tape.param(ps, ps.find(prefix + "wk")));
    const int v = tape.linear(key_seq, tape.param(ps, ps.find(prefix + "wv")));
    const int logits = tape.attention_logits(q, k, 1);
    const int w = tape.masked_softmax_keys(logits, key_mask);
    int att = tape.attention_apply(w, v, 1);
    att = tape.linear(att, tape.param(ps, ps.find(prefix + "wo")));
    return tape.masked_mean_rows(att, query_mask);  // pooled over valid query rows
}

}  // namespace

int forward_logits(Tape& tape, Bundle& b, const Batch& batch, const ForwardMode& mode) {
    const ModelConfig& cfg = b.config;
    ParamStore& ps = b.params;
    Rng* rng = mode.training ? mode.dropout_rng : nullptr;
    const double rate = mode.training ? cfg.dropout : 0.0;

    std::vector<int> features;
    int visual_seq = -1, text_seq = -1;

    if (cfg.modality != Modality::kTextOnly) {
        visual_seq = vision_encode(tape, b, tape.constant(batch.images), mode);
        const int pooled = tape.mean_axis1(visual_seq);
        int pv = tape.linear(pooled, tape.param(ps, ps.find("proj.visual.w")),
                             tape.param(ps, ps.find("proj.visual.b")));
        pv = tape.dropout(pv, rate, mode.training, rng);
        features.push_back(pv);
    }
    if (cfg.modality != Modality::kImageOnly) {
        text_seq = text_encode(tape, b, batch, mode);
        const int cls = tape.row_select(text_seq, 0);
        int pt = tape.linear(cls, tape.param(ps, ps.find("proj.text.w")),
                             tape.param(ps, ps.find("proj.text.b")));
        pt = tape.dropout(pt, rate, mode.training, rng);
        features.push_back(pt);
    }
    if (cfg.modality == Modality::kMultimodal) {
        const int token_mask = tape.constant(batch.token_mask);
        const int visual_mask =
            tape.constant(Tensor::full({batch.size, cfg.visual_sequence_len()}, 1.0));
        features.push_back(
            cross_attend(tape, ps, "cross.", text_seq, visual_seq, token_mask, visual_mask));
        if (cfg.bidirectional_cross_attention)
            features.push_back(
                cross_attend(tape, ps, "cross_rev.", visual_seq, text_seq, visual_mask, token_mask));
    }

    const int feats = features.size() == 1 ? features[0] : tape.concat_lastdim(features);
    return tape.linear(feats, tape.param(ps, ps.find("head.w")), tape.param(ps, ps.find("head.b")));
}

Tensor predict_probs(Bundle& b, const Batch& batch) {
    Tape tape;
    const int logits = forward_logits(tape, b, batch, ForwardMode{});
    const int probs = tape.softmax_lastdim(logits);
    return tape.val(probs);
}

std::vector<std::string> level1_class_labels() { return {"Chapters", "NonChapters"}; }

void HierarchicalClassifier::validate() const {
    if (level1.config.class_count != 2)
        throw ConfigError("level-1 bundle must have exactly 2 classes");
    const auto expect = Taxonomy::standard().non_chapter_labels();
    if (level2.class_labels != expect)
        throw ConfigError("level-2 bundle class list must be the 12 non-chapter labels in taxonomy order");
}

std::vector<HierarchicalPrediction> hierarchical_predict(
    HierarchicalClassifier& clf, const std::vector<const PageRecord*>& pages) {
    clf.validate();
    std::vector<HierarchicalPrediction> out(pages.size());
    if (pages.empty()) return out;
    const Taxonomy& tax = Taxonomy::standard();

    const Batch b1 = make_batch(pages, clf.level1);
    const Tensor p1 = predict_probs(clf.level1, b1);
    std::vector<const PageRecord*> routed;
    std::vector<size_t> routed_idx;
    for (size_t i = 0; i < pages.size(); ++i) {
        HierarchicalPrediction& pred = out[i];
        pred.level1_probs = {p1[static_cast<int64_t>(i) * 2], p1[static_cast<int64_t>(i) * 2 + 1]};
        if (pred.level1_probs[0] >= pred.level1_probs[1]) {  // tie goes to the lower index
            pred.label = tax.chapters_index();
        } else {
            routed.push_back(pages[i]);
            routed_idx.push_back(i);
        }
    }
    if (!routed.empty()) {
        const Batch b2 = make_batch(routed, clf.level2);
        const Tensor p2 = predict_probs(clf.level2, b2);
        const int64_t k = clf.level2.config.class_count;
        for (size_t r = 0; r < routed.size(); ++r) {
            HierarchicalPrediction& pred = out[routed_idx[r]];
            pred.level2_probs.assign(p2.data() + static_cast<int64_t>(r) * k,
                                     p2.data() + static_cast<int64_t>(r + 1) * k);
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (pred.level2_probs[static_cast<size_t>(j)] >
                    pred.level2_probs[static_cast<size_t>(best)])
                    best = j;
            pred.label = tax.index_of(clf.level2.class_labels[static_cast<size_t>(best)]);
        }
    }
    return out;
}

}  // namespace etdpc::model
