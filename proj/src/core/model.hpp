#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "records.hpp"
#include "tape.hpp"
#include "vocab.hpp"

namespace etdpc::model {

struct VisionStage {
    int64_t channels = 16;
    int64_t blocks = 2;
    int64_t stride = 1;  // applied by the first block of the stage
};

enum class Modality { kMultimodal, kImageOnly, kTextOnly };

const char* modality_name(Modality m);
Modality modality_from(const std::string& name);

// Architecture settings. Defaults are the desk-scale configuration; the
// full-page 224x224 / large-encoder settings stay expressible here.
struct ModelConfig {
    int32_t image_height = 64;
    int32_t image_width = 64;
    std::vector<VisionStage> vision_stages{{16, 2, 1}, {32, 2, 2}, {64, 2, 2}};
    int64_t pool_grid_h = 2;
    int64_t pool_grid_w = 2;

    int64_t text_layers = 2;
    int64_t text_heads = 4;
    int64_t text_dim = 64;
    int64_t text_ffn_dim = 128;
    int64_t seq_len = 128;
    bool head_mixing = true;  // talking-heads; false = plain multi-head attention

    int64_t projection_dim = 256;
    double dropout = 0.8;
    int64_t cross_attention_dim = 64;
    bool bidirectional_cross_attention = false;
    Modality modality = Modality::kMultimodal;

    int64_t class_count = 13;
    int64_t vocab_size = 0;  // filled in when a bundle is built

    void validate() const;
    int64_t visual_channels() const { return vision_stages.empty() ? 0 : vision_stages.back().channels; }
    int64_t visual_sequence_len() const { return pool_grid_h * pool_grid_w; }
    int64_t head_input_dim() const;
};

// One trained (or trainable) classifier: parameters + config + the vocabulary
// it was built with + the class label order of its head.
struct Bundle {
    ModelConfig config;
    corpus::Vocabulary vocab;
    std::vector<std::string> class_labels;
    nn::ParamStore params;
};

Bundle make_bundle(ModelConfig config, corpus::Vocabulary vocab, std::vector<std::string> class_labels,
                   uint64_t init_seed);

struct Batch {
    int64_t size = 0;
    nn::Tensor images;               // (N,1,H,W), intensities scaled to [0,1]
    std::vector<int32_t> token_ids;  // N * seq_len
    nn::Tensor token_mask;           // (N, seq_len)
    std::vector<int32_t> labels;     // class indices in bundle order (may be empty)
};

Batch make_batch(const std::vector<const corpus::PageRecord*>& pages, const Bundle& bundle);

struct ForwardMode {
    bool training = false;
    Rng* dropout_rng = nullptr;
};

// Builds the class-logit node for a batch on the given tape. Vision stream:
// stem conv + pre-activation residual stages + adaptive pool flattened to a
// W*H sequence. Text stream: embeddings + transformer layers with talking-
// heads self-attention and gated-GELU feed-forward, pad keys masked. Fusion:
// 256-d projections of the pooled visual sequence and the CLS vector, plus a
// text-queries/visual-keys cross-attention vector, concatenated into the head.
int forward_logits(nn::Tape& tape, Bundle& bundle, const Batch& batch, const ForwardMode& mode);

// Inference-mode forward + softmax. Rows sum to one.
nn::Tensor predict_probs(Bundle& bundle, const Batch& batch);

// Standalone encoder entry points (the fusion path above reuses them).
int vision_encode(nn::Tape& tape, Bundle& bundle, int images_node, const ForwardMode& mode);
int text_encode(nn::Tape& tape, Bundle& bundle, const Batch& batch, const ForwardMode& mode);

struct HierarchicalClassifier {
    Bundle level1;  // 2 classes: {Chapters, NonChapters}
    Bundle level2;  // 12 classes: taxonomy order minus Chapters

    void validate() const;
};

struct HierarchicalPrediction {
    int label = 0;  // taxonomy index
    std::vector<double> level1_probs;
    std::vector<double> level2_probs;  // empty when routed to Chapters
};

// Level-1 argmax CHAPTER -> Chapters; otherwise the level-2 argmax over the 12
// non-chapter classes. Ties break toward the lowest taxonomy index.
std::vector<HierarchicalPrediction> hierarchical_predict(
    HierarchicalClassifier& clf, const std::vector<const corpus::PageRecord*>& pages);

std::vector<std::string> level1_class_labels();

}  // namespace etdpc::model
