#include "etdpc/etdpc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "checkpoint.hpp"
#include "pipeline.hpp"

namespace {

thread_local std::string t_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

using CommandFn = nlohmann::json (*)(const etdpc::pipeline::RunConfig&);

etdpc_status run_command(CommandFn fn, const char* options_json, char** summary_json) {
    t_last_error.clear();
    if (summary_json) *summary_json = nullptr;
    if (!options_json) {
        t_last_error = "options_json must not be null";
        return ETDPC_ERROR_CONFIG;
    }
    try {
        const auto cfg = etdpc::pipeline::run_config_from_string(options_json);
        const nlohmann::json summary = fn(cfg);
        if (summary_json) *summary_json = dup_string(summary.dump());
        return ETDPC_OK;
    } catch (const etdpc::ConfigError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_CONFIG;
    } catch (const etdpc::DataError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_DATA;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_RUNTIME;
    }
}

}  // namespace

struct etdpc_model {
    std::optional<etdpc::model::Bundle> one_level;
    std::optional<etdpc::model::HierarchicalClassifier> hierarchical;
};

extern "C" {

const char* etdpc_version(void) { return "1.0.0"; }

const char* etdpc_last_error(void) { return t_last_error.c_str(); }

void etdpc_string_free(char* s) { std::free(s); }

etdpc_status etdpc_prepare(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_prepare, options_json, summary_json);
}

etdpc_status etdpc_augment(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_augment, options_json, summary_json);
}

etdpc_status etdpc_train(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_train, options_json, summary_json);
}

etdpc_status etdpc_evaluate(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_evaluate, options_json, summary_json);
}

etdpc_status etdpc_ablate(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_ablate, options_json, summary_json);
}

etdpc_status etdpc_sweep(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_sweep, options_json, summary_json);
}

etdpc_status etdpc_predict(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_predict, options_json, summary_json);
}

etdpc_status etdpc_end_to_end(const char* options_json, char** summary_json) {
    return run_command(&etdpc::pipeline::cmd_end_to_end, options_json, summary_json);
}

etdpc_status etdpc_model_open(const char* checkpoint_path, const char* level2_path_or_null,
                              etdpc_model** out_model) {
    t_last_error.clear();
    if (out_model) *out_model = nullptr;
    if (!checkpoint_path || !out_model) {
        t_last_error = "checkpoint_path and out_model must not be null";
        return ETDPC_ERROR_CONFIG;
    }
    try {
        auto handle = std::make_unique<etdpc_model>();
        if (level2_path_or_null) {
            handle->hierarchical.emplace(etdpc::model::HierarchicalClassifier{
                etdpc::model::load_bundle(checkpoint_path).bundle,
                etdpc::model::load_bundle(level2_path_or_null).bundle});
            handle->hierarchical->validate();
        } else {
            handle->one_level.emplace(etdpc::model::load_bundle(checkpoint_path).bundle);
        }
        *out_model = handle.release();
        return ETDPC_OK;
    } catch (const etdpc::ConfigError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_CONFIG;
    } catch (const etdpc::DataError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_DATA;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_RUNTIME;
    }
}

void etdpc_model_close(etdpc_model* model) { delete model; }

etdpc_status etdpc_model_classify(etdpc_model* model, const uint8_t* image, int32_t height,
                                  int32_t width, const char* ocr_json, size_t ocr_json_len,
                                  char** result_json) {
    t_last_error.clear();
    if (result_json) *result_json = nullptr;
    if (!model || !image || !result_json) {
        t_last_error = "model, image and result_json must not be null";
        return ETDPC_ERROR_CONFIG;
    }
    try {
        if (height < 32 || width < 32) throw etdpc::DataError("page image must be at least 32x32");
        etdpc::corpus::PageRecord rec;
        rec.etd_id = "api";
        rec.page_number = 1;
        rec.image.height = height;
        rec.image.width = width;
        rec.image.px.assign(image, image + static_cast<size_t>(height) * static_cast<size_t>(width));
        if (ocr_json && ocr_json_len > 0) {
            auto parsed = etdpc::corpus::parse_ocr_json(std::string(ocr_json, ocr_json_len));
            rec.blocks = std::move(parsed.blocks);
            rec.full_text = std::move(parsed.full_text);
        }
        nlohmann::json out;
        const auto& tax = etdpc::corpus::Taxonomy::standard();
        if (model->hierarchical) {
            const auto preds = etdpc::model::hierarchical_predict(*model->hierarchical, {&rec});
            out["label"] = tax.label(preds[0].label);
            out["level1_probs"] = preds[0].level1_probs;
            out["level2_probs"] =
                preds[0].level2_probs.empty() ? nlohmann::json(nullptr)
                                              : nlohmann::json(preds[0].level2_probs);
        } else {
            auto& bundle = *model->one_level;
            const auto batch = etdpc::model::make_batch({&rec}, bundle);
            const auto probs = etdpc::model::predict_probs(bundle, batch);
            int best = 0;
            for (int64_t j = 1; j < bundle.config.class_count; ++j)
                if (probs[j] > probs[best]) best = static_cast<int>(j);
            out["label"] = bundle.class_labels[static_cast<size_t>(best)];
            out["probs"] = std::vector<double>(probs.data(), probs.data() + bundle.config.class_count);
        }
        *result_json = dup_string(out.dump());
        return ETDPC_OK;
    } catch (const etdpc::ConfigError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_CONFIG;
    } catch (const etdpc::DataError& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_DATA;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return ETDPC_ERROR_RUNTIME;
    }
}

}  // extern "C"
