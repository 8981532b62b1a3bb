#pragma once

#include <cstdint>
#include <vector>

#include "params.hpp"
#include "tensor.hpp"

namespace etdpc::nn {

struct AdamConfig {
    double learning_rate = 0.001;
    double weight_decay = 0.004;
    double epsilon = 1e-7;
    double clip_value = 2.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
};

// Adam with elementwise gradient clipping to [-clip, clip] applied before the
// moment updates, and decoupled weight decay applied outside the moments.
class Adam {
public:
    Adam() = default;
    Adam(const ParamStore& ps, AdamConfig cfg) { reset(ps, cfg); }

    void reset(const ParamStore& ps, AdamConfig cfg) {
        cfg_ = cfg;
        step_count_ = 0;
        m_.clear();
        v_.clear();
        for (const auto& e : ps.entries()) {
            m_.push_back(Tensor::zeros(e.value.shape));
            v_.push_back(Tensor::zeros(e.value.shape));
        }
    }

    // One update over every trainable entry, reading grads in place.
    void step(ParamStore& ps) {
        if (m_.size() != ps.size()) throw ShapeError("adam: optimizer state does not match parameters");
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (size_t p = 0; p < ps.size(); ++p) {
            auto& e = ps.entries()[p];
            if (!e.trainable) continue;
            Tensor& m = m_[p];
            Tensor& v = v_[p];
            for (int64_t i = 0; i < e.value.numel(); ++i) {
                double gi = e.grad[i];
                if (gi > cfg_.clip_value) gi = cfg_.clip_value;
                if (gi < -cfg_.clip_value) gi = -cfg_.clip_value;
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                const double theta = e.value[i];
                e.value[i] = theta - cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon) -
                             cfg_.learning_rate * cfg_.weight_decay * theta;
            }
        }
    }

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void set_step_count(int64_t t) { step_count_ = t; }

private:
    AdamConfig cfg_;
    int64_t step_count_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace etdpc::nn
