#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace etdpc::nn {

// Named parameter registry. Registration order is fixed and defines the
// checkpoint layout, so identical construction yields identical files.
// Non-trainable entries (batch-norm running stats) are checkpointed but
// excluded from gradients and optimizer updates.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        bool trainable = true;
    };

    int add(const std::string& name, Tensor init, bool trainable = true) {
        if (index_.count(name)) throw InternalError("duplicate parameter name: " + name);
        const int id = static_cast<int>(entries_.size());
        Entry e;
        e.name = name;
        e.grad = Tensor::zeros(init.shape);
        e.value = std::move(init);
        e.trainable = trainable;
        entries_.push_back(std::move(e));
        index_.emplace(name, id);
        return id;
    }

    Entry& at(int id) { return entries_.at(static_cast<size_t>(id)); }
    const Entry& at(int id) const { return entries_.at(static_cast<size_t>(id)); }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    size_t size() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad() {
        for (auto& e : entries_) std::fill(e.grad.v.begin(), e.grad.v.end(), 0.0);
    }

    int64_t trainable_count() const {
        int64_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.value.numel();
        return n;
    }

    // Initializers. Fan-in-scaled normal keeps activation variance stable from
    // the first step; zeros on a residual path's closing conv makes each block
    // start as the identity.
    static Tensor fan_in_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
        Tensor t(std::move(shape));
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
        for (auto& x : t.v) x = rng.gaussian(0.0, std);
        return t;
    }

    static Tensor identity(int64_t n) {
        Tensor t({n, n});
        for (int64_t i = 0; i < n; ++i) t.v[static_cast<size_t>(i * n + i)] = 1.0;
        return t;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace etdpc::nn
