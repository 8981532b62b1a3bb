#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "params.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace etdpc::nn {

/// Reverse-mode tape. Every op records its value and a closure that routes
/// incoming gradients to its parents; backward() replays closures in reverse
/// creation order. One tape per batch step; tapes are independent, so batches
/// can be evaluated concurrently. Heavy ops parallelize internally over
/// disjoint outputs, which keeps results bit-identical for any thread count;
/// the single cross-sample reduction (conv weight grads) uses per-thread
/// buffers combined in thread order under a static schedule.
class Tape {
public:
    int constant(Tensor v);
    int input(Tensor v);                   // differentiable leaf; grad kept on the node
    int param(ParamStore& ps, int id);     // leaf bound to a store entry; grads accumulate there

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(int id) const;      // valid after backward(), for input/interior nodes

    // Elementwise and linear algebra.
    int add(int a, int b);
    int add_broadcast(int a, int b);       // b tiled across the leading dims of a
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int matmul(int a, int b);              // (m,k) x (k,n)
    int linear(int x, int w, int bias = -1);  // (...,k) x (k,n) (+ bias row)
    int relu(int x);
    int gelu(int x);                       // exact-Phi form
    int softmax_lastdim(int x);
    int layer_norm(int x, int gamma, int beta, double eps = 1e-6);
    int dropout(int x, double rate, bool training, Rng* rng);
    int reshape(int x, std::vector<int64_t> shape);
    int concat_lastdim(const std::vector<int>& xs);

    // Sequence helpers.
    int embedding(int table, const std::vector<int32_t>& ids, int64_t n, int64_t l);
    int rows_head(int x, int64_t n);       // first n rows of a 2-D tensor
    int row_select(int x, int64_t row);    // (N,L,d) -> (N,d), fixed position
    int masked_mean_rows(int x, int mask); // (N,L,d),(N,L) -> (N,d) over mask==1 rows
    int mean_axis1(int x);                 // (N,L,d) -> (N,d)

    // Attention building blocks. Sequences carry heads packed in the last dim.
    int attention_logits(int q, int k, int64_t heads);        // -> (N,h,Lq,Lk), scaled 1/sqrt(dh)
    int head_mix(int t, int p);                                // (N,h,Lq,Lk),(h,h2) -> (N,h2,Lq,Lk)
    int masked_softmax_keys(int logits, int key_mask);         // masked keys get exactly zero weight
    int attention_apply(int w, int v, int64_t heads);          // (N,h,Lq,Lk),(N,Lk,h*dh) -> (N,Lq,h*dh)

    // Vision building blocks.
    int conv2d(int x, int w, int stride, int pad);             // (N,Ci,H,W),(Co,Ci,kh,kw)
    int batch_norm2d(int x, int gamma, int beta, ParamStore& ps, int running_mean, int running_var,
                     bool training, double momentum = 0.1, double eps = 1e-5);
    int avg_pool_grid(int x, int64_t gh, int64_t gw);          // adaptive average pool
    int grid_to_sequence(int x);                               // (N,C,gh,gw) -> (N,gh*gw,C)

    // Losses / reductions.
    int focal_loss(int logits, const std::vector<int32_t>& labels, double gamma);  // scalar mean
    int mean_all(int x);
    int weighted_sum(int x, Tensor weights);   // scalar projection, used by the gradient checker

    void backward(int node);  // node must be scalar

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void()> backprop;  // empty for leaves/constants
    };

    int push(Tensor value, bool needs_grad, std::function<void()> backprop = {});
    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    Tensor& g(int id);

    std::vector<Node> nodes_;
    std::vector<std::pair<int, std::pair<ParamStore*, int>>> param_bindings_;
};

}  // namespace etdpc::nn
