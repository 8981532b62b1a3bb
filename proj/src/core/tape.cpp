#include "tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace etdpc::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

constexpr double kMaskBias = -1e30;

int64_t rows_of(const Tensor& t) { return t.numel() / t.shape.back(); }

double phi_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014326779399460599344; }
double phi_cdf(double x) { return 0.5 * (1.0 + std::erf(x * 0.7071067811865475244008443621048)); }

int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace

int Tape::push(Tensor value, bool needs_grad, std::function<void()> backprop) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::g(int id) {
    Node& n = node(id);
    if (n.grad.shape.empty() && !n.value.shape.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

const Tensor& Tape::grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

int Tape::constant(Tensor v) { return push(std::move(v), false); }

int Tape::input(Tensor v) { return push(std::move(v), true); }

int Tape::param(ParamStore& ps, int id) {
    const int nid = push(ps.at(id).value, ps.at(id).trainable);
    if (ps.at(id).trainable) param_bindings_.push_back({nid, {&ps, id}});
    return nid;
}

int Tape::add(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw ShapeError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out(ta.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] + tb[i];
    const bool ng = needs(a) || needs(b);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, a, b] {
            const Tensor& go = grad(id);
            if (needs(a)) {
                Tensor& ga = g(a);
                for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
            }
            if (needs(b)) {
                Tensor& gb = g(b);
                for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
            }
        };
    return id;
}

int Tape::add_broadcast(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    const int64_t nb = tb.numel();
    if (nb == 0 || ta.numel() % nb != 0)
        throw ShapeError("add_broadcast: " + tb.shape_str() + " does not tile " + ta.shape_str());
    Tensor out(ta.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] + tb[i % nb];
    const bool ng = needs(a) || needs(b);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, a, b, nb] {
            const Tensor& go = grad(id);
            if (needs(a)) {
                Tensor& ga = g(a);
                for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
            }
            if (needs(b)) {
                Tensor& gb = g(b);
                for (int64_t i = 0; i < go.numel(); ++i) gb[i % nb] += go[i];
            }
        };
    return id;
}

int Tape::sub(int a, int b) { return add(a, scale(b, -1.0)); }

int Tape::mul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw ShapeError("mul: shape mismatch");
    Tensor out(ta.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * tb[i];
    const bool ng = needs(a) || needs(b);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, a, b] {
            const Tensor& go = grad(id);
            const Tensor& ta = val(a);
            const Tensor& tb = val(b);
            if (needs(a)) {
                Tensor& ga = g(a);
                for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * tb[i];
            }
            if (needs(b)) {
                Tensor& gb = g(b);
                for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * ta[i];
            }
        };
    return id;
}

int Tape::scale(int a, double c) {
    const Tensor& ta = val(a);
    Tensor out(ta.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * c;
    const bool ng = needs(a);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, a, c] {
            const Tensor& go = grad(id);
            Tensor& ga = g(a);
            for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * c;
        };
    return id;
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_rank(ta, 2, "matmul lhs");
    require_rank(tb, 2, "matmul rhs");
    if (ta.shape[1] != tb.shape[0])
        throw ShapeError("matmul: inner dims " + ta.shape_str() + " x " + tb.shape_str());
    const int64_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() = CMapM(ta.data(), m, k) * CMapM(tb.data(), k, n);
    const bool ng = needs(a) || needs(b);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, a, b, m, k, n] {
            const Tensor& go = grad(id);
            CMapM gom(go.data(), m, n);
            if (needs(a))
                MapM(g(a).data(), m, k).noalias() += gom * CMapM(val(b).data(), k, n).transpose();
            if (needs(b))
                MapM(g(b).data(), k, n).noalias() += CMapM(val(a).data(), m, k).transpose() * gom;
        };
    return id;
}

int Tape::linear(int x, int w, int bias) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    require_rank(tw, 2, "linear weight");
    if (tx.shape.empty() || tx.shape.back() != tw.shape[0])
        throw ShapeError("linear: input " + tx.shape_str() + " vs weight " + tw.shape_str());
    const int64_t k = tw.shape[0], n = tw.shape[1], r = rows_of(tx);
    std::vector<int64_t> oshape = tx.shape;
    oshape.back() = n;
    Tensor out(oshape);
    MapM om(out.data(), r, n);
    om.noalias() = CMapM(tx.data(), r, k) * CMapM(tw.data(), k, n);
    if (bias >= 0) {
        const Tensor& tb = val(bias);
        require_shape(tb, {n}, "linear bias");
        om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tb.data(), n);
    }
    const bool ng = needs(x) || needs(w) || (bias >= 0 && needs(bias));
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, w, bias, r, k, n] {
            const Tensor& go = grad(id);
            CMapM gom(go.data(), r, n);
            if (needs(x))
                MapM(g(x).data(), r, k).noalias() += gom * CMapM(val(w).data(), k, n).transpose();
            if (needs(w))
                MapM(g(w).data(), k, n).noalias() += CMapM(val(x).data(), r, k).transpose() * gom;
            if (bias >= 0 && needs(bias))
                Eigen::Map<Eigen::RowVectorXd>(g(bias).data(), n) += gom.colwise().sum();
        };
    return id;
}

int Tape::relu(int x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = tx[i] > 0.0 ? tx[i] : 0.0;
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x] {
            const Tensor& go = grad(id);
            const Tensor& tx = val(x);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < go.numel(); ++i)
                if (tx[i] > 0.0) gx[i] += go[i];
        };
    return id;
}

int Tape::gelu(int x) {
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = tx[i] * phi_cdf(tx[i]);
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x] {
            const Tensor& go = grad(id);
            const Tensor& tx = val(x);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < go.numel(); ++i)
                gx[i] += go[i] * (phi_cdf(tx[i]) + tx[i] * phi_pdf(tx[i]));
        };
    return id;
}

int Tape::softmax_lastdim(int x) {
    const Tensor& tx = val(x);
    const int64_t d = tx.shape.back(), r = rows_of(tx);
    Tensor out(tx.shape);
    for (int64_t i = 0; i < r; ++i) {
        const double* row = tx.data() + i * d;
        double* orow = out.data() + i * d;
        double mx = row[0];
        for (int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < d; ++j) s += orow[j] = std::exp(row[j] - mx);
        for (int64_t j = 0; j < d; ++j) orow[j] /= s;
    }
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, r, d] {
            const Tensor& go = grad(id);
            const Tensor& y = val(id);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < r; ++i) {
                const double* yr = y.data() + i * d;
                const double* gr = go.data() + i * d;
                double dot = 0.0;
                for (int64_t j = 0; j < d; ++j) dot += yr[j] * gr[j];
                double* gxr = gx.data() + i * d;
                for (int64_t j = 0; j < d; ++j) gxr[j] += yr[j] * (gr[j] - dot);
            }
        };
    return id;
}

int Tape::layer_norm(int x, int gamma, int beta, double eps) {
    const Tensor& tx = val(x);
    const int64_t d = tx.shape.back(), r = rows_of(tx);
    require_shape(val(gamma), {d}, "layer_norm gamma");
    require_shape(val(beta), {d}, "layer_norm beta");
    Tensor out(tx.shape);
    Tensor xhat(tx.shape);
    std::vector<double> inv_sigma(static_cast<size_t>(r));
    const double* gm = val(gamma).data();
    const double* bt = val(beta).data();
    for (int64_t i = 0; i < r; ++i) {
        const double* row = tx.data() + i * d;
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(i)] = is;
        double* xh = xhat.data() + i * d;
        double* orow = out.data() + i * d;
        for (int64_t j = 0; j < d; ++j) {
            xh[j] = (row[j] - mu) * is;
            orow[j] = gm[j] * xh[j] + bt[j];
        }
    }
    const bool ng = needs(x) || needs(gamma) || needs(beta);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, gamma, beta, r, d, xhat = std::move(xhat),
                             inv_sigma = std::move(inv_sigma)] {
            const Tensor& go = grad(id);
            const double* gm = val(gamma).data();
            for (int64_t i = 0; i < r; ++i) {
                const double* gr = go.data() + i * d;
                const double* xh = xhat.data() + i * d;
                if (needs(gamma)) {
                    Tensor& gg = g(gamma);
                    for (int64_t j = 0; j < d; ++j) gg[j] += gr[j] * xh[j];
                }
                if (needs(beta)) {
                    Tensor& gb = g(beta);
                    for (int64_t j = 0; j < d; ++j) gb[j] += gr[j];
                }
                if (needs(x)) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t j = 0; j < d; ++j) {
                        const double dxh = gr[j] * gm[j];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    const double is = inv_sigma[static_cast<size_t>(i)];
                    Tensor& gx = g(x);
                    double* gxr = gx.data() + i * d;
                    for (int64_t j = 0; j < d; ++j)
                        gxr[j] += is * (gr[j] * gm[j] - m1 - xh[j] * m2);
                }
            }
        };
    return id;
}

int Tape::dropout(int x, double rate, bool training, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) {
        if (rate != 0.0) throw ConfigError("dropout rate must lie in [0,1)");
    }
    if (!training || rate == 0.0) return x;  // identity in inference mode at every rate
    if (!rng) throw InternalError("dropout in training mode requires an rng stream");
    const Tensor& tx = val(x);
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    std::vector<uint8_t> mask(static_cast<size_t>(tx.numel()));
    Tensor out(tx.shape);
    for (int64_t i = 0; i < tx.numel(); ++i) {
        const bool k = rng->uniform() < keep;
        mask[static_cast<size_t>(i)] = k;
        out[i] = k ? tx[i] * inv_keep : 0.0;
    }
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, inv_keep, mask = std::move(mask)] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < go.numel(); ++i)
                if (mask[static_cast<size_t>(i)]) gx[i] += go[i] * inv_keep;
        };
    return id;
}

int Tape::reshape(int x, std::vector<int64_t> shape) {
    const Tensor& tx = val(x);
    if (Tensor::numel_of(shape) != tx.numel())
        throw ShapeError("reshape: element count mismatch for " + tx.shape_str());
    Tensor out(std::move(shape), tx.v);
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
        };
    return id;
}

int Tape::concat_lastdim(const std::vector<int>& xs) {
    if (xs.empty()) throw ShapeError("concat_lastdim: no inputs");
    const Tensor& first = val(xs[0]);
    const int64_t r = rows_of(first);
    int64_t total = 0;
    bool ng = false;
    for (int x : xs) {
        const Tensor& t = val(x);
        if (rows_of(t) != r) throw ShapeError("concat_lastdim: leading dims differ");
        total += t.shape.back();
        ng = ng || needs(x);
    }
    std::vector<int64_t> oshape = first.shape;
    oshape.back() = total;
    Tensor out(oshape);
    int64_t off = 0;
    for (int x : xs) {
        const Tensor& t = val(x);
        const int64_t d = t.shape.back();
        for (int64_t i = 0; i < r; ++i)
            std::copy(t.data() + i * d, t.data() + (i + 1) * d, out.data() + i * total + off);
        off += d;
    }
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, xs, r, total] {
            const Tensor& go = grad(id);
            int64_t off = 0;
            for (int x : xs) {
                const int64_t d = val(x).shape.back();
                if (needs(x)) {
                    Tensor& gx = g(x);
                    for (int64_t i = 0; i < r; ++i)
                        for (int64_t j = 0; j < d; ++j) gx[i * d + j] += go[i * total + off + j];
                }
                off += d;
            }
        };
    return id;
}

int Tape::embedding(int table, const std::vector<int32_t>& ids, int64_t n, int64_t l) {
    const Tensor& tt = val(table);
    require_rank(tt, 2, "embedding table");
    if (static_cast<int64_t>(ids.size()) != n * l) throw ShapeError("embedding: id count mismatch");
    const int64_t vcount = tt.shape[0], d = tt.shape[1];
    for (int32_t idx : ids)
        if (idx < 0 || idx >= vcount)
            throw DataError("token id " + std::to_string(idx) + " outside vocabulary of size " +
                            std::to_string(vcount));
    Tensor out({n, l, d});
    for (int64_t i = 0; i < n * l; ++i)
        std::copy(tt.data() + ids[static_cast<size_t>(i)] * d, tt.data() + (ids[static_cast<size_t>(i)] + 1) * d,
                  out.data() + i * d);
    const bool ng = needs(table);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, table, ids, n, l, d] {
            const Tensor& go = grad(id);
            Tensor& gt = g(table);
            for (int64_t i = 0; i < n * l; ++i) {
                double* dst = gt.data() + ids[static_cast<size_t>(i)] * d;
                const double* src = go.data() + i * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    return id;
}

int Tape::rows_head(int x, int64_t n) {
    const Tensor& tx = val(x);
    require_rank(tx, 2, "rows_head");
    if (n > tx.shape[0]) throw ShapeError("rows_head: asked for more rows than present");
    const int64_t d = tx.shape[1];
    Tensor out({n, d});
    std::copy(tx.data(), tx.data() + n * d, out.data());
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, n, d] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < n * d; ++i) gx[i] += go[i];
        };
    return id;
}

int Tape::row_select(int x, int64_t row) {
    const Tensor& tx = val(x);
    require_rank(tx, 3, "row_select");
    const int64_t n = tx.shape[0], l = tx.shape[1], d = tx.shape[2];
    if (row < 0 || row >= l) throw ShapeError("row_select: position out of range");
    Tensor out({n, d});
    for (int64_t i = 0; i < n; ++i)
        std::copy(tx.data() + (i * l + row) * d, tx.data() + (i * l + row + 1) * d, out.data() + i * d);
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, n, l, d, row] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < n; ++i) {
                double* dst = gx.data() + (i * l + row) * d;
                const double* src = go.data() + i * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    return id;
}

int Tape::masked_mean_rows(int x, int mask) {
    const Tensor& tx = val(x);
    const Tensor& tm = val(mask);
    require_rank(tx, 3, "masked_mean_rows");
    const int64_t n = tx.shape[0], l = tx.shape[1], d = tx.shape[2];
    require_shape(tm, {n, l}, "masked_mean_rows mask");
    Tensor out({n, d});
    std::vector<double> counts(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < n; ++i) {
        double c = 0.0;
        for (int64_t j = 0; j < l; ++j) c += tm[i * l + j];
        if (c <= 0.0) throw ShapeError("masked_mean_rows: a row has no unmasked positions");
        counts[static_cast<size_t>(i)] = c;
        for (int64_t j = 0; j < l; ++j) {
            if (tm[i * l + j] == 0.0) continue;
            const double* src = tx.data() + (i * l + j) * d;
            double* dst = out.data() + i * d;
            for (int64_t q = 0; q < d; ++q) dst[q] += src[q];
        }
        for (int64_t q = 0; q < d; ++q) out[i * d + q] /= c;
    }
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, mask, n, l, d, counts = std::move(counts)] {
            const Tensor& go = grad(id);
            const Tensor& tm = val(mask);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < n; ++i) {
                const double inv = 1.0 / counts[static_cast<size_t>(i)];
                for (int64_t j = 0; j < l; ++j) {
                    if (tm[i * l + j] == 0.0) continue;
                    double* dst = gx.data() + (i * l + j) * d;
                    const double* src = go.data() + i * d;
                    for (int64_t q = 0; q < d; ++q) dst[q] += src[q] * inv;
                }
            }
        };
    return id;
}

int Tape::mean_axis1(int x) {
    const Tensor& tx = val(x);
    require_rank(tx, 3, "mean_axis1");
    const int64_t n = tx.shape[0], l = tx.shape[1];
    Tensor ones({n, l});
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    return masked_mean_rows(x, constant(std::move(ones)));
}

int Tape::attention_logits(int q, int k, int64_t heads) {
    const Tensor& tq = val(q);
    const Tensor& tk = val(k);
    require_rank(tq, 3, "attention_logits queries");
    require_rank(tk, 3, "attention_logits keys");
    const int64_t n = tq.shape[0], lq = tq.shape[1], dm = tq.shape[2];
    const int64_t lk = tk.shape[1];
    if (tk.shape[0] != n || tk.shape[2] != dm)
        throw ShapeError("attention_logits: query/key shapes incompatible");
    if (heads <= 0 || dm % heads != 0) throw ShapeError("attention_logits: head count must divide width");
    const int64_t dh = dm / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out({n, heads, lq, lk});
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t i = 0; i < lq; ++i) {
                const double* qrow = tq.data() + (b * lq + i) * dm + h * dh;
                double* orow = out.data() + ((b * heads + h) * lq + i) * lk;
                for (int64_t j = 0; j < lk; ++j) {
                    const double* krow = tk.data() + (b * lk + j) * dm + h * dh;
                    double s = 0.0;
                    for (int64_t d = 0; d < dh; ++d) s += qrow[d] * krow[d];
                    orow[j] = s * scale;
                }
            }
    }
    const bool ng = needs(q) || needs(k);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, q, k, n, lq, lk, dm, heads, dh, scale] {
            const Tensor& go = grad(id);
            const Tensor& tq = val(q);
            const Tensor& tk = val(k);
            const bool nq = needs(q), nk = needs(k);
            Tensor* gq = nq ? &g(q) : nullptr;
            Tensor* gk = nk ? &g(k) : nullptr;
#pragma omp parallel for schedule(static)
            for (int64_t b = 0; b < n; ++b) {
                for (int64_t h = 0; h < heads; ++h)
                    for (int64_t i = 0; i < lq; ++i) {
                        const double* grow = go.data() + ((b * heads + h) * lq + i) * lk;
                        const double* qrow = tq.data() + (b * lq + i) * dm + h * dh;
                        double* gqrow = nq ? gq->data() + (b * lq + i) * dm + h * dh : nullptr;
                        for (int64_t j = 0; j < lk; ++j) {
                            const double gij = grow[j] * scale;
                            if (gij == 0.0) continue;
                            const double* krow = tk.data() + (b * lk + j) * dm + h * dh;
                            if (nq)
                                for (int64_t d = 0; d < dh; ++d) gqrow[d] += gij * krow[d];
                            if (nk) {
                                double* gkrow = gk->data() + (b * lk + j) * dm + h * dh;
                                for (int64_t d = 0; d < dh; ++d) gkrow[d] += gij * qrow[d];
                            }
                        }
                    }
            }
        };
    return id;
}

int Tape::head_mix(int t, int p) {
    const Tensor& tt = val(t);
    const Tensor& tp = val(p);
    require_rank(tt, 4, "head_mix input");
    require_rank(tp, 2, "head_mix matrix");
    const int64_t n = tt.shape[0], h = tt.shape[1], lq = tt.shape[2], lk = tt.shape[3];
    if (tp.shape[0] != h)
        throw ShapeError("head_mix: mixing matrix " + tp.shape_str() + " does not match " +
                         std::to_string(h) + " heads");
    const int64_t h2 = tp.shape[1];
    Tensor out({n, h2, lq, lk});
    const int64_t plane = lq * lk;
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        for (int64_t gdx = 0; gdx < h2; ++gdx) {
            double* dst = out.data() + (b * h2 + gdx) * plane;
            for (int64_t hh = 0; hh < h; ++hh) {
                const double w = tp[hh * h2 + gdx];
                if (w == 0.0) continue;
                const double* src = tt.data() + (b * h + hh) * plane;
                for (int64_t i = 0; i < plane; ++i) dst[i] += w * src[i];
            }
        }
    }
    const bool ng = needs(t) || needs(p);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, t, p, n, h, h2, plane] {
            const Tensor& go = grad(id);
            const Tensor& tt = val(t);
            const Tensor& tp = val(p);
            if (needs(t)) {
                Tensor& gt = g(t);
#pragma omp parallel for schedule(static)
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t hh = 0; hh < h; ++hh) {
                        double* dst = gt.data() + (b * h + hh) * plane;
                        for (int64_t gdx = 0; gdx < h2; ++gdx) {
                            const double w = tp[hh * h2 + gdx];
                            if (w == 0.0) continue;
                            const double* src = go.data() + (b * h2 + gdx) * plane;
                            for (int64_t i = 0; i < plane; ++i) dst[i] += w * src[i];
                        }
                    }
            }
            if (needs(p)) {
                Tensor& gp = g(p);
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t hh = 0; hh < h; ++hh)
                        for (int64_t gdx = 0; gdx < h2; ++gdx) {
                            const double* a = tt.data() + (b * h + hh) * plane;
                            const double* c = go.data() + (b * h2 + gdx) * plane;
                            double s = 0.0;
                            for (int64_t i = 0; i < plane; ++i) s += a[i] * c[i];
                            gp[hh * h2 + gdx] += s;
                        }
            }
        };
    return id;
}

int Tape::masked_softmax_keys(int logits, int key_mask) {
    const Tensor& tl = val(logits);
    require_rank(tl, 4, "masked_softmax_keys");
    const int64_t n = tl.shape[0], h = tl.shape[1], lq = tl.shape[2], lk = tl.shape[3];
    const Tensor& tm = val(key_mask);
    require_shape(tm, {n, lk}, "key mask");
    Tensor out(tl.shape);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b) {
        const double* mrow = tm.data() + b * lk;
        for (int64_t hh = 0; hh < h; ++hh)
            for (int64_t i = 0; i < lq; ++i) {
                const double* row = tl.data() + ((b * h + hh) * lq + i) * lk;
                double* orow = out.data() + ((b * h + hh) * lq + i) * lk;
                double mx = kMaskBias;
                for (int64_t j = 0; j < lk; ++j)
                    if (mrow[j] != 0.0) mx = std::max(mx, row[j]);
                double s = 0.0;
                for (int64_t j = 0; j < lk; ++j) {
                    orow[j] = mrow[j] != 0.0 ? std::exp(row[j] - mx) : 0.0;
                    s += orow[j];
                }
                const double inv = 1.0 / s;
                for (int64_t j = 0; j < lk; ++j) orow[j] *= inv;
            }
    }
    const bool ng = needs(logits);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, logits, n, h, lq, lk] {
            const Tensor& go = grad(id);
            const Tensor& y = val(id);
            Tensor& gx = g(logits);
#pragma omp parallel for schedule(static)
            for (int64_t b = 0; b < n; ++b)
                for (int64_t hh = 0; hh < h; ++hh)
                    for (int64_t i = 0; i < lq; ++i) {
                        const int64_t base = ((b * h + hh) * lq + i) * lk;
                        const double* yr = y.data() + base;
                        const double* gr = go.data() + base;
                        double dot = 0.0;
                        for (int64_t j = 0; j < lk; ++j) dot += yr[j] * gr[j];
                        double* gxr = gx.data() + base;
                        for (int64_t j = 0; j < lk; ++j) gxr[j] += yr[j] * (gr[j] - dot);
                    }
        };
    return id;
}

int Tape::attention_apply(int w, int v, int64_t heads) {
    const Tensor& tw = val(w);
    const Tensor& tv = val(v);
    require_rank(tw, 4, "attention weights");
    require_rank(tv, 3, "attention values");
    const int64_t n = tw.shape[0], h = tw.shape[1], lq = tw.shape[2], lk = tw.shape[3];
    if (h != heads) throw ShapeError("attention_apply: weight heads mismatch");
    const int64_t dm = tv.shape[2];
    if (tv.shape[0] != n || tv.shape[1] != lk || dm % heads != 0)
        throw ShapeError("attention_apply: value shape incompatible");
    const int64_t dh = dm / heads;
    Tensor out({n, lq, dm});
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < n; ++b)
        for (int64_t hh = 0; hh < h; ++hh)
            for (int64_t i = 0; i < lq; ++i) {
                const double* wrow = tw.data() + ((b * h + hh) * lq + i) * lk;
                double* orow = out.data() + (b * lq + i) * dm + hh * dh;
                for (int64_t j = 0; j < lk; ++j) {
                    const double wij = wrow[j];
                    if (wij == 0.0) continue;
                    const double* vrow = tv.data() + (b * lk + j) * dm + hh * dh;
                    for (int64_t d = 0; d < dh; ++d) orow[d] += wij * vrow[d];
                }
            }
    const bool ng = needs(w) || needs(v);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, w, v, n, h, lq, lk, dm, dh] {
            const Tensor& go = grad(id);
            const Tensor& tw = val(w);
            const Tensor& tv = val(v);
            const bool nw = needs(w), nv = needs(v);
            Tensor* gw = nw ? &g(w) : nullptr;
            Tensor* gv = nv ? &g(v) : nullptr;
#pragma omp parallel for schedule(static)
            for (int64_t b = 0; b < n; ++b)
                for (int64_t hh = 0; hh < h; ++hh)
                    for (int64_t i = 0; i < lq; ++i) {
                        const double* grow = go.data() + (b * lq + i) * dm + hh * dh;
                        const double* wrow = tw.data() + ((b * h + hh) * lq + i) * lk;
                        double* gwrow = nw ? gw->data() + ((b * h + hh) * lq + i) * lk : nullptr;
                        for (int64_t j = 0; j < lk; ++j) {
                            const double* vrow = tv.data() + (b * lk + j) * dm + hh * dh;
                            if (nw) {
                                double s = 0.0;
                                for (int64_t d = 0; d < dh; ++d) s += grow[d] * vrow[d];
                                gwrow[j] += s;
                            }
                            if (nv && wrow[j] != 0.0) {
                                double* gvrow = gv->data() + (b * lk + j) * dm + hh * dh;
                                for (int64_t d = 0; d < dh; ++d) gvrow[d] += wrow[j] * grow[d];
                            }
                        }
                    }
        };
    return id;
}

int Tape::conv2d(int x, int w, int stride, int pad) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    require_rank(tx, 4, "conv2d input");
    require_rank(tw, 4, "conv2d weight");
    const int64_t n = tx.shape[0], ci = tx.shape[1], hin = tx.shape[2], win = tx.shape[3];
    const int64_t co = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
    if (tw.shape[1] != ci) throw ShapeError("conv2d: channel mismatch");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    const int64_t hout = (hin + 2 * pad - kh) / stride + 1;
    const int64_t wout = (win + 2 * pad - kw) / stride + 1;
    if (hout < 1 || wout < 1)
        throw ShapeError("conv2d: spatial dims too small for kernel/stride on " + tx.shape_str());
    const int64_t K = ci * kh * kw;
    const int64_t P = hout * wout;

    auto im2col = [ci, kh, kw, hin, win, hout, wout, stride, pad, P](const double* xs, double* col) {
        // col is (K, P); captured by value so the backward closure can reuse it
        for (int64_t c = 0; c < ci; ++c)
            for (int64_t u = 0; u < kh; ++u)
                for (int64_t t = 0; t < kw; ++t) {
                    double* crow = col + ((c * kh + u) * kw + t) * P;
                    for (int64_t oy = 0; oy < hout; ++oy) {
                        const int64_t iy = oy * stride + u - pad;
                        for (int64_t ox = 0; ox < wout; ++ox) {
                            const int64_t ix = ox * stride + t - pad;
                            crow[oy * wout + ox] =
                                (iy >= 0 && iy < hin && ix >= 0 && ix < win)
                                    ? xs[(c * hin + iy) * win + ix]
                                    : 0.0;
                        }
                    }
                }
    };

    Tensor out({n, co, hout, wout});
#pragma omp parallel
    {
        std::vector<double> col(static_cast<size_t>(K * P));
#pragma omp for schedule(static)
        for (int64_t b = 0; b < n; ++b) {
            im2col(tx.data() + b * ci * hin * win, col.data());
            MapM(out.data() + b * co * P, co, P).noalias() =
                CMapM(tw.data(), co, K) * CMapM(col.data(), K, P);
        }
    }
    const bool ng = needs(x) || needs(w);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, w, n, ci, hin, win, co, kh, kw, stride, pad, hout, wout, K, P,
                             im2col] {
            const Tensor& go = grad(id);
            const Tensor& tx = val(x);
            const Tensor& tw = val(w);
            const bool nx = needs(x), nw = needs(w);
            Tensor* gx = nx ? &g(x) : nullptr;
            const int nthreads = num_threads();
            std::vector<Tensor> gw_tls;
            if (nw) gw_tls.assign(static_cast<size_t>(nthreads), Tensor::zeros(tw.shape));
#pragma omp parallel
            {
#ifdef _OPENMP
                const int tid = omp_get_thread_num();
#else
                const int tid = 0;
#endif
                std::vector<double> col(static_cast<size_t>(K * P));
                std::vector<double> dcol(static_cast<size_t>(K * P));
#pragma omp for schedule(static)
                for (int64_t b = 0; b < n; ++b) {
                    CMapM gom(go.data() + b * co * P, co, P);
                    if (nw) {
                        im2col(tx.data() + b * ci * hin * win, col.data());
                        MapM(gw_tls[static_cast<size_t>(tid)].data(), co, K).noalias() +=
                            gom * CMapM(col.data(), K, P).transpose();
                    }
                    if (nx) {
                        MapM(dcol.data(), K, P).noalias() = CMapM(tw.data(), co, K).transpose() * gom;
                        double* gxs = gx->data() + b * ci * hin * win;
                        for (int64_t c = 0; c < ci; ++c)
                            for (int64_t u = 0; u < kh; ++u)
                                for (int64_t t = 0; t < kw; ++t) {
                                    const double* crow = dcol.data() + ((c * kh + u) * kw + t) * P;
                                    for (int64_t oy = 0; oy < hout; ++oy) {
                                        const int64_t iy = oy * stride + u - pad;
                                        if (iy < 0 || iy >= hin) continue;
                                        for (int64_t ox = 0; ox < wout; ++ox) {
                                            const int64_t ix = ox * stride + t - pad;
                                            if (ix < 0 || ix >= win) continue;
                                            gxs[(c * hin + iy) * win + ix] += crow[oy * wout + ox];
                                        }
                                    }
                                }
                    }
                }
            }
            if (nw) {
                Tensor& gw = g(w);
                for (const Tensor& part : gw_tls)
                    for (int64_t i = 0; i < gw.numel(); ++i) gw[i] += part[i];
            }
        };
    return id;
}

int Tape::batch_norm2d(int x, int gamma, int beta, ParamStore& ps, int running_mean, int running_var,
                       bool training, double momentum, double eps) {
    const Tensor& tx = val(x);
    require_rank(tx, 4, "batch_norm2d input");
    const int64_t n = tx.shape[0], c = tx.shape[1], hw = tx.shape[2] * tx.shape[3];
    require_shape(val(gamma), {c}, "batch_norm gamma");
    require_shape(val(beta), {c}, "batch_norm beta");
    const int64_t m = n * hw;

    Tensor mean({c}), var({c});
    if (training) {
#pragma omp parallel for schedule(static)
        for (int64_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int64_t b = 0; b < n; ++b) {
                const double* p = tx.data() + (b * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (int64_t b = 0; b < n; ++b) {
                const double* p = tx.data() + (b * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) v += (p[i] - mu) * (p[i] - mu);
            }
            mean[ch] = mu;
            var[ch] = v / static_cast<double>(m);
        }
        Tensor& rm = ps.at(running_mean).value;
        Tensor& rv = ps.at(running_var).value;
        for (int64_t ch = 0; ch < c; ++ch) {
            rm[ch] = (1.0 - momentum) * rm[ch] + momentum * mean[ch];
            rv[ch] = (1.0 - momentum) * rv[ch] + momentum * var[ch];
        }
    } else {
        mean = ps.at(running_mean).value;
        var = ps.at(running_var).value;
    }

    Tensor out(tx.shape);
    Tensor xhat(tx.shape);
    std::vector<double> inv_sigma(static_cast<size_t>(c));
    const double* gm = val(gamma).data();
    const double* bt = val(beta).data();
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        const double is = 1.0 / std::sqrt(var[ch] + eps);
        inv_sigma[static_cast<size_t>(ch)] = is;
        for (int64_t b = 0; b < n; ++b) {
            const double* p = tx.data() + (b * c + ch) * hw;
            double* xh = xhat.data() + (b * c + ch) * hw;
            double* o = out.data() + (b * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                xh[i] = (p[i] - mean[ch]) * is;
                o[i] = gm[ch] * xh[i] + bt[ch];
            }
        }
    }
    const bool ng = needs(x) || needs(gamma) || needs(beta);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, gamma, beta, n, c, hw, m, training, xhat = std::move(xhat),
                             inv_sigma = std::move(inv_sigma)] {
            const Tensor& go = grad(id);
            const double* gm = val(gamma).data();
            const bool nx = needs(x);
            Tensor* gx = nx ? &g(x) : nullptr;
            Tensor* gg = needs(gamma) ? &g(gamma) : nullptr;
            Tensor* gb = needs(beta) ? &g(beta) : nullptr;
#pragma omp parallel for schedule(static)
            for (int64_t ch = 0; ch < c; ++ch) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int64_t b = 0; b < n; ++b) {
                    const double* gr = go.data() + (b * c + ch) * hw;
                    const double* xh = xhat.data() + (b * c + ch) * hw;
                    for (int64_t i = 0; i < hw; ++i) {
                        sum_dy += gr[i];
                        sum_dy_xhat += gr[i] * xh[i];
                    }
                }
                if (gg) (*gg)[ch] += sum_dy_xhat;
                if (gb) (*gb)[ch] += sum_dy;
                if (!nx) continue;
                const double is = inv_sigma[static_cast<size_t>(ch)];
                if (training) {
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (int64_t b = 0; b < n; ++b) {
                        const double* gr = go.data() + (b * c + ch) * hw;
                        const double* xh = xhat.data() + (b * c + ch) * hw;
                        double* gxr = gx->data() + (b * c + ch) * hw;
                        for (int64_t i = 0; i < hw; ++i)
                            gxr[i] += gm[ch] * is *
                                      (gr[i] - inv_m * sum_dy - xh[i] * inv_m * sum_dy_xhat);
                    }
                } else {
                    for (int64_t b = 0; b < n; ++b) {
                        const double* gr = go.data() + (b * c + ch) * hw;
                        double* gxr = gx->data() + (b * c + ch) * hw;
                        for (int64_t i = 0; i < hw; ++i) gxr[i] += gm[ch] * is * gr[i];
                    }
                }
            }
        };
    return id;
}

int Tape::avg_pool_grid(int x, int64_t gh, int64_t gw) {
    const Tensor& tx = val(x);
    require_rank(tx, 4, "avg_pool_grid");
    const int64_t n = tx.shape[0], c = tx.shape[1], hin = tx.shape[2], win = tx.shape[3];
    if (gh < 1 || gw < 1 || gh > hin || gw > win)
        throw ShapeError("avg_pool_grid: grid larger than feature map");
    Tensor out({n, c, gh, gw});
    auto bound = [](int64_t idx, int64_t grid, int64_t extent) {
        return (idx * extent) / grid;
    };
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t oy = 0; oy < gh; ++oy)
                for (int64_t ox = 0; ox < gw; ++ox) {
                    const int64_t y0 = bound(oy, gh, hin), y1 = bound(oy + 1, gh, hin);
                    const int64_t x0 = bound(ox, gw, win), x1 = bound(ox + 1, gw, win);
                    double s = 0.0;
                    for (int64_t y = y0; y < y1; ++y)
                        for (int64_t xx = x0; xx < x1; ++xx)
                            s += tx[((b * c + ch) * hin + y) * win + xx];
                    out[((b * c + ch) * gh + oy) * gw + ox] =
                        s / static_cast<double>((y1 - y0) * (x1 - x0));
                }
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, n, c, hin, win, gh, gw, bound] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t b = 0; b < n; ++b)
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t oy = 0; oy < gh; ++oy)
                        for (int64_t ox = 0; ox < gw; ++ox) {
                            const int64_t y0 = bound(oy, gh, hin), y1 = bound(oy + 1, gh, hin);
                            const int64_t x0 = bound(ox, gw, win), x1 = bound(ox + 1, gw, win);
                            const double v = go[((b * c + ch) * gh + oy) * gw + ox] /
                                             static_cast<double>((y1 - y0) * (x1 - x0));
                            for (int64_t y = y0; y < y1; ++y)
                                for (int64_t xx = x0; xx < x1; ++xx)
                                    gx[((b * c + ch) * hin + y) * win + xx] += v;
                        }
        };
    return id;
}

int Tape::grid_to_sequence(int x) {
    const Tensor& tx = val(x);
    require_rank(tx, 4, "grid_to_sequence");
    const int64_t n = tx.shape[0], c = tx.shape[1], gh = tx.shape[2], gw = tx.shape[3];
    const int64_t l = gh * gw;
    Tensor out({n, l, c});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t p = 0; p < l; ++p) out[(b * l + p) * c + ch] = tx[(b * c + ch) * l + p];
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, n, c, l] {
            const Tensor& go = grad(id);
            Tensor& gx = g(x);
            for (int64_t b = 0; b < n; ++b)
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t p = 0; p < l; ++p)
                        gx[(b * c + ch) * l + p] += go[(b * l + p) * c + ch];
        };
    return id;
}

int Tape::focal_loss(int logits, const std::vector<int32_t>& labels, double gamma) {
    const Tensor& tl = val(logits);
    require_rank(tl, 2, "focal_loss logits");
    const int64_t n = tl.shape[0], kcls = tl.shape[1];
    if (static_cast<int64_t>(labels.size()) != n) throw ShapeError("focal_loss: label count mismatch");
    if (gamma < 0.0) throw ConfigError("focal loss gamma must be >= 0");
    for (int32_t lab : labels)
        if (lab < 0 || lab >= kcls)
            throw DataError("focal_loss: label index " + std::to_string(lab) + " outside " +
                            std::to_string(kcls) + " classes");
    Tensor probs({n, kcls});
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double* row = tl.data() + i * kcls;
        double* prow = probs.data() + i * kcls;
        double mx = row[0];
        for (int64_t j = 1; j < kcls; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < kcls; ++j) s += prow[j] = std::exp(row[j] - mx);
        for (int64_t j = 0; j < kcls; ++j) prow[j] /= s;
        const double pt = prow[labels[static_cast<size_t>(i)]];
        total += -std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    Tensor out({1}, {total / static_cast<double>(n)});
    const bool ng = needs(logits);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, logits, labels, gamma, n, kcls, probs = std::move(probs)] {
            const double gscale = grad(id)[0] / static_cast<double>(n);
            Tensor& gx = g(logits);
            for (int64_t i = 0; i < n; ++i) {
                const int32_t t = labels[static_cast<size_t>(i)];
                const double* prow = probs.data() + i * kcls;
                const double pt = prow[t];
                // dL/dpt, with the gamma=0 case separated so (1-pt)^(gamma-1)
                // never evaluates 0^negative.
                double dl_dpt;
                if (gamma == 0.0) {
                    dl_dpt = -1.0 / pt;
                } else {
                    const double q = 1.0 - pt;
                    dl_dpt = gamma * std::pow(q, gamma - 1.0) * std::log(pt) -
                             std::pow(q, gamma) / pt;
                }
                double* gxr = gx.data() + i * kcls;
                for (int64_t j = 0; j < kcls; ++j) {
                    const double dpt_dlj = pt * ((j == t ? 1.0 : 0.0) - prow[j]);
                    gxr[j] += gscale * dl_dpt * dpt_dlj;
                }
            }
        };
    return id;
}

int Tape::mean_all(int x) {
    const Tensor& tx = val(x);
    const int64_t n = tx.numel();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += tx[i];
    Tensor out({1}, {s / static_cast<double>(n)});
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, n] {
            const double v = grad(id)[0] / static_cast<double>(n);
            Tensor& gx = g(x);
            for (int64_t i = 0; i < n; ++i) gx[i] += v;
        };
    return id;
}

int Tape::weighted_sum(int x, Tensor weights) {
    const Tensor& tx = val(x);
    if (weights.numel() != tx.numel()) throw ShapeError("weighted_sum: weight count mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < tx.numel(); ++i) s += tx[i] * weights[i];
    Tensor out({1}, {s});
    const bool ng = needs(x);
    int id = push(std::move(out), ng);
    if (ng)
        node(id).backprop = [this, id, x, w = std::move(weights)] {
            const double gs = grad(id)[0];
            Tensor& gx = g(x);
            for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += gs * w[i];
        };
    return id;
}

void Tape::backward(int target) {
    Node& t = node(target);
    if (t.value.numel() != 1) throw ShapeError("backward: target must be a scalar node");
    if (!t.needs_grad) return;
    g(target)[0] = 1.0;
    for (int i = target; i >= 0; --i) {
        Node& nd = node(i);
        if (nd.needs_grad && nd.backprop && nd.grad.numel() > 0) nd.backprop();
    }
    for (auto& [nid, bind] : param_bindings_) {
        Node& nd = node(nid);
        if (nd.grad.numel() == 0) continue;
        Tensor& pg = bind.first->at(bind.second).grad;
        for (int64_t i = 0; i < pg.numel(); ++i) pg[i] += nd.grad[i];
    }
}

}  // namespace etdpc::nn
