#include "gradcheck.hpp"

#include <cmath>

namespace etdpc::nn {

namespace {

double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(tape.constant(t));
    const int out = fn(tape, ids);
    return tape.val(out)[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, std::vector<Tensor> inputs, double step) {
    GradCheckReport report;

    // Analytic pass.
    Tape tape;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(tape.input(t));
    const int out = fn(tape, ids);
    if (tape.val(out).numel() != 1) throw ShapeError("grad_check: function must return a scalar node");
    tape.backward(out);

    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& gi = tape.grad(ids[i]);
        analytic.push_back(gi.numel() ? gi : Tensor::zeros(inputs[i].shape));
    }

    for (size_t i = 0; i < inputs.size(); ++i) {
        for (int64_t j = 0; j < inputs[i].numel(); ++j) {
            const double keep = inputs[i][j];
            inputs[i][j] = keep + step;
            const double fp = eval_scalar(fn, inputs);
            inputs[i][j] = keep - step;
            const double fm = eval_scalar(fn, inputs);
            inputs[i][j] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[i][j];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                report.finite = false;
                report.diagnostic = "non-finite gradient at input[" + std::to_string(i) + "]/flat[" +
                                    std::to_string(j) + "]";
                return report;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coordinates_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_coordinate =
                    "input[" + std::to_string(i) + "]/flat[" + std::to_string(j) + "]";
            }
        }
    }
    return report;
}

GradCheckReport grad_check_params(const std::function<int(Tape&)>& build_loss, ParamStore& ps,
                                  double step) {
    GradCheckReport report;

    ps.zero_grad();
    {
        Tape tape;
        const int out = build_loss(tape);
        if (tape.val(out).numel() != 1)
            throw ShapeError("grad_check_params: loss must be a scalar node");
        tape.backward(out);
    }
    std::vector<Tensor> analytic;
    for (const auto& e : ps.entries()) analytic.push_back(e.grad);

    auto eval = [&]() {
        Tape tape;
        return tape.val(build_loss(tape))[0];
    };

    for (size_t p = 0; p < ps.size(); ++p) {
        auto& e = ps.entries()[p];
        if (!e.trainable) continue;
        for (int64_t j = 0; j < e.value.numel(); ++j) {
            const double keep = e.value[j];
            e.value[j] = keep + step;
            const double fp = eval();
            e.value[j] = keep - step;
            const double fm = eval();
            e.value[j] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[p][j];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                report.finite = false;
                report.diagnostic = "non-finite gradient at " + e.name + "/flat[" + std::to_string(j) + "]";
                return report;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coordinates_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_coordinate = e.name + "/flat[" + std::to_string(j) + "]";
            }
        }
    }
    return report;
}

}  // namespace etdpc::nn
