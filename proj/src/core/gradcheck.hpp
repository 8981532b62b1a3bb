#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace etdpc::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_coordinate;   // "input[i]/flat[j]"
    int64_t coordinates_checked = 0;
    bool finite = true;
    std::string diagnostic;

    bool passes(double tolerance) const { return finite && max_rel_error < tolerance; }
};

// A differentiable scalar function of a set of input tensors. The callable
// receives a fresh tape plus the leaf node ids for each input and must return
// a scalar node; it is invoked repeatedly with perturbed inputs.
using ScalarFn = std::function<int(Tape&, const std::vector<int>&)>;

// Compares the tape's analytic gradient against central finite differences
// (default step 1e-5) over every coordinate of every input tensor.
// Relative error uses max(|analytic|, |numeric|, 1) as the denominator.
GradCheckReport grad_check(const ScalarFn& fn, std::vector<Tensor> inputs, double step = 1e-5);

// Same check over every trainable parameter of a store. build_loss must
// construct a scalar loss node on a fresh tape, reading current store values
// through tape.param().
GradCheckReport grad_check_params(const std::function<int(Tape&)>& build_loss, ParamStore& ps,
                                  double step = 1e-5);

}  // namespace etdpc::nn
