#include "metrics.hpp"

namespace etdpc::evalrep {

MetricsReport compute_metrics(const std::vector<int>& true_labels,
                              const std::vector<int>& predicted_labels,
                              const std::vector<std::string>& class_names) {
    if (true_labels.size() != predicted_labels.size())
        throw DataError("compute_metrics: label sequences differ in length");
    const int k = static_cast<int>(class_names.size());
    if (k < 1) throw DataError("compute_metrics: empty class list");

    MetricsReport rep;
    rep.total = static_cast<int64_t>(true_labels.size());
    rep.confusion.assign(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));
    for (size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = predicted_labels[i];
        if (t < 0 || t >= k)
            throw DataError("compute_metrics: unknown true label index " + std::to_string(t));
        if (p < 0 || p >= k)
            throw DataError("compute_metrics: unknown predicted label index " + std::to_string(p));
        ++rep.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)];
    }

    int64_t trace = 0;
    for (int c = 0; c < k; ++c) {
        int64_t tp = rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        int64_t support = 0, predicted = 0;
        for (int j = 0; j < k; ++j) {
            support += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)];
            predicted += rep.confusion[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
        trace += tp;
        CategoryMetrics m;
        m.name = class_names[static_cast<size_t>(c)];
        m.support = support;
        m.predicted = predicted;
        m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        if (support == 0 && predicted == 0)
            rep.flags.push_back("class " + m.name +
                                " has no support and no predictions; scored 0 by convention");
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f1 += m.f1;
        rep.categories.push_back(std::move(m));
    }
    rep.macro_precision /= static_cast<double>(k);
    rep.macro_recall /= static_cast<double>(k);
    rep.macro_f1 /= static_cast<double>(k);
    rep.accuracy = rep.total > 0 ? static_cast<double>(trace) / static_cast<double>(rep.total) : 0.0;
    return rep;
}

}  // namespace etdpc::evalrep
