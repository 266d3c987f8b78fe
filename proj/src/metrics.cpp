#include "tstcc/metrics.hpp"

#include "tstcc/errors.hpp"

#include <string>

namespace tstcc {

Metrics evaluate_metrics(const std::vector<int64_t>& pred, const std::vector<int64_t>& truth,
                         int64_t num_classes) {
    if (pred.size() != truth.size())
        throw DataError("metrics: prediction/truth length mismatch (" +
                        std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) + ")");
    if (pred.empty()) throw DataError("metrics: empty label vectors");
    Metrics m;
    m.confusion.assign(static_cast<size_t>(num_classes),
                       std::vector<int64_t>(static_cast<size_t>(num_classes), 0));
    for (size_t i = 0; i < pred.size(); ++i) {
        const int64_t p = pred[i], t = truth[i];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
            throw DataError("metrics: label out of range at index " + std::to_string(i));
        ++m.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)];
    }

    const double n = static_cast<double>(pred.size());
    int64_t trace = 0;
    for (int64_t c = 0; c < num_classes; ++c)
        trace += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    m.accuracy = static_cast<double>(trace) / n;

    m.precision.resize(static_cast<size_t>(num_classes));
    m.recall.resize(static_cast<size_t>(num_classes));
    m.f1.resize(static_cast<size_t>(num_classes));
    double f1_sum = 0;
    for (int64_t c = 0; c < num_classes; ++c) {
        const int64_t tp = m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        int64_t fp = 0, fn = 0;
        for (int64_t o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            fp += m.confusion[static_cast<size_t>(o)][static_cast<size_t>(c)];
            fn += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
        }
        const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        m.precision[static_cast<size_t>(c)] = prec;
        m.recall[static_cast<size_t>(c)] = rec;
        m.f1[static_cast<size_t>(c)] = f1;
        f1_sum += f1;
    }
    m.mf1 = f1_sum / static_cast<double>(num_classes);
    return m;
}

}  // namespace tstcc
