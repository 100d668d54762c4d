#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fuseg/tensor.hpp"

namespace fuseg {

/// C x C count accumulator; counts[t*C + p] = pixels with true class t
/// predicted as p. Additive under dataset union.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }
    std::int64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto v : counts) t += v;
        return t;
    }

    void merge(const ConfusionMatrix& o) {
        if (o.num_classes != num_classes)
            throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    }
};

inline void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& truth) {
    if (pred.h != truth.h || pred.w != truth.w)
        throw std::invalid_argument("accumulate: prediction/truth extent mismatch");
    for (std::size_t i = 0; i < truth.v.size(); ++i) {
        const int t = truth.v[i], p = pred.v[i];
        if (t >= cm.num_classes || p >= cm.num_classes)
            throw std::invalid_argument("accumulate: class id out of range");
        ++cm.counts[static_cast<std::size_t>(t) * cm.num_classes + p];
    }
}

inline double pixel_acc(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("pixel_acc: empty confusion matrix");
    std::int64_t diag = 0;
    for (int c = 0; c < cm.num_classes; ++c) diag += cm.at(c, c);
    return static_cast<double>(diag) / static_cast<double>(total);
}

/// IoU per class; NaN for classes with zero union (never observed).
inline std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
    const int c = cm.num_classes;
    std::vector<double> iou(c, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < c; ++k) {
        const std::int64_t tp = cm.at(k, k);
        std::int64_t fn = 0, fp = 0;
        for (int j = 0; j < c; ++j) {
            if (j == k) continue;
            fn += cm.at(k, j);
            fp += cm.at(j, k);
        }
        const std::int64_t uni = tp + fp + fn;
        if (uni > 0) iou[k] = static_cast<double>(tp) / static_cast<double>(uni);
    }
    return iou;
}

/// Mean IoU over the classes present in the ground truth; classes absent from
/// truth are excluded even when (falsely) predicted.
inline double miou(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("miou: empty confusion matrix");
    const int c = cm.num_classes;
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < c; ++k) {
        std::int64_t truth_count = 0, tp = cm.at(k, k), fp = 0;
        for (int j = 0; j < c; ++j) {
            truth_count += cm.at(k, j);
            if (j != k) fp += cm.at(j, k);
        }
        if (truth_count == 0) continue;
        const std::int64_t fn = truth_count - tp;
        sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("miou: no class present in truth");
    return sum / n;
}

}  // namespace fuseg
