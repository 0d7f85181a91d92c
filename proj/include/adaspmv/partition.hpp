#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "adaspmv/types.hpp"

namespace adaspmv {

// One worker's share of an even nonzero split: the item range plus the
// covering row/column span [span_begin, span_end) located by binary search
// over the offsets, merge-path style.
struct WorkerRange {
    index_t item_begin = 0;
    index_t item_end = 0;
    index_t span_begin = 0;
    index_t span_end = 0;

    bool empty() const { return item_begin >= item_end; }
};

struct WorkPartition {
    std::vector<WorkerRange> worker_ranges;
};

// Segment of `offsets` containing item position `pos`: the largest s with
// offsets[s] <= pos (empty segments collapse onto their right neighbor).
inline index_t segment_of(std::span<const index_t> offsets, index_t pos) {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), pos);
    return static_cast<index_t>(it - offsets.begin()) - 1;
}

// Splits [0, total_items) into `workers` contiguous ranges whose sizes
// differ by at most one: worker w owns [w*T/W, (w+1)*T/W).
inline WorkPartition make_partition(std::span<const index_t> offsets, index_t total_items,
                                    int workers) {
    if (workers <= 0) throw std::invalid_argument("make_partition: workers must be positive");
    if (offsets.empty() || offsets.back() != total_items)
        throw std::invalid_argument("make_partition: offsets do not cover total_items");
    WorkPartition part;
    part.worker_ranges.resize(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        WorkerRange& r = part.worker_ranges[static_cast<size_t>(w)];
        r.item_begin = total_items * w / workers;
        r.item_end = total_items * (w + 1) / workers;
        if (r.empty()) {
            r.span_begin = r.span_end = 0;
            continue;
        }
        r.span_begin = segment_of(offsets, r.item_begin);
        r.span_end = segment_of(offsets, r.item_end - 1) + 1;
    }
    return part;
}

} // namespace adaspmv
