#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adaspmv/parallel.hpp"
#include "adaspmv/partition.hpp"
#include "adaspmv/sparse.hpp"
#include "adaspmv/types.hpp"

namespace adaspmv {

#if defined(ADASPMV_ENABLE_COUNTERS)
inline constexpr bool kCountersEnabled = true;
#else
inline constexpr bool kCountersEnabled = false;
#endif

// =============================================================================
// Kernel identity
// =============================================================================

// Computing pattern of a kernel:
//   ColSpMSpV  vector-driven, column-major, reads only effective nonzeros
//   RowSpMSpV  matrix-driven, row-major, validates entries against a bitmask
//   SpMV       matrix-driven, row-major, no validation
enum class Pattern : std::uint8_t { ColSpMSpV = 0, RowSpMSpV = 1, SpMV = 2 };

// Work unit per worker: whole rows/columns vs. equal nonzero ranges.
enum class Workload : std::uint8_t { Direct = 0, LoadBalanced = 1 };

// How column-major partial products reach the output.
enum class Writeback : std::uint8_t { Atomic = 0, Sort = 1 };

// One of the eight candidate kernels. The write-back member is meaningful
// only when pattern == ColSpMSpV; comparisons ignore it otherwise.
struct KernelId {
    Pattern pattern = Pattern::SpMV;
    Workload workload = Workload::Direct;
    Writeback writeback = Writeback::Atomic;

    static constexpr int kCount = 8;

    constexpr int index() const {
        int lb = workload == Workload::LoadBalanced ? 1 : 0;
        switch (pattern) {
            case Pattern::SpMV: return lb;
            case Pattern::RowSpMSpV: return 2 + lb;
            case Pattern::ColSpMSpV: return 4 + 2 * lb + (writeback == Writeback::Sort ? 1 : 0);
        }
        return -1;
    }

    static constexpr KernelId from_index(int i) {
        switch (i) {
            case 0: return {Pattern::SpMV, Workload::Direct, Writeback::Atomic};
            case 1: return {Pattern::SpMV, Workload::LoadBalanced, Writeback::Atomic};
            case 2: return {Pattern::RowSpMSpV, Workload::Direct, Writeback::Atomic};
            case 3: return {Pattern::RowSpMSpV, Workload::LoadBalanced, Writeback::Atomic};
            case 4: return {Pattern::ColSpMSpV, Workload::Direct, Writeback::Atomic};
            case 5: return {Pattern::ColSpMSpV, Workload::Direct, Writeback::Sort};
            case 6: return {Pattern::ColSpMSpV, Workload::LoadBalanced, Writeback::Atomic};
            case 7: return {Pattern::ColSpMSpV, Workload::LoadBalanced, Writeback::Sort};
        }
        throw std::invalid_argument("kernel index out of range");
    }

    std::string_view name() const {
        static constexpr std::array<std::string_view, 8> names = {
            "spmv_direct",      "spmv_lb",          "row_direct", "row_lb",
            "col_direct_atomic", "col_direct_sort", "col_lb_atomic", "col_lb_sort"};
        return names[static_cast<size_t>(index())];
    }

    static std::optional<KernelId> parse(std::string_view s) {
        for (int i = 0; i < kCount; ++i)
            if (from_index(i).name() == s) return from_index(i);
        return std::nullopt;
    }

    friend constexpr bool operator==(KernelId a, KernelId b) {
        if (a.pattern != b.pattern || a.workload != b.workload) return false;
        return a.pattern != Pattern::ColSpMSpV || a.writeback == b.writeback;
    }
    friend constexpr bool operator!=(KernelId a, KernelId b) { return !(a == b); }
};

inline std::array<KernelId, KernelId::kCount> all_kernels() {
    std::array<KernelId, KernelId::kCount> out{};
    for (int i = 0; i < KernelId::kCount; ++i) out[static_cast<size_t>(i)] = KernelId::from_index(i);
    return out;
}

// =============================================================================
// Output and instrumentation
// =============================================================================

// Populated only in counter-enabled builds (ADASPMV_ENABLE_COUNTERS).
struct KernelCounters {
    std::uint64_t values_read = 0;    // loads from the matrix value array
    std::uint64_t pairs_emitted = 0;  // (row, product) pairs on the sort path
    std::uint64_t cas_retries = 0;    // failed CAS attempts on the atomic path
};

// Result vector in whichever representation the kernel produced; the other
// representation materializes on first access. The sort write-back yields a
// sparse primary, everything else a dense one.
class MultiplyOutput {
public:
    static MultiplyOutput from_dense(DenseVector y) {
        MultiplyOutput out;
        out.n_ = y.size();
        out.dense_ = std::move(y);
        return out;
    }

    static MultiplyOutput from_sparse(SparseVector y) {
        MultiplyOutput out;
        out.n_ = y.length;
        out.sparse_ = std::move(y);
        return out;
    }

    index_t size() const { return n_; }
    bool has_dense() const { return dense_.has_value(); }
    bool has_sparse() const { return sparse_.has_value(); }

    const DenseVector& dense() const {
        if (!dense_) dense_ = sparse_to_dense(*sparse_);
        return *dense_;
    }

    const SparseVector& sparse() const {
        if (!sparse_) sparse_ = dense_to_sparse(*dense_);
        return *sparse_;
    }

    KernelCounters counters;

private:
    index_t n_ = 0;
    mutable std::optional<DenseVector> dense_;
    mutable std::optional<SparseVector> sparse_;
};

struct KernelConfig {
    // Number of work shares; 0 means the global pool's worker count. The
    // split is a function of this value alone, so results are reproducible
    // for a fixed setting regardless of scheduling.
    int workers = 0;
    // Alternate atomic write-back: per-worker private accumulators merged by
    // a deterministic reduction. Intended for matrices with few rows.
    bool atomic_private_accumulators = false;
};

inline int resolve_workers(const KernelConfig& cfg) {
    return cfg.workers > 0 ? cfg.workers : ThreadPool::global().worker_count();
}

// Prepared operand representations. A kernel picks what it needs: SpMV the
// dense values, RowSpMSpV dense values plus the validation bitmask,
// ColSpMSpV the sparse form.
struct OperandViews {
    const DenseVector* dense = nullptr;
    const SparseVector* sparse = nullptr;
    const BitMask* mask = nullptr;
};

namespace detail {

inline void add_atomic(real_t& slot, real_t v, std::uint64_t& retries) {
    std::atomic_ref<real_t> ref(slot);
    if constexpr (kCountersEnabled) {
        real_t old = ref.load(std::memory_order_relaxed);
        while (!ref.compare_exchange_weak(old, old + v, std::memory_order_relaxed)) ++retries;
    } else {
        ref.fetch_add(v, std::memory_order_relaxed);
        (void)retries;
    }
}

} // namespace detail

// =============================================================================
// Reference oracle
// =============================================================================

// Sequential, deterministic double loop; ground truth for all kernels.
inline DenseVector reference_multiply(const DualMatrix& m, const DenseVector& x) {
    if (x.size() != m.cols())
        throw std::invalid_argument("reference_multiply: vector length != matrix columns");
    const CsrMatrix& a = m.csr;
    DenseVector y(m.rows());
    for (index_t r = 0; r < a.rows; ++r) {
        real_t sum = 0;
        for (index_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            sum += a.values[static_cast<size_t>(k)] * x[a.col_indices[static_cast<size_t>(k)]];
        y[r] = sum;
    }
    return y;
}

// =============================================================================
// Row-major kernels (SpMV and validated RowSpMSpV)
// =============================================================================

namespace detail {

// Shared skeleton of the two row-major patterns. Validate=false is plain
// SpMV; Validate=true consults the bitmask before loading a value.
template <bool Validate>
MultiplyOutput row_major_multiply(const DualMatrix& m, const DenseVector& x, const BitMask* mask,
                                  Workload workload, const KernelConfig& cfg) {
    if (x.size() != m.cols())
        throw std::invalid_argument("multiply: vector length != matrix columns");
    const CsrMatrix& a = m.csr;
    const int w_count = resolve_workers(cfg);
    DenseVector y(a.rows);
    std::vector<std::uint64_t> reads(static_cast<size_t>(w_count), 0);

    auto row_sum = [&](index_t r, index_t lo, index_t hi, std::uint64_t& local) {
        real_t sum = 0;
        for (index_t k = lo; k < hi; ++k) {
            const index_t c = a.col_indices[static_cast<size_t>(k)];
            if constexpr (Validate) {
                if (!mask->test(c)) continue;
            }
            sum += a.values[static_cast<size_t>(k)] * x[c];
            if constexpr (kCountersEnabled) ++local;
        }
        return sum;
    };

    if (workload == Workload::Direct) {
        // contiguous blocks of whole rows per worker
        ThreadPool::global().run(w_count, [&](int w) {
            auto [r0, r1] = chunk_range(a.rows, w_count, w);
            std::uint64_t local = 0;
            for (index_t r = r0; r < r1; ++r)
                y[r] = row_sum(r, a.row_offsets[r], a.row_offsets[r + 1], local);
            reads[static_cast<size_t>(w)] = local;
        });
    } else {
        // equal nonzero ranges; partial sums of rows shared between
        // neighboring ranges are combined sequentially after the join
        WorkPartition part = make_partition(a.row_offsets, a.nnz(), w_count);
        std::vector<std::vector<std::pair<index_t, real_t>>> boundary(
            static_cast<size_t>(w_count));
        ThreadPool::global().run(w_count, [&](int w) {
            const WorkerRange& rg = part.worker_ranges[static_cast<size_t>(w)];
            if (rg.empty()) return;
            std::uint64_t local = 0;
            for (index_t r = rg.span_begin; r < rg.span_end; ++r) {
                index_t lo = std::max(a.row_offsets[r], rg.item_begin);
                index_t hi = std::min(a.row_offsets[r + 1], rg.item_end);
                if (lo >= hi) continue;
                real_t sum = row_sum(r, lo, hi, local);
                bool shared =
                    a.row_offsets[r] < rg.item_begin || a.row_offsets[r + 1] > rg.item_end;
                if (shared)
                    boundary[static_cast<size_t>(w)].emplace_back(r, sum);
                else
                    y[r] = sum;
            }
            reads[static_cast<size_t>(w)] = local;
        });
        for (const auto& slots : boundary)
            for (const auto& [row, sum] : slots) y[row] += sum;
    }

    MultiplyOutput out = MultiplyOutput::from_dense(std::move(y));
    if constexpr (kCountersEnabled) {
        if constexpr (!Validate) out.counters.values_read = static_cast<std::uint64_t>(a.nnz());
        else
            for (std::uint64_t r : reads) out.counters.values_read += r;
    }
    return out;
}

} // namespace detail

inline MultiplyOutput spmv(const DualMatrix& m, const DenseVector& x, Workload workload,
                           const KernelConfig& cfg = {}) {
    return detail::row_major_multiply<false>(m, x, nullptr, workload, cfg);
}

inline MultiplyOutput spmspv_row(const DualMatrix& m, const DenseVector& x_values,
                                 const BitMask& mask, Workload workload,
                                 const KernelConfig& cfg = {}) {
    if (mask.length != m.cols())
        throw std::invalid_argument("spmspv_row: mask length != matrix columns");
    return detail::row_major_multiply<true>(m, x_values, &mask, workload, cfg);
}

inline MultiplyOutput spmspv_row(const DualMatrix& m, const SparseVector& x, Workload workload,
                                 const KernelConfig& cfg = {}) {
    if (x.length != m.cols())
        throw std::invalid_argument("spmspv_row: vector length != matrix columns");
    DenseVector xd = sparse_to_dense(x);
    BitMask mask = build_bitmask(x);
    return spmspv_row(m, xd, mask, workload, cfg);
}

// =============================================================================
// Column-major kernels (ColSpMSpV)
// =============================================================================

struct RowVal {
    index_t row = 0;
    real_t val = 0;
};

// Sums runs of equal rows in an already row-sorted pair stream; exact zero
// sums are dropped so the result matches dense_to_sparse of the dense view.
inline SparseVector reduce_sorted_pairs(std::span<const RowVal> pairs, index_t rows) {
    SparseVector out;
    out.length = rows;
    size_t i = 0;
    while (i < pairs.size()) {
        const index_t row = pairs[i].row;
        real_t sum = 0;
        for (; i < pairs.size() && pairs[i].row == row; ++i) sum += pairs[i].val;
        if (sum != real_t{0}) {
            out.indices.push_back(row);
            out.values.push_back(sum);
        }
    }
    return out;
}

// The full sort write-back pass on one pair stream: sort by row id, then
// reduce by key.
inline SparseVector sort_reduce_pairs(std::vector<RowVal> pairs, index_t rows) {
    std::sort(pairs.begin(), pairs.end(),
              [](const RowVal& a, const RowVal& b) { return a.row < b.row; });
    return reduce_sorted_pairs(pairs, rows);
}

namespace detail {

// Merges per-worker row-sorted buffers into one stream. Ties keep the
// lower worker index first, so the merged order is a pure function of the
// buffer contents.
inline std::vector<RowVal> merge_sorted_buffers(std::vector<std::vector<RowVal>>& bufs) {
    size_t total = 0;
    for (const auto& b : bufs) total += b.size();
    std::vector<RowVal> merged;
    merged.reserve(total);
    std::vector<size_t> cursor(bufs.size(), 0);
    for (;;) {
        int best = -1;
        for (size_t w = 0; w < bufs.size(); ++w) {
            if (cursor[w] >= bufs[w].size()) continue;
            if (best < 0 || bufs[w][cursor[w]].row < bufs[static_cast<size_t>(best)][cursor[static_cast<size_t>(best)]].row)
                best = static_cast<int>(w);
        }
        if (best < 0) break;
        merged.push_back(bufs[static_cast<size_t>(best)][cursor[static_cast<size_t>(best)]++]);
    }
    return merged;
}

} // namespace detail

// Touches only the columns in x's support: exactly effective_nnz(m, x)
// matrix values are read. The sort path is bitwise deterministic across
// runs for a fixed worker setting; the atomic path is deterministic only up
// to floating-point summation order.
inline MultiplyOutput spmspv_col(const DualMatrix& m, const SparseVector& x, Workload workload,
                                 Writeback writeback, const KernelConfig& cfg = {}) {
    if (x.length != m.cols())
        throw std::invalid_argument("spmspv_col: vector length != matrix columns");
    const CscMatrix& a = m.csc;
    const int w_count = resolve_workers(cfg);
    const index_t support = x.nnz();

    // Per-worker share of the support: whole columns for Direct, clipped
    // effective-nonzero ranges for LoadBalanced.
    struct Share {
        index_t s_begin = 0, s_end = 0;   // support positions
        index_t clip_lo = 0, clip_hi = 0; // effective-entry clipping for LB ends
        bool lb = false;
    };
    std::vector<index_t> eff_offsets;
    std::vector<Share> shares(static_cast<size_t>(w_count));
    if (workload == Workload::Direct) {
        for (int w = 0; w < w_count; ++w) {
            auto [lo, hi] = chunk_range(support, w_count, w);
            shares[static_cast<size_t>(w)] = {lo, hi, 0, 0, false};
        }
    } else {
        eff_offsets.resize(static_cast<size_t>(support) + 1);
        eff_offsets[0] = 0;
        for (index_t s = 0; s < support; ++s)
            eff_offsets[static_cast<size_t>(s) + 1] =
                eff_offsets[static_cast<size_t>(s)] + a.col_degree(x.indices[static_cast<size_t>(s)]);
        WorkPartition part = make_partition(eff_offsets, eff_offsets.back(), w_count);
        for (int w = 0; w < w_count; ++w) {
            const WorkerRange& rg = part.worker_ranges[static_cast<size_t>(w)];
            Share& sh = shares[static_cast<size_t>(w)];
            sh.lb = true;
            if (rg.empty()) {
                sh.s_begin = sh.s_end = 0;
                continue;
            }
            sh.s_begin = rg.span_begin;
            sh.s_end = rg.span_end;
            sh.clip_lo = rg.item_begin;
            sh.clip_hi = rg.item_end;
        }
    }

    // entry range of support position s under a share's clipping
    auto entry_range = [&](const Share& sh, index_t s) -> std::pair<index_t, index_t> {
        const index_t col = x.indices[static_cast<size_t>(s)];
        index_t lo = a.col_offsets[col];
        index_t hi = a.col_offsets[col + 1];
        if (sh.lb) {
            const index_t base = eff_offsets[static_cast<size_t>(s)];
            lo += std::max(index_t{0}, sh.clip_lo - base);
            hi = a.col_offsets[col] + std::min(hi - a.col_offsets[col], sh.clip_hi - base);
        }
        return {lo, hi};
    };

    std::vector<KernelCounters> local(static_cast<size_t>(w_count));

    if (writeback == Writeback::Atomic) {
        DenseVector y(a.rows);
        if (!cfg.atomic_private_accumulators) {
            ThreadPool::global().run(w_count, [&](int w) {
                const Share& sh = shares[static_cast<size_t>(w)];
                KernelCounters& lc = local[static_cast<size_t>(w)];
                for (index_t s = sh.s_begin; s < sh.s_end; ++s) {
                    const real_t xv = x.values[static_cast<size_t>(s)];
                    auto [lo, hi] = entry_range(sh, s);
                    for (index_t k = lo; k < hi; ++k) {
                        detail::add_atomic(y[a.row_indices[static_cast<size_t>(k)]],
                                           a.values[static_cast<size_t>(k)] * xv, lc.cas_retries);
                        if constexpr (kCountersEnabled) ++lc.values_read;
                    }
                }
            });
        } else {
            std::vector<DenseVector> acc(static_cast<size_t>(w_count));
            ThreadPool::global().run(w_count, [&](int w) {
                const Share& sh = shares[static_cast<size_t>(w)];
                KernelCounters& lc = local[static_cast<size_t>(w)];
                DenseVector& mine = acc[static_cast<size_t>(w)];
                mine = DenseVector(a.rows);
                for (index_t s = sh.s_begin; s < sh.s_end; ++s) {
                    const real_t xv = x.values[static_cast<size_t>(s)];
                    auto [lo, hi] = entry_range(sh, s);
                    for (index_t k = lo; k < hi; ++k) {
                        mine[a.row_indices[static_cast<size_t>(k)]] +=
                            a.values[static_cast<size_t>(k)] * xv;
                        if constexpr (kCountersEnabled) ++lc.values_read;
                    }
                }
            });
            // deterministic reduction: fixed worker order per row chunk
            ThreadPool::global().run(w_count, [&](int c) {
                auto [r0, r1] = chunk_range(a.rows, w_count, c);
                for (index_t r = r0; r < r1; ++r) {
                    real_t sum = 0;
                    for (int w = 0; w < w_count; ++w) sum += acc[static_cast<size_t>(w)][r];
                    y[r] = sum;
                }
            });
        }
        MultiplyOutput out = MultiplyOutput::from_dense(std::move(y));
        for (const KernelCounters& lc : local) {
            out.counters.values_read += lc.values_read;
            out.counters.cas_retries += lc.cas_retries;
        }
        return out;
    }

    // Sort write-back: emit (row, product) pairs per worker, sort each
    // buffer in place, merge in worker order, reduce by key sequentially.
    std::vector<std::vector<RowVal>> bufs(static_cast<size_t>(w_count));
    ThreadPool::global().run(w_count, [&](int w) {
        const Share& sh = shares[static_cast<size_t>(w)];
        KernelCounters& lc = local[static_cast<size_t>(w)];
        std::vector<RowVal>& buf = bufs[static_cast<size_t>(w)];
        for (index_t s = sh.s_begin; s < sh.s_end; ++s) {
            const real_t xv = x.values[static_cast<size_t>(s)];
            auto [lo, hi] = entry_range(sh, s);
            for (index_t k = lo; k < hi; ++k) {
                buf.push_back({a.row_indices[static_cast<size_t>(k)],
                               a.values[static_cast<size_t>(k)] * xv});
                if constexpr (kCountersEnabled) ++lc.values_read;
            }
        }
        std::sort(buf.begin(), buf.end(),
                  [](const RowVal& p, const RowVal& q) { return p.row < q.row; });
        if constexpr (kCountersEnabled) lc.pairs_emitted = buf.size();
    });
    std::vector<RowVal> merged = detail::merge_sorted_buffers(bufs);
    MultiplyOutput out = MultiplyOutput::from_sparse(reduce_sorted_pairs(merged, a.rows));
    for (const KernelCounters& lc : local) {
        out.counters.values_read += lc.values_read;
        out.counters.pairs_emitted += lc.pairs_emitted;
    }
    return out;
}

// =============================================================================
// Dispatch
// =============================================================================

inline MultiplyOutput run_kernel(const DualMatrix& m, KernelId id, const OperandViews& views,
                                 const KernelConfig& cfg = {}) {
    switch (id.pattern) {
        case Pattern::SpMV:
            if (!views.dense) throw std::invalid_argument("SpMV requires a dense operand");
            return spmv(m, *views.dense, id.workload, cfg);
        case Pattern::RowSpMSpV:
            if (!views.dense || !views.mask)
                throw std::invalid_argument("RowSpMSpV requires dense values and a bitmask");
            return spmspv_row(m, *views.dense, *views.mask, id.workload, cfg);
        case Pattern::ColSpMSpV:
            if (!views.sparse) throw std::invalid_argument("ColSpMSpV requires a sparse operand");
            return spmspv_col(m, *views.sparse, id.workload, id.writeback, cfg);
    }
    throw std::invalid_argument("invalid kernel id");
}

} // namespace adaspmv
