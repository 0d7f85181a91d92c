#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaspmv/parallel.hpp"
#include "adaspmv/types.hpp"

namespace adaspmv {

// =============================================================================
// Matrix and vector storage.
//
// All types are plain value types, immutable by convention after
// construction, and safe to share across workers. Indices are 0-based;
// column ids within a CSR row (and row ids within a CSC column) are
// strictly increasing.
// =============================================================================

struct Triplet {
    index_t row = 0;
    index_t col = 0;
    real_t value = 0;
};

struct CsrMatrix {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<index_t> row_offsets;  // rows + 1
    std::vector<index_t> col_indices;  // nnz
    std::vector<real_t> values;        // nnz

    index_t nnz() const { return row_offsets.empty() ? 0 : row_offsets.back(); }

    index_t row_degree(index_t r) const { return row_offsets[r + 1] - row_offsets[r]; }

    // Throws std::invalid_argument on any structural invariant violation.
    void validate() const {
        if (row_offsets.size() != static_cast<size_t>(rows) + 1)
            throw std::invalid_argument("csr: row_offsets length != rows+1");
        if (row_offsets.front() != 0)
            throw std::invalid_argument("csr: row_offsets[0] != 0");
        for (index_t r = 0; r < rows; ++r) {
            if (row_offsets[r + 1] < row_offsets[r])
                throw std::invalid_argument("csr: row_offsets not nondecreasing");
            for (index_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
                if (col_indices[k] < 0 || col_indices[k] >= cols)
                    throw std::invalid_argument("csr: column index out of range");
                if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1])
                    throw std::invalid_argument("csr: columns not strictly increasing in row " +
                                                std::to_string(r));
            }
        }
        if (col_indices.size() != static_cast<size_t>(nnz()) ||
            values.size() != static_cast<size_t>(nnz()))
            throw std::invalid_argument("csr: array lengths inconsistent with nnz");
    }
};

struct CscMatrix {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<index_t> col_offsets;  // cols + 1
    std::vector<index_t> row_indices;  // nnz
    std::vector<real_t> values;        // nnz

    index_t nnz() const { return col_offsets.empty() ? 0 : col_offsets.back(); }

    index_t col_degree(index_t c) const { return col_offsets[c + 1] - col_offsets[c]; }

    void validate() const {
        if (col_offsets.size() != static_cast<size_t>(cols) + 1)
            throw std::invalid_argument("csc: col_offsets length != cols+1");
        if (col_offsets.front() != 0)
            throw std::invalid_argument("csc: col_offsets[0] != 0");
        for (index_t c = 0; c < cols; ++c) {
            if (col_offsets[c + 1] < col_offsets[c])
                throw std::invalid_argument("csc: col_offsets not nondecreasing");
            for (index_t k = col_offsets[c]; k < col_offsets[c + 1]; ++k) {
                if (row_indices[k] < 0 || row_indices[k] >= rows)
                    throw std::invalid_argument("csc: row index out of range");
                if (k > col_offsets[c] && row_indices[k] <= row_indices[k - 1])
                    throw std::invalid_argument("csc: rows not strictly increasing in column " +
                                                std::to_string(c));
            }
        }
        if (row_indices.size() != static_cast<size_t>(nnz()) ||
            values.size() != static_cast<size_t>(nnz()))
            throw std::invalid_argument("csc: array lengths inconsistent with nnz");
    }
};

struct DenseVector {
    std::vector<real_t> values;

    DenseVector() = default;
    explicit DenseVector(index_t n, real_t fill = 0) : values(static_cast<size_t>(n), fill) {}
    explicit DenseVector(std::vector<real_t> v) : values(std::move(v)) {}

    index_t size() const { return static_cast<index_t>(values.size()); }
    real_t operator[](index_t i) const { return values[static_cast<size_t>(i)]; }
    real_t& operator[](index_t i) { return values[static_cast<size_t>(i)]; }
};

// indices strictly increasing and < length; explicit zero values are
// permitted and count as structural nonzeros.
struct SparseVector {
    index_t length = 0;
    std::vector<index_t> indices;
    std::vector<real_t> values;

    index_t nnz() const { return static_cast<index_t>(indices.size()); }

    void validate() const {
        if (indices.size() != values.size())
            throw std::invalid_argument("sparse vector: indices/values length mismatch");
        for (size_t k = 0; k < indices.size(); ++k) {
            if (indices[k] < 0 || indices[k] >= length)
                throw std::invalid_argument("sparse vector: index out of range");
            if (k > 0 && indices[k] <= indices[k - 1])
                throw std::invalid_argument("sparse vector: indices not strictly increasing");
        }
    }
};

// Packed membership bits over [0, length); one bit per index.
struct BitMask {
    index_t length = 0;
    std::vector<std::uint64_t> words;

    explicit BitMask(index_t n = 0)
        : length(n), words(static_cast<size_t>((n + 63) / 64), 0) {}

    void set(index_t i) { words[static_cast<size_t>(i >> 6)] |= std::uint64_t{1} << (i & 63); }

    bool test(index_t i) const {
        return (words[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1u;
    }

    index_t popcount() const {
        index_t total = 0;
        for (std::uint64_t w : words) total += std::popcount(w);
        return total;
    }
};

// =============================================================================
// Conversions
// =============================================================================

inline CscMatrix csr_to_csc(const CsrMatrix& m) {
    CscMatrix out;
    out.rows = m.rows;
    out.cols = m.cols;
    out.col_offsets.assign(static_cast<size_t>(m.cols) + 1, 0);
    const index_t nnz = m.nnz();
    out.row_indices.resize(static_cast<size_t>(nnz));
    out.values.resize(static_cast<size_t>(nnz));
    for (index_t k = 0; k < nnz; ++k) out.col_offsets[static_cast<size_t>(m.col_indices[k]) + 1]++;
    for (index_t c = 0; c < m.cols; ++c)
        out.col_offsets[static_cast<size_t>(c) + 1] += out.col_offsets[static_cast<size_t>(c)];
    std::vector<index_t> cursor(out.col_offsets.begin(), out.col_offsets.end() - 1);
    // scanning rows in order keeps row ids sorted within each column
    for (index_t r = 0; r < m.rows; ++r) {
        for (index_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
            index_t pos = cursor[static_cast<size_t>(m.col_indices[k])]++;
            out.row_indices[static_cast<size_t>(pos)] = r;
            out.values[static_cast<size_t>(pos)] = m.values[static_cast<size_t>(k)];
        }
    }
    return out;
}

inline CsrMatrix csc_to_csr(const CscMatrix& m) {
    CsrMatrix out;
    out.rows = m.rows;
    out.cols = m.cols;
    out.row_offsets.assign(static_cast<size_t>(m.rows) + 1, 0);
    const index_t nnz = m.nnz();
    out.col_indices.resize(static_cast<size_t>(nnz));
    out.values.resize(static_cast<size_t>(nnz));
    for (index_t k = 0; k < nnz; ++k) out.row_offsets[static_cast<size_t>(m.row_indices[k]) + 1]++;
    for (index_t r = 0; r < m.rows; ++r)
        out.row_offsets[static_cast<size_t>(r) + 1] += out.row_offsets[static_cast<size_t>(r)];
    std::vector<index_t> cursor(out.row_offsets.begin(), out.row_offsets.end() - 1);
    for (index_t c = 0; c < m.cols; ++c) {
        for (index_t k = m.col_offsets[c]; k < m.col_offsets[c + 1]; ++k) {
            index_t pos = cursor[static_cast<size_t>(m.row_indices[k])]++;
            out.col_indices[static_cast<size_t>(pos)] = c;
            out.values[static_cast<size_t>(pos)] = m.values[static_cast<size_t>(k)];
        }
    }
    return out;
}

// One logical matrix stored in both layouts so kernels never convert at
// multiply time.
struct DualMatrix {
    CsrMatrix csr;
    CscMatrix csc;

    index_t rows() const { return csr.rows; }
    index_t cols() const { return csr.cols; }
    index_t nnz() const { return csr.nnz(); }

    static DualMatrix from_csr(CsrMatrix m) {
        DualMatrix out;
        out.csc = csr_to_csc(m);
        out.csr = std::move(m);
        return out;
    }

    // Canonicalizes arbitrary triplets: sorts, sums duplicates.
    static DualMatrix from_triplets(index_t rows, index_t cols, std::span<const Triplet> ts) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
        CsrMatrix m;
        m.rows = rows;
        m.cols = cols;
        m.row_offsets.assign(static_cast<size_t>(rows) + 1, 0);
        for (const Triplet& t : ts) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
                throw std::invalid_argument("triplet coordinate out of range");
            m.row_offsets[static_cast<size_t>(t.row) + 1]++;
        }
        for (index_t r = 0; r < rows; ++r)
            m.row_offsets[static_cast<size_t>(r) + 1] += m.row_offsets[static_cast<size_t>(r)];
        std::vector<std::pair<index_t, real_t>> slots(ts.size());
        {
            std::vector<index_t> cursor(m.row_offsets.begin(), m.row_offsets.end() - 1);
            for (const Triplet& t : ts)
                slots[static_cast<size_t>(cursor[static_cast<size_t>(t.row)]++)] = {t.col, t.value};
        }
        m.col_indices.reserve(slots.size());
        m.values.reserve(slots.size());
        std::vector<index_t> new_offsets(static_cast<size_t>(rows) + 1, 0);
        for (index_t r = 0; r < rows; ++r) {
            auto first = slots.begin() + m.row_offsets[static_cast<size_t>(r)];
            auto last = slots.begin() + m.row_offsets[static_cast<size_t>(r) + 1];
            std::sort(first, last,
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            for (auto it = first; it != last;) {
                index_t col = it->first;
                real_t sum = 0;
                for (; it != last && it->first == col; ++it) sum += it->second;
                m.col_indices.push_back(col);
                m.values.push_back(sum);
            }
            new_offsets[static_cast<size_t>(r) + 1] = static_cast<index_t>(m.col_indices.size());
        }
        m.row_offsets = std::move(new_offsets);
        return from_csr(std::move(m));
    }
};

// Swap of the two layouts; O(nnz) copies, no re-sorting needed.
inline DualMatrix transpose(const DualMatrix& m) {
    DualMatrix out;
    out.csr.rows = m.cols();
    out.csr.cols = m.rows();
    out.csr.row_offsets = m.csc.col_offsets;
    out.csr.col_indices = m.csc.row_indices;
    out.csr.values = m.csc.values;
    out.csc.rows = m.cols();
    out.csc.cols = m.rows();
    out.csc.col_offsets = m.csr.row_offsets;
    out.csc.row_indices = m.csr.col_indices;
    out.csc.values = m.csr.values;
    return out;
}

// =============================================================================
// Vector format conversions
// =============================================================================

// Drops exact zeros. Multi-pass compaction (count, offsets, scatter) above
// the grain size, single pass below it; both orders are identical.
inline SparseVector dense_to_sparse(const DenseVector& v) {
    SparseVector out;
    out.length = v.size();
    const index_t n = v.size();
    ThreadPool& pool = ThreadPool::global();
    int chunks = pool.worker_count();
    if (n < kParallelGrain || chunks <= 1) {
        for (index_t i = 0; i < n; ++i) {
            if (v[i] != real_t{0}) {
                out.indices.push_back(i);
                out.values.push_back(v[i]);
            }
        }
        return out;
    }
    std::vector<index_t> counts(static_cast<size_t>(chunks), 0);
    pool.run(chunks, [&](int c) {
        auto [lo, hi] = chunk_range(n, chunks, c);
        index_t count = 0;
        for (index_t i = lo; i < hi; ++i) count += (v[i] != real_t{0});
        counts[static_cast<size_t>(c)] = count;
    });
    std::vector<index_t> offsets(static_cast<size_t>(chunks) + 1, 0);
    for (int c = 0; c < chunks; ++c) offsets[static_cast<size_t>(c) + 1] = offsets[static_cast<size_t>(c)] + counts[static_cast<size_t>(c)];
    out.indices.resize(static_cast<size_t>(offsets.back()));
    out.values.resize(static_cast<size_t>(offsets.back()));
    pool.run(chunks, [&](int c) {
        auto [lo, hi] = chunk_range(n, chunks, c);
        index_t pos = offsets[static_cast<size_t>(c)];
        for (index_t i = lo; i < hi; ++i) {
            if (v[i] != real_t{0}) {
                out.indices[static_cast<size_t>(pos)] = i;
                out.values[static_cast<size_t>(pos)] = v[i];
                ++pos;
            }
        }
    });
    return out;
}

inline DenseVector sparse_to_dense(const SparseVector& v) {
    DenseVector out(v.length);
    for (size_t k = 0; k < v.indices.size(); ++k) {
        if (v.indices[k] < 0 || v.indices[k] >= v.length)
            throw std::out_of_range("sparse vector index out of bounds");
        out[v.indices[k]] = v.values[k];
    }
    return out;
}

inline BitMask build_bitmask(const SparseVector& v) {
    BitMask mask(v.length);
    for (index_t i : v.indices) mask.set(i);
    return mask;
}

inline BitMask build_bitmask(const DenseVector& v) {
    BitMask mask(v.size());
    for (index_t i = 0; i < v.size(); ++i)
        if (v[i] != real_t{0}) mask.set(i);
    return mask;
}

// Number of matrix entries in columns of x's support: the minimal set of
// reads for a column-major multiply.
inline index_t effective_nnz(const CscMatrix& m, const SparseVector& x) {
    if (x.length != m.cols)
        throw std::invalid_argument("effective_nnz: vector length != matrix columns");
    const index_t k = x.nnz();
    return parallel_reduce(
        k, index_t{0},
        [&](index_t acc, index_t lo, index_t hi) {
            for (index_t i = lo; i < hi; ++i) acc += m.col_degree(x.indices[static_cast<size_t>(i)]);
            return acc;
        },
        [](index_t a, index_t b) { return a + b; });
}

} // namespace adaspmv
