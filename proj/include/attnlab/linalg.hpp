#pragma once

#include <string>
#include <vector>

#include "attnlab/errors.hpp"
#include "attnlab/precision.hpp"

namespace attnlab {

template <class R>
using Vec = std::vector<R>;

// Dense row-major matrix over the scalar backend R.
template <class R>
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(size_t(rows) * cols, R(0)) {
        if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
    }

    static Mat zeros(int rows, int cols) { return Mat(rows, cols); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = R(1);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    R& operator()(int r, int c) { return a_[size_t(r) * cols_ + c]; }
    const R& operator()(int r, int c) const { return a_[size_t(r) * cols_ + c]; }

    const std::vector<R>& data() const { return a_; }
    std::vector<R>& data() { return a_; }

    // y = M x
    Vec<R> apply(const Vec<R>& x) const {
        if (int(x.size()) != cols_) throw DimensionError("matrix-vector size mismatch");
        Vec<R> y(rows_, R(0));
        for (int r = 0; r < rows_; ++r) {
            R acc(0);
            const R* row = &a_[size_t(r) * cols_];
            for (int c = 0; c < cols_; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
        return y;
    }

    bool operator==(const Mat& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
    }

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<R> a_;
};

template <class R>
bool all_finite(const Vec<R>& v) {
    for (const R& x : v)
        if (!RealOps<R>::finite(x)) return false;
    return true;
}

template <class R>
bool all_finite(const Mat<R>& m) {
    for (const R& x : m.data())
        if (!RealOps<R>::finite(x)) return false;
    return true;
}

template <class R>
void require_finite(const Vec<R>& v, const char* where) {
    if (!all_finite(v)) throw PrecisionError(where);
}

// Sparsity view of a matrix: which rows have any nonzero entry, and the
// nonzero column list per such row. Skipping structural zeros never changes a
// finite result (the skipped products are exact zeros), it only saves work on
// the hand-constructed models whose matrices are almost empty.
template <class R>
struct RowSupport {
    std::vector<int> rows;                   // rows with at least one nonzero
    std::vector<std::vector<int>> cols;      // parallel to rows

    explicit RowSupport(const Mat<R>& m) {
        for (int r = 0; r < m.rows(); ++r) {
            std::vector<int> nz;
            for (int c = 0; c < m.cols(); ++c)
                if (!(m(r, c) == R(0))) nz.push_back(c);
            if (!nz.empty()) {
                rows.push_back(r);
                cols.push_back(std::move(nz));
            }
        }
    }

    bool row_present(int r) const {
        for (int x : rows)
            if (x == r) return true;
        return false;
    }
};

}  // namespace attnlab
