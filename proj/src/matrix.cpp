#include "pgad/matrix.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "pgad/error.hpp"

namespace pgad {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == m.cols_, ErrorKind::Shape,
                "ragged rows: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                    " columns, expected " + std::to_string(m.cols_));
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] < rows_, ErrorKind::Range, "row index out of range");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::hconcat(const Matrix& left, const Matrix& right) {
    require(left.rows_ == right.rows_, ErrorKind::Shape,
            "hconcat row mismatch: " + std::to_string(left.rows_) + " vs " + std::to_string(right.rows_));
    Matrix out(left.rows_, left.cols_ + right.cols_);
    for (std::size_t r = 0; r < left.rows_; ++r) {
        auto dst = out.row(r);
        std::copy(left.row(r).begin(), left.row(r).end(), dst.begin());
        std::copy(right.row(r).begin(), right.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols_));
    }
    return out;
}

std::pair<Matrix, Matrix> Matrix::hsplit(std::size_t at) const {
    require(at <= cols_, ErrorKind::Shape, "hsplit column beyond width");
    Matrix left(rows_, at), right(rows_, cols_ - at);
    for (std::size_t r = 0; r < rows_; ++r) {
        auto src = row(r);
        std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(at), left.row(r).begin());
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(at), src.end(), right.row(r).begin());
    }
    return {std::move(left), std::move(right)};
}

}  // namespace pgad
