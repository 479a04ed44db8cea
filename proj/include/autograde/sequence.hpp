#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "autograde/error.hpp"
#include "autograde/matrix.hpp"

namespace autograde {

// L x d matrix stored by rows with explicit zeros dropped. Token-level
// embeddings are mostly padding (and one-hot for hashed TF-IDF), so the
// neural layers iterate over stored entries only.
class Sequence {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  Sequence() = default;
  Sequence(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  static Sequence from_dense(const Matrix& m) {
    Sequence s;
    s.rows_ = m.rows();
    s.cols_ = m.cols();
    s.row_ptr_.assign(1, 0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m(r, c) != 0.0) s.entries_.push_back({static_cast<std::uint32_t>(c), m(r, c)});
      }
      s.row_ptr_.push_back(s.entries_.size());
    }
    return s;
  }

  // Appends to row `r`; rows must be filled in order.
  void push(std::size_t r, std::uint32_t col, double value) {
    if (r >= rows_ || col >= cols_) throw ShapeError("sequence entry out of range");
    if (value == 0.0) return;
    if (row_ptr_[r + 1] != entries_.size()) throw ShapeError("sequence rows must be filled in order");
    entries_.push_back({col, value});
    for (std::size_t i = r + 1; i <= rows_; ++i) row_ptr_[i] = entries_.size();
  }

  Matrix to_dense() const {
    Matrix m(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (const auto& e : row(r)) m(r, e.col) = e.value;
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return entries_.size(); }

  std::span<const Entry> row(std::size_t r) const {
    return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  friend bool operator==(const Sequence&, const Sequence&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Entry> entries_;
};

}  // namespace autograde
