#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ktransfer {

// Non-owning view over sorted (index, value) pairs.
struct SparseView {
  std::size_t dim = 0;
  std::span<const std::uint32_t> index;
  std::span<const double> value;

  std::size_t nnz() const { return index.size(); }
};

// Indices strictly increasing and < dim; no explicit zeros.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  SparseView view() const { return {dim, index, value}; }
  operator SparseView() const { return view(); }  // NOLINT(google-explicit-constructor)
  std::size_t nnz() const { return index.size(); }
  double at(std::uint32_t i) const;
  std::vector<double> dense() const;
  bool well_formed() const;

  bool operator==(const SparseVector&) const = default;
};

// Accumulates entries in any order; finish() sorts, merges duplicates and drops zeros.
class SparseBuilder {
 public:
  explicit SparseBuilder(std::size_t dim = 0) : dim_(dim) {}
  void reset(std::size_t dim) {
    dim_ = dim;
    entries_.clear();
  }
  void add(std::size_t index, double value) {
    if (value != 0.0) entries_.emplace_back(static_cast<std::uint32_t>(index), value);
  }
  std::size_t dim() const { return dim_; }
  SparseVector finish();

 private:
  std::size_t dim_;
  std::vector<std::pair<std::uint32_t, double>> entries_;
};

// Row-compressed design matrix with binary labels.
class Design {
 public:
  explicit Design(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  SparseView row(std::size_t i) const {
    const auto b = row_ptr_[i], e = row_ptr_[i + 1];
    return {dim_, std::span(index_).subspan(b, e - b), std::span(value_).subspan(b, e - b)};
  }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

  void add_row(SparseView x, int label);
  void append(const Design& other);
  void reserve(std::size_t rows, std::size_t nnz);

 private:
  std::size_t dim_;
  std::vector<std::uint32_t> index_;
  std::vector<double> value_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint8_t> labels_;
};

}  // namespace ktransfer
