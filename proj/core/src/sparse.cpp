#include "ktransfer/sparse.hpp"

#include <algorithm>

namespace ktransfer {

double SparseVector::at(std::uint32_t i) const {
  auto it = std::lower_bound(index.begin(), index.end(), i);
  if (it == index.end() || *it != i) return 0.0;
  return value[static_cast<std::size_t>(it - index.begin())];
}

std::vector<double> SparseVector::dense() const {
  std::vector<double> d(dim, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) d[index[k]] = value[k];
  return d;
}

bool SparseVector::well_formed() const {
  if (index.size() != value.size()) return false;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= dim || value[k] == 0.0) return false;
    if (k > 0 && index[k] <= index[k - 1]) return false;
  }
  return true;
}

SparseVector SparseBuilder::finish() {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector v;
  v.dim = dim_;
  v.index.reserve(entries_.size());
  v.value.reserve(entries_.size());
  for (std::size_t k = 0; k < entries_.size();) {
    const auto idx = entries_[k].first;
    double sum = 0.0;
    for (; k < entries_.size() && entries_[k].first == idx; ++k) sum += entries_[k].second;
    if (sum != 0.0) {
      v.index.push_back(idx);
      v.value.push_back(sum);
    }
  }
  entries_.clear();
  return v;
}

void Design::add_row(SparseView x, int label) {
  index_.insert(index_.end(), x.index.begin(), x.index.end());
  value_.insert(value_.end(), x.value.begin(), x.value.end());
  row_ptr_.push_back(index_.size());
  labels_.push_back(static_cast<std::uint8_t>(label));
}

void Design::append(const Design& other) {
  for (std::size_t i = 0; i < other.rows(); ++i) add_row(other.row(i), other.label(i));
}

void Design::reserve(std::size_t rows, std::size_t nnz) {
  index_.reserve(nnz);
  value_.reserve(nnz);
  row_ptr_.reserve(rows + 1);
  labels_.reserve(rows);
}

}  // namespace ktransfer
