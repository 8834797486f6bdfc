#include "aclearn/dataset.hpp"

#include <string>

#include "aclearn/errors.hpp"

namespace aclearn {

Dataset::Dataset(std::vector<std::uint32_t> arities, std::vector<std::uint8_t> cells)
    : arities_(std::move(arities)), cells_(std::move(cells)) {
    if (arities_.empty()) throw DataError("dataset has no variables");
    for (auto a : arities_)
        if (a < 2 || a > kMaxArity) throw DataError("arity " + std::to_string(a) + " outside [2, 64]");
    if (cells_.size() % arities_.size() != 0) throw DataError("ragged dataset");
    rows_ = cells_.size() / arities_.size();
    for (std::size_t k = 0; k < cells_.size(); ++k)
        if (cells_[k] >= arities_[k % arities_.size()])
            throw DataError("row " + std::to_string(k / arities_.size()) + ": value out of range");
}

std::vector<ValueIndex> Dataset::row_values(std::size_t r) const {
    auto cells = row(r);
    return {cells.begin(), cells.end()};
}

double Dataset::density() const {
    if (cells_.empty()) return 0.0;
    std::size_t nz = 0;
    for (auto c : cells_) nz += c != 0;
    return static_cast<double>(nz) / static_cast<double>(cells_.size());
}

Dataset Dataset::subset(std::span<const std::size_t> row_ids) const {
    std::vector<std::uint8_t> cells;
    cells.reserve(row_ids.size() * arities_.size());
    for (auto r : row_ids) {
        auto src = row(r);
        cells.insert(cells.end(), src.begin(), src.end());
    }
    return Dataset(arities_, std::move(cells));
}

}  // namespace aclearn
