#ifndef ACLEARN_DATASET_HPP
#define ACLEARN_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aclearn/types.hpp"

namespace aclearn {

// Fully observed discrete data, row-major, one byte per cell.
class Dataset {
public:
    Dataset() = default;
    // Throws DataError on arity < 2, arity > kMaxArity, ragged or out-of-range cells.
    Dataset(std::vector<std::uint32_t> arities, std::vector<std::uint8_t> cells);

    std::size_t rows() const { return rows_; }
    std::size_t num_vars() const { return arities_.size(); }
    std::uint32_t arity(VarId v) const { return arities_[v]; }
    const std::vector<std::uint32_t>& arities() const { return arities_; }

    ValueIndex at(std::size_t row, VarId var) const { return cells_[row * arities_.size() + var]; }
    std::span<const std::uint8_t> row(std::size_t r) const {
        return {cells_.data() + r * arities_.size(), arities_.size()};
    }
    std::vector<ValueIndex> row_values(std::size_t r) const;

    // Fraction of non-zero cells.
    double density() const;

    Dataset subset(std::span<const std::size_t> row_ids) const;

private:
    std::vector<std::uint32_t> arities_;
    std::vector<std::uint8_t> cells_;
    std::size_t rows_ = 0;
};

}  // namespace aclearn

#endif  // ACLEARN_DATASET_HPP
