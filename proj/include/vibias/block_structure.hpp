#pragma once

#include <cstddef>
#include <vector>

namespace vibias {

/// Partition of the coordinates {0, ..., dim-1} into disjoint nonempty blocks.
/// Coordinates inside a block are kept sorted; block order is preserved.
class BlockStructure {
 public:
  BlockStructure(std::vector<std::vector<std::size_t>> blocks, std::size_t dim);

  static BlockStructure fully_factorized(std::size_t dim);
  static BlockStructure single_block(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  const std::vector<std::size_t>& block(std::size_t b) const { return blocks_.at(b); }
  const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }

  std::size_t block_of(std::size_t coord) const { return owner_.at(coord); }

  /// Sorted coordinates outside block b.
  std::vector<std::size_t> complement(std::size_t b) const;

  bool operator==(const BlockStructure& other) const = default;

 private:
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<std::size_t> owner_;
  std::size_t dim_;
};

}  // namespace vibias
