#include "vibias/block_structure.hpp"

#include "vibias/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace vibias {

namespace {
constexpr std::size_t kUnowned = std::numeric_limits<std::size_t>::max();
}

BlockStructure::BlockStructure(std::vector<std::vector<std::size_t>> blocks, std::size_t dim)
    : blocks_(std::move(blocks)), owner_(dim, kUnowned), dim_(dim) {
  if (blocks_.empty()) throw Error(ErrorCode::EmptyBlock, "block structure has no blocks");
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    if (blk.empty()) throw Error(ErrorCode::EmptyBlock, "block " + std::to_string(b) + " is empty");
    std::sort(blk.begin(), blk.end());
    for (std::size_t c : blk) {
      if (c >= dim) {
        throw Error(ErrorCode::InvalidArgument,
                    "coordinate " + std::to_string(c) + " outside dimension " + std::to_string(dim));
      }
      if (owner_[c] != kUnowned) {
        throw Error(ErrorCode::BlockOverlap,
                    "coordinate " + std::to_string(c) + " appears in more than one block");
      }
      owner_[c] = b;
    }
  }
  for (std::size_t c = 0; c < dim; ++c) {
    if (owner_[c] == kUnowned) {
      throw Error(ErrorCode::InvalidArgument,
                  "coordinate " + std::to_string(c) + " is not covered by any block");
    }
  }
}

BlockStructure BlockStructure::fully_factorized(std::size_t dim) {
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t i = 0; i < dim; ++i) blocks.push_back({i});
  return {std::move(blocks), dim};
}

BlockStructure BlockStructure::single_block(std::size_t dim) {
  std::vector<std::size_t> all(dim);
  for (std::size_t i = 0; i < dim; ++i) all[i] = i;
  return {{std::move(all)}, dim};
}

std::vector<std::size_t> BlockStructure::complement(std::size_t b) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < dim_; ++c) {
    if (owner_[c] != b) out.push_back(c);
  }
  return out;
}

}  // namespace vibias
