#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace edgehr::eval {

inline constexpr std::size_t kDefaultFolds = 7;

struct FoldSplit {
    std::size_t k = 0;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
};

/// Seeded shuffle of `ids`, then contiguous chunks whose sizes differ by at
/// most one (the first n mod k folds get the extra id). Requires n >= k.
std::vector<FoldSplit> kfold(std::span<const std::size_t> ids, std::size_t k, std::uint64_t seed);

} // namespace edgehr::eval
