#include "edgehr/eval/cv.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"

#include <string>

namespace edgehr::eval {

std::vector<FoldSplit> kfold(std::span<const std::size_t> ids, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(errc::invalid_argument, "k-fold needs k >= 2");
    const std::size_t n = ids.size();
    if (n < k) {
        throw Error(errc::invalid_argument, "k-fold needs at least k ids (" + std::to_string(n) + " < " + std::to_string(k) + ")");
    }
    std::vector<std::size_t> order(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<FoldSplit> folds(k);
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].k = f;
        folds[f].test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(start + size));
        folds[f].train_ids.reserve(n - size);
        folds[f].train_ids.insert(folds[f].train_ids.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(start));
        folds[f].train_ids.insert(folds[f].train_ids.end(), order.begin() + static_cast<std::ptrdiff_t>(start + size), order.end());
        start += size;
    }
    return folds;
}

} // namespace edgehr::eval
