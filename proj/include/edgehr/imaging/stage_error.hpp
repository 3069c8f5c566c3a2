#pragma once

#include "edgehr/common/error.hpp"

#include <string>

namespace edgehr::imaging {

/// Imaging failure tagged with the pipeline stage that raised it
/// (white_balance, crop, features, decode).
class StageError : public Error {
public:
    StageError(errc code, std::string stage, const std::string& message)
        : Error(code, stage + ": " + message), stage_(std::move(stage)), detail_(message) {}

    const std::string& stage() const noexcept { return stage_; }
    // The message without the stage prefix that what() carries.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string stage_;
    std::string detail_;
};

} // namespace edgehr::imaging
