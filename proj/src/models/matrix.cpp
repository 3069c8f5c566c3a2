#include "edgehr/models/matrix.hpp"

#include "edgehr/common/error.hpp"

#include <cmath>

namespace edgehr::models {

TrainingMatrix TrainingMatrix::from_samples(std::span<const balance::LabeledSample> samples) {
    if (samples.empty()) throw Error(errc::invalid_argument, "training data is empty");
    TrainingMatrix m;
    m.rows = samples.size();
    m.cols = samples.front().features.values.size();
    if (m.cols == 0) throw Error(errc::invalid_argument, "training samples have no features");
    m.x.reserve(m.rows * m.cols);
    m.y.reserve(m.rows);
    for (const auto& s : samples) {
        if (s.features.values.size() != m.cols) throw Error(errc::invalid_argument, "ragged feature vectors");
        for (double v : s.features.values) {
            if (!std::isfinite(v)) throw Error(errc::invalid_argument, "non-finite feature value");
        }
        if (!std::isfinite(s.hb_gdl)) throw Error(errc::invalid_argument, "non-finite target");
        m.x.insert(m.x.end(), s.features.values.begin(), s.features.values.end());
        m.y.push_back(s.hb_gdl);
    }
    return m;
}

} // namespace edgehr::models
