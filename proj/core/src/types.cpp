#include "fredholm/types.hpp"

#include "fredholm/errors.hpp"

namespace fredholm {

void validate(const ParticleCloud& cloud) {
    if (cloud.size() < 1 || cloud.dim() < 1) throw InputError("particle cloud is empty");
    if (!cloud.points.allFinite()) throw InputError("particle cloud has non-finite coordinates");
}

void validate(const ObservationSample& sample) {
    if (sample.size() < 1 || sample.dim() < 1) throw InputError("observation sample is empty");
    if (!sample.points.allFinite()) throw InputError("observation sample has non-finite entries");
}

}  // namespace fredholm
