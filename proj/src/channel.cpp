#include "pkgwave/channel.hpp"

#include "pkgwave/error.hpp"

#include <cmath>

namespace pkgwave {

double ImpulseResponse::energy() const
{
    double e = 0.0;
    for (const auto& t : taps) {
        e += std::norm(t.amplitude);
    }
    return e;
}

void ImpulseResponse::validate() const
{
    double prev = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) {
        const auto& t = taps[k];
        if (!std::isfinite(t.delay) || t.delay < 0.0) {
            throw NumericError("impulse response: delay must be finite and non-negative");
        }
        if (!std::isfinite(t.amplitude.real()) || !std::isfinite(t.amplitude.imag())) {
            throw NumericError("impulse response: non-finite tap amplitude");
        }
        if (k > 0 && t.delay < prev) {
            throw NumericError("impulse response: delays must be ascending");
        }
        prev = t.delay;
    }
    if (!(sample_rate >= 0.0) || !std::isfinite(sample_rate)) {
        throw NumericError("impulse response: invalid sample rate");
    }
}

std::optional<std::size_t> ChannelMatrix::index_of(std::size_t tx, std::size_t rx) const
{
    for (std::size_t k = 0; k < responses.size(); ++k) {
        if (responses[k].tx == tx && responses[k].rx == rx) {
            return k;
        }
    }
    return std::nullopt;
}

const ImpulseResponse* ChannelMatrix::find(std::size_t tx, std::size_t rx) const
{
    const auto k = index_of(tx, rx);
    return k ? &responses[*k] : nullptr;
}

} // namespace pkgwave
