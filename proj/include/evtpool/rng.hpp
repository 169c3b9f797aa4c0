#ifndef EVTPOOL_RNG_HPP
#define EVTPOOL_RNG_HPP

#include <cmath>
#include <cstdint>

namespace evtpool {

// Small counter-splittable generator (splitmix64 core). Results are
// reproducible across platforms, unlike the std:: distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Derive an independent stream for replicate `index` of a master seed.
    static Rng split(std::uint64_t master, std::uint64_t index) {
        Rng mix(master ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        std::uint64_t s = mix.next_u64();
        return Rng(s ^ mix.next_u64());
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on (0,1): never returns 0 or 1, safe for log() and quantiles.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Exact Poisson sampling. Inversion by sequential search is used for
    // small means; larger means are split into independent chunks so the
    // running product never underflows.
    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0))
            return 0;
        if (mean <= 16.0)
            return poisson_small(mean);
        const std::uint64_t chunks = static_cast<std::uint64_t>(std::ceil(mean / 16.0));
        const double part = mean / static_cast<double>(chunks);
        std::uint64_t total = 0;
        for (std::uint64_t c = 0; c < chunks; ++c)
            total += poisson_small(part);
        return total;
    }

private:
    std::uint64_t poisson_small(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::uint64_t state_;
};

} // namespace evtpool

#endif
