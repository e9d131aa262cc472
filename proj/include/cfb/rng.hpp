#ifndef CFB_RNG_HPP
#define CFB_RNG_HPP

#include <cstdint>
#include <cmath>
#include <vector>

namespace cfb {

// Counter-based generator built on splitmix64. Deterministic across
// platforms and independent of any scheduling order, which is what the
// multi-run reproducibility contract needs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1). 53-bit mantissa, identical on every platform.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

    // Gamma(a, 1) draw: Marsaglia-Tsang squeeze for a >= 1, boosted by
    // the u^(1/a) reduction below 1.
    double next_gamma(double a) {
        if (a < 1.0) {
            double u = next_double();
            if (u <= 0.0) u = 0x1.0p-53;
            return next_gamma(a + 1.0) * std::pow(u, 1.0 / a);
        }
        double d = a - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double u1 = next_double();
            if (u1 <= 0.0) u1 = 0x1.0p-53;
            double u2 = next_double();
            double n = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
            double v = 1.0 + c * n;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = next_double();
            if (u < 1.0 - 0.0331 * n * n * n * n) return d * v;
            if (u <= 0.0) u = 0x1.0p-53;
            if (std::log(u) < 0.5 * n * n + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Symmetric Dirichlet(alpha,...,alpha) draw of dimension k.
    std::vector<double> next_dirichlet(int k, double alpha) {
        std::vector<double> p(static_cast<std::size_t>(k));
        double total = 0.0;
        for (double& x : p) {
            x = next_gamma(alpha);
            total += x;
        }
        if (total <= 0.0) {
            for (double& x : p) x = 1.0 / k;
            return p;
        }
        for (double& x : p) x /= total;
        return p;
    }

    // Uniform draw from the probability simplex of dimension k
    // (Dirichlet(1,...,1) via normalized exponentials).
    std::vector<double> next_simplex(int k) {
        std::vector<double> p(k);
        double total = 0.0;
        for (int i = 0; i < k; ++i) {
            double u = next_double();
            if (u <= 0.0) u = 0x1.0p-53;
            p[i] = -std::log(u);
            total += p[i];
        }
        for (double& x : p) x /= total;
        return p;
    }

private:
    std::uint64_t state_;
};

// Derives the seed for a child stream (EM run i, bench model i, ...)
// from a master seed. Documented splitting rule: one splitmix64 step of
// master XOR the golden-ratio-scrambled index.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    Rng r(master ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    return r.next_u64();
}

} // namespace cfb

#endif
