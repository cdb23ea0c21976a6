#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coxsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// Zero-based coefficient indices, always kept sorted ascending.
using IndexList = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline IndexList all_indices(int p)
{
    IndexList idx(static_cast<size_t>(p));
    for (int j = 0; j < p; ++j) idx[static_cast<size_t>(j)] = j;
    return idx;
}

inline std::string to_string(const IndexList& idx)
{
    std::string s = "{";
    for (size_t k = 0; k < idx.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(idx[k] + 1);
    }
    return s + "}";
}

// ---------------------------------------------------------------------------
// Seeding. Every random stream is derived from (base seed, string key, index)
// so results do not depend on which worker ran which replicate.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t index = 0)
{
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ fnv1a(key));
    return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform draw on the open interval (0, 1) from the top 53 bits.
inline double uniform_open(Rng& rng)
{
    double u = 0.0;
    do {
        u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
}

/// Standard normal draw by Box-Muller, one value per call (no hidden state).
inline double standard_normal(Rng& rng)
{
    const double u1 = uniform_open(rng);
    const double u2 = uniform_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Fisher-Yates on [0, n) driven by our own rng so results are identical
/// across standard library implementations.
inline std::vector<int> random_permutation(int n, Rng& rng)
{
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    return perm;
}

} // namespace coxsel
