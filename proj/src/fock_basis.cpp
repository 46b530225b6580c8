#include <algorithm>
#include <sstream>

#include "nelson/fock.hpp"

namespace nelson {

namespace {

std::uint64_t binomial(std::uint64_t a, std::uint64_t b) {
    if (b > a) return 0;
    b = std::min(b, a - b);
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 1; i <= b; ++i) {
        acc = acc * (a - b + i) / i;
        if (acc > static_cast<unsigned __int128>(UINT64_MAX)) throw SizingError("binomial coefficient overflow");
    }
    return static_cast<std::uint64_t>(acc);
}

}  // namespace

std::uint64_t multiset_count(std::uint64_t G, std::uint64_t n) {
    if (n == 0) return 1;
    if (G == 0) return 0;
    return binomial(G + n - 1, n);
}

FockBasis::FockBasis(const MomentumGrid& grid, int n_max, std::size_t dimension_cap)
    : n_max_(n_max), G_(grid.size()) {
    if (n_max < 1) throw ConfigError("n_max must be at least 1");
    offsets_.assign(1, 0);
    for (int n = 0; n <= n_max; ++n) {
        const std::uint64_t d = multiset_count(static_cast<std::uint64_t>(G_), static_cast<std::uint64_t>(n));
        if (offsets_.back() + d > dimension_cap) {
            std::ostringstream os;
            os << "Fock dimension cap " << dimension_cap << " exceeded in sector n=" << n << " (sector dimension " << d
               << ")";
            throw SizingError(os.str());
        }
        offsets_.push_back(offsets_.back() + static_cast<std::size_t>(d));
    }
    flat_.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 1; n <= n_max; ++n) {
        const std::size_t dim = sector_dimension(n);
        auto& store = flat_[static_cast<std::size_t>(n)];
        store.assign(dim * static_cast<std::size_t>(n), 0);
        std::vector<int> cur(static_cast<std::size_t>(n), 0);
        // Odometer over nondecreasing sequences; each lands at its colex rank.
        while (true) {
            const std::uint64_t r = rank(cur);
            std::copy(cur.begin(), cur.end(), store.begin() + static_cast<std::ptrdiff_t>(r * n));
            int pos = n - 1;
            while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == G_ - 1) --pos;
            if (pos < 0) break;
            const int v = cur[static_cast<std::size_t>(pos)] + 1;
            for (int j = pos; j < n; ++j) cur[static_cast<std::size_t>(j)] = v;
        }
    }
}

std::vector<std::size_t> FockBasis::sector_dimensions() const {
    std::vector<std::size_t> dims;
    for (int n = 0; n <= n_max_; ++n) dims.push_back(sector_dimension(n));
    return dims;
}

int FockBasis::sector_of(std::size_t index) const {
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    return static_cast<int>(it - offsets_.begin()) - 1;
}

std::span<const int> FockBasis::state(std::size_t index) const {
    const int n = sector_of(index);
    if (n < 0 || n > n_max_) throw RangeError("basis index out of range");
    if (n == 0) return {};
    const auto& store = flat_[static_cast<std::size_t>(n)];
    const std::size_t local = index - offsets_[static_cast<std::size_t>(n)];
    return {store.data() + local * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
}

std::uint64_t FockBasis::rank(std::span<const int> sorted_modes) const {
    // Colex rank of the strictly increasing sequence c_j = i_j + j.
    std::uint64_t r = 0;
    for (std::size_t j = 0; j < sorted_modes.size(); ++j)
        r += binomial(static_cast<std::uint64_t>(sorted_modes[j]) + j, j + 1);
    return r;
}

std::size_t FockBasis::index_of(std::span<const int> sorted_modes) const {
    const auto n = static_cast<int>(sorted_modes.size());
    if (n > n_max_) throw RangeError("state exceeds boson-number truncation");
    for (std::size_t j = 0; j < sorted_modes.size(); ++j) {
        if (sorted_modes[j] < 0 || sorted_modes[j] >= G_) throw RangeError("mode index out of range");
        if (j > 0 && sorted_modes[j] < sorted_modes[j - 1]) throw RangeError("state is not canonically sorted");
    }
    return offsets_[static_cast<std::size_t>(n)] + static_cast<std::size_t>(rank(sorted_modes));
}

}  // namespace nelson
