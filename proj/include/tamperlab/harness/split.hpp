#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <vector>

#include "tamperlab/rng.hpp"

namespace tamperlab::harness {

struct Split {
    std::vector<std::size_t> train, val, test;
};

// Stratified partition: within every stratum the 80/10/10 targets are met by
// largest-remainder allocation, so per-class proportions in each split match
// the whole dataset within one item.
inline Split split_stratified(const std::vector<std::string>& strata,
                              std::array<double, 3> fractions, std::uint64_t seed) {
    if (strata.size() < 10) throw std::invalid_argument("dataset too small to split (need >= 10 items)");
    const double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(fsum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

    Rng rng(hash_mix(seed, fnv1a("stratified-split")));
    Split out;
    for (auto& [key, idx] : groups) {
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

        const std::size_t n = idx.size();
        std::array<std::size_t, 3> count{};
        std::array<double, 3> frac_part{};
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            const double target = fractions[static_cast<std::size_t>(k)] * static_cast<double>(n);
            count[static_cast<std::size_t>(k)] = static_cast<std::size_t>(target);
            frac_part[static_cast<std::size_t>(k)] = target - static_cast<double>(count[static_cast<std::size_t>(k)]);
            assigned += count[static_cast<std::size_t>(k)];
        }
        while (assigned < n) { // largest remainder first; ties to the earlier split
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (frac_part[static_cast<std::size_t>(k)] > frac_part[static_cast<std::size_t>(best)] + 1e-12)
                    best = k;
            ++count[static_cast<std::size_t>(best)];
            frac_part[static_cast<std::size_t>(best)] = -1.0;
            ++assigned;
        }

        std::size_t pos = 0;
        for (std::size_t i = 0; i < count[0]; ++i) out.train.push_back(idx[pos++]);
        for (std::size_t i = 0; i < count[1]; ++i) out.val.push_back(idx[pos++]);
        for (std::size_t i = 0; i < count[2]; ++i) out.test.push_back(idx[pos++]);
    }
    return out;
}

} // namespace tamperlab::harness
