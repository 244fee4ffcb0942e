#include "destrack/labels/split.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"

namespace destrack::labels {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split '" + std::string(s) + "'");
}

SplitAssignment::SplitAssignment(std::map<raster::PatchId, Split> assignment, double train_fraction,
                                 std::uint64_t seed)
    : assignment_(std::move(assignment)), train_fraction_(train_fraction), seed_(seed) {}

Split SplitAssignment::of(raster::PatchId id) const {
    auto it = assignment_.find(id);
    if (it == assignment_.end())
        throw LookupError("patch (" + std::to_string(id.row) + "," + std::to_string(id.col) + ") has no split");
    return it->second;
}

std::size_t SplitAssignment::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(assignment_.begin(), assignment_.end(), [&](const auto& kv) { return kv.second == s; }));
}

std::uint64_t patch_hash(raster::PatchId id, std::uint64_t seed) {
    const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id.row)) << 32) |
                     static_cast<std::uint32_t>(id.col);
    return derive_seed(seed, key);
}

SplitAssignment split_patches(std::span<const raster::PatchId> patches, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must be in (0, 1)");
    std::vector<std::pair<std::uint64_t, raster::PatchId>> ranked;
    ranked.reserve(patches.size());
    for (const auto& p : patches) ranked.emplace_back(patch_hash(p, seed), p);
    std::sort(ranked.begin(), ranked.end());
    ranked.erase(std::unique(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second == b.second; }),
                 ranked.end());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ranked.size())));
    std::map<raster::PatchId, Split> out;
    for (std::size_t i = 0; i < ranked.size(); ++i)
        out.emplace(ranked[i].second, i < n_train ? Split::Train : Split::Test);
    return SplitAssignment(std::move(out), train_fraction, seed);
}

}  // namespace destrack::labels
