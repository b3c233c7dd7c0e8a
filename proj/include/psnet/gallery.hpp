#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "psnet/errors.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// Enrolled photo codes. Mates carry real identities (at most one entry each);
// distractors enlarge the gallery under identities disjoint from every mate.
template <typename T>
struct GalleryIndex {
    std::vector<std::string> identities;
    std::vector<bool> is_mate;
    std::vector<Tensor<T>> codes;

    int size() const { return static_cast<int>(codes.size()); }

    bool has_identity(const std::string& id) const {
        return std::find(identities.begin(), identities.end(), id) != identities.end();
    }

    void add_mate(const std::string& id, Tensor<T> code) {
        if (has_identity(id)) throw DataError("duplicate gallery identity '" + id + "'");
        identities.push_back(id);
        is_mate.push_back(true);
        codes.push_back(std::move(code));
    }

    void add_distractor(const std::string& id, Tensor<T> code) {
        if (has_identity(id))
            throw DataError("distractor identity '" + id + "' collides with the gallery");
        identities.push_back(id);
        is_mate.push_back(false);
        codes.push_back(std::move(code));
    }
};

// 1 - cosine similarity on raw codes; direction-only, so any positive
// rescaling of either argument leaves it unchanged.
template <typename T>
T cosine_distance(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "cosine distance");
    T dot = 0, na = 0, nb = 0;
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > T(0)) || !(nb > T(0)) || !std::isfinite(static_cast<double>(na)) ||
        !std::isfinite(static_cast<double>(nb)))
        throw NumericError("cosine distance on zero-norm or non-finite code");
    return T(1) - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Full gallery ranking for one probe, distances nondecreasing, ties kept in
// gallery insertion order.
template <typename T>
struct MatchResult {
    std::string probe_identity;
    std::vector<std::pair<int, T>> ranking;  // (gallery index, distance)
};

template <typename T>
MatchResult<T> match_probe(const GalleryIndex<T>& g, const Tensor<T>& probe,
                           const std::string& probe_identity) {
    if (g.size() == 0) throw DataError("gallery is empty");
    MatchResult<T> r;
    r.probe_identity = probe_identity;
    r.ranking.reserve(static_cast<std::size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i)
        r.ranking.emplace_back(i, cosine_distance(probe, g.codes[static_cast<std::size_t>(i)]));
    std::stable_sort(r.ranking.begin(), r.ranking.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    return r;
}

// 1-based rank of the probe's mate, 0 when the gallery holds no mate.
template <typename T>
int mate_rank(const MatchResult<T>& r, const GalleryIndex<T>& g) {
    for (std::size_t pos = 0; pos < r.ranking.size(); ++pos)
        if (g.identities[static_cast<std::size_t>(r.ranking[pos].first)] == r.probe_identity)
            return static_cast<int>(pos) + 1;
    return 0;
}

// Fraction of mated probes whose mate appears within the first k ranks.
// k is clamped to the gallery size; unmated probes are excluded.
template <typename T>
double rank_k_accuracy(const std::vector<MatchResult<T>>& results, const GalleryIndex<T>& g,
                       int k) {
    if (k < 1) throw ConfigError("rank k must be >= 1");
    k = std::min(k, g.size());
    int mated = 0, hits = 0;
    for (const auto& r : results) {
        const int rank = mate_rank(r, g);
        if (rank == 0) continue;
        ++mated;
        if (rank <= k) ++hits;
    }
    if (mated == 0) throw DataError("no probe has a mate in the gallery");
    return static_cast<double>(hits) / mated;
}

struct CmcResult {
    std::vector<double> curve;  // curve[k-1] = rank-k accuracy, k = 1..gallery size
    int mated = 0;
    int unmated = 0;  // probes excluded for lack of a gallery mate
};

template <typename T>
CmcResult cmc_curve(const std::vector<MatchResult<T>>& results, const GalleryIndex<T>& g) {
    if (results.empty()) throw DataError("no probes to evaluate");
    CmcResult out;
    std::vector<int> rank_hist(static_cast<std::size_t>(g.size()) + 1, 0);
    for (const auto& r : results) {
        const int rank = mate_rank(r, g);
        if (rank == 0) {
            ++out.unmated;
            continue;
        }
        ++out.mated;
        ++rank_hist[static_cast<std::size_t>(rank)];
    }
    out.curve.assign(static_cast<std::size_t>(g.size()), 0.0);
    if (out.mated == 0) throw DataError("no probe has a mate in the gallery");
    int cum = 0;
    for (int k = 1; k <= g.size(); ++k) {
        cum += rank_hist[static_cast<std::size_t>(k)];
        out.curve[static_cast<std::size_t>(k - 1)] = static_cast<double>(cum) / out.mated;
    }
    return out;
}

}  // namespace psnet
