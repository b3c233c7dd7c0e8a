#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "psnet/align.hpp"
#include "psnet/config.hpp"
#include "psnet/errors.hpp"
#include "psnet/manifest.hpp"
#include "psnet/png_io.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

struct AlignSettings {
    int align_size = 272;
    double eye_height = 0.35;
    double eye_span = 0.46;
};

inline AlignSettings align_settings_from(const Config& c) {
    AlignSettings s;
    s.align_size = static_cast<int>(c.get_int("data.align_size"));
    s.eye_height = c.get_double("data.eye_height");
    s.eye_span = c.get_double("data.eye_span");
    if (s.align_size < 8) throw ConfigError("data.align_size too small");
    if (s.eye_height <= 0 || s.eye_height >= 1 || s.eye_span <= 0 || s.eye_span >= 1)
        throw ConfigError("eye fractions must lie in (0, 1)");
    return s;
}

namespace detail {

template <typename T>
Tensor<T> adapt_channels(Tensor<T> img, int want, const std::string& path) {
    const int have = img.dim(0);
    if (have == want) return img;
    const int H = img.dim(1), W = img.dim(2);
    Tensor<T> out({want, H, W});
    if (have == 1 && want == 3) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) out.at(c, y, x) = img.at(0, y, x);
        return out;
    }
    if (have == 3 && want == 1) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.at(0, y, x) = static_cast<T>(0.299 * img.at(0, y, x) +
                                                 0.587 * img.at(1, y, x) +
                                                 0.114 * img.at(2, y, x));
        return out;
    }
    throw DataError("cannot adapt " + std::to_string(have) + "-channel image to " +
                    std::to_string(want) + " channels: " + path);
}

}  // namespace detail

// Loads one record, adapts channel count, and aligns eyes onto the canonical
// frame at align_size.
template <typename T>
Tensor<T> load_aligned(const SampleRecord& rec, const AlignSettings& s, int want_channels) {
    Tensor<float> raw = load_png(rec.path);
    Tensor<T> img(raw.shape());
    for (std::int64_t i = 0; i < raw.numel(); ++i) img[i] = static_cast<T>(raw[i]);
    img = detail::adapt_channels(std::move(img), want_channels, rec.path);
    const EyePair canon = canonical_eyes(s.align_size, s.eye_height, s.eye_span);
    return align_and_crop(img, EyePair{rec.lx, rec.ly, rec.rx, rec.ry}, s.align_size, canon);
}

// In-memory paired training set; photos[i] and sketches[i] form an aligned
// pair of identity identities[labels[i]].
template <typename T>
struct PairedDataset {
    std::vector<std::string> identities;
    std::vector<int> labels;
    std::vector<Tensor<T>> photos;
    std::vector<Tensor<T>> sketches;

    int size() const { return static_cast<int>(labels.size()); }
    int num_identities() const { return static_cast<int>(identities.size()); }
};

// Loads index-aligned pairs, optionally restricted to a subset of identities
// (subset order defines label order when given).
template <typename T>
PairedDataset<T> load_paired_dataset(const Manifest& m, const AlignSettings& s, int photo_channels,
                                     int sketch_channels,
                                     const std::vector<std::string>& subset = {}) {
    if (!m.has_sketches()) throw DataError("manifest has no sketch records; cannot build pairs");
    PairedDataset<T> ds;
    const std::vector<std::string>& ids = subset.empty() ? m.identities : subset;
    for (const auto& id : ids) {
        const auto it = m.pairs_by_identity.find(id);
        if (it == m.pairs_by_identity.end())
            throw DataError("identity '" + id + "' not present in manifest");
        const int label = static_cast<int>(ds.identities.size());
        ds.identities.push_back(id);
        for (const auto& pr : it->second) {
            ds.labels.push_back(label);
            ds.photos.push_back(load_aligned<T>(m.records[pr.photo_index], s, photo_channels));
            ds.sketches.push_back(load_aligned<T>(m.records[pr.sketch_index], s, sketch_channels));
        }
    }
    if (ds.labels.empty()) throw DataError("paired dataset is empty");
    return ds;
}

template <typename T>
struct PhotoDataset {
    std::vector<std::string> identities;
    std::vector<int> labels;
    std::vector<Tensor<T>> photos;

    int size() const { return static_cast<int>(labels.size()); }
    int num_identities() const { return static_cast<int>(identities.size()); }
};

// Loads every photo record; identity label order follows the manifest.
template <typename T>
PhotoDataset<T> load_photo_dataset(const Manifest& m, const AlignSettings& s, int photo_channels) {
    PhotoDataset<T> ds;
    for (const auto& id : m.identities) {
        const auto idx = m.photo_indices(id);
        if (idx.empty()) continue;
        const int label = static_cast<int>(ds.identities.size());
        ds.identities.push_back(id);
        for (int i : idx) {
            ds.labels.push_back(label);
            ds.photos.push_back(load_aligned<T>(m.records[i], s, photo_channels));
        }
    }
    if (ds.labels.empty()) throw DataError("photo dataset is empty");
    return ds;
}

}  // namespace psnet
