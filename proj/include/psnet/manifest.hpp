#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "psnet/errors.hpp"

namespace psnet {

enum class Modality { photo, sketch };

inline const char* modality_name(Modality m) { return m == Modality::photo ? "photo" : "sketch"; }

inline Modality parse_modality(const std::string& s, int line_no) {
    if (s == "photo") return Modality::photo;
    if (s == "sketch") return Modality::sketch;
    throw DataError("manifest line " + std::to_string(line_no) + ": unknown modality '" + s + "'");
}

struct SampleRecord {
    std::string identity;
    Modality modality = Modality::photo;
    std::string path;  // absolute, resolved against the manifest directory
    double lx = 0, ly = 0, rx = 0, ry = 0;
};

// One photo record and one sketch record of the same identity.
struct PairedSample {
    int photo_index = -1;
    int sketch_index = -1;
};

struct Manifest {
    std::vector<SampleRecord> records;
    std::vector<std::string> identities;  // first-appearance order

    // Identity -> index-aligned (photo, sketch) record pairs. Empty when the
    // manifest has no sketch records.
    std::map<std::string, std::vector<PairedSample>> pairs_by_identity;

    std::vector<int> photo_indices(const std::string& identity) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(records.size()); ++i)
            if (records[i].identity == identity && records[i].modality == Modality::photo)
                out.push_back(i);
        return out;
    }

    std::vector<int> sketch_indices(const std::string& identity) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(records.size()); ++i)
            if (records[i].identity == identity && records[i].modality == Modality::sketch)
                out.push_back(i);
        return out;
    }

    // Flattened pair list in identity order (canonical training order).
    std::vector<PairedSample> paired_records() const {
        std::vector<PairedSample> out;
        for (const auto& id : identities) {
            auto it = pairs_by_identity.find(id);
            if (it == pairs_by_identity.end()) continue;
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
        return out;
    }

    // The representative pairing per identity: first photo with first sketch.
    std::vector<std::pair<std::string, PairedSample>> representative_pairs() const {
        std::vector<std::pair<std::string, PairedSample>> out;
        for (const auto& id : identities) {
            auto it = pairs_by_identity.find(id);
            if (it == pairs_by_identity.end() || it->second.empty()) continue;
            out.emplace_back(id, it->second.front());
        }
        return out;
    }

    bool has_sketches() const {
        return std::any_of(records.begin(), records.end(),
                           [](const SampleRecord& r) { return r.modality == Modality::sketch; });
    }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline void parse_coord(const std::string& field, int line_no, double& x, double& y) {
    const auto comma = field.find(',');
    if (comma == std::string::npos)
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": expected 'x,y' coordinate, got '" + field + "'");
    char* end = nullptr;
    const std::string xs = field.substr(0, comma), ys = field.substr(comma + 1);
    x = std::strtod(xs.c_str(), &end);
    if (end == xs.c_str() || *end != '\0')
        throw DataError("manifest line " + std::to_string(line_no) + ": bad coordinate '" + xs +
                        "'");
    y = std::strtod(ys.c_str(), &end);
    if (end == ys.c_str() || *end != '\0')
        throw DataError("manifest line " + std::to_string(line_no) + ": bad coordinate '" + ys +
                        "'");
}

}  // namespace detail

// Tab-separated manifest: identity, modality, relative path, left eye "x,y",
// right eye "x,y". '#' lines are comments. Eye order is normalized so the
// left eye has the smaller x; exact ties are rejected.
inline Manifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
    const auto base_dir = manifest_path.has_parent_path()
                              ? manifest_path.parent_path()
                              : std::filesystem::path(".");

    Manifest m;
    std::map<std::string, int> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;

        const auto fields = detail::split_tabs(line);
        if (fields.size() != 5)
            throw DataError("manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));

        SampleRecord rec;
        rec.identity = fields[0];
        if (rec.identity.empty())
            throw DataError("manifest line " + std::to_string(line_no) + ": empty identity");
        rec.modality = parse_modality(fields[1], line_no);
        if (fields[2].empty())
            throw DataError("manifest line " + std::to_string(line_no) + ": empty path");
        rec.path = (base_dir / fields[2]).lexically_normal().string();
        detail::parse_coord(fields[3], line_no, rec.lx, rec.ly);
        detail::parse_coord(fields[4], line_no, rec.rx, rec.ry);
        if (rec.lx == rec.rx)
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": eyes share the same x coordinate");
        if (rec.lx > rec.rx) {
            std::swap(rec.lx, rec.rx);
            std::swap(rec.ly, rec.ry);
        }

        if (seen.emplace(rec.identity, 1).second) m.identities.push_back(rec.identity);
        m.records.push_back(std::move(rec));
    }

    if (m.records.empty()) throw DataError("manifest is empty: " + manifest_path.string());

    if (m.has_sketches()) {
        for (const auto& id : m.identities) {
            const auto photos = m.photo_indices(id);
            const auto sketches = m.sketch_indices(id);
            if (photos.empty() || photos.size() != sketches.size())
                throw DataError("identity '" + id + "' has " + std::to_string(photos.size()) +
                                " photo(s) and " + std::to_string(sketches.size()) +
                                " sketch(es); paired manifests need equal nonzero counts");
            std::vector<PairedSample> ps;
            for (size_t j = 0; j < photos.size(); ++j) ps.push_back({photos[j], sketches[j]});
            m.pairs_by_identity.emplace(id, std::move(ps));
        }
    }
    return m;
}

}  // namespace psnet
