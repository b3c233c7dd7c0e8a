#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "psnet/config.hpp"
#include "psnet/dataset.hpp"
#include "psnet/gallery.hpp"
#include "psnet/manifest.hpp"
#include "psnet/model.hpp"
#include "psnet/trainer.hpp"

namespace psnet {

// Encodes one manifest record: align, center-crop to the model input size,
// then map into the latent space.
template <typename T>
Tensor<T> encode_record(ModelState<T>& model, const SampleRecord& rec, const AlignSettings& a) {
    const int ch = rec.modality == Modality::photo ? model.cfg.photo_channels
                                                   : model.cfg.sketch_channels;
    Tensor<T> img = load_aligned<T>(rec, a, ch);
    if (a.align_size < model.cfg.image_size)
        throw ConfigError("data.align_size is smaller than model.image_size");
    return model.encode_one(center_crop(img, model.cfg.image_size));
}

// One mate per identity (its representative photo), plus every distractor
// photo under generated identities disjoint from the mates.
template <typename T>
GalleryIndex<T> build_gallery(ModelState<T>& model, const Manifest& mates,
                              const AlignSettings& a, const Manifest* distractors = nullptr) {
    GalleryIndex<T> g;
    for (const auto& id : mates.identities) {
        const auto photos = mates.photo_indices(id);
        if (photos.empty()) continue;
        g.add_mate(id, encode_record(model, mates.records[photos.front()], a));
    }
    if (g.size() == 0) throw DataError("gallery has no mates");
    if (distractors) {
        int counter = 0;
        for (const auto& rec : distractors->records) {
            if (rec.modality != Modality::photo) continue;
            char label[32];
            std::snprintf(label, sizeof label, "distractor:%05d", counter++);
            g.add_distractor(label, encode_record(model, rec, a));
        }
    }
    return g;
}

// All sketches of the probe identities, matched against the gallery.
template <typename T>
std::vector<MatchResult<T>> match_sketches(ModelState<T>& model, const Manifest& m,
                                           const std::vector<std::string>& probe_ids,
                                           const GalleryIndex<T>& g, const AlignSettings& a) {
    std::vector<MatchResult<T>> results;
    for (const auto& id : probe_ids)
        for (int idx : m.sketch_indices(id))
            results.push_back(match_probe(g, encode_record(model, m.records[idx], a), id));
    if (results.empty()) throw DataError("no probe sketches found");
    return results;
}

struct EvalReport {
    std::vector<CmcResult> partitions;
    std::vector<int> ranks;  // summary rank levels
    int gallery_size = 0;
    std::string config_echo;
};

inline double report_rank_accuracy(const CmcResult& c, int k) {
    const int kk = std::min<int>(k, static_cast<int>(c.curve.size()));
    return c.curve[static_cast<std::size_t>(kk - 1)];
}

inline double report_rank_mean(const EvalReport& r, int k) {
    double s = 0;
    for (const auto& p : r.partitions) s += report_rank_accuracy(p, k);
    return s / static_cast<double>(r.partitions.size());
}

inline double report_rank_std(const EvalReport& r, int k) {
    const std::size_t n = r.partitions.size();
    if (n < 2) return 0.0;
    const double mean = report_rank_mean(r, k);
    double ss = 0;
    for (const auto& p : r.partitions) {
        const double d = report_rank_accuracy(p, k) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n - 1));
}

// Deterministic identity split for partition p: shuffle by derived stream,
// then take train_count, then test_count.
inline void partition_split(const std::vector<std::string>& ids, std::uint64_t seed, int p,
                            int train_count, int test_count, std::vector<std::string>& train,
                            std::vector<std::string>& test) {
    if (train_count + test_count > static_cast<int>(ids.size()))
        throw ConfigError("partition split needs " + std::to_string(train_count + test_count) +
                          " identities, manifest has " + std::to_string(ids.size()));
    std::vector<std::string> pool = ids;
    rng::Stream rs(rng::derive(seed, "partition", static_cast<std::uint64_t>(p)));
    rs.shuffle(pool);
    train.assign(pool.begin(), pool.begin() + train_count);
    test.assign(pool.begin() + train_count, pool.begin() + train_count + test_count);
}

// Runs the scheduled pretraining steps (1 and/or 2) on a fresh model.
template <typename T>
ModelState<T> run_pretrain(const Config& cfg, std::ostream* progress = nullptr) {
    ModelState<T> model;
    model.init(model_config_from(cfg), cfg.get_seed());
    const auto schedule = parse_schedule(cfg.get_string("train.schedule"));
    const AlignSettings a = align_settings_from(cfg);
    Trainer<T> trainer(model, cfg);
    for (int step : schedule) {
        if (step == 1) {
            const auto path = cfg.get_string("data.pretrain_manifest");
            if (path.empty()) throw ConfigError("schedule includes step 1 but data.pretrain_manifest is unset");
            const Manifest m = load_manifest(path);
            const auto ds = load_paired_dataset<T>(m, a, model.cfg.photo_channels,
                                                   model.cfg.sketch_channels);
            if (progress) *progress << "step 1: " << ds.size() << " pairs\n" << std::flush;
            trainer.run_step1(ds, 0, trainer.settings(1).epochs);
        } else if (step == 2) {
            const auto path = cfg.get_string("data.photos_manifest");
            if (path.empty()) throw ConfigError("schedule includes step 2 but data.photos_manifest is unset");
            const Manifest m = load_manifest(path);
            const auto ds = load_photo_dataset<T>(m, a, model.cfg.photo_channels);
            if (progress) *progress << "step 2: " << ds.size() << " photos\n" << std::flush;
            trainer.run_step2(ds, 0, trainer.settings(2).epochs);
        }
    }
    return model;
}

// Full protocol: per partition, train step 3 on the train split (when
// scheduled) and rank every test sketch against a gallery of all mates plus
// optional distractors. Pretraining is shared across partitions unless
// configured otherwise.
template <typename T>
EvalReport cross_partition_eval(const Config& cfg, const ModelState<T>* shared_pretrained = nullptr,
                                std::ostream* progress = nullptr) {
    const AlignSettings a = align_settings_from(cfg);
    const auto schedule = parse_schedule(cfg.get_string("train.schedule"));
    const bool has_step3 =
        std::find(schedule.begin(), schedule.end(), 3) != schedule.end();
    const int partitions = static_cast<int>(cfg.get_int("eval.partitions"));
    const int train_count = static_cast<int>(cfg.get_int("eval.train_count"));
    const int test_count = static_cast<int>(cfg.get_int("eval.test_count"));
    if (partitions < 1) throw ConfigError("eval.partitions must be >= 1");

    const auto target_path = cfg.get_string("data.target_manifest");
    if (target_path.empty()) throw ConfigError("data.target_manifest is unset");
    const Manifest target = load_manifest(target_path);

    Manifest distractors;
    const bool have_distractors = !cfg.get_string("data.distractors_manifest").empty();
    if (have_distractors) distractors = load_manifest(cfg.get_string("data.distractors_manifest"));

    ModelState<T> pretrained;
    const bool share = cfg.get_bool("eval.shared_pretrain");
    if (shared_pretrained)
        pretrained = *shared_pretrained;
    else if (share)
        pretrained = run_pretrain<T>(cfg, progress);

    EvalReport report;
    report.ranks = parse_ranks(cfg.get_string("eval.ranks"));
    report.config_echo = cfg.echo();
    for (int p = 0; p < partitions; ++p) {
        std::vector<std::string> train_ids, test_ids;
        partition_split(target.identities, cfg.get_seed(), p, train_count, test_count, train_ids,
                        test_ids);
        ModelState<T> model =
            (shared_pretrained || share) ? pretrained : run_pretrain<T>(cfg, progress);
        if (has_step3) {
            const auto ds = load_paired_dataset<T>(target, a, model.cfg.photo_channels,
                                                   model.cfg.sketch_channels, train_ids);
            Trainer<T> trainer(model, cfg);
            if (progress)
                *progress << "partition " << (p + 1) << ": step 3 on " << ds.size() << " pairs\n"
                          << std::flush;
            trainer.run_step3(ds, 0, trainer.settings(3).epochs);
        }
        GalleryIndex<T> g =
            build_gallery(model, target, a, have_distractors ? &distractors : nullptr);
        const auto results = match_sketches(model, target, test_ids, g, a);
        report.partitions.push_back(cmc_curve(results, g));
        report.gallery_size = g.size();
        if (progress)
            *progress << "partition " << (p + 1) << ": rank-1 "
                      << report_rank_accuracy(report.partitions.back(), 1) << "\n"
                      << std::flush;
    }
    return report;
}

// CSV: one row per rank level k = 1..gallery size, per-partition accuracies
// then mean and sample standard deviation.
inline void export_report_csv(const EvalReport& r, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write report: " + path);
    os << "k";
    for (std::size_t p = 0; p < r.partitions.size(); ++p) os << ",part" << (p + 1);
    os << ",mean,std\n";
    char buf[64];
    for (int k = 1; k <= r.gallery_size; ++k) {
        os << k;
        for (const auto& part : r.partitions) {
            std::snprintf(buf, sizeof buf, ",%.6f", report_rank_accuracy(part, k));
            os << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f", report_rank_mean(r, k), report_rank_std(r, k));
        os << buf << "\n";
    }
    if (!os.flush()) throw DataError("failed writing report: " + path);
}

// Fixed-width summary with one row per configured rank level.
inline std::string format_report_summary(const EvalReport& r) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "partitions: %d\n", static_cast<int>(r.partitions.size()));
    out += buf;
    std::snprintf(buf, sizeof buf, "gallery size: %d\n", r.gallery_size);
    out += buf;
    out += "unmated probes excluded:";
    for (const auto& p : r.partitions) {
        std::snprintf(buf, sizeof buf, " %d", p.unmated);
        out += buf;
    }
    out += "\n\n";
    std::snprintf(buf, sizeof buf, "%-8s", "rank");
    out += buf;
    for (std::size_t p = 0; p < r.partitions.size(); ++p) {
        std::snprintf(buf, sizeof buf, "%10s", ("part" + std::to_string(p + 1)).c_str());
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%10s%10s\n", "mean", "std");
    out += buf;
    for (int k : r.ranks) {
        std::snprintf(buf, sizeof buf, "%-8d", k);
        out += buf;
        for (const auto& part : r.partitions) {
            std::snprintf(buf, sizeof buf, "%10.4f", report_rank_accuracy(part, k));
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%10.4f%10.4f\n", report_rank_mean(r, k),
                      report_rank_std(r, k));
        out += buf;
    }
    return out;
}

inline void export_report(const EvalReport& r, const std::string& csv_path,
                          const std::string& summary_path) {
    export_report_csv(r, csv_path);
    std::ofstream os(summary_path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write summary: " + summary_path);
    os << format_report_summary(r);
    if (!os.flush()) throw DataError("failed writing summary: " + summary_path);
}

}  // namespace psnet
