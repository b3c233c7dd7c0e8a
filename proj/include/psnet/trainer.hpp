#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "psnet/align.hpp"
#include "psnet/checkpoint.hpp"
#include "psnet/config.hpp"
#include "psnet/dataset.hpp"
#include "psnet/losses.hpp"
#include "psnet/model.hpp"
#include "psnet/optimizer.hpp"

namespace psnet {

struct TrainLogRow {
    std::uint64_t step = 0;  // cumulative optimizer updates after this epoch
    double total = 0, adacos = 0, gan = 0, similarity = 0, latent = 0, scale = 0;
};

inline const char* loss_csv_header() { return "step,L_total,L_adacos,L_gan,L_s,L_w,adacos_scale"; }

inline std::string loss_csv_line(const TrainLogRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  static_cast<unsigned long long>(r.step), r.total, r.adacos, r.gan, r.similarity,
                  r.latent, r.scale);
    return buf;
}

struct StepSettings {
    std::int64_t epochs = 0;
    double lr = 0;
    int batch = 0;
};

// Three-step optimization driver. All randomness derives from
// (seed, "stepK.epoch", epoch), so training is resumable at epoch boundaries
// with bitwise-identical trajectories.
template <typename T>
class Trainer {
public:
    Adam<T> opt_g, opt_d;
    std::uint64_t global_step = 0;
    std::vector<TrainLogRow> log;
    std::vector<std::string> class_identities;  // labels behind the classifier head

    Trainer(ModelState<T>& model, const Config& cfg) : model_(model), cfg_(cfg) {
        crop_ = model.cfg.image_size;
        beta1_ = cfg.get_double("train.beta1");
        beta2_ = cfg.get_double("train.beta2");
        seed_ = cfg.get_seed();
        sim_mode_ = similarity_mode_from(cfg);
    }

    StepSettings settings(int step) const {
        const std::string p = "train.step" + std::to_string(step) + ".";
        StepSettings s;
        s.epochs = cfg_.get_int(p + "epochs");
        s.lr = cfg_.get_double(p + "lr");
        s.batch = static_cast<int>(cfg_.get_int(p + "batch"));
        if (s.epochs < 0 || s.batch < 1)
            throw ConfigError("invalid settings for training step " + std::to_string(step));
        return s;
    }

    // Paired synthesis pretraining, identity head excluded.
    void run_step1(const PairedDataset<T>& data, std::int64_t from_epoch, std::int64_t to_epoch) {
        if (model_.cfg.synthesis == SynthesisMode::none)
            throw ConfigError("step 1 requires at least one synthesis branch");
        const StepSettings s = settings(1);
        const LossWeights<T> w = loss_weights_from<T>(cfg_, 1);
        if (from_epoch == 0) {
            auto gp = model_.generator_params();
            auto dp = model_.discriminator_params();
            opt_g.init(gp, s.lr, beta1_, beta2_);
            opt_d.init(dp, s.lr, beta1_, beta2_);
        }
        require_resumed("step 1");
        for (std::int64_t e = from_epoch; e < to_epoch; ++e) {
            rng::Stream rs(rng::derive(seed_, "step1.epoch", static_cast<std::uint64_t>(e)));
            run_joint_epoch(data, s.batch, w, false, rs);
        }
    }

    // Photo-only identity pretraining; everything but the mapping network and
    // the classifier head stays frozen.
    void run_step2(const PhotoDataset<T>& data, std::int64_t from_epoch, std::int64_t to_epoch) {
        if (data.num_identities() < 2)
            throw ConfigError("step 2 needs at least 2 identities, got " +
                              std::to_string(data.num_identities()));
        const StepSettings s = settings(2);
        if (from_epoch == 0) {
            model_.init_adacos(data.num_identities(), seed_);
            class_identities = data.identities;
            auto mp = model_.mapping_params();
            opt_g.init(mp, s.lr, beta1_, beta2_);
            opt_d = Adam<T>{};
        }
        require_resumed("step 2");
        auto params = model_.mapping_params();
        for (std::int64_t e = from_epoch; e < to_epoch; ++e) {
            rng::Stream rs(rng::derive(seed_, "step2.epoch", static_cast<std::uint64_t>(e)));
            std::vector<int> order(static_cast<std::size_t>(data.size()));
            std::iota(order.begin(), order.end(), 0);
            rs.shuffle(order);
            double loss_sum = 0;
            int batches = 0;
            for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(s.batch)) {
                const std::size_t b1 =
                    std::min(order.size(), b0 + static_cast<std::size_t>(s.batch));
                Tensor<T> photo;
                std::vector<int> labels;
                gather_photos(data, order, b0, b1, rs, photo, labels);
                zero_grads(params);
                typename MappingNetwork<T>::Cache mc;
                Tensor<T> wp = model_.mapping.forward(model_.to_encoder_input(photo), mc);
                typename AdaCosHead<T>::Cache ac;
                const T loss = model_.adacos.forward(wp, labels, ac);
                if (!std::isfinite(static_cast<double>(loss)))
                    throw NumericError("step 2 loss is not finite");
                Tensor<T> gfeat = model_.adacos.backward(ac);
                model_.mapping.backward(gfeat, mc);
                opt_g.step(params);
                model_.adacos.renormalize_rows();
                ++global_step;
                loss_sum += static_cast<double>(loss);
                ++batches;
            }
            TrainLogRow row;
            row.step = global_step;
            row.adacos = loss_sum / std::max(batches, 1);
            row.total = row.adacos;
            row.scale = static_cast<double>(model_.adacos.scale);
            log.push_back(row);
        }
    }

    // Full joint objective on the target identities; classifier head is
    // re-dimensioned for them.
    void run_step3(const PairedDataset<T>& data, std::int64_t from_epoch, std::int64_t to_epoch) {
        const StepSettings s = settings(3);
        const LossWeights<T> w = loss_weights_from<T>(cfg_, 3);
        if (from_epoch == 0) {
            model_.init_adacos(data.num_identities(), seed_);
            class_identities = data.identities;
            if (cfg_.get_bool("train.step3.reset_disc")) {
                if (model_.cfg.makes_photos()) {
                    rng::Stream r(rng::derive(seed_, "step3.reset_disc_photo"));
                    model_.disc_photo.init_weights(r);
                }
                if (model_.cfg.makes_sketches()) {
                    rng::Stream r(rng::derive(seed_, "step3.reset_disc_sketch"));
                    model_.disc_sketch.init_weights(r);
                }
            }
            auto gp = model_.generator_params();
            opt_g.init(gp, s.lr, beta1_, beta2_);
            auto dp = model_.discriminator_params();
            if (dp.empty())
                opt_d = Adam<T>{};
            else
                opt_d.init(dp, s.lr, beta1_, beta2_);
        }
        require_resumed("step 3");
        for (std::int64_t e = from_epoch; e < to_epoch; ++e) {
            rng::Stream rs(rng::derive(seed_, "step3.epoch", static_cast<std::uint64_t>(e)));
            run_joint_epoch(data, s.batch, w, true, rs);
        }
    }

    // Snapshot everything needed for an epoch-boundary resume.
    CheckpointData<T> make_checkpoint(int step, std::uint64_t epoch) {
        CheckpointData<T> ck;
        ck.step = step;
        ck.epoch = epoch;
        ck.global_step = global_step;
        ck.identities = class_identities;
        ck.config_echo = cfg_.echo();
        pack_model(ck, model_);
        if (opt_g.initialized()) pack_adam(ck, opt_g, "g");
        if (opt_d.initialized()) pack_adam(ck, opt_d, "d");
        return ck;
    }

    // Restores optimizer state for resuming inside checkpoint's step. The
    // model itself must already be restored (unpack_model).
    void restore_optimizers(const CheckpointData<T>& ck) {
        global_step = ck.global_step;
        class_identities = ck.identities;
        const StepSettings s = settings(ck.step);
        if (ck.find("opt.g.t")) {
            auto gp = ck.step == 2 ? model_.mapping_params() : model_.generator_params();
            unpack_adam(ck, opt_g, "g", gp, s.lr, beta1_, beta2_);
        }
        if (ck.find("opt.d.t")) {
            auto dp = model_.discriminator_params();
            unpack_adam(ck, opt_d, "d", dp, s.lr, beta1_, beta2_);
        }
    }

private:
    ModelState<T>& model_;
    Config cfg_;
    int crop_ = 0;
    double beta1_ = 0.5, beta2_ = 0.999;
    std::uint64_t seed_ = 0;
    SimilarityMode sim_mode_ = SimilarityMode::l1_plus_ssim;

    void require_resumed(const char* what) const {
        if (!opt_g.initialized())
            throw ConfigError(std::string(what) +
                              ": optimizer state absent (resume without restored state)");
    }

    // Shared-window crops keep photo and sketch pixel-aligned within a pair.
    void gather_pairs(const PairedDataset<T>& d, const std::vector<int>& order, std::size_t b0,
                      std::size_t b1, rng::Stream& rs, Tensor<T>& photo, Tensor<T>& sketch,
                      std::vector<int>& labels) const {
        const int n = static_cast<int>(b1 - b0);
        const int pc = d.photos[0].dim(0), sc = d.sketches[0].dim(0);
        photo = Tensor<T>({n, pc, crop_, crop_});
        sketch = Tensor<T>({n, sc, crop_, crop_});
        labels.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            const int src = order[b0 + static_cast<std::size_t>(i)];
            const auto& ph = d.photos[static_cast<std::size_t>(src)];
            const int oy = static_cast<int>(rs.uniform_int(0, ph.dim(1) - crop_));
            const int ox = static_cast<int>(rs.uniform_int(0, ph.dim(2) - crop_));
            copy_window(ph, photo, i, oy, ox);
            copy_window(d.sketches[static_cast<std::size_t>(src)], sketch, i, oy, ox);
            labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(src)];
        }
    }

    void gather_photos(const PhotoDataset<T>& d, const std::vector<int>& order, std::size_t b0,
                       std::size_t b1, rng::Stream& rs, Tensor<T>& photo,
                       std::vector<int>& labels) const {
        const int n = static_cast<int>(b1 - b0);
        const int pc = d.photos[0].dim(0);
        photo = Tensor<T>({n, pc, crop_, crop_});
        labels.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            const int src = order[b0 + static_cast<std::size_t>(i)];
            const auto& ph = d.photos[static_cast<std::size_t>(src)];
            const int oy = static_cast<int>(rs.uniform_int(0, ph.dim(1) - crop_));
            const int ox = static_cast<int>(rs.uniform_int(0, ph.dim(2) - crop_));
            copy_window(ph, photo, i, oy, ox);
            labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(src)];
        }
    }

    void copy_window(const Tensor<T>& src, Tensor<T>& dst, int n, int oy, int ox) const {
        const int C = src.dim(0);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < crop_; ++y)
                for (int x = 0; x < crop_; ++x)
                    dst.at(n, c, y, x) = src.at(c, oy + y, ox + x);
    }

    void run_joint_epoch(const PairedDataset<T>& data, int batch, const LossWeights<T>& w,
                         bool use_adacos, rng::Stream& rs) {
        std::vector<int> order(static_cast<std::size_t>(data.size()));
        std::iota(order.begin(), order.end(), 0);
        rs.shuffle(order);
        LossParts<double> sums;
        int batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(batch)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(batch));
            Tensor<T> photo, sketch;
            std::vector<int> labels;
            gather_pairs(data, order, b0, b1, rs, photo, sketch, labels);
            const LossParts<T> parts = joint_batch(photo, sketch, labels, w, use_adacos);
            (void)joint_loss(parts, w);  // numeric watchdog
            sums.adacos += static_cast<double>(parts.adacos);
            sums.gan += static_cast<double>(parts.gan);
            sums.similarity += static_cast<double>(parts.similarity);
            sums.latent += static_cast<double>(parts.latent);
            ++batches;
        }
        TrainLogRow row;
        row.step = global_step;
        const double inv = 1.0 / std::max(batches, 1);
        row.adacos = sums.adacos * inv;
        row.gan = sums.gan * inv;
        row.similarity = sums.similarity * inv;
        row.latent = sums.latent * inv;
        row.total = row.adacos + static_cast<double>(w.lambda_gan) * row.gan +
                    static_cast<double>(w.lambda_s) * row.similarity +
                    static_cast<double>(w.lambda_w) * row.latent;
        row.scale = model_.has_adacos() ? static_cast<double>(model_.adacos.scale) : 0.0;
        log.push_back(row);
    }

    // One alternating update: discriminators on detached fakes first, then the
    // mapping/generators (and classifier head when active).
    LossParts<T> joint_batch(const Tensor<T>& photo, const Tensor<T>& sketch,
                             const std::vector<int>& labels, const LossWeights<T>& w,
                             bool use_adacos) {
        const bool mk_s = model_.cfg.makes_sketches();
        const bool mk_p = model_.cfg.makes_photos();
        const int N = photo.dim(0);
        const int d = model_.cfg.latent_dim;

        Tensor<T> photo3 = model_.to_encoder_input(photo);
        Tensor<T> sketch3 = model_.to_encoder_input(sketch);
        typename MappingNetwork<T>::Cache mcp, mcs;
        Tensor<T> wp = model_.mapping.forward(photo3, mcp);
        Tensor<T> ws = model_.mapping.forward(sketch3, mcs);
        typename StyleGenerator<T>::Cache gcs, gcp;
        Tensor<T> fake_s, fake_p;
        if (mk_s) fake_s = model_.gen_sketch.forward(wp, gcs);
        if (mk_p) fake_p = model_.gen_photo.forward(ws, gcp);

        LossParts<T> parts;

        auto dparams = model_.discriminator_params();
        if (!dparams.empty()) {
            zero_grads(dparams);
            const Tensor<T> real_pair = concat_channels(photo, sketch);
            if (mk_s) {
                typename PatchDiscriminator<T>::Cache cr, cf;
                Tensor<T> lr = model_.disc_sketch.forward(real_pair, cr);
                Tensor<T> lf = model_.disc_sketch.forward(concat_channels(photo, fake_s), cf);
                Tensor<T> gr, gf;
                gan_discriminator_loss(lr, lf, &gr, &gf);
                model_.disc_sketch.backward(gr, cr);
                model_.disc_sketch.backward(gf, cf);
            }
            if (mk_p) {
                typename PatchDiscriminator<T>::Cache cr, cf;
                Tensor<T> lr = model_.disc_photo.forward(real_pair, cr);
                Tensor<T> lf = model_.disc_photo.forward(concat_channels(fake_p, sketch), cf);
                Tensor<T> gr, gf;
                gan_discriminator_loss(lr, lf, &gr, &gf);
                model_.disc_photo.backward(gr, cr);
                model_.disc_photo.backward(gf, cf);
            }
            opt_d.step(dparams);
        }

        auto gparams = model_.generator_params();
        zero_grads(gparams);
        Tensor<T> gwp({N, d}), gws({N, d});

        if (use_adacos) {
            Tensor<T> feats({2 * N, d});
            std::vector<int> labels2(static_cast<std::size_t>(2 * N));
            for (int i = 0; i < N; ++i) {
                for (int j = 0; j < d; ++j) {
                    feats.at(i, j) = wp.at(i, j);
                    feats.at(N + i, j) = ws.at(i, j);
                }
                labels2[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)];
                labels2[static_cast<std::size_t>(N + i)] = labels[static_cast<std::size_t>(i)];
            }
            typename AdaCosHead<T>::Cache ac;
            parts.adacos = model_.adacos.forward(feats, labels2, ac);
            Tensor<T> gfeat = model_.adacos.backward(ac);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < d; ++j) {
                    gwp.at(i, j) += gfeat.at(i, j);
                    gws.at(i, j) += gfeat.at(N + i, j);
                }
        }

        if (mk_s) {
            typename PatchDiscriminator<T>::Cache dc;
            Tensor<T> logits = model_.disc_sketch.forward(concat_channels(photo, fake_s), dc);
            Tensor<T> glog;
            parts.gan += gan_generator_loss(logits, &glog, w.lambda_gan);
            Tensor<T> gpair = model_.disc_sketch.backward(glog, dc);
            Tensor<T> gphoto_data, gfake_s;
            split_channels(gpair, photo.dim(1), gphoto_data, gfake_s);
            Tensor<T> gsim;
            parts.similarity += similarity_loss(fake_s, sketch, sim_mode_, &gsim, w.lambda_s);
            gfake_s.add(gsim);
            Tensor<T> gw = model_.gen_sketch.backward(gfake_s, gcs);
            gwp.add(gw);
        }
        if (mk_p) {
            typename PatchDiscriminator<T>::Cache dc;
            Tensor<T> logits = model_.disc_photo.forward(concat_channels(fake_p, sketch), dc);
            Tensor<T> glog;
            parts.gan += gan_generator_loss(logits, &glog, w.lambda_gan);
            Tensor<T> gpair = model_.disc_photo.backward(glog, dc);
            Tensor<T> gfake_p, gsketch_data;
            split_channels(gpair, photo.dim(1), gfake_p, gsketch_data);
            Tensor<T> gsim;
            parts.similarity += similarity_loss(fake_p, photo, sim_mode_, &gsim, w.lambda_s);
            gfake_p.add(gsim);
            Tensor<T> gw = model_.gen_photo.backward(gfake_p, gcp);
            gws.add(gw);
        }

        {
            Tensor<T> ga, gb;
            parts.latent = collaborative_loss(wp, ws, &ga, &gb, w.lambda_w);
            gwp.add(ga);
            gws.add(gb);
        }

        model_.mapping.backward(gwp, mcp);
        model_.mapping.backward(gws, mcs);

        opt_g.step(gparams);
        if (model_.has_adacos()) model_.adacos.renormalize_rows();
        ++global_step;
        return parts;
    }
};

// Evaluation-mode identity accuracy of the classifier head on center crops.
template <typename T>
double classification_accuracy(ModelState<T>& model, const PhotoDataset<T>& data) {
    if (!model.has_adacos()) throw ConfigError("classifier head not initialized");
    int hits = 0;
    for (int i = 0; i < data.size(); ++i) {
        Tensor<T> crop = center_crop(data.photos[static_cast<std::size_t>(i)],
                                     model.cfg.image_size);
        Tensor<T> code = model.encode_one(crop);
        T best = -std::numeric_limits<T>::infinity();
        int arg = -1;
        T n2 = 0;
        for (int j = 0; j < model.cfg.latent_dim; ++j) n2 += code[j] * code[j];
        const T nrm = std::sqrt(std::max(n2, T(1e-24)));
        for (int k = 0; k < model.adacos.num_classes; ++k) {
            T dot = 0, wn2 = 0;
            const T* row = model.adacos.weight.data() +
                           static_cast<std::int64_t>(k) * model.cfg.latent_dim;
            for (int j = 0; j < model.cfg.latent_dim; ++j) {
                dot += row[j] * code[j];
                wn2 += row[j] * row[j];
            }
            const T cosv = dot / (nrm * std::sqrt(std::max(wn2, T(1e-24))));
            if (cosv > best) {
                best = cosv;
                arg = k;
            }
        }
        if (arg == data.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / std::max(data.size(), 1);
}

}  // namespace psnet
