#pragma once

#include <string>
#include <vector>

#include "psnet/adacos.hpp"
#include "psnet/discriminator.hpp"
#include "psnet/encoder.hpp"
#include "psnet/generator.hpp"
#include "psnet/rng.hpp"

namespace psnet {

// Which synthesis branches exist. Ablations drop one or both directions;
// recognition always trains on the shared mapping network.
enum class SynthesisMode { bidirectional, photo2sketch, sketch2photo, none };

inline const char* synthesis_mode_name(SynthesisMode m) {
    switch (m) {
        case SynthesisMode::bidirectional: return "bidirectional";
        case SynthesisMode::photo2sketch: return "photo2sketch";
        case SynthesisMode::sketch2photo: return "sketch2photo";
        default: return "none";
    }
}

inline SynthesisMode parse_synthesis_mode(const std::string& s) {
    if (s == "bidirectional") return SynthesisMode::bidirectional;
    if (s == "photo2sketch") return SynthesisMode::photo2sketch;
    if (s == "sketch2photo") return SynthesisMode::sketch2photo;
    if (s == "none") return SynthesisMode::none;
    throw ConfigError("unknown synthesis mode '" + s +
                      "' (expected bidirectional, photo2sketch, sketch2photo or none)");
}

struct ModelConfig {
    int image_size = 256;  // training crop fed to the networks
    int latent_dim = 512;
    int encoder_stages = 5;
    int encoder_base_channels = 32;
    int generator_base_channels = 512;
    int generator_min_channels = 32;
    int disc_base_channels = 64;
    int disc_padding = 1;
    int photo_channels = 3;
    int sketch_channels = 3;
    GeneratorActivation generator_activation = GeneratorActivation::softplus;
    SynthesisMode synthesis = SynthesisMode::bidirectional;
    bool adacos_dynamic = true;

    // Branch presence by generation target.
    bool makes_sketches() const {
        return synthesis == SynthesisMode::bidirectional || synthesis == SynthesisMode::photo2sketch;
    }
    bool makes_photos() const {
        return synthesis == SynthesisMode::bidirectional || synthesis == SynthesisMode::sketch2photo;
    }

    void validate() const {
        if (image_size < 8) throw ConfigError("model.image_size too small");
        if (latent_dim < 1) throw ConfigError("model.latent_dim must be positive");
        if (photo_channels != 3) throw ConfigError("model.photo_channels must be 3");
        if (sketch_channels != 1 && sketch_channels != 3)
            throw ConfigError("model.sketch_channels must be 1 or 3");
        if (disc_padding != 0 && disc_padding != 1)
            throw ConfigError("model.disc_padding must be 0 or 1");
    }
};

// Complete parameter state: one shared mapping network, a generator and a
// patch discriminator per modality, and the identity-classifier head.
template <typename T>
struct ModelState {
    ModelConfig cfg;
    MappingNetwork<T> mapping;
    StyleGenerator<T> gen_photo;   // w -> photo
    StyleGenerator<T> gen_sketch;  // w -> sketch
    PatchDiscriminator<T> disc_photo;
    PatchDiscriminator<T> disc_sketch;
    AdaCosHead<T> adacos;  // inactive until init_adacos

    bool has_adacos() const { return adacos.num_classes > 0; }

    void init(const ModelConfig& config, std::uint64_t seed) {
        config.validate();
        cfg = config;
        mapping.init(cfg.image_size, cfg.photo_channels, cfg.encoder_stages,
                     cfg.encoder_base_channels, cfg.latent_dim);
        rng::Stream s_map(rng::derive(seed, "init.mapping"));
        mapping.init_weights(s_map);

        const int pair_ch = cfg.photo_channels + cfg.sketch_channels;
        gen_photo = StyleGenerator<T>{};
        gen_sketch = StyleGenerator<T>{};
        disc_photo = PatchDiscriminator<T>{};
        disc_sketch = PatchDiscriminator<T>{};
        if (cfg.makes_photos()) {
            gen_photo.init(cfg.latent_dim, cfg.photo_channels, cfg.image_size,
                           cfg.generator_base_channels, cfg.generator_min_channels,
                           cfg.generator_activation);
            disc_photo.init(pair_ch, cfg.disc_base_channels, cfg.disc_padding);
            rng::Stream s_gp(rng::derive(seed, "init.gen_photo"));
            rng::Stream s_dp(rng::derive(seed, "init.disc_photo"));
            gen_photo.init_weights(s_gp);
            disc_photo.init_weights(s_dp);
        }
        if (cfg.makes_sketches()) {
            gen_sketch.init(cfg.latent_dim, cfg.sketch_channels, cfg.image_size,
                            cfg.generator_base_channels, cfg.generator_min_channels,
                            cfg.generator_activation);
            disc_sketch.init(pair_ch, cfg.disc_base_channels, cfg.disc_padding);
            rng::Stream s_gs(rng::derive(seed, "init.gen_sketch"));
            rng::Stream s_ds(rng::derive(seed, "init.disc_sketch"));
            gen_sketch.init_weights(s_gs);
            disc_sketch.init_weights(s_ds);
        }
        adacos = AdaCosHead<T>{};
    }

    void init_adacos(int num_classes, std::uint64_t seed) {
        rng::Stream rs(rng::derive(seed, "init.adacos", static_cast<std::uint64_t>(num_classes)));
        adacos.init(num_classes, cfg.latent_dim, cfg.adacos_dynamic, rs);
    }

    // Sketches stored single-channel are replicated to the encoder's three
    // input channels; the encoder itself is modality-blind.
    Tensor<T> to_encoder_input(const Tensor<T>& x) const {
        if (x.dim(1) == cfg.photo_channels) return x;
        if (x.dim(1) != 1)
            throw ShapeError("encoder input: unsupported channel count " + x.shape_string());
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const std::int64_t HW = static_cast<std::int64_t>(H) * W;
        Tensor<T> out({N, cfg.photo_channels, H, W});
        for (int n = 0; n < N; ++n)
            for (int ch = 0; ch < cfg.photo_channels; ++ch) {
                const T* src = x.data() + static_cast<std::int64_t>(n) * HW;
                T* dst = out.data() + (static_cast<std::int64_t>(n) * cfg.photo_channels + ch) * HW;
                for (std::int64_t i = 0; i < HW; ++i) dst[i] = src[i];
            }
        return out;
    }

    // Adjoint of to_encoder_input for single-channel sources.
    Tensor<T> collapse_encoder_grad(const Tensor<T>& g, int source_channels) const {
        if (source_channels == cfg.photo_channels) return g;
        const int N = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
        const std::int64_t HW = static_cast<std::int64_t>(H) * W;
        Tensor<T> out({N, 1, H, W});
        for (int n = 0; n < N; ++n) {
            T* dst = out.data() + static_cast<std::int64_t>(n) * HW;
            for (int ch = 0; ch < C; ++ch) {
                const T* src = g.data() + (static_cast<std::int64_t>(n) * C + ch) * HW;
                for (std::int64_t i = 0; i < HW; ++i) dst[i] += src[i];
            }
        }
        return out;
    }

    // Convenience single-image encode used by evaluation and the CLI.
    Tensor<T> encode_one(const Tensor<T>& chw) {
        Tensor<T> batch = chw;
        if (batch.rank() != 3) throw ShapeError("encode: expected CHW image");
        batch.reshape({1, chw.dim(0), chw.dim(1), chw.dim(2)});
        typename MappingNetwork<T>::Cache cache;
        Tensor<T> w = mapping.forward(to_encoder_input(batch), cache);
        w.reshape({cfg.latent_dim});
        return w;
    }

    // Parameter groups for the alternating optimization.
    std::vector<ParamRef<T>> generator_params() {
        std::vector<ParamRef<T>> out;
        mapping.collect(out, "mapping");
        if (cfg.makes_photos()) gen_photo.collect(out, "gen_photo");
        if (cfg.makes_sketches()) gen_sketch.collect(out, "gen_sketch");
        if (has_adacos()) adacos.collect(out, "adacos");
        return out;
    }

    std::vector<ParamRef<T>> mapping_params() {
        std::vector<ParamRef<T>> out;
        mapping.collect(out, "mapping");
        if (has_adacos()) adacos.collect(out, "adacos");
        return out;
    }

    std::vector<ParamRef<T>> discriminator_params() {
        std::vector<ParamRef<T>> out;
        if (cfg.makes_photos()) disc_photo.collect(out, "disc_photo");
        if (cfg.makes_sketches()) disc_sketch.collect(out, "disc_sketch");
        return out;
    }

    std::vector<ParamRef<T>> all_params() {
        std::vector<ParamRef<T>> out;
        mapping.collect(out, "mapping");
        if (cfg.makes_photos()) gen_photo.collect(out, "gen_photo");
        if (cfg.makes_sketches()) gen_sketch.collect(out, "gen_sketch");
        if (cfg.makes_photos()) disc_photo.collect(out, "disc_photo");
        if (cfg.makes_sketches()) disc_sketch.collect(out, "disc_sketch");
        if (has_adacos()) adacos.collect(out, "adacos");
        return out;
    }
};

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params) {
    for (auto& p : params) p.grad->zero();
}

}  // namespace psnet
