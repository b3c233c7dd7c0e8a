#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "psnet/experiment.hpp"
#include "psnet/toygen.hpp"
#include "psnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace psnet;

namespace {

using Model = ModelState<float>;

void apply_overrides(Config& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + kv + "' is not of the form key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1), "command line");
    }
}

Config make_config(const std::string& config_path, const std::vector<std::string>& sets,
                   std::int64_t seed) {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    apply_overrides(cfg, sets);
    if (seed >= 0) cfg.set("train.seed", std::to_string(seed), "command line");
    return cfg;
}

void require_writable_dir(const std::string& out, bool allow_nonempty) {
    const fs::path p(out);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) throw ConfigError("output path '" + out + "' is not a directory");
        if (!fs::is_empty(p) && !allow_nonempty)
            throw ConfigError("output directory '" + out +
                              "' is not empty; pass --force to write into it");
    }
    fs::create_directories(p);
}

void echo_config(const Config& cfg, const fs::path& out_dir) {
    std::cout << "# effective configuration\n" << cfg.echo() << std::flush;
    std::ofstream os(out_dir / "config.ini", std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + (out_dir / "config.ini").string());
    os << cfg.echo();
}

void write_loss_csv(const fs::path& path, const std::vector<TrainLogRow>& rows, std::size_t from) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write loss log: " + path.string());
    os << loss_csv_header() << '\n';
    for (std::size_t i = from; i < rows.size(); ++i) os << loss_csv_line(rows[i]) << '\n';
    if (!os.flush()) throw DataError("failed writing loss log: " + path.string());
}

Manifest manifest_for_step(const Config& cfg, const char* key, int step) {
    const std::string path = cfg.get_string(key);
    if (path.empty())
        throw ConfigError("training step " + std::to_string(step) + " requires " +
                          std::string(key));
    return load_manifest(path);
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
    return a.image_size == b.image_size && a.latent_dim == b.latent_dim &&
           a.encoder_stages == b.encoder_stages &&
           a.encoder_base_channels == b.encoder_base_channels &&
           a.generator_base_channels == b.generator_base_channels &&
           a.generator_min_channels == b.generator_min_channels &&
           a.disc_base_channels == b.disc_base_channels && a.disc_padding == b.disc_padding &&
           a.photo_channels == b.photo_channels && a.sketch_channels == b.sketch_channels &&
           a.generator_activation == b.generator_activation && a.synthesis == b.synthesis &&
           a.adacos_dynamic == b.adacos_dynamic;
}

struct GenDataArgs {
    std::string out;
    int identities = 16;
    int per_id = 4;
    int size = 72;
    std::int64_t seed = 1;
    bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
    require_writable_dir(a.out, a.force);
    toy::ToyDatasetSpec spec;
    spec.n_identities = a.identities;
    spec.images_per_identity = a.per_id;
    spec.image_size = a.size;
    spec.seed = static_cast<std::uint64_t>(a.seed);
    const Manifest m = toy::generate_dataset(spec, a.out);
    std::cout << "identities: " << m.identities.size() << "\n"
              << "records: " << m.records.size() << "\n"
              << "manifest: " << (fs::path(a.out) / "manifest.tsv").string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path, step = "all", resume, out;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    bool allow_fresh = false;
    bool force = false;
};

int cmd_train(const TrainArgs& args) {
    Config cfg = make_config(args.config_path, args.sets, args.seed);

    std::vector<int> steps;
    if (args.step == "all")
        steps = parse_schedule(cfg.get_string("train.schedule"));
    else if (args.step == "1" || args.step == "2" || args.step == "3")
        steps = {args.step[0] - '0'};
    else
        throw ConfigError("--step must be one of 1, 2, 3, all");

    const bool have_resume = !args.resume.empty();
    require_writable_dir(args.out, args.force || have_resume);
    if (steps.front() > 1 && !have_resume && !args.allow_fresh)
        throw ConfigError("entering step " + std::to_string(steps.front()) +
                          " without --resume; pass --allow-fresh to train from scratch");

    Model model;
    CheckpointData<float> ck;
    if (have_resume) {
        ck = read_checkpoint<float>(args.resume);
        unpack_model(ck, model);
        if (!same_architecture(model.cfg, model_config_from(cfg)))
            throw ConfigError("model.* settings disagree with the checkpoint architecture");
    } else {
        model.init(model_config_from(cfg), cfg.get_seed());
    }

    const fs::path out_dir(args.out);
    echo_config(cfg, out_dir);

    Trainer<float> trainer(model, cfg);
    if (have_resume) trainer.restore_optimizers(ck);

    const AlignSettings a = align_settings_from(cfg);
    for (int step : steps) {
        if (have_resume && step < ck.step)
            throw ConfigError("checkpoint is already past step " + std::to_string(step));
        const StepSettings s = trainer.settings(step);
        std::int64_t from = 0;
        if (have_resume && ck.step == step) from = static_cast<std::int64_t>(ck.epoch);
        if (from > s.epochs)
            throw ConfigError("checkpoint epoch " + std::to_string(from) +
                              " exceeds configured epochs for step " + std::to_string(step));
        const std::size_t log_mark = trainer.log.size();
        if (from < s.epochs) {
            std::cout << "step " << step << ": epochs " << from << ".." << s.epochs << "\n"
                      << std::flush;
            switch (step) {
                case 1: {
                    const Manifest m = manifest_for_step(cfg, "data.pretrain_manifest", 1);
                    const auto ds = load_paired_dataset<float>(m, a, model.cfg.photo_channels,
                                                               model.cfg.sketch_channels);
                    trainer.run_step1(ds, from, s.epochs);
                    break;
                }
                case 2: {
                    const Manifest m = manifest_for_step(cfg, "data.photos_manifest", 2);
                    const auto ds = load_photo_dataset<float>(m, a, model.cfg.photo_channels);
                    trainer.run_step2(ds, from, s.epochs);
                    break;
                }
                default: {
                    const Manifest m = manifest_for_step(cfg, "data.target_manifest", 3);
                    const auto ds = load_paired_dataset<float>(m, a, model.cfg.photo_channels,
                                                               model.cfg.sketch_channels);
                    trainer.run_step3(ds, from, s.epochs);
                    break;
                }
            }
        } else {
            std::cout << "step " << step << ": already complete at epoch " << from << "\n";
        }
        const fs::path csv = out_dir / ("step" + std::to_string(step) + "_losses.csv");
        write_loss_csv(csv, trainer.log, log_mark);
        const fs::path ckpt = out_dir / ("step" + std::to_string(step) + ".ckpt");
        write_checkpoint(ckpt.string(), trainer.make_checkpoint(step,
                                                                static_cast<std::uint64_t>(
                                                                    s.epochs)));
        if (!trainer.log.empty() && trainer.log.size() > log_mark)
            std::cout << "step " << step << ": " << loss_csv_header() << "\n"
                      << "step " << step << ": " << loss_csv_line(trainer.log.back()) << "\n";
        std::cout << "step " << step << ": wrote " << ckpt.string() << "\n" << std::flush;
    }
    return 0;
}

struct EvalArgs {
    std::string config_path, checkpoint, distractors, out;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    int partitions = -1;
    bool force = false;
};

int cmd_eval(const EvalArgs& args) {
    // Without an explicit config the checkpoint's embedded one applies, so a
    // trained run evaluates under its own settings by default.
    Config cfg;
    CheckpointData<float> ck;
    const bool have_ck = !args.checkpoint.empty();
    if (have_ck) ck = read_checkpoint<float>(args.checkpoint);
    if (args.config_path.empty() && have_ck) {
        std::istringstream in(ck.config_echo);
        cfg.load_stream(in, "checkpoint config");
        apply_overrides(cfg, args.sets);
        if (args.seed >= 0) cfg.set("train.seed", std::to_string(args.seed), "command line");
    } else {
        cfg = make_config(args.config_path, args.sets, args.seed);
    }
    if (args.partitions >= 1)
        cfg.set("eval.partitions", std::to_string(args.partitions), "command line");
    if (!args.distractors.empty())
        cfg.set("data.distractors_manifest", args.distractors, "command line");

    require_writable_dir(args.out, args.force);
    const fs::path out_dir(args.out);
    echo_config(cfg, out_dir);

    EvalReport report;
    if (have_ck && cfg.get_int("eval.partitions") == 1) {
        // Single-model protocol: the checkpointed model is scored as-is, every
        // identity is enrolled and every sketch is probed.
        Model model;
        unpack_model(ck, model);
        const AlignSettings a = align_settings_from(cfg);
        const std::string target_path = cfg.get_string("data.target_manifest");
        if (target_path.empty()) throw ConfigError("data.target_manifest is unset");
        const Manifest target = load_manifest(target_path);
        Manifest distractors;
        const bool have_d = !cfg.get_string("data.distractors_manifest").empty();
        if (have_d) distractors = load_manifest(cfg.get_string("data.distractors_manifest"));
        GalleryIndex<float> g = build_gallery(model, target, a, have_d ? &distractors : nullptr);
        const auto results = match_sketches(model, target, target.identities, g, a);
        report.partitions.push_back(cmc_curve(results, g));
        report.gallery_size = g.size();
        report.ranks = parse_ranks(cfg.get_string("eval.ranks"));
        report.config_echo = cfg.echo();
    } else if (have_ck) {
        Model model;
        unpack_model(ck, model);
        report = cross_partition_eval<float>(cfg, &model, &std::cout);
    } else {
        report = cross_partition_eval<float>(cfg, nullptr, &std::cout);
    }

    export_report(report, (out_dir / "cmc.csv").string(), (out_dir / "summary.txt").string());
    std::cout << format_report_summary(report) << "wrote " << (out_dir / "cmc.csv").string()
              << "\n"
              << std::flush;
    return 0;
}

struct SweepArgs {
    std::string config_path, param, values, out;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    bool force = false;
};

int cmd_sweep(const SweepArgs& args) {
    Config base = make_config(args.config_path, args.sets, args.seed);
    (void)Config::entry(args.param);  // rejects unknown keys with the full list

    std::vector<std::string> values;
    std::stringstream ss(args.values);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(item);
    }
    if (values.empty()) throw ConfigError("--values must list at least one value");

    require_writable_dir(args.out, args.force);
    const fs::path out_dir(args.out);
    echo_config(base, out_dir);

    const auto ranks = parse_ranks(base.get_string("eval.ranks"));
    std::string comparison = "value";
    for (int k : ranks) comparison += ",rank" + std::to_string(k);
    comparison += "\n";

    for (const auto& value : values) {
        Config cfg = base;
        cfg.set(args.param, value, "sweep");
        std::string dir_name = value;
        for (auto& ch : dir_name)
            if (ch == '/' || ch == '\\') ch = '_';
        const fs::path run_dir = out_dir / dir_name;
        fs::create_directories(run_dir);
        std::cout << "sweep " << args.param << " = " << value << "\n" << std::flush;
        const EvalReport report = cross_partition_eval<float>(cfg, nullptr, &std::cout);
        export_report(report, (run_dir / "cmc.csv").string(),
                      (run_dir / "summary.txt").string());
        {
            std::ofstream os(run_dir / "config.ini", std::ios::binary | std::ios::trunc);
            os << cfg.echo();
        }
        comparison += value;
        char buf[32];
        for (int k : ranks) {
            std::snprintf(buf, sizeof buf, ",%.6f", report_rank_mean(report, k));
            comparison += buf;
        }
        comparison += "\n";
    }

    std::ofstream os(out_dir / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write sweep.csv");
    os << comparison;
    if (!os.flush()) throw DataError("failed writing sweep.csv");
    std::cout << comparison << "wrote " << (out_dir / "sweep.csv").string() << "\n";
    return 0;
}

struct SynthesizeArgs {
    std::string checkpoint, input, output, direction, eyes;
};

int cmd_synthesize(const SynthesizeArgs& args) {
    const auto ck = read_checkpoint<float>(args.checkpoint);
    Model model;
    unpack_model(ck, model);
    Config cfg;
    std::istringstream in(ck.config_echo);
    cfg.load_stream(in, "checkpoint config");
    const AlignSettings a = align_settings_from(cfg);

    const bool to_sketch = args.direction == "photo2sketch";
    if (!to_sketch && args.direction != "sketch2photo")
        throw ConfigError("--direction must be photo2sketch or sketch2photo");
    if (to_sketch && !model.cfg.makes_sketches())
        throw ConfigError("checkpoint was trained without a photo-to-sketch generator");
    if (!to_sketch && !model.cfg.makes_photos())
        throw ConfigError("checkpoint was trained without a sketch-to-photo generator");

    Tensor<float> img = load_png(args.input);
    const int want = to_sketch ? model.cfg.photo_channels : model.cfg.sketch_channels;
    img = detail::adapt_channels(std::move(img), want, args.input);

    if (!args.eyes.empty()) {
        double coords[4];
        std::stringstream es(args.eyes);
        std::string tok;
        int n = 0;
        while (std::getline(es, tok, ',') && n < 4) {
            try {
                coords[n++] = std::stod(tok);
            } catch (const std::exception&) {
                throw ConfigError("--eyes expects four numbers lx,ly,rx,ry");
            }
        }
        if (n != 4) throw ConfigError("--eyes expects four numbers lx,ly,rx,ry");
        const EyePair canon = canonical_eyes(a.align_size, a.eye_height, a.eye_span);
        img = align_and_crop(img, EyePair{coords[0], coords[1], coords[2], coords[3]},
                             a.align_size, canon);
        img = center_crop(img, model.cfg.image_size);
    } else if (img.dim(1) != model.cfg.image_size || img.dim(2) != model.cfg.image_size) {
        throw DataError("input is " + std::to_string(img.dim(1)) + "x" +
                        std::to_string(img.dim(2)) + ", model expects " +
                        std::to_string(model.cfg.image_size) + "x" +
                        std::to_string(model.cfg.image_size) +
                        "; pass --eyes lx,ly,rx,ry to align first");
    }

    Tensor<float> w = model.encode_one(img);
    w.reshape({1, model.cfg.latent_dim});
    typename StyleGenerator<float>::Cache cache;
    Tensor<float> y = to_sketch ? model.gen_sketch.forward(w, cache)
                                : model.gen_photo.forward(w, cache);
    y.reshape({y.dim(1), y.dim(2), y.dim(3)});
    save_png(args.output, y);
    std::cout << "wrote " << args.output << "\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    const auto ck = read_checkpoint<float>(path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", ck.adacos_scale);
    std::cout << "checkpoint: " << path << "\n"
              << "step: " << ck.step << "\n"
              << "epoch: " << ck.epoch << "\n"
              << "optimizer updates: " << ck.global_step << "\n"
              << "classes: " << ck.num_classes << "\n"
              << "classifier scale: " << buf << "\n"
              << "tensors: " << ck.tensors.size() << "\n";
    for (const auto& [name, t] : ck.tensors) std::cout << "  " << name << " " << t.shape_string() << "\n";
    std::cout << "config:\n" << ck.config_echo;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photo-sketch cross-modal recognition pipeline"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* sub_gen = app.add_subcommand("gen-data", "generate a toy photo/sketch dataset");
    sub_gen->add_option("--out", gen.out, "output directory")->required();
    sub_gen->add_option("--identities", gen.identities, "number of identities");
    sub_gen->add_option("--per-id", gen.per_id, "images per identity and modality");
    sub_gen->add_option("--size", gen.size, "image size in pixels");
    sub_gen->add_option("--seed", gen.seed, "generation seed");
    sub_gen->add_flag("--force", gen.force, "write into a non-empty directory");
    sub_gen->callback([&] { (void)cmd_gen_data(gen); });

    TrainArgs tr;
    auto* sub_tr = app.add_subcommand("train", "run the three-step training scheme");
    sub_tr->add_option("--config", tr.config_path, "config file (ini)");
    sub_tr->add_option("--step", tr.step, "1, 2, 3, or all (= train.schedule)");
    sub_tr->add_option("--resume", tr.resume, "checkpoint to resume from");
    sub_tr->add_option("--out", tr.out, "output directory")->required();
    sub_tr->add_option("--set", tr.sets, "config override key=value")->take_all();
    sub_tr->add_option("--seed", tr.seed, "override train.seed");
    sub_tr->add_flag("--allow-fresh", tr.allow_fresh, "enter step 2/3 without a checkpoint");
    sub_tr->add_flag("--force", tr.force, "write into a non-empty directory");
    sub_tr->callback([&] { (void)cmd_train(tr); });

    EvalArgs ev;
    auto* sub_ev = app.add_subcommand("eval", "cross-partition recognition evaluation");
    sub_ev->add_option("--config", ev.config_path, "config file (ini)");
    sub_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
    sub_ev->add_option("--partitions", ev.partitions, "number of random partitions");
    sub_ev->add_option("--distractors", ev.distractors, "distractor photo manifest");
    sub_ev->add_option("--out", ev.out, "output directory")->required();
    sub_ev->add_option("--set", ev.sets, "config override key=value")->take_all();
    sub_ev->add_option("--seed", ev.seed, "override train.seed");
    sub_ev->add_flag("--force", ev.force, "write into a non-empty directory");
    sub_ev->callback([&] { (void)cmd_eval(ev); });

    SweepArgs sw;
    auto* sub_sw = app.add_subcommand("sweep", "train and evaluate across parameter values");
    sub_sw->add_option("--config", sw.config_path, "config file (ini)");
    sub_sw->add_option("--param", sw.param, "dotted config key to sweep")->required();
    sub_sw->add_option("--values", sw.values, "comma-separated values")->required();
    sub_sw->add_option("--out", sw.out, "output directory")->required();
    sub_sw->add_option("--set", sw.sets, "config override key=value")->take_all();
    sub_sw->add_option("--seed", sw.seed, "override train.seed");
    sub_sw->add_flag("--force", sw.force, "write into a non-empty directory");
    sub_sw->callback([&] { (void)cmd_sweep(sw); });

    SynthesizeArgs sy;
    auto* sub_sy = app.add_subcommand("synthesize", "map one image across modalities");
    sub_sy->add_option("--checkpoint", sy.checkpoint, "model checkpoint")->required();
    sub_sy->add_option("--input", sy.input, "input png")->required();
    sub_sy->add_option("--output", sy.output, "output png")->required();
    sub_sy->add_option("--direction", sy.direction, "photo2sketch or sketch2photo")->required();
    sub_sy->add_option("--eyes", sy.eyes, "align input using eye centers lx,ly,rx,ry");
    sub_sy->callback([&] { (void)cmd_synthesize(sy); });

    std::string inspect_path;
    auto* sub_in = app.add_subcommand("inspect", "print checkpoint metadata");
    sub_in->add_option("--checkpoint", inspect_path, "model checkpoint")->required();
    sub_in->callback([&] { (void)cmd_inspect(inspect_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
