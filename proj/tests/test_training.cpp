#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "psnet/experiment.hpp"
#include "psnet/toygen.hpp"
#include "psnet/trainer.hpp"

using namespace psnet;
namespace fs = std::filesystem;

namespace {

// Model small enough that every training test runs in well under a second.
Config tiny_config() {
    Config cfg;
    cfg.set("model.image_size", "32", "t");
    cfg.set("model.latent_dim", "16", "t");
    cfg.set("model.encoder_stages", "2", "t");
    cfg.set("model.encoder_base", "4", "t");
    cfg.set("model.generator_base", "16", "t");
    cfg.set("model.generator_min", "4", "t");
    cfg.set("model.disc_base", "4", "t");
    cfg.set("model.sketch_channels", "1", "t");
    cfg.set("data.align_size", "34", "t");
    cfg.set("train.seed", "11", "t");
    cfg.set("train.step1.epochs", "2", "t");
    cfg.set("train.step1.batch", "4", "t");
    cfg.set("train.step2.epochs", "2", "t");
    cfg.set("train.step2.batch", "8", "t");
    cfg.set("train.step3.epochs", "2", "t");
    cfg.set("train.step3.batch", "4", "t");
    return cfg;
}

struct SharedData {
    fs::path dir;
    Manifest manifest;
    PairedDataset<float> pairs;
    PhotoDataset<float> photos;

    SharedData() {
        dir = fs::temp_directory_path() / ("psnet_train_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        toy::ToyDatasetSpec spec;
        spec.n_identities = 8;
        spec.images_per_identity = 2;
        spec.image_size = 40;
        spec.seed = 5;
        manifest = toy::generate_dataset(spec, dir.string());
        AlignSettings a;
        a.align_size = 34;
        pairs = load_paired_dataset<float>(manifest, a, 3, 1);
        photos = load_photo_dataset<float>(manifest, a, 3);
    }
    ~SharedData() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

SharedData& shared() {
    static SharedData d;
    return d;
}

std::vector<std::vector<float>> snapshot(std::vector<ParamRef<float>> params) {
    std::vector<std::vector<float>> out;
    for (auto& p : params)
        out.emplace_back(p.value->data(), p.value->data() + p.value->numel());
    return out;
}

bool bitwise_equal(const std::vector<std::vector<float>>& a,
                   const std::vector<std::vector<float>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(float)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("loss log lines use the pinned csv format") {
    CHECK(std::string(loss_csv_header()) == "step,L_total,L_adacos,L_gan,L_s,L_w,adacos_scale");
    TrainLogRow r;
    r.step = 12;
    r.total = 1.25;
    r.adacos = 0.5;
    r.gan = 0.25;
    r.similarity = 0.0625;
    r.latent = 0.125;
    r.scale = 2.75;
    CHECK(loss_csv_line(r) == "12,1.25,0.5,0.25,0.0625,0.125,2.75");
    r.total = 1.0 / 3.0;
    CHECK(loss_csv_line(r).find("0.333333333") != std::string::npos);
}

TEST_CASE("step 2 trains only the mapping network and head") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> model;
    model.init(model_config_from(cfg), cfg.get_seed());
    std::vector<ParamRef<float>> gen, mp;
    model.gen_photo.collect(gen, "gen_photo");
    model.gen_sketch.collect(gen, "gen_sketch");
    model.mapping.collect(mp, "mapping");
    const auto gen_before = snapshot(gen);
    const auto disc_before = snapshot(model.discriminator_params());
    const auto map_before = snapshot(mp);

    Trainer<float> t(model, cfg);
    t.run_step2(d.photos, 0, 2);

    CHECK(bitwise_equal(snapshot(gen), gen_before));
    CHECK(bitwise_equal(snapshot(model.discriminator_params()), disc_before));
    CHECK_FALSE(bitwise_equal(snapshot(mp), map_before));
    REQUIRE(model.has_adacos());
    CHECK(model.adacos.num_classes == 8);
    CHECK(t.class_identities == d.photos.identities);
    CHECK(t.global_step == 2 * 2);  // 16 photos / batch 8, 2 epochs
    REQUIRE(t.log.size() == 2);
    CHECK(t.log[0].gan == 0.0);
    CHECK(t.log[0].total == t.log[0].adacos);
    CHECK(t.log[1].scale > 0.0);
}

TEST_CASE("step 1 reduces the synthesis loss") {
    auto& d = shared();
    Config cfg = tiny_config();
    cfg.set("train.step1.lr", "1e-3", "t");
    ModelState<float> model;
    model.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(model, cfg);
    t.run_step1(d.pairs, 0, 20);
    REQUIRE(t.log.size() == 20);
    double first = 0, last = 0;
    for (int i = 0; i < 3; ++i) {
        first += t.log[static_cast<std::size_t>(i)].similarity;
        last += t.log[t.log.size() - 1 - static_cast<std::size_t>(i)].similarity;
    }
    CHECK(last < first);
    for (const auto& row : t.log) {
        CHECK(std::isfinite(row.total));
        CHECK(row.adacos == 0.0);  // identity head is inactive in step 1
        CHECK(row.gan > 0.0);
        CHECK(row.similarity > 0.0);
        CHECK(row.latent > 0.0);
    }
}

TEST_CASE("reruns with one seed are bitwise identical") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> m1, m2;
    m1.init(model_config_from(cfg), cfg.get_seed());
    m2.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t1(m1, cfg), t2(m2, cfg);
    t1.run_step1(d.pairs, 0, 2);
    t2.run_step1(d.pairs, 0, 2);
    CHECK(bitwise_equal(snapshot(m1.all_params()), snapshot(m2.all_params())));
    REQUIRE(t1.log.size() == t2.log.size());
    for (std::size_t i = 0; i < t1.log.size(); ++i) {
        CHECK(t1.log[i].step == t2.log[i].step);
        CHECK(t1.log[i].total == t2.log[i].total);
        CHECK(loss_csv_line(t1.log[i]) == loss_csv_line(t2.log[i]));
    }

    ModelState<float> m3;
    Config cfg3 = tiny_config();
    cfg3.set("train.seed", "12", "t");
    m3.init(model_config_from(cfg3), cfg3.get_seed());
    Trainer<float> t3(m3, cfg3);
    t3.run_step1(d.pairs, 0, 2);
    CHECK_FALSE(bitwise_equal(snapshot(m1.all_params()), snapshot(m3.all_params())));
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
    auto& d = shared();
    Config cfg = tiny_config();

    ModelState<float> ma;
    ma.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> ta(ma, cfg);
    ta.run_step1(d.pairs, 0, 2);

    ModelState<float> mb;
    mb.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> tb(mb, cfg);
    tb.run_step1(d.pairs, 0, 1);
    const auto ck = tb.make_checkpoint(1, 1);
    const auto path = (shared().dir / "resume.ckpt").string();
    write_checkpoint(path, ck);

    const auto ck2 = read_checkpoint<float>(path);
    CHECK(ck2.step == 1);
    CHECK(ck2.epoch == 1);
    ModelState<float> mc;
    unpack_model(ck2, mc);
    Config restored;
    std::istringstream in(ck2.config_echo);
    restored.load_stream(in, "checkpoint");
    Trainer<float> tc(mc, restored);
    tc.restore_optimizers(ck2);
    tc.run_step1(d.pairs, 1, 2);

    CHECK(bitwise_equal(snapshot(ma.all_params()), snapshot(mc.all_params())));
    REQUIRE(tc.log.size() == 1);
    CHECK(tc.log[0].step == ta.log[1].step);
    CHECK(loss_csv_line(tc.log[0]) == loss_csv_line(ta.log[1]));
}

TEST_CASE("step 3 resume matches an uninterrupted run") {
    auto& d = shared();
    Config cfg = tiny_config();
    cfg.set("train.step3.epochs", "3", "t");

    ModelState<float> ma;
    ma.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> ta(ma, cfg);
    ta.run_step1(d.pairs, 0, 1);
    ta.run_step3(d.pairs, 0, 3);

    ModelState<float> mb;
    mb.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> tb(mb, cfg);
    tb.run_step1(d.pairs, 0, 1);
    tb.run_step3(d.pairs, 0, 2);
    const auto path = (shared().dir / "resume3.ckpt").string();
    write_checkpoint(path, tb.make_checkpoint(3, 2));

    const auto ck = read_checkpoint<float>(path);
    CHECK(ck.num_classes == 8);
    CHECK(ck.identities == d.pairs.identities);
    ModelState<float> mc;
    unpack_model(ck, mc);
    REQUIRE(mc.has_adacos());
    Config restored;
    std::istringstream in(ck.config_echo);
    restored.load_stream(in, "checkpoint");
    Trainer<float> tc(mc, restored);
    tc.restore_optimizers(ck);
    tc.run_step3(d.pairs, 2, 3);

    CHECK(bitwise_equal(snapshot(ma.all_params()), snapshot(mc.all_params())));
    CHECK(mc.adacos.scale == ma.adacos.scale);
    CHECK(tc.global_step == ta.global_step);
    CHECK(loss_csv_line(tc.log.back()) == loss_csv_line(ta.log.back()));
}

TEST_CASE("checkpoint files round trip bitwise") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> m;
    m.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(m, cfg);
    t.run_step1(d.pairs, 0, 1);
    t.run_step3(d.pairs, 0, 1);

    const auto ck = t.make_checkpoint(3, 1);
    const auto p1 = (shared().dir / "rt1.ckpt").string();
    const auto p2 = (shared().dir / "rt2.ckpt").string();
    write_checkpoint(p1, ck);
    const auto back = read_checkpoint<float>(p1);
    CHECK(back.step == ck.step);
    CHECK(back.epoch == ck.epoch);
    CHECK(back.global_step == ck.global_step);
    CHECK(back.num_classes == ck.num_classes);
    CHECK(back.adacos_scale == ck.adacos_scale);
    CHECK(back.identities == ck.identities);
    CHECK(back.config_echo == ck.config_echo);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == ck.tensors[i].first);
        REQUIRE(back.tensors[i].second.shape() == ck.tensors[i].second.shape());
        CHECK(std::memcmp(back.tensors[i].second.data(), ck.tensors[i].second.data(),
                          sizeof(float) * static_cast<std::size_t>(
                                              ck.tensors[i].second.numel())) == 0);
    }
    write_checkpoint(p2, back);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(!b1.empty());
    CHECK(b1.substr(0, 8) == "PSNCKPT1");
}

TEST_CASE("corrupted checkpoints fail with specific errors") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> m;
    m.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(m, cfg);
    t.run_step1(d.pairs, 0, 1);
    auto ck = t.make_checkpoint(1, 1);

    SECTION("missing tensor is named") {
        auto it = ck.tensors.begin();
        while (it != ck.tensors.end() && it->first != "mapping.conv1.weight") ++it;
        REQUIRE(it != ck.tensors.end());
        ck.tensors.erase(it);
        ModelState<float> fresh;
        try {
            unpack_model(ck, fresh);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("mapping.conv1.weight") != std::string::npos);
        }
    }
    SECTION("bad magic") {
        const auto path = (shared().dir / "bad.ckpt").string();
        std::ofstream os(path, std::ios::binary);
        os << "NOTACKPTxxxxxxxxxxxxxxxx";
        os.close();
        CHECK_THROWS_AS(read_checkpoint<float>(path), DataError);
    }
    SECTION("truncated file") {
        const auto path = (shared().dir / "trunc.ckpt").string();
        write_checkpoint(path, ck);
        const auto full = fs::file_size(path);
        fs::resize_file(path, full / 2);
        CHECK_THROWS_AS(read_checkpoint<float>(path), DataError);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(read_checkpoint<float>((shared().dir / "nope.ckpt").string()), DataError);
    }
}

TEST_CASE("steps refuse to run without required state") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> m;
    m.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(m, cfg);
    CHECK_THROWS_AS(t.run_step1(d.pairs, 1, 2), ConfigError);
    CHECK_THROWS_AS(t.run_step2(d.photos, 1, 2), ConfigError);
    CHECK_THROWS_AS(t.run_step3(d.pairs, 1, 2), ConfigError);

    PhotoDataset<float> one;
    one.identities = {"only"};
    one.labels = {0, 0};
    one.photos = {d.photos.photos[0], d.photos.photos[1]};
    CHECK_THROWS_AS(t.run_step2(one, 0, 1), ConfigError);
}

TEST_CASE("adam follows the reference update") {
    Tensor<float> x({2}), gx({2});
    x[0] = 4.0f;
    x[1] = -3.0f;
    std::vector<ParamRef<float>> params{{"x", &x, &gx}};

    Adam<float> opt;
    opt.init(params, 0.05, 0.9, 0.999);
    for (int i = 0; i < 600; ++i) {
        gx[0] = x[0] - 1.0f;
        gx[1] = x[1] + 2.0f;
        opt.step(params);
    }
    CHECK(x[0] == Catch::Approx(1.0f).margin(1e-3));
    CHECK(x[1] == Catch::Approx(-2.0f).margin(1e-3));

    // First step magnitude is lr regardless of gradient scale.
    Tensor<float> y({1}), gy({1});
    y[0] = 0.0f;
    std::vector<ParamRef<float>> py{{"y", &y, &gy}};
    Adam<float> o2;
    o2.init(py, 0.1, 0.9, 0.999);
    gy[0] = 1e-4f;
    o2.step(py);
    CHECK(y[0] == Catch::Approx(-0.1).epsilon(1e-3));

    // Changed parameter sets are rejected.
    Adam<float> o3;
    o3.init(params, 0.05, 0.9, 0.999);
    std::vector<ParamRef<float>> renamed{{"z", &x, &gx}};
    CHECK_THROWS_AS(o3.step(renamed), ConfigError);
    std::vector<ParamRef<float>> extra{{"x", &x, &gx}, {"y", &y, &gy}};
    CHECK_THROWS_AS(o3.step(extra), ConfigError);
}

TEST_CASE("step 3 rebuilds the identity head for the target set") {
    auto& d = shared();
    Config cfg = tiny_config();
    ModelState<float> m;
    m.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(m, cfg);
    t.run_step1(d.pairs, 0, 1);

    AlignSettings a;
    a.align_size = 34;
    const std::vector<std::string> subset{"id000", "id001", "id002", "id003"};
    const auto sub = load_paired_dataset<float>(d.manifest, a, 3, 1, subset);
    CHECK(sub.num_identities() == 4);
    t.run_step3(sub, 0, 1);
    REQUIRE(m.has_adacos());
    CHECK(m.adacos.num_classes == 4);
    CHECK(t.class_identities == subset);
    const auto& row = t.log.back();
    CHECK(row.adacos > 0.0);
    CHECK(row.gan > 0.0);
    CHECK(row.similarity > 0.0);
    CHECK(row.latent > 0.0);
    CHECK(row.scale > 0.0);
}

TEST_CASE("synthesis ablations restrict the active branches") {
    auto& d = shared();

    SECTION("photo2sketch trains only the sketch branch") {
        Config cfg = tiny_config();
        cfg.set("model.synthesis", "photo2sketch", "t");
        ModelState<float> m;
        m.init(model_config_from(cfg), cfg.get_seed());
        for (const auto& p : m.discriminator_params())
            CHECK(p.name.rfind("disc_sketch.", 0) == 0);
        Trainer<float> t(m, cfg);
        t.run_step1(d.pairs, 0, 1);
        CHECK(t.log.back().similarity > 0.0);
    }
    SECTION("mapping-only rejects step 1 but supports step 3") {
        Config cfg = tiny_config();
        cfg.set("model.synthesis", "none", "t");
        ModelState<float> m;
        m.init(model_config_from(cfg), cfg.get_seed());
        CHECK(m.discriminator_params().empty());
        Trainer<float> t(m, cfg);
        CHECK_THROWS_AS(t.run_step1(d.pairs, 0, 1), ConfigError);
        t.run_step3(d.pairs, 0, 1);
        const auto& row = t.log.back();
        CHECK(row.gan == 0.0);
        CHECK(row.similarity == 0.0);
        CHECK(row.adacos > 0.0);
        CHECK(row.latent > 0.0);
    }
}

TEST_CASE("step 2 raises head accuracy on its training photos") {
    auto& d = shared();
    Config cfg = tiny_config();
    cfg.set("train.step2.epochs", "12", "t");
    ModelState<float> m;
    m.init(model_config_from(cfg), cfg.get_seed());
    Trainer<float> t(m, cfg);
    t.run_step2(d.photos, 0, 1);
    const double before = classification_accuracy(m, d.photos);
    t.run_step2(d.photos, 1, 12);
    const double after = classification_accuracy(m, d.photos);
    CHECK(after >= before);
    CHECK(after >= 0.25);  // chance level is 1/8
}
