// Training loop machinery: config parsing, learning-rate schedule, batch
// mixing, Adam, checkpoint round trips, and the joint loop's determinism,
// resume, freeze, and failure contracts.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "cssr/checkpoint.hpp"
#include "cssr/config.hpp"
#include "cssr/image.hpp"
#include "cssr/trainer.hpp"
#include "support/synthetic.hpp"

using namespace cssr;
using cssr::testsupport::synthetic_image;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("cssr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Writes two HR/LR pairs (scale 2) plus a manifest, returns the manifest path.
std::string write_tiny_dataset(const TempDir& dir) {
  std::ofstream manifest(dir.file("manifest.txt"));
  for (int i = 0; i < 2; ++i) {
    const std::string hr = "hr_" + std::to_string(i) + ".ppm";
    const std::string lr = "lr_" + std::to_string(i) + ".ppm";
    write_image(dir.file(hr), synthetic_image(16, 16, 100 + i));
    write_image(dir.file(lr), synthetic_image(8, 8, 200 + i));
    manifest << hr << "\t" << lr << "\n";
  }
  manifest.close();
  return dir.file("manifest.txt");
}

TrainConfig tiny_config(const std::string& manifest, const std::string& out_dir) {
  TrainConfig c;
  c.manifest = manifest;
  c.out_dir = out_dir;
  c.scale = 2;
  c.crop = 8;
  c.batch = 2;
  c.lr = 1e-3;
  c.halve_every = 1000;
  c.iters = 3;
  c.arch = "durcan-6_s";
  c.channels = 8;
  c.reduction = 4;
  c.gen_widths = {4, 8};
  c.disc_widths = {4, 8};
  c.disc_dense = 16;
  c.seed = 7;
  return c;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool stores_equal(const ParamStore<float>& a, const ParamStore<float>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].value.data != b[i].value.data) return false;
  return true;
}

}  // namespace

TEST_CASE("train config parses from key-value text") {
  auto kv = KeyValueConfig::from_string(
      "data_manifest = data/manifest.txt\n"
      "out_dir = run1\n"
      "scale = 2\n"
      "crop = 24\n"
      "batch = 4\n"
      "lr = 0.0005\n"
      "halve_every = 2000\n"
      "iters = 10\n"
      "adam_beta1 = 0.8\n"
      "adam_beta2 = 0.99\n"
      "adam_eps = 1e-7\n"
      "mix_gamma = 0.5\n"
      "use_ddgan = false\n"
      "eta = 0.01\n"
      "lambda = 0.002\n"
      "label_alpha = 0.1\n"
      "label_beta = 0.9\n"
      "arch = durcan-6\n"
      "channels = 16\n"
      "reduction = 8\n"
      "gen_widths = 8,16\n"
      "disc_widths = 8, 16\n"
      "disc_dense = 32\n"
      "seed = 99\n"
      "checkpoint_every = 5\n"
      "resume = old.ckpt\n"
      "freeze = durcan.durb, gen.head\n",
      "test");
  const TrainConfig c = TrainConfig::from_config(kv);
  kv.reject_unknown_keys();  // every key consumed

  CHECK(c.manifest == "data/manifest.txt");
  CHECK(c.out_dir == "run1");
  CHECK(c.scale == 2);
  CHECK(c.crop == 24);
  CHECK(c.batch == 4);
  CHECK(c.lr == 0.0005);
  CHECK(c.halve_every == 2000);
  CHECK(c.iters == 10);
  CHECK(c.adam_beta1 == 0.8);
  CHECK(c.adam_beta2 == 0.99);
  CHECK(c.adam_eps == 1e-7);
  CHECK(c.mix_gamma == 0.5);
  CHECK(c.use_ddgan == false);
  CHECK(c.weights.eta == 0.01);
  CHECK(c.weights.lambda == 0.002);
  CHECK(c.weights.label_alpha == 0.1);
  CHECK(c.weights.label_beta == 0.9);
  CHECK(c.arch == "durcan-6");
  CHECK(c.channels == 16);
  CHECK(c.reduction == 8);
  CHECK(c.gen_widths == std::vector<int>{8, 16});
  CHECK(c.disc_widths == std::vector<int>{8, 16});
  CHECK(c.disc_dense == 32);
  CHECK(c.seed == 99);
  CHECK(c.checkpoint_every == 5);
  CHECK(c.resume == "old.ckpt");
  CHECK(c.freeze == std::vector<std::string>{"durcan.durb", "gen.head"});
}

TEST_CASE("train config defaults and rejection of junk") {
  auto empty = KeyValueConfig::from_string("", "test");
  const TrainConfig c = TrainConfig::from_config(empty);
  CHECK(c.scale == 4);
  CHECK(c.crop == 48);
  CHECK(c.batch == 16);
  CHECK(c.lr == 1e-4);
  CHECK(c.halve_every == 50000);
  CHECK(c.mix_gamma == 0.25);
  CHECK(c.use_ddgan == true);
  CHECK(c.arch == "durcan-12");
  CHECK(c.freeze.empty());

  auto bad = KeyValueConfig::from_string("batch = four\n", "test");
  CHECK_THROWS_AS(TrainConfig::from_config(bad), ConfigError);

  auto unknown = KeyValueConfig::from_string("batch = 4\nbatch_size = 4\n", "test");
  TrainConfig::from_config(unknown);
  CHECK_THROWS_AS(unknown.reject_unknown_keys(), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig c = tiny_config("m.txt", ".");
  CHECK_NOTHROW(c.validate());

  TrainConfig bad = c;
  bad.manifest.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lr = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mix_gamma = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.adam_beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.halve_every = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.checkpoint_every = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("learning rate halves exactly on schedule") {
  TrainConfig c;
  c.lr = 4e-4;
  c.halve_every = 50000;
  CHECK(c.lr_at(0) == 4e-4);
  CHECK(c.lr_at(1) == 4e-4);
  CHECK(c.lr_at(49999) == 4e-4);
  CHECK(c.lr_at(50000) == 2e-4);
  CHECK(c.lr_at(99999) == 2e-4);
  CHECK(c.lr_at(100000) == 1e-4);
  CHECK(c.lr_at(149999) == 1e-4);
  CHECK(c.lr_at(150000) == 5e-5);
}

TEST_CASE("mixing coin lands near the configured generated fraction") {
  SUBCASE("gamma 0.25 gives one generated sample in five") {
    Rng rng(123);
    int generated = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
      if (draw_generated(rng, 0.25)) ++generated;
    const double fraction = static_cast<double>(generated) / draws;
    CHECK(fraction > 0.18);
    CHECK(fraction < 0.22);
  }
  SUBCASE("gamma 0 never generates") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(draw_generated(rng, 0.0));
  }
  SUBCASE("larger gamma raises the fraction") {
    auto fraction_at = [](double gamma) {
      Rng rng(9);
      int hits = 0;
      for (int i = 0; i < 10000; ++i)
        if (draw_generated(rng, gamma)) ++hits;
      return hits / 10000.0;
    };
    CHECK(fraction_at(1.0) > 0.45);   // P = 1/2
    CHECK(fraction_at(1.0) < 0.55);
    CHECK(fraction_at(0.25) < fraction_at(1.0));
  }
}

TEST_CASE("augmentation applies one transform to both halves of a pair") {
  SUBCASE("consumes exactly two raw draws") {
    Rng a(9), b(9);
    ImageBuffer hr = synthetic_image(8, 8, 1), lr = synthetic_image(4, 4, 2);
    augment_pair(hr, lr, a);
    b.uniform_int(4);
    b.uniform_int(2);
    CHECK(a.next_u64() == b.next_u64());
  }
  SUBCASE("pixels are permuted, never invented") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
      ImageBuffer hr = synthetic_image(10, 6, 3), lr = synthetic_image(5, 3, 4);
      auto channel_sorted = [](const ImageBuffer& img, int c) {
        std::vector<uint8_t> v;
        for (size_t i = c; i < img.data.size(); i += 3) v.push_back(img.data[i]);
        std::sort(v.begin(), v.end());
        return v;
      };
      std::vector<std::vector<uint8_t>> before;
      for (int c = 0; c < 3; ++c) {
        before.push_back(channel_sorted(hr, c));
        before.push_back(channel_sorted(lr, c));
      }
      Rng rng(seed);
      augment_pair(hr, lr, rng);
      for (int c = 0; c < 3; ++c) {
        CHECK(channel_sorted(hr, c) == before[2 * c]);
        CHECK(channel_sorted(lr, c) == before[2 * c + 1]);
      }
    }
  }
  SUBCASE("scale relation between the halves survives every transform") {
    for (uint64_t seed = 0; seed < 16; ++seed) {
      ImageBuffer hr = synthetic_image(16, 12, 5), lr = synthetic_image(8, 6, 6);
      Rng rng(seed);
      augment_pair(hr, lr, rng);
      CHECK(hr.width == 2 * lr.width);
      CHECK(hr.height == 2 * lr.height);
    }
  }
  SUBCASE("deterministic in the rng") {
    ImageBuffer a1 = synthetic_image(6, 6, 7), a2 = a1;
    ImageBuffer b1 = synthetic_image(3, 3, 8), b2 = b1;
    Rng r1(44), r2(44);
    augment_pair(a1, b1, r1);
    augment_pair(a2, b2, r2);
    CHECK(a1.data == a2.data);
    CHECK(b1.data == b2.data);
  }
}

TEST_CASE("batch sampling") {
  LoadedDataset ds;
  for (uint64_t i = 0; i < 3; ++i) {
    ds.hr.push_back(synthetic_image(16, 16, 300 + i));
    ds.lr.push_back(synthetic_image(8, 8, 400 + i));
  }
  TrainConfig cfg = tiny_config("unused", ".");
  cfg.batch = 3;

  SUBCASE("real-only batches have the right shapes, range, and flags") {
    Rng rng(11);
    const Batch batch = sample_batch(ds, nullptr, cfg, rng);
    CHECK(batch.lr.shape == Shape{3, 3, 8, 8});
    CHECK(batch.hr.shape == Shape{3, 3, 16, 16});
    CHECK(batch.generated == std::vector<uint8_t>(3, 0));
    for (float v : batch.lr.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    for (float v : batch.hr.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  SUBCASE("deterministic in the rng") {
    Rng r1(12), r2(12);
    const Batch a = sample_batch(ds, nullptr, cfg, r1);
    const Batch b = sample_batch(ds, nullptr, cfg, r2);
    CHECK(a.lr.data == b.lr.data);
    CHECK(a.hr.data == b.hr.data);
  }
  SUBCASE("a generator with overwhelming mixing odds fills every slot") {
    GeneratorConfig gc;
    gc.widths = {4, 8};
    gc.scale = 2;
    const auto gen = DdganGenerator<float>::build(gc, 3);
    TrainConfig mixed = cfg;
    mixed.mix_gamma = 1e9;
    Rng rng(13);
    const Batch batch = sample_batch(ds, &gen, mixed, rng);
    CHECK(batch.generated == std::vector<uint8_t>(3, 1));
    for (float v : batch.lr.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  SUBCASE("oversized crop rejected") {
    TrainConfig big = cfg;
    big.crop = 9;
    Rng rng(14);
    CHECK_THROWS_AS(sample_batch(ds, nullptr, big, rng), ShapeError);
  }
  SUBCASE("empty dataset rejected") {
    const LoadedDataset none;
    Rng rng(15);
    CHECK_THROWS_AS(sample_batch(none, nullptr, cfg, rng), ConfigError);
  }
}

TEST_CASE("adam first step approximates a signed step of size lr") {
  ParamStore<float> store;
  Rng rng(1);
  store.create("w", Shape{1, 1, 1, 2}, 0, rng);
  store[0].value.data = {1.0f, -2.0f};
  store[0].grad.data = {0.5f, -0.25f};
  AdamState opt(store);
  TrainConfig cfg;  // default betas/eps
  opt.step(store, 0.01, cfg);

  CHECK(opt.t() == 1);
  // First-step algebra: m_hat = g, v_hat = g^2, delta = -lr*g/(|g|+eps).
  CHECK(std::abs(store[0].value.data[0] - 0.99f) < 1e-6);
  CHECK(std::abs(store[0].value.data[1] - (-1.99f)) < 1e-6);
  CHECK(store[0].grad.data == std::vector<float>{0.0f, 0.0f});  // cleared
}

TEST_CASE("adam leaves parameters alone when gradients are zero from the start") {
  ParamStore<float> store;
  Rng rng(2);
  store.create("w", Shape{1, 2, 1, 1}, 4, rng);
  const std::vector<float> before = store[0].value.data;
  AdamState opt(store);
  TrainConfig cfg;
  opt.step(store, 0.5, cfg);
  opt.step(store, 0.5, cfg);
  CHECK(store[0].value.data == before);
  CHECK(opt.t() == 2);
}

TEST_CASE("adam respects a freeze mask but still clears gradients") {
  ParamStore<float> store;
  Rng rng(3);
  store.create("a", Shape{1, 1, 1, 1}, 0, rng);
  store.create("b", Shape{1, 1, 1, 1}, 0, rng);
  store[0].value.data = {1.0f};
  store[1].value.data = {1.0f};
  store[0].grad.data = {1.0f};
  store[1].grad.data = {1.0f};
  AdamState opt(store);
  TrainConfig cfg;
  opt.step(store, 0.1, cfg, {true, false});
  CHECK(store[0].value.data[0] == 1.0f);
  CHECK(store[1].value.data[0] != 1.0f);
  CHECK(store[0].grad.data[0] == 0.0f);
  CHECK(store[1].grad.data[0] == 0.0f);
}

TEST_CASE("adam rejects a store it was not built for") {
  ParamStore<float> store;
  Rng rng(4);
  store.create("a", Shape{1, 1, 1, 1}, 0, rng);
  AdamState opt(store);
  store.create("b", Shape{1, 1, 1, 1}, 0, rng);
  TrainConfig cfg;
  CHECK_THROWS_AS(opt.step(store, 0.1, cfg), ConfigError);
}

TEST_CASE("dataset loading enforces the scale relation") {
  TempDir dir("ds_scale");
  write_image(dir.file("hr.ppm"), synthetic_image(16, 16, 1));
  write_image(dir.file("lr.ppm"), synthetic_image(8, 8, 2));
  write_image(dir.file("lr_bad.ppm"), synthetic_image(9, 8, 3));
  {
    std::ofstream m(dir.file("good.txt"));
    m << "hr.ppm\tlr.ppm\n";
  }
  {
    std::ofstream m(dir.file("bad.txt"));
    m << "hr.ppm\tlr_bad.ppm\n";
  }
  const LoadedDataset ok = LoadedDataset::load(dir.file("good.txt"), 2);
  CHECK(ok.hr.size() == 1);
  CHECK(ok.lr[0].width == 8);
  CHECK_THROWS_AS(LoadedDataset::load(dir.file("bad.txt"), 2), ShapeError);
}

TEST_CASE("train state survives a checkpoint round trip bitwise") {
  TempDir dir("ckpt_rt");
  TrainConfig cfg = tiny_config("unused", dir.str());
  JointNets nets = build_nets(cfg);
  AdamState opt_gen(nets.gen.params), opt_disc(nets.disc.params), opt_durcan(nets.durcan.params);

  // Make the optimizer state informative: one step with synthetic gradients.
  auto fake_grads = [](ParamStore<float>& store) {
    for (size_t i = 0; i < store.size(); ++i)
      for (float& g : store[i].grad.data) g = 0.01f * (static_cast<int>(i % 7) - 3);
  };
  fake_grads(nets.gen.params);
  fake_grads(nets.disc.params);
  fake_grads(nets.durcan.params);
  opt_gen.step(nets.gen.params, 1e-3, cfg);
  opt_disc.step(nets.disc.params, 1e-3, cfg);
  opt_durcan.step(nets.durcan.params, 1e-3, cfg);

  const std::string path = dir.file("state.ckpt");
  save_train_state(path, nets, opt_gen, opt_disc, opt_durcan, 5);

  TrainConfig other = cfg;
  other.seed = 8;  // different init, to prove loading overwrites everything
  JointNets fresh = build_nets(other);
  AdamState re_gen(fresh.gen.params), re_disc(fresh.disc.params), re_durcan(fresh.durcan.params);
  REQUIRE_FALSE(stores_equal(fresh.durcan.params, nets.durcan.params));

  const long long iter = load_train_state(path, fresh, re_gen, re_disc, re_durcan);
  CHECK(iter == 5);
  CHECK(stores_equal(fresh.gen.params, nets.gen.params));
  CHECK(stores_equal(fresh.disc.params, nets.disc.params));
  CHECK(stores_equal(fresh.durcan.params, nets.durcan.params));
  CHECK(re_gen.t() == 1);
  CHECK(re_disc.t() == 1);
  CHECK(re_durcan.t() == 1);
  for (size_t i = 0; i < fresh.durcan.params.size(); ++i) {
    CHECK(re_durcan.m(i).data == opt_durcan.m(i).data);
    CHECK(re_durcan.v(i).data == opt_durcan.v(i).data);
  }
}

TEST_CASE("checkpoints rebuild inference networks from their own metadata") {
  TempDir dir("ckpt_meta");
  TrainConfig cfg = tiny_config("unused", dir.str());
  JointNets nets = build_nets(cfg);
  AdamState og(nets.gen.params), od(nets.disc.params), ou(nets.durcan.params);
  const std::string path = dir.file("state.ckpt");
  save_train_state(path, nets, og, od, ou, 1);

  SUBCASE("restorer") {
    const Durcan<float> net = load_durcan(path);
    CHECK(net.cfg.channels == 8);
    CHECK(net.cfg.reduction == 4);
    CHECK(net.cfg.scale == 2);
    CHECK(net.cfg.depth() == nets.durcan.cfg.depth());
    CHECK(net.cfg.kernels == nets.durcan.cfg.kernels);
    CHECK(stores_equal(net.params, nets.durcan.params));

    const Tensor<float> x = image_to_tensor<float>(synthetic_image(8, 8, 60));
    Tape<float> t1, t2;
    const auto& a = t1.value(net.forward(t1, t1.input(x)));
    const auto& b = t2.value(nets.durcan.forward(t2, t2.input(x)));
    CHECK(a.data == b.data);
  }
  SUBCASE("degradation generator") {
    const DdganGenerator<float> net = load_generator(path);
    CHECK(net.cfg.scale == 2);
    CHECK(net.cfg.widths == std::vector<int>{4, 8});
    CHECK(stores_equal(net.params, nets.gen.params));

    const Tensor<float> x = image_to_tensor<float>(synthetic_image(16, 16, 61));
    Tape<float> t1, t2;
    const auto& a = t1.value(net.forward(t1, t1.input(x)));
    const auto& b = t2.value(nets.gen.forward(t2, t2.input(x)));
    CHECK(a.shape == Shape{1, 3, 8, 8});
    CHECK(a.data == b.data);
  }
}

TEST_CASE("checkpoint loading rejects strays, gaps, and shape changes") {
  TempDir dir("ckpt_bad");
  TrainConfig cfg = tiny_config("unused", dir.str());
  JointNets nets = build_nets(cfg);
  AdamState og(nets.gen.params), od(nets.disc.params), ou(nets.durcan.params);
  const std::string good = dir.file("good.ckpt");
  save_train_state(good, nets, og, od, ou, 2);

  auto resave = [&](const std::string& out,
                    const std::function<void(std::map<std::string, Tensor<float>>&)>& tweak) {
    auto loaded = load_checkpoint(good);
    tweak(loaded);
    std::vector<std::pair<std::string, const Tensor<float>*>> entries;
    for (const auto& [name, tensor] : loaded) entries.emplace_back(name, &tensor);
    save_checkpoint(out, entries);
  };
  auto reload = [&](const std::string& path) {
    JointNets fresh = build_nets(cfg);
    AdamState g(fresh.gen.params), d(fresh.disc.params), u(fresh.durcan.params);
    return load_train_state(path, fresh, g, d, u);
  };

  SUBCASE("unexpected model tensor") {
    const std::string path = dir.file("stray.ckpt");
    resave(path, [](auto& m) {
      Tensor<float> junk(Shape{1, 1, 1, 1});
      m.emplace("durcan.zzz.w", std::move(junk));
    });
    CHECK_THROWS_AS(reload(path), IoError);
  }
  SUBCASE("missing model tensor") {
    const std::string path = dir.file("gap.ckpt");
    resave(path, [&](auto& m) { m.erase("durcan." + nets.durcan.params[0].name); });
    CHECK_THROWS_AS(reload(path), IoError);
  }
  SUBCASE("shape mismatch") {
    const std::string path = dir.file("shape.ckpt");
    resave(path, [&](auto& m) {
      m["durcan." + nets.durcan.params[0].name] = Tensor<float>(Shape{1, 1, 1, 1});
    });
    CHECK_THROWS_AS(reload(path), ShapeError);
  }
}

TEST_CASE("joint training runs, logs, and checkpoints") {
  TempDir data("train_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir out("train_out");
  TrainConfig cfg = tiny_config(manifest, out.str());

  int calls = 0;
  double last_lr = -1;
  const TrainResult result = train_joint(
      cfg, [&](long long iter, double l_d, double l_g, double l_sr, double lr) {
        CHECK(iter == calls);
        CHECK(std::isfinite(l_d));
        CHECK(std::isfinite(l_g));
        CHECK(std::isfinite(l_sr));
        CHECK(l_sr > 0.0);
        last_lr = lr;
        ++calls;
      });

  CHECK(result.iters_run == 3);
  CHECK(calls == 3);
  CHECK(last_lr == cfg.lr);
  CHECK(fs::exists(result.checkpoint_path));

  const auto rows = read_lines(result.log_path);
  REQUIRE(rows.size() == 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::istringstream row(rows[i]);
    long long iter;
    double l_d, l_g, l_sr, lr;
    REQUIRE(bool(row >> iter >> l_d >> l_g >> l_sr >> lr));
    CHECK(iter == static_cast<long long>(i));
    CHECK(std::isfinite(l_sr));
  }

  // The checkpoint carries the final state: loading it back reproduces the
  // trained restorer.
  const Durcan<float> net = load_durcan(result.checkpoint_path);
  CHECK(net.cfg.depth() == 6);
}

TEST_CASE("identical seeds reproduce the loss log exactly") {
  TempDir data("det_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir out_a("det_a"), out_b("det_b");
  TrainConfig a = tiny_config(manifest, out_a.str());
  TrainConfig b = tiny_config(manifest, out_b.str());

  const TrainResult ra = train_joint(a);
  const TrainResult rb = train_joint(b);
  CHECK(read_lines(ra.log_path) == read_lines(rb.log_path));

  TrainConfig c = tiny_config(manifest, out_b.str());
  c.seed = 8;
  const TrainResult rc = train_joint(c);
  CHECK(read_lines(ra.log_path) != read_lines(rc.log_path));
}

TEST_CASE("resume continues the uninterrupted trajectory") {
  TempDir data("resume_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir full_dir("resume_full"), half_dir("resume_half"), cont_dir("resume_cont");

  TrainConfig full = tiny_config(manifest, full_dir.str());
  full.iters = 4;
  const TrainResult r_full = train_joint(full);

  TrainConfig half = tiny_config(manifest, half_dir.str());
  half.iters = 2;
  const TrainResult r_half = train_joint(half);

  TrainConfig cont = tiny_config(manifest, cont_dir.str());
  cont.iters = 4;
  cont.resume = r_half.checkpoint_path;
  const TrainResult r_cont = train_joint(cont);
  CHECK(r_cont.iters_run == 2);

  const auto full_rows = read_lines(r_full.log_path);
  const auto cont_rows = read_lines(r_cont.log_path);
  REQUIRE(full_rows.size() == 4);
  REQUIRE(cont_rows.size() == 2);
  CHECK(cont_rows[0] == full_rows[2]);
  CHECK(cont_rows[1] == full_rows[3]);

  // Resuming a finished run is an error, not a silent no-op.
  TrainConfig done = tiny_config(manifest, cont_dir.str());
  done.iters = 2;
  done.resume = r_half.checkpoint_path;
  CHECK_THROWS_AS(train_joint(done), ConfigError);
}

TEST_CASE("frozen parameter prefixes are left untouched by training") {
  TempDir data("freeze_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir out("freeze_out");
  TrainConfig cfg = tiny_config(manifest, out.str());
  cfg.use_ddgan = false;
  cfg.iters = 1;
  cfg.freeze = {"durcan.head"};

  const TrainResult result = train_joint(cfg);
  const Durcan<float> trained = load_durcan(result.checkpoint_path);
  const JointNets initial = build_nets(cfg);

  bool any_frozen = false, any_trained = false;
  for (size_t i = 0; i < trained.params.size(); ++i) {
    const bool frozen_name = trained.params[i].name.rfind("head", 0) == 0;
    const bool same = trained.params[i].value.data == initial.durcan.params[i].value.data;
    if (frozen_name) {
      CHECK(same);
      any_frozen = true;
    } else if (!same) {
      any_trained = true;
    }
  }
  CHECK(any_frozen);
  CHECK(any_trained);
}

TEST_CASE("training aborts with a diagnosis when the loss turns non-finite") {
  TempDir data("nan_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir out("nan_out");

  TrainConfig short_run = tiny_config(manifest, out.str());
  short_run.iters = 2;
  const TrainResult seeded = train_joint(short_run);

  // Poison the restorer's tail conv with NaNs and resume from it. The tail
  // feeds tanh directly, so the NaN must surface in L_SR; weights further
  // upstream can be laundered by relu (NaN > 0 is false, so relu(NaN) = 0).
  auto loaded = load_checkpoint(seeded.checkpoint_path);
  auto poisoned = loaded.find("durcan.tail.w");
  REQUIRE(poisoned != loaded.end());
  for (float& v : poisoned->second.data) v = std::nanf("");
  std::vector<std::pair<std::string, const Tensor<float>*>> entries;
  for (const auto& [name, tensor] : loaded) entries.emplace_back(name, &tensor);
  const std::string bad = out.file("poisoned.ckpt");
  save_checkpoint(bad, entries);

  TrainConfig resume_bad = tiny_config(manifest, out.str());
  resume_bad.iters = 4;
  resume_bad.resume = bad;
  try {
    train_joint(resume_bad);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("L_SR") != std::string::npos);
    CHECK(msg.find("iteration 2") != std::string::npos);
  }
}

TEST_CASE("training validates crop and generator divisibility up front") {
  TempDir data("guard_data");
  const std::string manifest = write_tiny_dataset(data);
  TempDir out("guard_out");

  TrainConfig too_big = tiny_config(manifest, out.str());
  too_big.crop = 9;  // LR images are 8x8
  CHECK_THROWS_AS(train_joint(too_big), ConfigError);

  TrainConfig odd = tiny_config(manifest, out.str());
  odd.crop = 6;  // HR crop 12 does not divide by 2^groups = 4
  CHECK_THROWS_AS(train_joint(odd), ConfigError);
}
