#include "cssr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "cssr/checkpoint.hpp"

namespace fs = std::filesystem;

namespace cssr {

namespace {

// Fixed stream ids for seed derivation; iteration streams use kIterStream + i.
constexpr uint64_t kGenInitStream = 101;
constexpr uint64_t kDiscInitStream = 102;
constexpr uint64_t kDurcanInitStream = 103;
constexpr uint64_t kIterStream = 1u << 20;

}  // namespace

TrainConfig TrainConfig::from_config(KeyValueConfig& kv) {
  TrainConfig c;
  c.manifest = kv.get_string("data_manifest", c.manifest);
  c.out_dir = kv.get_string("out_dir", c.out_dir);
  c.scale = static_cast<int>(kv.get_int("scale", c.scale));
  c.crop = static_cast<int>(kv.get_int("crop", c.crop));
  c.batch = static_cast<int>(kv.get_int("batch", c.batch));
  c.lr = kv.get_double("lr", c.lr);
  c.halve_every = kv.get_int("halve_every", c.halve_every);
  c.iters = kv.get_int("iters", c.iters);
  c.adam_beta1 = kv.get_double("adam_beta1", c.adam_beta1);
  c.adam_beta2 = kv.get_double("adam_beta2", c.adam_beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.mix_gamma = kv.get_double("mix_gamma", c.mix_gamma);
  c.use_ddgan = kv.get_bool("use_ddgan", c.use_ddgan);
  c.weights.eta = kv.get_double("eta", c.weights.eta);
  c.weights.lambda = kv.get_double("lambda", c.weights.lambda);
  c.weights.label_alpha = kv.get_double("label_alpha", c.weights.label_alpha);
  c.weights.label_beta = kv.get_double("label_beta", c.weights.label_beta);
  c.arch = kv.get_string("arch", c.arch);
  c.channels = static_cast<int>(kv.get_int("channels", c.channels));
  c.reduction = static_cast<int>(kv.get_int("reduction", c.reduction));
  c.gen_widths = kv.get_int_list("gen_widths", c.gen_widths);
  c.disc_widths = kv.get_int_list("disc_widths", c.disc_widths);
  c.disc_dense = static_cast<int>(kv.get_int("disc_dense", c.disc_dense));
  c.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
  c.resume = kv.get_string("resume", c.resume);
  const std::string freeze = kv.get_string("freeze", "");
  size_t pos = 0;
  while (pos < freeze.size()) {
    size_t comma = freeze.find(',', pos);
    if (comma == std::string::npos) comma = freeze.size();
    std::string item = freeze.substr(pos, comma - pos);
    size_t b = item.find_first_not_of(" \t");
    size_t e = item.find_last_not_of(" \t");
    if (b != std::string::npos) c.freeze.push_back(item.substr(b, e - b + 1));
    pos = comma + 1;
  }
  return c;
}

void TrainConfig::validate() const {
  if (manifest.empty()) throw ConfigError("train: data_manifest is required");
  if (crop < 1 || batch < 1) throw ConfigError("train: crop and batch must be >= 1");
  if (iters < 1) throw ConfigError("train: iters must be >= 1");
  if (lr <= 0) throw ConfigError("train: lr must be > 0");
  if (halve_every < 1) throw ConfigError("train: halve_every must be >= 1");
  if (mix_gamma < 0) throw ConfigError("train: mix_gamma must be >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw ConfigError("train: adam betas must lie in [0,1)");
  if (adam_eps <= 0) throw ConfigError("train: adam_eps must be > 0");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  weights.validate();
  durcan_config().validate();
  if (use_ddgan) {
    generator_config().validate();
    discriminator_config().validate();
  }
}

double TrainConfig::lr_at(long long iter) const {
  return lr * std::pow(2.0, -static_cast<double>(iter / halve_every));
}

DurcanConfig TrainConfig::durcan_config() const {
  DurcanConfig dc = DurcanConfig::preset(arch);
  dc.channels = channels;
  dc.reduction = reduction;
  dc.scale = scale;
  return dc;
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig gc;
  gc.widths = gen_widths;
  gc.scale = scale;
  return gc;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig dc;
  dc.input_size = crop;
  dc.widths = disc_widths;
  dc.dense_units = disc_dense;
  return dc;
}

AdamState::AdamState(const ParamStore<float>& store) {
  for (size_t i = 0; i < store.size(); ++i) {
    m_.emplace_back(store[i].value.shape);
    v_.emplace_back(store[i].value.shape);
  }
}

void AdamState::step(ParamStore<float>& store, double lr, const TrainConfig& cfg,
                     const std::vector<bool>& frozen) {
  if (m_.size() != store.size())
    throw ConfigError("adam: optimizer state tracks " + std::to_string(m_.size()) +
                      " parameters, store has " + std::to_string(store.size()));
  ++t_;
  const float b1 = static_cast<float>(cfg.adam_beta1);
  const float b2 = static_cast<float>(cfg.adam_beta2);
  const float eps = static_cast<float>(cfg.adam_eps);
  const float corr1 = 1.0f - std::pow(b1, static_cast<float>(t_));
  const float corr2 = 1.0f - std::pow(b2, static_cast<float>(t_));
  for (size_t i = 0; i < store.size(); ++i) {
    if (i < frozen.size() && frozen[i]) continue;
    Parameter<float>& p = store[i];
    float* m = m_[i].data.data();
    float* v = v_[i].data.data();
    const float* g = p.grad.data.data();
    float* w = p.value.data.data();
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      m[k] = b1 * m[k] + (1.0f - b1) * g[k];
      v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
      const float mhat = m[k] / corr1;
      const float vhat = v[k] / corr2;
      w[k] -= static_cast<float>(lr) * mhat / (std::sqrt(vhat) + eps);
    }
  }
  store.zero_grads();
}

LoadedDataset LoadedDataset::load(const std::string& manifest_path, int scale) {
  LoadedDataset ds;
  for (const DatasetPair& pair : read_manifest(manifest_path)) {
    ImageBuffer hr = read_image(pair.hr_path);
    ImageBuffer lr = read_image(pair.lr_path);
    if (hr.width != lr.width * scale || hr.height != lr.height * scale)
      throw ShapeError(pair.hr_path + ": " + std::to_string(hr.width) + "x" +
                       std::to_string(hr.height) + " is not " + std::to_string(scale) +
                       "x the LR size " + std::to_string(lr.width) + "x" +
                       std::to_string(lr.height));
    ds.hr.push_back(std::move(hr));
    ds.lr.push_back(std::move(lr));
  }
  return ds;
}

namespace {

ImageBuffer rotate90cw(const ImageBuffer& img) {
  ImageBuffer out(img.height, img.width);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(y, img.height - 1 - x, c);
  return out;
}

ImageBuffer hflip(const ImageBuffer& img) {
  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

void apply_augment(ImageBuffer& img, int quarter_turns, bool flip) {
  for (int i = 0; i < quarter_turns; ++i) img = rotate90cw(img);
  if (flip) img = hflip(img);
}

void copy_crop(const ImageBuffer& src, int x0, int y0, int size, Tensor<float>& dst, int b) {
  for (int c = 0; c < 3; ++c) {
    float* plane = dst.plane(b, c);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        plane[static_cast<long long>(y) * size + x] =
            static_cast<float>(src.at(x0 + x, y0 + y, c)) / 255.0f;
  }
}

}  // namespace

void augment_pair(ImageBuffer& hr, ImageBuffer& lr, Rng& rng) {
  const int quarter_turns = rng.uniform_int(4);
  const bool flip = rng.uniform_int(2) == 1;
  apply_augment(hr, quarter_turns, flip);
  apply_augment(lr, quarter_turns, flip);
}

bool draw_generated(Rng& rng, double mix_gamma) {
  return rng.uniform() < mix_gamma / (1.0 + mix_gamma);
}

Batch sample_batch(const LoadedDataset& ds, const DdganGenerator<float>* gen,
                   const TrainConfig& cfg, Rng& rng) {
  if (ds.hr.empty()) throw ConfigError("sample_batch: empty dataset");
  const int crop = cfg.crop;
  const int hr_crop = crop * cfg.scale;
  Batch batch;
  batch.lr = Tensor<float>(Shape{cfg.batch, 3, crop, crop});
  batch.hr = Tensor<float>(Shape{cfg.batch, 3, hr_crop, hr_crop});
  batch.generated.assign(static_cast<size_t>(cfg.batch), 0);

  std::vector<int> pending;  // batch rows whose LR crop the generator fills in
  for (int b = 0; b < cfg.batch; ++b) {
    const int idx = rng.uniform_int(static_cast<int>(ds.hr.size()));
    ImageBuffer hr = ds.hr[idx];
    ImageBuffer lr = ds.lr[idx];
    augment_pair(hr, lr, rng);
    if (lr.width < crop || lr.height < crop)
      throw ShapeError("sample_batch: LR image " + std::to_string(lr.width) + "x" +
                       std::to_string(lr.height) + " smaller than crop " +
                       std::to_string(crop));
    const int cx = rng.uniform_int(lr.width - crop + 1);
    const int cy = rng.uniform_int(lr.height - crop + 1);
    copy_crop(hr, cx * cfg.scale, cy * cfg.scale, hr_crop, batch.hr, b);
    copy_crop(lr, cx, cy, crop, batch.lr, b);
    if (gen != nullptr && draw_generated(rng, cfg.mix_gamma)) {
      batch.generated[b] = 1;
      pending.push_back(b);
    }
  }

  if (!pending.empty()) {
    Tensor<float> hr_sub(Shape{static_cast<int>(pending.size()), 3, hr_crop, hr_crop});
    for (size_t i = 0; i < pending.size(); ++i)
      for (int c = 0; c < 3; ++c)
        std::copy(batch.hr.plane(pending[i], c),
                  batch.hr.plane(pending[i], c) + static_cast<long long>(hr_crop) * hr_crop,
                  hr_sub.plane(static_cast<int>(i), c));
    Tape<float> t;
    const Tensor<float>& fake = t.value(gen->forward(t, t.input(std::move(hr_sub))));
    for (size_t i = 0; i < pending.size(); ++i)
      for (int c = 0; c < 3; ++c)
        std::copy(fake.plane(static_cast<int>(i), c),
                  fake.plane(static_cast<int>(i), c) + static_cast<long long>(crop) * crop,
                  batch.lr.plane(pending[i], c));
  }
  return batch;
}

JointNets build_nets(const TrainConfig& cfg) {
  JointNets nets;
  // Restorer-only runs leave the adversarial nets empty: they are never
  // stepped, save/load skip empty stores, and their configs need not be
  // coherent with crop/scale (mirroring TrainConfig::validate).
  if (cfg.use_ddgan) {
    nets.gen =
        DdganGenerator<float>::build(cfg.generator_config(), Rng::derive(cfg.seed, kGenInitStream));
    nets.disc = DdganDiscriminator<float>::build(cfg.discriminator_config(),
                                                 Rng::derive(cfg.seed, kDiscInitStream));
  }
  nets.durcan = Durcan<float>::build(cfg.durcan_config(), Rng::derive(cfg.seed, kDurcanInitStream));
  return nets;
}

namespace {

void append_store(std::vector<std::pair<std::string, const Tensor<float>*>>& entries,
                  const std::string& prefix, const ParamStore<float>& store) {
  for (size_t i = 0; i < store.size(); ++i)
    entries.emplace_back(prefix + store[i].name, &store[i].value);
}

void append_adam(std::vector<std::pair<std::string, const Tensor<float>*>>& entries,
                 const std::string& prefix, const ParamStore<float>& store,
                 const AdamState& opt) {
  for (size_t i = 0; i < store.size(); ++i) {
    entries.emplace_back("opt.m." + prefix + store[i].name, &opt.m(i));
    entries.emplace_back("opt.v." + prefix + store[i].name, &opt.v(i));
  }
}

Tensor<float> scalar_tensor(double v) {
  Tensor<float> t(Shape{1, 1, 1, 1});
  t.data[0] = static_cast<float>(v);
  return t;
}

void restore_store(const std::string& path, std::map<std::string, Tensor<float>>& loaded,
                   const std::string& prefix, ParamStore<float>& store) {
  for (size_t i = 0; i < store.size(); ++i) {
    const std::string name = prefix + store[i].name;
    auto it = loaded.find(name);
    if (it == loaded.end()) throw IoError(path + ": checkpoint missing tensor '" + name + "'");
    if (!(it->second.shape == store[i].value.shape))
      throw ShapeError(path + ": tensor '" + name + "' has shape " + it->second.shape.str() +
                       ", model expects " + store[i].value.shape.str());
    store[i].value = std::move(it->second);
    loaded.erase(it);
  }
}

void restore_adam(const std::string& path, std::map<std::string, Tensor<float>>& loaded,
                  const std::string& prefix, const ParamStore<float>& store, AdamState& opt) {
  for (size_t i = 0; i < store.size(); ++i) {
    for (const char* kind : {"m", "v"}) {
      const std::string name = "opt." + std::string(kind) + "." + prefix + store[i].name;
      auto it = loaded.find(name);
      if (it == loaded.end())
        throw IoError(path + ": checkpoint missing optimizer tensor '" + name + "'");
      if (!(it->second.shape == store[i].value.shape))
        throw ShapeError(path + ": tensor '" + name + "' has shape " + it->second.shape.str() +
                         ", model expects " + store[i].value.shape.str());
      (kind[0] == 'm' ? opt.m(i) : opt.v(i)) = std::move(it->second);
      loaded.erase(it);
    }
  }
}

double take_meta(const std::string& path, std::map<std::string, Tensor<float>>& loaded,
                 const std::string& name) {
  auto it = loaded.find(name);
  if (it == loaded.end()) throw IoError(path + ": checkpoint missing '" + name + "'");
  const double v = it->second.data[0];
  loaded.erase(it);
  return v;
}

}  // namespace

void save_train_state(const std::string& path, const JointNets& nets, const AdamState& opt_gen,
                      const AdamState& opt_disc, const AdamState& opt_durcan, long long iter) {
  std::vector<std::pair<std::string, const Tensor<float>*>> entries;
  append_store(entries, "gen.", nets.gen.params);
  append_store(entries, "disc.", nets.disc.params);
  append_store(entries, "durcan.", nets.durcan.params);
  // Optimizer moments and bookkeeping ride along so a resumed run continues
  // the exact optimizer trajectory.
  append_adam(entries, "gen.", nets.gen.params, opt_gen);
  append_adam(entries, "disc.", nets.disc.params, opt_disc);
  append_adam(entries, "durcan.", nets.durcan.params, opt_durcan);

  const Tensor<float> meta_iter = scalar_tensor(static_cast<double>(iter));
  const Tensor<float> t_gen = scalar_tensor(static_cast<double>(opt_gen.t()));
  const Tensor<float> t_disc = scalar_tensor(static_cast<double>(opt_disc.t()));
  const Tensor<float> t_durcan = scalar_tensor(static_cast<double>(opt_durcan.t()));
  const Tensor<float> ch = scalar_tensor(nets.durcan.cfg.channels);
  const Tensor<float> red = scalar_tensor(nets.durcan.cfg.reduction);
  const Tensor<float> sc = scalar_tensor(nets.durcan.cfg.scale);
  Tensor<float> kernels(Shape{1, 1, nets.durcan.cfg.depth(), 2});
  for (int i = 0; i < nets.durcan.cfg.depth(); ++i) {
    kernels.at(0, 0, i, 0) = static_cast<float>(nets.durcan.cfg.kernels[i].first);
    kernels.at(0, 0, i, 1) = static_cast<float>(nets.durcan.cfg.kernels[i].second);
  }
  entries.emplace_back("meta.iter", &meta_iter);
  entries.emplace_back("meta.adam_t.gen", &t_gen);
  entries.emplace_back("meta.adam_t.disc", &t_disc);
  entries.emplace_back("meta.adam_t.durcan", &t_durcan);
  entries.emplace_back("meta.durcan.channels", &ch);
  entries.emplace_back("meta.durcan.reduction", &red);
  entries.emplace_back("meta.durcan.scale", &sc);
  entries.emplace_back("meta.durcan.kernels", &kernels);
  // Generator metadata only exists for joint checkpoints; a restorer-only run
  // has an empty generator whose config carries no meaning.
  Tensor<float> gen_scale, gen_widths;
  if (nets.gen.params.size() > 0) {
    gen_scale = scalar_tensor(nets.gen.cfg.scale);
    gen_widths = Tensor<float>(Shape{1, 1, 1, nets.gen.cfg.groups()});
    for (int i = 0; i < nets.gen.cfg.groups(); ++i)
      gen_widths.data[i] = static_cast<float>(nets.gen.cfg.widths[i]);
    entries.emplace_back("meta.gen.scale", &gen_scale);
    entries.emplace_back("meta.gen.widths", &gen_widths);
  }
  save_checkpoint(path, entries);
}

long long load_train_state(const std::string& path, JointNets& nets, AdamState& opt_gen,
                           AdamState& opt_disc, AdamState& opt_durcan) {
  auto loaded = load_checkpoint(path);
  restore_store(path, loaded, "gen.", nets.gen.params);
  restore_store(path, loaded, "disc.", nets.disc.params);
  restore_store(path, loaded, "durcan.", nets.durcan.params);
  restore_adam(path, loaded, "gen.", nets.gen.params, opt_gen);
  restore_adam(path, loaded, "disc.", nets.disc.params, opt_disc);
  restore_adam(path, loaded, "durcan.", nets.durcan.params, opt_durcan);
  const long long iter = static_cast<long long>(take_meta(path, loaded, "meta.iter"));
  opt_gen.set_t(static_cast<long long>(take_meta(path, loaded, "meta.adam_t.gen")));
  opt_disc.set_t(static_cast<long long>(take_meta(path, loaded, "meta.adam_t.disc")));
  opt_durcan.set_t(static_cast<long long>(take_meta(path, loaded, "meta.adam_t.durcan")));
  for (const auto& [name, tensor] : loaded) {
    (void)tensor;
    if (name.rfind("opt.", 0) != 0 && name.rfind("meta.", 0) != 0)
      throw IoError(path + ": unexpected tensor '" + name + "' in checkpoint");
  }
  return iter;
}

Durcan<float> load_durcan(const std::string& path) {
  auto loaded = load_checkpoint(path);
  DurcanConfig cfg;
  cfg.channels = static_cast<int>(take_meta(path, loaded, "meta.durcan.channels"));
  cfg.reduction = static_cast<int>(take_meta(path, loaded, "meta.durcan.reduction"));
  cfg.scale = static_cast<int>(take_meta(path, loaded, "meta.durcan.scale"));
  auto it = loaded.find("meta.durcan.kernels");
  if (it == loaded.end()) throw IoError(path + ": checkpoint missing 'meta.durcan.kernels'");
  const Tensor<float>& k = it->second;
  for (int i = 0; i < k.shape.h; ++i)
    cfg.kernels.emplace_back(static_cast<int>(k.at(0, 0, i, 0)),
                             static_cast<int>(k.at(0, 0, i, 1)));
  loaded.erase(it);
  Durcan<float> net = Durcan<float>::build(cfg, 0);
  restore_store(path, loaded, "durcan.", net.params);
  return net;
}

DdganGenerator<float> load_generator(const std::string& path) {
  auto loaded = load_checkpoint(path);
  GeneratorConfig cfg;
  cfg.scale = static_cast<int>(take_meta(path, loaded, "meta.gen.scale"));
  auto it = loaded.find("meta.gen.widths");
  if (it == loaded.end()) throw IoError(path + ": checkpoint missing 'meta.gen.widths'");
  cfg.widths.clear();
  for (float w : it->second.data) cfg.widths.push_back(static_cast<int>(w));
  loaded.erase(it);
  DdganGenerator<float> net = DdganGenerator<float>::build(cfg, 0);
  restore_store(path, loaded, "gen.", net.params);
  return net;
}

namespace {

void check_finite(double v, const char* term, long long iter) {
  if (!std::isfinite(v))
    throw NumericError(std::string(term) + " is not finite at iteration " +
                       std::to_string(iter) + "; aborting");
}

std::vector<bool> freeze_mask(const TrainConfig& cfg, const std::string& prefix,
                              const ParamStore<float>& store) {
  std::vector<bool> mask(store.size(), false);
  bool any = false;
  for (size_t i = 0; i < store.size(); ++i) {
    const std::string full = prefix + store[i].name;
    for (const std::string& fr : cfg.freeze)
      if (full.rfind(fr, 0) == 0) {
        mask[i] = true;
        any = true;
      }
  }
  return any ? mask : std::vector<bool>{};
}

}  // namespace

TrainResult train_joint(const TrainConfig& cfg, const IterCallback& callback) {
  cfg.validate();
  LoadedDataset ds = LoadedDataset::load(cfg.manifest, cfg.scale);
  for (size_t i = 0; i < ds.lr.size(); ++i)
    if (ds.lr[i].width < cfg.crop || ds.lr[i].height < cfg.crop)
      throw ConfigError("train: crop " + std::to_string(cfg.crop) +
                        " exceeds LR image size " + std::to_string(ds.lr[i].width) + "x" +
                        std::to_string(ds.lr[i].height));
  if (cfg.use_ddgan) {
    const int div = 1 << cfg.generator_config().groups();
    if ((cfg.crop * cfg.scale) % div != 0)
      throw ConfigError("train: HR crop " + std::to_string(cfg.crop * cfg.scale) +
                        " must divide by 2^" + std::to_string(cfg.generator_config().groups()) +
                        " for the generator");
  }

  JointNets nets = build_nets(cfg);
  FeatureExtractor<float> extractor = FeatureExtractor<float>::create();
  AdamState opt_gen(nets.gen.params);
  AdamState opt_disc(nets.disc.params);
  AdamState opt_durcan(nets.durcan.params);

  fs::create_directories(cfg.out_dir);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.ckpt").string();
  const std::string log_path = (fs::path(cfg.out_dir) / "loss_log.txt").string();

  long long start_iter = 0;
  if (!cfg.resume.empty())
    start_iter = load_train_state(cfg.resume, nets, opt_gen, opt_disc, opt_durcan);
  if (start_iter >= cfg.iters)
    throw ConfigError("train: checkpoint is already at iteration " +
                      std::to_string(start_iter) + ", nothing to do for iters = " +
                      std::to_string(cfg.iters));

  std::ofstream log(log_path, start_iter > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError(log_path + ": cannot open for writing");
  log.precision(17);

  const std::vector<bool> frz_gen = freeze_mask(cfg, "gen.", nets.gen.params);
  const std::vector<bool> frz_disc = freeze_mask(cfg, "disc.", nets.disc.params);
  const std::vector<bool> frz_durcan = freeze_mask(cfg, "durcan.", nets.durcan.params);

  for (long long iter = start_iter; iter < cfg.iters; ++iter) {
    const double lr = cfg.lr_at(iter);
    // All of this iteration's draws come from one derived stream, in a fixed
    // order, so a resumed run replays them exactly.
    Rng rng(Rng::derive(cfg.seed, kIterStream + static_cast<uint64_t>(iter)));
    double l_d = 0.0, l_g = 0.0, l_sr = 0.0;

    if (cfg.use_ddgan) {
      Batch real_pairs = sample_batch(ds, nullptr, cfg, rng);
      AdvLabels<float> labels{
          smoothed_labels<float>(LabelKind::Real, cfg.batch, cfg.weights, rng),
          smoothed_labels<float>(LabelKind::Fake, cfg.batch, cfg.weights, rng)};

      // Discriminator step: generator outputs enter as constants.
      Tensor<float> fakes;
      {
        Tape<float> t;
        fakes = t.value(nets.gen.forward(t, t.input(real_pairs.hr)));
      }
      {
        nets.disc.params.zero_grads();
        Tape<float> t;
        ValueId real_logits = nets.disc.forward(t, t.input(real_pairs.lr));
        ValueId fake_logits = nets.disc.forward(t, t.input(fakes));
        ValueId loss = discriminator_loss(
            t, relativistic_score_node(t, real_logits, fake_logits),
            relativistic_score_node(t, fake_logits, real_logits), labels);
        l_d = t.scalar(loss);
        check_finite(l_d, "L_D", iter);
        t.backward(loss);
        opt_disc.step(nets.disc.params, lr, cfg, frz_disc);
      }

      // Generator step: the discriminator participates with bound parameters
      // but only the generator is updated; its leaked gradients are cleared.
      {
        nets.gen.params.zero_grads();
        nets.disc.params.zero_grads();
        Tape<float> t;
        ValueId fake = nets.gen.forward(t, t.input(real_pairs.hr));
        ValueId real_lr = t.input(real_pairs.lr);
        ValueId real_logits = nets.disc.forward(t, real_lr);
        ValueId fake_logits = nets.disc.forward(t, fake);
        ValueId adv = generator_adv_loss(
            t, relativistic_score_node(t, real_logits, fake_logits),
            relativistic_score_node(t, fake_logits, real_logits), labels);
        ValueId con = content_loss(t, fake, real_lr, extractor);
        ValueId loss = t.add(con, t.affine(adv, static_cast<float>(cfg.weights.lambda), 0.0f));
        l_g = t.scalar(loss);
        check_finite(l_g, "L_G", iter);
        t.backward(loss);
        opt_gen.step(nets.gen.params, lr, cfg, frz_gen);
        nets.disc.params.zero_grads();
      }
    }

    // Restorer step on a freshly mixed batch (post-update generator).
    {
      Batch mixed = sample_batch(ds, cfg.use_ddgan ? &nets.gen : nullptr, cfg, rng);
      nets.durcan.params.zero_grads();
      Tape<float> t;
      ValueId sr = nets.durcan.forward(t, t.input(mixed.lr));
      ValueId loss = restoration_loss(t, sr, t.input(mixed.hr), cfg.weights);
      l_sr = t.scalar(loss);
      check_finite(l_sr, "L_SR", iter);
      t.backward(loss);
      opt_durcan.step(nets.durcan.params, lr, cfg, frz_durcan);
    }

    log << iter << "\t" << l_d << "\t" << l_g << "\t" << l_sr << "\t" << lr << "\n";
    if (callback) callback(iter, l_d, l_g, l_sr, lr);
    if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
        iter + 1 < cfg.iters)
      save_train_state(ckpt_path, nets, opt_gen, opt_disc, opt_durcan, iter + 1);
  }
  log.flush();
  if (!log) throw IoError(log_path + ": write failed");
  save_train_state(ckpt_path, nets, opt_gen, opt_disc, opt_durcan, cfg.iters);
  return TrainResult{cfg.iters - start_iter, ckpt_path, log_path};
}

}  // namespace cssr
