#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cssr/config.hpp"
#include "cssr/ddgan.hpp"
#include "cssr/degrade.hpp"
#include "cssr/durcan.hpp"
#include "cssr/image.hpp"
#include "cssr/losses.hpp"
#include "cssr/params.hpp"
#include "cssr/rng.hpp"

namespace cssr {

struct TrainConfig {
  // data
  std::string manifest;
  std::string out_dir = ".";
  int scale = 4;
  int crop = 48;  // LR-side crop; HR crops are scale * crop
  int batch = 16;

  // optimization
  double lr = 1e-4;
  long long halve_every = 50000;
  long long iters = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // degradation mixing: P(generated sample) = mix_gamma / (1 + mix_gamma),
  // i.e. gamma = 0.25 yields the 1-in-5 generated fraction.
  double mix_gamma = 0.25;
  bool use_ddgan = true;  // false trains the restorer on real pairs only
  LossWeights weights;

  // architecture
  std::string arch = "durcan-12";
  int channels = 64;
  int reduction = 16;
  std::vector<int> gen_widths = {64, 128, 256};
  std::vector<int> disc_widths = {64, 128, 256};
  int disc_dense = 512;

  // run control
  uint64_t seed = 1;
  long long checkpoint_every = 0;  // 0 = final checkpoint only
  std::string resume;              // checkpoint to continue from
  std::vector<std::string> freeze;  // parameter path prefixes, e.g. "durcan.durb"

  static TrainConfig from_config(KeyValueConfig& kv);
  void validate() const;

  // Step-decayed learning rate: lr * 2^-(iter / halve_every), iter 0-based.
  double lr_at(long long iter) const;

  DurcanConfig durcan_config() const;
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
};

// Adam with bias correction, one instance per parameter store. Slot order
// mirrors the store's creation order.
class AdamState {
 public:
  explicit AdamState(const ParamStore<float>& store);

  // Applies one update and zeroes all gradients afterwards. frozen[i] skips
  // the update (but still clears the gradient) for parameter i; pass an
  // empty mask to update everything.
  void step(ParamStore<float>& store, double lr, const TrainConfig& cfg,
            const std::vector<bool>& frozen = {});

  long long t() const { return t_; }
  void set_t(long long t) { t_ = t; }
  Tensor<float>& m(size_t i) { return m_[i]; }
  Tensor<float>& v(size_t i) { return v_[i]; }
  const Tensor<float>& m(size_t i) const { return m_[i]; }
  const Tensor<float>& v(size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor<float>> m_, v_;
  long long t_ = 0;
};

// Paired images loaded via a dataset manifest. Every HR image must be exactly
// scale times its LR partner in both dimensions.
struct LoadedDataset {
  std::vector<ImageBuffer> hr;
  std::vector<ImageBuffer> lr;

  static LoadedDataset load(const std::string& manifest_path, int scale);
};

// Applies the same random rotation (0/90/180/270) and horizontal flip to
// both images of a pair. Consumes exactly two draws.
void augment_pair(ImageBuffer& hr, ImageBuffer& lr, Rng& rng);

// One Bernoulli draw of the sample-source flag at the configured mixing.
bool draw_generated(Rng& rng, double mix_gamma);

struct Batch {
  Tensor<float> lr;                 // (b, 3, crop, crop), [0,1]
  Tensor<float> hr;                 // (b, 3, scale*crop, scale*crop), [0,1]
  std::vector<uint8_t> generated;   // 1 where the LR crop came from `gen`
};

// Draws `cfg.batch` aligned crop pairs. When `gen` is non-null each sample
// flips a mixing coin; flagged samples replace the real LR crop with the
// generator's output on the HR crop (values only, no gradients retained).
Batch sample_batch(const LoadedDataset& ds, const DdganGenerator<float>* gen,
                   const TrainConfig& cfg, Rng& rng);

struct JointNets {
  DdganGenerator<float> gen;
  DdganDiscriminator<float> disc;
  Durcan<float> durcan;
};

// Builds the restorer, plus the generator and discriminator when
// cfg.use_ddgan is set; restorer-only configs leave those two empty (no
// parameters), so their widths/crop compatibility is never consulted.
JointNets build_nets(const TrainConfig& cfg);

// Serializes model parameters ("gen./disc./durcan." prefixes), optimizer
// moments ("opt.m./opt.v." + path), and bookkeeping ("meta.*": next
// iteration, Adam step counts, restorer architecture; generator metadata
// only when the generator is non-empty). Empty stores contribute nothing,
// so restorer-only checkpoints simply lack gen./disc. entries.
void save_train_state(const std::string& path, const JointNets& nets, const AdamState& opt_gen,
                      const AdamState& opt_disc, const AdamState& opt_durcan, long long iter);

// Restores parameters and optimizer state in place; returns the iteration to
// continue from. Missing tensors or shape mismatches throw; unrecognized
// entries are tolerated only under the opt./meta. prefixes.
long long load_train_state(const std::string& path, JointNets& nets, AdamState& opt_gen,
                           AdamState& opt_disc, AdamState& opt_durcan);

// Rebuilds just the restoration network from a checkpoint, reading its
// architecture from the meta entries. Used by inference and evaluation.
Durcan<float> load_durcan(const std::string& path);

// Same for the degradation generator.
DdganGenerator<float> load_generator(const std::string& path);

struct TrainResult {
  long long iters_run = 0;
  std::string checkpoint_path;
  std::string log_path;
};

using IterCallback =
    std::function<void(long long iter, double l_d, double l_g, double l_sr, double lr)>;

// Runs the three-step joint loop (discriminator, generator, restorer) for
// cfg.iters iterations, appending "iter<TAB>L_D<TAB>L_G<TAB>L_SR<TAB>lr"
// rows to out_dir/loss_log.txt and writing out_dir/checkpoint.ckpt.
// Deterministic in cfg.seed; resuming from a checkpoint reproduces the
// uninterrupted run's remaining iterations exactly.
TrainResult train_joint(const TrainConfig& cfg, const IterCallback& callback = {});

}  // namespace cssr
