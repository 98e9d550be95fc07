// cssr: camera-screen super-resolution toolkit.
//
// Subcommands cover the full workflow: synthesize degraded training data
// (degrade), align and average real captures (rectify), train the joint
// generator/discriminator/restorer system (train), run the trained networks
// (sr, gen-lr), score results (eval), and audit the implementation
// (params, gradcheck).
//
// Exit codes: 0 success, 2 bad usage or configuration, 3 I/O failure,
// 4 numeric failure (non-finite loss, failed gradient check).

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cssr/config.hpp"
#include "cssr/ddgan.hpp"
#include "cssr/degrade.hpp"
#include "cssr/durcan.hpp"
#include "cssr/gradsuite.hpp"
#include "cssr/image.hpp"
#include "cssr/metrics.hpp"
#include "cssr/rectify.hpp"
#include "cssr/rng.hpp"
#include "cssr/tape.hpp"
#include "cssr/tensor.hpp"
#include "cssr/trainer.hpp"

namespace fs = std::filesystem;
using namespace cssr;

namespace {

// CSSR_SEED, when set and non-empty, overrides whatever seed the command
// line supplied. Lets wrapper scripts pin determinism without threading a
// flag through every call site.
uint64_t resolve_seed(uint64_t flag_value) {
  const char* env = std::getenv("CSSR_SEED");
  if (env == nullptr || *env == '\0') return flag_value;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0')
    throw ConfigError(std::string("CSSR_SEED is not an unsigned integer: '") + env + "'");
  return static_cast<uint64_t>(v);
}

std::string format_row(long long iter, double l_d, double l_g, double l_sr, double lr) {
  std::ostringstream os;
  os << iter << '\t' << std::setprecision(10) << l_d << '\t' << l_g << '\t' << l_sr << '\t'
     << lr;
  return os.str();
}

int run_train(const std::string& config_path, const std::string& out_dir, long long seed_flag,
              bool seed_given, long long print_every) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    KeyValueConfig kv = KeyValueConfig::from_file(config_path);
    cfg = TrainConfig::from_config(kv);
    kv.reject_unknown_keys();
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed_given) cfg.seed = static_cast<uint64_t>(seed_flag);
  cfg.seed = resolve_seed(cfg.seed);

  IterCallback progress;
  if (print_every > 0) {
    progress = [print_every](long long iter, double l_d, double l_g, double l_sr, double lr) {
      if (iter % print_every == 0)
        std::cout << format_row(iter, l_d, l_g, l_sr, lr) << std::endl;
    };
  }
  const TrainResult res = train_joint(cfg, progress);
  std::cout << "trained " << res.iters_run << " iterations\n"
            << "checkpoint: " << res.checkpoint_path << "\n"
            << "loss log:   " << res.log_path << "\n";
  return 0;
}

int run_sr(const std::string& model, const std::string& in_path, const std::string& out_path) {
  const Durcan<float> net = load_durcan(model);
  const ImageBuffer input = read_image(in_path);
  Tape<float> tape;
  const ValueId x = tape.input(image_to_tensor<float>(input));
  const ValueId y = net.forward(tape, x);
  write_image(out_path, tensor_to_image(tape.value(y)));
  std::cout << out_path << ": " << input.width * net.cfg.scale << "x"
            << input.height * net.cfg.scale << " from " << input.width << "x" << input.height
            << "\n";
  return 0;
}

int run_gen_lr(const std::string& model, const std::string& in_path,
               const std::string& out_path) {
  const DdganGenerator<float> net = load_generator(model);
  const ImageBuffer input = read_image(in_path);
  Tape<float> tape;
  const ValueId x = tape.input(image_to_tensor<float>(input));
  const ValueId y = net.forward(tape, x);
  write_image(out_path, tensor_to_image(tape.value(y)));
  std::cout << out_path << ": " << input.width / net.cfg.scale << "x"
            << input.height / net.cfg.scale << " from " << input.width << "x" << input.height
            << "\n";
  return 0;
}

int run_degrade(const std::string& hr_dir, const std::string& out_dir, int count,
                const DegradationParams& params) {
  DegradationParams p = params;
  p.seed = resolve_seed(p.seed);
  const std::vector<DatasetPair> pairs = make_dataset(hr_dir, p, count, out_dir);
  std::cout << "wrote " << pairs.size() << " pairs and manifest.txt to " << out_dir << "\n";
  return 0;
}

int run_rectify(const std::vector<std::string>& shots, const std::vector<std::string>& corrs,
                const std::string& ref_path, const std::string& out_path, int scale,
                double threshold, int iterations, uint64_t seed) {
  if (shots.empty()) throw ConfigError("rectify: need at least one shot");
  if (shots.size() != corrs.size())
    throw ConfigError("rectify: " + std::to_string(shots.size()) + " shots but " +
                      std::to_string(corrs.size()) + " correspondence files");
  seed = resolve_seed(seed);

  const ImageBuffer ref = read_image(ref_path);
  std::vector<ImageBuffer> aligned;
  for (size_t i = 0; i < shots.size(); ++i) {
    const ImageBuffer shot = read_image(shots[i]);
    const std::vector<Correspondence> points = read_correspondences(corrs[i]);
    // Each shot gets its own seed stream so adding a shot never changes the
    // estimates of the others.
    const RansacResult fit =
        ransac_homography(points, threshold, iterations, Rng::derive(seed, i));
    std::cout << shots[i] << ": " << fit.inliers.size() << "/" << points.size()
              << " inliers\n";
    aligned.push_back(warp_bilinear(shot, fit.h, ref.width, ref.height));
  }
  ImageBuffer averaged = average_stack(aligned);
  if (scale > 1) averaged = downscale_bicubic(averaged, scale);
  write_image(out_path, averaged);
  std::cout << out_path << ": " << averaged.width << "x" << averaged.height << "\n";
  return 0;
}

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir + ": not a directory");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

int run_eval(const std::string& sr_dir, const std::string& hr_dir) {
  const std::vector<std::string> sr_files = list_images(sr_dir);
  const std::vector<std::string> hr_files = list_images(hr_dir);
  if (sr_files.empty()) throw IoError(sr_dir + ": no files to evaluate");
  if (sr_files.size() != hr_files.size())
    throw ConfigError("eval: " + std::to_string(sr_files.size()) + " files in " + sr_dir +
                      " but " + std::to_string(hr_files.size()) + " in " + hr_dir);

  MetricReport report;
  for (size_t i = 0; i < sr_files.size(); ++i) {
    const ImageBuffer sr = read_image(sr_files[i]);
    const ImageBuffer hr = read_image(hr_files[i]);
    if (sr.width != hr.width || sr.height != hr.height)
      throw ShapeError("eval: " + sr_files[i] + " is " + std::to_string(sr.width) + "x" +
                       std::to_string(sr.height) + " but " + hr_files[i] + " is " +
                       std::to_string(hr.width) + "x" + std::to_string(hr.height));
    MetricReport::Row row;
    row.name = fs::path(sr_files[i]).filename().string();
    row.psnr = psnr(rgb_to_y(sr), rgb_to_y(hr));
    row.ssim = ssim(rgb_to_y(sr), rgb_to_y(hr), sr.width, sr.height);
    report.rows.push_back(std::move(row));
  }
  std::cout << report.to_text();
  return 0;
}

int run_params(const std::string& arch, int channels, int reduction, int scale) {
  DurcanConfig cfg = DurcanConfig::preset(arch);
  if (channels > 0) cfg.channels = channels;
  if (reduction > 0) cfg.reduction = reduction;
  if (scale > 0) cfg.scale = scale;
  const Durcan<float> net = Durcan<float>::build(cfg, 0);
  for (const auto& [block, count] : net.params.breakdown())
    std::cout << std::left << std::setw(16) << block << std::right << std::setw(12) << count
              << "\n";
  std::cout << std::left << std::setw(16) << "total" << std::right << std::setw(12)
            << net.params.total_parameters() << "\n";
  return 0;
}

int run_gradcheck() {
  const std::vector<GradSuiteCase> cases = run_gradient_suite();
  int failures = 0;
  for (const GradSuiteCase& c : cases) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(32) << c.name
              << std::scientific << std::setprecision(3) << "rel_err " << c.rel_err
              << "  tol " << c.tolerance << std::defaultfloat << "\n";
    if (!c.pass) ++failures;
  }
  std::cout << cases.size() - failures << "/" << cases.size() << " gradient checks passed\n";
  if (failures > 0)
    throw NumericError(std::to_string(failures) + " gradient checks exceeded tolerance");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera-screen super-resolution toolkit"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_out;
  long long train_seed = 0, print_every = 100;
  bool train_seed_given = false;
  CLI::App* train = app.add_subcommand("train", "run the joint training loop");
  train->add_option("--config", train_config, "key = value configuration file")
      ->required();
  train->add_option("--out", train_out, "output directory (overrides out_dir)");
  train->add_option("--seed", train_seed, "RNG seed (overrides the config file)");
  train->add_option("--print-every", print_every, "console progress interval, 0 = quiet");

  // sr
  std::string sr_model, sr_in, sr_out;
  CLI::App* sr = app.add_subcommand("sr", "restore and upscale one image");
  sr->add_option("--model", sr_model, "checkpoint file")->required();
  sr->add_option("--in", sr_in, "degraded input image")->required();
  sr->add_option("--out", sr_out, "restored output image")->required();

  // gen-lr
  std::string gen_model, gen_in, gen_out;
  CLI::App* gen = app.add_subcommand("gen-lr", "synthesize a degraded LR image from an HR one");
  gen->add_option("--model", gen_model, "checkpoint file")->required();
  gen->add_option("--in", gen_in, "clean HR input image")->required();
  gen->add_option("--out", gen_out, "degraded LR output image")->required();

  // degrade
  std::string deg_hr_dir, deg_out_dir;
  int deg_count = 1;
  DegradationParams deg;
  long long deg_seed = 0;
  std::vector<double> deg_gain = {1.0, 1.0, 1.0};
  std::vector<double> deg_bias = {0.0, 0.0, 0.0};
  CLI::App* degrade_cmd =
      app.add_subcommand("degrade", "build an HR/LR training set with the simulated chain");
  degrade_cmd->add_option("--hr-dir", deg_hr_dir, "directory of clean HR images")->required();
  degrade_cmd->add_option("--out-dir", deg_out_dir, "output dataset directory")->required();
  degrade_cmd->add_option("--count", deg_count, "number of pairs to produce")->required();
  degrade_cmd->add_option("--screen-blur", deg.screen_blur_sigma, "display blur sigma");
  degrade_cmd->add_option("--screen-scale", deg.screen_scale, "display downscale factor");
  degrade_cmd->add_option("--screen-noise", deg.screen_noise_sigma, "display noise sigma");
  degrade_cmd->add_option("--gain", deg_gain, "per-channel color gain r,g,b")
      ->delimiter(',')
      ->expected(3);
  degrade_cmd->add_option("--bias", deg_bias, "per-channel color bias r,g,b")
      ->delimiter(',')
      ->expected(3);
  degrade_cmd->add_option("--gamma", deg.gamma, "exposure exponent");
  degrade_cmd->add_option("--camera-blur", deg.camera_blur_sigma, "capture blur sigma");
  degrade_cmd->add_option("--camera-scale", deg.camera_scale, "capture downscale factor");
  degrade_cmd->add_option("--camera-noise", deg.camera_noise_sigma, "capture noise sigma");
  degrade_cmd->add_option("--seed", deg_seed, "RNG seed");

  // rectify
  std::vector<std::string> rect_shots, rect_corrs;
  std::string rect_ref, rect_out;
  int rect_scale = 4, rect_iterations = 2000;
  double rect_threshold = 3.0;
  long long rect_seed = 0;
  CLI::App* rectify =
      app.add_subcommand("rectify", "align captured shots to a reference and average them");
  rectify->add_option("--shots", rect_shots, "captured images, comma separated")
      ->delimiter(',')
      ->required();
  rectify
      ->add_option("--corrs", rect_corrs,
                   "per-shot correspondence files (x1 y1 x2 y2 lines), comma separated")
      ->delimiter(',')
      ->required();
  rectify->add_option("--ref", rect_ref, "reference HR image (sets the aligned frame)")
      ->required();
  rectify->add_option("--out", rect_out, "averaged output image")->required();
  rectify->add_option("--scale", rect_scale, "downscale factor applied after averaging");
  rectify->add_option("--threshold", rect_threshold, "inlier transfer-error threshold, px");
  rectify->add_option("--iterations", rect_iterations, "RANSAC iterations per shot");
  rectify->add_option("--seed", rect_seed, "RNG seed");

  // eval
  std::string eval_sr, eval_hr;
  CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM report over two image directories");
  eval->add_option("--sr", eval_sr, "directory of restored images")->required();
  eval->add_option("--hr", eval_hr, "directory of ground-truth images")->required();

  // params
  std::string params_arch = "durcan-12";
  int params_channels = 0, params_reduction = 0, params_scale = 0;
  CLI::App* params = app.add_subcommand("params", "print the restorer's parameter breakdown");
  params->add_option("--arch", params_arch, "preset name (durcan-6_s, durcan-6, durcan-12, durcan-18)");
  params->add_option("--channels", params_channels, "override feature width");
  params->add_option("--reduction", params_reduction, "override attention reduction");
  params->add_option("--scale", params_scale, "override upscale factor");

  // gradcheck
  app.add_subcommand("gradcheck", "finite-difference audit of every operation and block");

  int rc = 0;
  train->callback([&] {
    train_seed_given = train->count("--seed") > 0;
    rc = run_train(train_config, train_out, train_seed, train_seed_given, print_every);
  });
  sr->callback([&] { rc = run_sr(sr_model, sr_in, sr_out); });
  gen->callback([&] { rc = run_gen_lr(gen_model, gen_in, gen_out); });
  degrade_cmd->callback([&] {
    for (int i = 0; i < 3; ++i) {
      deg.color_gain[i] = deg_gain[i];
      deg.color_bias[i] = deg_bias[i];
    }
    deg.seed = static_cast<uint64_t>(deg_seed);
    rc = run_degrade(deg_hr_dir, deg_out_dir, deg_count, deg);
  });
  rectify->callback([&] {
    rc = run_rectify(rect_shots, rect_corrs, rect_ref, rect_out, rect_scale, rect_threshold,
                     rect_iterations, static_cast<uint64_t>(rect_seed));
  });
  eval->callback([&] { rc = run_eval(eval_sr, eval_hr); });
  params->callback(
      [&] { rc = run_params(params_arch, params_channels, params_reduction, params_scale); });
  app.get_subcommand("gradcheck")->callback([&] { rc = run_gradcheck(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
