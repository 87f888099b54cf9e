// funet: dataset generation, training, enhancement and evaluation for the
// wavelet-attention multi-task fingerprint enhancement network.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "funet/metrics.hpp"
#include "funet/model.hpp"
#include "funet/synth.hpp"
#include "funet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SizeArg {
  int h = 64, w = 64;
};

SizeArg parse_size(const std::string& s) {
  const auto pos = s.find('x');
  if (pos == std::string::npos) throw CLI::ValidationError("--size", "expected HxW, got " + s);
  SizeArg out;
  try {
    out.h = std::stoi(s.substr(0, pos));
    out.w = std::stoi(s.substr(pos + 1));
  } catch (const std::exception&) {
    throw CLI::ValidationError("--size", "expected HxW, got " + s);
  }
  if (out.h < 1 || out.w < 1) throw CLI::ValidationError("--size", "dims must be positive");
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw funet::Error("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw funet::Error("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

// config-file value applies only when the flag was not given on the line
template <class T>
void merge(const CLI::App& app, const json& cfg, const std::string& flag, const std::string& key,
           T& value) {
  if (app.count(flag) == 0 && cfg.contains(key)) value = cfg[key].get<T>();
}

void print_resolved(const std::string& cmd, const json& resolved) {
  std::cout << "[" << cmd << "] config: " << resolved.dump() << "\n";
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int run_gen_data(const CLI::App& app, const std::string& config_path, std::string out_dir,
                 int count, std::uint64_t seed, std::string size_str, std::string severity_str) {
  if (!config_path.empty()) {
    const json cfg = load_config_file(config_path);
    merge(app, cfg, "--out", "out", out_dir);
    merge(app, cfg, "--count", "count", count);
    merge(app, cfg, "--seed", "seed", seed);
    merge(app, cfg, "--size", "size", size_str);
    merge(app, cfg, "--severity", "severity", severity_str);
  }
  const SizeArg size = parse_size(size_str);
  double lo = 0.2, hi = 0.8;
  const auto colon = severity_str.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("--severity", "expected lo:hi, got " + severity_str);
  lo = std::stod(severity_str.substr(0, colon));
  hi = std::stod(severity_str.substr(colon + 1));

  print_resolved("gen-data", {{"out", out_dir},
                              {"count", count},
                              {"seed", seed},
                              {"size", size_str},
                              {"severity", severity_str}});
  const std::string manifest = funet::make_dataset(count, seed, out_dir, size.h, size.w, lo, hi);
  std::cout << "manifest: " << manifest << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out_ckpt, csv, resume, lambda = "0.8,0.1,0.1", heads = "enhancement,minutia,orientation";
  int steps = 2000, batch = 4, ckpt_interval = 500, eval_interval = 50;
  int depth = 4, base_channels = 16;
  double lr = 0.001;
  bool no_wa = false, no_ds = false, use_l2 = false;
  std::uint64_t seed = 0;
};

int run_train(const CLI::App& app, const std::string& config_path, TrainArgs a) {
  if (!config_path.empty()) {
    const json cfg = load_config_file(config_path);
    merge(app, cfg, "--data", "data", a.data);
    merge(app, cfg, "--out-ckpt", "out_ckpt", a.out_ckpt);
    merge(app, cfg, "--csv", "csv", a.csv);
    merge(app, cfg, "--resume", "resume", a.resume);
    merge(app, cfg, "--lambda", "lambda", a.lambda);
    merge(app, cfg, "--heads", "heads", a.heads);
    merge(app, cfg, "--steps", "steps", a.steps);
    merge(app, cfg, "--batch", "batch", a.batch);
    merge(app, cfg, "--ckpt-interval", "ckpt_interval", a.ckpt_interval);
    merge(app, cfg, "--eval-interval", "eval_interval", a.eval_interval);
    merge(app, cfg, "--depth", "depth", a.depth);
    merge(app, cfg, "--base-channels", "base_channels", a.base_channels);
    merge(app, cfg, "--lr", "lr", a.lr);
    merge(app, cfg, "--no-wa", "no_wa", a.no_wa);
    merge(app, cfg, "--no-ds", "no_ds", a.no_ds);
    merge(app, cfg, "--l2", "l2", a.use_l2);
    merge(app, cfg, "--seed", "seed", a.seed);
  }
  if (a.data.empty()) throw CLI::ValidationError("--data", "required");
  if (a.out_ckpt.empty()) throw CLI::ValidationError("--out-ckpt", "required");
  if (a.csv.empty()) a.csv = a.out_ckpt + ".history.csv";

  funet::TrainConfig tc;
  tc.lr = a.lr;
  tc.batch_size = a.batch;
  tc.steps = a.steps;
  tc.seed = a.seed;
  tc.use_l2_reconstruction = a.use_l2;
  tc.eval_interval = a.eval_interval;
  {
    std::istringstream ls(a.lambda);
    char comma;
    if (!(ls >> tc.weights.lambda_r >> comma >> tc.weights.lambda_m >> comma >>
          tc.weights.lambda_o))
      throw CLI::ValidationError("--lambda", "expected r,m,o");
  }

  const funet::Dataset data = funet::load_dataset(a.data);

  funet::ModelConfig mc;
  std::optional<funet::Checkpoint> resume_ckpt;
  std::uint64_t start_step = 0;
  if (!a.resume.empty()) {
    resume_ckpt = funet::checkpoint_load(a.resume);
    mc = resume_ckpt->model_cfg;
    start_step = resume_ckpt->step;
    tc.seed = resume_ckpt->train_seed;
  } else {
    mc.depth = a.depth;
    mc.base_channels = a.base_channels;
    mc.use_wa = !a.no_wa;
    mc.use_ds = !a.no_ds;
    mc.head_minutia = a.heads.find("minutia") != std::string::npos;
    mc.head_orientation = a.heads.find("orientation") != std::string::npos;
    if (a.heads.find("enhancement") == std::string::npos)
      throw CLI::ValidationError("--heads", "must include enhancement");
    mc.input_h = data.samples[0].clean.h;
    mc.input_w = data.samples[0].clean.w;
    mc.seed = a.seed;
  }
  mc.validate();

  print_resolved("train", {{"data", a.data},
                           {"out_ckpt", a.out_ckpt},
                           {"csv", a.csv},
                           {"steps", a.steps},
                           {"batch", a.batch},
                           {"lr", a.lr},
                           {"lambda", a.lambda},
                           {"heads", a.heads},
                           {"use_wa", mc.use_wa},
                           {"use_ds", mc.use_ds},
                           {"l2", a.use_l2},
                           {"resume", a.resume},
                           {"seed", tc.seed},
                           {"start_step", start_step},
                           {"model", json::parse(mc.to_json())}});

  funet::FingerUNet model(mc);
  funet::AdamState opt;
  if (resume_ckpt) {
    funet::apply_checkpoint(model, *resume_ckpt);
    if (resume_ckpt->has_adam) opt = resume_ckpt->adam;
  }
  std::cout << "parameters: " << model.param_count() << "\n";

  std::ofstream csv(a.csv, resume_ckpt ? std::ios::app : std::ios::trunc);
  if (!csv) throw funet::Error("cannot open CSV " + a.csv);
  if (!resume_ckpt) funet::write_csv_header(csv, mc);

  const int interval = a.ckpt_interval > 0 ? a.ckpt_interval : a.steps;
  int done = 0;
  while (done < a.steps) {
    funet::TrainConfig chunk = tc;
    chunk.steps = std::min(interval, a.steps - done);
    const auto history =
        funet::train(chunk, model, data, opt, start_step + std::uint64_t(done), &csv);
    done += chunk.steps;
    funet::checkpoint_save(a.out_ckpt, model, &opt, start_step + std::uint64_t(done), tc.seed);
    const auto& last = history.back();
    std::cout << "step " << last.step << " l_total " << last.loss.l_total << " (checkpoint "
              << a.out_ckpt << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// enhance
// ---------------------------------------------------------------------------

int run_enhance(const std::string& ckpt_path, const std::string& in_path,
                const std::string& out_dir, bool emit_minutiae, bool emit_orientation) {
  print_resolved("enhance", {{"ckpt", ckpt_path},
                             {"in", in_path},
                             {"out", out_dir},
                             {"emit_minutiae", emit_minutiae},
                             {"emit_orientation", emit_orientation}});
  const funet::Checkpoint ckpt = funet::checkpoint_load(ckpt_path);

  std::vector<fs::path> inputs;
  if (fs::is_directory(in_path)) {
    for (const auto& e : fs::directory_iterator(in_path))
      if (e.path().extension() == ".pgm") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.push_back(in_path);
  }
  if (inputs.empty()) throw funet::Error("no .pgm inputs under " + in_path);
  fs::create_directories(out_dir);

  std::optional<funet::FingerUNet> model;
  for (const auto& p : inputs) {
    const funet::Image img = funet::read_pgm(p.string());
    const int div = 1 << ckpt.model_cfg.depth;
    if (img.h % div != 0 || img.w % div != 0)
      throw funet::Error("input " + p.string() + " dims " + std::to_string(img.h) + "x" +
                         std::to_string(img.w) + " must be divisible by 2^depth = " +
                         std::to_string(div));
    if (!model || model->config().input_h != img.h || model->config().input_w != img.w) {
      funet::ModelConfig mc = ckpt.model_cfg;
      mc.input_h = img.h;
      mc.input_w = img.w;
      model.emplace(mc);
      funet::apply_checkpoint(*model, ckpt);
    }
    funet::NoGrad ng;
    auto x = funet::zeros<funet::Scalar>(funet::Shape::nchw(1, 1, img.h, img.w));
    for (std::int64_t i = 0; i < img.numel(); ++i) x->data[size_t(i)] = img.pix[size_t(i)];
    const auto out = model->forward(x, funet::Mode::eval);

    const std::string stem = p.stem().string();
    funet::Image enhanced(img.h, img.w);
    for (std::int64_t i = 0; i < img.numel(); ++i)
      enhanced.pix[size_t(i)] = out.enhanced->data[size_t(i)];
    funet::write_pgm((fs::path(out_dir) / (stem + ".enhanced.pgm")).string(), enhanced);

    if (emit_minutiae) {
      if (!out.minutia_map)
        throw funet::Error("--emit-minutiae: checkpointed model has no minutia head");
      funet::Image m(img.h, img.w);
      for (std::int64_t i = 0; i < img.numel(); ++i)
        m.pix[size_t(i)] = out.minutia_map->data[size_t(i)];
      funet::write_pgm((fs::path(out_dir) / (stem + ".minutiae.pgm")).string(), m);
    }
    if (emit_orientation) {
      if (!out.orientation)
        throw funet::Error("--emit-orientation: checkpointed model has no orientation head");
      funet::OrientationField f;
      f.h = img.h;
      f.w = img.w;
      f.theta.resize(size_t(img.numel()));
      const std::int64_t hw = img.numel();
      for (std::int64_t i = 0; i < hw; ++i)
        f.theta[size_t(i)] = float(funet::orientation_decode(
            double(out.orientation->data[size_t(i)]), double(out.orientation->data[size_t(hw + i)])));
      funet::write_orientation_bin((fs::path(out_dir) / (stem + ".orient.bin")).string(), f);
    }
    std::cout << "enhanced " << p.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path, bool identity) {
  print_resolved("eval", {{"ckpt", ckpt_path},
                          {"data", data_dir},
                          {"report", report_path},
                          {"identity", identity}});
  if (!identity && ckpt_path.empty()) throw funet::Error("--ckpt required unless --identity");

  json manifest;
  {
    std::ifstream mf(fs::path(data_dir) / "manifest.json");
    if (!mf) throw funet::Error("missing manifest.json under " + data_dir);
    mf >> manifest;
  }
  std::optional<funet::Checkpoint> ckpt;
  std::optional<funet::FingerUNet> model;
  if (!identity) ckpt = funet::checkpoint_load(ckpt_path);

  json per_sample = json::array();
  funet::MetricsReport mean;
  int n = 0;
  for (const auto& entry : manifest["samples"]) {
    const std::string name = entry["dir"].get<std::string>();
    const fs::path sdir = fs::path(data_dir) / name;
    if (!fs::exists(sdir / "clean.pgm"))
      throw funet::Error("sample " + name + " is missing clean.pgm ground truth");
    const funet::Image clean = funet::read_pgm((sdir / "clean.pgm").string());
    funet::Image pred;
    if (identity) {
      pred = clean;
    } else {
      const funet::Image degraded = funet::read_pgm((sdir / "degraded.pgm").string());
      if (!model || model->config().input_h != degraded.h || model->config().input_w != degraded.w) {
        funet::ModelConfig mc = ckpt->model_cfg;
        mc.input_h = degraded.h;
        mc.input_w = degraded.w;
        mc.validate();
        model.emplace(mc);
        funet::apply_checkpoint(*model, *ckpt);
      }
      pred = funet::enhance_image(*model, degraded);
    }
    const funet::MetricsReport r = funet::image_metrics(pred, clean);
    per_sample.push_back({{"sample", name},
                          {"ssim", r.ssim},
                          {"ssim_uniform", r.ssim_uniform},
                          {"psnr", r.psnr},
                          {"rmse", r.rmse}});
    mean.ssim += r.ssim;
    mean.ssim_uniform += r.ssim_uniform;
    mean.psnr += r.psnr;
    mean.rmse += r.rmse;
    ++n;
    std::cout << name << "  " << r.to_line() << "\n";
  }
  if (n == 0) throw funet::Error("no samples in " + data_dir);
  mean.ssim /= n;
  mean.ssim_uniform /= n;
  mean.psnr /= n;
  mean.rmse /= n;
  std::cout << "mean    " << mean.to_line() << "\n";

  if (!report_path.empty()) {
    json report = {{"samples", per_sample},
                   {"mean",
                    {{"ssim", mean.ssim},
                     {"ssim_uniform", mean.ssim_uniform},
                     {"psnr", mean.psnr},
                     {"rmse", mean.rmse}}}};
    std::ofstream rf(report_path);
    if (!rf) throw funet::Error("cannot write report " + report_path);
    rf << report.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fingerprint enhancement toolkit"};
  app.require_subcommand(1);

  std::string config_path;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic fingerprint dataset");
  std::string gd_out, gd_size = "64x64", gd_severity = "0.2:0.8";
  int gd_count = 0;
  std::uint64_t gd_seed = 0;
  gen->add_option("--out", gd_out, "output directory")->required();
  gen->add_option("--count", gd_count, "number of sample pairs")->required();
  gen->add_option("--seed", gd_seed, "base seed");
  gen->add_option("--size", gd_size, "dims as HxW (default 64x64)");
  gen->add_option("--severity", gd_severity, "severity range lo:hi (default 0.2:0.8)");
  gen->add_option("--config", config_path, "JSON config file (flags win)");

  // train
  auto* tr = app.add_subcommand("train", "train the model");
  TrainArgs ta;
  tr->add_option("--data", ta.data, "dataset directory");
  tr->add_option("--out-ckpt", ta.out_ckpt, "checkpoint output path");
  tr->add_option("--csv", ta.csv, "history CSV path (default <ckpt>.history.csv)");
  tr->add_option("--steps", ta.steps, "optimization steps");
  tr->add_option("--batch", ta.batch, "batch size");
  tr->add_option("--lr", ta.lr, "learning rate");
  tr->add_option("--lambda", ta.lambda, "loss weights r,m,o (default 0.8,0.1,0.1)");
  tr->add_option("--heads", ta.heads, "comma list of task heads (must include enhancement)");
  tr->add_flag("--no-wa", ta.no_wa, "max-pool downsampling instead of wavelet attention");
  tr->add_flag("--no-ds", ta.no_ds, "standard convolutions instead of depthwise separable");
  tr->add_flag("--l2", ta.use_l2, "l2 reconstruction loss instead of l1");
  tr->add_option("--depth", ta.depth, "encoder levels");
  tr->add_option("--base-channels", ta.base_channels, "channels at the first level");
  tr->add_option("--resume", ta.resume, "checkpoint to resume from");
  tr->add_option("--ckpt-interval", ta.ckpt_interval, "steps between checkpoints");
  tr->add_option("--eval-interval", ta.eval_interval, "steps between metric evaluations");
  tr->add_option("--seed", ta.seed, "training seed");
  tr->add_option("--config", config_path, "JSON config file (flags win)");

  // enhance
  auto* en = app.add_subcommand("enhance", "enhance fingerprint images");
  std::string en_ckpt, en_in, en_out;
  bool en_minutiae = false, en_orientation = false;
  en->add_option("--ckpt", en_ckpt, "checkpoint path")->required();
  en->add_option("--in", en_in, "input PGM image or directory")->required();
  en->add_option("--out", en_out, "output directory")->required();
  en->add_flag("--emit-minutiae", en_minutiae, "also write <name>.minutiae.pgm");
  en->add_flag("--emit-orientation", en_orientation, "also write <name>.orient.bin");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint against ground truth");
  std::string ev_ckpt, ev_data, ev_report;
  bool ev_identity = false;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path");
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--report", ev_report, "JSON report output path");
  ev->add_flag("--identity", ev_identity, "bypass the model; score clean against itself");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return run_gen_data(*gen, config_path, gd_out, gd_count, gd_seed, gd_size, gd_severity);
    if (tr->parsed()) return run_train(*tr, config_path, ta);
    if (en->parsed()) return run_enhance(en_ckpt, en_in, en_out, en_minutiae, en_orientation);
    if (ev->parsed()) return run_eval(ev_ckpt, ev_data, ev_report, ev_identity);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
