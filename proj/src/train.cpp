#include "funet/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace funet {

void adam_step(const std::vector<std::pair<std::string, TensorPtr<Scalar>>>& params,
               AdamState& st, Scalar lr) {
  if (st.m.empty()) {
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      st.m[i].assign(params[i].second->data.size(), 0);
      st.v[i].assign(params[i].second->data.size(), 0);
    }
  }
  if (st.m.size() != params.size()) throw Error("adam_step: state/param count mismatch");
  ++st.t;
  const double bc1 = 1.0 - std::pow(double(st.beta1), double(st.t));
  const double bc2 = 1.0 - std::pow(double(st.beta2), double(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].second;
    if (st.m[i].size() != p.data.size())
      throw Error("adam_step: shape mismatch for " + params[i].first);
    p.ensure_grad();
    for (size_t j = 0; j < p.data.size(); ++j) {
      const Scalar g = p.grad[j];
      st.m[i][j] = st.beta1 * st.m[i][j] + (1 - st.beta1) * g;
      st.v[i][j] = st.beta2 * st.v[i][j] + (1 - st.beta2) * g * g;
      const double mhat = double(st.m[i][j]) / bc1;
      const double vhat = double(st.v[i][j]) / bc2;
      p.data[j] -= Scalar(double(lr) * mhat / (std::sqrt(vhat) + double(st.eps)));
    }
  }
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b * 0x9e3779b97f4a7c15ULL);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

Batch assemble_batch(const Dataset& data, const TrainConfig& cfg, std::uint64_t step) {
  const int b = cfg.batch_size;
  const int h = data.samples[0].clean.h, w = data.samples[0].clean.w;
  Rng rng(mix(cfg.seed, step));

  Batch batch;
  batch.degraded = zeros<Scalar>(Shape::nchw(b, 1, h, w));
  batch.clean = zeros<Scalar>(Shape::nchw(b, 1, h, w));
  batch.minutia = zeros<Scalar>(Shape::nchw(b, 1, h, w));
  batch.orientation = zeros<Scalar>(Shape::nchw(b, 2, h, w));
  batch.mask = zeros<Scalar>(Shape::nchw(b, 1, h, w));

  const std::int64_t hw = std::int64_t(h) * w;
  for (int bi = 0; bi < b; ++bi) {
    const auto& base = data.samples[rng.below(data.samples.size())];
    AugmentParams ap;
    ap.rotation = rng.uniform(-1.0, 1.0) * cfg.aug_rotation_deg * kPi / 180.0;
    ap.dx = rng.uniform(-1.0, 1.0) * cfg.aug_translate_frac * w;
    ap.dy = rng.uniform(-1.0, 1.0) * cfg.aug_translate_frac * h;
    ap.shear = rng.uniform(-1.0, 1.0) * cfg.aug_shear;
    if (cfg.aug_flip) {
      ap.hflip = rng.below(2) == 1;
      ap.vflip = rng.below(2) == 1;
    }
    const SamplePair s = augment_pair(base, ap);
    for (std::int64_t i = 0; i < hw; ++i) {
      batch.degraded->data[size_t(bi * hw + i)] = s.degraded.pix[size_t(i)];
      batch.clean->data[size_t(bi * hw + i)] = s.clean.pix[size_t(i)];
      batch.minutia->data[size_t(bi * hw + i)] = s.minutia_map.pix[size_t(i)];
      batch.mask->data[size_t(bi * hw + i)] = Scalar(s.orientation.mask[size_t(i)]);
      double sv, cv;
      orientation_encode(double(s.orientation.theta[size_t(i)]), sv, cv);
      batch.orientation->data[size_t((std::int64_t(bi) * 2) * hw + i)] = Scalar(sv);
      batch.orientation->data[size_t((std::int64_t(bi) * 2 + 1) * hw + i)] = Scalar(cv);
    }
  }
  return batch;
}

void write_csv_header(std::ostream& os, const ModelConfig& cfg) {
  os << "step,l_r";
  if (cfg.head_minutia) os << ",l_m";
  if (cfg.head_orientation) os << ",l_o";
  os << ",l_total,ssim,psnr,rmse\n";
}

std::vector<TrainRecord> train(const TrainConfig& cfg, FingerUNet& model, const Dataset& data,
                               AdamState& opt, std::uint64_t start_step, std::ostream* csv) {
  cfg.validate();
  if (data.samples.empty()) throw Error("train: empty dataset");
  const auto& mc = model.config();
  if (data.samples[0].clean.h != mc.input_h || data.samples[0].clean.w != mc.input_w)
    throw Error("train: dataset dims " + std::to_string(data.samples[0].clean.h) + "x" +
                std::to_string(data.samples[0].clean.w) + " do not match model config " +
                std::to_string(mc.input_h) + "x" + std::to_string(mc.input_w));

  std::vector<TrainRecord> history;
  history.reserve(size_t(cfg.steps));
  for (int k = 0; k < cfg.steps; ++k) {
    const std::uint64_t step = start_step + std::uint64_t(k);
    model.zero_grad();
    const Batch batch = assemble_batch(data, cfg, step);

    Tape tape;
    const auto out = model.forward(batch.degraded, Mode::train);
    auto l_r = cfg.use_l2_reconstruction ? l2_loss(out.enhanced, batch.clean)
                                         : l1_loss(out.enhanced, batch.clean);
    TensorPtr<Scalar> l_m, l_o;
    if (out.minutia_map) l_m = minutia_loss_bce(out.minutia_map, batch.minutia);
    if (out.orientation) l_o = orientation_loss_mse(out.orientation, batch.orientation, batch.mask);

    TrainRecord rec;
    rec.step = std::int64_t(step) + 1;  // records count completed steps, 1-based
    auto total = total_loss(l_r, l_m, l_o, cfg.weights, &rec.loss);
    if (!std::isfinite(double(rec.loss.l_total)))
      throw Error("train: non-finite loss at step " + std::to_string(step + 1) + " (l_r=" +
                  std::to_string(rec.loss.l_r) + " l_m=" + std::to_string(rec.loss.l_m) +
                  " l_o=" + std::to_string(rec.loss.l_o) + ")");
    tape.backward(total);
    adam_step(model.named_params(), opt, Scalar(cfg.lr));

    const bool do_eval =
        cfg.eval_interval > 0 && ((step + 1) % std::uint64_t(cfg.eval_interval) == 0);
    if (do_eval) {
      // batch-mean metrics of enhanced vs clean
      const int h = mc.input_h, w = mc.input_w;
      const std::int64_t hw = std::int64_t(h) * w;
      MetricsReport mean;
      for (int bi = 0; bi < cfg.batch_size; ++bi) {
        Image pred(h, w), target(h, w);
        for (std::int64_t i = 0; i < hw; ++i) {
          pred.pix[size_t(i)] = out.enhanced->data[size_t(bi * hw + i)];
          target.pix[size_t(i)] = batch.clean->data[size_t(bi * hw + i)];
        }
        const MetricsReport r = image_metrics(pred, target);
        mean.ssim += r.ssim / cfg.batch_size;
        mean.ssim_uniform += r.ssim_uniform / cfg.batch_size;
        mean.psnr += r.psnr / cfg.batch_size;
        mean.rmse += r.rmse / cfg.batch_size;
      }
      rec.metrics = mean;
    }
    if (csv) {
      *csv << rec.step << "," << rec.loss.l_r;
      if (mc.head_minutia) *csv << "," << rec.loss.l_m;
      if (mc.head_orientation) *csv << "," << rec.loss.l_o;
      *csv << "," << rec.loss.l_total;
      if (rec.metrics)
        *csv << "," << rec.metrics->ssim << "," << rec.metrics->psnr << "," << rec.metrics->rmse;
      else
        *csv << ",,,";
      *csv << "\n";
    }
    history.push_back(std::move(rec));
  }
  return history;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'U', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff), (unsigned char)(v >> 24 & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, std::uint32_t(v & 0xffffffffULL));
  put_u32(os, std::uint32_t(v >> 32));
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

void put_floats(std::ostream& os, const std::vector<Scalar>& v) {
  static_assert(sizeof(Scalar) == 4);
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
}

struct Reader {
  std::ifstream f;
  std::string path;

  explicit Reader(const std::string& p) : f(p, std::ios::binary), path(p) {
    if (!f) throw Error("checkpoint: cannot open " + p);
  }
  void bytes(void* dst, size_t n) {
    f.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (size_t(f.gcount()) != n) throw Error("checkpoint: truncated file " + path);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | std::uint64_t(u32()) << 32;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw Error("checkpoint: implausible string length in " + path);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<Scalar> floats(std::uint32_t count) {
    std::vector<Scalar> v(count);
    bytes(v.data(), size_t(count) * 4);
    return v;
  }
};

}  // namespace

void checkpoint_save(const std::string& path, FingerUNet& model, const AdamState* opt,
                     std::uint64_t step, std::uint64_t train_seed) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint_save: cannot open " + path);
  f.write(kMagic, 4);
  put_u32(f, kVersion);
  put_string(f, model.config().to_json());

  const auto& params = model.named_params();
  put_u32(f, std::uint32_t(params.size()));
  for (const auto& [name, p] : params) {
    put_string(f, name);
    put_u32(f, std::uint32_t(p->shape.rank()));
    for (int i = 0; i < p->shape.rank(); ++i) put_u32(f, std::uint32_t(p->shape[i]));
    put_floats(f, p->data);
  }
  auto buffers = model.named_buffers();
  put_u32(f, std::uint32_t(buffers.size()));
  for (const auto& [name, buf] : buffers) {
    put_string(f, name);
    put_u32(f, std::uint32_t(buf->size()));
    put_floats(f, *buf);
  }
  f.put(opt ? char(1) : char(0));
  if (opt) {
    put_u64(f, std::uint64_t(opt->t));
    for (size_t i = 0; i < params.size(); ++i) {
      put_floats(f, opt->m[i]);
      put_floats(f, opt->v[i]);
    }
  }
  put_u64(f, step);
  put_u64(f, train_seed);
  if (!f) throw Error("checkpoint_save: write failed for " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(path + " is not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw Error("checkpoint " + path + ": version " + std::to_string(version) +
                " not supported (expected " + std::to_string(kVersion) + ")");
  Checkpoint ckpt;
  ckpt.model_cfg = ModelConfig::from_json(r.str());

  const std::uint32_t np = r.u32();
  for (std::uint32_t i = 0; i < np; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw Error("checkpoint: bad rank for " + name);
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) count *= r.u32();
    if (count > (1ull << 30)) throw Error("checkpoint: implausible size for " + name);
    ckpt.params.emplace_back(std::move(name), r.floats(std::uint32_t(count)));
  }
  const std::uint32_t nb = r.u32();
  for (std::uint32_t i = 0; i < nb; ++i) {
    std::string name = r.str();
    const std::uint32_t count = r.u32();
    if (count > (1u << 26)) throw Error("checkpoint: implausible buffer size for " + name);
    ckpt.buffers.emplace_back(std::move(name), r.floats(count));
  }
  char has_adam = 0;
  r.bytes(&has_adam, 1);
  ckpt.has_adam = has_adam != 0;
  if (ckpt.has_adam) {
    ckpt.adam.t = std::int64_t(r.u64());
    for (const auto& [name, data] : ckpt.params) {
      ckpt.adam.m.push_back(r.floats(std::uint32_t(data.size())));
      ckpt.adam.v.push_back(r.floats(std::uint32_t(data.size())));
    }
  }
  ckpt.step = r.u64();
  ckpt.train_seed = r.u64();
  return ckpt;
}

void apply_checkpoint(FingerUNet& model, const Checkpoint& ckpt) {
  const auto& params = model.named_params();
  if (params.size() != ckpt.params.size())
    throw Error("apply_checkpoint: model has " + std::to_string(params.size()) +
                " parameters, checkpoint has " + std::to_string(ckpt.params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != ckpt.params[i].first)
      throw Error("apply_checkpoint: parameter name mismatch: model '" + params[i].first +
                  "' vs checkpoint '" + ckpt.params[i].first + "'");
    if (params[i].second->data.size() != ckpt.params[i].second.size())
      throw Error("apply_checkpoint: shape mismatch for parameter " + params[i].first);
    params[i].second->data = ckpt.params[i].second;
  }
  auto buffers = model.named_buffers();
  if (buffers.size() != ckpt.buffers.size())
    throw Error("apply_checkpoint: buffer count mismatch");
  for (size_t i = 0; i < buffers.size(); ++i) {
    if (buffers[i].first != ckpt.buffers[i].first)
      throw Error("apply_checkpoint: buffer name mismatch for " + buffers[i].first);
    if (buffers[i].second->size() != ckpt.buffers[i].second.size())
      throw Error("apply_checkpoint: buffer size mismatch for " + buffers[i].first);
    *buffers[i].second = ckpt.buffers[i].second;
  }
}

Image enhance_image(FingerUNet& model, const Image& input) {
  const auto& mc = model.config();
  if (input.h != mc.input_h || input.w != mc.input_w)
    throw Error("enhance_image: input " + std::to_string(input.h) + "x" + std::to_string(input.w) +
                " does not match model " + std::to_string(mc.input_h) + "x" +
                std::to_string(mc.input_w));
  NoGrad ng;
  auto x = zeros<Scalar>(Shape::nchw(1, 1, input.h, input.w));
  for (std::int64_t i = 0; i < input.numel(); ++i) x->data[size_t(i)] = input.pix[size_t(i)];
  const auto out = model.forward(x, Mode::eval);
  Image result(input.h, input.w);
  for (std::int64_t i = 0; i < input.numel(); ++i) result.pix[size_t(i)] = out.enhanced->data[size_t(i)];
  return result;
}

}  // namespace funet
