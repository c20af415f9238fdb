#include "tmra/nn/modules.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tmra/errors.hpp"

namespace tmra::nn {

using json = nlohmann::json;

size_t Module::parameter_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

namespace {

Tensor normal_tensor(std::vector<int> dims, double std, RngStream& rng) {
  std::vector<double> v(numel_of(dims));
  for (auto& x : v) x = rng.normal(0.0, std);
  return Tensor::from(std::move(dims), std::move(v), true);
}

Tensor const_param(std::vector<int> dims, double value) {
  std::vector<double> v(numel_of(dims), value);
  return Tensor::from(std::move(dims), std::move(v), true);
}

}  // namespace

// ------------------------------------------------------------- UNetGenerator

UNetGenerator::ConvBlock UNetGenerator::make_block(const std::string& name, int cin, int cout,
                                                   int k, RngStream& rng, bool norm_relu) {
  ConvBlock blk;
  blk.pad = (k - 1) / 2;
  blk.norm_relu = norm_relu;
  blk.w = register_param(name + ".w", normal_tensor({cout, cin, k, k}, cfg_.init_std, rng));
  blk.b = register_param(name + ".b", const_param({cout}, 0.0));
  if (norm_relu) {
    blk.gamma = register_param(name + ".gamma", const_param({cout}, 1.0));
    blk.beta = register_param(name + ".beta", const_param({cout}, 0.0));
  }
  return blk;
}

Tensor UNetGenerator::run_block(const ConvBlock& blk, const Tensor& x) const {
  Tensor y = bias_add(conv2d(x, blk.w, blk.pad), blk.b);
  if (!blk.norm_relu) return y;
  return relu(instance_norm(y, blk.gamma, blk.beta, cfg_.in_eps));
}

UNetGenerator::UNetGenerator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.coils < 1 || cfg.depth < 1 || cfg.base_filters < 1)
    throw parameter_error("UNetGenerator: bad configuration");
  RngStream rng(RngStream::derive_seed(seed, 0x6E47));
  const int io_ch = 2 * cfg.coils;

  auto width = [&](int s) { return cfg.base_filters << s; };

  for (int s = 0; s < cfg.depth; ++s) {
    const int cin = s == 0 ? io_ch : width(s - 1);
    std::vector<ConvBlock> stage;
    stage.push_back(make_block("enc" + std::to_string(s) + ".0", cin, width(s), 3, rng));
    stage.push_back(make_block("enc" + std::to_string(s) + ".1", width(s), width(s), 3, rng));
    stage.push_back(make_block("enc" + std::to_string(s) + ".2", width(s), width(s), 3, rng));
    enc_.push_back(std::move(stage));
  }
  for (int s = cfg.depth - 2; s >= 0; --s) {
    up_.push_back(make_block("up" + std::to_string(s), width(s + 1), width(s), 3, rng));
    std::vector<ConvBlock> stage;
    stage.push_back(make_block("dec" + std::to_string(s) + ".0", 2 * width(s), width(s), 3, rng));
    stage.push_back(make_block("dec" + std::to_string(s) + ".1", width(s), width(s), 3, rng));
    stage.push_back(make_block("dec" + std::to_string(s) + ".2", width(s), width(s), 3, rng));
    dec_.push_back(std::move(stage));
  }
  final_ = make_block("final", width(0), io_ch, 1, rng, /*norm_relu=*/false);
}

Tensor UNetGenerator::apply(const Tensor& x) const {
  if (x.dims().size() != 3 || x.dims()[0] != 2 * cfg_.coils)
    throw contract_error("UNetGenerator: expected [2C,H,W] input");
  const int div = 1 << cfg_.depth;
  if (x.dims()[1] % div != 0 || x.dims()[2] % div != 0)
    throw contract_error("UNetGenerator: spatial dims must be divisible by 2^depth");

  std::vector<Tensor> skips;
  Tensor h = x;
  for (int s = 0; s < cfg_.depth; ++s) {
    for (const auto& blk : enc_[s]) h = run_block(blk, h);
    if (s + 1 < cfg_.depth) {
      skips.push_back(h);
      h = avg_pool2(h);
    }
  }
  for (size_t i = 0; i < up_.size(); ++i) {
    h = run_block(up_[i], upsample_nearest2(h));
    h = concat_ch(h, skips[skips.size() - 1 - i]);
    for (const auto& blk : dec_[i]) h = run_block(blk, h);
  }
  Tensor out = run_block(final_, h);
  return cfg_.residual ? add(out, x) : out;
}

// --------------------------------------------------------- PatchDiscriminator

PatchDiscriminator::PatchDiscriminator(const DiscriminatorConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  RngStream rng(RngStream::derive_seed(seed, 0xD15C));
  w1_ = register_param("l1.w", normal_tensor({cfg.width1, 1, 1, 1}, cfg.init_std, rng));
  b1_ = register_param("l1.b", const_param({cfg.width1}, 0.0));
  g1_ = register_param("l1.gamma", const_param({cfg.width1}, 1.0));
  be1_ = register_param("l1.beta", const_param({cfg.width1}, 0.0));
  w2_ = register_param("l2.w", normal_tensor({cfg.width2, cfg.width1, 1, 1}, cfg.init_std, rng));
  b2_ = register_param("l2.b", const_param({cfg.width2}, 0.0));
  g2_ = register_param("l2.gamma", const_param({cfg.width2}, 1.0));
  be2_ = register_param("l2.beta", const_param({cfg.width2}, 0.0));
  w3_ = register_param("l3.w", normal_tensor({1, cfg.width2, 1, 1}, cfg.init_std, rng));
  b3_ = register_param("l3.b", const_param({1}, 0.0));
}

Tensor PatchDiscriminator::apply(const Tensor& x) const {
  if (x.dims().size() != 3 || x.dims()[0] != 1)
    throw contract_error("PatchDiscriminator: expected single-channel [1,H,W] input");
  Tensor h = bias_add(conv2d(x, w1_, 0), b1_);
  h = leaky_relu(instance_norm(h, g1_, be1_, cfg_.in_eps), cfg_.leaky_slope);
  h = bias_add(conv2d(h, w2_, 0), b2_);
  h = leaky_relu(instance_norm(h, g2_, be2_, cfg_.in_eps), cfg_.leaky_slope);
  return bias_add(conv2d(h, w3_, 0), b3_);
}

// -------------------------------------------------------------- param counts

size_t unet_expected_parameter_count(int coils, int depth, int base_filters) {
  const long io = 2L * coils;
  auto width = [&](int s) { return static_cast<long>(base_filters) << s; };
  auto block = [](long cin, long cout, long k, bool norm) {
    return k * k * cin * cout + cout + (norm ? 2 * cout : 0);
  };
  long n = 0;
  for (int s = 0; s < depth; ++s) {
    const long cin = s == 0 ? io : width(s - 1);
    n += block(cin, width(s), 3, true) + 2 * block(width(s), width(s), 3, true);
  }
  for (int s = depth - 2; s >= 0; --s) {
    n += block(width(s + 1), width(s), 3, true);          // up-conv
    n += block(2 * width(s), width(s), 3, true);          // post-concat
    n += 2 * block(width(s), width(s), 3, true);
  }
  n += block(width(0), io, 1, false);
  return static_cast<size_t>(n);
}

size_t discriminator_expected_parameter_count(int width1, int width2) {
  const long n = (1L * width1 + width1 + 2L * width1) +
                 (static_cast<long>(width1) * width2 + width2 + 2L * width2) +
                 (static_cast<long>(width2) * 1 + 1);
  return static_cast<size_t>(n);
}

// ---------------------------------------------------------- image <-> tensor

Tensor tensor_from_image(const MultiCoilImage& img, bool requires_grad) {
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  std::vector<double> v(2 * img.coils * plane);
  for (int c = 0; c < img.coils; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      v[c * plane + i] = img.data[c * plane + i].real();
      v[(img.coils + c) * plane + i] = img.data[c * plane + i].imag();
    }
  }
  return Tensor::from({2 * img.coils, img.height, img.width}, std::move(v), requires_grad);
}

MultiCoilImage image_from_tensor(const Tensor& t, int frame_index, ImageRole role) {
  if (t.dims().size() != 3 || t.dims()[0] % 2 != 0)
    throw contract_error("image_from_tensor: expected [2C,H,W] tensor");
  const int coils = t.dims()[0] / 2, h = t.dims()[1], w = t.dims()[2];
  const size_t plane = static_cast<size_t>(h) * w;
  MultiCoilImage img(coils, h, w, role, frame_index);
  for (int c = 0; c < coils; ++c)
    for (size_t i = 0; i < plane; ++i)
      img.data[c * plane + i] =
          cplx(t.values()[c * plane + i], t.values()[(coils + c) * plane + i]);
  return img;
}

MultiCoilImage generator_apply(const Module& g, const MultiCoilImage& y) {
  Tensor out = g.apply(tensor_from_image(y));
  if (out.dims() != std::vector<int>{2 * y.coils, y.height, y.width})
    throw contract_error("generator_apply: output shape contract violated");
  return image_from_tensor(out, y.frame_index, ImageRole::reconstruction);
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const Module& module, const std::string& arch_json, const std::string& path,
                     const CheckpointExtra* extra) {
  json j;
  j["format"] = "tmra-checkpoint-v1";
  j["kind"] = module.kind();
  j["arch"] = json::parse(arch_json);
  json params = json::array();
  size_t offset = 0;
  for (size_t i = 0; i < module.parameters().size(); ++i) {
    const Tensor& p = module.parameters()[i];
    params.push_back({{"name", module.parameter_names()[i]},
                      {"dims", p.dims()},
                      {"offset", offset},
                      {"count", p.numel()}});
    offset += p.numel();
  }
  j["params"] = std::move(params);
  if (extra) {
    j["epoch"] = extra->epoch;
    j["step"] = extra->step;
    j["vs_choices"] = extra->vs_choices;
    json arrays = json::array();
    for (const auto& [name, vals] : extra->arrays) {
      arrays.push_back({{"name", name}, {"offset", offset}, {"count", vals.size()}});
      offset += vals.size();
    }
    j["extra_arrays"] = std::move(arrays);
  }
  const std::string bin_name = std::filesystem::path(path).filename().string() + ".bin";
  j["bin"] = bin_name;

  std::ofstream jf(path);
  if (!jf) throw io_error("save_checkpoint: cannot open " + path);
  jf << j.dump(2);

  const std::string bin_path =
      (std::filesystem::path(path).parent_path() / bin_name).string();
  std::ofstream bf(bin_path, std::ios::binary);
  if (!bf) throw io_error("save_checkpoint: cannot open " + bin_path);
  for (const Tensor& p : module.parameters())
    bf.write(reinterpret_cast<const char*>(p.values().data()),
             static_cast<std::streamsize>(p.numel() * sizeof(double)));
  if (extra)
    for (const auto& [name, vals] : extra->arrays)
      bf.write(reinterpret_cast<const char*>(vals.data()),
               static_cast<std::streamsize>(vals.size() * sizeof(double)));
}

std::string checkpoint_arch(const std::string& path) {
  std::ifstream jf(path);
  if (!jf) throw io_error("checkpoint_arch: cannot open " + path);
  json j = json::parse(jf);
  return j.at("arch").dump();
}

std::string load_checkpoint_into(Module& module, const std::string& path,
                                 CheckpointExtra* extra) {
  std::ifstream jf(path);
  if (!jf) throw io_error("load_checkpoint_into: cannot open " + path);
  json j = json::parse(jf);
  if (j.at("kind").get<std::string>() != module.kind())
    throw contract_error("load_checkpoint_into: module kind mismatch");

  const std::string bin_path =
      (std::filesystem::path(path).parent_path() / j.at("bin").get<std::string>()).string();
  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) throw io_error("load_checkpoint_into: cannot open " + bin_path);

  const auto& params = j.at("params");
  if (params.size() != module.parameters().size())
    throw contract_error("load_checkpoint_into: parameter list mismatch");
  for (size_t i = 0; i < module.parameters().size(); ++i) {
    Tensor& p = module.parameters()[i];
    if (params[i].at("count").get<size_t>() != p.numel())
      throw contract_error("load_checkpoint_into: parameter size mismatch");
    bf.seekg(static_cast<std::streamoff>(params[i].at("offset").get<size_t>() * sizeof(double)));
    bf.read(reinterpret_cast<char*>(p.mutable_values().data()),
            static_cast<std::streamsize>(p.numel() * sizeof(double)));
    if (!bf) throw io_error("load_checkpoint_into: truncated parameter file");
  }
  if (extra && j.contains("extra_arrays")) {
    extra->epoch = j.value("epoch", -1);
    extra->step = j.value("step", -1L);
    extra->vs_choices = j.value("vs_choices", std::vector<int>{});
    extra->arrays.clear();
    for (const auto& a : j.at("extra_arrays")) {
      std::vector<double> vals(a.at("count").get<size_t>());
      bf.seekg(static_cast<std::streamoff>(a.at("offset").get<size_t>() * sizeof(double)));
      bf.read(reinterpret_cast<char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
      if (!bf) throw io_error("load_checkpoint_into: truncated extra array");
      extra->arrays.emplace_back(a.at("name").get<std::string>(), std::move(vals));
    }
  }
  return j.at("arch").dump();
}

}  // namespace tmra::nn
